//! Non-negative fractions compared by cross-multiplication.
//!
//! Rayleigh quotients and marginal gains are kept as `(num, den)` pairs so
//! that zero-energy denominators never trigger a division. Ordering rules:
//!
//! * `den > 0`: the usual value `num / den`.
//! * `den == 0, num > 0`: positive infinity; all such fractions are equal.
//! * `den == 0, num == 0`: treated as zero.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Fraction {
    pub num: f64,
    pub den: f64,
}

enum Class {
    Finite(f64, f64),
    Infinite,
}

impl Fraction {
    pub const ZERO: Fraction = Fraction { num: 0.0, den: 1.0 };

    /// Panics if either part is negative or not finite.
    pub fn new(num: f64, den: f64) -> Self {
        assert!(
            num.is_finite() && den.is_finite() && num >= 0.0 && den >= 0.0,
            "fraction parts must be finite and non-negative, got {num}/{den}"
        );
        Fraction { num, den }
    }

    fn class(&self) -> Class {
        if self.den > 0.0 {
            Class::Finite(self.num, self.den)
        } else if self.num > 0.0 {
            Class::Infinite
        } else {
            Class::Finite(0.0, 1.0)
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self.class(), Class::Infinite)
    }

    /// Lossy conversion; `+inf` for positive numerators over zero.
    pub fn value(&self) -> f64 {
        match self.class() {
            Class::Finite(n, d) => n / d,
            Class::Infinite => f64::INFINITY,
        }
    }
}

impl Add for Fraction {
    type Output = Fraction;

    /// Mediant sum `(a + c) / (b + d)`: the quotient of the union of two
    /// disjoint contributions, not the sum of their values.
    fn add(self, rhs: Fraction) -> Fraction {
        Fraction {
            num: self.num + rhs.num,
            den: self.den + rhs.den,
        }
    }
}

impl Ord for Fraction {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.class(), other.class()) {
            (Class::Infinite, Class::Infinite) => Ordering::Equal,
            (Class::Infinite, Class::Finite(..)) => Ordering::Greater,
            (Class::Finite(..), Class::Infinite) => Ordering::Less,
            (Class::Finite(a, b), Class::Finite(c, d)) => (a * d).total_cmp(&(c * b)),
        }
    }
}

impl PartialOrd for Fraction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Fraction {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Fraction {}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}
