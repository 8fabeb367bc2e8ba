use ndarray::Array2;

use crate::error::{Error, Result};

pub const STITCH_DIAG: f64 = 0.9;
pub const STITCH_OFF_DIAG: f64 = 0.05;

/// 3×3 mixing matrix; row `m` holds the weights tower `m` gives to the
/// node, edge and graph activations.
#[derive(Debug, Clone, PartialEq)]
pub struct StitchUnit {
    pub alpha: Array2<f64>,
}

impl Default for StitchUnit {
    fn default() -> Self {
        StitchUnit::with_init(STITCH_DIAG, STITCH_OFF_DIAG)
    }
}

impl StitchUnit {
    pub fn with_init(diag: f64, off_diag: f64) -> Self {
        StitchUnit {
            alpha: Array2::from_shape_fn((3, 3), |(i, j)| if i == j { diag } else { off_diag }),
        }
    }

    pub fn identity() -> Self {
        StitchUnit::with_init(1.0, 0.0)
    }

    pub fn new(alpha: Array2<f64>) -> Result<Self> {
        if alpha.dim() != (3, 3) {
            return Err(Error::shape(format!("stitch matrix must be 3x3, got {:?}", alpha.dim())));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::domain("stitch coefficients must be finite"));
        }
        Ok(StitchUnit { alpha })
    }
}

/// Mixes three same-shape activations: output `m` is `Σ_k alpha[m, k]·e_k`.
pub fn stitch_apply(
    unit: &StitchUnit,
    e_n: &Array2<f64>,
    e_e: &Array2<f64>,
    e_g: &Array2<f64>,
) -> Result<[Array2<f64>; 3]> {
    if e_n.dim() != e_e.dim() || e_n.dim() != e_g.dim() {
        return Err(Error::shape(format!(
            "stitch inputs differ: {:?}, {:?}, {:?}",
            e_n.dim(),
            e_e.dim(),
            e_g.dim()
        )));
    }
    let inputs = [e_n, e_e, e_g];
    Ok([0, 1, 2].map(|m| {
        let mut out = Array2::zeros(e_n.raw_dim());
        for (k, e) in inputs.iter().enumerate() {
            out.scaled_add(unit.alpha[[m, k]], *e);
        }
        out
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_passes_through() {
        let e = [array![[1.0, -2.0]], array![[3.0, 0.5]], array![[0.0, 7.0]]];
        let out = stitch_apply(&StitchUnit::identity(), &e[0], &e[1], &e[2]).unwrap();
        assert_eq!(out, e);
    }

    #[test]
    fn zero_matrix_gives_zeros() {
        let u = StitchUnit::new(Array2::zeros((3, 3))).unwrap();
        let e = array![[1.0, 2.0], [3.0, 4.0]];
        for o in stitch_apply(&u, &e, &e, &e).unwrap() {
            assert!(o.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn upper_coupling() {
        let u = StitchUnit::new(array![[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let ones = Array2::from_elem((2, 3), 1.0);
        let twos = Array2::from_elem((2, 3), 2.0);
        let g = Array2::from_elem((2, 3), -4.0);
        let [n, e, gg] = stitch_apply(&u, &ones, &twos, &g).unwrap();
        assert_eq!(n, Array2::from_elem((2, 3), 3.0));
        assert_eq!(e, twos);
        assert_eq!(gg, g);
    }

    #[test]
    fn shape_mismatch_and_validation() {
        let a = Array2::zeros((2, 2));
        let b = Array2::zeros((2, 3));
        assert!(stitch_apply(&StitchUnit::default(), &a, &a, &b).is_err());
        assert!(StitchUnit::new(Array2::zeros((2, 3))).is_err());
        assert!(StitchUnit::new(Array2::from_elem((3, 3), f64::NAN)).is_err());
        let d = StitchUnit::default();
        assert_eq!(d.alpha[[1, 1]], 0.9);
        assert_eq!(d.alpha[[0, 2]], 0.05);
    }
}
