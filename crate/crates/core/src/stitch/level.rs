use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Granularity of a detection target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Node,
    Edge,
    Graph,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Node, Level::Edge, Level::Graph];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Level::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::Node => "node",
            Level::Edge => "edge",
            Level::Graph => "graph",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Level> {
        match s.trim().to_ascii_lowercase().as_str() {
            "node" | "n" => Ok(Level::Node),
            "edge" | "e" => Ok(Level::Edge),
            "graph" | "g" => Ok(Level::Graph),
            other => Err(Error::config(format!("unknown level {other:?}"))),
        }
    }
}

/// Subset of the three levels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<Level>", from = "Vec<Level>")]
pub struct LevelSet([bool; 3]);

impl LevelSet {
    pub const EMPTY: LevelSet = LevelSet([false; 3]);
    pub const ALL: LevelSet = LevelSet([true; 3]);

    pub fn only(level: Level) -> LevelSet {
        let mut s = LevelSet::EMPTY;
        s.insert(level);
        s
    }

    pub fn contains(self, level: Level) -> bool {
        self.0[level.index()]
    }

    pub fn insert(&mut self, level: Level) {
        self.0[level.index()] = true;
    }

    pub fn remove(&mut self, level: Level) {
        self.0[level.index()] = false;
    }

    pub fn len(self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    pub fn complement(self) -> LevelSet {
        LevelSet(self.0.map(|b| !b))
    }

    pub fn intersect(self, other: LevelSet) -> LevelSet {
        LevelSet([0, 1, 2].map(|i| self.0[i] && other.0[i]))
    }

    pub fn union(self, other: LevelSet) -> LevelSet {
        LevelSet([0, 1, 2].map(|i| self.0[i] || other.0[i]))
    }

    pub fn iter(self) -> impl Iterator<Item = Level> {
        Level::ALL.into_iter().filter(move |&l| self.contains(l))
    }
}

impl FromIterator<Level> for LevelSet {
    fn from_iter<I: IntoIterator<Item = Level>>(iter: I) -> Self {
        let mut s = LevelSet::EMPTY;
        for l in iter {
            s.insert(l);
        }
        s
    }
}

impl From<Vec<Level>> for LevelSet {
    fn from(v: Vec<Level>) -> Self {
        v.into_iter().collect()
    }
}

impl From<LevelSet> for Vec<Level> {
    fn from(s: LevelSet) -> Self {
        s.iter().collect()
    }
}

/// Comma-separated names; `none` or the empty string is the empty set and
/// `all` is every level.
impl FromStr for LevelSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<LevelSet> {
        match s.trim() {
            "" | "none" => Ok(LevelSet::EMPTY),
            "all" => Ok(LevelSet::ALL),
            list => list.split(',').map(str::parse).collect(),
        }
    }
}

impl fmt::Display for LevelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("none");
        }
        let names: Vec<&str> = self.iter().map(Level::name).collect();
        f.write_str(&names.join(","))
    }
}
