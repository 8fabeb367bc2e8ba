//! Exhaustive verification helpers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dp::mrq_sample_tree;
use super::tree::{build_rooted_tree, RootedTree};
use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::graph::{Graph, GraphBuilder, Signal};

/// Largest tree accepted by [`brute_force_max_rq`].
pub const BRUTE_FORCE_NODE_CAP: usize = 20;

/// Enumerates every connected subtree containing all roots and returns the
/// maximum quotient over tree edges with the lexicographically smallest
/// node set (sorted global ids) achieving it.
pub fn brute_force_max_rq(tree: &RootedTree, signal: &Signal) -> Result<(Fraction, Vec<usize>)> {
    let n = tree.len();
    if n > BRUTE_FORCE_NODE_CAP {
        return Err(Error::domain(format!(
            "{n} tree nodes exceeds the brute-force cap of {BRUTE_FORCE_NODE_CAP}"
        )));
    }
    let r = tree.roots().len();
    let free = n - r;
    let mut member = vec![false; n];
    let mut best: Option<(Fraction, Vec<usize>)> = None;
    for mask in 0u32..(1u32 << free) {
        for (i, m) in member.iter_mut().enumerate() {
            *m = i < r || mask & (1 << (i - r)) != 0;
        }
        let closed = (r..n).all(|l| !member[l] || member[tree.local_parent(l).expect("non-root")]);
        if !closed {
            continue;
        }
        let rq = tree.local_rq(signal, &member);
        let better = match &best {
            None => true,
            Some((b, set)) => rq > *b || (rq == *b && sorted_nodes(tree, &member) < *set),
        };
        if better {
            best = Some((rq, sorted_nodes(tree, &member)));
        }
    }
    Ok(best.expect("the root set alone is always feasible"))
}

fn sorted_nodes(tree: &RootedTree, member: &[bool]) -> Vec<usize> {
    let mut v: Vec<usize> = (0..tree.len())
        .filter(|&l| member[l])
        .map(|l| tree.global(l))
        .collect();
    v.sort_unstable();
    v
}

/// Marginal gain of adding `candidate` to `current`: edge energy between
/// the two sets plus energy inside `candidate`, over the signal energy of
/// `candidate`. All graph edges count.
pub fn delta_gain(
    candidate: &[usize],
    current: &[usize],
    graph: &Graph,
    signal: &Signal,
) -> Result<Fraction> {
    let n = graph.node_count();
    if candidate.is_empty() {
        return Err(Error::domain("empty candidate set"));
    }
    // 0 = outside, 1 = current, 2 = candidate
    let mut side = vec![0u8; n];
    for &v in current {
        if v >= n {
            return Err(Error::domain(format!("node {v} not in graph")));
        }
        side[v] = 1;
    }
    for &v in candidate {
        if v >= n {
            return Err(Error::domain(format!("node {v} not in graph")));
        }
        if side[v] == 1 {
            return Err(Error::domain(format!("node {v} in both sets")));
        }
        side[v] = 2;
    }

    // Every candidate node must reach `current` through candidate nodes.
    let mut reached = vec![false; n];
    let mut stack: Vec<usize> = candidate
        .iter()
        .copied()
        .filter(|&v| graph.neighbors(v).iter().any(|&w| side[w] == 1))
        .collect();
    for &v in &stack {
        reached[v] = true;
    }
    while let Some(v) = stack.pop() {
        for &w in graph.neighbors(v) {
            if side[w] == 2 && !reached[w] {
                reached[w] = true;
                stack.push(w);
            }
        }
    }
    if candidate.iter().any(|&v| !reached[v]) {
        return Err(Error::domain("candidate set is not connected to the current set"));
    }

    let mut num = 0.0;
    let mut den = 0.0;
    for &v in candidate {
        den += signal[v] * signal[v];
        for &w in graph.neighbors(v) {
            // Internal candidate edges are visited from both ends.
            if side[w] == 1 || (side[w] == 2 && w > v) {
                let d = signal[v] - signal[w];
                num += d * d;
            }
        }
    }
    Ok(Fraction::new(num, den))
}

/// Outcome of [`random_oracle_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckReport {
    pub trials: usize,
    pub matches: usize,
    pub max_nodes: usize,
    pub max_depth: usize,
    pub seed: u64,
    /// Trial indices where the sampler and enumeration disagree.
    pub mismatches: Vec<usize>,
}

impl OracleCheckReport {
    pub fn passed(&self) -> bool {
        self.matches == self.trials
    }
}

/// Compares the sampler with exhaustive enumeration on `trials` random
/// rooted trees.
///
/// Each trial draws a random graph on `1..=max_nodes` nodes, a root and a
/// depth in `1..=max_depth`. Signal values lie on the grid `k/64` in
/// `[-4, 4]`, which keeps every quotient exact in `f64` so the two results
/// can be compared with fraction equality.
pub fn random_oracle_check(trials: usize, max_nodes: usize, max_depth: usize, seed: u64) -> Result<OracleCheckReport> {
    if max_nodes == 0 || max_nodes > BRUTE_FORCE_NODE_CAP {
        return Err(Error::config(format!(
            "max_nodes must be in 1..={BRUTE_FORCE_NODE_CAP}"
        )));
    }
    if max_depth == 0 {
        return Err(Error::config("max_depth must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = Vec::new();
    for trial in 0..trials {
        let n = rng.random_range(1..=max_nodes);
        let p = rng.random_range(0.1..0.7);
        let mut b = GraphBuilder::new(n);
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random_bool(p) {
                    b.add_edge(u, v)?;
                }
            }
        }
        let graph = b.build()?;
        let signal = Signal::new((0..n).map(|_| rng.random_range(-256i32..=256) as f64 / 64.0).collect())?;
        let root = rng.random_range(0..n);
        let depth = rng.random_range(1..=max_depth);
        let tree = build_rooted_tree(&graph, &[root], depth)?;
        let (best, _) = brute_force_max_rq(&tree, &signal)?;
        let sampled = mrq_sample_tree(&tree, &signal);
        if sampled.rq != best || tree.rayleigh_quotient(&signal, &sampled.nodes)? != best {
            mismatches.push(trial);
        }
    }
    Ok(OracleCheckReport {
        trials,
        matches: trials - mismatches.len(),
        max_nodes,
        max_depth,
        seed,
        mismatches,
    })
}
