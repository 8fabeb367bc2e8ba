//! Maximum-Rayleigh-quotient subtree sampling.
//!
//! For a node (or edge) target the sampler builds the BFS spanning tree of
//! its `depth`-hop neighborhood and returns the connected, root-containing
//! subtree whose Rayleigh quotient over tree edges is largest. The search
//! is exact: a bottom-up pass stores, for every non-root node, the best
//! quotient reachable inside its own subtree (counting the edge to its
//! parent), and a top-down greedy pass merges those records in decreasing
//! order while they strictly raise the current quotient.

mod dp;
mod oracle;
mod pooling;
mod tree;

pub use dp::{
    get_max_deltas, mrq_sample_edge, mrq_sample_node, mrq_sample_tree, sample_targets, DeltaRecord, DeltaTable,
    SampledSubgraph, Target,
};
pub use oracle::{
    brute_force_max_rq, delta_gain, random_oracle_check, OracleCheckReport, BRUTE_FORCE_NODE_CAP,
};
pub use pooling::{pooling_weights, DEFAULT_DECAY};
pub use tree::{build_rooted_tree, RootedTree};

/// Default neighborhood depth.
pub const DEFAULT_DEPTH: usize = 2;
