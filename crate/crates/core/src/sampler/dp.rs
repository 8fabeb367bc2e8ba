use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pooling::{pooling_weights, DEFAULT_DECAY};
use super::tree::{build_rooted_tree, RootedTree};
use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::graph::{Graph, Signal};

/// What a subgraph is sampled for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Node(usize),
    Edge(usize, usize),
}

impl Target {
    pub fn roots(&self) -> Vec<usize> {
        match *self {
            Target::Node(v) => vec![v],
            Target::Edge(u, v) => vec![u.min(v), u.max(v)],
        }
    }
}

/// Best quotient reachable inside the subtree of `node`, counting the edge
/// to its parent, together with the nodes that achieve it and the child
/// records that were not (yet) profitable.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRecord {
    pub node: usize,
    pub delta: Fraction,
    /// Sorted global ids; always contains `node`.
    pub selected: Vec<usize>,
    /// Global ids of the roots of inferior candidate records, sorted.
    pub inferior: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Rec {
    delta: Fraction,
    merged: Vec<usize>,
    inferior: Vec<usize>,
}

#[derive(Debug, PartialEq, Eq)]
struct Candidate {
    delta: Fraction,
    id: usize,
    local: usize,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap: larger delta first, then lower node id.
        self.delta
            .cmp(&other.delta)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Merge {
    state: Fraction,
    merged: Vec<usize>,
    inferior: Vec<usize>,
    trace: Vec<Fraction>,
}

/// Stage-one records for every non-root node of a tree.
pub struct DeltaTable<'a> {
    tree: &'a RootedTree,
    recs: Vec<Option<Rec>>,
}

impl<'a> DeltaTable<'a> {
    /// Bottom-up pass over the whole tree.
    pub fn new(tree: &'a RootedTree, signal: &Signal) -> Self {
        let mut recs: Vec<Option<Rec>> = vec![None; tree.len()];
        // BFS order lists parents before children.
        for l in (0..tree.len()).rev() {
            let Some(p) = tree.local_parent(l) else {
                continue;
            };
            let x = signal[tree.global(l)];
            let d = x - signal[tree.global(p)];
            let init = Fraction::new(d * d, x * x);
            let m = greedy_merge(tree, &recs, init, tree.local_children(l));
            recs[l] = Some(Rec {
                delta: m.state,
                merged: m.merged,
                inferior: m.inferior,
            });
        }
        DeltaTable { tree, recs }
    }

    pub fn record(&self, v: usize) -> Option<DeltaRecord> {
        let l = self.tree.local(v)?;
        let rec = self.recs[l].as_ref()?;
        let mut selected = vec![v];
        self.expand(&rec.merged, &mut selected);
        selected.sort_unstable();
        let mut inferior: Vec<usize> = rec.inferior.iter().map(|&i| self.tree.global(i)).collect();
        inferior.sort_unstable();
        Some(DeltaRecord {
            node: v,
            delta: rec.delta,
            selected,
            inferior,
        })
    }

    fn expand(&self, merged: &[usize], out: &mut Vec<usize>) {
        let mut stack: Vec<usize> = merged.to_vec();
        while let Some(c) = stack.pop() {
            out.push(self.tree.global(c));
            if let Some(rec) = &self.recs[c] {
                stack.extend_from_slice(&rec.merged);
            }
        }
    }
}

fn candidate(tree: &RootedTree, recs: &[Option<Rec>], l: usize) -> Candidate {
    Candidate {
        delta: recs[l].as_ref().expect("child record computed").delta,
        id: tree.global(l),
        local: l,
    }
}

/// Merge candidates in decreasing order while each one strictly raises the
/// running quotient. Merging a record activates its inferior candidates.
/// Whatever is left in the queue, including the first rejected candidate,
/// becomes the inferior set.
fn greedy_merge(
    tree: &RootedTree,
    recs: &[Option<Rec>],
    init: Fraction,
    initial: &[usize],
) -> Merge {
    let mut queue: BinaryHeap<Candidate> =
        initial.iter().map(|&c| candidate(tree, recs, c)).collect();
    let mut state = init;
    let mut merged = Vec::new();
    let mut trace = Vec::new();
    while let Some(top) = queue.peek() {
        let next = state + top.delta;
        if next <= state {
            break;
        }
        let c = queue.pop().expect("peeked").local;
        state = next;
        merged.push(c);
        trace.push(state);
        let rec = recs[c].as_ref().expect("candidate record computed");
        for &i in &rec.inferior {
            queue.push(candidate(tree, recs, i));
        }
    }
    let mut inferior: Vec<usize> = queue.into_iter().map(|c| c.local).collect();
    inferior.sort_unstable();
    Merge {
        state,
        merged,
        inferior,
        trace,
    }
}

/// Stage-one record of a non-root tree node.
pub fn get_max_deltas(tree: &RootedTree, signal: &Signal, v: usize) -> Result<DeltaRecord> {
    match tree.parent(v) {
        Some(_) => Ok(DeltaTable::new(tree, signal)
            .record(v)
            .expect("non-root node has a record")),
        None if tree.contains(v) => Err(Error::domain(format!("node {v} is a root"))),
        None => Err(Error::domain(format!("node {v} not in tree"))),
    }
}

/// Connected root-containing subtree of maximum Rayleigh quotient.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSubgraph {
    pub target: Target,
    /// Sorted global ids.
    pub nodes: Vec<usize>,
    /// Hop distance to the nearest root, aligned with `nodes`.
    pub hops: Vec<usize>,
    pub rq: Fraction,
    /// Aligned with `nodes`; sums to one.
    pub weights: Vec<f64>,
    /// Quotient after each accepted merge of the top-level pass.
    pub merge_trace: Vec<Fraction>,
}

impl SampledSubgraph {
    pub fn with_decay(mut self, decay: f64) -> Result<Self> {
        self.weights = pooling_weights(&self, decay)?;
        Ok(self)
    }
}

/// Top-level pass on an already built tree.
pub fn mrq_sample_tree(tree: &RootedTree, signal: &Signal) -> SampledSubgraph {
    let table = DeltaTable::new(tree, signal);
    let roots = tree.roots();
    let init = match roots {
        [r] => Fraction::new(0.0, signal[*r] * signal[*r]),
        [u, v] => {
            let d = signal[*u] - signal[*v];
            Fraction::new(d * d, signal[*u] * signal[*u] + signal[*v] * signal[*v])
        }
        _ => unreachable!("trees have one or two roots"),
    };
    let top: Vec<usize> = (0..roots.len())
        .flat_map(|r| tree.local_children(r).iter().copied())
        .collect();
    let m = greedy_merge(tree, &table.recs, init, &top);

    let mut nodes = roots.to_vec();
    table.expand(&m.merged, &mut nodes);
    nodes.sort_unstable();
    let hops: Vec<usize> = nodes
        .iter()
        .map(|&v| tree.local_hop(tree.local(v).expect("selected node in tree")))
        .collect();
    let target = match roots {
        [r] => Target::Node(*r),
        [u, v] => Target::Edge(*u, *v),
        _ => unreachable!(),
    };
    let mut out = SampledSubgraph {
        target,
        nodes,
        hops,
        rq: m.state,
        weights: Vec::new(),
        merge_trace: m.trace,
    };
    out.weights = pooling_weights(&out, DEFAULT_DECAY).expect("default decay is valid");
    out
}

pub fn mrq_sample_node(
    graph: &Graph,
    signal: &Signal,
    target: usize,
    depth: usize,
) -> Result<SampledSubgraph> {
    let tree = build_rooted_tree(graph, &[target], depth)?;
    Ok(mrq_sample_tree(&tree, signal))
}

pub fn mrq_sample_edge(
    graph: &Graph,
    signal: &Signal,
    edge: (usize, usize),
    depth: usize,
) -> Result<SampledSubgraph> {
    let (u, v) = edge;
    if !graph.has_edge(u, v) {
        return Err(Error::domain(format!("edge ({u}, {v}) not in graph")));
    }
    let tree = build_rooted_tree(graph, &[u, v], depth)?;
    Ok(mrq_sample_tree(&tree, signal))
}

/// Samples every target in parallel; results come back in target order.
pub fn sample_targets(
    graph: &Graph,
    signal: &Signal,
    targets: &[Target],
    depth: usize,
    decay: f64,
) -> Result<Vec<SampledSubgraph>> {
    if signal.len() != graph.node_count() {
        return Err(Error::shape("signal length differs from node count"));
    }
    targets
        .par_iter()
        .map(|t| {
            let s = match *t {
                Target::Node(v) => mrq_sample_node(graph, signal, v, depth)?,
                Target::Edge(u, v) => mrq_sample_edge(graph, signal, (u, v), depth)?,
            };
            s.with_decay(decay)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        let mut b = GraphBuilder::new(n);
        for &(u, v) in edges {
            b.add_edge(u, v).unwrap();
        }
        b.build().unwrap()
    }

    fn signal(x: &[f64]) -> Signal {
        Signal::new(x.to_vec()).unwrap()
    }

    #[test]
    fn leaf_record_is_initialization() {
        let g = graph(2, &[(0, 1)]);
        let t = build_rooted_tree(&g, &[0], 1).unwrap();
        let r = get_max_deltas(&t, &signal(&[1.0, 3.0]), 1).unwrap();
        assert_eq!((r.delta.num, r.delta.den), (4.0, 9.0));
        assert_eq!(r.selected, vec![1]);
        assert!(r.inferior.is_empty());
    }

    #[test]
    fn profitable_child_is_merged() {
        // root 0 -- v 1 -- child 2
        let g = graph(3, &[(0, 1), (1, 2)]);
        let t = build_rooted_tree(&g, &[0], 2).unwrap();
        let r = get_max_deltas(&t, &signal(&[1.0, 1.0, 3.0]), 1).unwrap();
        assert_eq!((r.delta.num, r.delta.den), (4.0, 10.0));
        assert_eq!(r.selected, vec![1, 2]);
    }

    #[test]
    fn zero_gain_child_goes_inferior() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let t = build_rooted_tree(&g, &[0], 2).unwrap();
        let r = get_max_deltas(&t, &signal(&[1.0, 1.0, 1.0]), 1).unwrap();
        assert_eq!((r.delta.num, r.delta.den), (0.0, 1.0));
        assert_eq!(r.selected, vec![1]);
        assert_eq!(r.inferior, vec![2]);
    }

    #[test]
    fn root_has_no_record() {
        let g = graph(2, &[(0, 1)]);
        let t = build_rooted_tree(&g, &[0], 1).unwrap();
        assert!(get_max_deltas(&t, &signal(&[1.0, 1.0]), 0).is_err());
        assert!(get_max_deltas(&t, &signal(&[1.0, 1.0]), 7).is_err());
    }

    #[test]
    fn isolated_target() {
        let g = graph(2, &[]);
        let s = mrq_sample_node(&g, &signal(&[2.0, 1.0]), 0, 2).unwrap();
        assert_eq!(s.nodes, vec![0]);
        assert_eq!(s.rq.value(), 0.0);
        assert_eq!(s.weights, vec![1.0]);
    }

    #[test]
    fn star_example() {
        // root 0 (x=1); leaves 1 (x=5), 2 (x=1), 3 (x=0.5)
        let g = graph(4, &[(0, 1), (0, 2), (0, 3)]);
        let s = mrq_sample_node(&g, &signal(&[1.0, 5.0, 1.0, 0.5]), 0, 1).unwrap();
        assert_eq!(s.nodes, vec![0, 1, 3]);
        assert_eq!((s.rq.num, s.rq.den), (16.25, 26.25));
        assert!((s.rq.value() - 0.6190476190476191).abs() < 1e-12);
    }

    #[test]
    fn isolated_edge() {
        let g = graph(2, &[(0, 1)]);
        let s = mrq_sample_edge(&g, &signal(&[1.0, 3.0]), (1, 0), 2).unwrap();
        assert_eq!(s.nodes, vec![0, 1]);
        assert_eq!((s.rq.num, s.rq.den), (4.0, 10.0));
        assert_eq!(s.target, Target::Edge(0, 1));
    }

    #[test]
    fn path_edge_example() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let s = mrq_sample_edge(&g, &signal(&[1.0, 1.0, 5.0]), (0, 1), 1).unwrap();
        assert_eq!(s.nodes, vec![0, 1, 2]);
        assert_eq!((s.rq.num, s.rq.den), (16.0, 27.0));
    }

    #[test]
    fn missing_edge_rejected() {
        let g = graph(3, &[(0, 1)]);
        assert!(matches!(
            mrq_sample_edge(&g, &signal(&[1.0; 3]), (0, 2), 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn zero_signal_nodes_absorbed() {
        // b = 0 states: x_root = 0 and a positive-energy neighbor.
        let g = graph(3, &[(0, 1), (0, 2)]);
        let s = mrq_sample_node(&g, &signal(&[0.0, 0.0, 2.0]), 0, 1).unwrap();
        assert_eq!(s.nodes, vec![0, 2]);
        assert_eq!((s.rq.num, s.rq.den), (4.0, 4.0));
    }

    #[test]
    fn rejected_candidate_is_reactivated_upstream() {
        // Path 0-1-2-3 at depth 3. Node 3 is inferior for 2, is activated and
        // rejected again when 2 merges into 1, and only pays off at the root.
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let x = signal(&[10.0, 1.0, 0.05, 1.0]);
        let t = build_rooted_tree(&g, &[0], 3).unwrap();
        let table = DeltaTable::new(&t, &x);
        assert_eq!(table.record(2).unwrap().inferior, vec![3]);
        let r1 = table.record(1).unwrap();
        assert_eq!(r1.selected, vec![1, 2]);
        assert_eq!(r1.inferior, vec![3]);
        let s = mrq_sample_tree(&t, &x);
        assert_eq!(s.nodes, vec![0, 1, 2, 3]);
        assert_eq!(s.rq, t.rayleigh_quotient(&x, &[0, 1, 2, 3]).unwrap());
    }
}
