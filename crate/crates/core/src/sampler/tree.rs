use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::graph::{Graph, Signal};

/// BFS spanning tree of the `depth_cap`-hop neighborhood of one node or of
/// both endpoints of an edge.
///
/// Nodes are addressed by local index in BFS order (roots first). Children
/// are listed by ascending global id.
#[derive(Debug, Clone)]
pub struct RootedTree {
    roots: Vec<usize>,
    nodes: Vec<usize>,
    parent: Vec<Option<usize>>,
    hop: Vec<usize>,
    children: Vec<Vec<usize>>,
    index: HashMap<usize, usize>,
    depth_cap: usize,
}

/// Multi-source BFS from `roots` up to `depth` hops. A node reachable from
/// several frontier nodes is claimed by the one with the lowest id.
pub fn build_rooted_tree(graph: &Graph, roots: &[usize], depth: usize) -> Result<RootedTree> {
    if roots.is_empty() || roots.len() > 2 {
        return Err(Error::domain("a rooted tree needs one or two roots"));
    }
    if depth == 0 {
        return Err(Error::domain("tree depth must be at least 1"));
    }
    if let Some(&r) = roots.iter().find(|&&r| r >= graph.node_count()) {
        return Err(Error::domain(format!("root {r} not in graph")));
    }
    let mut frontier: Vec<usize> = roots.to_vec();
    frontier.sort_unstable();
    if frontier.len() == 2 && !graph.has_edge(frontier[0], frontier[1]) {
        return Err(Error::domain(format!(
            "roots {} and {} are not adjacent",
            frontier[0], frontier[1]
        )));
    }

    let mut tree = RootedTree {
        roots: frontier.clone(),
        nodes: Vec::new(),
        parent: Vec::new(),
        hop: Vec::new(),
        children: Vec::new(),
        index: HashMap::new(),
        depth_cap: depth,
    };
    for &r in &frontier {
        tree.push(r, None, 0);
    }
    for level in 1..=depth {
        let mut next = Vec::new();
        for &p in &frontier {
            let pl = tree.index[&p];
            for &w in graph.neighbors(p) {
                if !tree.index.contains_key(&w) {
                    let wl = tree.push(w, Some(pl), level);
                    tree.children[pl].push(wl);
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_unstable();
        frontier = next;
    }
    Ok(tree)
}

impl RootedTree {
    fn push(&mut self, global: usize, parent: Option<usize>, hop: usize) -> usize {
        let local = self.nodes.len();
        self.nodes.push(global);
        self.parent.push(parent);
        self.hop.push(hop);
        self.children.push(Vec::new());
        self.index.insert(global, local);
        local
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn depth_cap(&self) -> usize {
        self.depth_cap
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Global ids in BFS order.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn contains(&self, v: usize) -> bool {
        self.index.contains_key(&v)
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        let l = *self.index.get(&v)?;
        self.parent[l].map(|p| self.nodes[p])
    }

    pub fn hop(&self, v: usize) -> Option<usize> {
        self.index.get(&v).map(|&l| self.hop[l])
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        self.index
            .get(&v)
            .map(|&l| self.children[l].iter().map(|&c| self.nodes[c]).collect())
            .unwrap_or_default()
    }

    /// Tree edges as `(parent, child)` global pairs, plus the root edge for
    /// edge-rooted trees.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::with_capacity(self.len());
        if self.roots.len() == 2 {
            out.push((self.roots[0], self.roots[1]));
        }
        for (l, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                out.push((self.nodes[*p], self.nodes[l]));
            }
        }
        out
    }

    /// Rayleigh quotient of `nodes` counting only tree edges.
    pub fn rayleigh_quotient(&self, signal: &Signal, nodes: &[usize]) -> Result<Fraction> {
        if nodes.is_empty() {
            return Err(Error::domain("rayleigh quotient of an empty node set"));
        }
        let mut member = vec![false; self.len()];
        for &v in nodes {
            let l = *self
                .index
                .get(&v)
                .ok_or_else(|| Error::domain(format!("node {v} not in tree")))?;
            member[l] = true;
        }
        Ok(self.local_rq(signal, &member))
    }

    pub(crate) fn local_rq(&self, signal: &Signal, member: &[bool]) -> Fraction {
        let mut num = 0.0;
        let mut den = 0.0;
        for l in 0..self.len() {
            if !member[l] {
                continue;
            }
            let x = signal[self.nodes[l]];
            den += x * x;
            if let Some(p) = self.parent[l] {
                if member[p] {
                    let d = x - signal[self.nodes[p]];
                    num += d * d;
                }
            }
        }
        if self.roots.len() == 2 && member[0] && member[1] {
            let d = signal[self.roots[0]] - signal[self.roots[1]];
            num += d * d;
        }
        Fraction::new(num, den)
    }

    pub(crate) fn local_parent(&self, l: usize) -> Option<usize> {
        self.parent[l]
    }

    pub(crate) fn local_children(&self, l: usize) -> &[usize] {
        &self.children[l]
    }

    pub(crate) fn local_hop(&self, l: usize) -> usize {
        self.hop[l]
    }

    pub(crate) fn global(&self, l: usize) -> usize {
        self.nodes[l]
    }

    pub(crate) fn local(&self, v: usize) -> Option<usize> {
        self.index.get(&v).copied()
    }
}
