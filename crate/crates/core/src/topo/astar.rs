//! A* over signature-augmented spatio-temporal vertices.
//!
//! Nodes are popped by lowest f, then highest g, then by (t, x, y, signature).
//! Duplicate keys are discarded lazily when popped. Closed keys are reopened
//! only when `reopen` is set, which inconsistent heuristics need.

use std::cmp::Ordering;
use std::collections::hash_map::Entry as MapEntry;
use std::collections::BinaryHeap;
use std::hash::Hash;

use rustc_hash::{FxHashMap, FxHashSet};

use super::{H2Signature, SpacetimeVertex};

pub(crate) trait Problem {
    type Key: Hash + Eq + Clone;

    fn key(&self, v: &SpacetimeVertex, sig: &H2Signature) -> Self::Key;
    fn expand(&self, v: &SpacetimeVertex, sig: &H2Signature, out: &mut Vec<(SpacetimeVertex, H2Signature, f64)>);
    fn heuristic(&self, v: &SpacetimeVertex, sig: &H2Signature) -> f64;
    fn is_goal(&self, v: &SpacetimeVertex, sig: &H2Signature) -> bool;
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub v: SpacetimeVertex,
    pub sig: H2Signature,
    pub g: f64,
    parent: u32,
}

const ROOT: u32 = u32::MAX;

struct Open {
    f: f64,
    g: f64,
    v: SpacetimeVertex,
    sig: H2Signature,
    idx: u32,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl Ord for Open {
    // BinaryHeap pops the greatest element.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then_with(|| (other.v.t, other.v.x, other.v.y).cmp(&(self.v.t, self.v.x, self.v.y)))
            .then_with(|| other.sig.cmp(&self.sig))
            .then(other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) enum Visit {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Outcome {
    pub expansions: usize,
    /// The frontier ran empty (as opposed to a stop or the budget).
    pub exhausted: bool,
    pub budget_hit: bool,
}

pub(crate) struct Search {
    pub nodes: Vec<Node>,
}

impl Search {
    pub fn trace(&self, idx: u32) -> Vec<SpacetimeVertex> {
        let mut out = Vec::new();
        let mut i = idx;
        while i != ROOT {
            out.push(self.nodes[i as usize].v);
            i = self.nodes[i as usize].parent;
        }
        out.reverse();
        out
    }
}

/// Runs the search; `on_goal` sees every goal node when it is popped.
pub(crate) fn run<P: Problem>(
    problem: &P,
    start: SpacetimeVertex,
    start_sig: H2Signature,
    max_expansions: usize,
    reopen: bool,
    mut on_goal: impl FnMut(&Search, u32) -> Visit,
) -> (Search, Outcome) {
    let mut search = Search { nodes: Vec::new() };
    let mut open = BinaryHeap::new();
    let mut best_g: FxHashMap<P::Key, f64> = FxHashMap::default();
    let mut closed: FxHashSet<P::Key> = FxHashSet::default();
    let mut scratch = Vec::with_capacity(9);

    let h0 = problem.heuristic(&start, &start_sig);
    best_g.insert(problem.key(&start, &start_sig), 0.0);
    search.nodes.push(Node { v: start, sig: start_sig.clone(), g: 0.0, parent: ROOT });
    open.push(Open { f: h0, g: 0.0, v: start, sig: start_sig, idx: 0 });

    let mut outcome = Outcome { expansions: 0, exhausted: false, budget_hit: false };
    loop {
        let Some(top) = open.pop() else {
            outcome.exhausted = true;
            break;
        };
        let key = problem.key(&top.v, &top.sig);
        if best_g.get(&key).is_some_and(|&g| top.g > g) {
            continue;
        }
        if !closed.insert(key) && !reopen {
            continue;
        }
        if problem.is_goal(&top.v, &top.sig) {
            if let Visit::Stop = on_goal(&search, top.idx) {
                break;
            }
        }
        if outcome.expansions == max_expansions {
            outcome.budget_hit = true;
            break;
        }
        outcome.expansions += 1;
        scratch.clear();
        problem.expand(&top.v, &top.sig, &mut scratch);
        for (v, sig, cost) in scratch.drain(..) {
            let g = top.g + cost;
            let key = problem.key(&v, &sig);
            if !reopen && closed.contains(&key) {
                continue;
            }
            match best_g.entry(key) {
                MapEntry::Occupied(mut e) => {
                    if *e.get() <= g {
                        continue;
                    }
                    e.insert(g);
                }
                MapEntry::Vacant(e) => {
                    e.insert(g);
                }
            }
            let idx = search.nodes.len() as u32;
            let f = g + problem.heuristic(&v, &sig);
            search.nodes.push(Node { v, sig: sig.clone(), g, parent: top.idx });
            open.push(Open { f, g, v, sig, idx });
        }
    }
    (search, outcome)
}
