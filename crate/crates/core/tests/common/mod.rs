//! Shared helpers for the acceptance suite: independently coded scalar
//! evaluators for the metric formulas, explicit-tree oracles, and small
//! topology builders. These deliberately avoid the library's own code paths
//! wherever they serve as a second opinion.

#![allow(dead_code)]

use std::collections::BTreeMap;

use srp_diot::metrics::MobilityPlan;
use srp_diot::ontology::{OntologyNode, OntologyTree};
use srp_diot::NodeId;

/// Straight-line re-implementation of the bounded utility formula.
pub fn utility_scalar(
    stb: u8,
    ug: f64,
    oc: f64,
    hop: u8,
    w1: f64,
    w2: f64,
    k: u8,
    maxut: u8,
) -> u8 {
    let positive = w1 * (stb as f64 / k as f64) * ug * maxut as f64;
    let penalty = w2 * oc * hop as f64;
    let mut v = (positive - penalty).round();
    if v < 0.0 {
        v = 0.0;
    }
    if v > maxut as f64 {
        v = maxut as f64;
    }
    v as u8
}

/// Scalar coverage: summed member coverages over the subtree size, capped.
pub fn coverage_scalar(covs: &[f64], ost: u64) -> f64 {
    let mut s = 0.0;
    for c in covs {
        s += *c;
    }
    let r = s / ost as f64;
    if r > 1.0 {
        1.0
    } else {
        r
    }
}

/// Scalar usage blend for one period roll.
pub fn usage_scalar(old: f64, refs: u32, alpha: f64, cap: u32) -> f64 {
    let mut f = refs as f64 / cap as f64;
    if f > 1.0 {
        f = 1.0;
    }
    alpha * f + (1.0 - alpha) * old
}

/// Scalar two-hop stability rule.
pub fn stability_scalar(ov_skip: u8, ov_local: u8, ov_up: u8) -> u8 {
    let inner = if ov_local < ov_up { ov_local } else { ov_up };
    if ov_skip > inner {
        ov_skip
    } else {
        inner
    }
}

/// Builds a complete `degree`-ary tree of the given depth (root = depth 0).
pub fn full_tree(degree: usize, depth: usize) -> OntologyTree {
    let mut nodes = vec![OntologyNode {
        node_index: 0,
        parent_index: None,
        child_indices: Vec::new(),
        label: String::new(),
    }];
    let mut frontier = vec![0usize];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &p in &frontier {
            for _ in 0..degree {
                let idx = nodes.len();
                nodes.push(OntologyNode {
                    node_index: idx,
                    parent_index: Some(p),
                    child_indices: Vec::new(),
                    label: String::new(),
                });
                nodes[p].child_indices.push(idx);
                next.push(idx);
            }
        }
        frontier = next;
    }
    OntologyTree::from_nodes(nodes).expect("full tree is valid")
}

/// All strict descendants of a node, by explicit traversal.
pub fn descendants(tree: &OntologyTree, root: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack: Vec<usize> = tree.nodes()[root].child_indices.clone();
    while let Some(i) = stack.pop() {
        out.push(i);
        stack.extend(tree.nodes()[i].child_indices.iter().copied());
    }
    out
}

/// Root-first ancestor chain of a node.
pub fn ancestor_chain(tree: &OntologyTree, mut i: usize) -> Vec<usize> {
    let mut rev = vec![i];
    while let Some(p) = tree.nodes()[i].parent_index {
        rev.push(p);
        i = p;
    }
    rev.reverse();
    rev
}

/// Brute-force lowest common ancestor with distances.
pub fn lca_oracle(tree: &OntologyTree, a: usize, b: usize) -> (usize, usize, usize) {
    let ca = ancestor_chain(tree, a);
    let cb = ancestor_chain(tree, b);
    let mut m = 0;
    while m < ca.len() && m < cb.len() && ca[m] == cb[m] {
        m += 1;
    }
    (ca[m - 1], ca.len() - m, cb.len() - m)
}

/// Stationary plans for nodes laid out on a line, `spacing` meters apart.
pub fn line_plans(
    n: usize,
    spacing: f64,
    range: f64,
    k: usize,
) -> BTreeMap<NodeId, MobilityPlan> {
    (0..n as NodeId)
        .map(|i| {
            (
                i,
                MobilityPlan::stationary(i, 0, (spacing * i as f64, 0.0), k, range),
            )
        })
        .collect()
}
