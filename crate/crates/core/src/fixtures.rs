//! Small hand-built reference data shared by tests, examples, and docs.

use std::collections::BTreeMap;

use crate::ontology::{OntologyNode, OntologyTree};

/// A compact imaging-device taxonomy used throughout the test suite.
///
/// ```text
/// T1 (imaging)
/// ├── T2 (camera)
/// │   ├── T5 (picture)
/// │   │   ├── T8  (high-res DPC, leaf)
/// │   │   └── T9  (low-res DPC)
/// │   │       ├── T11 (mobile, leaf)
/// │   │       ├── T12 (fixed, leaf)
/// │   │       └── T13 (pan-tilt, leaf)
/// │   └── T6 (video, leaf)
/// ├── T3 (medical, leaf)
/// └── T4 (radar, leaf)
/// ```
///
/// Returns the tree plus a label -> node-index map.
pub fn imaging_taxonomy() -> (OntologyTree, BTreeMap<&'static str, usize>) {
    let spec: &[(&str, Option<usize>, &[usize])] = &[
        ("T1", None, &[1, 2, 3]),
        ("T2", Some(0), &[4, 5]),
        ("T3", Some(0), &[]),
        ("T4", Some(0), &[]),
        ("T5", Some(1), &[6, 7]),
        ("T6", Some(1), &[]),
        ("T8", Some(4), &[]),
        ("T9", Some(4), &[8, 9, 10]),
        ("T11", Some(7), &[]),
        ("T12", Some(7), &[]),
        ("T13", Some(7), &[]),
    ];
    let nodes: Vec<OntologyNode> = spec
        .iter()
        .enumerate()
        .map(|(i, (label, parent, children))| OntologyNode {
            node_index: i,
            parent_index: *parent,
            child_indices: children.to_vec(),
            label: (*label).to_string(),
        })
        .collect();
    let tree = OntologyTree::from_nodes(nodes).expect("fixture tree is valid");
    let tags = spec.iter().enumerate().map(|(i, (l, _, _))| (*l, i)).collect();
    (tree, tags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::encode;

    #[test]
    fn fixture_shape() {
        let (tree, tags) = imaging_taxonomy();
        assert_eq!(tree.leaf_count(), 7);
        let t9 = encode(&tree, tags["T9"]).unwrap();
        let t11 = encode(&tree, tags["T11"]).unwrap();
        assert_eq!(t11.parent().unwrap().unwrap(), t9);
        assert_eq!(t9.depth(), 3);
    }
}
