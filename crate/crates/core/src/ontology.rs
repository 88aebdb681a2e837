//! Capability ontologies and the ontology coding scheme.
//!
//! Capabilities form a tree: leaves are concrete device capabilities, internal
//! nodes are categories. Every tree node gets a fixed-width code ([`Onid`])
//! made of two bit vectors. The `ID` vector concatenates per-level sibling
//! codes from the root down; the `SP` vector marks where each level's piece
//! starts (leftmost bit of each piece set to 1, the rest 0). Both are
//! zero-padded to the tree's code width `W`. All structural queries a router
//! needs (parent, depth, ancestor tests, common ancestor with distances) are
//! computed from codes alone, without the tree.

use std::collections::VecDeque;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OntologyError {
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("unpadded code length {needed} exceeds code width {width}")]
    WidthOverflow { needed: usize, width: usize },
    #[error("malformed ontology code: {0}")]
    MalformedCode(String),
    #[error("node index {0} out of range")]
    BadNodeIndex(usize),
    #[error("ontology file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for OntologyError {
    fn from(e: std::io::Error) -> Self {
        OntologyError::Io(e.to_string())
    }
}

/// One node of the capability taxonomy.
#[derive(Debug, Clone, PartialEq)]
pub struct OntologyNode {
    pub node_index: usize,
    pub parent_index: Option<usize>,
    /// Ordered child list; a child's position in it defines its sibling code.
    pub child_indices: Vec<usize>,
    pub label: String,
}

impl OntologyNode {
    pub fn is_leaf(&self) -> bool {
        self.child_indices.is_empty()
    }
}

/// The capability taxonomy plus the global statistics routers are assumed to
/// know: average degree, average sparseness, and the code width `W`.
///
/// The tree itself is only consulted at generation/encode time; simulated
/// nodes never store it.
#[derive(Debug, Clone)]
pub struct OntologyTree {
    nodes: Vec<OntologyNode>,
    avg_degree: f64,
    avg_sparseness: f64,
    onid_width_bits: usize,
}

/// Width in bits of the sibling code under a parent with `child_count` children.
pub fn sibling_code_width(child_count: usize) -> usize {
    debug_assert!(child_count >= 2);
    (usize::BITS - (child_count - 1).leading_zeros()) as usize
}

fn round_up_to_byte(bits: usize) -> usize {
    bits.div_ceil(8) * 8
}

impl OntologyTree {
    /// Builds a tree from explicit parent/child structure. Validates that the
    /// structure is a connected tree with ordered child lists and no
    /// single-child internal nodes (those would produce zero-width pieces).
    pub fn from_nodes(nodes: Vec<OntologyNode>) -> Result<Self, OntologyError> {
        if nodes.is_empty() {
            return Err(OntologyError::InvalidParams("empty node list".into()));
        }
        let mut root = None;
        for (i, n) in nodes.iter().enumerate() {
            if n.node_index != i {
                return Err(OntologyError::InvalidParams(format!(
                    "node at position {i} carries index {}",
                    n.node_index
                )));
            }
            if n.parent_index.is_none() {
                if root.is_some() {
                    return Err(OntologyError::InvalidParams("multiple roots".into()));
                }
                root = Some(i);
            }
            if n.child_indices.len() == 1 {
                return Err(OntologyError::InvalidParams(format!(
                    "node {i} has a single child"
                )));
            }
            for &c in &n.child_indices {
                if c >= nodes.len() || nodes[c].parent_index != Some(i) {
                    return Err(OntologyError::InvalidParams(format!(
                        "child link {i} -> {c} is inconsistent"
                    )));
                }
            }
        }
        let root = root.ok_or_else(|| OntologyError::InvalidParams("no root".into()))?;
        if root != 0 {
            return Err(OntologyError::InvalidParams("root must be node 0".into()));
        }

        // Reachability doubles as the acyclicity check.
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![root];
        let mut reached = 0usize;
        while let Some(i) = stack.pop() {
            if seen[i] {
                return Err(OntologyError::InvalidParams("cycle detected".into()));
            }
            seen[i] = true;
            reached += 1;
            stack.extend(nodes[i].child_indices.iter().copied());
        }
        if reached != nodes.len() {
            return Err(OntologyError::InvalidParams(
                "tree is not connected".into(),
            ));
        }

        let mut tree = OntologyTree {
            nodes,
            avg_degree: 0.0,
            avg_sparseness: 1.0,
            onid_width_bits: 0,
        };
        tree.recompute_stats()?;
        Ok(tree)
    }

    fn recompute_stats(&mut self) -> Result<(), OntologyError> {
        let mut deg_sum = 0.0;
        let mut sparse_sum = 0.0;
        let mut internal = 0usize;
        for n in &self.nodes {
            if !n.is_leaf() {
                let c = n.child_indices.len();
                deg_sum += c as f64;
                sparse_sum += c as f64 / (1u64 << sibling_code_width(c)) as f64;
                internal += 1;
            }
        }
        if internal > 0 {
            self.avg_degree = deg_sum / internal as f64;
            self.avg_sparseness = sparse_sum / internal as f64;
        } else {
            self.avg_degree = 0.0;
            self.avg_sparseness = 1.0;
        }

        // W: longest unpadded code, rounded up to whole bytes.
        let mut max_bits = 0usize;
        let mut depth_bits = vec![0usize; self.nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            let here = if self.nodes[i].parent_index.is_none() {
                1 // root piece is the single bit "0"
            } else {
                depth_bits[i]
            };
            depth_bits[i] = here;
            max_bits = max_bits.max(here);
            let c = self.nodes[i].child_indices.len();
            if c > 0 {
                let w = sibling_code_width(c);
                for &ch in &self.nodes[i].child_indices {
                    depth_bits[ch] = here + w;
                    queue.push_back(ch);
                }
            }
        }
        if max_bits > 128 {
            return Err(OntologyError::WidthOverflow {
                needed: max_bits,
                width: 128,
            });
        }
        self.onid_width_bits = round_up_to_byte(max_bits);
        Ok(())
    }

    pub fn nodes(&self) -> &[OntologyNode] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> Result<&OntologyNode, OntologyError> {
        self.nodes.get(index).ok_or(OntologyError::BadNodeIndex(index))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn leaf_indices(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf()).collect()
    }

    pub fn avg_degree(&self) -> f64 {
        self.avg_degree
    }

    pub fn avg_sparseness(&self) -> f64 {
        self.avg_sparseness
    }

    pub fn onid_width_bits(&self) -> usize {
        self.onid_width_bits
    }

    /// Root-to-node path of (position-in-parent, sibling-code-width) pairs,
    /// excluding the root itself.
    fn position_path(&self, index: usize) -> Result<Vec<(usize, usize)>, OntologyError> {
        let mut rev = Vec::new();
        let mut cur = self.node(index)?;
        while let Some(p) = cur.parent_index {
            let parent = &self.nodes[p];
            let pos = parent
                .child_indices
                .iter()
                .position(|&c| c == cur.node_index)
                .expect("child lists validated at construction");
            rev.push((pos, sibling_code_width(parent.child_indices.len())));
            cur = parent;
        }
        rev.reverse();
        Ok(rev)
    }
}

/// Default weights for child-degree draws (degrees 2..=8). Skewed low so that
/// generated trees land near a 2.5 average degree, which puts total node
/// counts around 1.67x the leaf count.
pub const DEFAULT_DEGREE_WEIGHTS: [f64; 7] = [0.70, 0.20, 0.05, 0.02, 0.015, 0.01, 0.005];

/// Grows a random ontology breadth-first until the leaf target is met.
///
/// Each expanded node draws its child count from `degree_range` using
/// `degree_weights`; the final draw is clamped so the finished tree hits
/// `target_leaf_count` exactly (for targets >= 2). Deterministic per seed.
pub fn generate_ontology(
    seed: u64,
    target_leaf_count: usize,
    degree_range: (usize, usize),
    degree_weights: &[f64],
) -> Result<OntologyTree, OntologyError> {
    let (lo, hi) = degree_range;
    if target_leaf_count < 1 {
        return Err(OntologyError::InvalidParams("target_leaf_count < 1".into()));
    }
    if lo < 2 || hi > 8 || lo > hi {
        return Err(OntologyError::InvalidParams(format!(
            "degree range {lo}..={hi} must lie within 2..=8"
        )));
    }
    if degree_weights.len() != hi - lo + 1 {
        return Err(OntologyError::InvalidParams(format!(
            "expected {} degree weights, got {}",
            hi - lo + 1,
            degree_weights.len()
        )));
    }
    if degree_weights.iter().any(|w| !w.is_finite() || *w < 0.0)
        || degree_weights.iter().sum::<f64>() <= 0.0
    {
        return Err(OntologyError::InvalidParams(
            "degree weights must be non-negative and sum to a positive value".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total_w: f64 = degree_weights.iter().sum();
    let mut draw_degree = move || -> usize {
        let x: f64 = rng.random_range(0.0..total_w);
        let mut acc = 0.0;
        for (i, w) in degree_weights.iter().enumerate() {
            acc += w;
            if x < acc {
                return lo + i;
            }
        }
        hi
    };

    let mut nodes = vec![OntologyNode {
        node_index: 0,
        parent_index: None,
        child_indices: Vec::new(),
        label: "n0".into(),
    }];
    let mut open = VecDeque::from([0usize]);
    let mut leaves = 1usize; // closing now would leave every open node a leaf

    while leaves < target_leaf_count {
        let parent = open.pop_front().expect("open set empty before target met");
        let want = draw_degree();
        // Clamp the last expansion so the leaf count lands on target.
        let d = want.min(target_leaf_count - leaves + 1).max(2);
        for _ in 0..d {
            let idx = nodes.len();
            nodes.push(OntologyNode {
                node_index: idx,
                parent_index: Some(parent),
                child_indices: Vec::new(),
                label: format!("n{idx}"),
            });
            nodes[parent].child_indices.push(idx);
            open.push_back(idx);
        }
        leaves += d - 1;
    }

    OntologyTree::from_nodes(nodes)
}

/// Fixed-width ontology code: the `ID` and `SP` bit vectors plus the width.
///
/// Bits are indexed left-to-right from 0; bit `p` lives at position `127 - p`
/// of the backing `u128`. `used_bits` caches where the last level piece ends
/// (it is fixed at construction; the padded vectors alone cannot distinguish
/// a trailing piece from padding when the piece value ends in zeros).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Onid {
    id_bits: u128,
    sp_bits: u128,
    width: u8,
    used_bits: u8,
}

#[inline]
fn bit_mask_prefix(bits: usize) -> u128 {
    if bits == 0 {
        0
    } else {
        !0u128 << (128 - bits)
    }
}

#[inline]
fn extract_bits(x: u128, start: usize, len: usize) -> u128 {
    debug_assert!(len >= 1 && start + len <= 128);
    (x << start) >> (128 - len)
}

impl Onid {
    /// Builds a code from root-to-node level pieces.
    pub fn from_pieces(pieces: &[(u64, usize)], width_bits: usize) -> Result<Self, OntologyError> {
        if pieces.is_empty() {
            return Err(OntologyError::MalformedCode("no level pieces".into()));
        }
        if width_bits == 0 || width_bits % 8 != 0 || width_bits > 128 {
            return Err(OntologyError::MalformedCode(format!(
                "width {width_bits} must be a positive multiple of 8 and at most 128"
            )));
        }
        let mut id = 0u128;
        let mut sp = 0u128;
        let mut at = 0usize;
        for &(value, w) in pieces {
            if w == 0 || (w < 64 && value >= (1u64 << w)) {
                return Err(OntologyError::MalformedCode(format!(
                    "piece value {value} does not fit in {w} bits"
                )));
            }
            if at + w > width_bits {
                return Err(OntologyError::WidthOverflow {
                    needed: at + w,
                    width: width_bits,
                });
            }
            id |= (value as u128) << (128 - at - w);
            sp |= 1u128 << (127 - at);
            at += w;
        }
        Ok(Onid {
            id_bits: id,
            sp_bits: sp,
            width: width_bits as u8,
            used_bits: at as u8,
        })
    }

    pub fn width_bits(&self) -> usize {
        self.width as usize
    }

    pub fn width_bytes(&self) -> usize {
        self.width as usize / 8
    }

    /// ID vector as big-endian bytes of length `W/8`.
    pub fn id_bytes(&self) -> Vec<u8> {
        self.id_bits.to_be_bytes()[..self.width_bytes()].to_vec()
    }

    /// SP vector as big-endian bytes of length `W/8`.
    pub fn sp_bytes(&self) -> Vec<u8> {
        self.sp_bits.to_be_bytes()[..self.width_bytes()].to_vec()
    }

    pub fn id_hex(&self) -> String {
        self.id_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn sp_hex(&self) -> String {
        self.sp_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks structural well-formedness: at least one piece, pieces start at
    /// bit 0, and every bit past the last piece is zero in both vectors.
    pub fn validate(&self) -> Result<(), OntologyError> {
        let w = self.width as usize;
        let used = self.used_bits as usize;
        if w == 0 || w % 8 != 0 || w > 128 {
            return Err(OntologyError::MalformedCode("bad width".into()));
        }
        if self.sp_bits.count_ones() == 0 {
            return Err(OntologyError::MalformedCode("SP vector has no set bits".into()));
        }
        if used == 0 || used > w {
            return Err(OntologyError::MalformedCode("bad used-prefix length".into()));
        }
        if self.sp_bits & (1u128 << 127) == 0 {
            return Err(OntologyError::MalformedCode(
                "first piece must start at bit 0".into(),
            ));
        }
        let mask = bit_mask_prefix(used);
        if self.id_bits & !mask != 0 || self.sp_bits & !mask != 0 {
            return Err(OntologyError::MalformedCode("padding bits must be zero".into()));
        }
        Ok(())
    }

    /// Starting bit positions of the level pieces, in order.
    fn piece_starts(&self) -> Vec<usize> {
        let mut starts = Vec::with_capacity(self.sp_bits.count_ones() as usize);
        let mut sp = self.sp_bits;
        while sp != 0 {
            let p = sp.leading_zeros() as usize;
            starts.push(p);
            sp &= !(1u128 << (127 - p));
        }
        starts
    }

    /// Splits the code into root-to-node `(value, width_bits)` pieces.
    pub fn level_pieces(&self) -> Result<Vec<(u64, usize)>, OntologyError> {
        self.validate()?;
        let starts = self.piece_starts();
        let used = self.used_bits as usize;
        let mut out = Vec::with_capacity(starts.len());
        for (i, &s) in starts.iter().enumerate() {
            let end = if i + 1 < starts.len() { starts[i + 1] } else { used };
            if end <= s {
                return Err(OntologyError::MalformedCode("empty level piece".into()));
            }
            out.push((extract_bits(self.id_bits, s, end - s) as u64, end - s));
        }
        Ok(out)
    }

    /// Number of pieces (depth + 1).
    fn piece_count(&self) -> usize {
        self.sp_bits.count_ones() as usize
    }

    /// Tree depth encoded by this code (root = 0).
    pub fn depth(&self) -> usize {
        self.piece_count().saturating_sub(1)
    }

    /// Drops the last level piece; `None` for the root code.
    pub fn parent(&self) -> Result<Option<Onid>, OntologyError> {
        self.validate()?;
        let starts = self.piece_starts();
        if starts.len() == 1 {
            return Ok(None);
        }
        let cut = *starts.last().expect("at least two pieces");
        let mask = bit_mask_prefix(cut);
        Ok(Some(Onid {
            id_bits: self.id_bits & mask,
            sp_bits: self.sp_bits & mask,
            width: self.width,
            used_bits: cut as u8,
        }))
    }

    /// The ancestor whose depth is `depth` (0 = root). Errors if this code is
    /// shallower than requested.
    pub fn ancestor_at_depth(&self, depth: usize) -> Result<Onid, OntologyError> {
        let starts = self.piece_starts();
        if depth + 1 > starts.len() {
            return Err(OntologyError::MalformedCode(format!(
                "no ancestor at depth {depth}"
            )));
        }
        if depth + 1 == starts.len() {
            return Ok(*self);
        }
        let cut = starts[depth + 1];
        let mask = bit_mask_prefix(cut);
        Ok(Onid {
            id_bits: self.id_bits & mask,
            sp_bits: self.sp_bits & mask,
            width: self.width,
            used_bits: cut as u8,
        })
    }

    /// Last level piece: the node's position code among its siblings.
    pub fn sibling_id(&self) -> Result<(u64, usize), OntologyError> {
        let pieces = self.level_pieces()?;
        Ok(*pieces.last().expect("validated codes have pieces"))
    }

    /// True iff `self`'s pieces are a (proper or equal) prefix of `other`'s.
    pub fn is_ancestor_of(&self, other: &Onid) -> Result<bool, OntologyError> {
        self.validate()?;
        other.validate()?;
        let su = self.used_bits as usize;
        if su > other.used_bits as usize {
            return Ok(false);
        }
        let mask = bit_mask_prefix(su);
        // Prefix of ID and SP must match, and `other` must start a new piece
        // right where `self` ends (otherwise self's last piece is truncated).
        let pieces_align = su == other.used_bits as usize
            || other.sp_bits & (1u128 << (127 - su)) != 0;
        Ok(pieces_align
            && self.id_bits == other.id_bits & mask
            && self.sp_bits == other.sp_bits & mask)
    }
}

impl fmt::Debug for Onid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Onid(id={}, sp={}, w={})", self.id_hex(), self.sp_hex(), self.width)
    }
}

/// Longest common piece prefix of two codes from the same tree, plus each
/// code's distance (pieces dropped) to that ancestor.
pub fn common_ancestor(a: &Onid, b: &Onid) -> Result<(Onid, usize, usize), OntologyError> {
    if a.width != b.width {
        return Err(OntologyError::MalformedCode(
            "codes have different widths".into(),
        ));
    }
    let pa = a.level_pieces()?;
    let pb = b.level_pieces()?;
    let mut matched = 0usize;
    while matched < pa.len() && matched < pb.len() && pa[matched] == pb[matched] {
        matched += 1;
    }
    debug_assert!(matched >= 1, "root piece is universal");
    let ancestor = a.ancestor_at_depth(matched - 1)?;
    Ok((ancestor, pa.len() - matched, pb.len() - matched))
}

/// Encodes a tree node. The root code is the single bit `0`; every other
/// level appends the node's position in its parent's ordered child list,
/// coded in `ceil(log2(parent child count))` bits.
pub fn encode(tree: &OntologyTree, node_index: usize) -> Result<Onid, OntologyError> {
    let path = tree.position_path(node_index)?;
    let mut pieces = Vec::with_capacity(path.len() + 1);
    pieces.push((0u64, 1usize)); // root
    for (pos, w) in path {
        pieces.push((pos as u64, w));
    }
    Onid::from_pieces(&pieces, tree.onid_width_bits())
}

/// Writes the tree in the line-oriented exchange format.
///
/// Header: `W avg_degree avg_sparseness`. Then one node per line:
/// `node_index parent_index child_position label` (root uses `-` for the
/// parent and position 0). Single-space separated.
pub fn write_ontology_file(tree: &OntologyTree, path: &Path) -> Result<(), OntologyError> {
    let mut out = String::new();
    out.push_str(&format!(
        "{} {} {}\n",
        tree.onid_width_bits, tree.avg_degree, tree.avg_sparseness
    ));
    for n in &tree.nodes {
        let (parent, pos) = match n.parent_index {
            None => ("-".to_string(), 0),
            Some(p) => {
                let pos = tree.nodes[p]
                    .child_indices
                    .iter()
                    .position(|&c| c == n.node_index)
                    .expect("validated");
                (p.to_string(), pos)
            }
        };
        let label = if n.label.is_empty() { "-" } else { &n.label };
        out.push_str(&format!("{} {} {} {}\n", n.node_index, parent, pos, label));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_ontology_file(path: &Path) -> Result<OntologyTree, OntologyError> {
    let text = fs::read_to_string(path)?;
    parse_ontology_text(&text)
}

pub fn parse_ontology_text(text: &str) -> Result<OntologyTree, OntologyError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(OntologyError::Parse { line: 1, msg: "empty file".into() })?;
    let hp: Vec<&str> = header.split(' ').collect();
    if hp.len() != 3 {
        return Err(OntologyError::Parse {
            line: 1,
            msg: "header must be `W avg_degree avg_sparseness`".into(),
        });
    }
    let width: usize = hp[0]
        .parse()
        .map_err(|_| OntologyError::Parse { line: 1, msg: "bad width".into() })?;
    let avg_degree: f64 = hp[1]
        .parse()
        .map_err(|_| OntologyError::Parse { line: 1, msg: "bad avg_degree".into() })?;
    let avg_sparseness: f64 = hp[2]
        .parse()
        .map_err(|_| OntologyError::Parse { line: 1, msg: "bad avg_sparseness".into() })?;

    struct Row {
        line: usize,
        index: usize,
        parent: Option<usize>,
        pos: usize,
        label: String,
    }
    let mut rows = Vec::new();
    for (lineno0, l) in lines {
        let line = lineno0 + 1;
        if l.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = l.split(' ').collect();
        if parts.len() != 4 {
            return Err(OntologyError::Parse {
                line,
                msg: "expected `node_index parent_index child_position label`".into(),
            });
        }
        let index: usize = parts[0]
            .parse()
            .map_err(|_| OntologyError::Parse { line, msg: "bad node index".into() })?;
        let parent = if parts[1] == "-" {
            None
        } else {
            Some(parts[1].parse().map_err(|_| OntologyError::Parse {
                line,
                msg: "bad parent index".into(),
            })?)
        };
        let pos: usize = parts[2]
            .parse()
            .map_err(|_| OntologyError::Parse { line, msg: "bad child position".into() })?;
        rows.push(Row { line, index, parent, pos, label: parts[3].to_string() });
    }
    if rows.is_empty() {
        return Err(OntologyError::Parse { line: 1, msg: "no node lines".into() });
    }

    let n = rows.len();
    let mut nodes: Vec<Option<OntologyNode>> = (0..n).map(|_| None).collect();
    let mut children: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); n]; // (pos, child, line)
    for r in &rows {
        if r.index >= n {
            return Err(OntologyError::Parse {
                line: r.line,
                msg: format!("node index {} not contiguous (have {} rows)", r.index, n),
            });
        }
        if nodes[r.index].is_some() {
            return Err(OntologyError::Parse {
                line: r.line,
                msg: format!("duplicate node index {}", r.index),
            });
        }
        nodes[r.index] = Some(OntologyNode {
            node_index: r.index,
            parent_index: r.parent,
            child_indices: Vec::new(),
            label: if r.label == "-" { String::new() } else { r.label.clone() },
        });
        if let Some(p) = r.parent {
            if p >= n {
                return Err(OntologyError::Parse {
                    line: r.line,
                    msg: format!("parent index {p} out of range"),
                });
            }
            children[p].push((r.pos, r.index, r.line));
        }
    }
    let mut nodes: Vec<OntologyNode> = nodes.into_iter().map(|n| n.unwrap()).collect();
    for (p, mut ch) in children.into_iter().enumerate() {
        ch.sort_by_key(|&(pos, _, _)| pos);
        for (want, &(pos, _, line)) in ch.iter().enumerate() {
            if pos != want {
                return Err(OntologyError::Parse {
                    line,
                    msg: format!("child positions of node {p} are not 0..{}", ch.len()),
                });
            }
        }
        nodes[p].child_indices = ch.into_iter().map(|(_, c, _)| c).collect();
    }

    let mut tree = OntologyTree::from_nodes(nodes)
        .map_err(|e| OntologyError::Parse { line: 1, msg: e.to_string() })?;
    if width < tree.onid_width_bits {
        return Err(OntologyError::Parse {
            line: 1,
            msg: format!(
                "declared width {width} below required {}",
                tree.onid_width_bits
            ),
        });
    }
    // Keep the stored statistics so write -> read -> write round-trips.
    tree.onid_width_bits = width;
    tree.avg_degree = avg_degree;
    tree.avg_sparseness = avg_sparseness;
    Ok(tree)
}
