//! Summarization-candidate metrics and the bounded utility score.
//!
//! Four metrics rank routing-table entries: ontology coverage (how much of an
//! ancestor's subtree the summarized entries actually represent), hop
//! distance, exponentially weighted usage, and link stability predicted from
//! exchanged mobility plans. They combine into an integer utility in
//! `[0, maxut]` that drives both summarization tiering and next-hop choice.

use thiserror::Error;

use crate::ontology::{Onid, OntologyError};
use crate::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("mobility plans cover different period windows")]
    WindowMismatch,
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

/// Coverage of a summary entry plus the subtree-size estimate it divides by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageEstimate {
    pub oc: f64,
    pub ost_size_estimate: u64,
}

/// Predicted positions of one node for the next `k` periods.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityPlan {
    pub node: NodeId,
    pub start_period: u64,
    pub positions: Vec<(f64, f64)>,
    pub comm_range: f64,
}

impl MobilityPlan {
    pub fn stationary(
        node: NodeId,
        start_period: u64,
        pos: (f64, f64),
        k: usize,
        range: f64,
    ) -> Self {
        MobilityPlan { node, start_period, positions: vec![pos; k], comm_range: range }
    }
}

/// Exponentially weighted usage of one routing-table entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UsageState {
    pub ug: f64,
    /// References accumulated during the current usage period.
    pub period_refs: u32,
}

impl UsageState {
    pub fn new() -> Self {
        UsageState { ug: 0.0, period_refs: 0 }
    }

    /// Seed from an advertised value (quantization may push it slightly out).
    pub fn seeded(ug: f64) -> Self {
        UsageState { ug: ug.clamp(0.0, 1.0), period_refs: 0 }
    }
}

impl Default for UsageState {
    fn default() -> Self {
        Self::new()
    }
}

/// Weights and bounds for the utility computation. All runtime-tunable.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityParams {
    pub w1: f64,
    pub w2: f64,
    pub alpha: f64,
    pub maxut: u8,
    pub utthr: u8,
    pub k_periods: u8,
    /// References per usage period that count as full (1.0) frequency.
    pub ug_cap: u32,
    /// Ablation: treat every entry as fully stable (stb = k).
    pub disable_stability: bool,
    /// Ablation: treat every entry as fully covered (oc = 1).
    pub disable_coverage: bool,
}

impl Default for UtilityParams {
    fn default() -> Self {
        UtilityParams {
            w1: 1.0,
            w2: 1.0,
            alpha: 0.5,
            maxut: 32,
            utthr: 16,
            k_periods: 5,
            ug_cap: 10,
            disable_stability: false,
            disable_coverage: false,
        }
    }
}

/// Estimates the number of descendants of `rst` from the codes of the known
/// descendants in `lsc` plus the tree-wide average degree and sparseness.
///
/// Level by level below `rst`: every branch with a known representative
/// contributes the larger of (highest known position + 1) and
/// `ceil(2^piece_width * sparse)`; branches without one contribute the
/// average degree. A member's code informs every level on its root path, so
/// deep members also pin down their ancestors' positions.
pub fn estimate_ost_size(
    rst: &Onid,
    lsc: &[Onid],
    avg_degree: f64,
    avg_sparseness: f64,
) -> Result<u64, MetricsError> {
    if lsc.is_empty() {
        return Err(MetricsError::Precondition("empty candidate list".into()));
    }
    let rd = rst.depth();
    // known[i]: branch ancestor at depth rd+i-1 -> (max position, piece width)
    let mut known: Vec<std::collections::BTreeMap<Onid, (u64, usize)>> = Vec::new();
    let mut tl = 0usize;
    for m in lsc {
        if m == rst || !rst.is_ancestor_of(m)? {
            return Err(MetricsError::Precondition(
                "candidate is not a strict descendant of the summary root".into(),
            ));
        }
        let pieces = m.level_pieces()?;
        let rel = m.depth() - rd;
        tl = tl.max(rel);
        if known.len() < rel {
            known.resize(rel, Default::default());
        }
        for i in 1..=rel {
            let branch = m.ancestor_at_depth(rd + i - 1)?;
            let (pos, w) = pieces[rd + i];
            let slot = known[i - 1].entry(branch).or_insert((pos, w));
            debug_assert_eq!(slot.1, w, "siblings share the same piece width");
            slot.0 = slot.0.max(pos);
        }
    }

    let mut total = 0.0f64;
    let mut prev_level = 1.0f64; // level 0 holds rst itself
    for level in known.iter().take(tl) {
        let mut branch_sum = 0u64;
        for &(max_pos, w) in level.values() {
            let cap = ((1u64 << w) as f64 * avg_sparseness).ceil() as u64;
            branch_sum += (max_pos + 1).max(cap);
        }
        let unknown = (prev_level - level.len() as f64).max(0.0);
        let this_level = branch_sum as f64 + unknown * avg_degree;
        total += this_level;
        prev_level = this_level;
    }
    Ok((total.ceil() as u64).max(1))
}

/// Coverage of a summary: the summed coverages of the entries it replaces,
/// over the estimated size of the summary root's subtree.
pub fn ontology_coverage(member_cov: &[f64], ost_size: u64) -> Result<f64, MetricsError> {
    if ost_size == 0 {
        return Err(MetricsError::Precondition("ost size must be >= 1".into()));
    }
    for &c in member_cov {
        if !(0.0..=1.0).contains(&c) {
            return Err(MetricsError::OutOfRange(format!("coverage {c}")));
        }
    }
    Ok((member_cov.iter().sum::<f64>() / ost_size as f64).min(1.0))
}

/// Coverage estimate for summarizing `members` (onid, own coverage) into
/// `rst`. Members equal to `rst` are excluded from both the sum and the
/// subtree estimate.
pub fn summary_coverage(
    rst: &Onid,
    members: &[(Onid, f64)],
    avg_degree: f64,
    avg_sparseness: f64,
) -> Result<CoverageEstimate, MetricsError> {
    let below: Vec<Onid> =
        members.iter().filter(|(o, _)| o != rst).map(|(o, _)| *o).collect();
    let covs: Vec<f64> =
        members.iter().filter(|(o, _)| o != rst).map(|(_, c)| *c).collect();
    let ost = estimate_ost_size(rst, &below, avg_degree, avg_sparseness)?;
    Ok(CoverageEstimate { oc: ontology_coverage(&covs, ost)?, ost_size_estimate: ost })
}

/// Number of future periods during which the two nodes are within the smaller
/// of their communication ranges.
pub fn overlap(a: &MobilityPlan, b: &MobilityPlan) -> Result<u8, MetricsError> {
    if a.start_period != b.start_period || a.positions.len() != b.positions.len() {
        return Err(MetricsError::WindowMismatch);
    }
    let range = a.comm_range.min(b.comm_range);
    let mut n = 0u8;
    for (pa, pb) in a.positions.iter().zip(b.positions.iter()) {
        let (dx, dy) = (pa.0 - pb.0, pa.1 - pb.1);
        if (dx * dx + dy * dy).sqrt() <= range {
            n += 1;
        }
    }
    Ok(n)
}

/// Stability of an entry received over a 2-hop chain: either the receiver
/// directly overlaps the sender's upstream, or the route survives through the
/// weaker of (sender<->receiver, sender<->upstream) overlaps.
pub fn stability_propagate(
    ov_skip: u8,
    ov_local: u8,
    ov_upstream_pair: u8,
    k: u8,
) -> Result<u8, MetricsError> {
    for (name, v) in [("skip", ov_skip), ("local", ov_local), ("upstream", ov_upstream_pair)] {
        if v > k {
            return Err(MetricsError::OutOfRange(format!(
                "overlap {name}={v} exceeds k={k}"
            )));
        }
    }
    Ok(ov_skip.max(ov_local.min(ov_upstream_pair)))
}

/// Rolls one usage period: the normalized reference frequency is blended into
/// the running value and the period counter resets.
pub fn usage_update(state: &UsageState, alpha: f64, ug_cap: u32) -> UsageState {
    let freq = (state.period_refs as f64 / ug_cap.max(1) as f64).min(1.0);
    UsageState { ug: alpha * freq + (1.0 - alpha) * state.ug, period_refs: 0 }
}

/// Bounded integer utility of one neighbor tuple.
pub fn utility(stb: u8, ug: f64, oc: f64, hop: u8, p: &UtilityParams) -> u8 {
    let stb = if p.disable_stability { p.k_periods } else { stb };
    let oc = if p.disable_coverage { 1.0 } else { oc };
    let raw = p.w1 * (stb as f64 / p.k_periods as f64) * ug * p.maxut as f64
        - p.w2 * oc * hop as f64;
    raw.round().clamp(0.0, p.maxut as f64) as u8
}

/// Utility assigned to a freshly created summary entry.
pub fn summary_utility(member_utilities: &[u8]) -> u8 {
    assert!(!member_utilities.is_empty(), "summary needs at least one member");
    *member_utilities.iter().max().unwrap()
}
