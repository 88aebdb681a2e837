//! ONID-indexed routing tables with a byte-size model and adaptive
//! summarization.
//!
//! Each capability entry holds per-neighbor tuples (utility, hop, stability).
//! When the table exceeds its byte budget, tuples are split into high- and
//! low-utility tiers and grouped under ontology ancestors level by level: the
//! low tier first at each summarization level `SL`, then the high tier only
//! if the table is still over budget. If even root-level grouping cannot
//! satisfy the budget, the lowest-utility tuples are evicted.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::metrics::{
    summary_coverage, summary_utility, utility, MetricsError, UsageState, UtilityParams,
};
use crate::ontology::{common_ancestor, Onid, OntologyError};
use crate::NodeId;

#[derive(Debug, Error)]
pub enum RoutingTableError {
    #[error("advertisement from unknown neighbor {0}")]
    UnknownNeighbor(NodeId),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

/// Per-tuple cost in the size model: 4 id + 1 ut + 1 hop + 1 stb + 1 reserved.
pub const TUPLE_BYTES: u64 = 8;

/// Per-entry cost: both code vectors plus one byte each for quantized
/// coverage and usage.
pub fn entry_overhead_bytes(width_bits: usize) -> u64 {
    2 * (width_bits as u64 / 8) + 2
}

/// One advertised route for a capability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborTuple {
    pub neighbor: NodeId,
    pub ut: u8,
    pub hop: u8,
    pub stb: u8,
    /// Period of the last refresh; stability expires `k` periods after it.
    pub updated_at: u64,
    /// Levels of original (pre-summarization) content accrued below this
    /// entry's code by local summarization. Zero for plain entries.
    pub reach: u8,
}

/// A capability row: coverage, usage, and one tuple per advertising neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct CapabilityEntry {
    pub onid: Onid,
    pub oc: f64,
    pub usage: UsageState,
    pub tuples: Vec<NeighborTuple>,
}

impl CapabilityEntry {
    fn upsert_tuple(&mut self, t: NeighborTuple) {
        match self.tuples.binary_search_by_key(&t.neighbor, |x| x.neighbor) {
            Ok(i) => self.tuples[i] = t,
            Err(i) => self.tuples.insert(i, t),
        }
    }

    pub fn is_own(&self) -> bool {
        self.tuples.iter().any(|t| t.hop == 0)
    }
}

/// One capability as it arrives in an advertisement, with the stability
/// already recomputed by the receiver.
#[derive(Debug, Clone, Copy)]
pub struct AdvertisedCapability {
    pub onid: Onid,
    pub ut: u8,
    pub hop: u8,
    pub oc: f64,
    pub stb_new: u8,
    pub ug: f64,
}

/// Tree-wide knowledge and tunables needed during merge and summarization.
#[derive(Debug, Clone)]
pub struct SummarizeCtx {
    pub params: UtilityParams,
    pub avg_degree: f64,
    pub avg_sparseness: f64,
}

#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct MergeReport {
    pub skipped_malformed: usize,
    pub summarized: bool,
    pub evicted: usize,
}

/// Working item during summarization: one (capability, neighbor tuple) pair.
#[derive(Debug, Clone)]
struct SummItem {
    onid: Onid,
    oc: f64,
    usage: UsageState,
    tuple: NeighborTuple,
}

#[derive(Debug, Clone)]
pub struct RoutingTable {
    owner: NodeId,
    width_bits: usize,
    rtb_bytes: u64,
    /// When false, overflow skips grouping and goes straight to eviction
    /// (the plain table-driven comparison variant).
    summarize: bool,
    entries: BTreeMap<Onid, CapabilityEntry>,
}

impl RoutingTable {
    pub fn new(owner: NodeId, width_bits: usize, rtb_bytes: u64) -> Self {
        RoutingTable { owner, width_bits, rtb_bytes, summarize: true, entries: BTreeMap::new() }
    }

    pub fn set_summarization(&mut self, enabled: bool) {
        self.summarize = enabled;
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn rtb_bytes(&self) -> u64 {
        self.rtb_bytes
    }

    pub fn set_rtb_bytes(&mut self, rtb: u64) {
        self.rtb_bytes = rtb;
    }

    pub fn width_bits(&self) -> usize {
        self.width_bits
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &CapabilityEntry> {
        self.entries.values()
    }

    pub fn get(&self, onid: &Onid) -> Option<&CapabilityEntry> {
        self.entries.get(onid)
    }

    /// Total size of the table under the byte model.
    pub fn size_bytes(&self) -> u64 {
        let eo = entry_overhead_bytes(self.width_bits);
        self.entries.values().map(|e| eo + TUPLE_BYTES * e.tuples.len() as u64).sum()
    }

    /// Installs one of the owner's capabilities: hop 0, pinned usage, maximum
    /// utility. These tuples are never summarized or evicted.
    pub fn insert_own(&mut self, onid: Onid, params: &UtilityParams) {
        let owner = self.owner;
        let entry = self.entries.entry(onid).or_insert_with(|| CapabilityEntry {
            onid,
            oc: 1.0,
            usage: UsageState { ug: 1.0, period_refs: 0 },
            tuples: Vec::new(),
        });
        entry.oc = 1.0;
        entry.usage.ug = 1.0;
        entry.upsert_tuple(NeighborTuple {
            neighbor: owner,
            ut: params.maxut,
            hop: 0,
            stb: params.k_periods,
            updated_at: 0,
            reach: 0,
        });
    }

    /// Counts one reference to an entry for the usage metric.
    pub fn register_reference(&mut self, onid: &Onid) {
        if let Some(e) = self.entries.get_mut(onid) {
            e.usage.period_refs = e.usage.period_refs.saturating_add(1);
        }
    }

    /// Rolls one usage period on every entry. Own capabilities stay pinned at
    /// full usage so their advertised seed never decays.
    pub fn roll_usage(&mut self, params: &UtilityParams) {
        for e in self.entries.values_mut() {
            e.usage = crate::metrics::usage_update(&e.usage, params.alpha, params.ug_cap);
            if e.is_own() {
                e.usage.ug = 1.0;
            }
        }
    }

    /// Re-derives tuple utilities from current usage and stability, zeroing
    /// the stability of tuples not refreshed within the last `k` periods.
    pub fn refresh_utilities(&mut self, now: u64, ctx: &SummarizeCtx) {
        let k = ctx.params.k_periods;
        for e in self.entries.values_mut() {
            let (ug, oc) = (e.usage.ug, e.oc);
            for t in e.tuples.iter_mut() {
                if t.hop == 0 {
                    t.stb = k;
                    t.ut = ctx.params.maxut;
                    continue;
                }
                if now.saturating_sub(t.updated_at) > k as u64 {
                    t.stb = 0;
                }
                t.ut = utility(t.stb, ug, oc, t.hop, &ctx.params);
            }
        }
    }

    /// Applies one advertisement from a current neighbor: hops increment,
    /// utilities are recomputed, tuples are upserted, and the table is
    /// summarized if it overflows its budget.
    pub fn merge_advertised(
        &mut self,
        from: NodeId,
        neighbors: &BTreeSet<NodeId>,
        advertised: &[AdvertisedCapability],
        now: u64,
        ctx: &SummarizeCtx,
    ) -> Result<MergeReport, RoutingTableError> {
        if !neighbors.contains(&from) {
            return Err(RoutingTableError::UnknownNeighbor(from));
        }
        let mut report = MergeReport::default();
        for adv in advertised {
            if adv.onid.validate().is_err() || adv.onid.width_bits() != self.width_bits {
                report.skipped_malformed += 1;
                continue;
            }
            let hop = adv.hop.saturating_add(1);
            let entry = self.entries.entry(adv.onid).or_insert_with(|| CapabilityEntry {
                onid: adv.onid,
                oc: adv.oc.clamp(0.0, 1.0),
                usage: UsageState::seeded(adv.ug),
                tuples: Vec::new(),
            });
            entry.oc = entry.oc.max(adv.oc.clamp(0.0, 1.0));
            let ut = utility(adv.stb_new, entry.usage.ug, entry.oc, hop, &ctx.params);
            entry.upsert_tuple(NeighborTuple {
                neighbor: from,
                ut,
                hop,
                stb: adv.stb_new,
                updated_at: now,
                reach: 0,
            });
        }
        if self.size_bytes() > self.rtb_bytes {
            report.summarized = true;
            report.evicted = self.routing_table_summarization(ctx)?;
        }
        Ok(report)
    }

    fn size_of_items(&self, items: &[SummItem]) -> u64 {
        let eo = entry_overhead_bytes(self.width_bits);
        let onids: BTreeSet<Onid> = items.iter().map(|i| i.onid).collect();
        onids.len() as u64 * eo + items.len() as u64 * TUPLE_BYTES
    }

    /// Two-tier adaptive summarization. Returns the number of tuples the
    /// hard-eviction fallback had to drop (zero in the normal case).
    pub fn routing_table_summarization(
        &mut self,
        ctx: &SummarizeCtx,
    ) -> Result<usize, RoutingTableError> {
        if self.size_bytes() <= self.rtb_bytes {
            return Ok(0);
        }

        // Split into protected own tuples and the two utility tiers.
        let mut protected: Vec<SummItem> = Vec::new();
        let mut hut: Vec<SummItem> = Vec::new();
        let mut lut: Vec<SummItem> = Vec::new();
        for (&onid, e) in self.entries.iter() {
            for t in &e.tuples {
                let item = SummItem { onid, oc: e.oc, usage: e.usage, tuple: *t };
                if t.hop == 0 {
                    protected.push(item);
                } else if t.ut >= ctx.params.utthr {
                    hut.push(item);
                } else {
                    lut.push(item);
                }
            }
        }
        let base = self.size_of_items(&protected);
        let max_reach = hut
            .iter()
            .chain(lut.iter())
            .map(|i| i.onid.depth() + i.tuple.reach as usize)
            .max()
            .unwrap_or(0);

        let mut sl = 0usize;
        while self.summarize
            && base + self.size_of_items(&hut) + self.size_of_items(&lut) > self.rtb_bytes
        {
            sl += 1;
            lut = summarize_by_level(lut, sl, ctx)?;
            if base + self.size_of_items(&hut) + self.size_of_items(&lut) <= self.rtb_bytes {
                break;
            }
            hut = summarize_by_level(hut, sl, ctx)?;
            if sl >= max_reach {
                break; // grouping has reached the root level
            }
        }

        // Fallback: drop lowest-utility tuples until the budget holds.
        let mut evicted = 0usize;
        let mut pool: Vec<SummItem> = Vec::with_capacity(hut.len() + lut.len());
        pool.append(&mut lut);
        pool.append(&mut hut);
        pool.sort_by(|a, b| {
            b.tuple
                .ut
                .cmp(&a.tuple.ut)
                .then(a.onid.cmp(&b.onid))
                .then(a.tuple.neighbor.cmp(&b.tuple.neighbor))
        });
        while base + self.size_of_items(&pool) > self.rtb_bytes && !pool.is_empty() {
            pool.pop();
            evicted += 1;
        }

        self.entries.clear();
        for item in protected.into_iter().chain(pool) {
            let entry = self.entries.entry(item.onid).or_insert_with(|| CapabilityEntry {
                onid: item.onid,
                oc: item.oc,
                usage: item.usage,
                tuples: Vec::new(),
            });
            entry.oc = entry.oc.max(item.oc);
            entry.upsert_tuple(item.tuple);
        }
        Ok(evicted)
    }

    /// Best next hop for a target: exact code match first, then the nearest
    /// present ancestor. Within the first matching level the tuple with the
    /// highest utility wins (ties: lower hop, then lower neighbor id).
    pub fn best_neighbor(&self, target: &Onid) -> Option<(NodeId, Onid)> {
        self.best_neighbor_excluding(target, &BTreeSet::new())
    }

    /// Like [`best_neighbor`](Self::best_neighbor) but skipping excluded
    /// neighbors. If the first matching level holds only excluded tuples the
    /// lookup reports `None` (the caller falls back to random forwarding).
    pub fn best_neighbor_excluding(
        &self,
        target: &Onid,
        exclude: &BTreeSet<NodeId>,
    ) -> Option<(NodeId, Onid)> {
        let mut probe = Some(*target);
        while let Some(cur) = probe {
            if let Some(e) = self.entries.get(&cur) {
                return e
                    .tuples
                    .iter()
                    .filter(|t| !exclude.contains(&t.neighbor))
                    .max_by(|a, b| {
                        a.ut.cmp(&b.ut)
                            .then(b.hop.cmp(&a.hop))
                            .then(b.neighbor.cmp(&a.neighbor))
                    })
                    .map(|t| (t.neighbor, cur));
            }
            probe = cur.parent().ok().flatten();
        }
        None
    }

    /// Debug/golden-test dump: one line per tuple, sorted by onid then
    /// neighbor.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for e in self.entries.values() {
            for t in &e.tuples {
                out.push_str(&format!(
                    "{} {} {} {} {} {} {:.4} {:.4}\n",
                    e.onid.id_hex(),
                    e.onid.sp_hex(),
                    t.neighbor,
                    t.ut,
                    t.hop,
                    t.stb,
                    e.oc,
                    e.usage.ug,
                ));
            }
        }
        out
    }
}

/// How far grouping under `rst` lifts this item: the level distance plus any
/// content depth already accrued below it. An item already sitting at `rst`
/// is not lifted at all.
fn lift(item: &SummItem, rst: &Onid, dist_to_rst: usize) -> usize {
    if item.onid == *rst {
        0
    } else {
        dist_to_rst + item.tuple.reach as usize
    }
}

/// Greedy grouping at summarization level `sl`, iterated to a fixed point:
/// delist the head, let the first same-neighbor partner fix the summary
/// root, then gather every remaining same-neighbor item below that root.
/// Groups never lift original content more than `sl` levels, and never mix
/// neighbors. Freshly built summaries are fed back through the pass so that
/// repeating the call at the same level changes nothing.
fn summarize_by_level(
    items: Vec<SummItem>,
    sl: usize,
    ctx: &SummarizeCtx,
) -> Result<Vec<SummItem>, RoutingTableError> {
    let mut current = items;
    loop {
        let before = current.len();
        current = summarize_pass(current, sl, ctx)?;
        if current.len() == before {
            return Ok(current); // no group formed: fixed point
        }
    }
}

fn summarize_pass(
    items: Vec<SummItem>,
    sl: usize,
    ctx: &SummarizeCtx,
) -> Result<Vec<SummItem>, RoutingTableError> {
    let mut temp: VecDeque<SummItem> = items.into();
    let mut out: Vec<SummItem> = Vec::with_capacity(temp.len());

    while let Some(head) = temp.pop_front() {
        // First pass: the first same-neighbor item groupable with the head
        // fixes the summary root.
        let mut found: Option<(usize, Onid)> = None;
        for (i, cand) in temp.iter().enumerate() {
            if cand.tuple.neighbor != head.tuple.neighbor {
                continue;
            }
            let (rst, d1, d2) = common_ancestor(&head.onid, &cand.onid)?;
            if lift(&head, &rst, d1).max(lift(cand, &rst, d2)) <= sl {
                found = Some((i, rst));
                break;
            }
        }
        let Some((idx, rst)) = found else {
            out.push(head);
            continue;
        };
        let partner = temp.remove(idx).expect("index from enumerate");
        let mut members = vec![head, partner];

        // Second pass: every remaining same-neighbor item that sits below the
        // fixed root within the level bound joins the group.
        let mut rest = VecDeque::with_capacity(temp.len());
        for cand in temp {
            let mut take = false;
            if cand.tuple.neighbor == members[0].tuple.neighbor {
                let (nr, d1, d2) = common_ancestor(&rst, &cand.onid)?;
                take = nr == rst && d1 == 0 && lift(&cand, &rst, d2) <= sl;
            }
            if take {
                members.push(cand);
            } else {
                rest.push_back(cand);
            }
        }
        temp = rest;
        out.push(make_summary(rst, &members, ctx)?);
    }
    Ok(out)
}

fn make_summary(
    rst: Onid,
    members: &[SummItem],
    ctx: &SummarizeCtx,
) -> Result<SummItem, RoutingTableError> {
    debug_assert!(members.len() > 1);
    let pairs: Vec<(Onid, f64)> = members.iter().map(|m| (m.onid, m.oc)).collect();
    let cov = summary_coverage(&rst, &pairs, ctx.avg_degree, ctx.avg_sparseness)?;
    let ug = members.iter().map(|m| m.usage.ug).sum::<f64>() / members.len() as f64;
    let refs = members.iter().map(|m| m.usage.period_refs).fold(0u32, u32::saturating_add);
    let uts: Vec<u8> = members.iter().map(|m| m.tuple.ut).collect();
    let reach = members
        .iter()
        .map(|m| m.tuple.reach as usize + (m.onid.depth() - rst.depth()))
        .max()
        .unwrap_or(0);
    Ok(SummItem {
        onid: rst,
        oc: cov.oc,
        usage: UsageState { ug, period_refs: refs },
        tuple: NeighborTuple {
            neighbor: members[0].tuple.neighbor,
            ut: summary_utility(&uts),
            hop: members.iter().map(|m| m.tuple.hop).min().unwrap(),
            stb: members.iter().map(|m| m.tuple.stb).max().unwrap(),
            updated_at: members.iter().map(|m| m.tuple.updated_at).max().unwrap(),
            reach: reach.min(u8::MAX as usize) as u8,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::imaging_taxonomy;
    use crate::ontology::{encode, generate_ontology, DEFAULT_DEGREE_WEIGHTS};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn ctx() -> SummarizeCtx {
        SummarizeCtx {
            params: UtilityParams::default(),
            avg_degree: 3.0,
            avg_sparseness: 0.8,
        }
    }

    fn adv(onid: Onid, ut: u8, hop: u8, stb: u8, ug: f64) -> AdvertisedCapability {
        AdvertisedCapability { onid, ut, hop, oc: 1.0, stb_new: stb, ug }
    }

    #[test]
    fn size_model_examples() {
        let rt = RoutingTable::new(0, 32, 1 << 20);
        assert_eq!(rt.size_bytes(), 0);

        let (tree, tags) = imaging_taxonomy();
        let t11 = encode(&tree, tags["T11"]).unwrap();
        let w = tree.onid_width_bits();

        let mut rt = RoutingTable::new(0, w, 1 << 20);
        let neighbors: BTreeSet<NodeId> = [7].into();
        rt.merge_advertised(7, &neighbors, &[adv(t11, 30, 0, 5, 1.0)], 0, &ctx()).unwrap();
        assert_eq!(rt.size_bytes(), entry_overhead_bytes(w) + TUPLE_BYTES);

        let neighbors2: BTreeSet<NodeId> = [7, 9].into();
        rt.merge_advertised(9, &neighbors2, &[adv(t11, 30, 0, 5, 1.0)], 0, &ctx()).unwrap();
        assert_eq!(rt.size_bytes(), entry_overhead_bytes(w) + 2 * TUPLE_BYTES);

        // The documented 32-bit case: 8 + 2 + 8 = 18 bytes.
        assert_eq!(entry_overhead_bytes(32) + TUPLE_BYTES, 18);
    }

    #[test]
    fn merge_skips_malformed_codes() {
        let (tree, tags) = imaging_taxonomy();
        let t11 = encode(&tree, tags["T11"]).unwrap();
        // Table with a different code width: the entry must be skipped.
        let mut rt = RoutingTable::new(0, 32, 1 << 20);
        let neighbors: BTreeSet<NodeId> = [7].into();
        let rep =
            rt.merge_advertised(7, &neighbors, &[adv(t11, 30, 0, 5, 1.0)], 0, &ctx()).unwrap();
        assert_eq!(rep.skipped_malformed, 1);
        assert!(rt.is_empty());
    }

    #[test]
    fn merge_upserts_and_increments_hop() {
        let (tree, tags) = imaging_taxonomy();
        let t11 = encode(&tree, tags["T11"]).unwrap();
        let mut rt = RoutingTable::new(0, tree.onid_width_bits(), 1 << 20);
        let neighbors: BTreeSet<NodeId> = [3].into();

        rt.merge_advertised(3, &neighbors, &[adv(t11, 28, 3, 4, 0.8)], 5, &ctx()).unwrap();
        assert_eq!(rt.len(), 1);
        let e = rt.get(&t11).unwrap();
        assert_eq!(e.tuples[0].hop, 4); // advertised 3, stored 4
        assert_eq!(e.tuples[0].stb, 4);

        // Re-advertisement upserts in place.
        rt.merge_advertised(3, &neighbors, &[adv(t11, 28, 2, 5, 0.8)], 6, &ctx()).unwrap();
        assert_eq!(rt.len(), 1);
        assert_eq!(rt.get(&t11).unwrap().tuples.len(), 1);
        assert_eq!(rt.get(&t11).unwrap().tuples[0].hop, 3);

        assert!(matches!(
            rt.merge_advertised(99, &neighbors, &[], 0, &ctx()),
            Err(RoutingTableError::UnknownNeighbor(99))
        ));
    }

    /// The running example: T11, T12, T13 all learned via the same neighbor
    /// summarize into their parent T9 at SL = 1.
    #[test]
    fn sibling_leaves_summarize_into_parent() {
        let (tree, tags) = imaging_taxonomy();
        let w = tree.onid_width_bits();
        let t9 = encode(&tree, tags["T9"]).unwrap();
        let t11 = encode(&tree, tags["T11"]).unwrap();
        let t12 = encode(&tree, tags["T12"]).unwrap();
        let t13 = encode(&tree, tags["T13"]).unwrap();
        let c: NodeId = 2;

        let mut rt = RoutingTable::new(9, w, 1 << 20);
        let neighbors: BTreeSet<NodeId> = [c].into();
        let sctx = SummarizeCtx {
            params: UtilityParams::default(),
            avg_degree: tree.avg_degree(),
            avg_sparseness: tree.avg_sparseness(),
        };
        rt.merge_advertised(
            c,
            &neighbors,
            &[
                adv(t11, 29, 2, 5, 1.0),
                adv(t12, 30, 1, 5, 1.0),
                adv(t13, 31, 0, 5, 1.0),
            ],
            0,
            &sctx,
        )
        .unwrap();
        assert_eq!(rt.len(), 3);

        // Tighten the budget below three entries and summarize.
        rt.set_rtb_bytes(entry_overhead_bytes(w) + TUPLE_BYTES);
        rt.routing_table_summarization(&sctx).unwrap();
        assert_eq!(rt.len(), 1);
        let e = rt.get(&t9).expect("summary under T9");
        assert_eq!(e.tuples.len(), 1);
        assert_eq!(e.tuples[0].neighbor, c);
        assert_eq!(e.tuples[0].reach, 1);
        // All three children known: the subtree estimate still rounds up to
        // ceil(4 * avg_sparseness) = 4 under the global sparseness (0.875),
        // so the summary covers 3 of an estimated 4.
        assert!((e.oc - 0.75).abs() < 1e-9, "oc = {}", e.oc);

        // A lookup for T12 now resolves through the summary.
        assert_eq!(rt.best_neighbor(&t12), Some((c, t9)));
    }

    #[test]
    fn same_capability_from_different_neighbors_never_groups() {
        let (tree, tags) = imaging_taxonomy();
        let w = tree.onid_width_bits();
        let t11 = encode(&tree, tags["T11"]).unwrap();
        let t12 = encode(&tree, tags["T12"]).unwrap();
        let mut rt = RoutingTable::new(0, w, 1 << 20);
        let neighbors: BTreeSet<NodeId> = [1, 2].into();
        rt.merge_advertised(1, &neighbors, &[adv(t11, 10, 1, 5, 0.5)], 0, &ctx()).unwrap();
        rt.merge_advertised(2, &neighbors, &[adv(t12, 10, 1, 5, 0.5)], 0, &ctx()).unwrap();
        rt.set_rtb_bytes(1); // impossible budget: forces maximal effort
        rt.routing_table_summarization(&ctx()).unwrap();
        // No cross-neighbor group can form; anything left is a singleton.
        for e in rt.entries() {
            assert_eq!(e.tuples.len(), 1);
        }
    }

    #[test]
    fn under_budget_summarization_is_identity() {
        let (tree, tags) = imaging_taxonomy();
        let t11 = encode(&tree, tags["T11"]).unwrap();
        let mut rt = RoutingTable::new(0, tree.onid_width_bits(), 1 << 20);
        let neighbors: BTreeSet<NodeId> = [1].into();
        rt.merge_advertised(1, &neighbors, &[adv(t11, 10, 1, 5, 0.5)], 0, &ctx()).unwrap();
        let before = rt.dump();
        rt.routing_table_summarization(&ctx()).unwrap();
        assert_eq!(before, rt.dump());
    }

    /// Low-utility tuples are summarized first; high-utility siblings of the
    /// same parent survive when that alone satisfies the budget.
    #[test]
    fn low_tier_summarized_before_high_tier() {
        let (tree, tags) = imaging_taxonomy();
        let w = tree.onid_width_bits();
        let t9 = encode(&tree, tags["T9"]).unwrap();
        let t11 = encode(&tree, tags["T11"]).unwrap();
        let t12 = encode(&tree, tags["T12"]).unwrap();
        let t13 = encode(&tree, tags["T13"]).unwrap();
        let t8 = encode(&tree, tags["T8"]).unwrap();

        let mut rt = RoutingTable::new(0, w, 1 << 20);
        let neighbors: BTreeSet<NodeId> = [1].into();
        // Two low-ut siblings (stale, unstable routes) and two high-ut rows.
        rt.merge_advertised(
            1,
            &neighbors,
            &[
                adv(t11, 2, 6, 1, 0.1),
                adv(t12, 2, 6, 1, 0.1),
                adv(t13, 30, 0, 5, 1.0),
                adv(t8, 30, 0, 5, 1.0),
            ],
            0,
            &ctx(),
        )
        .unwrap();
        let high = rt
            .entries()
            .flat_map(|e| e.tuples.iter().map(|t| t.ut))
            .filter(|&u| u >= ctx().params.utthr)
            .count();
        assert_eq!(high, 2, "fixture should straddle utthr:\n{}", rt.dump());

        // Budget for exactly three single-tuple entries: grouping the two
        // low-ut siblings into T9 suffices; high-ut entries stay intact.
        rt.set_rtb_bytes(3 * (entry_overhead_bytes(w) + TUPLE_BYTES));
        rt.routing_table_summarization(&ctx()).unwrap();
        assert!(rt.get(&t13).is_some(), "high-ut leaf must survive");
        assert!(rt.get(&t8).is_some(), "high-ut leaf must survive");
        assert!(rt.get(&t9).is_some(), "low-ut leaves grouped under parent");
        assert!(rt.get(&t11).is_none() && rt.get(&t12).is_none());
    }

    /// When parent-level grouping cannot satisfy the budget, SL escalates to
    /// the grandparent.
    #[test]
    fn sl_escalates_until_fit() {
        let (tree, tags) = imaging_taxonomy();
        let w = tree.onid_width_bits();
        let t5 = encode(&tree, tags["T5"]).unwrap();
        let t8 = encode(&tree, tags["T8"]).unwrap();
        let t11 = encode(&tree, tags["T11"]).unwrap();
        let t12 = encode(&tree, tags["T12"]).unwrap();
        let t13 = encode(&tree, tags["T13"]).unwrap();

        let mut rt = RoutingTable::new(0, w, 1 << 20);
        let neighbors: BTreeSet<NodeId> = [1].into();
        // T8 plus T9's children: SL=1 leaves {T8, T9}; only SL=2 collapses
        // everything into their grandparent T5.
        rt.merge_advertised(
            1,
            &neighbors,
            &[
                adv(t8, 2, 6, 1, 0.1),
                adv(t11, 2, 6, 1, 0.1),
                adv(t12, 2, 6, 1, 0.1),
                adv(t13, 2, 6, 1, 0.1),
            ],
            0,
            &ctx(),
        )
        .unwrap();
        rt.set_rtb_bytes(entry_overhead_bytes(w) + TUPLE_BYTES);
        rt.routing_table_summarization(&ctx()).unwrap();
        assert_eq!(rt.len(), 1);
        assert!(rt.get(&t5).is_some(), "expected grandparent summary:\n{}", rt.dump());
    }

    #[test]
    fn own_capability_survives_any_budget() {
        let (tree, tags) = imaging_taxonomy();
        let w = tree.onid_width_bits();
        let t11 = encode(&tree, tags["T11"]).unwrap();
        let t12 = encode(&tree, tags["T12"]).unwrap();
        let mut rt = RoutingTable::new(5, w, 1 << 20);
        rt.insert_own(t11, &UtilityParams::default());
        let neighbors: BTreeSet<NodeId> = [1].into();
        rt.merge_advertised(1, &neighbors, &[adv(t12, 10, 1, 3, 0.5)], 0, &ctx()).unwrap();
        rt.set_rtb_bytes(1);
        rt.routing_table_summarization(&ctx()).unwrap();
        let e = rt.get(&t11).expect("own entry kept");
        assert!(e.is_own());
        assert_eq!(e.tuples[0].ut, 32);
    }

    #[test]
    fn best_neighbor_examples() {
        let (tree, tags) = imaging_taxonomy();
        let w = tree.onid_width_bits();
        let t12 = encode(&tree, tags["T12"]).unwrap();
        let rt = RoutingTable::new(0, w, 1 << 20);
        assert_eq!(rt.best_neighbor(&t12), None);

        let mut rt = RoutingTable::new(0, w, 1 << 20);
        let neighbors: BTreeSet<NodeId> = [4, 9].into();
        rt.merge_advertised(4, &neighbors, &[adv(t12, 28, 1, 5, 1.0)], 0, &ctx()).unwrap();
        rt.merge_advertised(9, &neighbors, &[adv(t12, 14, 4, 2, 0.4)], 0, &ctx()).unwrap();
        let (n, matched) = rt.best_neighbor(&t12).unwrap();
        assert_eq!(matched, t12);
        assert_eq!(n, 4); // higher-utility tuple wins

        let excl: BTreeSet<NodeId> = [4].into();
        assert_eq!(rt.best_neighbor_excluding(&t12, &excl).unwrap().0, 9);
        let excl_all: BTreeSet<NodeId> = [4, 9].into();
        assert_eq!(rt.best_neighbor_excluding(&t12, &excl_all), None);
    }

    #[test]
    fn argmax_is_scale_invariant() {
        let (tree, tags) = imaging_taxonomy();
        let w = tree.onid_width_bits();
        let t12 = encode(&tree, tags["T12"]).unwrap();
        let pick = |scale: u8| {
            let mut rt = RoutingTable::new(0, w, 1 << 20);
            let e = CapabilityEntry {
                onid: t12,
                oc: 1.0,
                usage: UsageState::new(),
                tuples: vec![
                    NeighborTuple {
                        neighbor: 3,
                        ut: 7 * scale,
                        hop: 2,
                        stb: 3,
                        updated_at: 0,
                        reach: 0,
                    },
                    NeighborTuple {
                        neighbor: 5,
                        ut: 4 * scale,
                        hop: 1,
                        stb: 3,
                        updated_at: 0,
                        reach: 0,
                    },
                    NeighborTuple {
                        neighbor: 8,
                        ut: 6 * scale,
                        hop: 1,
                        stb: 3,
                        updated_at: 0,
                        reach: 0,
                    },
                ],
            };
            rt.entries.insert(t12, e);
            rt.best_neighbor(&t12).unwrap().0
        };
        assert_eq!(pick(1), pick(2));
        assert_eq!(pick(1), pick(3));
    }

    #[test]
    fn summarize_idempotent_at_fixed_sl() {
        let (tree, tags) = imaging_taxonomy();
        let onids: Vec<Onid> = ["T8", "T11", "T12", "T13", "T6", "T3"]
            .iter()
            .map(|t| encode(&tree, tags[*t]).unwrap())
            .collect();
        let items: Vec<SummItem> = onids
            .iter()
            .enumerate()
            .map(|(i, &onid)| SummItem {
                onid,
                oc: 1.0,
                usage: UsageState::seeded(0.5),
                tuple: NeighborTuple {
                    neighbor: (i % 2) as NodeId,
                    ut: 5,
                    hop: 2,
                    stb: 3,
                    updated_at: 0,
                    reach: 0,
                },
            })
            .collect();
        let c = SummarizeCtx {
            params: UtilityParams::default(),
            avg_degree: tree.avg_degree(),
            avg_sparseness: tree.avg_sparseness(),
        };
        for sl in 1..=3 {
            let once = summarize_by_level(items.clone(), sl, &c).unwrap();
            let twice = summarize_by_level(once.clone(), sl, &c).unwrap();
            let key = |v: &[SummItem]| -> Vec<(Onid, NodeId, u8)> {
                v.iter().map(|i| (i.onid, i.tuple.neighbor, i.tuple.reach)).collect()
            };
            assert_eq!(key(&once), key(&twice), "sl={sl}");
        }
    }

    /// Level-1 vs level-2 grouping: capabilities whose common ancestor is two
    /// levels up only group once SL reaches 2, matching a brute-force check.
    #[test]
    fn grouping_respects_level_bound() {
        let (tree, tags) = imaging_taxonomy();
        let t8 = encode(&tree, tags["T8"]).unwrap();
        let t11 = encode(&tree, tags["T11"]).unwrap();
        let t5 = encode(&tree, tags["T5"]).unwrap();
        let mk = |onid| SummItem {
            onid,
            oc: 1.0,
            usage: UsageState::seeded(0.5),
            tuple: NeighborTuple { neighbor: 1, ut: 5, hop: 2, stb: 3, updated_at: 0, reach: 0 },
        };
        let c = SummarizeCtx {
            params: UtilityParams::default(),
            avg_degree: tree.avg_degree(),
            avg_sparseness: tree.avg_sparseness(),
        };
        // T8 (child of T5) and T11 (grandchild of T5): max distance is 2.
        let out1 = summarize_by_level(vec![mk(t8), mk(t11)], 1, &c).unwrap();
        assert_eq!(out1.len(), 2, "SL=1 must not group them");
        let out2 = summarize_by_level(vec![mk(t8), mk(t11)], 2, &c).unwrap();
        assert_eq!(out2.len(), 1);
        assert_eq!(out2[0].onid, t5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        /// Adversarial advertisement streams never leave the table over
        /// budget, and groups never mix neighbors.
        #[test]
        fn rtb_safety_under_adversarial_streams(seed in 0u64..10_000, rtb_sel in 0usize..3) {
            let tree = generate_ontology(seed, 60, (2, 8), &DEFAULT_DEGREE_WEIGHTS).unwrap();
            let w = tree.onid_width_bits();
            let rtb = [256u64, 1024, 65_536][rtb_sel];
            let mut rt = RoutingTable::new(0, w, rtb);
            let c = SummarizeCtx {
                params: UtilityParams::default(),
                avg_degree: tree.avg_degree(),
                avg_sparseness: tree.avg_sparseness(),
            };
            let neighbors: BTreeSet<NodeId> = (1..=6).collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);

            for round in 0..8u64 {
                let from = rng.random_range(1..=6u32);
                let batch: Vec<AdvertisedCapability> = (0..40)
                    .map(|_| {
                        let idx = rng.random_range(0..tree.len());
                        AdvertisedCapability {
                            onid: encode(&tree, idx).unwrap(),
                            ut: rng.random_range(0..=32),
                            hop: rng.random_range(0..12),
                            oc: rng.random_range(0.0..=1.0),
                            stb_new: rng.random_range(0..=5),
                            ug: rng.random_range(0.0..=1.0),
                        }
                    })
                    .collect();
                rt.merge_advertised(from, &neighbors, &batch, round, &c).unwrap();
                prop_assert!(
                    rt.size_bytes() <= rtb,
                    "size {} over budget {rtb}",
                    rt.size_bytes()
                );
            }
        }

        /// More aggressive levels never make the grouped list larger.
        #[test]
        fn monotone_compression(seed in 0u64..10_000) {
            let tree = generate_ontology(seed, 80, (2, 8), &DEFAULT_DEGREE_WEIGHTS).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 17);
            let mut seen = std::collections::BTreeSet::new();
            let items: Vec<SummItem> = (0..24)
                .map(|_| {
                    let idx = rng.random_range(0..tree.len());
                    SummItem {
                        onid: encode(&tree, idx).unwrap(),
                        oc: 1.0,
                        usage: UsageState::seeded(0.3),
                        tuple: NeighborTuple {
                            neighbor: rng.random_range(0..3u32),
                            ut: rng.random_range(0..32),
                            hop: rng.random_range(1..8),
                            stb: rng.random_range(0..=5),
                            updated_at: 0,
                            reach: 0,
                        },
                    }
                })
                .filter(|i| seen.insert((i.onid, i.tuple.neighbor)))
                .collect();
            let c = SummarizeCtx {
                params: UtilityParams::default(),
                avg_degree: tree.avg_degree(),
                avg_sparseness: tree.avg_sparseness(),
            };
            let size = |v: &[SummItem]| {
                let onids: BTreeSet<Onid> = v.iter().map(|i| i.onid).collect();
                onids.len() as u64 * entry_overhead_bytes(tree.onid_width_bits())
                    + v.len() as u64 * TUPLE_BYTES
            };
            let mut prev = size(&items);
            for sl in 1..=6 {
                let out = summarize_by_level(items.clone(), sl, &c).unwrap();
                let s = size(&out);
                prop_assert!(s <= prev, "sl={sl}: {s} > {prev}");
                prev = s;
            }

            // Neighbor separation: group outputs carry their members' single
            // neighbor, so per-(onid, neighbor) multiplicity stays <= 1.
            for sl in 1..=4 {
                let out = summarize_by_level(items.clone(), sl, &c).unwrap();
                let mut keys = std::collections::BTreeSet::new();
                for i in &out {
                    prop_assert!(keys.insert((i.onid, i.tuple.neighbor)));
                }
            }
        }
    }
}
