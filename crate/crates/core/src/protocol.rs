//! The per-node protocol state machine: periodic advertisement, receipt
//! processing, and query lookup.
//!
//! Lookup tries, in order: the node's own capabilities, the best unvisited
//! neighbor for the target's code (falling back level by level to ontology
//! ancestors), a bounded number of random forwards, and finally backtracking
//! along the travelled path. Backtracking plus path exclusion makes the
//! search a depth-first traversal, so a reachable provider is eventually
//! found while termination stays bounded by the TTL.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::metrics::{overlap, stability_propagate, MetricsError, MobilityPlan, UtilityParams};
use crate::ontology::{Onid, OntologyError};
use crate::routing_table::{
    AdvertisedCapability, MergeReport, RoutingTable, RoutingTableError, SummarizeCtx,
};
use crate::NodeId;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("advertisement sender {0} is not a current neighbor")]
    SenderNotNeighbor(NodeId),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Table(#[from] RoutingTableError),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

/// Query/forwarding bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    pub ttl: u16,
    pub rf_budget: u16,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams { ttl: 64, rf_budget: 10 }
    }
}

/// Fixed per-message header charged to every wire message.
pub const MSG_HEADER_BYTES: u64 = 12;

/// Advertisement size: header + per-entry (both code vectors + 6 metric
/// bytes) + the sender's plan (8 bytes per period).
pub fn advertisement_wire_bytes(n_entries: usize, width_bits: usize, k: usize) -> u64 {
    MSG_HEADER_BYTES + n_entries as u64 * (2 * width_bits as u64 / 8 + 6) + k as u64 * 8
}

/// Query size: header + target code + 2 counter bytes + 4 bytes per carried
/// path element.
pub fn query_wire_bytes(path_len: usize, width_bits: usize) -> u64 {
    MSG_HEADER_BYTES + 2 * width_bits as u64 / 8 + 2 + 4 * path_len as u64
}

fn q8(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn dq8(q: u8) -> f64 {
    q as f64 / 255.0
}

/// One capability row inside an advertisement. `upstream` names the neighbor
/// the sender learned the capability from (itself for its own capabilities)
/// and `upstream_overlap` the sender's predicted overlap with that upstream,
/// so the receiver can apply the two-hop stability rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvertEntry {
    pub onid: Onid,
    pub ut: u8,
    pub hop: u8,
    pub oc_q8: u8,
    pub ug_q8: u8,
    pub stb: u8,
    pub upstream_overlap: u8,
    pub upstream: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Advertisement {
    pub sender: NodeId,
    pub entries: Vec<AdvertEntry>,
    pub plan: MobilityPlan,
}

impl Advertisement {
    pub fn wire_bytes(&self, width_bits: usize) -> u64 {
        advertisement_wire_bytes(self.entries.len(), width_bits, self.plan.positions.len())
    }
}

/// Ground-truth mobility plans supplied by the environment. Plans returned
/// for different nodes share the same period window.
pub trait PlanSource {
    fn plan(&self, node: NodeId) -> Option<MobilityPlan>;
}

impl PlanSource for std::collections::BTreeMap<NodeId, MobilityPlan> {
    fn plan(&self, node: NodeId) -> Option<MobilityPlan> {
        self.get(&node).cloned()
    }
}

/// A discovery query in flight.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: u64,
    pub cpb: Onid,
    pub source: NodeId,
    pub ttl: u16,
    pub rf_budget: u16,
    /// Current route from the source; the tail is the node processing
    /// the query. Pops on backtrack.
    pub path: Vec<NodeId>,
    /// Every node the query has ever visited (never shrinks).
    pub visited: BTreeSet<NodeId>,
    /// Forwards plus backtrack hops.
    pub hops_taken: u32,
    pub random_forwards: u32,
    pub backtracks: u32,
}

impl Query {
    pub fn wire_bytes(&self, width_bits: usize) -> u64 {
        query_wire_bytes(self.path.len(), width_bits)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryOutcome {
    Found { provider: NodeId, query: Query },
    Forward { next: NodeId, query: Query },
    Backtrack { prev: NodeId, query: Query },
    Fail { query: Query },
}

/// Protocol state of one node.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub own: BTreeSet<Onid>,
    pub rt: RoutingTable,
    pub neighbors: BTreeSet<NodeId>,
    pub params: ProtocolParams,
}

impl NodeState {
    pub fn new(
        id: NodeId,
        width_bits: usize,
        rtb_bytes: u64,
        own: impl IntoIterator<Item = Onid>,
        utility: &UtilityParams,
        params: ProtocolParams,
    ) -> Self {
        let mut rt = RoutingTable::new(id, width_bits, rtb_bytes);
        let own: BTreeSet<Onid> = own.into_iter().collect();
        for cap in &own {
            rt.insert_own(*cap, utility);
        }
        NodeState { id, own, rt, neighbors: BTreeSet::new(), params }
    }

    /// Builds one advertisement per current neighbor from the (already
    /// summarized) routing table. Per capability the best tuple is
    /// advertised, together with the upstream neighbor it was learned from
    /// and the predicted overlap with that upstream.
    pub fn advertise(
        &mut self,
        plans: &dyn PlanSource,
        now: u64,
        ctx: &SummarizeCtx,
    ) -> Result<Vec<(NodeId, Advertisement)>, ProtocolError> {
        match self.build_advertisement(plans, now, ctx)? {
            Some(adv) => Ok(self.neighbors.iter().map(|&n| (n, adv.clone())).collect()),
            None => Ok(Vec::new()),
        }
    }

    /// The shared advertisement payload for this period, or `None` when the
    /// node is isolated.
    pub fn build_advertisement(
        &mut self,
        plans: &dyn PlanSource,
        now: u64,
        ctx: &SummarizeCtx,
    ) -> Result<Option<Advertisement>, ProtocolError> {
        if self.neighbors.is_empty() {
            return Ok(None);
        }
        self.rt.refresh_utilities(now, ctx);
        let my_plan = match plans.plan(self.id) {
            Some(p) => p,
            None => return Ok(None),
        };

        let mut entries = Vec::with_capacity(self.rt.len());
        for e in self.rt.entries() {
            let best = e
                .tuples
                .iter()
                .max_by(|a, b| {
                    a.ut.cmp(&b.ut).then(b.hop.cmp(&a.hop)).then(b.neighbor.cmp(&a.neighbor))
                })
                .expect("entries hold at least one tuple");
            let upstream_overlap = match plans.plan(best.neighbor) {
                Some(p) => overlap(&my_plan, &p)?,
                None => 0,
            };
            entries.push(AdvertEntry {
                onid: e.onid,
                ut: best.ut,
                hop: best.hop,
                oc_q8: q8(e.oc),
                ug_q8: q8(e.usage.ug),
                stb: best.stb,
                upstream_overlap,
                upstream: best.neighbor,
            });
        }
        Ok(Some(Advertisement { sender: self.id, entries, plan: my_plan }))
    }

    /// Processes a received advertisement: recomputes stability from the
    /// exchanged plans via the two-hop rule, then merges into the table.
    pub fn on_advertisement(
        &mut self,
        msg: &Advertisement,
        plans: &dyn PlanSource,
        now: u64,
        ctx: &SummarizeCtx,
    ) -> Result<MergeReport, ProtocolError> {
        if !self.neighbors.contains(&msg.sender) {
            return Err(ProtocolError::SenderNotNeighbor(msg.sender));
        }
        let k = ctx.params.k_periods;
        let my_plan = match plans.plan(self.id) {
            Some(p) => p,
            None => return Ok(MergeReport::default()),
        };
        let ov_local = match plans.plan(msg.sender) {
            Some(p) => overlap(&my_plan, &p)?,
            None => 0,
        };

        // Entries from one sender share few distinct upstreams; overlap
        // computations are memoized per upstream for the message.
        let mut skip_cache: std::collections::BTreeMap<NodeId, u8> = Default::default();
        let mut batch = Vec::with_capacity(msg.entries.len());
        for e in &msg.entries {
            let ov_skip = if e.upstream == msg.sender {
                ov_local
            } else if let Some(&ov) = skip_cache.get(&e.upstream) {
                ov
            } else {
                let ov = match plans.plan(e.upstream) {
                    Some(p) => overlap(&my_plan, &p)?,
                    None => 0,
                };
                skip_cache.insert(e.upstream, ov);
                ov
            };
            let stb = stability_propagate(ov_skip, ov_local, e.upstream_overlap.min(k), k)?;
            batch.push(AdvertisedCapability {
                onid: e.onid,
                ut: e.ut,
                hop: e.hop,
                oc: dq8(e.oc_q8),
                stb_new: stb,
                ug: dq8(e.ug_q8),
            });
        }
        Ok(self.rt.merge_advertised(msg.sender, &self.neighbors, &batch, now, ctx)?)
    }

    /// Starts a query at this node and counts the usage reference on the
    /// entry the lookup would match.
    pub fn issue_query(&mut self, id: u64, cpb: Onid) -> Query {
        if let Some((_, matched)) = self.rt.best_neighbor(&cpb) {
            self.rt.register_reference(&matched);
        } else if self.own.contains(&cpb) {
            self.rt.register_reference(&cpb);
        }
        Query {
            id,
            cpb,
            source: self.id,
            ttl: self.params.ttl,
            rf_budget: self.params.rf_budget,
            path: vec![self.id],
            visited: BTreeSet::from([self.id]),
            hops_taken: 0,
            random_forwards: 0,
            backtracks: 0,
        }
    }

    /// One lookup step at this node. The query's path tail is this node.
    pub fn on_query(&mut self, mut q: Query, rng: &mut ChaCha8Rng) -> QueryOutcome {
        debug_assert_eq!(q.path.last(), Some(&self.id));

        if self.own.contains(&q.cpb) {
            return QueryOutcome::Found { provider: self.id, query: q };
        }
        if q.ttl == 0 {
            return QueryOutcome::Fail { query: q };
        }

        // Best table-guided next hop among current, unvisited neighbors.
        let mut exclude = q.visited.clone();
        let guided = loop {
            match self.rt.best_neighbor_excluding(&q.cpb, &exclude) {
                Some((n, matched)) if self.neighbors.contains(&n) => break Some((n, matched)),
                Some((n, _)) => {
                    exclude.insert(n); // departed neighbor: try the next tuple
                }
                None => break None,
            }
        };

        if let Some((next, matched)) = guided {
            let initial = q.source == self.id && q.hops_taken == 0;
            if !initial {
                self.rt.register_reference(&matched);
            }
            q.ttl -= 1;
            q.hops_taken += 1;
            q.path.push(next);
            q.visited.insert(next);
            return QueryOutcome::Forward { next, query: q };
        }

        // Nothing in the table (up to the root): bounded random forwarding.
        if q.rf_budget > 0 {
            let candidates: Vec<NodeId> =
                self.neighbors.iter().copied().filter(|n| !q.visited.contains(n)).collect();
            if !candidates.is_empty() {
                let next = candidates[rng.random_range(0..candidates.len())];
                q.rf_budget -= 1;
                q.random_forwards += 1;
                q.ttl -= 1;
                q.hops_taken += 1;
                q.path.push(next);
                q.visited.insert(next);
                return QueryOutcome::Forward { next, query: q };
            }
        }

        // Backtrack to the previous node on the path, if any.
        if q.path.len() > 1 {
            q.path.pop();
            let prev = *q.path.last().expect("non-empty after pop");
            q.backtracks += 1;
            q.hops_taken += 1;
            return QueryOutcome::Backtrack { prev, query: q };
        }

        QueryOutcome::Fail { query: q }
    }
}
