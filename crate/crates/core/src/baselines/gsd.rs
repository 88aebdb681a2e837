//! Group-cache discovery: capability holders flood advertisements a few hops
//! carrying the capability plus its ontology group (a fixed-depth ancestor);
//! every node caches what it hears, evicting the oldest entries when the
//! cache overflows. Lookups forward directly on an exact cache hit, toward a
//! group advertiser on a group hit, and fall back to flooding otherwise.

use std::collections::{BTreeSet, VecDeque};

use crate::ontology::Onid;
use crate::protocol::{query_wire_bytes, MSG_HEADER_BYTES};
use crate::simnet::{adv_phase, Env, MsgClass, QueryState};
use crate::NodeId;

const PIGGYBACK_CAP: usize = 16;

pub struct GsdEngine {
    cache_hops: u32,
    group_depth: usize,
    rtb: u64,
    nodes: Vec<GsdNode>,
    adv_floods: Vec<AdvFlood>,
    directed: VecDeque<DirectedFlight>,
    flood_copies: VecDeque<FloodCopy>,
    clock_ts: u64,
}

#[derive(Debug, Clone, Copy)]
struct ExactEntry {
    cap: Onid,
    /// Stored (and charged) with the entry; lookups resolve groups from the
    /// dedicated group table.
    #[allow(dead_code)]
    group: Onid,
    provider: NodeId,
    next_hop: NodeId,
    hops: u32,
    ts: u64,
}

#[derive(Debug, Clone, Copy)]
struct GroupEntry {
    group: Onid,
    next_hop: NodeId,
    ts: u64,
}

#[derive(Default)]
struct GsdNode {
    own: Option<(Onid, Onid)>, // capability and its group
    exact: Vec<ExactEntry>,
    groups: Vec<GroupEntry>,
    seen_queries: BTreeSet<u64>,
}

struct AdvFlood {
    origin: NodeId,
    cap: Onid,
    group: Onid,
    piggyback: Vec<Onid>,
    frontier: Vec<NodeId>,
    seen: Vec<bool>,
    ring: u32,
}

struct DirectedFlight {
    arrive: u64,
    to: NodeId,
    q: GsdQuery,
}

#[derive(Debug, Clone)]
struct GsdQuery {
    id: u64,
    idx: usize,
    target: Onid,
    group: Onid,
    ttl: u16,
    hops: u32,
    backtracks: u32,
    path: Vec<NodeId>,
    visited: BTreeSet<NodeId>,
}

struct FloodCopy {
    arrive: u64,
    to: NodeId,
    id: u64,
    idx: usize,
    target: Onid,
    ttl: u16,
    hops: u32,
}

fn exact_entry_bytes(width_bits: usize) -> u64 {
    2 * (2 * width_bits as u64 / 8) + 14
}

fn group_entry_bytes(width_bits: usize) -> u64 {
    2 * width_bits as u64 / 8 + 8
}

fn adv_bytes(width_bits: usize, piggyback: usize) -> u64 {
    MSG_HEADER_BYTES
        + 2 * (2 * width_bits as u64 / 8)
        + 5
        + piggyback as u64 * (2 * width_bits as u64 / 8)
}

fn flood_copy_bytes(width_bits: usize) -> u64 {
    MSG_HEADER_BYTES + 2 * (2 * width_bits as u64 / 8) + 2
}

fn group_of(cap: &Onid, group_depth: usize) -> Onid {
    cap.ancestor_at_depth(group_depth.min(cap.depth())).expect("depth clamped")
}

impl GsdNode {
    fn cache_bytes(&self, width_bits: usize) -> u64 {
        self.exact.len() as u64 * exact_entry_bytes(width_bits)
            + self.groups.len() as u64 * group_entry_bytes(width_bits)
    }

    /// Oldest-first eviction across both entry kinds.
    fn evict_to(&mut self, rtb: u64, width_bits: usize) {
        while self.cache_bytes(width_bits) > rtb {
            let oldest_exact = self.exact.iter().map(|e| e.ts).min();
            let oldest_group = self.groups.iter().map(|g| g.ts).min();
            match (oldest_exact, oldest_group) {
                (Some(a), Some(b)) if a <= b => {
                    let i = self.exact.iter().position(|e| e.ts == a).unwrap();
                    self.exact.remove(i);
                }
                (_, Some(b)) => {
                    let i = self.groups.iter().position(|g| g.ts == b).unwrap();
                    self.groups.remove(i);
                }
                (Some(a), None) => {
                    let i = self.exact.iter().position(|e| e.ts == a).unwrap();
                    self.exact.remove(i);
                }
                (None, None) => break,
            }
        }
    }

    fn learn_exact(&mut self, e: ExactEntry, rtb: u64, width_bits: usize) {
        match self
            .exact
            .iter_mut()
            .find(|x| x.cap == e.cap && x.provider == e.provider)
        {
            Some(x) => *x = e,
            None => self.exact.push(e),
        }
        self.evict_to(rtb, width_bits);
    }

    fn learn_group(&mut self, g: GroupEntry, rtb: u64, width_bits: usize) {
        match self.groups.iter_mut().find(|x| x.group == g.group) {
            Some(x) => *x = g,
            None => self.groups.push(g),
        }
        self.evict_to(rtb, width_bits);
    }
}

impl GsdEngine {
    pub fn new(env: &Env) -> Self {
        let group_depth = env.cfg.baseline.gsd_group_depth;
        let nodes = (0..env.node_count())
            .map(|i| GsdNode {
                own: env.holder_caps[i].map(|cap| (cap, group_of(&cap, group_depth))),
                ..Default::default()
            })
            .collect();
        GsdEngine {
            cache_hops: env.cfg.baseline.gsd_cache_hops.max(1),
            group_depth,
            rtb: env.cfg.rtb_bytes,
            nodes,
            adv_floods: Vec::new(),
            directed: VecDeque::new(),
            flood_copies: VecDeque::new(),
            clock_ts: 0,
        }
    }

    pub fn sync_topology(&mut self, _env: &Env) {
        // Topology is read live from the environment.
    }

    pub fn timers(&mut self, env: &mut Env) {
        let interval = env.cfg.a_interval_secs as u64;
        for i in 0..self.nodes.len() {
            if (env.clock + adv_phase(i, interval)) % interval != 0 {
                continue;
            }
            let Some((cap, group)) = self.nodes[i].own else { continue };
            let piggyback: Vec<Onid> = self.nodes[i]
                .groups
                .iter()
                .take(PIGGYBACK_CAP)
                .map(|g| g.group)
                .collect();
            let mut seen = vec![false; env.node_count()];
            seen[i] = true;
            self.adv_floods.push(AdvFlood {
                origin: i as NodeId,
                cap,
                group,
                piggyback,
                frontier: vec![i as NodeId],
                seen,
                ring: 0,
            });
        }
    }

    pub fn deliver(&mut self, env: &mut Env) {
        self.clock_ts = env.clock;
        self.advance_adv_floods(env);
        self.advance_directed(env);
        self.advance_flood_copies(env);
    }

    fn advance_adv_floods(&mut self, env: &mut Env) {
        let w = env.width_bits();
        let mut done = Vec::new();
        for (fi, flood) in self.adv_floods.iter_mut().enumerate() {
            let bytes = adv_bytes(w, flood.piggyback.len());
            let mut next = Vec::new();
            for &u in &flood.frontier {
                for &v in env.neighbors[u as usize].clone().iter() {
                    env.charge(MsgClass::Advertisement, bytes);
                    if flood.seen[v as usize] {
                        continue;
                    }
                    flood.seen[v as usize] = true;
                    let node = &mut self.nodes[v as usize];
                    node.learn_exact(
                        ExactEntry {
                            cap: flood.cap,
                            group: flood.group,
                            provider: flood.origin,
                            next_hop: u,
                            hops: flood.ring + 1,
                            ts: env.clock,
                        },
                        self.rtb,
                        w,
                    );
                    node.learn_group(
                        GroupEntry { group: flood.group, next_hop: u, ts: env.clock },
                        self.rtb,
                        w,
                    );
                    for g in &flood.piggyback {
                        node.learn_group(
                            GroupEntry { group: *g, next_hop: u, ts: env.clock },
                            self.rtb,
                            w,
                        );
                    }
                    next.push(v);
                }
            }
            flood.ring += 1;
            flood.frontier = next;
            if flood.ring >= self.cache_hops || flood.frontier.is_empty() {
                done.push(fi);
            }
        }
        for fi in done.into_iter().rev() {
            self.adv_floods.swap_remove(fi);
        }
    }

    fn advance_directed(&mut self, env: &mut Env) {
        let now = env.clock;
        let mut budget = self.directed.len();
        while budget > 0 {
            budget -= 1;
            let Some(f) = self.directed.front() else { break };
            if f.arrive > now {
                break;
            }
            let f = self.directed.pop_front().unwrap();
            self.process_query(env, f.to, f.q);
        }
    }

    fn advance_flood_copies(&mut self, env: &mut Env) {
        let now = env.clock;
        let w = env.width_bits();
        let mut budget = self.flood_copies.len();
        while budget > 0 {
            budget -= 1;
            let Some(c) = self.flood_copies.front() else { break };
            if c.arrive > now {
                break;
            }
            let c = self.flood_copies.pop_front().unwrap();
            let node = &mut self.nodes[c.to as usize];
            if !node.seen_queries.insert(c.id) {
                continue; // duplicate copy suppressed
            }
            if node.own.map(|(cap, _)| cap) == Some(c.target) {
                env.finish_query(c.idx, QueryState::Found, Some(c.to), c.hops, 0, 0);
                continue;
            }
            if env.query_state(c.idx) != QueryState::Pending || c.ttl == 0 {
                continue;
            }
            for &v in env.neighbors[c.to as usize].clone().iter() {
                env.charge(MsgClass::Query, flood_copy_bytes(w));
                self.flood_copies.push_back(FloodCopy {
                    arrive: now + 1,
                    to: v,
                    id: c.id,
                    idx: c.idx,
                    target: c.target,
                    ttl: c.ttl - 1,
                    hops: c.hops + 1,
                });
            }
        }
    }

    pub fn issue(&mut self, env: &mut Env, idx: usize, src: NodeId, target: Onid) {
        let id = env.next_query_id();
        let q = GsdQuery {
            id,
            idx,
            target,
            group: group_of(&target, self.group_depth),
            ttl: env.cfg.proto.ttl,
            hops: 0,
            backtracks: 0,
            path: vec![src],
            visited: BTreeSet::from([src]),
        };
        self.process_query(env, src, q);
    }

    fn process_query(&mut self, env: &mut Env, at: NodeId, mut q: GsdQuery) {
        if env.query_state(q.idx) != QueryState::Pending {
            return; // answered by a faster copy
        }
        let node = &self.nodes[at as usize];
        if node.own.map(|(cap, _)| cap) == Some(q.target) {
            env.finish_query(q.idx, QueryState::Found, Some(at), q.hops, 0, q.backtracks);
            return;
        }
        if q.ttl == 0 {
            env.finish_query(q.idx, QueryState::Failed, None, q.hops, 0, q.backtracks);
            return;
        }
        let w = env.width_bits();
        let neighbors = &env.neighbor_sets[at as usize];

        // Exact cache hit: the freshest, closest route wins.
        let exact_hop = node
            .exact
            .iter()
            .filter(|e| {
                e.cap == q.target
                    && neighbors.contains(&e.next_hop)
                    && !q.visited.contains(&e.next_hop)
            })
            .min_by_key(|e| (e.hops, std::cmp::Reverse(e.ts), e.next_hop))
            .map(|e| e.next_hop);
        // Group hit otherwise.
        let hop = exact_hop.or_else(|| {
            node.groups
                .iter()
                .filter(|g| {
                    g.group == q.group
                        && neighbors.contains(&g.next_hop)
                        && !q.visited.contains(&g.next_hop)
                })
                .min_by_key(|g| (std::cmp::Reverse(g.ts), g.next_hop))
                .map(|g| g.next_hop)
        });

        if let Some(next) = hop {
            q.ttl -= 1;
            q.hops += 1;
            q.path.push(next);
            q.visited.insert(next);
            env.charge(
                MsgClass::Query,
                query_wire_bytes(q.path.len(), w) + 2 * w as u64 / 8,
            );
            self.directed.push_back(DirectedFlight { arrive: env.clock + 1, to: next, q });
            return;
        }

        // No cache guidance: flood from here (terminal mode for this copy).
        let unvisited: Vec<NodeId> =
            neighbors.iter().copied().filter(|n| !q.visited.contains(n)).collect();
        if !unvisited.is_empty() {
            self.nodes[at as usize].seen_queries.insert(q.id);
            for v in unvisited {
                env.charge(MsgClass::Query, flood_copy_bytes(w));
                self.flood_copies.push_back(FloodCopy {
                    arrive: env.clock + 1,
                    to: v,
                    id: q.id,
                    idx: q.idx,
                    target: q.target,
                    ttl: q.ttl - 1,
                    hops: q.hops + 1,
                });
            }
            return;
        }

        // Dead end: backtrack.
        if q.path.len() > 1 {
            q.path.pop();
            let prev = *q.path.last().unwrap();
            q.hops += 1;
            q.backtracks += 1;
            env.charge(MsgClass::Query, query_wire_bytes(q.path.len(), w));
            self.directed.push_back(DirectedFlight { arrive: env.clock + 1, to: prev, q });
            return;
        }
        env.finish_query(q.idx, QueryState::Failed, None, q.hops, 0, q.backtracks);
    }

    pub fn period_end(&mut self, env: &mut Env) {
        if env.measured() && env.clock % env.cfg.a_interval_secs as u64 == 0 {
            let w = env.width_bits();
            for n in &self.nodes {
                env.stats.sample_rt_bytes(n.cache_bytes(w));
            }
        }
    }

    #[cfg(test)]
    fn node(&self, i: usize) -> &GsdNode {
        &self.nodes[i]
    }
}
