//! Chord-style DHT discovery: nodes are hashed onto a ring, each node's
//! successor stores the provider lists of the capabilities hashed into its
//! range, and lookups walk finger tables. Every overlay hop is charged its
//! underlying shortest-path hop count on the current topology, because the
//! overlay neighbors are not radio neighbors.

use std::collections::BTreeMap;

use crate::ontology::Onid;
use crate::protocol::{query_wire_bytes, MSG_HEADER_BYTES};
use crate::simnet::{adv_phase, Env, MsgClass, QueryState};
use crate::NodeId;

/// Stabilization traffic charged per node per advertisement interval.
const STABILIZE_BYTES: u64 = 48;

pub struct ChordEngine {
    ring_bits: u32,
    /// (ring position, node), sorted by position; positions are unique.
    ring: Vec<(u64, NodeId)>,
    node_pos: Vec<u64>,
    fingers: Vec<Vec<NodeId>>,
    store: BTreeMap<NodeId, BTreeMap<Onid, Vec<NodeId>>>,
}

fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

fn in_interval_excl_incl(x: u64, a: u64, b: u64) -> bool {
    if a < b {
        a < x && x <= b
    } else {
        x > a || x <= b
    }
}

fn in_interval_excl_excl(x: u64, a: u64, b: u64) -> bool {
    if a < b {
        a < x && x < b
    } else {
        x > a || x < b
    }
}

impl ChordEngine {
    pub fn new(env: &mut Env) -> Self {
        let m = env.cfg.baseline.chord_ring_bits.clamp(8, 60);
        let mask = (1u64 << m) - 1;
        let n = env.node_count();

        // Unique ring positions via salted hashing.
        let mut used = std::collections::BTreeSet::new();
        let mut node_pos = vec![0u64; n];
        for i in 0..n {
            let mut salt = 0u64;
            loop {
                let mut bytes: Vec<u8> = (i as u32).to_be_bytes().to_vec();
                bytes.extend(salt.to_be_bytes());
                let pos = fnv1a64(bytes) & mask;
                if used.insert(pos) {
                    node_pos[i] = pos;
                    break;
                }
                salt += 1;
            }
        }
        let mut ring: Vec<(u64, NodeId)> =
            node_pos.iter().enumerate().map(|(i, &p)| (p, i as NodeId)).collect();
        ring.sort_unstable();

        let mut engine = ChordEngine {
            ring_bits: m,
            ring,
            node_pos,
            fingers: Vec::new(),
            store: BTreeMap::new(),
        };
        engine.rebuild_fingers();

        // Publish every capability to the successor of its hash; charged as
        // control traffic over the overlay path.
        let reg_bytes = MSG_HEADER_BYTES + 2 * env.width_bits() as u64 / 8 + 4;
        for i in 0..n {
            let Some(cap) = env.holder_caps[i] else { continue };
            let key = engine.capability_key(&cap);
            let (resp, path) = engine.route(i as NodeId, key);
            for hop in path_pairs(i as NodeId, &path) {
                let d = underlay_dist(env, hop.0, hop.1);
                if d < u16::MAX as u64 {
                    env.charge(MsgClass::Control, reg_bytes * d);
                }
            }
            engine.store.entry(resp).or_default().entry(cap).or_default().push(i as NodeId);
        }
        for caps in engine.store.values_mut() {
            for v in caps.values_mut() {
                v.sort_unstable();
            }
        }
        engine
    }

    pub fn ring_bits(&self) -> u32 {
        self.ring_bits
    }

    fn capability_key(&self, cap: &Onid) -> u64 {
        let mask = (1u64 << self.ring_bits) - 1;
        let bytes = cap.id_bytes().into_iter().chain(cap.sp_bytes());
        fnv1a64(bytes) & mask
    }

    fn rebuild_fingers(&mut self) {
        let m = self.ring_bits;
        let mask = (1u64 << m) - 1;
        self.fingers = (0..self.node_pos.len())
            .map(|i| {
                let mut f: Vec<NodeId> = (0..m)
                    .map(|b| self.successor((self.node_pos[i] + (1u64 << b)) & mask))
                    .collect();
                f.dedup();
                f
            })
            .collect();
    }

    /// First node at or clockwise after ring position `x`.
    fn successor(&self, x: u64) -> NodeId {
        match self.ring.binary_search_by_key(&x, |&(p, _)| p) {
            Ok(i) => self.ring[i].1,
            Err(i) if i < self.ring.len() => self.ring[i].1,
            Err(_) => self.ring[0].1,
        }
    }

    /// The node right after `n` on the ring.
    fn ring_successor(&self, n: NodeId) -> NodeId {
        let pos = self.node_pos[n as usize];
        let i = self.ring.binary_search_by_key(&pos, |&(p, _)| p).unwrap();
        self.ring[(i + 1) % self.ring.len()].1
    }

    fn closest_preceding(&self, n: NodeId, key: u64) -> NodeId {
        let np = self.node_pos[n as usize];
        for &f in self.fingers[n as usize].iter().rev() {
            let fp = self.node_pos[f as usize];
            if in_interval_excl_excl(fp, np, key) {
                return f;
            }
        }
        n
    }

    /// Overlay route from `src` to the node responsible for `key`.
    /// Returns (responsible node, overlay hops sequence).
    fn route(&self, src: NodeId, key: u64) -> (NodeId, Vec<NodeId>) {
        let mut cur = src;
        let mut path = Vec::new();
        for _ in 0..=self.ring_bits {
            if self.ring.len() == 1 {
                return (cur, path);
            }
            let succ = self.ring_successor(cur);
            if in_interval_excl_incl(key, self.node_pos[cur as usize], self.node_pos[succ as usize])
            {
                path.push(succ);
                return (succ, path);
            }
            let next = self.closest_preceding(cur, key);
            if next == cur {
                path.push(succ);
                return (succ, path);
            }
            path.push(next);
            cur = next;
        }
        (cur, path)
    }

    pub fn timers(&mut self, env: &mut Env) {
        let interval = env.cfg.a_interval_secs as u64;
        for i in 0..self.node_pos.len() {
            if (env.clock + adv_phase(i, interval)) % interval == 0 {
                env.charge(MsgClass::Control, STABILIZE_BYTES);
            }
        }
        if env.measured() && env.clock % interval == 0 {
            let w = env.width_bits() as u64;
            for i in 0..self.node_pos.len() {
                let bytes = self.store.get(&(i as NodeId)).map_or(0, |caps| {
                    caps.iter().map(|(_, v)| 2 * w / 8 + 4 * v.len() as u64).sum()
                });
                env.stats.sample_rt_bytes(bytes);
            }
        }
    }

    pub fn issue(&mut self, env: &mut Env, idx: usize, src: NodeId, target: Onid) {
        if env.holder_caps[src as usize] == Some(target) {
            env.finish_query(idx, QueryState::Found, Some(src), 0, 0, 0);
            return;
        }
        let key = self.capability_key(&target);
        let (resp, overlay) = self.route(src, key);
        debug_assert!(overlay.len() <= self.ring_bits as usize + 1);

        let qbytes = query_wire_bytes(0, env.width_bits());
        let mut hops = 0u64;
        for (a, b) in path_pairs(src, &overlay) {
            let d = underlay_dist(env, a, b);
            if d == u16::MAX as u64 {
                env.finish_query(idx, QueryState::Failed, None, hops as u32, 0, 0);
                return;
            }
            env.charge(MsgClass::Query, qbytes * d);
            hops += d;
        }
        let providers = self
            .store
            .get(&resp)
            .and_then(|caps| caps.get(&target))
            .cloned()
            .unwrap_or_default();
        let back = underlay_dist(env, resp, src);
        if back == u16::MAX as u64 {
            env.finish_query(idx, QueryState::Failed, None, hops as u32, 0, 0);
            return;
        }
        env.charge(
            MsgClass::Query,
            (MSG_HEADER_BYTES + 4 * providers.len() as u64) * back,
        );
        hops += back;
        if providers.is_empty() {
            env.finish_query(idx, QueryState::Failed, None, hops as u32, 0, 0);
            return;
        }
        // The source picks the provider nearest in the underlay.
        let dists = env.bfs_from(src);
        let provider = providers
            .iter()
            .copied()
            .min_by_key(|&p| (dists[p as usize], p))
            .unwrap();
        env.finish_query(idx, QueryState::Found, Some(provider), hops as u32, 0, 0);
    }

    #[cfg(test)]
    pub(crate) fn stored_providers(&self) -> BTreeMap<Onid, Vec<NodeId>> {
        let mut out: BTreeMap<Onid, Vec<NodeId>> = BTreeMap::new();
        for caps in self.store.values() {
            for (cap, provs) in caps {
                out.entry(*cap).or_default().extend(provs.iter().copied());
            }
        }
        for v in out.values_mut() {
            v.sort_unstable();
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn responsible_for(&self, cap: &Onid) -> NodeId {
        self.successor(self.capability_key(cap))
    }

    #[cfg(test)]
    pub(crate) fn overlay_route_len(&self, src: NodeId, cap: &Onid) -> usize {
        self.route(src, self.capability_key(cap)).1.len()
    }
}

fn underlay_dist(env: &mut Env, a: NodeId, b: NodeId) -> u64 {
    if a == b {
        return 0;
    }
    env.bfs_from(a)[b as usize] as u64
}

/// Consecutive (from, to) pairs of an overlay path starting at `src`.
fn path_pairs(src: NodeId, path: &[NodeId]) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::with_capacity(path.len());
    let mut prev = src;
    for &n in path {
        out.push((prev, n));
        prev = n;
    }
    out
}
