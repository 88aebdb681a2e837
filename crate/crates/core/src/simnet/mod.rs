//! Deterministic discrete-event network simulator.
//!
//! One period is one second. Every period the world moves nodes along their
//! precomputed tracks, rebuilds neighbor sets from positions, delivers the
//! messages sent in the previous period (one hop per period), fires
//! advertisement timers and the query workload, and rolls usage periods.
//! All randomness flows from one seed through separate named streams
//! (topology, mobility, workload, protocol), so runs with equal configs are
//! bit-identical and all protocols consume identical topology and workload.

mod mobility;
mod stats;
mod workload;

pub use crate::baselines::BaselineParams;
pub use mobility::{
    assign_speed_classes, centroid_node, read_trace, waypoint_track, write_trace, SpeedClass,
};
pub use stats::{MsgClass, QueryRecord, QueryState, Stats, StatsReport};
pub use workload::{queries_due_at, ZipfSampler};

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::baselines::{CentralizedEngine, ChordEngine, FloodingEngine, GsdEngine};
use crate::metrics::{MetricsError, MobilityPlan, UtilityParams};
use crate::ontology::{
    encode, generate_ontology, read_ontology_file, Onid, OntologyError, OntologyTree,
    DEFAULT_DEGREE_WEIGHTS,
};
use crate::protocol::{PlanSource, ProtocolError, ProtocolParams};
use crate::routing_table::{RoutingTableError, SummarizeCtx};
use crate::NodeId;

mod srp_engine;
pub(crate) use srp_engine::SrpEngine;

/// Deterministic per-node phase used to stagger periodic timers.
pub(crate) fn adv_phase(node: usize, interval: u64) -> u64 {
    (node as u64).wrapping_mul(2_654_435_761) % interval.max(1)
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("io error: {0}")]
    Io(String),
    #[error("mobility trace error at line {line}: {msg}")]
    Trace { line: usize, msg: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Table(#[from] RoutingTableError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Which discovery protocol drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    /// Semantic routing with ontology-coded summarized tables.
    SrpDiot,
    /// Same machinery with summarization off (evict-only) and the stability
    /// factor neutralized: a plain table-driven protocol.
    TableDriven,
    Centralized,
    Flooding,
    GsdLike,
    ChordLike,
}

impl ProtocolKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "srp-diot" | "srp" => Some(Self::SrpDiot),
            "table-driven" | "dsdv" => Some(Self::TableDriven),
            "centralized" => Some(Self::Centralized),
            "flooding" => Some(Self::Flooding),
            "gsd" | "gsd-like" => Some(Self::GsdLike),
            "chord" | "chord-like" | "dht" => Some(Self::ChordLike),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SrpDiot => "srp-diot",
            Self::TableDriven => "table-driven",
            Self::Centralized => "centralized",
            Self::Flooding => "flooding",
            Self::GsdLike => "gsd-like",
            Self::ChordLike => "chord-like",
        }
    }

    pub const ALL: [ProtocolKind; 6] = [
        Self::SrpDiot,
        Self::TableDriven,
        Self::Centralized,
        Self::Flooding,
        Self::GsdLike,
        Self::ChordLike,
    ];
}

/// Where the capability taxonomy comes from.
#[derive(Debug, Clone)]
pub enum OntologySource {
    Generate { leaves: usize, seed: u64 },
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub node_count: u32,
    /// Simulation area in meters; `None` scales a square to hit
    /// `degree_target` at `comm_range`.
    pub area: Option<(f64, f64)>,
    pub degree_target: f64,
    pub comm_range: f64,
    /// Percentages (fixed, medium-speed, high-speed); must sum to 100.
    pub mobility_mix: (u8, u8, u8),
    pub speed_medium: f64,
    pub speed_high: f64,
    /// Fraction of nodes that hold a capability.
    pub holder_fraction: f64,
    pub zipf_skew: f64,
    /// Mean seconds between queries, network-wide.
    pub q_interval_secs: f64,
    /// Per-node advertisement interval in seconds.
    pub a_interval_secs: u32,
    /// Seconds per usage-metric period.
    pub usage_period_secs: u32,
    pub duration_secs: u32,
    /// Traffic and query statistics start counting at this second.
    pub warmup_secs: u32,
    pub seed: u64,
    pub protocol: ProtocolKind,
    pub rtb_bytes: u64,
    pub utility: UtilityParams,
    pub proto: ProtocolParams,
    pub baseline: BaselineParams,
    pub ontology: OntologySource,
    pub mobility_trace: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            node_count: 100,
            area: None,
            degree_target: 8.0,
            comm_range: 100.0,
            mobility_mix: (20, 50, 30),
            speed_medium: 25.0,
            speed_high: 50.0,
            holder_fraction: 0.6,
            zipf_skew: 0.75,
            q_interval_secs: 30.0,
            a_interval_secs: 120,
            usage_period_secs: 300,
            duration_secs: 600,
            warmup_secs: 0,
            seed: 1,
            protocol: ProtocolKind::SrpDiot,
            rtb_bytes: 1 << 20,
            utility: UtilityParams::default(),
            proto: ProtocolParams::default(),
            baseline: BaselineParams::default(),
            ontology: OntologySource::Generate { leaves: 112, seed: 7 },
            mobility_trace: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let mix = self.mobility_mix.0 as u32 + self.mobility_mix.1 as u32
            + self.mobility_mix.2 as u32;
        if mix != 100 {
            return Err(SimError::Config(format!("mobility mix sums to {mix}, not 100")));
        }
        if !(self.holder_fraction > 0.0 && self.holder_fraction <= 1.0) {
            return Err(SimError::Config("holder fraction must be in (0, 1]".into()));
        }
        if self.node_count == 0 {
            return Err(SimError::Config("need at least one node".into()));
        }
        if self.a_interval_secs == 0 || self.usage_period_secs == 0 {
            return Err(SimError::Config("intervals must be positive".into()));
        }
        Ok(())
    }

    fn resolved_area(&self) -> (f64, f64) {
        match self.area {
            Some(a) => a,
            None => {
                let n = self.node_count as f64;
                let a = (n * std::f64::consts::PI * self.comm_range * self.comm_range
                    / self.degree_target)
                    .max(self.comm_range * self.comm_range);
                let side = a.sqrt();
                (side, side)
            }
        }
    }
}

/// Ground-truth plan lookahead over the precomputed position tracks.
pub struct WorldPlans<'a> {
    positions: &'a [Vec<(f64, f64)>],
    now: u64,
    k: usize,
    comm_range: f64,
}

impl PlanSource for WorldPlans<'_> {
    fn plan(&self, node: NodeId) -> Option<MobilityPlan> {
        let track = self.positions.get(node as usize)?;
        let s = (self.now as usize).min(track.len().saturating_sub(1));
        let end = (s + self.k).min(track.len());
        let mut positions = track[s..end].to_vec();
        while positions.len() < self.k {
            positions.push(*positions.last().unwrap());
        }
        Some(MobilityPlan {
            node,
            start_period: self.now,
            positions,
            comm_range: self.comm_range,
        })
    }
}

/// Everything the protocol engines share: topology, workload, statistics,
/// and the protocol RNG stream.
pub struct Env {
    pub cfg: SimConfig,
    pub tree: OntologyTree,
    pub ctx: SummarizeCtx,
    pub area: (f64, f64),
    pub leaves: Vec<Onid>,
    /// Capability of each node, if it holds one.
    pub holder_caps: Vec<Option<Onid>>,
    pub providers: std::collections::BTreeMap<Onid, Vec<NodeId>>,
    pub positions: Vec<Vec<(f64, f64)>>,
    pub neighbors: Vec<Vec<NodeId>>,
    pub neighbor_sets: Vec<BTreeSet<NodeId>>,
    pub clock: u64,
    pub stats: Stats,
    workload_rng: ChaCha8Rng,
    pub proto_rng: ChaCha8Rng,
    zipf: ZipfSampler,
    components: Option<(u64, Vec<u32>)>,
    bfs_cache: Option<(u64, NodeId, Vec<u16>)>,
    next_query_id: u64,
}

impl Env {
    pub fn width_bits(&self) -> usize {
        self.tree.onid_width_bits()
    }

    pub fn node_count(&self) -> usize {
        self.cfg.node_count as usize
    }

    pub fn measured(&self) -> bool {
        self.clock >= self.cfg.warmup_secs as u64
    }

    pub fn plans(&self) -> WorldPlans<'_> {
        WorldPlans {
            positions: &self.positions,
            now: self.clock,
            k: self.ctx.params.k_periods as usize,
            comm_range: self.cfg.comm_range,
        }
    }

    pub fn charge(&mut self, class: MsgClass, bytes: u64) {
        if self.measured() {
            self.stats.charge(class, bytes);
        }
    }

    pub fn drop_message(&mut self) {
        if self.measured() {
            self.stats.dropped_messages += 1;
        }
    }

    /// Position of a node at the current period; tracks freeze at their last
    /// precomputed period (only reachable during the drain phase).
    pub fn position(&self, node: usize) -> (f64, f64) {
        let track = &self.positions[node];
        track[(self.clock as usize).min(track.len() - 1)]
    }

    fn rebuild_neighbors(&mut self) {
        let n = self.node_count();
        let range = self.cfg.comm_range;
        let cell = range.max(1.0);
        let cols = (self.area.0 / cell).ceil() as i64 + 1;
        let rows = (self.area.1 / cell).ceil() as i64 + 1;
        let mut grid: Vec<Vec<NodeId>> = vec![Vec::new(); (cols * rows) as usize];
        let cell_of = |p: (f64, f64)| -> (i64, i64) {
            (
                (p.0 / cell).floor().clamp(0.0, (cols - 1) as f64) as i64,
                (p.1 / cell).floor().clamp(0.0, (rows - 1) as f64) as i64,
            )
        };
        for i in 0..n {
            let (cx, cy) = cell_of(self.position(i));
            grid[(cy * cols + cx) as usize].push(i as NodeId);
        }
        let r2 = range * range;
        for i in 0..n {
            let p = self.position(i);
            let (cx, cy) = cell_of(p);
            let mut nb = Vec::new();
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let (gx, gy) = (cx + dx, cy + dy);
                    if gx < 0 || gy < 0 || gx >= cols || gy >= rows {
                        continue;
                    }
                    for &j in &grid[(gy * cols + gx) as usize] {
                        if j as usize == i {
                            continue;
                        }
                        let q = self.position(j as usize);
                        let (ddx, ddy) = (p.0 - q.0, p.1 - q.1);
                        if ddx * ddx + ddy * ddy <= r2 {
                            nb.push(j);
                        }
                    }
                }
            }
            nb.sort_unstable();
            if nb != self.neighbors[i] {
                self.neighbors[i] = nb.clone();
                self.neighbor_sets[i] = nb.into_iter().collect();
            }
        }
    }

    /// Union-find component labels for the current period.
    fn component_labels(&mut self) -> &[u32] {
        if self.components.as_ref().map(|(t, _)| *t) != Some(self.clock) {
            let n = self.node_count();
            let mut parent: Vec<u32> = (0..n as u32).collect();
            fn find(parent: &mut [u32], x: u32) -> u32 {
                let mut root = x;
                while parent[root as usize] != root {
                    root = parent[root as usize];
                }
                let mut cur = x;
                while parent[cur as usize] != root {
                    let next = parent[cur as usize];
                    parent[cur as usize] = root;
                    cur = next;
                }
                root
            }
            for i in 0..n {
                for &j in &self.neighbors[i] {
                    let (a, b) = (find(&mut parent, i as u32), find(&mut parent, j));
                    if a != b {
                        parent[a as usize] = b;
                    }
                }
            }
            for i in 0..n as u32 {
                find(&mut parent, i);
            }
            let labels = (0..n as u32).map(|i| find(&mut parent, i)).collect();
            self.components = Some((self.clock, labels));
        }
        &self.components.as_ref().unwrap().1
    }

    /// True when some provider of `target` sits in `source`'s component now.
    pub fn reachable(&mut self, source: NodeId, target: &Onid) -> bool {
        let providers = match self.providers.get(target) {
            Some(p) if !p.is_empty() => p.clone(),
            _ => return false,
        };
        let labels = self.component_labels();
        let s = labels[source as usize];
        providers.iter().any(|&p| labels[p as usize] == s)
    }

    /// Hop distances from `src` over the current topology (u16::MAX when
    /// unreachable).
    pub fn bfs_from(&mut self, src: NodeId) -> Vec<u16> {
        if let Some((t, s, d)) = &self.bfs_cache {
            if *t == self.clock && *s == src {
                return d.clone();
            }
        }
        let n = self.node_count();
        let mut dist = vec![u16::MAX; n];
        let mut queue = std::collections::VecDeque::from([src]);
        dist[src as usize] = 0;
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize];
            for &v in &self.neighbors[u as usize] {
                if dist[v as usize] == u16::MAX {
                    dist[v as usize] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        self.bfs_cache = Some((self.clock, src, dist.clone()));
        dist
    }

    /// Draws the workload queries due this period and registers their
    /// records. Returns (record index, source, target). The schedule stops
    /// at the configured duration so the drain phase issues nothing new.
    fn draw_due_queries(&mut self) -> Vec<(usize, NodeId, Onid)> {
        if self.clock >= self.cfg.duration_secs as u64 {
            return Vec::new();
        }
        let due = queries_due_at(self.clock, self.cfg.q_interval_secs);
        let mut out = Vec::with_capacity(due);
        for _ in 0..due {
            let source = self.workload_rng.random_range(0..self.cfg.node_count);
            let rank = self.zipf.sample(&mut self.workload_rng);
            let target = self.leaves[rank];
            let reachable = self.reachable(source, &target);
            let idx = self.stats.records.len();
            self.stats.records.push(QueryRecord {
                issued_at: self.clock,
                source,
                target,
                reachable,
                state: QueryState::Pending,
                provider: None,
                hops: 0,
                random_forwards: 0,
                backtracks: 0,
            });
            out.push((idx, source, target));
        }
        out
    }

    pub fn next_query_id(&mut self) -> u64 {
        self.next_query_id += 1;
        self.next_query_id
    }

    pub fn finish_query(
        &mut self,
        idx: usize,
        state: QueryState,
        provider: Option<NodeId>,
        hops: u32,
        random_forwards: u32,
        backtracks: u32,
    ) {
        let r = &mut self.stats.records[idx];
        if r.state == QueryState::Pending {
            r.state = state;
            r.provider = provider;
            r.hops = hops;
            r.random_forwards = random_forwards;
            r.backtracks = backtracks;
        }
    }

    pub fn query_state(&self, idx: usize) -> QueryState {
        self.stats.records[idx].state
    }
}

pub(crate) enum Engine {
    Srp(SrpEngine),
    Flooding(FloodingEngine),
    Centralized(CentralizedEngine),
    Gsd(GsdEngine),
    Chord(ChordEngine),
}

impl Engine {
    fn sync_topology(&mut self, env: &Env) {
        match self {
            Engine::Srp(e) => e.sync_topology(env),
            Engine::Gsd(e) => e.sync_topology(env),
            Engine::Flooding(_) | Engine::Centralized(_) | Engine::Chord(_) => {}
        }
    }

    fn deliver(&mut self, env: &mut Env) {
        match self {
            Engine::Srp(e) => e.deliver(env),
            Engine::Flooding(e) => e.advance_floods(env),
            Engine::Gsd(e) => e.deliver(env),
            Engine::Centralized(e) => e.on_period(env),
            Engine::Chord(_) => {}
        }
    }

    fn timers(&mut self, env: &mut Env) {
        match self {
            Engine::Srp(e) => e.timers(env),
            Engine::Gsd(e) => e.timers(env),
            Engine::Chord(e) => e.timers(env),
            Engine::Flooding(_) | Engine::Centralized(_) => {}
        }
    }

    fn issue(&mut self, env: &mut Env, idx: usize, src: NodeId, target: Onid) {
        match self {
            Engine::Srp(e) => e.issue(env, idx, src, target),
            Engine::Flooding(e) => e.issue(env, idx, src, target),
            Engine::Centralized(e) => e.issue(env, idx, src, target),
            Engine::Gsd(e) => e.issue(env, idx, src, target),
            Engine::Chord(e) => e.issue(env, idx, src, target),
        }
    }

    fn period_end(&mut self, env: &mut Env) {
        match self {
            Engine::Srp(e) => e.period_end(env),
            Engine::Gsd(e) => e.period_end(env),
            Engine::Flooding(_) | Engine::Centralized(_) | Engine::Chord(_) => {}
        }
    }
}

pub struct SimWorld {
    pub env: Env,
    engine: Engine,
}

/// Read access to the protocol engine for inspection in tests.
#[cfg(test)]
pub(crate) enum EngineRef<'a> {
    Srp(&'a SrpEngine),
    Flooding(&'a FloodingEngine),
    Centralized(&'a CentralizedEngine),
    Gsd(&'a GsdEngine),
    Chord(&'a ChordEngine),
}

impl SimWorld {
    pub fn new(mut cfg: SimConfig) -> Result<SimWorld, SimError> {
        cfg.validate()?;
        if cfg.protocol == ProtocolKind::TableDriven {
            cfg.utility.disable_stability = true;
        }
        if cfg.protocol == ProtocolKind::Flooding && cfg.baseline.flood_hop_limit == 0 {
            cfg.baseline.flood_hop_limit = calibrate_flood_hop_limit(&cfg)?;
        }

        let tree = match &cfg.ontology {
            OntologySource::Generate { leaves, seed } => {
                generate_ontology(*seed, *leaves, (2, 8), &DEFAULT_DEGREE_WEIGHTS)?
            }
            OntologySource::File(path) => read_ontology_file(path)?,
        };
        let leaves: Vec<Onid> = tree
            .leaf_indices()
            .into_iter()
            .map(|i| encode(&tree, i))
            .collect::<Result<_, _>>()?;
        let ctx = SummarizeCtx {
            params: cfg.utility.clone(),
            avg_degree: tree.avg_degree(),
            avg_sparseness: tree.avg_sparseness(),
        };

        let area = cfg.resolved_area();
        let n = cfg.node_count as usize;
        let k = cfg.utility.k_periods as usize;
        let horizon = cfg.duration_secs as usize + k + 1;

        // Stream 1: placement, speed classes, capability assignment.
        let mut topo_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        topo_rng.set_stream(1);
        // Stream 2: waypoint mobility.
        let mut mob_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        mob_rng.set_stream(2);
        // Stream 3: workload arrivals. Stream 4: protocol randomness.
        let mut workload_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        workload_rng.set_stream(3);
        let mut proto_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        proto_rng.set_stream(4);

        let classes = assign_speed_classes(n, cfg.mobility_mix, &mut topo_rng);
        let positions = match &cfg.mobility_trace {
            Some(path) => read_trace(path, n, horizon)?,
            None => classes
                .iter()
                .map(|c| {
                    let cap = match c {
                        SpeedClass::Fixed => 0.0,
                        SpeedClass::Medium => cfg.speed_medium,
                        SpeedClass::High => cfg.speed_high,
                    };
                    waypoint_track(area, horizon, cap, &mut mob_rng)
                })
                .collect(),
        };

        let zipf = ZipfSampler::new(leaves.len(), cfg.zipf_skew);
        let holder_count = ((n as f64) * cfg.holder_fraction).round().max(1.0) as usize;
        // Choose holders by partial shuffle, then give each one a
        // Zipf-sampled leaf capability.
        let mut ids: Vec<NodeId> = (0..cfg.node_count).collect();
        for i in 0..holder_count.min(n) {
            let j = topo_rng.random_range(i..n);
            ids.swap(i, j);
        }
        let mut holder_caps: Vec<Option<Onid>> = vec![None; n];
        let mut providers: std::collections::BTreeMap<Onid, Vec<NodeId>> = Default::default();
        for &id in ids.iter().take(holder_count.min(n)) {
            let cap = leaves[zipf.sample(&mut topo_rng)];
            holder_caps[id as usize] = Some(cap);
            providers.entry(cap).or_default().push(id);
        }
        for v in providers.values_mut() {
            v.sort_unstable();
        }

        let mut env = Env {
            tree,
            ctx,
            area,
            leaves,
            holder_caps,
            providers,
            positions,
            neighbors: vec![Vec::new(); n],
            neighbor_sets: vec![BTreeSet::new(); n],
            clock: 0,
            stats: Stats::default(),
            workload_rng,
            proto_rng,
            zipf,
            components: None,
            bfs_cache: None,
            next_query_id: 0,
            cfg,
        };
        env.rebuild_neighbors();

        let engine = match env.cfg.protocol {
            ProtocolKind::SrpDiot => Engine::Srp(SrpEngine::new(&env, true)),
            ProtocolKind::TableDriven => Engine::Srp(SrpEngine::new(&env, false)),
            ProtocolKind::Flooding => Engine::Flooding(FloodingEngine::new(&env)),
            ProtocolKind::Centralized => Engine::Centralized(CentralizedEngine::new(&mut env)),
            ProtocolKind::GsdLike => Engine::Gsd(GsdEngine::new(&env)),
            ProtocolKind::ChordLike => Engine::Chord(ChordEngine::new(&mut env)),
        };
        let mut world = SimWorld { env, engine };
        world.engine.sync_topology(&world.env);
        Ok(world)
    }

    /// Advances the world by one period.
    pub fn step(&mut self) {
        self.env.clock += 1;
        self.env.rebuild_neighbors();
        self.engine.sync_topology(&self.env);
        self.engine.deliver(&mut self.env);
        self.engine.timers(&mut self.env);
        let due = self.env.draw_due_queries();
        for (idx, src, target) in due {
            self.engine.issue(&mut self.env, idx, src, target);
        }
        self.engine.period_end(&mut self.env);
    }

    /// Injects one query outside the workload schedule (used by tests and
    /// calibration). Returns its record index.
    pub fn inject_query(&mut self, src: NodeId, target: Onid) -> usize {
        let reachable = self.env.reachable(src, &target);
        let idx = self.env.stats.records.len();
        self.env.stats.records.push(QueryRecord {
            issued_at: self.env.clock,
            source: src,
            target,
            reachable,
            state: QueryState::Pending,
            provider: None,
            hops: 0,
            random_forwards: 0,
            backtracks: 0,
        });
        self.engine.issue(&mut self.env, idx, src, target);
        idx
    }

    /// Runs the configured duration, then keeps stepping (without issuing
    /// new queries) until in-flight queries settle or the drain bound hits.
    pub fn run_to_end(mut self) -> StatsReport {
        let dur = self.env.cfg.duration_secs as u64;
        while self.env.clock < dur {
            self.step();
        }
        let drain_until = dur + 2 * self.env.cfg.proto.ttl as u64 + 8;
        while self.env.clock < drain_until
            && self.env.stats.records.iter().any(|r| r.state == QueryState::Pending)
        {
            self.step();
        }
        self.report()
    }

    #[cfg(test)]
    pub(crate) fn engine_for_tests(&self) -> EngineRef<'_> {
        match &self.engine {
            Engine::Srp(e) => EngineRef::Srp(e),
            Engine::Flooding(e) => EngineRef::Flooding(e),
            Engine::Centralized(e) => EngineRef::Centralized(e),
            Engine::Gsd(e) => EngineRef::Gsd(e),
            Engine::Chord(e) => EngineRef::Chord(e),
        }
    }

    pub fn report(&self) -> StatsReport {
        let leaves = self.env.leaves.len() as u32;
        StatsReport::from_stats(
            self.env.cfg.protocol.as_str(),
            self.env.cfg.seed,
            self.env.cfg.node_count,
            leaves,
            self.env.cfg.q_interval_secs,
            self.env.cfg.a_interval_secs,
            self.env.cfg.rtb_bytes,
            self.env.cfg.mobility_mix,
            &self.env.stats,
        )
    }
}

/// Runs one simulation to completion.
pub fn run(cfg: SimConfig) -> Result<StatsReport, SimError> {
    Ok(SimWorld::new(cfg)?.run_to_end())
}

/// Raises the flooding hop limit on short calibration runs until the
/// measured success rate on reachable targets is at least 99%.
pub fn calibrate_flood_hop_limit(cfg: &SimConfig) -> Result<u32, SimError> {
    let limits = [2u32, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64];
    for &limit in &limits {
        let mut c = cfg.clone();
        c.baseline.flood_hop_limit = limit;
        c.duration_secs = cfg.duration_secs.min(240);
        c.warmup_secs = 0;
        c.q_interval_secs = cfg.q_interval_secs.min(5.0);
        let report = run(c)?;
        if report.reachable_queries > 0 && report.success_on_reachable >= 0.99 {
            return Ok(limit);
        }
    }
    Ok(*limits.last().unwrap())
}
