//! Simulator adapter for the semantic routing protocol (and its
//! no-summarization table-driven variant).

use std::collections::VecDeque;
use std::rc::Rc;

use crate::ontology::Onid;
use crate::protocol::{Advertisement, NodeState, ProtocolError, Query, QueryOutcome};
use crate::simnet::{adv_phase, Env, MsgClass, QueryState};
use crate::NodeId;

pub(crate) struct SrpEngine {
    nodes: Vec<NodeState>,
    inflight: VecDeque<Flight>,
}

struct Flight {
    arrive: u64,
    to: NodeId,
    msg: SrpMsg,
}

enum SrpMsg {
    Adv(Rc<Advertisement>),
    Query { q: Query, idx: usize },
}

impl SrpEngine {
    pub fn new(env: &Env, summarize: bool) -> Self {
        let mut nodes = Vec::with_capacity(env.node_count());
        for i in 0..env.node_count() {
            let own: Vec<Onid> = env.holder_caps[i].into_iter().collect();
            let mut ns = NodeState::new(
                i as NodeId,
                env.width_bits(),
                env.cfg.rtb_bytes,
                own,
                &env.ctx.params,
                env.cfg.proto,
            );
            if !summarize {
                ns.rt.set_summarization(false);
            }
            nodes.push(ns);
        }
        SrpEngine { nodes, inflight: VecDeque::new() }
    }

    #[cfg(test)]
    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn sync_topology(&mut self, env: &Env) {
        for (i, n) in self.nodes.iter_mut().enumerate() {
            if n.neighbors != env.neighbor_sets[i] {
                n.neighbors = env.neighbor_sets[i].clone();
            }
        }
    }

    pub fn deliver(&mut self, env: &mut Env) {
        let now = env.clock;
        while self.inflight.front().is_some_and(|f| f.arrive <= now) {
            let f = self.inflight.pop_front().unwrap();
            match f.msg {
                SrpMsg::Adv(adv) => {
                    let res = {
                        let plans = env.plans();
                        self.nodes[f.to as usize].on_advertisement(&adv, &plans, now, &env.ctx)
                    };
                    match res {
                        Ok(_) => {}
                        Err(ProtocolError::SenderNotNeighbor(_)) => env.drop_message(),
                        Err(e) => panic!("advertisement processing failed: {e}"),
                    }
                }
                SrpMsg::Query { q, idx } => self.process_query(env, f.to, q, idx),
            }
        }
    }

    fn process_query(&mut self, env: &mut Env, at: NodeId, q: Query, idx: usize) {
        match self.nodes[at as usize].on_query(q, &mut env.proto_rng) {
            QueryOutcome::Found { provider, query } => {
                env.finish_query(
                    idx,
                    QueryState::Found,
                    Some(provider),
                    query.hops_taken,
                    query.random_forwards,
                    query.backtracks,
                );
            }
            QueryOutcome::Fail { query } => {
                env.finish_query(
                    idx,
                    QueryState::Failed,
                    None,
                    query.hops_taken,
                    query.random_forwards,
                    query.backtracks,
                );
            }
            QueryOutcome::Forward { next, query } => {
                env.charge(MsgClass::Query, query.wire_bytes(env.width_bits()));
                self.inflight.push_back(Flight {
                    arrive: env.clock + 1,
                    to: next,
                    msg: SrpMsg::Query { q: query, idx },
                });
            }
            QueryOutcome::Backtrack { prev, query } => {
                env.charge(MsgClass::Query, query.wire_bytes(env.width_bits()));
                self.inflight.push_back(Flight {
                    arrive: env.clock + 1,
                    to: prev,
                    msg: SrpMsg::Query { q: query, idx },
                });
            }
        }
    }

    pub fn timers(&mut self, env: &mut Env) {
        let interval = env.cfg.a_interval_secs as u64;
        for i in 0..self.nodes.len() {
            if (env.clock + adv_phase(i, interval)) % interval != 0 {
                continue;
            }
            let built = {
                let plans = env.plans();
                self.nodes[i].build_advertisement(&plans, env.clock, &env.ctx)
            };
            let adv = match built {
                Ok(Some(adv)) => Rc::new(adv),
                Ok(None) => continue,
                Err(e) => panic!("advertisement build failed: {e}"),
            };
            let bytes = adv.wire_bytes(env.width_bits());
            let targets: Vec<NodeId> = self.nodes[i].neighbors.iter().copied().collect();
            for to in targets {
                env.charge(MsgClass::Advertisement, bytes);
                self.inflight.push_back(Flight {
                    arrive: env.clock + 1,
                    to,
                    msg: SrpMsg::Adv(Rc::clone(&adv)),
                });
            }
        }
    }

    pub fn issue(&mut self, env: &mut Env, idx: usize, src: NodeId, target: Onid) {
        let id = env.next_query_id();
        let q = self.nodes[src as usize].issue_query(id, target);
        self.process_query(env, src, q, idx);
    }

    pub fn period_end(&mut self, env: &mut Env) {
        let t = env.clock;
        if t > 0 && t % env.cfg.usage_period_secs as u64 == 0 {
            for n in self.nodes.iter_mut() {
                n.rt.roll_usage(&env.ctx.params);
            }
        }
        if env.measured() && t % env.cfg.a_interval_secs as u64 == 0 {
            for n in &self.nodes {
                env.stats.sample_rt_bytes(n.rt.size_bytes());
            }
        }
    }
}
