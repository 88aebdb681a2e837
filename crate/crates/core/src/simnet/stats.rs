//! Traffic and query statistics, and the results CSV row.

use crate::ontology::Onid;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsgClass {
    Advertisement,
    Query,
    Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryState {
    Pending,
    Found,
    Failed,
}

#[derive(Debug, Clone)]
pub struct QueryRecord {
    pub issued_at: u64,
    pub source: NodeId,
    pub target: Onid,
    /// A provider existed in the source's connected component at issue time.
    pub reachable: bool,
    pub state: QueryState,
    pub provider: Option<NodeId>,
    /// Total hops travelled, backtrack hops included.
    pub hops: u32,
    pub random_forwards: u32,
    pub backtracks: u32,
}

#[derive(Debug, Default, Clone)]
pub struct Stats {
    pub adv_bytes: u64,
    pub query_bytes: u64,
    pub control_bytes: u64,
    pub dropped_messages: u64,
    pub records: Vec<QueryRecord>,
    rt_bytes_sum: u128,
    rt_bytes_samples: u64,
}

impl Stats {
    pub fn charge(&mut self, class: MsgClass, bytes: u64) {
        match class {
            MsgClass::Advertisement => self.adv_bytes += bytes,
            MsgClass::Query => self.query_bytes += bytes,
            MsgClass::Control => self.control_bytes += bytes,
        }
    }

    pub fn total_bytes(&self) -> u64 {
        self.adv_bytes + self.query_bytes + self.control_bytes
    }

    pub fn sample_rt_bytes(&mut self, bytes: u64) {
        self.rt_bytes_sum += bytes as u128;
        self.rt_bytes_samples += 1;
    }

    pub fn avg_rt_bytes(&self) -> f64 {
        if self.rt_bytes_samples == 0 {
            0.0
        } else {
            self.rt_bytes_sum as f64 / self.rt_bytes_samples as f64
        }
    }
}

/// Aggregated result of one simulation run.
#[derive(Debug, Clone)]
pub struct StatsReport {
    pub protocol: String,
    pub seed: u64,
    pub nodes: u32,
    pub ontology_leaves: u32,
    pub q_interval: f64,
    pub a_interval: u32,
    pub rtb_bytes: u64,
    pub mobility_mix: (u8, u8, u8),
    pub total_bytes: u64,
    pub adv_bytes: u64,
    pub query_bytes: u64,
    pub control_bytes: u64,
    pub dropped_messages: u64,
    pub queries_issued: usize,
    pub queries_found: usize,
    pub reachable_queries: usize,
    pub reachable_found: usize,
    pub avg_query_hops: f64,
    pub p95_query_hops: u32,
    pub success_rate: f64,
    pub success_on_reachable: f64,
    pub total_random_forwards: u64,
    pub total_backtracks: u64,
    pub avg_rt_bytes: f64,
}

impl StatsReport {
    pub fn from_stats(
        protocol: &str,
        seed: u64,
        nodes: u32,
        ontology_leaves: u32,
        q_interval: f64,
        a_interval: u32,
        rtb_bytes: u64,
        mobility_mix: (u8, u8, u8),
        stats: &Stats,
    ) -> Self {
        let issued = stats.records.len();
        let found: Vec<&QueryRecord> =
            stats.records.iter().filter(|r| r.state == QueryState::Found).collect();
        let reachable = stats.records.iter().filter(|r| r.reachable).count();
        let reachable_found = found.iter().filter(|r| r.reachable).count();
        let mut hops: Vec<u32> = found.iter().map(|r| r.hops).collect();
        hops.sort_unstable();
        let avg = if hops.is_empty() {
            0.0
        } else {
            hops.iter().map(|&h| h as f64).sum::<f64>() / hops.len() as f64
        };
        let p95 = if hops.is_empty() {
            0
        } else {
            hops[((hops.len() as f64 * 0.95).ceil() as usize - 1).min(hops.len() - 1)]
        };
        StatsReport {
            protocol: protocol.to_string(),
            seed,
            nodes,
            ontology_leaves,
            q_interval,
            a_interval,
            rtb_bytes,
            mobility_mix,
            total_bytes: stats.total_bytes(),
            adv_bytes: stats.adv_bytes,
            query_bytes: stats.query_bytes,
            control_bytes: stats.control_bytes,
            dropped_messages: stats.dropped_messages,
            queries_issued: issued,
            queries_found: found.len(),
            reachable_queries: reachable,
            reachable_found,
            avg_query_hops: avg,
            p95_query_hops: p95,
            success_rate: if issued == 0 { 0.0 } else { found.len() as f64 / issued as f64 },
            success_on_reachable: if reachable == 0 {
                1.0
            } else {
                reachable_found as f64 / reachable as f64
            },
            total_random_forwards: stats.records.iter().map(|r| r.random_forwards as u64).sum(),
            total_backtracks: stats.records.iter().map(|r| r.backtracks as u64).sum(),
            avg_rt_bytes: stats.avg_rt_bytes(),
        }
    }

    pub fn csv_header() -> &'static str {
        "protocol,seed,nodes,ontology_leaves,Q,A,RTB_bytes,mobility_mix,total_bytes,\
         adv_bytes,query_bytes,avg_query_hops,p95_query_hops,success_rate,avg_rt_bytes"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}/{}/{},{},{},{},{:.3},{},{:.4},{:.1}",
            self.protocol,
            self.seed,
            self.nodes,
            self.ontology_leaves,
            self.q_interval,
            self.a_interval,
            self.rtb_bytes,
            self.mobility_mix.0,
            self.mobility_mix.1,
            self.mobility_mix.2,
            self.total_bytes,
            self.adv_bytes,
            self.query_bytes,
            self.avg_query_hops,
            self.p95_query_hops,
            self.success_rate,
            self.avg_rt_bytes,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_matches_row_arity() {
        let header_cols = StatsReport::csv_header().split(',').count();
        let stats = Stats::default();
        let r = StatsReport::from_stats("x", 1, 2, 3, 30.0, 120, 9, (20, 50, 30), &stats);
        assert_eq!(r.csv_row().split(',').count(), header_cols);
    }
}
