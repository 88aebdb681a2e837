//! Zipf-skewed capability assignment and query workload.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Exact Zipf sampler over ranks `0..n` via the cumulative distribution:
/// p(rank r) is proportional to 1 / (r+1)^skew.
#[derive(Debug, Clone)]
pub struct ZipfSampler {
    cdf: Vec<f64>,
    pmf: Vec<f64>,
}

impl ZipfSampler {
    pub fn new(n: usize, skew: f64) -> Self {
        assert!(n >= 1, "need at least one rank");
        let mut pmf: Vec<f64> = (0..n).map(|r| 1.0 / ((r + 1) as f64).powf(skew)).collect();
        let total: f64 = pmf.iter().sum();
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        for p in pmf.iter_mut() {
            *p /= total;
            acc += *p;
            cdf.push(acc);
        }
        ZipfSampler { cdf, pmf }
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    pub fn pmf(&self, rank: usize) -> f64 {
        self.pmf[rank]
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random_range(0.0..1.0);
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// Number of workload queries that become due at period `t` for a mean
/// network-wide interval of `q_interval` seconds.
pub fn queries_due_at(t: u64, q_interval: f64) -> usize {
    if q_interval <= 0.0 {
        return 0;
    }
    let rate = 1.0 / q_interval;
    let before = (t as f64 * rate).floor() as u64;
    let after = ((t + 1) as f64 * rate).floor() as u64;
    (after - before) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn pmf_ratio_matches_skew() {
        let z = ZipfSampler::new(112, 0.75);
        let ratio = z.pmf(0) / z.pmf(1);
        assert!((ratio - 2f64.powf(0.75)).abs() < 1e-12);
    }

    /// Chi-square goodness of fit of 10k draws against the exact pmf.
    #[test]
    fn sampling_matches_pmf() {
        let n = 112;
        let z = ZipfSampler::new(n, 0.75);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 10_000usize;
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            counts[z.sample(&mut rng)] += 1;
        }
        let mut chi2 = 0.0;
        for r in 0..n {
            let expect = z.pmf(r) * draws as f64;
            chi2 += (counts[r] as f64 - expect).powi(2) / expect;
        }
        // 111 degrees of freedom: the 99.9% quantile is ~164.
        assert!(chi2 < 170.0, "chi2 = {chi2}");
        // Top-rank frequency ratio ~ 2^0.75 within sampling noise.
        let ratio = counts[0] as f64 / counts[1] as f64;
        assert!((ratio - 2f64.powf(0.75)).abs() < 0.35, "ratio = {ratio}");
    }

    #[test]
    fn query_schedule_counts() {
        // One query every 30 s: 20 queries over 600 periods.
        let total: usize = (0..600).map(|t| queries_due_at(t, 30.0)).sum();
        assert_eq!(total, 20);
        // Sub-second interval: multiple per period.
        assert_eq!(queries_due_at(0, 0.5), 2);
        assert_eq!(queries_due_at(0, 0.0), 0);
    }
}
