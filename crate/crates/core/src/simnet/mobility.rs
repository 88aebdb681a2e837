//! Waypoint mobility: per-node position tracks precomputed for the whole run
//! plus the plan lookahead, and an import/export text format so externally
//! generated traces can be replayed.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::NodeId;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedClass {
    Fixed,
    Medium,
    High,
}

/// Draws speed classes for all nodes according to the percentage mix.
pub fn assign_speed_classes(
    n: usize,
    mix: (u8, u8, u8),
    rng: &mut ChaCha8Rng,
) -> Vec<SpeedClass> {
    let total = mix.0 as u32 + mix.1 as u32 + mix.2 as u32;
    (0..n)
        .map(|_| {
            let x = rng.random_range(0..total);
            if x < mix.0 as u32 {
                SpeedClass::Fixed
            } else if x < mix.0 as u32 + mix.1 as u32 {
                SpeedClass::Medium
            } else {
                SpeedClass::High
            }
        })
        .collect()
}

/// Random-waypoint track: pick a uniform destination, travel at a uniform
/// speed in (0, cap], no pause, repeat. Fixed nodes never move.
pub fn waypoint_track(
    area: (f64, f64),
    periods: usize,
    speed_cap: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<(f64, f64)> {
    let mut track = Vec::with_capacity(periods);
    let mut pos = (rng.random_range(0.0..area.0), rng.random_range(0.0..area.1));
    if speed_cap <= 0.0 {
        return vec![pos; periods];
    }
    let mut dest = pos;
    let mut speed = 0.0f64;
    for _ in 0..periods {
        track.push(pos);
        let (dx, dy) = (dest.0 - pos.0, dest.1 - pos.1);
        let dist = (dx * dx + dy * dy).sqrt();
        if dist < 1e-9 {
            dest = (rng.random_range(0.0..area.0), rng.random_range(0.0..area.1));
            speed = rng.random_range(0.0..speed_cap).max(1e-3);
            continue;
        }
        let step = speed.min(dist); // one period = one second
        pos = (pos.0 + dx / dist * step, pos.1 + dy / dist * step);
    }
    track
}

/// Writes a trace as whitespace-separated `node period x y` rows.
pub fn write_trace(path: &Path, positions: &[Vec<(f64, f64)>]) -> Result<(), SimError> {
    let mut out = String::new();
    for (node, track) in positions.iter().enumerate() {
        for (t, (x, y)) in track.iter().enumerate() {
            out.push_str(&format!("{node} {t} {x} {y}\n"));
        }
    }
    let mut f = fs::File::create(path).map_err(|e| SimError::Io(e.to_string()))?;
    f.write_all(out.as_bytes()).map_err(|e| SimError::Io(e.to_string()))?;
    Ok(())
}

/// Reads a trace. Every node needs a row for period 0; periods without a
/// row hold the node's previous position, so traces shorter than the run
/// freeze in place at their end.
pub fn read_trace(
    path: &Path,
    node_count: usize,
    periods: usize,
) -> Result<Vec<Vec<(f64, f64)>>, SimError> {
    let text = fs::read_to_string(path).map_err(|e| SimError::Io(e.to_string()))?;
    let mut positions = vec![vec![(f64::NAN, f64::NAN); periods]; node_count];
    for (lineno0, line) in text.lines().enumerate() {
        let line_no = lineno0 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut field = |name: &str| {
            it.next().ok_or_else(|| SimError::Trace {
                line: line_no,
                msg: format!("missing {name}"),
            })
        };
        let node: usize = field("node")?
            .parse()
            .map_err(|_| SimError::Trace { line: line_no, msg: "bad node".into() })?;
        let t: usize = field("period")?
            .parse()
            .map_err(|_| SimError::Trace { line: line_no, msg: "bad period".into() })?;
        let x: f64 = field("x")?
            .parse()
            .map_err(|_| SimError::Trace { line: line_no, msg: "bad x".into() })?;
        let y: f64 = field("y")?
            .parse()
            .map_err(|_| SimError::Trace { line: line_no, msg: "bad y".into() })?;
        if node >= node_count {
            return Err(SimError::Trace {
                line: line_no,
                msg: format!("node {node} out of range (have {node_count})"),
            });
        }
        if t < periods {
            positions[node][t] = (x, y);
        }
    }
    for (node, track) in positions.iter_mut().enumerate() {
        if track[0].0.is_nan() {
            return Err(SimError::Trace {
                line: 0,
                msg: format!("trace misses node {node} period 0"),
            });
        }
        for t in 1..track.len() {
            if track[t].0.is_nan() {
                track[t] = track[t - 1];
            }
        }
    }
    Ok(positions)
}

/// `node_id` of the node closest to the area centroid at period 0.
pub fn centroid_node(positions: &[Vec<(f64, f64)>], area: (f64, f64)) -> NodeId {
    let c = (area.0 / 2.0, area.1 / 2.0);
    let mut best = (f64::INFINITY, 0u32);
    for (i, track) in positions.iter().enumerate() {
        let p = track[0];
        let d2 = (p.0 - c.0).powi(2) + (p.1 - c.1).powi(2);
        if d2 < best.0 {
            best = (d2, i as NodeId);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn fixed_tracks_never_move() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = waypoint_track((1000.0, 1000.0), 50, 0.0, &mut rng);
        assert!(t.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn mobile_tracks_respect_speed_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = waypoint_track((1000.0, 1000.0), 200, 25.0, &mut rng);
        for w in t.windows(2) {
            let d = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            assert!(d <= 25.0 + 1e-9, "step {d}");
        }
        assert!(t.windows(2).any(|w| w[0] != w[1]), "track should move");
    }

    #[test]
    fn degenerate_mix_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let classes = assign_speed_classes(100, (100, 0, 0), &mut rng);
        assert!(classes.iter().all(|c| *c == SpeedClass::Fixed));
    }

    #[test]
    fn trace_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let positions: Vec<Vec<(f64, f64)>> =
            (0..3).map(|_| waypoint_track((100.0, 100.0), 10, 5.0, &mut rng)).collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.txt");
        write_trace(&p, &positions).unwrap();
        let read = read_trace(&p, 3, 10).unwrap();
        assert_eq!(positions, read);
        assert!(matches!(read_trace(&p, 4, 10), Err(SimError::Trace { .. })));
    }
}
