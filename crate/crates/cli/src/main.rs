//! Command-line front end for the discovery-protocol experiments.
//!
//! Exit codes: 0 on success, 1 on runtime failures, 2 on usage or
//! configuration errors.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use srp_diot::config::{
    apply_axis, dump_config, load_sim_config, load_sweep, ConfigError, SweepSpec,
};
use srp_diot::ontology::{generate_ontology, write_ontology_file, DEFAULT_DEGREE_WEIGHTS};
use srp_diot::simnet::{
    assign_speed_classes, run, waypoint_track, write_trace, SimConfig, SpeedClass, StatsReport,
};

#[derive(Parser)]
#[command(name = "srp-diot", version, about = "Semantic capability discovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Generate a random capability ontology and write it to a file.
    GenOntology {
        /// Number of leaf capabilities to generate.
        #[arg(long)]
        leaves: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a waypoint mobility trace (`node period x y` rows).
    GenMobility {
        #[arg(long)]
        nodes: u32,
        /// Trace length in periods (seconds).
        #[arg(long)]
        duration: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Percentages fixed,medium,high; must sum to 100.
        #[arg(long, default_value = "20,50,30")]
        mix: String,
        /// Area side in meters (square).
        #[arg(long, default_value_t = 1000.0)]
        side: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Results CSV path (default: results.csv next to nothing in
        /// particular, i.e. the working directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the resolved configuration and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run a sweep matrix and write a merged CSV plus per-cell summary.
    Compare {
        #[arg(long)]
        sweep: PathBuf,
        /// Output directory for merged.csv and summary.txt.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Ablation: neutralize the stability factor in the utility.
        #[arg(long)]
        no_stability: bool,
        /// Ablation: neutralize the coverage factor in the utility.
        #[arg(long)]
        no_coverage: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<ConfigError>().is_some();
            std::process::exit(if usage { 2 } else { 1 });
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Commands::GenOntology { leaves, seed, out } => cmd_gen_ontology(leaves, seed, out),
        Commands::GenMobility { nodes, duration, seed, mix, side, out } => {
            cmd_gen_mobility(nodes, duration, seed, &mix, side, out)
        }
        Commands::Run { config, out, dry_run } => cmd_run(config, out, dry_run),
        Commands::Compare { sweep, out, jobs, no_stability, no_coverage } => {
            cmd_compare(sweep, out, jobs, no_stability, no_coverage)
        }
    }
}

fn cmd_gen_ontology(leaves: usize, seed: u64, out: PathBuf) -> Result<()> {
    let tree = generate_ontology(seed, leaves, (2, 8), &DEFAULT_DEGREE_WEIGHTS)
        .context("ontology generation failed")?;
    write_ontology_file(&tree, &out).context("writing ontology file")?;
    println!(
        "wrote {} nodes ({} leaves, {}-bit codes) to {}",
        tree.len(),
        tree.leaf_count(),
        tree.onid_width_bits(),
        out.display()
    );
    Ok(())
}

fn cmd_gen_mobility(
    nodes: u32,
    duration: u32,
    seed: u64,
    mix: &str,
    side: f64,
    out: PathBuf,
) -> Result<()> {
    let parts: Vec<u8> = mix
        .split(',')
        .map(|p| p.trim().parse::<u8>())
        .collect::<Result<_, _>>()
        .map_err(|_| ConfigError::Other(format!("bad mix `{mix}`")))?;
    if parts.len() != 3 || parts.iter().map(|&p| p as u32).sum::<u32>() != 100 {
        return Err(ConfigError::Other(format!("mix `{mix}` must be three percentages summing to 100")).into());
    }
    let area = (side, side);
    let mut class_rng = ChaCha8Rng::seed_from_u64(seed);
    class_rng.set_stream(1);
    let mut track_rng = ChaCha8Rng::seed_from_u64(seed);
    track_rng.set_stream(2);
    let classes = assign_speed_classes(nodes as usize, (parts[0], parts[1], parts[2]), &mut class_rng);
    let positions: Vec<Vec<(f64, f64)>> = classes
        .iter()
        .map(|c| {
            let cap = match c {
                SpeedClass::Fixed => 0.0,
                SpeedClass::Medium => 25.0,
                SpeedClass::High => 50.0,
            };
            waypoint_track(area, duration as usize + 1, cap, &mut track_rng)
        })
        .collect();
    write_trace(&out, &positions).context("writing trace")?;
    println!("wrote {} node tracks x {} periods to {}", nodes, duration + 1, out.display());
    Ok(())
}

fn cmd_run(config: PathBuf, out: Option<PathBuf>, dry_run: bool) -> Result<()> {
    let cfg = load_sim_config(&config)?;
    if dry_run {
        print!("{}", dump_config(&cfg));
        return Ok(());
    }
    let report = run(cfg).context("simulation failed")?;
    let out = out.unwrap_or_else(|| PathBuf::from("results.csv"));
    fs::write(&out, format!("{}\n{}\n", StatsReport::csv_header(), report.csv_row()))
        .with_context(|| format!("writing {}", out.display()))?;
    print_human_summary(&report);
    println!("csv: {}", out.display());
    Ok(())
}

fn print_human_summary(r: &StatsReport) {
    println!(
        "{} seed={} nodes={} leaves={} (Q,A)=({},{}) rtb={}",
        r.protocol, r.seed, r.nodes, r.ontology_leaves, r.q_interval, r.a_interval, r.rtb_bytes
    );
    println!(
        "  traffic: total={} B (adv={} B, query={} B, control={} B), dropped={}",
        r.total_bytes, r.adv_bytes, r.query_bytes, r.control_bytes, r.dropped_messages
    );
    println!(
        "  queries: issued={} found={} success={:.2}% (on reachable {:.2}%)",
        r.queries_issued,
        r.queries_found,
        r.success_rate * 100.0,
        r.success_on_reachable * 100.0
    );
    println!(
        "  hops: avg={:.2} p95={} random_forwards={} backtracks={} avg_rt={:.0} B",
        r.avg_query_hops,
        r.p95_query_hops,
        r.total_random_forwards,
        r.total_backtracks,
        r.avg_rt_bytes
    );
}

fn cmd_compare(
    sweep_path: PathBuf,
    out_dir: PathBuf,
    jobs: usize,
    no_stability: bool,
    no_coverage: bool,
) -> Result<()> {
    let mut sweep: SweepSpec = load_sweep(&sweep_path)?;
    sweep.base.utility.disable_stability |= no_stability;
    sweep.base.utility.disable_coverage |= no_coverage;

    // Cell order defines the output order: axis value, protocol, seed.
    let mut cells: Vec<(usize, usize, u64, SimConfig)> = Vec::new();
    for (vi, value) in sweep.values.iter().enumerate() {
        for (pi, proto) in sweep.protocols.iter().enumerate() {
            for &seed in &sweep.seeds {
                let mut cfg = apply_axis(&sweep.base, sweep.axis, value)?;
                cfg.protocol = *proto;
                cfg.seed = seed;
                cells.push((vi, pi, seed, cfg));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")?;
    let results: Vec<(usize, usize, u64, Result<StatsReport, String>)> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .into_par_iter()
            .map(|(vi, pi, seed, cfg)| {
                let res = run(cfg).map_err(|e| e.to_string());
                (vi, pi, seed, res)
            })
            .collect()
    });

    let mut rows: Vec<(usize, usize, u64, StatsReport)> = Vec::with_capacity(results.len());
    for (vi, pi, seed, res) in results {
        match res {
            Ok(r) => rows.push((vi, pi, seed, r)),
            Err(e) => anyhow::bail!("cell value={} protocol={} seed={} failed: {e}",
                sweep.values[vi], sweep.protocols[pi].as_str(), seed),
        }
    }
    rows.sort_by_key(|(vi, pi, seed, _)| (*vi, *pi, *seed));

    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut csv = String::from(StatsReport::csv_header());
    csv.push('\n');
    for (_, _, _, r) in &rows {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    let csv_path = out_dir.join("merged.csv");
    fs::write(&csv_path, &csv).with_context(|| format!("writing {}", csv_path.display()))?;

    let summary = render_summary(&sweep, &rows);
    let sum_path = out_dir.join("summary.txt");
    fs::write(&sum_path, &summary).with_context(|| format!("writing {}", sum_path.display()))?;
    print!("{summary}");
    println!("rows: {} -> {}", rows.len(), csv_path.display());
    Ok(())
}

/// Per-axis-value table: one row per protocol, averaged over seeds, with the
/// minimum-traffic protocol flagged.
fn render_summary(sweep: &SweepSpec, rows: &[(usize, usize, u64, StatsReport)]) -> String {
    let mut out = String::new();
    out.push_str(&format!("axis: {}\n", sweep.axis.as_str()));
    out.push_str(&format!(
        "{:<14} {:<14} {:>14} {:>14} {:>10} {:>9}  min\n",
        "value", "protocol", "total_bytes", "query_bytes", "avg_hops", "success"
    ));
    for (vi, value) in sweep.values.iter().enumerate() {
        let mut per_proto: Vec<(usize, f64, f64, f64, f64)> = Vec::new();
        for (pi, _) in sweep.protocols.iter().enumerate() {
            let cell: Vec<&StatsReport> = rows
                .iter()
                .filter(|(v, p, _, _)| *v == vi && *p == pi)
                .map(|(_, _, _, r)| r)
                .collect();
            if cell.is_empty() {
                continue;
            }
            let n = cell.len() as f64;
            per_proto.push((
                pi,
                cell.iter().map(|r| r.total_bytes as f64).sum::<f64>() / n,
                cell.iter().map(|r| r.query_bytes as f64).sum::<f64>() / n,
                cell.iter().map(|r| r.avg_query_hops).sum::<f64>() / n,
                cell.iter().map(|r| r.success_rate).sum::<f64>() / n,
            ));
        }
        let min_total = per_proto
            .iter()
            .map(|x| x.1)
            .fold(f64::INFINITY, f64::min);
        for (pi, total, query, hops, success) in per_proto {
            out.push_str(&format!(
                "{:<14} {:<14} {:>14.0} {:>14.0} {:>10.2} {:>9.4}  {}\n",
                value,
                sweep.protocols[pi].as_str(),
                total,
                query,
                hops,
                success,
                if total == min_total { "*" } else { "" }
            ));
        }
    }
    out
}
