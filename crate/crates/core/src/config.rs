//! INI-style experiment configuration: `[sim]`, `[utility]`, `[protocol]`,
//! `[baseline]` sections for single runs, plus a `[sweep]` section for
//! comparison matrices.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::baselines::BaselineParams;
use crate::metrics::UtilityParams;
use crate::protocol::ProtocolParams;
use crate::simnet::{OntologySource, ProtocolKind, SimConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error: {0}")]
    Io(String),
    #[error("config parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config error: [{section}] {key}: {msg}")]
    Value { section: String, key: String, msg: String },
    #[error("config error: {0}")]
    Other(String),
}

/// Raw parsed INI: (section, key) -> (value, line number).
pub struct Ini {
    values: BTreeMap<(String, String), (String, usize)>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Ini, ConfigError> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (lineno0, raw) in text.lines().enumerate() {
            let line = lineno0 + 1;
            let stripped = match raw.find(['#', ';']) {
                Some(i) => &raw[..i],
                None => raw,
            };
            let s = stripped.trim();
            if s.is_empty() {
                continue;
            }
            if let Some(name) = s.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(ConfigError::Parse {
                    line,
                    msg: "unterminated section header".into(),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = s.split_once('=').ok_or(ConfigError::Parse {
                line,
                msg: "expected `key = value`".into(),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Parse { line, msg: "empty key".into() });
            }
            if values
                .insert((section.clone(), key.clone()), (value.trim().to_string(), line))
                .is_some()
            {
                return Err(ConfigError::Parse {
                    line,
                    msg: format!("duplicate key `{key}` in section [{section}]"),
                });
            }
        }
        Ok(Ini { values })
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.values.get(&(section.to_string(), key.to_string())).map(|(v, _)| v.as_str())
    }

    fn parse_as<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
    ) -> Result<Option<T>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| ConfigError::Value {
                section: section.into(),
                key: key.into(),
                msg: format!("cannot parse `{v}`"),
            }),
        }
    }

}

fn parse_bool(ini: &Ini, section: &str, key: &str) -> Result<Option<bool>, ConfigError> {
    match ini.get(section, key) {
        None => Ok(None),
        Some("true") | Some("1") | Some("yes") => Ok(Some(true)),
        Some("false") | Some("0") | Some("no") => Ok(Some(false)),
        Some(v) => Err(ConfigError::Value {
            section: section.into(),
            key: key.into(),
            msg: format!("expected a boolean, got `{v}`"),
        }),
    }
}

fn parse_mix(s: &str) -> Option<(u8, u8, u8)> {
    let parts: Vec<&str> = s.split(['/', ',']).collect();
    if parts.len() != 3 {
        return None;
    }
    Some((
        parts[0].trim().parse().ok()?,
        parts[1].trim().parse().ok()?,
        parts[2].trim().parse().ok()?,
    ))
}

const SIM_KEYS: &[&str] = &[
    "nodes", "area", "degree_target", "comm_range", "mix", "speed_medium", "speed_high",
    "holder_fraction", "zipf_skew", "q_interval", "a_interval", "usage_period", "duration",
    "warmup", "seed", "protocol", "rtb_bytes", "ontology_leaves", "ontology_seed",
    "ontology_file", "mobility_trace",
];
const UTILITY_KEYS: &[&str] = &[
    "w1", "w2", "alpha", "maxut", "utthr", "k_periods", "ug_cap", "disable_stability",
    "disable_coverage",
];
const PROTOCOL_KEYS: &[&str] = &["ttl", "rf_budget"];
const BASELINE_KEYS: &[&str] =
    &["flood_hop_limit", "gsd_cache_hops", "gsd_group_depth", "chord_ring_bits"];
const SWEEP_KEYS: &[&str] = &["axis", "values", "seeds", "protocols"];

fn check_known_keys(ini: &Ini, allow_sweep: bool) -> Result<(), ConfigError> {
    let sections: &[(&str, &[&str])] = &[
        ("sim", SIM_KEYS),
        ("utility", UTILITY_KEYS),
        ("protocol", PROTOCOL_KEYS),
        ("baseline", BASELINE_KEYS),
        ("sweep", SWEEP_KEYS),
    ];
    for ((section, key), (_, line)) in ini.values.iter() {
        let known = sections.iter().find(|(s, _)| s == section);
        match known {
            Some((_, keys)) if keys.contains(&key.as_str()) => {
                if section == "sweep" && !allow_sweep {
                    return Err(ConfigError::Parse {
                        line: *line,
                        msg: "[sweep] section is only valid in sweep files".into(),
                    });
                }
            }
            Some((s, _)) => {
                return Err(ConfigError::Parse {
                    line: *line,
                    msg: format!("unknown key `{key}` in section [{s}]"),
                })
            }
            None => {
                return Err(ConfigError::Parse {
                    line: *line,
                    msg: format!("unknown section [{section}]"),
                })
            }
        }
    }
    Ok(())
}

/// Builds a run configuration from INI text, starting from defaults.
pub fn sim_config_from_text(text: &str) -> Result<SimConfig, ConfigError> {
    let ini = Ini::parse(text)?;
    check_known_keys(&ini, false)?;
    sim_config_from_ini(&ini)
}

pub fn load_sim_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(e.to_string()))?;
    sim_config_from_text(&text)
}

fn sim_config_from_ini(ini: &Ini) -> Result<SimConfig, ConfigError> {
    let mut cfg = SimConfig::default();
    let s = "sim";
    if let Some(v) = ini.parse_as::<u32>(s, "nodes")? {
        cfg.node_count = v;
    }
    if let Some(v) = ini.get(s, "area") {
        if v != "auto" {
            let (w, h) = v.split_once('x').ok_or(ConfigError::Value {
                section: s.into(),
                key: "area".into(),
                msg: "expected `WIDTHxHEIGHT` in meters or `auto`".into(),
            })?;
            let parse = |x: &str| {
                x.trim().parse::<f64>().map_err(|_| ConfigError::Value {
                    section: s.into(),
                    key: "area".into(),
                    msg: format!("cannot parse `{x}`"),
                })
            };
            cfg.area = Some((parse(w)?, parse(h)?));
        }
    }
    if let Some(v) = ini.parse_as::<f64>(s, "degree_target")? {
        cfg.degree_target = v;
    }
    if let Some(v) = ini.parse_as::<f64>(s, "comm_range")? {
        cfg.comm_range = v;
    }
    if let Some(v) = ini.get(s, "mix") {
        cfg.mobility_mix = parse_mix(v).ok_or(ConfigError::Value {
            section: s.into(),
            key: "mix".into(),
            msg: "expected three percentages like `20,50,30`".into(),
        })?;
    }
    if let Some(v) = ini.parse_as::<f64>(s, "speed_medium")? {
        cfg.speed_medium = v;
    }
    if let Some(v) = ini.parse_as::<f64>(s, "speed_high")? {
        cfg.speed_high = v;
    }
    if let Some(v) = ini.parse_as::<f64>(s, "holder_fraction")? {
        cfg.holder_fraction = v;
    }
    if let Some(v) = ini.parse_as::<f64>(s, "zipf_skew")? {
        cfg.zipf_skew = v;
    }
    if let Some(v) = ini.parse_as::<f64>(s, "q_interval")? {
        cfg.q_interval_secs = v;
    }
    if let Some(v) = ini.parse_as::<u32>(s, "a_interval")? {
        cfg.a_interval_secs = v;
    }
    if let Some(v) = ini.parse_as::<u32>(s, "usage_period")? {
        cfg.usage_period_secs = v;
    }
    if let Some(v) = ini.parse_as::<u32>(s, "duration")? {
        cfg.duration_secs = v;
    }
    if let Some(v) = ini.parse_as::<u32>(s, "warmup")? {
        cfg.warmup_secs = v;
    }
    if let Some(v) = ini.parse_as::<u64>(s, "seed")? {
        cfg.seed = v;
    }
    if let Some(v) = ini.get(s, "protocol") {
        cfg.protocol = ProtocolKind::parse(v).ok_or(ConfigError::Value {
            section: s.into(),
            key: "protocol".into(),
            msg: format!(
                "unknown protocol `{v}` (expected one of srp-diot, table-driven, \
                 centralized, flooding, gsd-like, chord-like)"
            ),
        })?;
    }
    if let Some(v) = ini.parse_as::<u64>(s, "rtb_bytes")? {
        cfg.rtb_bytes = v;
    }
    match (ini.get(s, "ontology_file"), ini.parse_as::<usize>(s, "ontology_leaves")?) {
        (Some(path), None) => cfg.ontology = OntologySource::File(PathBuf::from(path)),
        (Some(_), Some(_)) => {
            return Err(ConfigError::Other(
                "set either ontology_file or ontology_leaves, not both".into(),
            ))
        }
        (None, Some(leaves)) => {
            let oseed = ini.parse_as::<u64>(s, "ontology_seed")?.unwrap_or(7);
            cfg.ontology = OntologySource::Generate { leaves, seed: oseed };
        }
        (None, None) => {
            if let Some(oseed) = ini.parse_as::<u64>(s, "ontology_seed")? {
                if let OntologySource::Generate { leaves, .. } = cfg.ontology {
                    cfg.ontology = OntologySource::Generate { leaves, seed: oseed };
                }
            }
        }
    }
    if let Some(v) = ini.get(s, "mobility_trace") {
        cfg.mobility_trace = Some(PathBuf::from(v));
    }

    let u = "utility";
    let mut up = UtilityParams::default();
    if let Some(v) = ini.parse_as::<f64>(u, "w1")? {
        up.w1 = v;
    }
    if let Some(v) = ini.parse_as::<f64>(u, "w2")? {
        up.w2 = v;
    }
    if let Some(v) = ini.parse_as::<f64>(u, "alpha")? {
        up.alpha = v;
    }
    if let Some(v) = ini.parse_as::<u8>(u, "maxut")? {
        up.maxut = v;
    }
    if let Some(v) = ini.parse_as::<u8>(u, "utthr")? {
        up.utthr = v;
    }
    if let Some(v) = ini.parse_as::<u8>(u, "k_periods")? {
        up.k_periods = v;
    }
    if let Some(v) = ini.parse_as::<u32>(u, "ug_cap")? {
        up.ug_cap = v;
    }
    if let Some(v) = parse_bool(ini, u, "disable_stability")? {
        up.disable_stability = v;
    }
    if let Some(v) = parse_bool(ini, u, "disable_coverage")? {
        up.disable_coverage = v;
    }
    if up.utthr == 0 || up.utthr >= up.maxut {
        return Err(ConfigError::Other("utthr must satisfy 0 < utthr < maxut".into()));
    }
    cfg.utility = up;

    let p = "protocol";
    let mut pp = ProtocolParams::default();
    if let Some(v) = ini.parse_as::<u16>(p, "ttl")? {
        pp.ttl = v;
    }
    if let Some(v) = ini.parse_as::<u16>(p, "rf_budget")? {
        pp.rf_budget = v;
    }
    cfg.proto = pp;

    let b = "baseline";
    let mut bp = BaselineParams::default();
    if let Some(v) = ini.parse_as::<u32>(b, "flood_hop_limit")? {
        bp.flood_hop_limit = v;
    }
    if let Some(v) = ini.parse_as::<u32>(b, "gsd_cache_hops")? {
        bp.gsd_cache_hops = v;
    }
    if let Some(v) = ini.parse_as::<usize>(b, "gsd_group_depth")? {
        bp.gsd_group_depth = v;
    }
    if let Some(v) = ini.parse_as::<u32>(b, "chord_ring_bits")? {
        bp.chord_ring_bits = v;
    }
    cfg.baseline = bp;
    Ok(cfg)
}

/// Renders the resolved configuration back in the file format (used by
/// `--dry-run`).
pub fn dump_config(cfg: &SimConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[sim]");
    let _ = writeln!(out, "nodes = {}", cfg.node_count);
    match cfg.area {
        Some((w, h)) => {
            let _ = writeln!(out, "area = {w}x{h}");
        }
        None => {
            let _ = writeln!(out, "area = auto");
            let _ = writeln!(out, "degree_target = {}", cfg.degree_target);
        }
    }
    let _ = writeln!(out, "comm_range = {}", cfg.comm_range);
    let _ = writeln!(
        out,
        "mix = {},{},{}",
        cfg.mobility_mix.0, cfg.mobility_mix.1, cfg.mobility_mix.2
    );
    let _ = writeln!(out, "speed_medium = {}", cfg.speed_medium);
    let _ = writeln!(out, "speed_high = {}", cfg.speed_high);
    let _ = writeln!(out, "holder_fraction = {}", cfg.holder_fraction);
    let _ = writeln!(out, "zipf_skew = {}", cfg.zipf_skew);
    let _ = writeln!(out, "q_interval = {}", cfg.q_interval_secs);
    let _ = writeln!(out, "a_interval = {}", cfg.a_interval_secs);
    let _ = writeln!(out, "usage_period = {}", cfg.usage_period_secs);
    let _ = writeln!(out, "duration = {}", cfg.duration_secs);
    let _ = writeln!(out, "warmup = {}", cfg.warmup_secs);
    let _ = writeln!(out, "seed = {}", cfg.seed);
    let _ = writeln!(out, "protocol = {}", cfg.protocol.as_str());
    let _ = writeln!(out, "rtb_bytes = {}", cfg.rtb_bytes);
    match &cfg.ontology {
        OntologySource::Generate { leaves, seed } => {
            let _ = writeln!(out, "ontology_leaves = {leaves}");
            let _ = writeln!(out, "ontology_seed = {seed}");
        }
        OntologySource::File(p) => {
            let _ = writeln!(out, "ontology_file = {}", p.display());
        }
    }
    if let Some(t) = &cfg.mobility_trace {
        let _ = writeln!(out, "mobility_trace = {}", t.display());
    }
    let up = &cfg.utility;
    let _ = writeln!(out, "\n[utility]");
    let _ = writeln!(out, "w1 = {}", up.w1);
    let _ = writeln!(out, "w2 = {}", up.w2);
    let _ = writeln!(out, "alpha = {}", up.alpha);
    let _ = writeln!(out, "maxut = {}", up.maxut);
    let _ = writeln!(out, "utthr = {}", up.utthr);
    let _ = writeln!(out, "k_periods = {}", up.k_periods);
    let _ = writeln!(out, "ug_cap = {}", up.ug_cap);
    let _ = writeln!(out, "disable_stability = {}", up.disable_stability);
    let _ = writeln!(out, "disable_coverage = {}", up.disable_coverage);
    let _ = writeln!(out, "\n[protocol]");
    let _ = writeln!(out, "ttl = {}", cfg.proto.ttl);
    let _ = writeln!(out, "rf_budget = {}", cfg.proto.rf_budget);
    let bp = &cfg.baseline;
    let _ = writeln!(out, "\n[baseline]");
    let _ = writeln!(out, "flood_hop_limit = {}", bp.flood_hop_limit);
    let _ = writeln!(out, "gsd_cache_hops = {}", bp.gsd_cache_hops);
    let _ = writeln!(out, "gsd_group_depth = {}", bp.gsd_group_depth);
    let _ = writeln!(out, "chord_ring_bits = {}", bp.chord_ring_bits);
    out
}

/// The swept experiment dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    NodeCount,
    OntologyLeaves,
    QaPair,
    MobilityMix,
    RtbBytes,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "node_count" | "nodes" => Some(Self::NodeCount),
            "ontology_leaves" => Some(Self::OntologyLeaves),
            "qa_pair" | "QA_pair" => Some(Self::QaPair),
            "mobility_mix" | "mix" => Some(Self::MobilityMix),
            "rtb_bytes" | "rtb" => Some(Self::RtbBytes),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NodeCount => "node_count",
            Self::OntologyLeaves => "ontology_leaves",
            Self::QaPair => "qa_pair",
            Self::MobilityMix => "mobility_mix",
            Self::RtbBytes => "rtb_bytes",
        }
    }
}

/// A sweep: one axis, its values, the seeds, the protocols to compare, and
/// the base configuration every cell starts from.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<String>,
    pub seeds: Vec<u64>,
    pub protocols: Vec<ProtocolKind>,
    pub base: SimConfig,
}

pub fn load_sweep(path: &Path) -> Result<SweepSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(e.to_string()))?;
    sweep_from_text(&text)
}

pub fn sweep_from_text(text: &str) -> Result<SweepSpec, ConfigError> {
    let ini = Ini::parse(text)?;
    check_known_keys(&ini, true)?;
    let base = sim_config_from_ini(&ini)?;
    let sw = "sweep";
    let axis_str = ini.get(sw, "axis").ok_or(ConfigError::Other("missing [sweep] axis".into()))?;
    let axis = SweepAxis::parse(axis_str).ok_or(ConfigError::Value {
        section: sw.into(),
        key: "axis".into(),
        msg: format!("unknown axis `{axis_str}`"),
    })?;
    let values: Vec<String> = ini
        .get(sw, "values")
        .ok_or(ConfigError::Other("missing [sweep] values".into()))?
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(ConfigError::Other("[sweep] values is empty".into()));
    }
    let seeds: Vec<u64> = ini
        .get(sw, "seeds")
        .ok_or(ConfigError::Other("missing [sweep] seeds".into()))?
        .split(',')
        .map(|v| {
            v.trim().parse::<u64>().map_err(|_| ConfigError::Value {
                section: sw.into(),
                key: "seeds".into(),
                msg: format!("bad seed `{v}`"),
            })
        })
        .collect::<Result<_, _>>()?;
    if seeds.is_empty() {
        return Err(ConfigError::Other("[sweep] seeds is empty".into()));
    }
    let protocols: Vec<ProtocolKind> = match ini.get(sw, "protocols") {
        None => ProtocolKind::ALL.to_vec(),
        Some(list) => list
            .split(',')
            .map(|v| {
                ProtocolKind::parse(v.trim()).ok_or(ConfigError::Value {
                    section: sw.into(),
                    key: "protocols".into(),
                    msg: format!("unknown protocol `{}`", v.trim()),
                })
            })
            .collect::<Result<_, _>>()?,
    };
    Ok(SweepSpec { axis, values, seeds, protocols, base })
}

/// Applies one axis value to a copy of the base configuration.
pub fn apply_axis(base: &SimConfig, axis: SweepAxis, value: &str) -> Result<SimConfig, ConfigError> {
    let mut cfg = base.clone();
    let bad = |msg: String| ConfigError::Value {
        section: "sweep".into(),
        key: "values".into(),
        msg,
    };
    match axis {
        SweepAxis::NodeCount => {
            cfg.node_count =
                value.parse().map_err(|_| bad(format!("bad node count `{value}`")))?;
        }
        SweepAxis::OntologyLeaves => {
            let leaves =
                value.parse().map_err(|_| bad(format!("bad leaf count `{value}`")))?;
            let seed = match cfg.ontology {
                OntologySource::Generate { seed, .. } => seed,
                OntologySource::File(_) => 7,
            };
            cfg.ontology = OntologySource::Generate { leaves, seed };
        }
        SweepAxis::QaPair => {
            let (q, a) = value
                .split_once(':')
                .ok_or_else(|| bad(format!("expected `Q:A`, got `{value}`")))?;
            cfg.q_interval_secs =
                q.trim().parse().map_err(|_| bad(format!("bad Q `{q}`")))?;
            cfg.a_interval_secs =
                a.trim().parse().map_err(|_| bad(format!("bad A `{a}`")))?;
        }
        SweepAxis::MobilityMix => {
            cfg.mobility_mix =
                parse_mix(value).ok_or_else(|| bad(format!("bad mix `{value}`")))?;
        }
        SweepAxis::RtbBytes => {
            cfg.rtb_bytes =
                value.parse().map_err(|_| bad(format!("bad byte count `{value}`")))?;
        }
    }
    Ok(cfg)
}
