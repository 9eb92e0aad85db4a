//! Run configuration files: line-oriented `key = value` text with
//! `[section]` headers.
//!
//! A run file describes one experiment. A comparison file is a run file plus
//! `[row:NAME]` sections whose `section.key = value` entries override the
//! base run, and an optional `[sweep]` section whose entries list several
//! values to cross with every row.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::allocator::{GroupingStrategy, DEFAULT_DEPTH, DEFAULT_REGIONS};
use crate::error::{ConfigError, Error};
use crate::hotness::{CoolingTrigger, DecayShape, LazyDecay, WarmDisableBasis};
use crate::metrics::CostModel;
use crate::migration::MigrationConfig;
use crate::policies::{NumaDemotion, PolicyConfig, PolicyKind};
use crate::seed::{self, Stream};
use crate::sim::SimConfig;
use crate::workload::{self, Archetype, ContextSpec, Popularity, SamplingModel, SizeDistribution, Trace, WorkloadSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

/// A parsed configuration document, sections in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ini {
    pub sections: Vec<Section>,
}

impl Ini {
    /// Blank lines and lines starting with `#` or `;` are ignored; so is
    /// anything after ` #` on a value line.
    pub fn parse(text: &str) -> Result<Ini, ConfigError> {
        let mut ini = Ini::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let syntax = |msg: &str| ConfigError::Syntax {
                line,
                msg: msg.to_string(),
            };
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| syntax("unterminated section header"))?
                    .trim();
                if name.is_empty() {
                    return Err(syntax("empty section name"));
                }
                if ini.section(name).is_some() {
                    return Err(syntax(&format!("section [{name}] appears twice")));
                }
                ini.sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = s.split_once('=').ok_or_else(|| syntax("expected `key = value`"))?;
            let key = key.trim();
            let value = match value.find(" #") {
                Some(k) => &value[..k],
                None => value,
            }
            .trim();
            if key.is_empty() {
                return Err(syntax("empty key"));
            }
            let section = ini
                .sections
                .last_mut()
                .ok_or_else(|| syntax("entry before the first [section]"))?;
            if section.entries.iter().any(|e| e.key == key) {
                return Err(syntax(&format!("key `{key}` repeated in [{}]", section.name)));
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line,
            });
        }
        Ok(ini)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }
}

/// Where the trace of a run comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    Generate(WorkloadSpec),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FastCapacity {
    Pages(u64),
    /// Fraction of the pages the placement opens.
    Fraction(f64),
}

impl FastCapacity {
    pub fn pages(self, pages_opened: u64) -> u64 {
        match self {
            FastCapacity::Pages(n) => n,
            FastCapacity::Fraction(f) => (f * pages_opened as f64).round() as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportConfig {
    pub timeline_buckets: u64,
    pub warmup_fraction: f64,
    pub heatmap_address_buckets: usize,
    pub heatmap_time_buckets: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            timeline_buckets: 100,
            warmup_fraction: 0.1,
            heatmap_address_buckets: 64,
            heatmap_time_buckets: 64,
        }
    }
}

/// One experiment: a trace, a placement, a policy and the tiers.
///
/// Sample-denominated policy defaults are multiplied by `scale`; values
/// given explicitly in `[policy]` or `[migration]` are used as written.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub scale: f64,
    pub out: PathBuf,
    pub source: TraceSource,
    pub strategy: GroupingStrategy,
    /// Bound on pages the placement may open.
    pub max_pages: u64,
    pub fast: FastCapacity,
    pub capacity_pages: u64,
    pub policy: PolicyKind,
    /// Explicit `[policy]` parameters, applied over the scaled defaults.
    pub policy_params: Vec<(String, String)>,
    pub tick_interval_accesses: Option<u64>,
    pub max_migrations_per_tick: Option<u64>,
    pub sampling_rate: u64,
    pub sampling_jitter: f64,
    pub cost: CostModel,
    pub report: ReportConfig,
    pub invariant_check_ticks: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scale: 1.0,
            out: PathBuf::from("out"),
            source: TraceSource::Generate(WorkloadSpec::stable_zipf(1000, 100_000, 1.0)),
            strategy: GroupingStrategy::TimeBased,
            max_pages: 1 << 24,
            fast: FastCapacity::Fraction(0.25),
            capacity_pages: 1 << 32,
            policy: PolicyKind::Smooth,
            policy_params: Vec::new(),
            tick_interval_accesses: None,
            max_migrations_per_tick: None,
            sampling_rate: 1,
            sampling_jitter: 0.0,
            cost: CostModel::default(),
            report: ReportConfig::default(),
            invariant_check_ticks: 64,
        }
    }
}

const POLICY_KEYS: &[&str] = &[
    "cooling_interval",
    "decay_factor",
    "decay_shape",
    "max_counter",
    "lazy_decay",
    "adapt_interval",
    "warm_disable_fraction",
    "warm_disable_basis",
    "momentum_interval",
    "frequency_interval",
    "momentum_threshold",
    "scan_window_pages",
    "scan_interval",
    "hot_fault_threshold",
    "demotion",
    "watermark_high",
    "watermark_low",
];

fn value_err(section: &str, key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        section: section.to_string(),
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn num<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .replace('_', "")
        .parse()
        .map_err(|_| value_err(section, key, format!("cannot parse `{value}`")))
}

fn strategy_named(name: &str, depth: usize, regions: u32) -> Option<GroupingStrategy> {
    Some(match name {
        "time" => GroupingStrategy::TimeBased,
        "size" => GroupingStrategy::SizeBased,
        "context" => GroupingStrategy::ContextBased { depth, regions },
        "oracle" => GroupingStrategy::OraclePopularity,
        _ => return None,
    })
}

impl RunConfig {
    /// Parses a run file. Relative trace paths are taken relative to
    /// `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        Self::from_ini(&Ini::parse(text)?, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Ok(Self::parse(&text, dir)?)
    }

    pub fn from_ini(ini: &Ini, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut saw_workload = false;
        for section in &ini.sections {
            match section.name.as_str() {
                "workload" => {
                    cfg.source = TraceSource::Generate(parse_workload(section)?);
                    saw_workload = true;
                }
                "run" | "tiers" | "allocator" | "policy" | "migration" | "sampling" | "cost" | "report" => {
                    for e in &section.entries {
                        cfg.set(&section.name, &e.key, &e.value, base_dir)
                            .map_err(|err| at_line(err, e.line))?;
                    }
                }
                n if n.starts_with("row:") || n == "sweep" => {}
                n => {
                    return Err(ConfigError::Syntax {
                        line: section.line,
                        msg: format!("unknown section [{n}]"),
                    })
                }
            }
        }
        let saw_trace = ini
            .section("run")
            .is_some_and(|r| r.entries.iter().any(|e| e.key == "trace"));
        if saw_workload && saw_trace {
            return Err(ConfigError::Invalid(
                "give either [workload] or run.trace, not both".into(),
            ));
        }
        // the depth/regions keys may follow the strategy key
        if let Some(a) = ini.section("allocator") {
            cfg.finish_strategy(a)?;
        }
        cfg.sim_config(1)?;
        Ok(cfg)
    }

    fn finish_strategy(&mut self, a: &Section) -> Result<(), ConfigError> {
        let get = |k: &str| a.entries.iter().find(|e| e.key == k);
        if let GroupingStrategy::ContextBased { depth, regions } = &mut self.strategy {
            if let Some(e) = get("depth") {
                *depth = num("allocator", "depth", &e.value)?;
            }
            if let Some(e) = get("regions") {
                *regions = num("allocator", "regions", &e.value)?;
            }
            if *depth == 0 || *regions == 0 {
                return Err(value_err("allocator", "depth", "depth and regions must be at least 1"));
            }
        }
        Ok(())
    }

    /// Applies one `section.key = value` setting outside `[workload]`.
    pub fn set(&mut self, section: &str, key: &str, value: &str, base_dir: &Path) -> Result<(), ConfigError> {
        let bad_key = || value_err(section, key, "unknown key");
        match section {
            "run" => match key {
                "seed" => self.seed = num(section, key, value)?,
                "scale" => {
                    self.scale = num(section, key, value)?;
                    if !(self.scale > 0.0) {
                        return Err(value_err(section, key, "scale must be positive"));
                    }
                }
                "out" => self.out = PathBuf::from(value),
                "trace" => self.source = TraceSource::File(base_dir.join(value)),
                "invariant_check_ticks" => self.invariant_check_ticks = num(section, key, value)?,
                _ => return Err(bad_key()),
            },
            "tiers" => match key {
                "fast_pages" => self.fast = FastCapacity::Pages(num(section, key, value)?),
                "fast_fraction" => {
                    let f: f64 = num(section, key, value)?;
                    if !(0.0..=1.0).contains(&f) {
                        return Err(value_err(section, key, "fraction must be in [0, 1]"));
                    }
                    self.fast = FastCapacity::Fraction(f);
                }
                "capacity_pages" => self.capacity_pages = num(section, key, value)?,
                _ => return Err(bad_key()),
            },
            "allocator" => match key {
                "strategy" => {
                    let (depth, regions) = match self.strategy {
                        GroupingStrategy::ContextBased { depth, regions } => (depth, regions),
                        _ => (DEFAULT_DEPTH, DEFAULT_REGIONS),
                    };
                    self.strategy = strategy_named(value, depth, regions)
                        .ok_or_else(|| value_err(section, key, "expected time, size, context or oracle"))?;
                }
                "depth" | "regions" => {
                    let n: u64 = num(section, key, value)?;
                    if n == 0 {
                        return Err(value_err(section, key, "must be at least 1"));
                    }
                    if let GroupingStrategy::ContextBased { depth, regions } = &mut self.strategy {
                        if key == "depth" {
                            *depth = n as usize;
                        } else {
                            *regions = n as u32;
                        }
                    }
                }
                "max_pages" => self.max_pages = num(section, key, value)?,
                _ => return Err(bad_key()),
            },
            "policy" => match key {
                "kind" => {
                    self.policy = PolicyKind::from_name(value).ok_or_else(|| {
                        let names: Vec<&str> = PolicyKind::ALL.iter().map(|k| k.name()).collect();
                        value_err(section, key, format!("expected one of {}", names.join(", ")))
                    })?
                }
                k if POLICY_KEYS.contains(&k) => {
                    self.policy_params.retain(|(pk, _)| pk != k);
                    self.policy_params.push((k.to_string(), value.to_string()));
                }
                _ => return Err(bad_key()),
            },
            "migration" => match key {
                "tick_interval_accesses" => self.tick_interval_accesses = Some(num(section, key, value)?),
                "max_migrations_per_tick" => {
                    self.max_migrations_per_tick = if value == "unlimited" {
                        None
                    } else {
                        Some(num(section, key, value)?)
                    }
                }
                _ => return Err(bad_key()),
            },
            "sampling" => match key {
                "rate" => self.sampling_rate = num(section, key, value)?,
                "jitter" => self.sampling_jitter = num(section, key, value)?,
                _ => return Err(bad_key()),
            },
            "cost" => match key {
                "preset" => {
                    self.cost = match value {
                        "optane" => CostModel::default(),
                        "cxl" => CostModel::cxl(),
                        _ => return Err(value_err(section, key, "expected optane or cxl")),
                    }
                }
                "fast_latency_ns" => self.cost.fast_latency_ns = num(section, key, value)?,
                "capacity_latency_ns" => self.cost.capacity_latency_ns = num(section, key, value)?,
                "migration_cost_ns" => self.cost.migration_cost_ns = num(section, key, value)?,
                _ => return Err(bad_key()),
            },
            "report" => match key {
                "timeline_buckets" => self.report.timeline_buckets = num(section, key, value)?,
                "warmup_fraction" => self.report.warmup_fraction = num(section, key, value)?,
                "heatmap_address_buckets" => self.report.heatmap_address_buckets = num(section, key, value)?,
                "heatmap_time_buckets" => self.report.heatmap_time_buckets = num(section, key, value)?,
                _ => return Err(bad_key()),
            },
            _ => return Err(value_err(section, key, "unknown section")),
        }
        Ok(())
    }

    /// Page size of the generated workload, or the default when the trace
    /// comes from a file (the file header then decides).
    pub fn page_size(&self) -> u64 {
        match &self.source {
            TraceSource::Generate(spec) => spec.page_size,
            TraceSource::File(_) => workload::DEFAULT_PAGE_SIZE,
        }
    }

    /// The workload spec with its seed drawn from the root seed.
    pub fn workload(&self) -> Option<WorkloadSpec> {
        match &self.source {
            TraceSource::Generate(spec) => Some(spec.clone().with_seed(seed::substream(self.seed, Stream::Workload))),
            TraceSource::File(_) => None,
        }
    }

    pub fn load_trace(&self) -> Result<Trace, Error> {
        match &self.source {
            TraceSource::Generate(_) => {
                let spec = self.workload().expect("generated source");
                Ok(workload::generate(&spec)?)
            }
            TraceSource::File(path) => {
                let trace = workload::read_trace(path)?;
                trace.validate().map_err(|(seq, msg)| {
                    Error::Workload(crate::error::WorkloadError::Invalid(format!(
                        "trace event {seq}: {msg}"
                    )))
                })?;
                Ok(trace)
            }
        }
    }

    /// The simulator configuration for a placement that opened
    /// `pages_opened` pages.
    pub fn sim_config(&self, pages_opened: u64) -> Result<SimConfig, ConfigError> {
        self.sim_config_for(pages_opened, self.page_size())
    }

    pub fn sim_config_for(&self, pages_opened: u64, page_size: u64) -> Result<SimConfig, ConfigError> {
        let mut policy = self.policy.default_config(self.scale, page_size);
        for (k, v) in &self.policy_params {
            apply_policy_param(&mut policy, k, v)?;
        }
        let mut migration = MigrationConfig::scaled(self.scale);
        if let Some(t) = self.tick_interval_accesses {
            migration.tick_interval_accesses = t;
        }
        migration.max_migrations_per_tick = self.max_migrations_per_tick;
        let sim = SimConfig {
            strategy: self.strategy,
            policy,
            fast_pages: self.fast.pages(pages_opened),
            capacity_pages: self.capacity_pages,
            migration,
            sampling: SamplingModel {
                rate: self.sampling_rate,
                seed: seed::substream(self.seed, Stream::Sampling),
                jitter: self.sampling_jitter,
            },
            cost: self.cost,
            timeline_buckets: self.report.timeline_buckets,
            warmup_fraction: self.report.warmup_fraction,
            invariant_check_ticks: self.invariant_check_ticks,
        };
        sim.validate().map_err(ConfigError::Invalid)?;
        Ok(sim)
    }
}

fn at_line(err: ConfigError, line: usize) -> ConfigError {
    match err {
        ConfigError::Value { section, key, msg } => ConfigError::Syntax {
            line,
            msg: format!("[{section}] {key}: {msg}"),
        },
        other => other,
    }
}

fn apply_policy_param(p: &mut PolicyConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    let s = "policy";
    let kind = p.kind().name();
    let wrong = || value_err(s, key, format!("does not apply to {kind}"));
    match p {
        PolicyConfig::Histogram {
            cooling, thresholds, ..
        } => match key {
            "cooling_interval" => cooling.interval_samples = num(s, key, value)?,
            "decay_factor" => cooling.decay_factor = num(s, key, value)?,
            "decay_shape" => {
                cooling.decay_shape = match value {
                    "step" => DecayShape::Step,
                    "linear" => DecayShape::LinearSmooth,
                    "exponential" => DecayShape::ExponentialSmooth,
                    _ => return Err(value_err(s, key, "expected step, linear or exponential")),
                }
            }
            "max_counter" => cooling.trigger = CoolingTrigger::MaxCounter(num(s, key, value)?),
            "lazy_decay" => {
                cooling.lazy_decay = match value {
                    "per_epoch" => LazyDecay::PerEpoch,
                    "single" => LazyDecay::Single,
                    _ => return Err(value_err(s, key, "expected per_epoch or single")),
                }
            }
            "adapt_interval" => thresholds.adapt_interval_samples = num(s, key, value)?,
            "warm_disable_fraction" => thresholds.warm_disable_fraction = num(s, key, value)?,
            "warm_disable_basis" => {
                thresholds.warm_disable_basis = match value {
                    "hot_set" => WarmDisableBasis::HotSet,
                    "fast_resident" => WarmDisableBasis::FastResident,
                    _ => return Err(value_err(s, key, "expected hot_set or fast_resident")),
                }
            }
            _ => return Err(wrong()),
        },
        PolicyConfig::TwoInterval(c) => match key {
            "momentum_interval" => c.momentum_interval_samples = num(s, key, value)?,
            "frequency_interval" => c.frequency_interval_samples = num(s, key, value)?,
            "momentum_threshold" => c.momentum_hot_threshold = num(s, key, value)?,
            "adapt_interval" => c.adapt_interval_samples = num(s, key, value)?,
            _ => return Err(wrong()),
        },
        PolicyConfig::NumaHint(c) => match key {
            "scan_window_pages" => c.scan_window_pages = num(s, key, value)?,
            "scan_interval" => c.scan_interval_samples = num(s, key, value)?,
            "hot_fault_threshold" => c.hot_fault_threshold = num(s, key, value)?,
            "demotion" => {
                c.demotion = match value {
                    "none" => NumaDemotion::None,
                    "lru" => match c.demotion {
                        NumaDemotion::None => NumaDemotion::LruWatermark { high: 0.95, low: 0.90 },
                        d => d,
                    },
                    _ => return Err(value_err(s, key, "expected lru or none")),
                }
            }
            "watermark_high" | "watermark_low" => {
                let NumaDemotion::LruWatermark { high, low } = &mut c.demotion else {
                    return Err(value_err(s, key, "watermarks need demotion = lru"));
                };
                let v: f64 = num(s, key, value)?;
                if key == "watermark_high" {
                    *high = v;
                } else {
                    *low = v;
                }
            }
            _ => return Err(wrong()),
        },
    }
    Ok(())
}

fn parse_workload(section: &Section) -> Result<WorkloadSpec, ConfigError> {
    let s = "workload";
    let get = |k: &str| section.entries.iter().find(|e| e.key == k);
    let archetype = get("archetype").ok_or_else(|| value_err(s, "archetype", "required"))?;
    let mut spec = match archetype.value.as_str() {
        "stable_zipf" => WorkloadSpec::stable_zipf(1000, 100_000, 1.0),
        "stable_hotset" => WorkloadSpec::stable_hotset(1000, 100_000, 0.2, 0.9),
        "phase_change" => WorkloadSpec::phase_change(1000, 100_000),
        "checkered" => WorkloadSpec::checkered(1000, 100_000, 4, 25_000),
        "small_object_skew" => WorkloadSpec::small_object_skew(100_000, 1_000_000),
        _ => {
            return Err(value_err(
                s,
                "archetype",
                "expected stable_zipf, stable_hotset, phase_change, checkered or small_object_skew",
            ))
        }
    };
    let mut contexts: Vec<(usize, ContextSpec)> = Vec::new();
    for e in &section.entries {
        let (k, v) = (e.key.as_str(), e.value.as_str());
        let line = e.line;
        let r: Result<(), ConfigError> = (|| {
            match k {
                "archetype" => {}
                "num_objects" => spec.num_objects = num(s, k, v)?,
                "total_accesses" => spec.total_accesses = num(s, k, v)?,
                "object_size" => {
                    spec.object_size = match v.split_once('-') {
                        Some((a, b)) => SizeDistribution::Uniform {
                            min: num(s, k, a.trim())?,
                            max: num(s, k, b.trim())?,
                        },
                        None => SizeDistribution::Fixed(num(s, k, v)?),
                    }
                }
                "zipf_skew" => spec.popularity = Popularity::Zipf { skew: num(s, k, v)? },
                "hot_fraction" | "hot_share" => {
                    let (mut fraction, mut share) = match spec.popularity {
                        Popularity::Hotset { fraction, share } => (fraction, share),
                        Popularity::Zipf { .. } => (0.2, 0.9),
                    };
                    if k == "hot_fraction" {
                        fraction = num(s, k, v)?;
                    } else {
                        share = num(s, k, v)?;
                    }
                    spec.popularity = Popularity::Hotset { fraction, share };
                }
                "switch_fraction" => spec.switch_fraction = num(s, k, v)?,
                "regions" => spec.regions = num(s, k, v)?,
                "phase_accesses" => spec.phase_accesses = num(s, k, v)?,
                "shared_wrapper_frames" => spec.shared_wrapper_frames = num(s, k, v)?,
                "intra_context_skew" => spec.intra_context_skew = num(s, k, v)?,
                "page_size" => spec.page_size = num(s, k, v)?,
                "arena_pages" => spec.arena_pages = num(s, k, v)?,
                _ => {
                    let Some(idx) = k.strip_prefix("context.") else {
                        return Err(value_err(s, k, "unknown key"));
                    };
                    let idx: usize = num(s, k, idx)?;
                    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                    let [share, size, access] = parts[..] else {
                        return Err(value_err(s, k, "expected `object_share, size, access_share`"));
                    };
                    contexts.push((
                        idx,
                        ContextSpec {
                            object_share: num(s, k, share)?,
                            size: num(s, k, size)?,
                            access_share: num(s, k, access)?,
                        },
                    ));
                }
            }
            Ok(())
        })();
        r.map_err(|err| at_line(err, line))?;
    }
    if !contexts.is_empty() {
        contexts.sort_by_key(|c| c.0);
        if contexts.iter().enumerate().any(|(i, c)| c.0 != i) {
            return Err(value_err(
                s,
                "context",
                "context indices must run 0, 1, 2, ... without gaps",
            ));
        }
        spec.contexts = contexts.into_iter().map(|c| c.1).collect();
    }
    if spec.archetype != Archetype::SmallObjectSkew && !spec.contexts.is_empty() {
        return Err(value_err(s, "context", "contexts only apply to small_object_skew"));
    }
    spec.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(spec)
}

/// One row of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub name: String,
    pub config: RunConfig,
}

/// A comparison file: a base run plus per-row overrides and sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparePlan {
    pub base: RunConfig,
    rows: Vec<(String, Vec<Entry>)>,
    sweep: Vec<(Entry, Vec<String>)>,
    base_dir: PathBuf,
}

/// Row overrides may not change the trace: every row must replay the same
/// one.
fn check_override(e: &Entry) -> Result<(String, String), ConfigError> {
    let syntax = |msg: String| ConfigError::Syntax { line: e.line, msg };
    let (section, key) = e
        .key
        .split_once('.')
        .ok_or_else(|| syntax(format!("row key `{}` must be `section.key`", e.key)))?;
    if section == "workload" || (section == "run" && matches!(key, "trace" | "seed" | "out")) {
        return Err(syntax(format!(
            "`{}` would give this row a different trace or output; rows must share the base trace",
            e.key
        )));
    }
    Ok((section.to_string(), key.to_string()))
}

impl ComparePlan {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let ini = Ini::parse(text)?;
        let base = RunConfig::from_ini(&ini, base_dir)?;
        let mut rows = Vec::new();
        let mut sweep = Vec::new();
        for section in &ini.sections {
            if let Some(name) = section.name.strip_prefix("row:") {
                for e in &section.entries {
                    check_override(e)?;
                }
                rows.push((name.trim().to_string(), section.entries.clone()));
            } else if section.name == "sweep" {
                for e in &section.entries {
                    check_override(e)?;
                    let values: Vec<String> = e.value.split(',').map(|v| v.trim().to_string()).collect();
                    if values.iter().any(String::is_empty) {
                        return Err(ConfigError::Syntax {
                            line: e.line,
                            msg: "empty value in sweep list".into(),
                        });
                    }
                    sweep.push((e.clone(), values));
                }
            }
        }
        let plan = ComparePlan {
            base,
            rows,
            sweep,
            base_dir: base_dir.to_path_buf(),
        };
        plan.rows()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::parse(&text, path.parent().unwrap_or(Path::new(".")))?)
    }

    /// Every row crossed with every sweep combination, in file order.
    pub fn rows(&self) -> Result<Vec<CompareRow>, ConfigError> {
        let named: Vec<(String, Vec<Entry>)> = if self.rows.is_empty() {
            vec![("base".to_string(), Vec::new())]
        } else {
            self.rows.clone()
        };
        let mut combos: Vec<Vec<(Entry, String)>> = vec![Vec::new()];
        for (e, values) in &self.sweep {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    values.iter().map(move |v| {
                        let mut c = c.clone();
                        c.push((e.clone(), v.clone()));
                        c
                    })
                })
                .collect();
        }
        let mut out = Vec::new();
        for (name, entries) in &named {
            for combo in &combos {
                let mut cfg = self.base.clone();
                let mut label = name.clone();
                let overrides = entries.iter().map(|e| (e, e.value.as_str()));
                let swept = combo.iter().map(|(e, v)| (e, v.as_str()));
                for (e, value) in overrides.chain(swept) {
                    let (section, key) = check_override(e)?;
                    cfg.set(&section, &key, value, &self.base_dir)
                        .map_err(|err| at_line(err, e.line))?;
                }
                for (e, v) in combo {
                    let _ = write!(label, " {}={}", e.key, v);
                }
                if let Some(a) = entries.iter().find(|e| e.key == "allocator.strategy") {
                    // depth/regions given in the same row apply to the new strategy
                    let sec = Section {
                        name: "allocator".into(),
                        line: a.line,
                        entries: entries
                            .iter()
                            .filter_map(|e| {
                                e.key.strip_prefix("allocator.").map(|k| Entry {
                                    key: k.to_string(),
                                    ..e.clone()
                                })
                            })
                            .collect(),
                    };
                    cfg.finish_strategy(&sec)?;
                }
                cfg.sim_config(1)?;
                out.push(CompareRow {
                    name: label,
                    config: cfg,
                });
            }
        }
        Ok(out)
    }
}
