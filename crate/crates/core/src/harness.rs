//! Experiment driver: sample graph and cascade, filter degenerate trials,
//! run every detector on the same trial, aggregate and write reports.
//!
//! Sample `k` draws all of its randomness from seeds derived from
//! `(master_seed, k)`, so the set of valid trials, and every report byte,
//! is independent of the number of worker threads.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::candidate_set;
use crate::detectors::{DetectorSpec, StationaryMode, TrialContext};
use crate::diffusion::{AttemptOrder, Cascade, Simulator};
use crate::error::{Error, Result};
use crate::graph::{
    assign_weights, generate_random_graph, load_edge_list, RandomGraphParams, WeightedDigraph,
};
use crate::seed;

const BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSource {
    /// A fresh random graph per sample.
    Random {
        n: usize,
        density: f64,
        p_range: f64,
    },
    /// One fixed graph. Unweighted lists get uniform weights scaled to
    /// `target_mean_wout`; weighted lists are used as given unless a target
    /// is set.
    EdgeList {
        path: PathBuf,
        #[serde(default)]
        target_mean_wout: Option<f64>,
    },
}

fn default_trials() -> usize {
    1000
}

fn default_min_active() -> usize {
    20
}

fn default_max_samples() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub graph: GraphSource,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_min_active")]
    pub min_active: usize,
    /// Samples drawn before giving up on the trial quota.
    #[serde(default = "default_max_samples")]
    pub max_samples: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(rename = "detector")]
    pub detectors: Vec<DetectorSpec>,
    /// Worker threads; absent means the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!(
                "bad experiment name {:?}",
                self.name
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.min_active == 0 {
            return Err(Error::Config("min_active must be at least 1".into()));
        }
        if self.detectors.is_empty() {
            return Err(Error::Config(format!("{}: no detectors", self.name)));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for d in &self.detectors {
            d.validate()?;
            if !seen.insert(d.label()) {
                return Err(Error::Config(format!("duplicate detector {}", d.label())));
            }
        }
        if let GraphSource::Random {
            n,
            density,
            p_range,
        } = self.graph
        {
            RandomGraphParams {
                n,
                density,
                p_range,
                seed: 0,
            }
            .validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

impl Format {
    fn csv(self) -> bool {
        self != Format::Json
    }

    fn json(self) -> bool {
        self != Format::Csv
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
    /// Also write per-detector wall times (not reproducible).
    #[serde(default)]
    pub timings: bool,
}

/// A config file: one `[output]` table and any number of `[[experiment]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub output: OutputConfig,
    #[serde(rename = "experiment")]
    pub experiments: Vec<ExperimentConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.experiments.is_empty() {
            return Err(Error::Config("no [[experiment]] tables".into()));
        }
        let mut names = HashSet::new();
        for e in &cfg.experiments {
            e.validate()?;
            if !names.insert(e.name.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate experiment name {}",
                    e.name
                )));
            }
        }
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.output.dir.is_relative() {
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        for e in &mut cfg.experiments {
            if let GraphSource::EdgeList { path, .. } = &mut e.graph {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    TooSmall,
    SingletonCandidates,
}

impl Rejection {
    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::TooSmall => "too_small",
            Rejection::SingletonCandidates => "singleton_candidates",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorOutcome {
    pub detector: String,
    pub predicted: usize,
    pub hit: bool,
    #[serde(default)]
    pub rerouted: bool,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sample_index: u64,
    pub trial_seed: u64,
    pub graph_fingerprint: u64,
    pub source: usize,
    pub active: usize,
    /// `|A'|`; absent when the trial was rejected before it was computed.
    pub candidates: Option<usize>,
    pub rejection: Option<Rejection>,
    pub results: Vec<DetectorOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSummary {
    pub detector: String,
    pub method: String,
    /// `direct`, `random_walk`, or `none` for non-chain methods.
    pub mode: String,
    pub steps: Option<u64>,
    pub successes: u64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub experiment: String,
    pub master_seed: u64,
    pub valid_trials: u64,
    pub total_samples: u64,
    pub rejected_too_small: u64,
    pub rejected_singleton: u64,
    pub mean_active: f64,
    pub mean_candidates: f64,
    pub detectors: Vec<DetectorSummary>,
}

impl ResultsTable {
    pub fn successes(&self, label: &str) -> Option<u64> {
        self.detectors
            .iter()
            .find(|d| d.detector == label)
            .map(|d| d.successes)
    }

    pub fn too_small_fraction(&self) -> f64 {
        self.rejected_too_small as f64 / self.total_samples as f64
    }

    pub fn singleton_fraction(&self) -> f64 {
        self.rejected_singleton as f64 / self.total_samples as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub table: ResultsTable,
    pub records: Vec<TrialRecord>,
}

/// Per-sample seeds, each derived from the sample's trial seed.
#[derive(Debug, Clone, Copy)]
pub struct SampleSeeds {
    pub trial: u64,
    pub graph: u64,
    pub source: u64,
    pub cascade: u64,
}

impl SampleSeeds {
    pub fn new(master_seed: u64, index: u64) -> Self {
        let trial = seed::derive_labeled(master_seed, "sample", &[index]);
        SampleSeeds {
            trial,
            graph: seed::derive_labeled(trial, "graph", &[]),
            source: seed::derive_labeled(trial, "source", &[]),
            cascade: seed::derive_labeled(trial, "cascade", &[]),
        }
    }

    pub fn detector(&self, label: &str) -> u64 {
        seed::derive_labeled(self.trial, "detector", &[seed::fnv1a(label.as_bytes())])
    }
}

enum Graphs {
    Random(RandomGraphParams),
    Fixed(Arc<WeightedDigraph>),
}

impl Graphs {
    fn prepare(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(match &cfg.graph {
            &GraphSource::Random {
                n,
                density,
                p_range,
            } => Graphs::Random(RandomGraphParams {
                n,
                density,
                p_range,
                seed: 0,
            }),
            GraphSource::EdgeList {
                path,
                target_mean_wout,
            } => {
                let list = load_edge_list(&fs::read_to_string(path)?)?;
                let g = match target_mean_wout {
                    Some(t) => assign_weights(
                        &list,
                        *t,
                        seed::derive_labeled(cfg.master_seed, "weights", &[]),
                    )?,
                    None => list.into_weighted()?,
                };
                Graphs::Fixed(Arc::new(g))
            }
        })
    }

    fn get(&self, seeds: &SampleSeeds) -> Result<Arc<WeightedDigraph>> {
        match self {
            Graphs::Random(p) => Ok(Arc::new(generate_random_graph(&RandomGraphParams {
                seed: seeds.graph,
                ..*p
            })?)),
            Graphs::Fixed(g) => Ok(Arc::clone(g)),
        }
    }
}

struct Sample {
    graph: Arc<WeightedDigraph>,
    source: usize,
    cascade: Cascade,
}

fn draw_sample(graphs: &Graphs, seeds: &SampleSeeds, sim: &mut Simulator) -> Result<Sample> {
    let graph = graphs.get(seeds)?;
    let source = seed::stream(seeds.source).gen_range(0..graph.node_count());
    let cascade = sim.simulate(&graph, source, seeds.cascade, AttemptOrder::Ascending)?;
    Ok(Sample {
        graph,
        source,
        cascade,
    })
}

fn screen(
    cfg: &ExperimentConfig,
    graphs: &Graphs,
    index: u64,
    sim: &mut Simulator,
) -> Result<TrialRecord> {
    let seeds = SampleSeeds::new(cfg.master_seed, index);
    let s = draw_sample(graphs, &seeds, sim)?;
    let active = s.cascade.active_count();
    let mut record = TrialRecord {
        sample_index: index,
        trial_seed: seeds.trial,
        graph_fingerprint: s.graph.fingerprint(),
        source: s.source,
        active,
        candidates: None,
        rejection: None,
        results: Vec::new(),
    };
    if active < cfg.min_active {
        record.rejection = Some(Rejection::TooSmall);
    } else {
        let cands = candidate_set(&s.graph, &s.cascade.active())?;
        record.candidates = Some(cands.len());
        if cands.is_singleton {
            record.rejection = Some(Rejection::SingletonCandidates);
        }
    }
    Ok(record)
}

fn run_detectors(cfg: &ExperimentConfig, graphs: &Graphs, record: &mut TrialRecord) -> Result<()> {
    let seeds = SampleSeeds::new(cfg.master_seed, record.sample_index);
    let s = draw_sample(graphs, &seeds, &mut Simulator::new())?;
    debug_assert_eq!(s.graph.fingerprint(), record.graph_fingerprint);
    let ctx = TrialContext::new(&s.graph, &s.cascade.active())?;
    for spec in &cfg.detectors {
        let label = spec.label();
        let spec = spec.with_seed(seeds.detector(&label));
        let start = Instant::now();
        let sv = ctx.detect(&spec)?;
        let predicted = sv.predicted();
        record.results.push(DetectorOutcome {
            detector: label,
            predicted,
            hit: predicted == s.source,
            rerouted: sv.rerouted,
            wall_time: start.elapsed(),
        });
    }
    Ok(())
}

/// Runs one experiment to its trial quota.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| run_in_pool(cfg)),
        None => run_in_pool(cfg),
    }
}

fn run_in_pool(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let graphs = Graphs::prepare(cfg)?;

    // Screening: batches in parallel, consumed in index order.
    let mut records: Vec<TrialRecord> = Vec::new();
    let mut valid = 0usize;
    let mut next = 0u64;
    'outer: while valid < cfg.trials {
        if next >= cfg.max_samples {
            let count =
                |r: Rejection| records.iter().filter(|t| t.rejection == Some(r)).count() as u64;
            return Err(Error::QuotaUnreachable {
                wanted: cfg.trials,
                valid,
                samples: next,
                too_small: count(Rejection::TooSmall),
                singleton: count(Rejection::SingletonCandidates),
            });
        }
        let end = (next + BATCH as u64).min(cfg.max_samples);
        let batch = (next..end)
            .into_par_iter()
            .map_init(Simulator::new, |sim, k| screen(cfg, &graphs, k, sim))
            .collect::<Result<Vec<_>>>()?;
        next = end;
        for r in batch {
            let ok = r.rejection.is_none();
            records.push(r);
            if ok {
                valid += 1;
                if valid == cfg.trials {
                    break 'outer;
                }
            }
        }
    }

    records
        .par_iter_mut()
        .filter(|r| r.rejection.is_none())
        .try_for_each(|r| run_detectors(cfg, &graphs, r))?;

    Ok(ExperimentResult {
        table: summarize(cfg, &records),
        records,
    })
}

fn summarize(cfg: &ExperimentConfig, records: &[TrialRecord]) -> ResultsTable {
    let valid: Vec<&TrialRecord> = records.iter().filter(|r| r.rejection.is_none()).collect();
    let n_valid = valid.len() as u64;
    let mean = |f: &dyn Fn(&TrialRecord) -> usize| {
        if valid.is_empty() {
            0.0
        } else {
            valid.iter().map(|r| f(r) as f64).sum::<f64>() / valid.len() as f64
        }
    };
    let detectors = cfg
        .detectors
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let (mode, steps) = match (spec.method.scheme(), spec.mode) {
                (None, _) => ("none", None),
                (Some(_), StationaryMode::Direct) => ("direct", None),
                (Some(_), StationaryMode::RandomWalk { steps }) => ("random_walk", Some(steps)),
            };
            DetectorSummary {
                detector: spec.label(),
                method: spec.method.to_string(),
                mode: mode.to_string(),
                steps,
                successes: valid.iter().filter(|r| r.results[k].hit).count() as u64,
                trials: n_valid,
            }
        })
        .collect();
    let count = |r: Rejection| records.iter().filter(|t| t.rejection == Some(r)).count() as u64;
    ResultsTable {
        experiment: cfg.name.clone(),
        master_seed: cfg.master_seed,
        valid_trials: n_valid,
        total_samples: records.len() as u64,
        rejected_too_small: count(Rejection::TooSmall),
        rejected_singleton: count(Rejection::SingletonCandidates),
        mean_active: mean(&|r| r.active),
        mean_candidates: mean(&|r| r.candidates.unwrap_or(0)),
        detectors,
    }
}

const SUMMARY_HEADER: &str = "method,mode,steps,successes,trials";

fn summary_rows(table: &ResultsTable, prefix: Option<&str>, out: &mut String) {
    for d in &table.detectors {
        if let Some(p) = prefix {
            let _ = write!(out, "{p},");
        }
        let steps = d.steps.map(|s| s.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            d.method, d.mode, steps, d.successes, d.trials
        );
    }
}

/// Per-detector success counts as CSV.
pub fn summary_csv(table: &ResultsTable) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    summary_rows(table, None, &mut out);
    out
}

/// One row per (sample, detector); rejected samples get one row with empty
/// detector columns.
pub fn trials_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(
        "sample_index,trial_seed,graph_fingerprint,source,active,candidates,rejection,detector,predicted,hit,rerouted\n",
    );
    for r in records {
        let head = format!(
            "{},{},{:016x},{},{},{},{}",
            r.sample_index,
            r.trial_seed,
            r.graph_fingerprint,
            r.source,
            r.active,
            r.candidates.map(|c| c.to_string()).unwrap_or_default(),
            r.rejection.map(Rejection::as_str).unwrap_or(""),
        );
        if r.results.is_empty() {
            let _ = writeln!(out, "{head},,,,");
        }
        for d in &r.results {
            let _ = writeln!(
                out,
                "{head},{},{},{},{}",
                d.detector, d.predicted, d.hit as u8, d.rerouted as u8
            );
        }
    }
    out
}

fn timings_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("sample_index,detector,wall_time_us\n");
    for r in records {
        for d in &r.results {
            let _ = writeln!(
                out,
                "{},{},{}",
                r.sample_index,
                d.detector,
                d.wall_time.as_micros()
            );
        }
    }
    out
}

/// Writes one experiment's reports into `out.dir`; returns the paths.
pub fn emit_report(result: &ExperimentResult, out: &OutputConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&out.dir)?;
    let name = &result.table.experiment;
    let mut written = Vec::new();
    let mut put = |file: String, body: String| -> Result<()> {
        let path = out.dir.join(file);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    if out.format.csv() {
        put(format!("{name}_summary.csv"), summary_csv(&result.table))?;
        put(format!("{name}_trials.csv"), trials_csv(&result.records))?;
    }
    if out.format.json() {
        put(
            format!("{name}.json"),
            serde_json::to_string_pretty(result)? + "\n",
        )?;
    }
    if out.timings {
        put(format!("{name}_timings.csv"), timings_csv(&result.records))?;
    }
    Ok(written)
}

/// Merged summary across experiments, with a leading `experiment` column.
pub fn merged_summary_csv(tables: &[ResultsTable]) -> String {
    let mut out = format!("experiment,{SUMMARY_HEADER}\n");
    for t in tables {
        summary_rows(t, Some(&t.experiment), &mut out);
    }
    out
}

/// Runs every experiment in `cfg` and writes per-experiment reports plus a
/// merged summary.
pub fn run_all(cfg: &RunConfig) -> Result<Vec<ResultsTable>> {
    let mut tables = Vec::new();
    for e in &cfg.experiments {
        let result = run_experiment(e)?;
        emit_report(&result, &cfg.output)?;
        tables.push(result.table);
    }
    if cfg.output.format.csv() {
        fs::write(
            cfg.output.dir.join("summary.csv"),
            merged_summary_csv(&tables),
        )?;
    }
    if cfg.output.format.json() {
        fs::write(
            cfg.output.dir.join("summary.json"),
            serde_json::to_string_pretty(&tables)? + "\n",
        )?;
    }
    Ok(tables)
}
