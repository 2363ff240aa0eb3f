//! Scenario configuration, experiment runner and CSV output.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{KMeansParams, DEFAULT_K_MAX};
use crate::error::{usage, Error, Result};
use crate::metrics::{slot_throughput, RunReport, DEFAULT_ZETA};
use crate::netmodel::{BsKind, MacroCell, SmallCell};
use crate::switching::{
    run_policy, Policy, PolicyInput, SwitchParams, ThesisMode, DEFAULT_B_TH, DEFAULT_ES_CAP,
};
use crate::traffic::{
    ingest_cdr, read_cdr, slot_count, synth_trace_with, GridMapping, SynthParams, TraceMetadata,
    TrafficTrace, DEFAULT_SLOT_MINUTES,
};

/// Largest cell for which a sweep still runs exhaustive search.
pub const DEFAULT_SWEEP_ES_MAX: usize = 20;

/// Share of each small-cell kind in a deployment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindMix {
    pub rrh: f64,
    pub micro: f64,
    pub pico: f64,
    pub femto: f64,
}

impl Default for KindMix {
    fn default() -> Self {
        Self {
            rrh: 0.25,
            micro: 0.25,
            pico: 0.25,
            femto: 0.25,
        }
    }
}

impl KindMix {
    fn shares(&self) -> [(BsKind, f64); 4] {
        [
            (BsKind::Rrh, self.rrh),
            (BsKind::Micro, self.micro),
            (BsKind::Pico, self.pico),
            (BsKind::Femto, self.femto),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let shares = self.shares();
        if shares.iter().any(|(_, p)| !p.is_finite() || *p < 0.0) {
            return Err(usage("kind proportions must be non-negative"));
        }
        let total: f64 = shares.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(usage(format!("kind proportions sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Kinds of the first `n` small cells. Each position goes to the kind
    /// furthest below its quota (`share * (i + 1) - count`), earlier kinds
    /// first on ties, so every prefix follows the mix as closely as rounding
    /// allows and a larger deployment extends a smaller one.
    pub fn sequence(&self, n: usize) -> Vec<BsKind> {
        let shares = self.shares();
        let mut counts = [0usize; 4];
        (0..n)
            .map(|i| {
                let mut best = 0;
                let mut best_gap = f64::NEG_INFINITY;
                for (k, (_, p)) in shares.iter().enumerate() {
                    let gap = p * (i + 1) as f64 - counts[k] as f64;
                    if *p > 0.0 && gap > best_gap {
                        best = k;
                        best_gap = gap;
                    }
                }
                counts[best] += 1;
                shares[best].0
            })
            .collect()
    }
}

/// Where the traffic comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum TraceSource {
    /// Seeded diurnal generator.
    Synthetic {
        #[serde(default)]
        base: Option<f64>,
        #[serde(default)]
        amplitude: Option<f64>,
        #[serde(default)]
        noise: Option<f64>,
        #[serde(default)]
        phase_jitter_hours: Option<f64>,
    },
    /// CDR activity CSV (`grid_id,slot_index,activity`). Grids are given
    /// explicitly or drawn with `mapping_seed`.
    Cdr {
        path: PathBuf,
        #[serde(default)]
        mbs_grids: Option<[u64; 2]>,
        #[serde(default)]
        sbs_grids: Option<Vec<u64>>,
        #[serde(default)]
        mapping_seed: Option<u64>,
    },
    /// A trace CSV (`slot,bs_id,load`) as written by `gen-trace`.
    Normalized { path: PathBuf },
}

impl Default for TraceSource {
    fn default() -> Self {
        TraceSource::Synthetic {
            base: None,
            amplitude: None,
            noise: None,
            phase_jitter_hours: None,
        }
    }
}

fn default_b_th() -> usize {
    DEFAULT_B_TH
}
fn default_policies() -> Vec<Policy> {
    Policy::ALL.to_vec()
}
fn default_slot_minutes() -> u32 {
    DEFAULT_SLOT_MINUTES
}
fn default_horizon_hours() -> u32 {
    24
}
fn default_es_cap() -> usize {
    DEFAULT_ES_CAP
}
fn default_sweep_es_max() -> usize {
    DEFAULT_SWEEP_ES_MAX
}
fn default_k_max() -> usize {
    DEFAULT_K_MAX
}
fn default_zeta() -> f64 {
    DEFAULT_ZETA
}
fn default_one() -> f64 {
    1.0
}

/// One experiment: a cell, a trace and the policies to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    pub n_sbs: usize,
    #[serde(default)]
    pub kind_mix: KindMix,
    #[serde(default = "default_b_th")]
    pub b_th: usize,
    #[serde(default)]
    pub trace: TraceSource,
    #[serde(default = "default_policies")]
    pub policies: Vec<Policy>,
    #[serde(default = "default_slot_minutes")]
    pub slot_minutes: u32,
    #[serde(default = "default_horizon_hours")]
    pub horizon_hours: u32,
    #[serde(default = "default_es_cap")]
    pub es_cap: usize,
    /// In sweeps, exhaustive search is dropped above this many small cells.
    #[serde(default = "default_sweep_es_max")]
    pub sweep_es_max: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default)]
    pub thesis_mode: ThesisMode,
    /// kg CO2 per kWh.
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default = "default_one")]
    pub mbs_max_load: f64,
    /// Off by default: wall-clock columns are then written as 0 so repeated
    /// runs produce identical files.
    #[serde(default)]
    pub record_wall_clock: bool,
}

impl Scenario {
    /// Defaults for everything but the number of small cells.
    pub fn new(n_sbs: usize) -> Self {
        Self {
            seed: 0,
            n_sbs,
            kind_mix: KindMix::default(),
            b_th: DEFAULT_B_TH,
            trace: TraceSource::default(),
            policies: default_policies(),
            slot_minutes: DEFAULT_SLOT_MINUTES,
            horizon_hours: 24,
            es_cap: DEFAULT_ES_CAP,
            sweep_es_max: DEFAULT_SWEEP_ES_MAX,
            k_max: DEFAULT_K_MAX,
            thesis_mode: ThesisMode::Greedy,
            zeta: DEFAULT_ZETA,
            mbs_max_load: 1.0,
            record_wall_clock: false,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| usage(format!("invalid scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    /// Reads a scenario file. Relative trace paths resolve against the
    /// file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut s = Self::from_toml_str(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        match &mut s.trace {
            TraceSource::Cdr { path, .. } | TraceSource::Normalized { path }
                if path.is_relative() =>
            {
                *path = dir.join(&*path);
            }
            _ => {}
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.kind_mix.validate()?;
        if self.b_th == 0 || self.b_th > 30 {
            return Err(usage(format!("b_th = {} outside 1..=30", self.b_th)));
        }
        if self.policies.is_empty() {
            return Err(usage("no policies selected"));
        }
        let distinct: BTreeSet<_> = self.policies.iter().collect();
        if distinct.len() != self.policies.len() {
            return Err(usage("a policy is listed twice"));
        }
        if self.policies.contains(&Policy::Es) && self.n_sbs > self.es_cap {
            return Err(usage(format!(
                "exhaustive search is limited to {} small cells, scenario has {}",
                self.es_cap, self.n_sbs
            )));
        }
        if self.k_max < 2 {
            return Err(usage("k_max must be at least 2"));
        }
        if !(self.zeta.is_finite() && self.zeta >= 0.0) {
            return Err(usage("zeta must be a non-negative number"));
        }
        self.n_slots()?;
        Ok(())
    }

    pub fn n_slots(&self) -> Result<usize> {
        slot_count(self.horizon_hours * 60, self.slot_minutes)
    }

    pub fn kinds(&self) -> Vec<BsKind> {
        self.kind_mix.sequence(self.n_sbs)
    }

    pub fn cell(&self) -> Result<MacroCell> {
        let small_cells = self
            .kinds()
            .into_iter()
            .enumerate()
            .map(|(id, kind)| SmallCell {
                id,
                kind,
                profile: kind.default_profile(),
            })
            .collect();
        MacroCell::new(
            BsKind::Macro.default_profile(),
            self.mbs_max_load,
            small_cells,
        )
    }

    pub fn switch_params(&self) -> SwitchParams {
        SwitchParams {
            b_th: self.b_th,
            seed: self.seed,
            es_cap: self.es_cap,
            k_max: self.k_max,
            thesis_mode: self.thesis_mode,
        }
    }

    /// Loads or generates the trace and checks it against the scenario.
    pub fn load_trace(&self, cell: &MacroCell) -> Result<(TrafficTrace, TraceMetadata)> {
        let n_slots = self.n_slots()?;
        let (trace, meta) = match &self.trace {
            TraceSource::Synthetic {
                base,
                amplitude,
                noise,
                phase_jitter_hours,
            } => {
                let d = SynthParams::default();
                let params = SynthParams {
                    base: base.unwrap_or(d.base),
                    amplitude: amplitude.unwrap_or(d.amplitude),
                    noise: noise.unwrap_or(d.noise),
                    phase_jitter_hours: phase_jitter_hours.unwrap_or(d.phase_jitter_hours),
                    slot_minutes: self.slot_minutes,
                };
                let trace =
                    synth_trace_with(&params, self.seed, n_slots, self.n_sbs, &cell.kinds())?;
                let meta = TraceMetadata {
                    source: "synthetic".into(),
                    normalization: "none (generated in [0, 1])".into(),
                    slot_minutes: self.slot_minutes,
                    n_slots,
                    n_sbs: self.n_sbs,
                    seed: Some(self.seed),
                    mapping: None,
                    raw_peaks: Vec::new(),
                };
                (trace, meta)
            }
            TraceSource::Cdr {
                path,
                mbs_grids,
                sbs_grids,
                mapping_seed,
            } => {
                let file = File::open(path)
                    .map_err(|e| usage(format!("cannot open {}: {e}", path.display())))?;
                let rows = read_cdr(std::io::BufReader::new(file))?;
                let mapping = match (mbs_grids, sbs_grids, mapping_seed) {
                    (Some(m), Some(s), None) => {
                        if s.len() < self.n_sbs {
                            return Err(usage(format!(
                                "{} small-cell grids listed for {} small cells",
                                s.len(),
                                self.n_sbs
                            )));
                        }
                        GridMapping::new(*m, s[..self.n_sbs].to_vec())?
                    }
                    (None, None, Some(seed)) => {
                        let grids: Vec<u64> = rows.iter().map(|r| r.grid_id).collect();
                        GridMapping::random(*seed, &grids, self.n_sbs)?
                    }
                    _ => {
                        return Err(usage(
                            "a CDR trace needs either mbs_grids and sbs_grids, or mapping_seed",
                        ))
                    }
                };
                ingest_cdr(&rows, &mapping, cell, self.slot_minutes)?
            }
            TraceSource::Normalized { path } => {
                let file = File::open(path)
                    .map_err(|e| usage(format!("cannot open {}: {e}", path.display())))?;
                let full =
                    TrafficTrace::read_csv(std::io::BufReader::new(file), self.slot_minutes)?;
                if full.n_sbs() < self.n_sbs {
                    return Err(usage(format!(
                        "trace has {} small cells, scenario needs {}",
                        full.n_sbs(),
                        self.n_sbs
                    )));
                }
                let trace = full.first_sbs(self.n_sbs)?;
                let meta = TraceMetadata {
                    source: format!("normalized trace {}", path.display()),
                    normalization: "as read".into(),
                    slot_minutes: self.slot_minutes,
                    n_slots: trace.n_slots(),
                    n_sbs: self.n_sbs,
                    seed: None,
                    mapping: None,
                    raw_peaks: Vec::new(),
                };
                (trace, meta)
            }
        };
        if trace.n_slots() != n_slots || trace.n_sbs() != self.n_sbs {
            return Err(usage(format!(
                "trace has {} slots x {} small cells, scenario expects {} x {}",
                trace.n_slots(),
                trace.n_sbs(),
                n_slots,
                self.n_sbs
            )));
        }
        Ok((trace, meta))
    }
}

/// Runs every scenario policy over every slot of `trace`.
///
/// Slots are independent and run in parallel; results are collected in slot
/// order. The all-on baseline is always computed so savings are defined even
/// when `aao` is not among the reported policies.
pub fn run_on_trace(
    scenario: &Scenario,
    cell: &MacroCell,
    trace: &TrafficTrace,
) -> Result<Vec<RunReport>> {
    if trace.n_sbs() != cell.n_small() {
        return Err(usage(format!(
            "trace has {} small cells, cell has {}",
            trace.n_sbs(),
            cell.n_small()
        )));
    }
    let params = scenario.switch_params();
    let run = |policy: Policy| -> Result<RunReport> {
        let start = Instant::now();
        let outputs = (0..trace.n_slots())
            .into_par_iter()
            .map(|t| {
                run_policy(
                    policy,
                    &PolicyInput::new(cell, trace.sbs_loads(t), trace.mbs_load(t)),
                    &params,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let elapsed = start.elapsed().as_secs_f64();
        let throughput = outputs
            .iter()
            .enumerate()
            .map(|(t, o)| slot_throughput(cell, trace.sbs_loads(t), trace.mbs_load(t), &o.decision))
            .collect::<Result<Vec<_>>>()?;
        Ok(RunReport::from_outputs(
            policy,
            cell.n_small(),
            trace.slot_minutes(),
            &outputs,
            throughput,
            if scenario.record_wall_clock {
                elapsed
            } else {
                0.0
            },
            scenario.zeta,
        ))
    };
    let baseline = run(Policy::Aao)?;
    scenario
        .policies
        .iter()
        .map(|&p| {
            let report = if p == Policy::Aao {
                baseline.clone()
            } else {
                run(p)?
            };
            report.with_baseline(&baseline)
        })
        .collect()
}

/// Result of one scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub trace_meta: TraceMetadata,
    pub reports: Vec<RunReport>,
}

pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioRun> {
    scenario.validate()?;
    let cell = scenario.cell()?;
    let (trace, trace_meta) = scenario.load_trace(&cell)?;
    let reports = run_on_trace(scenario, &cell, &trace)?;
    Ok(ScenarioRun {
        scenario: scenario.clone(),
        trace_meta,
        reports,
    })
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub n_sbs: usize,
    pub report: RunReport,
}

/// Runs `template` once per small-cell count. Exhaustive search is dropped
/// for counts above `template.sweep_es_max`.
pub fn sweep(n_values: &[usize], template: &Scenario) -> Result<Vec<SweepRow>> {
    if n_values.is_empty() {
        return Err(usage("no small-cell counts to sweep"));
    }
    if n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("sweep counts must be strictly ascending"));
    }
    let mut rows = Vec::new();
    for &n in n_values {
        let mut scenario = template.clone();
        scenario.n_sbs = n;
        if n > template.sweep_es_max.min(template.es_cap) {
            scenario.policies.retain(|&p| p != Policy::Es);
        }
        if scenario.policies.is_empty() {
            continue;
        }
        let run = run_scenario(&scenario)?;
        rows.extend(
            run.reports
                .into_iter()
                .map(|report| SweepRow { n_sbs: n, report }),
        );
    }
    Ok(rows)
}

pub const RESULTS_HEADER: [&str; 6] = [
    "policy",
    "slot",
    "power_w",
    "mbs_load",
    "n_off",
    "throughput_rbe",
];
pub const SUMMARY_HEADER: [&str; 6] = [
    "policy",
    "total_energy_j",
    "energy_saved_j",
    "co2_saved_kg",
    "wall_clock_s",
    "candidates",
];
pub const SWEEP_HEADER: [&str; 7] = [
    "n_sbs",
    "policy",
    "total_energy_j",
    "energy_saved_j",
    "co2_saved_kg",
    "wall_clock_s",
    "candidates",
];

pub fn write_results_csv<W: Write>(reports: &[RunReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULTS_HEADER)?;
    for r in reports {
        for t in 0..r.n_slots() {
            w.write_record([
                r.policy.name().to_string(),
                t.to_string(),
                r.per_slot_power[t].to_string(),
                r.per_slot_mbs_load[t].to_string(),
                r.per_slot_n_off[t].to_string(),
                r.per_slot_throughput[t].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn summary_fields(r: &RunReport) -> [String; 5] {
    [
        r.total_energy.to_string(),
        r.energy_saved_vs_aao.to_string(),
        r.co2_saved_kg.to_string(),
        r.wall_clock.to_string(),
        r.candidates_evaluated.to_string(),
    ]
}

pub fn write_summary_csv<W: Write>(reports: &[RunReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_HEADER)?;
    for r in reports {
        let mut rec = vec![r.policy.name().to_string()];
        rec.extend(summary_fields(r));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_HEADER)?;
    for row in rows {
        let mut rec = vec![row.n_sbs.to_string(), row.report.policy.name().to_string()];
        rec.extend(summary_fields(&row.report));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Effective settings and unit conventions of a run, written as JSON.
#[derive(Debug, Serialize)]
pub struct RunMetadata<'a> {
    pub scenario: &'a Scenario,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<&'a TraceMetadata>,
    pub kinds: Vec<BsKind>,
    pub kmeans: KMeansParams,
    pub co2_unit: &'static str,
    pub throughput_unit: &'static str,
    pub energy_unit: &'static str,
}

impl<'a> RunMetadata<'a> {
    pub fn new(scenario: &'a Scenario, trace: Option<&'a TraceMetadata>) -> Self {
        Self {
            scenario,
            trace,
            kinds: scenario.kinds(),
            kmeans: KMeansParams::default(),
            co2_unit: "kg CO2 = zeta [kg/kWh] * energy [kWh]",
            throughput_unit: "resource-block equivalents per slot",
            energy_unit: "joules",
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes `results.csv`, `summary.csv` and `metadata.json` into `dir`.
pub fn write_run(dir: &Path, run: &ScenarioRun) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_results_csv(&run.reports, create(dir, "results.csv")?)?;
    write_summary_csv(&run.reports, create(dir, "summary.csv")?)?;
    write_json(
        &RunMetadata::new(&run.scenario, Some(&run.trace_meta)),
        &dir.join("metadata.json"),
    )
}

/// Writes `sweep.csv` and `metadata.json` into `dir`.
pub fn write_sweep(
    dir: &Path,
    template: &Scenario,
    n_values: &[usize],
    rows: &[SweepRow],
) -> Result<()> {
    #[derive(Serialize)]
    struct SweepMetadata<'a> {
        n_values: &'a [usize],
        #[serde(flatten)]
        run: RunMetadata<'a>,
    }
    fs::create_dir_all(dir)?;
    write_sweep_csv(rows, create(dir, "sweep.csv")?)?;
    let meta = SweepMetadata {
        n_values,
        run: RunMetadata::new(template, None),
    };
    write_json(&meta, &dir.join("metadata.json"))
}
