//! Slot-indexed traffic traces: CDR ingestion, normalization and a seeded
//! synthetic diurnal generator.
//!
//! CDR input is CSV with header `grid_id,slot_index,activity`. Normalized
//! traces are written as `slot,bs_id,load`, where `bs_id` 0 is the macro BS
//! and `j + 1` is small cell `j`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::netmodel::{check_load, BsKind, MacroCell};

pub const DEFAULT_SLOT_MINUTES: u32 = 10;
pub const MINUTES_PER_DAY: u32 = 24 * 60;

/// Number of slots of `slot_minutes` in `horizon_minutes`; the horizon must
/// divide evenly.
pub fn slot_count(horizon_minutes: u32, slot_minutes: u32) -> Result<usize> {
    if slot_minutes == 0 || horizon_minutes == 0 {
        return Err(usage("horizon and slot length must be positive"));
    }
    if !horizon_minutes.is_multiple_of(slot_minutes) {
        return Err(usage(format!(
            "a {horizon_minutes}-minute horizon does not split into {slot_minutes}-minute slots"
        )));
    }
    Ok((horizon_minutes / slot_minutes) as usize)
}

/// Normalized loads of the macro BS and every small cell, per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficTrace {
    slot_minutes: u32,
    n_sbs: usize,
    mbs: Vec<f64>,
    /// Row-major `[n_slots x n_sbs]`.
    sbs: Vec<f64>,
}

impl TrafficTrace {
    /// `sbs_rows[t][j]` is the load of small cell `j` in slot `t`.
    pub fn new(slot_minutes: u32, mbs: Vec<f64>, sbs_rows: Vec<Vec<f64>>) -> Result<Self> {
        if sbs_rows.len() != mbs.len() {
            return Err(usage(format!(
                "{} macro slots but {} small-cell rows",
                mbs.len(),
                sbs_rows.len()
            )));
        }
        let n_sbs = sbs_rows.first().map_or(0, Vec::len);
        if sbs_rows.iter().any(|r| r.len() != n_sbs) {
            return Err(usage("small-cell rows differ in length"));
        }
        Self::from_flat(slot_minutes, n_sbs, mbs, sbs_rows.concat())
    }

    fn from_flat(slot_minutes: u32, n_sbs: usize, mbs: Vec<f64>, sbs: Vec<f64>) -> Result<Self> {
        if slot_minutes == 0 {
            return Err(usage("slot length must be positive"));
        }
        if mbs.is_empty() {
            return Err(usage("a trace needs at least one slot"));
        }
        for &v in &mbs {
            check_load(v, "macro")?;
        }
        for &v in &sbs {
            check_load(v, "small-cell")?;
        }
        Ok(Self {
            slot_minutes,
            n_sbs,
            mbs,
            sbs,
        })
    }

    pub fn n_slots(&self) -> usize {
        self.mbs.len()
    }

    pub fn n_sbs(&self) -> usize {
        self.n_sbs
    }

    pub fn slot_minutes(&self) -> u32 {
        self.slot_minutes
    }

    pub fn horizon_minutes(&self) -> u64 {
        self.n_slots() as u64 * u64::from(self.slot_minutes)
    }

    pub fn mbs_load(&self, slot: usize) -> f64 {
        self.mbs[slot]
    }

    pub fn mbs_series(&self) -> &[f64] {
        &self.mbs
    }

    pub fn sbs_loads(&self, slot: usize) -> &[f64] {
        &self.sbs[slot * self.n_sbs..(slot + 1) * self.n_sbs]
    }

    pub fn sbs_series(&self, id: usize) -> Vec<f64> {
        (0..self.n_slots())
            .map(|t| self.sbs[t * self.n_sbs + id])
            .collect()
    }

    /// The same trace restricted to the first `n` small cells.
    pub fn first_sbs(&self, n: usize) -> Result<Self> {
        if n > self.n_sbs {
            return Err(usage(format!("trace has only {} small cells", self.n_sbs)));
        }
        let sbs = (0..self.n_slots())
            .flat_map(|t| self.sbs_loads(t)[..n].iter().copied())
            .collect();
        Self::from_flat(self.slot_minutes, n, self.mbs.clone(), sbs)
    }

    /// The same trace with slots reordered: slot `t` of the result is slot
    /// `order[t]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n_slots()];
        if order.len() != self.n_slots()
            || order
                .iter()
                .any(|&t| t >= seen.len() || std::mem::replace(&mut seen[t], true))
        {
            return Err(usage("slot order is not a permutation"));
        }
        let mbs = order.iter().map(|&t| self.mbs[t]).collect();
        let sbs = order
            .iter()
            .flat_map(|&t| self.sbs_loads(t).iter().copied())
            .collect();
        Self::from_flat(self.slot_minutes, self.n_sbs, mbs, sbs)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["slot", "bs_id", "load"])?;
        for t in 0..self.n_slots() {
            w.write_record([t.to_string(), "0".into(), self.mbs[t].to_string()])?;
            for (j, v) in self.sbs_loads(t).iter().enumerate() {
                w.write_record([t.to_string(), (j + 1).to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a trace written by [`TrafficTrace::write_csv`]. Every
    /// `(slot, bs_id)` pair must occur exactly once.
    pub fn read_csv<R: Read>(reader: R, slot_minutes: u32) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            slot: usize,
            bs_id: usize,
            load: f64,
        }
        let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut n_slots = 0;
        let mut n_bs = 0;
        for row in csv::Reader::from_reader(reader).deserialize::<Row>() {
            let row = row.map_err(|e| Error::Format(e.to_string()))?;
            n_slots = n_slots.max(row.slot + 1);
            n_bs = n_bs.max(row.bs_id + 1);
            if cells.insert((row.slot, row.bs_id), row.load).is_some() {
                return Err(Error::Format(format!(
                    "duplicate row for slot {} bs {}",
                    row.slot, row.bs_id
                )));
            }
        }
        if cells.len() != n_slots * n_bs {
            return Err(Error::Format(
                "trace CSV is missing (slot, bs_id) rows".into(),
            ));
        }
        let mut mbs = Vec::with_capacity(n_slots);
        let mut sbs = Vec::with_capacity(n_slots * n_bs.saturating_sub(1));
        for ((_, bs), v) in cells {
            if bs == 0 {
                mbs.push(v);
            } else {
                sbs.push(v);
            }
        }
        Self::from_flat(slot_minutes, n_bs.saturating_sub(1), mbs, sbs)
    }
}

/// Which CDR grids feed which base station. The macro BS combines two grids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMapping {
    pub mbs_grids: [u64; 2],
    pub sbs_grids: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl GridMapping {
    pub fn new(mbs_grids: [u64; 2], sbs_grids: Vec<u64>) -> Result<Self> {
        let m = Self {
            mbs_grids,
            sbs_grids,
            seed: None,
        };
        m.validate()?;
        Ok(m)
    }

    /// Draws `2 + n_sbs` distinct grids from `available` with a seeded shuffle.
    pub fn random(seed: u64, available: &[u64], n_sbs: usize) -> Result<Self> {
        let mut pool: Vec<u64> = available
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if pool.len() < n_sbs + 2 {
            return Err(usage(format!(
                "{} distinct grids cannot feed {} base stations",
                pool.len(),
                n_sbs + 1
            )));
        }
        pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok(Self {
            mbs_grids: [pool[0], pool[1]],
            sbs_grids: pool[2..2 + n_sbs].to_vec(),
            seed: Some(seed),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for g in self.mbs_grids.iter().chain(&self.sbs_grids) {
            if !seen.insert(*g) {
                return Err(usage(format!("grid {g} is mapped twice")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdrRecord {
    pub grid_id: u64,
    pub slot_index: usize,
    pub activity: f64,
}

pub fn read_cdr<R: Read>(reader: R) -> Result<Vec<CdrRecord>> {
    csv::Reader::from_reader(reader)
        .deserialize::<CdrRecord>()
        .map(|r| {
            let rec = r.map_err(|e| Error::Format(e.to_string()))?;
            if !rec.activity.is_finite() || rec.activity < 0.0 {
                return Err(Error::Format(format!(
                    "grid {} slot {}: activity {} is not a non-negative number",
                    rec.grid_id, rec.slot_index, rec.activity
                )));
            }
            Ok(rec)
        })
        .collect()
}

/// How a trace was produced; written next to the trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMetadata {
    pub source: String,
    pub normalization: String,
    pub slot_minutes: u32,
    pub n_slots: usize,
    pub n_sbs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mapping: Option<GridMapping>,
    /// Raw peak of each series before normalization, macro first.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub raw_peaks: Vec<f64>,
}

pub const PEAK_NORMALIZATION: &str = "per-bs peak: load = raw / max(raw over the trace)";

/// Fills `None` gaps by linear interpolation between the nearest known
/// neighbours; leading and trailing gaps copy the nearest known value.
pub fn interpolate_gaps(series: &[Option<f64>]) -> Option<Vec<f64>> {
    let known: Vec<(usize, f64)> = series
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    let (&(first_i, first_v), &(last_i, last_v)) = (known.first()?, known.last()?);
    let mut out = vec![0.0; series.len()];
    for o in out.iter_mut().take(first_i + 1) {
        *o = first_v;
    }
    for w in known.windows(2) {
        let ((a, va), (b, vb)) = (w[0], w[1]);
        for (i, o) in out.iter_mut().enumerate().take(b + 1).skip(a) {
            *o = va + (vb - va) * (i - a) as f64 / (b - a) as f64;
        }
    }
    for o in out.iter_mut().skip(last_i) {
        *o = last_v;
    }
    Some(out)
}

/// Divides by the series maximum so the peak load is 1. An all-zero series
/// stays zero.
pub fn normalize_peak(raw: &[f64]) -> (Vec<f64>, f64) {
    let peak = raw.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        (raw.iter().map(|v| v / peak).collect(), peak)
    } else {
        (raw.to_vec(), peak)
    }
}

/// Builds a normalized trace from CDR records.
///
/// The macro series sums its two grids, each small cell takes its own grid.
/// Several records for the same grid and slot are summed. Slots missing for a
/// grid are interpolated from its neighbours.
pub fn ingest_cdr(
    rows: &[CdrRecord],
    mapping: &GridMapping,
    cell: &MacroCell,
    slot_minutes: u32,
) -> Result<(TrafficTrace, TraceMetadata)> {
    mapping.validate()?;
    if mapping.sbs_grids.len() != cell.n_small() {
        return Err(usage(format!(
            "mapping covers {} small cells, the cell has {}",
            mapping.sbs_grids.len(),
            cell.n_small()
        )));
    }
    let wanted: BTreeSet<u64> = mapping
        .mbs_grids
        .iter()
        .chain(&mapping.sbs_grids)
        .copied()
        .collect();
    let mut per_grid: BTreeMap<u64, BTreeMap<usize, f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| wanted.contains(&r.grid_id)) {
        *per_grid
            .entry(r.grid_id)
            .or_default()
            .entry(r.slot_index)
            .or_insert(0.0) += r.activity;
    }
    let n_slots = per_grid
        .values()
        .filter_map(|s| s.keys().next_back())
        .max()
        .map_or(0, |&m| m + 1);

    let series = |grid: u64| -> Result<Vec<f64>> {
        let slots = per_grid
            .get(&grid)
            .ok_or_else(|| usage(format!("grid {grid} does not occur in the data")))?;
        let sparse: Vec<Option<f64>> = (0..n_slots).map(|t| slots.get(&t).copied()).collect();
        Ok(interpolate_gaps(&sparse).expect("grid has at least one record"))
    };

    let a = series(mapping.mbs_grids[0])?;
    let b = series(mapping.mbs_grids[1])?;
    let mbs_raw: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let (mbs, mbs_peak) = normalize_peak(&mbs_raw);
    let mut peaks = vec![mbs_peak];
    let mut columns = Vec::with_capacity(mapping.sbs_grids.len());
    for &g in &mapping.sbs_grids {
        let (col, peak) = normalize_peak(&series(g)?);
        peaks.push(peak);
        columns.push(col);
    }
    let sbs = (0..n_slots)
        .flat_map(|t| columns.iter().map(move |c| c[t]))
        .collect();
    let trace = TrafficTrace::from_flat(slot_minutes, columns.len(), mbs, sbs)?;
    let meta = TraceMetadata {
        source: "cdr".into(),
        normalization: PEAK_NORMALIZATION.into(),
        slot_minutes,
        n_slots,
        n_sbs: trace.n_sbs(),
        seed: mapping.seed,
        mapping: Some(mapping.clone()),
        raw_peaks: peaks,
    };
    Ok((trace, meta))
}

/// Shape and noise of the synthetic diurnal generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    /// Load at the daily trough.
    pub base: f64,
    /// Peak-minus-trough swing before per-station scaling.
    pub amplitude: f64,
    /// Half-width of the uniform per-slot noise.
    pub noise: f64,
    /// Half-width of the uniform per-station shift of the daily curve, hours.
    pub phase_jitter_hours: f64,
    pub slot_minutes: u32,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            base: 0.02,
            amplitude: 0.9,
            noise: 0.04,
            phase_jitter_hours: 1.5,
            slot_minutes: DEFAULT_SLOT_MINUTES,
        }
    }
}

const TROUGH_HOUR: f64 = 4.0;
const PEAK_HOUR: f64 = 20.0;

/// Daily activity curve in [0, 1]: minimum at 04:00, maximum at 20:00, a slow
/// rise through the day and a faster fall overnight.
pub fn diurnal_shape(hour: f64) -> f64 {
    use std::f64::consts::PI;
    let h = hour.rem_euclid(24.0);
    let since_trough = (h - TROUGH_HOUR).rem_euclid(24.0);
    let rise = PEAK_HOUR - TROUGH_HOUR;
    if since_trough <= rise {
        0.5 - 0.5 * (PI * since_trough / rise).cos()
    } else {
        let fall = 24.0 - rise;
        0.5 + 0.5 * (PI * (since_trough - rise) / fall).cos()
    }
}

/// Relative peak traffic of each kind; smaller cells see less traffic.
fn kind_scale(kind: BsKind) -> f64 {
    match kind {
        BsKind::Macro | BsKind::Rrh => 1.0,
        BsKind::Micro => 0.9,
        BsKind::Pico => 0.8,
        BsKind::Femto => 0.7,
    }
}

fn synth_series(
    params: &SynthParams,
    seed: u64,
    stream: u64,
    kind: BsKind,
    n_slots: usize,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let level = params.amplitude * kind_scale(kind) * rng.gen_range(0.6..=1.0);
    let shift = if params.phase_jitter_hours > 0.0 {
        rng.gen_range(-params.phase_jitter_hours..=params.phase_jitter_hours)
    } else {
        0.0
    };
    let slot_hours = f64::from(params.slot_minutes) / 60.0;
    (0..n_slots)
        .map(|t| {
            let noise = if params.noise > 0.0 {
                rng.gen_range(-params.noise..=params.noise)
            } else {
                0.0
            };
            let v = params.base + level * diurnal_shape(t as f64 * slot_hours - shift) + noise;
            v.clamp(0.0, 1.0)
        })
        .collect()
}

pub fn synth_trace(
    seed: u64,
    n_slots: usize,
    n_sbs: usize,
    kinds: &[BsKind],
) -> Result<TrafficTrace> {
    synth_trace_with(&SynthParams::default(), seed, n_slots, n_sbs, kinds)
}

/// Seeded synthetic trace. Each station draws from its own ChaCha stream
/// (macro on stream 0, small cell `j` on stream `j + 1`), so the first `n`
/// small cells do not depend on how many more are generated.
pub fn synth_trace_with(
    params: &SynthParams,
    seed: u64,
    n_slots: usize,
    n_sbs: usize,
    kinds: &[BsKind],
) -> Result<TrafficTrace> {
    if n_slots == 0 {
        return Err(usage("a trace needs at least one slot"));
    }
    if kinds.len() != n_sbs {
        return Err(usage(format!(
            "{} kinds given for {n_sbs} small cells",
            kinds.len()
        )));
    }
    for (name, v) in [
        ("base", params.base),
        ("amplitude", params.amplitude),
        ("noise", params.noise),
        ("phase jitter", params.phase_jitter_hours),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(usage(format!(
                "synthetic {name} must be a non-negative number"
            )));
        }
    }
    let mbs = synth_series(params, seed, 0, BsKind::Macro, n_slots);
    let columns: Vec<Vec<f64>> = kinds
        .iter()
        .enumerate()
        .map(|(j, &k)| synth_series(params, seed, j as u64 + 1, k, n_slots))
        .collect();
    let sbs = (0..n_slots)
        .flat_map(|t| columns.iter().map(move |c| c[t]))
        .collect();
    TrafficTrace::from_flat(params.slot_minutes, n_sbs, mbs, sbs)
}
