//! Energy, CO2 and throughput accounting over a run of slots.

use serde::Serialize;

use crate::error::{usage, Result};
use crate::netmodel::{cell_power, MacroCell, SwitchDecision};
use crate::switching::{Policy, PolicyOutput};
use crate::traffic::TrafficTrace;

/// CO2 conversion factor, kg per kWh.
pub const DEFAULT_ZETA: f64 = 0.2556;
pub const JOULES_PER_KWH: f64 = 3.6e6;

/// Relative tolerance when comparing quantities that are equal in exact
/// arithmetic but reach the value through different float operations.
pub const REL_TOL: f64 = 1e-9;

pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Aggregate result of one policy over a trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub policy: Policy,
    pub n_sbs: usize,
    pub slot_minutes: u32,
    pub per_slot_power: Vec<f64>,
    pub per_slot_mbs_load: Vec<f64>,
    pub per_slot_n_off: Vec<usize>,
    /// Served traffic per slot in RB-equivalents.
    pub per_slot_throughput: Vec<f64>,
    /// Joules over the whole trace.
    pub total_energy: f64,
    pub energy_saved_vs_aao: f64,
    /// Emissions of `total_energy`, kg.
    pub co2_kg: f64,
    pub co2_saved_kg: f64,
    pub zeta: f64,
    pub wall_clock: f64,
    pub candidates_evaluated: u64,
    /// Largest per-slot candidate count.
    pub max_slot_candidates: u64,
    pub max_recursion_depth: usize,
}

pub fn slot_seconds(slot_minutes: u32) -> f64 {
    f64::from(slot_minutes) * 60.0
}

pub fn total_energy(per_slot_power: &[f64], slot_minutes: u32) -> f64 {
    let dt = slot_seconds(slot_minutes);
    per_slot_power.iter().map(|p| p * dt).sum()
}

/// Kilograms of CO2 saved by not spending `energy_saved_j` joules.
pub fn co2_saved(energy_saved_j: f64, zeta: f64) -> f64 {
    zeta * (energy_saved_j / JOULES_PER_KWH)
}

impl RunReport {
    /// Builds a report from per-slot outputs. Savings start at zero; see
    /// [`RunReport::with_baseline`].
    pub fn from_outputs(
        policy: Policy,
        n_sbs: usize,
        slot_minutes: u32,
        outputs: &[PolicyOutput],
        per_slot_throughput: Vec<f64>,
        wall_clock: f64,
        zeta: f64,
    ) -> Self {
        let per_slot_power: Vec<f64> = outputs.iter().map(|o| o.power).collect();
        let total = total_energy(&per_slot_power, slot_minutes);
        Self {
            policy,
            n_sbs,
            slot_minutes,
            per_slot_mbs_load: outputs
                .iter()
                .map(|o| o.decision.mbs_load_after())
                .collect(),
            per_slot_n_off: outputs.iter().map(|o| o.decision.n_off()).collect(),
            per_slot_power,
            per_slot_throughput,
            total_energy: total,
            energy_saved_vs_aao: 0.0,
            co2_kg: co2_saved(total, zeta),
            co2_saved_kg: 0.0,
            zeta,
            wall_clock,
            candidates_evaluated: outputs.iter().map(|o| o.stats.candidates_evaluated).sum(),
            max_slot_candidates: outputs
                .iter()
                .map(|o| o.stats.candidates_evaluated)
                .max()
                .unwrap_or(0),
            max_recursion_depth: outputs
                .iter()
                .map(|o| o.stats.recursion_depth)
                .max()
                .unwrap_or(0),
        }
    }

    pub fn n_slots(&self) -> usize {
        self.per_slot_power.len()
    }

    /// Fills in savings relative to the all-on run of the same trace.
    pub fn with_baseline(mut self, aao: &RunReport) -> Result<Self> {
        self.energy_saved_vs_aao = energy_saved(&self, aao)?;
        self.co2_saved_kg = co2_saved(self.energy_saved_vs_aao, self.zeta);
        Ok(self)
    }
}

/// Energy saved by `report` relative to the all-on run `aao_report`.
///
/// Both runs must cover the same slots of the same cell; since every feasible
/// policy serves exactly the all-on traffic, differing throughput series also
/// mark the runs as mismatched.
pub fn energy_saved(report: &RunReport, aao_report: &RunReport) -> Result<f64> {
    if aao_report.policy != Policy::Aao {
        return Err(usage(format!(
            "baseline run is `{}`, not aao",
            aao_report.policy
        )));
    }
    if report.n_slots() != aao_report.n_slots()
        || report.slot_minutes != aao_report.slot_minutes
        || report.n_sbs != aao_report.n_sbs
    {
        return Err(usage("runs cover different slots or cells"));
    }
    let same_traffic = report
        .per_slot_throughput
        .iter()
        .zip(&aao_report.per_slot_throughput)
        .all(|(&a, &b)| approx_eq(a, b));
    if !same_traffic {
        return Err(usage("runs were made on different traces"));
    }
    Ok(aao_report.total_energy - report.total_energy)
}

/// Traffic served in one slot, in RB-equivalents: the macro BS's own demand
/// plus whatever it absorbed, plus the demand of every active small cell.
pub fn slot_throughput(
    cell: &MacroCell,
    sbs_loads: &[f64],
    mbs_load: f64,
    decision: &SwitchDecision,
) -> Result<f64> {
    // Validates feasibility and that the decision belongs to these loads.
    cell_power(cell, sbs_loads, mbs_load, decision)?;
    let mbs_rb = f64::from(cell.mbs_profile().n_rb);
    let mut served = mbs_load * mbs_rb + decision.offloaded_rb();
    for (sc, &load) in cell.small_cells().iter().zip(sbs_loads) {
        if !decision.is_off(sc.id) {
            served += load * f64::from(sc.profile.n_rb);
        }
    }
    Ok(served)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Throughput {
    pub per_slot: Vec<f64>,
    pub mean: f64,
}

/// Per-slot and average network throughput of a decision sequence.
pub fn avg_throughput(
    trace: &TrafficTrace,
    decisions: &[SwitchDecision],
    cell: &MacroCell,
) -> Result<Throughput> {
    if decisions.len() != trace.n_slots() {
        return Err(usage(format!(
            "{} decisions for a trace of {} slots",
            decisions.len(),
            trace.n_slots()
        )));
    }
    let per_slot = decisions
        .iter()
        .enumerate()
        .map(|(t, d)| slot_throughput(cell, trace.sbs_loads(t), trace.mbs_load(t), d))
        .collect::<Result<Vec<_>>>()?;
    let mean = if per_slot.is_empty() {
        0.0
    } else {
        per_slot.iter().sum::<f64>() / per_slot.len() as f64
    };
    Ok(Throughput { per_slot, mean })
}
