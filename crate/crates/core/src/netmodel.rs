//! Base-station kinds, power profiles and the macro-cell container.
//!
//! A base station draws `P_o + load * eta * P_tx` watts while active and a
//! fixed sleep power when switched off. The macro BS never sleeps. Traffic of
//! a sleeping small cell is moved to the macro BS ("vertical offloading"); the
//! common currency for that move is resource blocks, so a load fraction on a
//! small cell becomes `load * n_rb(small) / n_rb(macro)` of macro load.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, usage, Error, Result};

/// Absolute slack on the macro capacity check. RB conversions are not exact
/// in binary floating point.
pub const FEASIBILITY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BsKind {
    Macro,
    Rrh,
    Micro,
    Pico,
    Femto,
}

impl BsKind {
    /// The kinds that may be deployed as small cells, in capacity order.
    pub const SMALL: [BsKind; 4] = [BsKind::Rrh, BsKind::Micro, BsKind::Pico, BsKind::Femto];

    pub fn is_small(self) -> bool {
        self != BsKind::Macro
    }

    pub fn name(self) -> &'static str {
        match self {
            BsKind::Macro => "macro",
            BsKind::Rrh => "rrh",
            BsKind::Micro => "micro",
            BsKind::Pico => "pico",
            BsKind::Femto => "femto",
        }
    }

    /// Reference power profile for this kind.
    ///
    /// | kind  | P_o | eta | P_tx | sleep | RBs |
    /// |-------|-----|-----|------|-------|-----|
    /// | macro | 130 | 4.7 | 20   |   -   | 100 |
    /// | rrh   |  84 | 2.8 | 20   |  56   |  75 |
    /// | micro |  56 | 2.6 | 6.3  |  39   |  50 |
    /// | pico  | 6.8 | 4.0 | 0.13 |  4.3  |  25 |
    /// | femto | 4.8 | 8.0 | 0.05 |  2.9  |  15 |
    pub fn default_profile(self) -> PowerProfile {
        let (p_circuit, load_slope, p_tx, p_sleep, n_rb) = match self {
            BsKind::Macro => (130.0, 4.7, 20.0, None, 100),
            BsKind::Rrh => (84.0, 2.8, 20.0, Some(56.0), 75),
            BsKind::Micro => (56.0, 2.6, 6.3, Some(39.0), 50),
            BsKind::Pico => (6.8, 4.0, 0.13, Some(4.3), 25),
            BsKind::Femto => (4.8, 8.0, 0.05, Some(2.9), 15),
        };
        PowerProfile {
            p_circuit,
            load_slope,
            p_tx,
            p_sleep,
            n_rb,
        }
    }
}

impl fmt::Display for BsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "macro" | "mbs" => Ok(BsKind::Macro),
            "rrh" => Ok(BsKind::Rrh),
            "micro" => Ok(BsKind::Micro),
            "pico" => Ok(BsKind::Pico),
            "femto" => Ok(BsKind::Femto),
            other => Err(usage(format!("unknown base-station kind `{other}`"))),
        }
    }
}

/// Power and capacity constants of one base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    /// Constant circuit power in watts.
    pub p_circuit: f64,
    /// Load-dependent power coefficient (dimensionless).
    pub load_slope: f64,
    /// Transmit power in watts.
    pub p_tx: f64,
    /// Sleep-mode power in watts. `None` for a station without a sleep state.
    pub p_sleep: Option<f64>,
    /// Number of resource blocks.
    pub n_rb: u32,
}

impl PowerProfile {
    pub fn new(
        p_circuit: f64,
        load_slope: f64,
        p_tx: f64,
        p_sleep: Option<f64>,
        n_rb: u32,
    ) -> Result<Self> {
        let profile = Self {
            p_circuit,
            load_slope,
            p_tx,
            p_sleep,
            n_rb,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.p_circuit) || !positive(self.load_slope) || !positive(self.p_tx) {
            return Err(domain(format!(
                "power profile fields must be positive: {self:?}"
            )));
        }
        if self.n_rb == 0 {
            return Err(domain("power profile needs at least one resource block"));
        }
        if let Some(s) = self.p_sleep {
            if !positive(s) || s >= self.p_circuit {
                return Err(domain(format!(
                    "sleep power {s} must be positive and below circuit power {}",
                    self.p_circuit
                )));
            }
        }
        Ok(())
    }

    /// Power drawn while active at `load`, without range checks.
    #[inline]
    pub(crate) fn active_power(&self, load: f64) -> f64 {
        self.p_circuit + load * self.load_slope * self.p_tx
    }
}

pub(crate) fn check_load(load: f64, what: &str) -> Result<()> {
    if load.is_finite() && (0.0..=1.0).contains(&load) {
        Ok(())
    } else {
        Err(domain(format!("{what} load {load} outside [0, 1]")))
    }
}

/// Power drawn by one base station.
///
/// Active: `p_circuit + load * load_slope * p_tx`. Inactive: the sleep power;
/// the load is ignored (but still range-checked).
pub fn bs_power(profile: &PowerProfile, load: f64, active: bool) -> Result<f64> {
    check_load(load, "base-station")?;
    if active {
        Ok(profile.active_power(load))
    } else {
        profile
            .p_sleep
            .ok_or_else(|| usage("this base station has no sleep state"))
    }
}

/// Load fraction expressed in resource blocks of the station carrying it.
pub fn rb_equivalent(load: f64, profile: &PowerProfile) -> Result<f64> {
    check_load(load, "base-station")?;
    Ok(load * f64::from(profile.n_rb))
}

/// Converts resource blocks back into a load fraction of `profile`.
pub fn rb_to_load(rb: f64, profile: &PowerProfile) -> f64 {
    rb / f64::from(profile.n_rb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallCell {
    pub id: usize,
    pub kind: BsKind,
    pub profile: PowerProfile,
}

/// One macro BS and the small cells under its coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroCell {
    mbs_profile: PowerProfile,
    mbs_max_load: f64,
    small_cells: Vec<SmallCell>,
}

impl MacroCell {
    pub fn new(
        mbs_profile: PowerProfile,
        mbs_max_load: f64,
        small_cells: Vec<SmallCell>,
    ) -> Result<Self> {
        mbs_profile.validate()?;
        if !(mbs_max_load > 0.0 && mbs_max_load <= 1.0) {
            return Err(domain(format!(
                "macro max load {mbs_max_load} outside (0, 1]"
            )));
        }
        for (expected, sc) in small_cells.iter().enumerate() {
            if sc.id != expected {
                return Err(usage(format!(
                    "small-cell ids must be dense 0..N-1; found {} at position {expected}",
                    sc.id
                )));
            }
            if !sc.kind.is_small() {
                return Err(usage("a macro BS cannot be deployed as a small cell"));
            }
            sc.profile.validate()?;
            if sc.profile.p_sleep.is_none() {
                return Err(usage(format!("small cell {} has no sleep power", sc.id)));
            }
        }
        Ok(Self {
            mbs_profile,
            mbs_max_load,
            small_cells,
        })
    }

    /// Cell with reference profiles, a macro capacity of 1.0 and one small
    /// cell per entry of `kinds`.
    pub fn with_kinds(kinds: &[BsKind]) -> Result<Self> {
        let small_cells = kinds
            .iter()
            .enumerate()
            .map(|(id, &kind)| SmallCell {
                id,
                kind,
                profile: kind.default_profile(),
            })
            .collect();
        Self::new(BsKind::Macro.default_profile(), 1.0, small_cells)
    }

    pub fn mbs_profile(&self) -> &PowerProfile {
        &self.mbs_profile
    }

    pub fn mbs_max_load(&self) -> f64 {
        self.mbs_max_load
    }

    pub fn small_cells(&self) -> &[SmallCell] {
        &self.small_cells
    }

    pub fn n_small(&self) -> usize {
        self.small_cells.len()
    }

    pub fn kinds(&self) -> Vec<BsKind> {
        self.small_cells.iter().map(|c| c.kind).collect()
    }
}

/// A feasible switching outcome for one slot.
///
/// Only [`offload`] builds these, so every value satisfies the macro
/// capacity constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchDecision {
    off: Vec<usize>,
    mbs_load_after: f64,
    offloaded_rb: f64,
}

impl SwitchDecision {
    /// Ids of the sleeping small cells, ascending.
    pub fn off_set(&self) -> &[usize] {
        &self.off
    }

    pub fn is_off(&self, id: usize) -> bool {
        self.off.binary_search(&id).is_ok()
    }

    pub fn n_off(&self) -> usize {
        self.off.len()
    }

    /// Macro load after absorbing the traffic of every sleeping cell.
    pub fn mbs_load_after(&self) -> f64 {
        self.mbs_load_after
    }

    /// Resource blocks moved onto the macro BS.
    pub fn offloaded_rb(&self) -> f64 {
        self.offloaded_rb
    }
}

/// Per-slot cost tables shared by [`cell_power`] and the switching policies,
/// so every evaluation of a given off-pattern performs the same float
/// operations in the same order.
#[derive(Debug, Clone)]
pub(crate) struct SlotCosts {
    pub on: Vec<f64>,
    pub sleep: Vec<f64>,
    pub demand_rb: Vec<f64>,
    pub mbs: PowerProfile,
    pub mbs_load: f64,
    pub mbs_max_load: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Evaluation {
    pub offloaded_rb: f64,
    pub mbs_load_after: f64,
    pub power: f64,
}

impl Evaluation {
    pub fn feasible(&self, max_load: f64) -> bool {
        self.mbs_load_after <= max_load + FEASIBILITY_EPS
    }
}

impl SlotCosts {
    pub fn new(cell: &MacroCell, sbs_loads: &[f64], mbs_load: f64) -> Result<Self> {
        if sbs_loads.len() != cell.n_small() {
            return Err(usage(format!(
                "{} small-cell loads given for a cell with {} small cells",
                sbs_loads.len(),
                cell.n_small()
            )));
        }
        check_load(mbs_load, "macro")?;
        let n = sbs_loads.len();
        let mut on = Vec::with_capacity(n);
        let mut sleep = Vec::with_capacity(n);
        let mut demand_rb = Vec::with_capacity(n);
        for (sc, &load) in cell.small_cells().iter().zip(sbs_loads) {
            check_load(load, "small-cell")?;
            on.push(sc.profile.active_power(load));
            // Validated at cell construction.
            sleep.push(sc.profile.p_sleep.unwrap_or(sc.profile.p_circuit));
            demand_rb.push(load * f64::from(sc.profile.n_rb));
        }
        Ok(Self {
            on,
            sleep,
            demand_rb,
            mbs: *cell.mbs_profile(),
            mbs_load,
            mbs_max_load: cell.mbs_max_load(),
        })
    }

    pub fn len(&self) -> usize {
        self.on.len()
    }

    /// Evaluates an off-pattern given as one flag per small cell.
    #[inline]
    pub fn evaluate(&self, off: &[bool]) -> Evaluation {
        let mut offloaded_rb = 0.0;
        let mut sbs_power = 0.0;
        for (j, &is_off) in off.iter().enumerate().take(self.on.len()) {
            if is_off {
                offloaded_rb += self.demand_rb[j];
                sbs_power += self.sleep[j];
            } else {
                sbs_power += self.on[j];
            }
        }
        let mbs_load_after = self.mbs_load + rb_to_load(offloaded_rb, &self.mbs);
        let power = self.mbs.active_power(mbs_load_after) + sbs_power;
        Evaluation {
            offloaded_rb,
            mbs_load_after,
            power,
        }
    }

    pub fn decision(&self, off: &[bool], eval: &Evaluation) -> SwitchDecision {
        SwitchDecision {
            off: off
                .iter()
                .enumerate()
                .filter_map(|(j, &o)| o.then_some(j))
                .collect(),
            mbs_load_after: eval.mbs_load_after,
            offloaded_rb: eval.offloaded_rb,
        }
    }

    pub fn flags_for(&self, off_ids: &[usize]) -> Result<Vec<bool>> {
        let mut flags = vec![false; self.len()];
        for &id in off_ids {
            match flags.get_mut(id) {
                Some(f) if !*f => *f = true,
                Some(_) => return Err(usage(format!("small cell {id} listed twice"))),
                None => return Err(usage(format!("unknown small-cell id {id}"))),
            }
        }
        Ok(flags)
    }
}

/// Switches off `off_ids` and moves their traffic onto the macro BS.
///
/// Returns `Ok(None)` when the macro BS cannot absorb the traffic.
pub fn offload(
    off_ids: &[usize],
    sbs_loads: &[f64],
    mbs_load: f64,
    cell: &MacroCell,
) -> Result<Option<SwitchDecision>> {
    let costs = SlotCosts::new(cell, sbs_loads, mbs_load)?;
    let flags = costs.flags_for(off_ids)?;
    let eval = costs.evaluate(&flags);
    Ok(eval
        .feasible(costs.mbs_max_load)
        .then(|| costs.decision(&flags, &eval)))
}

/// Total power of the cell under `decision`: the macro BS at its post-offload
/// load plus every small cell, active ones at their own load and sleeping
/// ones at sleep power.
pub fn cell_power(
    cell: &MacroCell,
    sbs_loads: &[f64],
    mbs_load: f64,
    decision: &SwitchDecision,
) -> Result<f64> {
    let costs = SlotCosts::new(cell, sbs_loads, mbs_load)?;
    let flags = costs.flags_for(decision.off_set())?;
    let eval = costs.evaluate(&flags);
    if !eval.feasible(costs.mbs_max_load) {
        return Err(Error::Contract(format!(
            "decision overloads the macro BS: load {} > {}",
            eval.mbs_load_after, costs.mbs_max_load
        )));
    }
    if (eval.mbs_load_after - decision.mbs_load_after).abs() > FEASIBILITY_EPS {
        return Err(Error::Contract(format!(
            "decision was built for different loads (macro load {} vs {})",
            decision.mbs_load_after, eval.mbs_load_after
        )));
    }
    Ok(eval.power)
}
