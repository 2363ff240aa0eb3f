//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cellswitch::harness::{run_on_trace, write_run, KindMix, Scenario};
use cellswitch::metrics::{approx_eq, JOULES_PER_KWH};
use cellswitch::netmodel::bs_power;
use cellswitch::switching::es_switch;
use cellswitch::{run_scenario, sweep, BsKind, MacroCell, Policy, PolicyInput, RunReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ZETA: f64 = 0.2556;
const SWEEP: [usize; 7] = [10, 20, 40, 60, 80, 100, 120];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Reports gathered along the way for the CO2 check.
#[derive(Default)]
struct Collected {
    reports: Vec<RunReport>,
}

fn es_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=12);
        let inst = common::random_instance(&mut rng, n);
        let cell = MacroCell::with_kinds(&inst.kinds).unwrap();
        let out = es_switch(&PolicyInput::new(&cell, &inst.loads, inst.mbs_load)).unwrap();
        let (off, power) = common::brute_force(&inst);
        if out.decision.off_set() != &off[..] || out.power != power {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && elapsed < Duration::from_secs(30),
        format!(
            "{mismatches} mismatches in 200 instances, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn random_scenario(i: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
    let mut s = Scenario::new(rng.gen_range(1..=12));
    s.seed = rng.gen();
    let w: [f64; 4] = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
    let total: f64 = w.iter().sum();
    s.kind_mix = KindMix {
        rrh: w[0] / total,
        micro: w[1] / total,
        pico: w[2] / total,
        femto: 1.0 - (w[0] + w[1] + w[2]) / total,
    };
    s
}

fn conservation_and_sandwich(collected: &mut Collected) -> (Outcome, Outcome) {
    let mut qos_violations = 0;
    let mut order_violations = 0;
    let mut slots = 0;
    for i in 0..100 {
        let run = run_scenario(&random_scenario(i)).unwrap();
        let by = |p: Policy| run.reports.iter().find(|r| r.policy == p).unwrap();
        let (aao, es, mlc, thesis) = (
            by(Policy::Aao),
            by(Policy::Es),
            by(Policy::Mlc),
            by(Policy::Thesis),
        );
        for r in &run.reports {
            for t in 0..r.n_slots() {
                if !approx_eq(r.per_slot_throughput[t], aao.per_slot_throughput[t])
                    || r.per_slot_mbs_load[t] > 1.0 + 1e-9
                {
                    qos_violations += 1;
                }
            }
        }
        for t in 0..aao.n_slots() {
            slots += 1;
            let e = es.per_slot_power[t];
            let a = aao.per_slot_power[t];
            if e > thesis.per_slot_power[t]
                || e > mlc.per_slot_power[t]
                || [e, mlc.per_slot_power[t], thesis.per_slot_power[t]]
                    .iter()
                    .any(|&p| p > a)
            {
                order_violations += 1;
            }
        }
        collected.reports.extend(run.reports);
    }
    (
        outcome(
            qos_violations == 0,
            format!("{qos_violations} violations over 100 scenarios x 4 policies (throughput to 1e-9 relative)"),
        ),
        outcome(order_violations == 0, format!("{order_violations} violations over {slots} slots")),
    )
}

fn reference(n: usize) -> Scenario {
    let mut s = Scenario::new(n);
    s.seed = 42;
    s
}

fn near_optimality_and_ranking(collected: &mut Collected) -> (Outcome, Vec<RunReport>) {
    let start = Instant::now();
    let run = run_scenario(&reference(20)).unwrap();
    let elapsed = start.elapsed();
    let by = |p: Policy| run.reports.iter().find(|r| r.policy == p).unwrap().clone();
    let (es, thesis) = (by(Policy::Es), by(Policy::Thesis));
    let gap = (thesis.total_energy - es.total_energy) / es.total_energy;
    collected.reports.extend(run.reports.iter().cloned());
    (
        outcome(
            gap.abs() <= 0.05 && elapsed < Duration::from_secs(600),
            format!(
                "THESIS {:.0} J vs ES {:.0} J, gap {:.3}%, {:.1} s",
                thesis.total_energy,
                es.total_energy,
                gap * 100.0,
                elapsed.as_secs_f64()
            ),
        ),
        run.reports,
    )
}

fn ranking(n20: &[RunReport], swept: &[(usize, RunReport)]) -> Outcome {
    let saved = |p: Policy| {
        n20.iter()
            .find(|r| r.policy == p)
            .unwrap()
            .energy_saved_vs_aao
    };
    let (es, thesis, mlc) = (saved(Policy::Es), saved(Policy::Thesis), saved(Policy::Mlc));
    let ordered = es >= thesis && thesis >= mlc && mlc >= 0.0;
    let curve: Vec<f64> = SWEEP
        .iter()
        .map(|&n| {
            swept
                .iter()
                .find(|(m, r)| *m == n && r.policy == Policy::Thesis)
                .unwrap()
                .1
                .energy_saved_vs_aao
        })
        .collect();
    let monotone = curve.windows(2).all(|w| w[1] >= w[0]);
    let mj: Vec<String> = curve.iter().map(|v| format!("{:.2}", v / 1e6)).collect();
    outcome(
        ordered && monotone,
        format!(
            "saved ES {:.2} >= THESIS {:.2} >= MLC {:.2} MJ; THESIS over N: [{}] MJ",
            es / 1e6,
            thesis / 1e6,
            mlc / 1e6,
            mj.join(", ")
        ),
    )
}

fn thesis_seconds(n: usize) -> f64 {
    let mut s = reference(n);
    s.policies = vec![Policy::Thesis];
    let cell = s.cell().unwrap();
    let (trace, _) = s.load_trace(&cell).unwrap();
    (0..3)
        .map(|_| {
            let start = Instant::now();
            run_on_trace(&s, &cell, &trace).unwrap();
            start.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

fn complexity(swept: &[(usize, RunReport)]) -> Outcome {
    let mut es_exact = true;
    let mut prev = 0u64;
    for n in 10..=20 {
        let s = reference(n);
        let cell = s.cell().unwrap();
        let (trace, _) = s.load_trace(&cell).unwrap();
        let c = es_switch(&PolicyInput::new(
            &cell,
            trace.sbs_loads(0),
            trace.mbs_load(0),
        ))
        .unwrap()
        .stats
        .candidates_evaluated;
        es_exact &= c == 1 << n && (prev == 0 || c == 2 * prev);
        prev = c;
    }
    let thesis120 = swept
        .iter()
        .find(|(n, r)| *n == 120 && r.policy == Policy::Thesis)
        .unwrap()
        .1
        .max_slot_candidates;
    let ratio = thesis_seconds(120) / thesis_seconds(60);
    outcome(
        es_exact && thesis120 < 1 << 20 && ratio < 8.0,
        format!(
            "ES doubles per cell for N=10..20: {es_exact}; THESIS max per-slot candidates at N=120: {thesis120} (< {}); runtime ratio N=120/N=60: {ratio:.2}",
            1u64 << 20
        ),
    )
}

fn co2(collected: &Collected) -> Outcome {
    let bad = collected
        .reports
        .iter()
        .filter(|r| {
            let expect = ZETA * (r.energy_saved_vs_aao / JOULES_PER_KWH);
            (r.co2_saved_kg - expect).abs() > 1e-9 * expect.abs().max(f64::MIN_POSITIVE)
        })
        .count();
    outcome(
        bad == 0,
        format!(
            "{bad} of {} reports off by more than 1e-9 relative",
            collected.reports.len()
        ),
    )
}

fn power_model() -> Outcome {
    let values = [
        bs_power(&BsKind::Macro.default_profile(), 0.0, true).unwrap(),
        bs_power(&BsKind::Macro.default_profile(), 1.0, true).unwrap(),
        bs_power(&BsKind::Femto.default_profile(), 0.3, false).unwrap(),
        bs_power(&BsKind::Pico.default_profile(), 0.5, true).unwrap(),
    ];
    outcome(values == [130.0, 224.0, 2.9, 7.06], format!("{values:?} W"))
}

fn determinism() -> Outcome {
    let cfg = "seed = 42\nn_sbs = 12\n";
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let run = run_scenario(&Scenario::from_toml_str(cfg).unwrap()).unwrap();
        write_run(d.path(), &run).unwrap();
    }
    let same = ["results.csv", "summary.csv", "metadata.json"]
        .iter()
        .all(|f| {
            fs::read(dirs[0].path().join(f)).unwrap() == fs::read(dirs[1].path().join(f)).unwrap()
        });
    outcome(
        same,
        "results.csv, summary.csv and metadata.json compared byte by byte",
    )
}

fn main() -> ExitCode {
    let mut collected = Collected::default();
    let mut lines = Vec::new();
    let mut record = |id: u32, name: &str, o: Outcome| {
        let line = format!(
            "{} criterion {id} ({name}): {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        println!("{line}");
        lines.push(o.pass);
    };

    record(1, "ES oracle exactness", es_oracle());
    let (qos, order) = conservation_and_sandwich(&mut collected);
    record(2, "QoS conservation", qos);
    record(3, "sandwich ordering", order);
    let (near, n20) = near_optimality_and_ranking(&mut collected);
    record(4, "near-optimality N=20", near);

    let mut template = reference(20);
    template.policies = vec![Policy::Aao, Policy::Mlc, Policy::Thesis];
    let swept: Vec<(usize, RunReport)> = sweep(&SWEEP, &template)
        .unwrap()
        .into_iter()
        .map(|row| (row.n_sbs, row.report))
        .collect();
    collected
        .reports
        .extend(swept.iter().map(|(_, r)| r.clone()));
    record(5, "policy ranking", ranking(&n20, &swept));
    record(6, "complexity growth", complexity(&swept));
    record(7, "CO2 arithmetic", co2(&collected));
    record(8, "power model values", power_model());
    record(9, "determinism", determinism());

    let failed = lines.iter().filter(|&&p| !p).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        lines.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
