//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use cellswitch::BsKind;
use rand::Rng;

/// (circuit W, load slope, tx W, sleep W, resource blocks)
pub fn profile(kind: BsKind) -> (f64, f64, f64, f64, f64) {
    match kind {
        BsKind::Macro => (130.0, 4.7, 20.0, f64::NAN, 100.0),
        BsKind::Rrh => (84.0, 2.8, 20.0, 56.0, 75.0),
        BsKind::Micro => (56.0, 2.6, 6.3, 39.0, 50.0),
        BsKind::Pico => (6.8, 4.0, 0.13, 4.3, 25.0),
        BsKind::Femto => (4.8, 8.0, 0.05, 2.9, 15.0),
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub kinds: Vec<BsKind>,
    pub loads: Vec<f64>,
    pub mbs_load: f64,
}

pub fn random_instance<R: Rng>(rng: &mut R, n: usize) -> Instance {
    let kinds = (0..n).map(|_| BsKind::SMALL[rng.gen_range(0..4)]).collect();
    // Occasional exact zeros and ones exercise the tie-breaks.
    let draw = |rng: &mut R| match rng.gen_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.gen::<f64>(),
    };
    let loads = (0..n).map(|_| draw(rng)).collect();
    let mbs_load = draw(rng);
    Instance {
        kinds,
        loads,
        mbs_load,
    }
}

pub struct OracleEval {
    pub power: f64,
    pub mbs_load_after: f64,
    pub feasible: bool,
}

/// Cell power with the small cells in `off` asleep.
pub fn evaluate(inst: &Instance, off: &[usize]) -> OracleEval {
    let (mp0, meta, mptx, _, mrb) = profile(BsKind::Macro);
    let mut moved = 0.0;
    let mut small = 0.0;
    for (j, (&kind, &load)) in inst.kinds.iter().zip(&inst.loads).enumerate() {
        let (p0, eta, ptx, sleep, rb) = profile(kind);
        if off.contains(&j) {
            moved += load * rb;
            small += sleep;
        } else {
            small += p0 + load * eta * ptx;
        }
    }
    let after = inst.mbs_load + moved / mrb;
    OracleEval {
        power: mp0 + after * meta * mptx + small,
        mbs_load_after: after,
        feasible: after <= 1.0 + 1e-9,
    }
}

/// Every subset of `0..n` as a sorted id list.
pub fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..1u64 << n).map(move |m| (0..n).filter(|&j| m >> j & 1 == 1).collect())
}

/// Minimum-power feasible off-set: ties go to fewer cells off, then to the
/// lexicographically smaller id list.
pub fn brute_force(inst: &Instance) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for off in subsets(inst.kinds.len()) {
        let e = evaluate(inst, &off);
        if !e.feasible {
            continue;
        }
        let better = match &best {
            None => true,
            Some((b, p)) => (e.power, off.len(), &off) < (*p, b.len(), b),
        };
        if better {
            best = Some((off, e.power));
        }
    }
    best.expect("all-on is feasible")
}

/// Global optimum SSE over every assignment of `points` to at most `k`
/// non-empty clusters.
pub fn optimal_sse(points: &[f64], k: usize) -> f64 {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        best = best.min(assignment_sse(points, &labels, k));
        let mut i = 0;
        while i < n {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

/// SSE of `labels` with each centroid at its cluster mean.
pub fn assignment_sse(points: &[f64], labels: &[usize], k: usize) -> f64 {
    let mut sum = vec![0.0; k];
    let mut count = vec![0usize; k];
    for (&x, &l) in points.iter().zip(labels) {
        sum[l] += x;
        count[l] += 1;
    }
    points
        .iter()
        .zip(labels)
        .map(|(&x, &l)| {
            let c = sum[l] / count[l] as f64;
            (x - c) * (x - c)
        })
        .sum()
}
