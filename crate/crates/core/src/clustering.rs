//! One-dimensional k-means over small-cell loads with automatic elbow
//! selection of the cluster count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{usage, Result};

pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_K_MAX: usize = 10;

/// Hyper-parameters of the k-means search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KMeansParams {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// A partition of points into `k` non-empty clusters.
///
/// Clusters are labelled in ascending centroid order, ties by lowest member
/// index, so equal inputs always give equal labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub centroids: Vec<f64>,
    pub sse: f64,
}

impl Clustering {
    /// Member indices of every cluster, in label order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.k];
        for (i, &c) in self.assignment.iter().enumerate() {
            groups[c].push(i);
        }
        groups
    }
}

/// Sum of squared distances between every point and its cluster centroid.
pub fn sse(points: &[f64], assignment: &[usize], centroids: &[f64]) -> Result<f64> {
    if points.len() != assignment.len() {
        return Err(usage(format!(
            "{} points but {} assignments",
            points.len(),
            assignment.len()
        )));
    }
    let mut total = 0.0;
    for (&x, &c) in points.iter().zip(assignment) {
        let mu = centroids.get(c).ok_or_else(|| {
            usage(format!(
                "assignment {c} but only {} centroids",
                centroids.len()
            ))
        })?;
        total += (x - mu) * (x - mu);
    }
    Ok(total)
}

pub fn kmeans(points: &[f64], k: usize, seed: u64) -> Result<Clustering> {
    kmeans_with(points, k, seed, KMeansParams::default())
}

/// Lloyd's algorithm from k-means++ seeding, keeping the best of
/// `params.restarts` runs by SSE (earliest restart on ties). A final run
/// starts from the exact optimal 1-D partition and replaces the winner only
/// if strictly better.
pub fn kmeans_with(
    points: &[f64],
    k: usize,
    seed: u64,
    params: KMeansParams,
) -> Result<Clustering> {
    if points.is_empty() {
        return Err(usage("k-means needs at least one point"));
    }
    if k == 0 || k > points.len() {
        return Err(usage(format!("k = {k} outside 1..={}", points.len())));
    }
    if let Some(bad) = points.iter().find(|x| !x.is_finite()) {
        return Err(usage(format!("non-finite point {bad}")));
    }
    let mut best: Option<(Vec<usize>, Vec<f64>, f64)> = None;
    for restart in 0..params.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let run = lloyd(points, k, &mut rng, params.max_iter);
        if best.as_ref().is_none_or(|b| run.sse < b.2) {
            best = Some((run.assignment, run.centroids, run.sse));
        }
    }
    // Random restarts can all stall in a local optimum. In one dimension the
    // optimal partition is contiguous in sorted order, so one more start
    // from that partition costs O(k n^2) and cannot be beaten.
    let run = lloyd_from(points, k, optimal_1d_centroids(points, k), params.max_iter);
    if best.as_ref().is_none_or(|b| run.sse < b.2) {
        best = Some((run.assignment, run.centroids, run.sse));
    }
    let (assignment, centroids, _) = best.expect("at least one restart");
    Ok(canonical(points, k, assignment, &centroids))
}

pub(crate) struct LloydRun {
    pub assignment: Vec<usize>,
    pub centroids: Vec<f64>,
    pub sse: f64,
    /// SSE after every iteration; non-increasing.
    #[allow(dead_code)]
    pub history: Vec<f64>,
}

fn sq(x: f64) -> f64 {
    x * x
}

/// k-means++ seeding: first centre uniform, then proportional to squared
/// distance to the nearest chosen centre. Falls back to an unused index when
/// every remaining point coincides with a centre.
fn seed_centroids(points: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first]];
    let mut dist: Vec<f64> = points.iter().map(|&x| sq(x - points[first])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            let unused: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            unused[rng.gen_range(0..unused.len())]
        };
        chosen[pick] = true;
        centroids.push(points[pick]);
        for (d, &x) in dist.iter_mut().zip(points) {
            *d = d.min(sq(x - points[pick]));
        }
    }
    centroids
}

/// Centroids of the minimum-SSE partition of `points` into `k` contiguous
/// runs of the sorted values.
fn optimal_1d_centroids(points: &[f64], k: usize) -> Vec<f64> {
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut sum = vec![0.0; n + 1];
    let mut sum_sq = vec![0.0; n + 1];
    for (i, &x) in sorted.iter().enumerate() {
        sum[i + 1] = sum[i] + x;
        sum_sq[i + 1] = sum_sq[i] + x * x;
    }
    // SSE of sorted[a..b] around its mean.
    let cost = |a: usize, b: usize| {
        let s = sum[b] - sum[a];
        (sum_sq[b] - sum_sq[a] - s * s / (b - a) as f64).max(0.0)
    };
    // best[c][j]: first j points in c + 1 runs; cut[c][j]: start of the last run.
    let mut best = vec![vec![f64::INFINITY; n + 1]; k];
    let mut cut = vec![vec![0usize; n + 1]; k];
    for (j, b) in best[0].iter_mut().enumerate().skip(1) {
        *b = cost(0, j);
    }
    for c in 1..k {
        for j in c + 1..=n {
            for i in c..j {
                let v = best[c - 1][i] + cost(i, j);
                if v < best[c][j] {
                    best[c][j] = v;
                    cut[c][j] = i;
                }
            }
        }
    }
    let mut centroids = vec![0.0; k];
    let mut end = n;
    for c in (0..k).rev() {
        let start = if c == 0 { 0 } else { cut[c][end] };
        centroids[c] = (sum[end] - sum[start]) / (end - start) as f64;
        end = start;
    }
    centroids
}

pub(crate) fn lloyd(points: &[f64], k: usize, rng: &mut ChaCha8Rng, max_iter: usize) -> LloydRun {
    let centroids = seed_centroids(points, k, rng);
    lloyd_from(points, k, centroids, max_iter)
}

fn lloyd_from(points: &[f64], k: usize, mut centroids: Vec<f64>, max_iter: usize) -> LloydRun {
    let n = points.len();
    let mut assignment = vec![usize::MAX; n];
    let mut history = Vec::new();

    for _ in 0..max_iter.max(1) {
        let mut next = assignment.clone();
        for (i, &x) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, &mu) in centroids.iter().enumerate() {
                let d = sq(x - mu);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            // Stay put on ties.
            let cur = assignment[i];
            if cur < k && sq(x - centroids[cur]) <= best_d {
                best = cur;
            }
            next[i] = best;
        }
        repair_empty(points, k, &mut next, &mut centroids);
        let changed = next != assignment;
        assignment = next;
        update_centroids(points, k, &assignment, &mut centroids);
        history.push(sse(points, &assignment, &centroids).expect("consistent dimensions"));
        if !changed {
            break;
        }
    }
    let sse = *history.last().expect("at least one iteration");
    LloydRun {
        assignment,
        centroids,
        sse,
        history,
    }
}

/// Gives every empty cluster the point farthest from its centroid, taken
/// from a cluster with more than one member.
fn repair_empty(points: &[f64], k: usize, assignment: &mut [usize], centroids: &mut [f64]) {
    let mut sizes = vec![0usize; k];
    for &c in assignment.iter() {
        sizes[c] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut donor: Option<(usize, f64)> = None;
        for (i, &c) in assignment.iter().enumerate() {
            if sizes[c] > 1 {
                let d = sq(points[i] - centroids[c]);
                if donor.is_none_or(|(_, bd)| d > bd) {
                    donor = Some((i, d));
                }
            }
        }
        let (i, _) = donor.expect("k <= n guarantees a donor");
        sizes[assignment[i]] -= 1;
        assignment[i] = empty;
        sizes[empty] = 1;
        centroids[empty] = points[i];
    }
}

fn update_centroids(points: &[f64], k: usize, assignment: &[usize], centroids: &mut [f64]) {
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&x, &c) in points.iter().zip(assignment) {
        sums[c] += x;
        counts[c] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            centroids[c] = sums[c] / counts[c] as f64;
        }
    }
}

fn canonical(points: &[f64], k: usize, assignment: Vec<usize>, centroids: &[f64]) -> Clustering {
    let mut first_member = vec![usize::MAX; k];
    for (i, &c) in assignment.iter().enumerate() {
        first_member[c] = first_member[c].min(i);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        centroids[a]
            .total_cmp(&centroids[b])
            .then(first_member[a].cmp(&first_member[b]))
    });
    let mut relabel = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    let assignment: Vec<usize> = assignment.iter().map(|&c| relabel[c]).collect();
    let centroids: Vec<f64> = order.iter().map(|&c| centroids[c]).collect();
    let sse = sse(points, &assignment, &centroids).expect("consistent dimensions");
    Clustering {
        k,
        assignment,
        centroids,
        sse,
    }
}

/// SSE of the best clustering for every k in `1..=min(k_max, n)`.
pub fn sse_curve(points: &[f64], k_max: usize, seed: u64) -> Result<Vec<f64>> {
    let top = k_max.min(points.len());
    (1..=top)
        .map(|k| kmeans(points, k, seed).map(|c| c.sse))
        .collect()
}

/// Picks the elbow of an SSE curve (`curve[i]` is the SSE for k = i + 1).
///
/// The elbow is the k with the largest discrete second difference
/// `SSE(k-1) - 2 SSE(k) + SSE(k+1)`, smallest k on ties. A curve without
/// interior points or without positive curvature yields 1.
pub fn elbow_of_curve(curve: &[f64]) -> usize {
    if curve.len() < 3 || curve[0] <= 0.0 {
        return 1;
    }
    let mut best_k = 1;
    let mut best = 0.0;
    for i in 1..curve.len() - 1 {
        let d2 = curve[i - 1] - 2.0 * curve[i] + curve[i + 1];
        if d2 > best {
            best = d2;
            best_k = i + 1;
        }
    }
    best_k
}

/// Elbow-selected cluster count for `points`.
pub fn elbow_k(points: &[f64], k_max: usize, seed: u64) -> Result<usize> {
    if points.is_empty() {
        return Err(usage("elbow selection needs at least one point"));
    }
    if k_max < 2 {
        return Err(usage(format!("k_max = {k_max} must be at least 2")));
    }
    // Identical points: the mean can round off the points, leaving SSE(1)
    // at float noise rather than zero.
    if points.len() < 3 || points.iter().all(|&x| x == points[0]) {
        return Ok(1);
    }
    Ok(elbow_of_curve(&sse_curve(points, k_max, seed)?))
}

/// Clusters `points` with an elbow-selected k, never below `min_k` (capped
/// at the number of points).
pub fn cluster_by_elbow(
    points: &[f64],
    k_max: usize,
    min_k: usize,
    seed: u64,
) -> Result<Clustering> {
    let k = elbow_k(points, k_max.max(2), seed)?
        .max(min_k)
        .min(points.len());
    kmeans(points, k, seed)
}
