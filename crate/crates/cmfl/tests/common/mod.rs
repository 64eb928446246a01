//! Shared helpers for the integration suites: brute-force aggregation
//! oracles written independently of the library implementations, small
//! statistics utilities, and the fixed experiment instances the acceptance
//! criteria run on.
//!
//! The oracles deliberately take different algorithmic routes from the
//! library (order statistics by repeated minimum extraction, Krum by
//! exhaustive neighbour-subset search) so agreement is evidence, not an
//! identity.

#![allow(dead_code)]

use cmfl::adversary::AttackSpec;
use cmfl::dataset::{
    generate_synthetic, partition, split_holdout, FederatedDataset, PartitionScheme, Sample,
};
use cmfl::engine::{SimConfig, Strategy};
use cmfl::model::{LrSchedule, ParamVector, UploadMode};

// ---------------------------------------------------------------------------
// Brute-force aggregation oracles
// ---------------------------------------------------------------------------

pub fn pv(values: &[f64]) -> ParamVector {
    ParamVector::from_values(values.to_vec())
}

/// k-th smallest value (0-based) by repeated minimum extraction — no sort.
fn kth_smallest(xs: &[f64], k: usize) -> f64 {
    let mut pool: Vec<f64> = xs.to_vec();
    for _ in 0..k {
        let (arg, _) = pool
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("pool is non-empty");
        pool.swap_remove(arg);
    }
    pool.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Coordinate-wise median oracle: midpoint of the two central order
/// statistics for even counts, the central one for odd counts.
pub fn oracle_median(gradients: &[ParamVector]) -> Vec<f64> {
    let n = gradients.len();
    let dim = gradients[0].dim();
    (0..dim)
        .map(|j| {
            let col: Vec<f64> = gradients.iter().map(|g| g.values[j]).collect();
            if n % 2 == 1 {
                kth_smallest(&col, n / 2)
            } else {
                0.5 * (kth_smallest(&col, n / 2 - 1) + kth_smallest(&col, n / 2))
            }
        })
        .collect()
}

/// Coordinate-wise trimmed-mean oracle: drop `floor(beta% * n)` order
/// statistics at each end, average the remainder in ascending order.
pub fn oracle_trimmed_mean(gradients: &[ParamVector], beta_percent: f64) -> Vec<f64> {
    let n = gradients.len();
    let dim = gradients[0].dim();
    let cut = ((beta_percent / 100.0) * n as f64).floor() as usize;
    assert!(2 * cut < n, "oracle instance trims everything");
    (0..dim)
        .map(|j| {
            let col: Vec<f64> = gradients.iter().map(|g| g.values[j]).collect();
            let mut acc = 0.0;
            for k in cut..n - cut {
                acc += kth_smallest(&col, k);
            }
            acc / (n - 2 * cut) as f64
        })
        .collect()
}

fn sq_dist(a: &ParamVector, b: &ParamVector) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// All k-element index combinations of `0..n`, lexicographic.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Krum score oracle: the combinatorial definition — minimum over all
/// `(n - f - 2)`-subsets of the other gradients of the summed squared
/// distances — instead of the library's sort-and-take-closest route.
pub fn oracle_krum_scores(gradients: &[ParamVector], f: usize) -> Vec<f64> {
    let n = gradients.len();
    let closest = n - f - 2;
    (0..n)
        .map(|i| {
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            combinations(others.len(), closest)
                .into_iter()
                .map(|subset| {
                    subset
                        .iter()
                        .map(|&s| sq_dist(&gradients[i], &gradients[others[s]]))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Multi-Krum selection oracle: the `m` lowest-scored indices, ascending
/// score with ties broken by lower index, found by repeated extraction.
pub fn oracle_krum_select(gradients: &[ParamVector], f: usize, m: usize) -> Vec<usize> {
    let scores = oracle_krum_scores(gradients, f);
    let mut remaining: Vec<usize> = (0..gradients.len()).collect();
    let mut picked = Vec::with_capacity(m);
    for _ in 0..m {
        let (arg, _) = remaining
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)))
            .expect("selection size within range");
        picked.push(remaining.remove(arg));
    }
    picked
}

/// Hand-rolled Σ p_k g_k in input order.
pub fn oracle_fedavg(gradients: &[ParamVector], weights: &[f64]) -> Vec<f64> {
    let dim = gradients[0].dim();
    let mut out = vec![0.0; dim];
    for (g, w) in gradients.iter().zip(weights) {
        for j in 0..dim {
            out[j] += w * g.values[j];
        }
    }
    out
}

/// Unweighted mean over `ids` in the given order: sum first, divide once.
pub fn oracle_mean_of(gradients: &[ParamVector], ids: &[usize]) -> Vec<f64> {
    let dim = gradients[0].dim();
    let mut out = vec![0.0; dim];
    for &i in ids {
        for j in 0..dim {
            out[j] += gradients[i].values[j];
        }
    }
    for v in &mut out {
        *v /= ids.len() as f64;
    }
    out
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Average ranks (1-based), ties share the mean of their positions.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            out[t] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    let mx = mean(&rx);
    let my = mean(&ry);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    cov / (vx.sqrt() * vy.sqrt())
}

// ---------------------------------------------------------------------------
// Fixed experiment instances
// ---------------------------------------------------------------------------

/// Seeds shared by every multi-seed criterion.
pub const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// Strategy-comparison instance: K = 20 clients, 20-class blobs, one label
/// shard per client (every client owns exactly one class — maximally
/// non-IID). Used by the strategy-ordering, robustness, cliff, tracking,
/// and φ-ordering criteria.
pub fn strategy_instance() -> (FederatedDataset, Vec<Sample>) {
    let samples = generate_synthetic(20, 8, 120, 3.0, 7).expect("valid recipe");
    let (train, holdout) = split_holdout(&samples, 20, 30).expect("enough samples");
    let ds = partition(
        &train,
        20,
        PartitionScheme::LabelShard {
            shards_per_client: 1,
        },
        7,
    )
    .expect("valid partition");
    (ds, holdout)
}

/// Base simulation config on the strategy instance: A = 10 activated, m = 8
/// aggregated, C = 2 committee, 200 rounds of 2 local steps.
pub fn strategy_config(strategy: Strategy, seed: u64) -> SimConfig {
    SimConfig {
        k: 20,
        rounds: 200,
        tau: 2,
        activation_percent: 50.0,
        alpha_percent: 80.0,
        omega_percent: 20.0,
        batch_size: 10,
        schedule: LrSchedule::Constant(0.12),
        strategy,
        trim_beta_percent: 20.0,
        attack: AttackSpec::none(),
        upload_mode: UploadMode::LastBatchGradient,
        reg_coeff: 0.01,
        seed,
        collect_theory: false,
        export_scores: false,
    }
}

/// Convergence-bound instance: K = 10 IID clients over 5-class blobs, small
/// enough for exhaustive optimal-committee search and exact optima.
pub fn theorem_instance() -> (FederatedDataset, Vec<Sample>) {
    let samples = generate_synthetic(5, 6, 200, 2.5, 11).expect("valid recipe");
    let (train, holdout) = split_holdout(&samples, 5, 40).expect("enough samples");
    let ds = partition(&train, 10, PartitionScheme::Iid, 11).expect("valid partition");
    (ds, holdout)
}

/// Certified smoothness of the pooled objective: the softmax Hessian is
/// bounded by half the largest augmented-feature Gram entry, plus the ridge.
pub fn certified_l(ds: &FederatedDataset, reg: f64) -> f64 {
    let max_aug_sq = ds
        .pooled()
        .iter()
        .map(|s| 1.0 + s.features.iter().map(|v| v * v).sum::<f64>())
        .fold(1.0, f64::max);
    0.5 * max_aug_sq + reg
}
