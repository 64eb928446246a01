//! Theory-side measurements: smoothness/variance/gradient-norm constants,
//! global and per-client optima, the heterogeneity measure Γ, the
//! aggregation-committee gap φ, the committee-difference bound κ̂², and the
//! convergence-bound evaluator that compares a run's measured error curve
//! against the analytic rate.
//!
//! Everything here is post-hoc analysis over immutable run traces. The
//! optimal-committee search is exhaustive, so these diagnostics are
//! restricted to desk-scale instances (K ≤ 20, C ≤ 5).

use crate::dataset::{FederatedDataset, Partition, Sample};
use crate::engine::{write_atomic, RunResult};
use crate::error::{Error, Result};
use crate::model::{self, grad_full, grad_minibatch, loss, LossSpec, LrSchedule, ParamVector};
use crate::rng::{stream, Purpose};
use rand::Rng;
use std::collections::BTreeSet;
use std::path::Path;

/// Default gradient-norm tolerance for the optimum solver.
pub const DEFAULT_OPT_TOL: f64 = 1e-9;
/// Iteration cap for the optimum solver.
const MAX_GD_ITERS: usize = 500_000;
/// Rounds whose gap denominator falls below this are skipped as "at the
/// heterogeneity floor".
const DENOM_FLOOR: f64 = 1e-12;
/// φ more negative than this flags an optimizer failure; less negative is
/// clamped to zero as numerical noise.
const PHI_NEG_SLACK: f64 = 1e-9;
/// Mini-batches per probe point when estimating gradient variance.
const SIGMA_PROBES: usize = 4;
/// Maximum instance size for the exhaustive optimal-committee search.
const MAX_K_EXHAUSTIVE: usize = 20;
const MAX_C_EXHAUSTIVE: usize = 5;

// ---------------------------------------------------------------------------
// Optima
// ---------------------------------------------------------------------------

/// Global and per-client minimizers of the regularized objective.
#[derive(Clone, Debug)]
pub struct Optima {
    pub w_star: ParamVector,
    pub f_star: f64,
    pub w_k_star: Vec<ParamVector>,
    pub f_k_star: Vec<f64>,
    /// Gradient-norm tolerance the solver reached.
    pub tol: f64,
}

/// Secant slope ‖g_a − g_b‖ / ‖w_a − w_b‖, or None for a degenerate pair.
fn secant_slope(g_a: &ParamVector, g_b: &ParamVector, w_a: &ParamVector, w_b: &ParamVector) -> Option<f64> {
    let dw = w_a.sub(w_b).norm();
    if dw <= 1e-12 {
        return None;
    }
    Some(g_a.sub(g_b).norm() / dw)
}

/// Certified smoothness bound for the objective on `samples`: the softmax
/// cross-entropy Hessian for one sample is (diag(p) − ppᵀ) ⊗ x̃x̃ᵀ with
/// augmented features x̃ = (x, 1) and ‖diag(p) − ppᵀ‖ ≤ 1/2, so
/// L ≤ ½·max‖x̃‖² + reg.
fn certified_smoothness(samples: &[Sample], spec: &LossSpec) -> f64 {
    let max_aug_sq = samples
        .iter()
        .map(|s| 1.0 + s.features.iter().map(|v| v * v).sum::<f64>())
        .fold(1.0, f64::max);
    0.5 * max_aug_sq + spec.reg_coeff
}

/// Nesterov-accelerated full-batch gradient descent down to ‖∇F‖ < tol,
/// with the fixed step 1/L from the certified smoothness bound (the
/// accelerated variant keeps strongly-heterogeneous instances fast). The
/// objective is strongly convex (reg_coeff > 0), so the minimizer is
/// unique. Acceptance never consults loss differences, which stall below
/// f64 resolution long before the gradient tolerance is reached.
fn minimize(samples: &[Sample], spec: &LossSpec, tol: f64) -> Result<(ParamVector, f64)> {
    if samples.is_empty() {
        return Err(Error::Diagnostics("cannot minimize over an empty sample set".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Diagnostics(format!("tolerance must be > 0, got {tol}")));
    }
    let part = Partition {
        client_id: usize::MAX,
        samples: samples.to_vec(),
    };
    let l = certified_smoothness(samples, spec);
    let mu = spec.reg_coeff;
    let step = 1.0 / l;
    let q = (mu / l).sqrt();
    let beta = (1.0 - q) / (1.0 + q);
    let mut w = ParamVector::zeros(spec.dim());
    let mut y = w.clone();
    for _ in 0..MAX_GD_ITERS {
        let g = grad_full(&y, &part, spec)?;
        let mut w_next = y.clone();
        w_next.add_scaled(-step, &g);
        if g.norm() < tol {
            // The momentum point converged; confirm at the iterate itself.
            let g_w = grad_full(&w_next, &part, spec)?;
            if g_w.norm() < tol {
                let f = loss(&w_next, samples, spec)?;
                return Ok((w_next, f));
            }
        }
        let delta = w_next.sub(&w);
        let mut y_next = w_next.clone();
        y_next.add_scaled(beta, &delta);
        if !y_next.is_finite() {
            return Err(Error::Diagnostics(
                "optimum solver diverged to non-finite iterates".into(),
            ));
        }
        w = w_next;
        y = y_next;
    }
    Err(Error::Diagnostics(format!(
        "gradient descent did not reach tolerance {tol} within {MAX_GD_ITERS} iterations"
    )))
}

/// Solve for the global optimum and every client's local optimum.
///
/// Requires `reg_coeff > 0` so all the minimizers are unique.
pub fn compute_optima(dataset: &FederatedDataset, spec: &LossSpec, tol: f64) -> Result<Optima> {
    dataset.validate()?;
    spec.validate()?;
    if !(spec.reg_coeff > 0.0) {
        return Err(Error::Diagnostics(
            "optima need reg_coeff > 0 (unique minimizers)".into(),
        ));
    }
    let pooled = dataset.pooled();
    let (w_star, f_star) = minimize(&pooled, spec, tol)?;
    let mut w_k_star = Vec::with_capacity(dataset.k());
    let mut f_k_star = Vec::with_capacity(dataset.k());
    for p in &dataset.partitions {
        let (w_k, f_k) = minimize(&p.samples, spec, tol)?;
        w_k_star.push(w_k);
        f_k_star.push(f_k);
    }
    Ok(Optima {
        w_star,
        f_star,
        w_k_star,
        f_k_star,
        tol,
    })
}

/// Heterogeneity measure: Γ = Σ_k p_k (F_k(w*) − F_k*), which is zero in
/// the IID limit and grows with client divergence. Each term is
/// nonnegative up to solver tolerance; a term below −2·tol signals a
/// solver failure, smaller negatives are clamped.
pub fn gamma(dataset: &FederatedDataset, spec: &LossSpec, optima: &Optima) -> Result<f64> {
    let weights = dataset.weights();
    let mut total = 0.0;
    for (k, p) in dataset.partitions.iter().enumerate() {
        let f_at_global = loss(&optima.w_star, &p.samples, spec)?;
        let mut term = f_at_global - optima.f_k_star[k];
        if term < -2.0 * optima.tol {
            return Err(Error::Diagnostics(format!(
                "client {k}: F_k(w*) − F_k* = {term} is negative beyond solver slack — \
                 local optimum did not converge"
            )));
        }
        if term < 0.0 {
            term = 0.0;
        }
        total += weights[k] * term;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Optimal committee and the aggregation-committee gap
// ---------------------------------------------------------------------------

/// Visit every C-subset of 0..k in lexicographic order.
fn for_each_subset(k: usize, c: usize, visit: &mut impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..c).collect();
    if c == 0 || c > k {
        return;
    }
    loop {
        visit(&idx);
        // Advance to the next combination.
        let mut i = c;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + k - c {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..c {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Sample-weighted mean of `values` over `ids`, with weights renormalized
/// within the set (p_{k,S} = n_k / Σ_{S} n).
fn set_weighted(ids: &[usize], dataset: &FederatedDataset, values: &[f64]) -> f64 {
    let total: f64 = ids.iter().map(|&i| dataset.partitions[i].n() as f64).sum();
    ids.iter()
        .map(|&i| (dataset.partitions[i].n() as f64 / total) * values[i])
        .sum()
}

/// The optimal committee: the C-subset minimizing the renormalized-weighted
/// sum of local optimal values, found exhaustively. Ties resolve to the
/// lexicographically first subset.
pub fn optimal_committee(
    dataset: &FederatedDataset,
    optima: &Optima,
    c: usize,
) -> Result<(Vec<usize>, f64)> {
    let k = dataset.k();
    if c == 0 || c > k {
        return Err(Error::Diagnostics(format!(
            "optimal-committee size {c} out of range for {k} clients"
        )));
    }
    if k > MAX_K_EXHAUSTIVE || c > MAX_C_EXHAUSTIVE {
        return Err(Error::Diagnostics(format!(
            "exhaustive committee search needs K <= {MAX_K_EXHAUSTIVE} and C <= \
             {MAX_C_EXHAUSTIVE}, got K={k}, C={c}"
        )));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for_each_subset(k, c, &mut |ids| {
        let v = set_weighted(ids, dataset, &optima.f_k_star);
        match &best {
            Some((_, bv)) if *bv <= v => {}
            _ => best = Some((ids.to_vec(), v)),
        }
    });
    best.ok_or_else(|| Error::Diagnostics("no committee subset enumerated".into()))
}

/// Per-round aggregation-committee gap values and their extremes.
#[derive(Clone, Debug)]
pub struct GapReport {
    /// (round, φ) for every evaluated round, 1-based rounds.
    pub phi: Vec<(usize, f64)>,
    /// Minimum φ over evaluated rounds (None if all were skipped).
    pub phi_min: Option<f64>,
    /// Max over the observed aggregation sets of φ evaluated at w*
    /// (None when Γ is at the floor).
    pub phi_max: Option<f64>,
    /// Rounds skipped because the denominator hit the heterogeneity floor.
    pub skipped_rounds: Vec<usize>,
    pub s_c_star: Vec<usize>,
    pub s_c_star_value: f64,
}

/// Compute φ(S_a^t, w̄^t) for every round of a trace, plus φ_min and
/// φ_max.
///
/// φ(S_a, w) = [Σ_{k∈S_a} p_{k,S_a} F_k(w) − Σ_{k'∈S_c*} p_{k',S_c*} F_{k'}*]
///            / [F(w) − Σ_k p_k F_k*].
///
/// φ_min is the minimum over rounds at the round-start models; φ_max fixes
/// w = w* and maximizes over the observed aggregation sets, where the
/// denominator equals Γ.
pub fn committee_gap(
    s_a_per_round: &[Vec<usize>],
    iterates: &[ParamVector],
    dataset: &FederatedDataset,
    spec: &LossSpec,
    optima: &Optima,
    c: usize,
) -> Result<GapReport> {
    if s_a_per_round.len() != iterates.len() {
        return Err(Error::Diagnostics(format!(
            "trace mismatch: {} aggregation sets vs {} iterates",
            s_a_per_round.len(),
            iterates.len()
        )));
    }
    let (s_c_star, s_c_star_value) = optimal_committee(dataset, optima, c)?;
    let weights = dataset.weights();
    let weighted_f_star: f64 = weights
        .iter()
        .zip(&optima.f_k_star)
        .map(|(p, f)| p * f)
        .sum();
    let pooled = dataset.pooled();

    let mut phi = Vec::new();
    let mut skipped = Vec::new();
    for (i, (s_a, w)) in s_a_per_round.iter().zip(iterates).enumerate() {
        let round = i + 1;
        if s_a.is_empty() {
            return Err(Error::Diagnostics(format!("round {round}: empty aggregation set")));
        }
        let denom = loss(w, &pooled, spec)? - weighted_f_star;
        if denom < DENOM_FLOOR {
            skipped.push(round);
            continue;
        }
        let mut f_at_w = vec![0.0; dataset.k()];
        for &id in s_a {
            f_at_w[id] = loss(w, &dataset.partitions[id].samples, spec)?;
        }
        let numer = set_weighted(s_a, dataset, &f_at_w) - s_c_star_value;
        let value = checked_phi(numer / denom, round)?;
        phi.push((round, value));
    }
    let phi_min = phi
        .iter()
        .map(|&(_, v)| v)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));

    // φ_max at w* over the distinct observed sets; denominator = Γ.
    let denom_star = optima.f_star - weighted_f_star;
    let phi_max = if denom_star < DENOM_FLOOR {
        None
    } else {
        let distinct: BTreeSet<&Vec<usize>> = s_a_per_round.iter().collect();
        let mut f_star_at: Vec<Option<f64>> = vec![None; dataset.k()];
        let mut best: Option<f64> = None;
        for s_a in distinct {
            for &id in s_a {
                if f_star_at[id].is_none() {
                    f_star_at[id] =
                        Some(loss(&optima.w_star, &dataset.partitions[id].samples, spec)?);
                }
            }
            let vals: Vec<f64> = f_star_at.iter().map(|v| v.unwrap_or(0.0)).collect();
            let numer = set_weighted(s_a, dataset, &vals) - s_c_star_value;
            let value = checked_phi(numer / denom_star, 0)?;
            best = Some(best.map_or(value, |b: f64| b.max(value)));
        }
        best
    };
    Ok(GapReport {
        phi,
        phi_min,
        phi_max,
        skipped_rounds: skipped,
        s_c_star,
        s_c_star_value,
    })
}

fn checked_phi(value: f64, round: usize) -> Result<f64> {
    if value < -PHI_NEG_SLACK {
        return Err(Error::Diagnostics(format!(
            "phi = {value} at round {round} is negative beyond numerical slack — \
             optima look inconsistent"
        )));
    }
    Ok(value.max(0.0))
}

/// Committee-difference bound estimate: the max over observed aggregation
/// sets of |Σ_{k∈S_a} p_{k,S_a} F_k* − Σ_{k'∈S_c*} p_{k',S_c*} F_{k'}*|.
/// The underlying assumption bounds exactly this expected difference by
/// κ², so the measured maximum is reported as κ̂².
pub fn kappa_estimate(
    s_a_per_round: &[Vec<usize>],
    dataset: &FederatedDataset,
    optima: &Optima,
    c: usize,
) -> Result<f64> {
    let (_, s_c_star_value) = optimal_committee(dataset, optima, c)?;
    let mut worst = 0.0f64;
    for s_a in s_a_per_round {
        if s_a.is_empty() {
            continue;
        }
        let v = set_weighted(s_a, dataset, &optima.f_k_star);
        worst = worst.max((v - s_c_star_value).abs());
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Constant estimation
// ---------------------------------------------------------------------------

/// Probe-based estimates of the smoothness, variance, and gradient-norm
/// constants.
#[derive(Clone, Copy, Debug)]
pub struct ProbeConstants {
    /// Max secant slope over trajectory and random-box probe pairs, floored
    /// by the analytic softmax bound ¼·max‖x‖² + reg.
    pub l_hat: f64,
    /// Max per-client empirical mini-batch gradient variance.
    pub sigma_hat: f64,
    /// Max squared mini-batch gradient norm along probe trajectories.
    pub g_hat_sq: f64,
}

/// Analytic lower guard for the smoothness estimate.
pub fn smoothness_floor(dataset: &FederatedDataset, spec: &LossSpec) -> f64 {
    let max_x_sq = dataset
        .partitions
        .iter()
        .flat_map(|p| &p.samples)
        .map(|s| s.features.iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max);
    0.25 * max_x_sq + spec.reg_coeff
}

/// Estimate (L̂, σ̂, Ĝ²) from short probe trajectories plus random pairs in
/// a box around them. `batch_size` is the mini-batch size whose sampling
/// variance σ̂ describes (clamped per client to its partition size, so a
/// full-batch probe measures zero variance).
pub fn estimate_constants(
    dataset: &FederatedDataset,
    spec: &LossSpec,
    num_probes: usize,
    batch_size: usize,
    seed: u64,
) -> Result<ProbeConstants> {
    dataset.validate()?;
    spec.validate()?;
    if num_probes < 10 {
        return Err(Error::Config(format!(
            "constant estimation needs num_probes >= 10, got {num_probes}"
        )));
    }
    if batch_size < 1 {
        return Err(Error::Config("batch_size must be >= 1".into()));
    }
    let floor = smoothness_floor(dataset, spec);
    let mut l_hat = floor;
    let mut sigma_hat = 0.0f64;
    let mut g_hat_sq = 0.0f64;
    for part in &dataset.partitions {
        let mut rng = stream(seed, Purpose::ConstantProbe, 0, part.client_id as u64);
        let b = batch_size.min(part.n());
        let eta = 1.0 / floor;
        // Short SGD trajectory: the visited-iterate region is where the
        // assumptions need to hold.
        let mut w = ParamVector::zeros(spec.dim());
        let mut iterates = vec![w.clone()];
        for _ in 0..num_probes {
            let batch = model::sample_batch(part, b, &mut rng);
            let g = grad_minibatch(&w, &batch, spec)?;
            g_hat_sq = g_hat_sq.max(g.norm_sq());
            w.add_scaled(-eta, &g);
            if !w.is_finite() {
                return Err(Error::Diagnostics(format!(
                    "client {}: probe trajectory diverged",
                    part.client_id
                )));
            }
            iterates.push(w.clone());
        }
        let fulls: Vec<ParamVector> = iterates
            .iter()
            .map(|wi| grad_full(wi, part, spec))
            .collect::<Result<_>>()?;
        for i in 0..iterates.len() - 1 {
            if let Some(s) = secant_slope(&fulls[i + 1], &fulls[i], &iterates[i + 1], &iterates[i]) {
                l_hat = l_hat.max(s);
            }
        }
        // Variance probes at each visited iterate.
        for (wi, gf) in iterates.iter().zip(&fulls) {
            let mut acc = 0.0;
            for _ in 0..SIGMA_PROBES {
                let batch = model::sample_batch(part, b, &mut rng);
                let g = grad_minibatch(wi, &batch, spec)?;
                acc += g.sub(gf).norm_sq();
            }
            sigma_hat = sigma_hat.max(acc / SIGMA_PROBES as f64);
        }
        // Random pairs in a box covering the visited region.
        let radius = 1.0 + iterates.iter().map(|wi| wi.norm()).fold(0.0, f64::max);
        let draw = |rng: &mut rand_chacha::ChaCha12Rng| {
            ParamVector::from_values(
                (0..spec.dim())
                    .map(|_| rng.random_range(-radius..radius))
                    .collect(),
            )
        };
        for _ in 0..num_probes * 4 {
            let u = draw(&mut rng);
            // Pair each box point with a nearby perturbation (local
            // curvature) and with an independent far point (global secant).
            let mut v = u.clone();
            for x in &mut v.values {
                *x += rng.random_range(-1e-3..1e-3);
            }
            let far = draw(&mut rng);
            let gu = grad_full(&u, part, spec)?;
            let gv = grad_full(&v, part, spec)?;
            let gf = grad_full(&far, part, spec)?;
            if let Some(s) = secant_slope(&gu, &gv, &u, &v) {
                l_hat = l_hat.max(s);
            }
            if let Some(s) = secant_slope(&gu, &gf, &u, &far) {
                l_hat = l_hat.max(s);
            }
        }
    }
    Ok(ProbeConstants {
        l_hat,
        sigma_hat,
        g_hat_sq,
    })
}

// ---------------------------------------------------------------------------
// The convergence bound
// ---------------------------------------------------------------------------

/// Constants entering the round-T error bound.
#[derive(Clone, Copy, Debug)]
pub struct BoundConstants {
    pub l: f64,
    pub mu: f64,
    pub tau: usize,
    /// Ĝ² — max squared stochastic gradient norm.
    pub g_sq: f64,
    /// Σ_k p_k σ̂_k² — weighted per-client variance.
    pub sigma_sq_weighted: f64,
    /// κ̂² — committee-difference bound.
    pub kappa_sq: f64,
    /// Γ — heterogeneity.
    pub gamma_het: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    /// ‖w̄¹ − w*‖².
    pub dist_w1_sq: f64,
}

/// Evaluate the error bound after `round_t` rounds:
///
/// (1/(T+γ)) · [ (4L(32τ²G² + Σp_kσ_k²) + 24L²κ²)/(3μ²φ_min)
///               + 8L²Γ/μ² + Lγ‖w̄¹−w*‖²/2 ]
///   + (8LΓ/3μ)(φ_max/φ_min − 1),      γ = 4L/μ.
///
/// Valid only under the decay schedule η_t = 1/(μ(t+γ)); errors when
/// φ_min ≤ 0 (the bound is undefined there).
pub fn theorem1_bound(c: &BoundConstants, round_t: usize) -> Result<f64> {
    if !(c.phi_min > 0.0) {
        return Err(Error::Diagnostics(format!(
            "bound undefined: phi_min = {} must be positive",
            c.phi_min
        )));
    }
    if round_t == 0 {
        return Err(Error::Diagnostics("bound is stated for T >= 1".into()));
    }
    let gamma = 4.0 * c.l / c.mu;
    let tau_sq = (c.tau * c.tau) as f64;
    let bracket = (4.0 * c.l * (32.0 * tau_sq * c.g_sq + c.sigma_sq_weighted)
        + 24.0 * c.l * c.l * c.kappa_sq)
        / (3.0 * c.mu * c.mu * c.phi_min)
        + 8.0 * c.l * c.l * c.gamma_het / (c.mu * c.mu)
        + c.l * gamma * c.dist_w1_sq / 2.0;
    let tail = (8.0 * c.l * c.gamma_het / (3.0 * c.mu)) * (c.phi_max / c.phi_min - 1.0);
    Ok(bracket / (round_t as f64 + gamma) + tail)
}

// ---------------------------------------------------------------------------
// Run analysis
// ---------------------------------------------------------------------------

/// Complete theory diagnostics for one run.
#[derive(Clone, Debug)]
pub struct TheoryReport {
    pub l_hat: f64,
    pub mu: f64,
    /// Max per-client variance estimate.
    pub sigma_hat: f64,
    /// Σ p_k σ̂_k² with unmeasured clients substituted conservatively.
    pub sigma_sq_weighted: f64,
    pub g_hat_sq: f64,
    pub kappa_sq: f64,
    pub gamma_het: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub f_star: f64,
    pub f_k_star: Vec<f64>,
    pub dist_w1_sq: f64,
    pub tau: usize,
    /// (round, F(w̄ after round) − F*).
    pub error_curve: Vec<(usize, f64)>,
    /// (round, bound(round)).
    pub bound_curve: Vec<(usize, f64)>,
    pub skipped_rounds: Vec<usize>,
    pub caveats: Vec<String>,
}

impl TheoryReport {
    pub fn constants(&self) -> BoundConstants {
        BoundConstants {
            l: self.l_hat,
            mu: self.mu,
            tau: self.tau,
            g_sq: self.g_hat_sq,
            sigma_sq_weighted: self.sigma_sq_weighted,
            kappa_sq: self.kappa_sq,
            gamma_het: self.gamma_het,
            phi_min: self.phi_min,
            phi_max: self.phi_max,
            dist_w1_sq: self.dist_w1_sq,
        }
    }

    /// First round whose measured error exceeds the bound, if any.
    pub fn first_violation(&self) -> Option<usize> {
        first_violation(&self.error_curve, &self.bound_curve)
    }
}

fn first_violation(errors: &[(usize, f64)], bounds: &[(usize, f64)]) -> Option<usize> {
    for ((t, e), (t2, b)) in errors.iter().zip(bounds) {
        debug_assert_eq!(t, t2);
        if e > b {
            return Some(*t);
        }
    }
    None
}

/// Measure every Theorem-side quantity from a run executed with
/// `collect_theory`, reusing precomputed optima (they depend only on the
/// dataset, so share them across seeds and strategies).
pub fn analyze_run(
    res: &RunResult,
    dataset: &FederatedDataset,
    optima: &Optima,
) -> Result<TheoryReport> {
    let th = res.theory.as_ref().ok_or_else(|| {
        Error::Diagnostics("run was not executed with collect_theory enabled".into())
    })?;
    let cfg = &res.config;
    let (mu, l_sched) = match cfg.schedule {
        LrSchedule::TheoremDecay { mu, l } => (mu, l),
        LrSchedule::Constant(_) => {
            return Err(Error::Diagnostics(
                "the convergence bound is stated for the decay schedule \
                 (lr = theorem-decay:mu,L), not a constant rate"
                    .into(),
            ))
        }
    };
    let spec = LossSpec {
        num_classes: dataset.num_classes,
        d_in: dataset.d_in,
        reg_coeff: cfg.reg_coeff,
    };
    let mut caveats = Vec::new();
    if (mu - cfg.reg_coeff).abs() > 1e-12 {
        caveats.push(format!(
            "schedule mu = {mu} differs from reg_coeff = {} — the strong-convexity \
             constant of this objective is exactly reg_coeff",
            cfg.reg_coeff
        ));
    }

    let c = cfg.derived().c;
    let gap = committee_gap(&th.s_a, &th.iterates, dataset, &spec, optima, c)?;
    let phi_min = gap.phi_min.ok_or_else(|| {
        Error::Diagnostics("every round sat at the heterogeneity floor — phi_min unavailable".into())
    })?;
    let phi_max = gap.phi_max.ok_or_else(|| {
        Error::Diagnostics("Gamma is at the floor — phi_max at w* unavailable".into())
    })?;
    if !gap.skipped_rounds.is_empty() {
        caveats.push(format!(
            "{} round(s) skipped at the heterogeneity floor: {:?}",
            gap.skipped_rounds.len(),
            gap.skipped_rounds
        ));
    }
    let gamma_het = gamma(dataset, &spec, optima)?;
    let kappa_sq = kappa_estimate(&th.s_a, dataset, optima, c)?;

    // Per-client variances; clients never probed get the max measured value.
    let measured_max = th
        .sigma_sq
        .iter()
        .zip(&th.sigma_measured)
        .filter(|(_, m)| **m)
        .map(|(s, _)| *s)
        .fold(0.0, f64::max);
    let unmeasured = th.sigma_measured.iter().filter(|m| !**m).count();
    if unmeasured > 0 {
        caveats.push(format!(
            "{unmeasured} client(s) never participated; their variance is substituted \
             by the max measured value"
        ));
    }
    let weights = dataset.weights();
    let sigma_sq_weighted: f64 = weights
        .iter()
        .zip(th.sigma_sq.iter().zip(&th.sigma_measured))
        .map(|(p, (s, m))| p * if *m { *s } else { measured_max })
        .sum();

    let floor = smoothness_floor(dataset, &spec);
    let l_hat = l_sched.max(th.l_secant).max(floor);
    if th.l_secant > l_sched {
        caveats.push(format!(
            "measured secant smoothness {:.6e} exceeds the schedule's L = {l_sched:.6e}; \
             the bound uses the larger value but the executed step sizes were larger \
             than the theorem prescribes for it",
            th.l_secant
        ));
    }
    let sched_gamma = cfg.schedule.gamma();
    let bound_gamma = 4.0 * l_hat / mu;
    if (sched_gamma - bound_gamma).abs() > 1e-9 * bound_gamma.max(1.0) {
        caveats.push(format!(
            "schedule gamma = {sched_gamma:.6e} vs bound gamma = {bound_gamma:.6e}; \
             step sizes and bound use slightly different smoothness constants"
        ));
    }
    caveats.push(
        "single-run estimate: the bound's expectations are means over runs; pool \
         several seeds for the acceptance reading"
            .into(),
    );

    if th.iterates.is_empty() {
        return Err(Error::Diagnostics("empty iterate trace".into()));
    }
    let dist_w1_sq = th.iterates[0].sq_dist(&optima.w_star);
    let pooled = dataset.pooled();
    let rounds = th.iterates.len();
    let mut error_curve = Vec::with_capacity(rounds);
    for t in 1..=rounds {
        let model_after_t = if t < rounds {
            &th.iterates[t]
        } else {
            &res.final_params
        };
        error_curve.push((t, loss(model_after_t, &pooled, &spec)? - optima.f_star));
    }
    let constants = BoundConstants {
        l: l_hat,
        mu,
        tau: cfg.tau,
        g_sq: th.g_hat_sq,
        sigma_sq_weighted,
        kappa_sq,
        gamma_het,
        phi_min,
        phi_max,
        dist_w1_sq,
    };
    let mut bound_curve = Vec::with_capacity(rounds);
    for t in 1..=rounds {
        bound_curve.push((t, theorem1_bound(&constants, t)?));
    }

    Ok(TheoryReport {
        l_hat,
        mu,
        sigma_hat: measured_max,
        sigma_sq_weighted,
        g_hat_sq: th.g_hat_sq,
        kappa_sq,
        gamma_het,
        phi_min,
        phi_max,
        f_star: optima.f_star,
        f_k_star: optima.f_k_star.clone(),
        dist_w1_sq,
        tau: cfg.tau,
        error_curve,
        bound_curve,
        skipped_rounds: gap.skipped_rounds,
        caveats,
    })
}

/// Pooled bound check across seeds: conservative constants (max over runs,
/// min φ_min) against the mean error curve, which is the reading under
/// which the bound's expectations are estimated.
#[derive(Clone, Debug)]
pub struct PooledCheck {
    pub mean_error_curve: Vec<(usize, f64)>,
    pub bound_curve: Vec<(usize, f64)>,
    pub first_violation: Option<usize>,
    pub constants: BoundConstants,
    pub runs: usize,
}

pub fn pooled_theorem_check(reports: &[TheoryReport]) -> Result<PooledCheck> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Diagnostics("pooled check needs at least one report".into()))?;
    let rounds = first.error_curve.len();
    for r in reports {
        if r.error_curve.len() != rounds {
            return Err(Error::Diagnostics("reports cover different round counts".into()));
        }
        if r.tau != first.tau || (r.mu - first.mu).abs() > 1e-12 {
            return Err(Error::Diagnostics(
                "reports have inconsistent tau or mu — not the same experiment".into(),
            ));
        }
    }
    let fmax = |f: fn(&TheoryReport) -> f64| reports.iter().map(f).fold(f64::MIN, f64::max);
    let fmin = |f: fn(&TheoryReport) -> f64| reports.iter().map(f).fold(f64::MAX, f64::min);
    let constants = BoundConstants {
        l: fmax(|r| r.l_hat),
        mu: first.mu,
        tau: first.tau,
        g_sq: fmax(|r| r.g_hat_sq),
        sigma_sq_weighted: fmax(|r| r.sigma_sq_weighted),
        kappa_sq: fmax(|r| r.kappa_sq),
        gamma_het: fmax(|r| r.gamma_het),
        phi_min: fmin(|r| r.phi_min),
        phi_max: fmax(|r| r.phi_max),
        dist_w1_sq: fmax(|r| r.dist_w1_sq),
    };
    let mut mean_error_curve = Vec::with_capacity(rounds);
    for i in 0..rounds {
        let t = first.error_curve[i].0;
        let mean = reports.iter().map(|r| r.error_curve[i].1).sum::<f64>() / reports.len() as f64;
        mean_error_curve.push((t, mean));
    }
    let mut bound_curve = Vec::with_capacity(rounds);
    for &(t, _) in &mean_error_curve {
        bound_curve.push((t, theorem1_bound(&constants, t)?));
    }
    Ok(PooledCheck {
        first_violation: first_violation(&mean_error_curve, &bound_curve),
        mean_error_curve,
        bound_curve,
        constants,
        runs: reports.len(),
    })
}

// ---------------------------------------------------------------------------
// Emitters
// ---------------------------------------------------------------------------

/// One verdict line, stable for downstream tooling.
pub fn verdict_line(first_violation: Option<usize>) -> String {
    match first_violation {
        None => "THEOREM1: dominated at every logged round".to_string(),
        Some(r) => format!("THEOREM1: VIOLATED at round {r}"),
    }
}

/// `round,error,bound` CSV.
pub fn theory_csv(errors: &[(usize, f64)], bounds: &[(usize, f64)]) -> String {
    let mut out = String::from("round,error,bound\n");
    for ((t, e), (_, b)) in errors.iter().zip(bounds) {
        out.push_str(&format!("{t},{e},{b}\n"));
    }
    out
}

pub fn write_theory_csv(path: &Path, errors: &[(usize, f64)], bounds: &[(usize, f64)]) -> Result<()> {
    write_atomic(path, &theory_csv(errors, bounds))
}

/// Human-readable report with constants, caveats, and the verdict.
pub fn render_theory_report(report: &TheoryReport) -> String {
    let mut out = String::new();
    out.push_str("cmfl theory report\n");
    out.push_str("==================\n");
    out.push_str(&format!("L_hat                {:.6e}\n", report.l_hat));
    out.push_str(&format!("mu                   {:.6e}\n", report.mu));
    out.push_str(&format!("sigma_hat (max)      {:.6e}\n", report.sigma_hat));
    out.push_str(&format!("sigma_sq_weighted    {:.6e}\n", report.sigma_sq_weighted));
    out.push_str(&format!("G_hat_sq             {:.6e}\n", report.g_hat_sq));
    out.push_str(&format!("kappa_sq             {:.6e}\n", report.kappa_sq));
    out.push_str(&format!("Gamma                {:.6e}\n", report.gamma_het));
    out.push_str(&format!("phi_min              {:.6e}\n", report.phi_min));
    out.push_str(&format!("phi_max              {:.6e}\n", report.phi_max));
    out.push_str(&format!("F_star               {:.6e}\n", report.f_star));
    out.push_str(&format!("dist(w1, w*)^2       {:.6e}\n", report.dist_w1_sq));
    out.push_str(&format!("tau                  {}\n", report.tau));
    out.push_str(&format!(
        "rounds evaluated     {} (skipped at floor: {})\n",
        report.error_curve.len(),
        report.skipped_rounds.len()
    ));
    out.push_str(&format!("{}\n", verdict_line(report.first_violation())));
    if !report.caveats.is_empty() {
        out.push_str("caveats:\n");
        for c in &report.caveats {
            out.push_str(&format!("  - {c}\n"));
        }
    }
    out
}
