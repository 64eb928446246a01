//! Round orchestration: activation, local training, attacks, scoring,
//! selection, aggregation, election, role rotation, and metric capture.
//!
//! The same loop also drives the non-committee baselines (FedAvg and the
//! robust aggregators) so comparisons share activation draws, training
//! streams, and evaluation code. Every random draw comes from a dedicated
//! `(seed, purpose, round, client)` stream, which makes runs byte-for-byte
//! reproducible and keeps honest clients' randomness untouched when the
//! attack or the strategy changes.

use crate::adversary::{apply_attack, assign_malicious, AttackSpec};
use crate::aggregation;
use crate::committee::{
    elect_committee, score_round, select_aggregation, ScoreTable, ScoredClient, SelectionStrategy,
};
use crate::dataset::{FederatedDataset, Sample};
use crate::error::{Error, Result};
use crate::model::{
    self, grad_full, grad_minibatch, LocalTrace, LossSpec, LrSchedule, ParamVector, UploadMode,
};
use crate::rng::{stream, Purpose};
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

/// Mini-batches drawn per visited iterate when estimating per-client
/// gradient variance.
const SIGMA_PROBES: usize = 4;

/// Smallest parameter displacement considered for a secant-slope estimate.
const SECANT_MIN_STEP: f64 = 1e-12;

/// Aggregation protocol for the global update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Committee mechanism, selection strategy I (keep top-scored uploads).
    CmflI,
    /// Committee mechanism, selection strategy II (keep bottom-scored uploads).
    CmflII,
    /// Sample-weighted averaging of every activated upload.
    FedAvg,
    /// Coordinate-wise median of every activated upload.
    Median,
    /// Coordinate-wise trimmed mean (`trim_beta_percent` per side).
    TrimmedMean,
    /// Krum: the single most-central upload.
    Krum,
    /// Multi-Krum: unweighted mean of the `m` most-central uploads.
    MultiKrum,
}

impl Strategy {
    pub fn is_cmfl(&self) -> bool {
        matches!(self, Strategy::CmflI | Strategy::CmflII)
    }

    pub const ALL: [Strategy; 7] = [
        Strategy::CmflI,
        Strategy::CmflII,
        Strategy::FedAvg,
        Strategy::Median,
        Strategy::TrimmedMean,
        Strategy::Krum,
        Strategy::MultiKrum,
    ];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Strategy::CmflI => "cmfl-i",
            Strategy::CmflII => "cmfl-ii",
            Strategy::FedAvg => "fedavg",
            Strategy::Median => "median",
            Strategy::TrimmedMean => "trimmed-mean",
            Strategy::Krum => "krum",
            Strategy::MultiKrum => "multi-krum",
        };
        f.write_str(name)
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cmfl-i" => Ok(Strategy::CmflI),
            "cmfl-ii" => Ok(Strategy::CmflII),
            "fedavg" => Ok(Strategy::FedAvg),
            "median" => Ok(Strategy::Median),
            "trimmed-mean" => Ok(Strategy::TrimmedMean),
            "krum" => Ok(Strategy::Krum),
            "multi-krum" => Ok(Strategy::MultiKrum),
            other => Err(Error::Config(format!(
                "unknown strategy '{other}' (expected one of: cmfl-i, cmfl-ii, fedavg, \
                 median, trimmed-mean, krum, multi-krum)"
            ))),
        }
    }
}

/// Complete simulation configuration. Sizes that the protocol derives from
/// percentages (A, C, m, f) live in [`Derived`].
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// Total number of clients; must match the dataset's partition count.
    pub k: usize,
    /// Number of global rounds T.
    pub rounds: usize,
    /// Local SGD steps per round.
    pub tau: usize,
    /// Percentage of all clients activated as training clients each round.
    pub activation_percent: f64,
    /// Aggregation-set size as a percentage of activated clients.
    pub alpha_percent: f64,
    /// Committee size as a percentage of activated clients.
    pub omega_percent: f64,
    /// Mini-batch size for local SGD.
    pub batch_size: usize,
    pub schedule: LrSchedule,
    pub strategy: Strategy,
    /// Per-side trim percentage, used only by [`Strategy::TrimmedMean`].
    pub trim_beta_percent: f64,
    /// Attack kind and malicious fraction. The malicious set is assigned
    /// whenever `epsilon_percent > 0`, even under `AttackKind::None`, so
    /// the N1/N2/N3 columns stay comparable across attack ablations.
    pub attack: AttackSpec,
    pub upload_mode: UploadMode,
    /// ℓ2 penalty; also the strong-convexity constant of the objective.
    pub reg_coeff: f64,
    pub seed: u64,
    /// Measure smoothness/variance/gradient-norm statistics along the run
    /// and keep the iterate trace (restricted to K ≤ 20, C ≤ 5 instances).
    pub collect_theory: bool,
    /// Keep every round's score table in the result for CSV export.
    pub export_scores: bool,
}

impl SimConfig {
    /// Baseline defaults: 100 clients, 10% activation, α = ω = 40. Those
    /// percentages make C = m, which the committee protocol rejects, so the
    /// default strategy is plain FedAvg; committee runs must pick a valid
    /// (α, ω) pair explicitly.
    pub fn defaults() -> Self {
        SimConfig {
            k: 100,
            rounds: 50,
            tau: 5,
            activation_percent: 10.0,
            alpha_percent: 40.0,
            omega_percent: 20.0,
            batch_size: 10,
            schedule: LrSchedule::Constant(0.1),
            strategy: Strategy::FedAvg,
            trim_beta_percent: 20.0,
            attack: AttackSpec::none(),
            upload_mode: UploadMode::LastBatchGradient,
            reg_coeff: 0.01,
            seed: 1,
            collect_theory: false,
            export_scores: false,
        }
    }

    /// Resolve the percentage-based sizes.
    pub fn derived(&self) -> Derived {
        let a = ((self.activation_percent / 100.0) * self.k as f64)
            .round()
            .max(1.0) as usize;
        let c = ((((self.omega_percent / 100.0) * a as f64).round()) as usize).max(1);
        let m = ((((self.alpha_percent / 100.0) * a as f64).round()) as usize).max(1);
        let f = ((self.attack.epsilon_percent / 100.0) * a as f64).ceil() as usize;
        Derived { a, c, m, f }
    }

    /// Validate against the dataset and return the derived sizes.
    pub fn validate(&self, dataset: &FederatedDataset) -> Result<Derived> {
        dataset.validate()?;
        if self.k != dataset.k() {
            return Err(Error::Config(format!(
                "config K={} does not match the dataset's {} partitions",
                self.k,
                dataset.k()
            )));
        }
        if self.rounds < 1 {
            return Err(Error::Config("rounds must be >= 1".into()));
        }
        if self.tau < 1 {
            return Err(Error::Config("tau must be >= 1".into()));
        }
        for (name, v) in [
            ("activation_percent", self.activation_percent),
            ("alpha_percent", self.alpha_percent),
            ("omega_percent", self.omega_percent),
        ] {
            if !(v > 0.0 && v <= 100.0) {
                return Err(Error::Config(format!(
                    "{name} must be in (0, 100], got {v}"
                )));
            }
        }
        if !(self.reg_coeff.is_finite() && self.reg_coeff >= 0.0) {
            return Err(Error::Config(format!(
                "reg_coeff must be finite and >= 0, got {}",
                self.reg_coeff
            )));
        }
        self.schedule.validate()?;
        self.attack.validate()?;
        let min_n = dataset
            .partitions
            .iter()
            .map(|p| p.n())
            .min()
            .expect("dataset validated non-empty");
        if self.batch_size < 1 || self.batch_size > min_n {
            return Err(Error::Config(format!(
                "batch_size {} must be in [1, {min_n}] (smallest client partition)",
                self.batch_size
            )));
        }
        let d = self.derived();
        if self.strategy.is_cmfl() {
            if d.c >= d.m {
                return Err(Error::Config(format!(
                    "committee size C={} must be smaller than aggregation size m={} \
                     (raise alpha_percent or lower omega_percent)",
                    d.c, d.m
                )));
            }
            if d.m > d.a {
                return Err(Error::Config(format!(
                    "aggregation size m={} exceeds the {} activated clients",
                    d.m, d.a
                )));
            }
            if d.a + d.c > self.k {
                return Err(Error::Config(format!(
                    "activation A={} plus committee C={} exceeds K={} — the non-committee \
                     pool is too small",
                    d.a, d.c, self.k
                )));
            }
        } else if d.a > self.k {
            return Err(Error::Config(format!(
                "activation A={} exceeds K={}",
                d.a, self.k
            )));
        }
        match self.strategy {
            Strategy::Krum | Strategy::MultiKrum => {
                if d.a < d.f + 3 {
                    return Err(Error::Config(format!(
                        "krum needs A >= f + 3 activated clients, got A={}, f={}",
                        d.a, d.f
                    )));
                }
                if self.strategy == Strategy::MultiKrum && d.m > d.a {
                    return Err(Error::Config(format!(
                        "multi-krum selection m={} exceeds A={}",
                        d.m, d.a
                    )));
                }
            }
            Strategy::TrimmedMean => {
                if !(0.0..50.0).contains(&self.trim_beta_percent) {
                    return Err(Error::Config(format!(
                        "trim_beta_percent must be in [0, 50), got {}",
                        self.trim_beta_percent
                    )));
                }
                let cut = ((self.trim_beta_percent / 100.0) * d.a as f64).floor() as usize;
                if 2 * cut >= d.a {
                    return Err(Error::Config(format!(
                        "trimming {cut} per side leaves no survivors out of A={}",
                        d.a
                    )));
                }
            }
            _ => {}
        }
        if self.collect_theory && (self.k > 20 || d.c > 5) {
            return Err(Error::Config(format!(
                "theory diagnostics need K <= 20 and C <= 5 for the exhaustive committee \
                 search, got K={}, C={}",
                self.k, d.c
            )));
        }
        Ok(d)
    }
}

/// Sizes resolved from the percentage-based configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Derived {
    /// Activated training clients per round.
    pub a: usize,
    /// Committee size.
    pub c: usize,
    /// Aggregation-set size (also Multi-Krum's selection count).
    pub m: usize,
    /// Byzantine count assumed by Krum: ceil(ε% · A).
    pub f: usize,
}

/// Everything recorded about one completed round. Losses and accuracy are
/// evaluated at the post-update global model; `s_b`/`s_c`/`s_a` are sorted
/// ascending, with the leader kept separately (it is the highest-scored
/// member of `s_a`).
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub s_b: Vec<usize>,
    pub s_c: Vec<usize>,
    pub s_a: Vec<usize>,
    /// Final scores aligned with `s_b`; empty for non-committee strategies.
    pub final_scores: Vec<f64>,
    pub leader: Option<usize>,
    /// Malicious training clients this round.
    pub n1: usize,
    /// Malicious committee members this round.
    pub n2: usize,
    /// Malicious clients whose uploads entered the global update.
    pub n3: usize,
    pub lr: f64,
}

/// Per-run measurements backing the theory diagnostics, collected only when
/// `collect_theory` is set.
#[derive(Clone, Debug)]
pub struct TheoryTrace {
    /// Global model at the start of each round (index 0 = round 1's model).
    pub iterates: Vec<ParamVector>,
    /// Aggregation-set ids per round, ascending.
    pub s_a: Vec<Vec<usize>>,
    /// Max squared norm over every stochastic gradient the run computed.
    pub g_hat_sq: f64,
    /// Max secant slope ‖∇F_k(v)−∇F_k(w)‖/‖v−w‖ along local trajectories.
    pub l_secant: f64,
    /// Per-client variance estimates (max over visited iterates).
    pub sigma_sq: Vec<f64>,
    /// Which clients were ever probed; unprobed entries of `sigma_sq` are 0
    /// and should be substituted conservatively by consumers.
    pub sigma_measured: Vec<bool>,
}

impl TheoryTrace {
    fn new(k: usize) -> Self {
        TheoryTrace {
            iterates: Vec::new(),
            s_a: Vec::new(),
            g_hat_sq: 0.0,
            l_secant: 0.0,
            sigma_sq: vec![0.0; k],
            sigma_measured: vec![false; k],
        }
    }

    /// Fold one participant's local trajectory into the estimates.
    fn absorb(
        &mut self,
        cfg: &SimConfig,
        dataset: &FederatedDataset,
        spec: &LossSpec,
        round: usize,
        id: usize,
        trace: &LocalTrace,
    ) -> Result<()> {
        for &g2 in &trace.step_grad_sq {
            self.g_hat_sq = self.g_hat_sq.max(g2);
        }
        if let Some(u) = trace.upload_grad_sq {
            self.g_hat_sq = self.g_hat_sq.max(u);
        }
        let part = &dataset.partitions[id];
        let fulls: Vec<ParamVector> = trace
            .iterates
            .iter()
            .map(|w| grad_full(w, part, spec))
            .collect::<Result<_>>()?;
        for i in 0..fulls.len().saturating_sub(1) {
            let dw = trace.iterates[i + 1].sub(&trace.iterates[i]).norm();
            if dw > SECANT_MIN_STEP {
                let dg = fulls[i + 1].sub(&fulls[i]).norm();
                self.l_secant = self.l_secant.max(dg / dw);
            }
        }
        let mut probe_rng = stream(cfg.seed, Purpose::SigmaProbe, round as u64, id as u64);
        for (w, g_full) in trace.iterates.iter().zip(&fulls) {
            let mut acc = 0.0;
            for _ in 0..SIGMA_PROBES {
                let batch = model::sample_batch(part, cfg.batch_size, &mut probe_rng);
                let g = grad_minibatch(w, &batch, spec)?;
                acc += g.sub(g_full).norm_sq();
            }
            let est = acc / SIGMA_PROBES as f64;
            if est > self.sigma_sq[id] {
                self.sigma_sq[id] = est;
            }
        }
        self.sigma_measured[id] = true;
        Ok(())
    }
}

/// One full simulation's output.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub records: Vec<RoundRecord>,
    pub final_params: ParamVector,
    pub config: SimConfig,
    pub wall_time: Duration,
    pub theory: Option<TheoryTrace>,
    /// `(round, table, s_b ids, s_c ids)` per round when `export_scores`.
    pub score_tables: Vec<(usize, ScoreTable, Vec<usize>, Vec<usize>)>,
}

impl RunResult {
    pub fn final_record(&self) -> &RoundRecord {
        self.records.last().expect("run produced at least one round")
    }
}

/// Loss and accuracy of `params` over a sample set (loss includes the ℓ2
/// penalty, matching the training objective).
pub fn evaluate(params: &ParamVector, samples: &[Sample], spec: &LossSpec) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Domain("evaluation over an empty sample set".into()));
    }
    let loss = model::loss(params, samples, spec)?;
    let correct = samples
        .iter()
        .filter(|s| model::predict(params, spec, s) == s.label)
        .count();
    Ok((loss, correct as f64 / samples.len() as f64))
}

/// Execute the full training algorithm.
///
/// Per round: activate training clients, run local SGD on every participant
/// (training clients and, for committee strategies, the committee), apply
/// attacks to malicious uploads, score and select (committee strategies) or
/// aggregate directly (baselines), apply the global update, elect the next
/// committee, and record metrics at the post-update model.
pub fn run(
    cfg: &SimConfig,
    dataset: &FederatedDataset,
    holdout: &[Sample],
) -> Result<RunResult> {
    let start_time = Instant::now();
    let sizes = cfg.validate(dataset)?;
    if holdout.is_empty() {
        return Err(Error::Config("a non-empty holdout set is required".into()));
    }
    let spec = LossSpec {
        num_classes: dataset.num_classes,
        d_in: dataset.d_in,
        reg_coeff: cfg.reg_coeff,
    };
    spec.validate()?;
    let malicious: BTreeSet<usize> = assign_malicious(cfg.k, cfg.attack.epsilon_percent, cfg.seed)?;
    let pooled = dataset.pooled();

    let mut w = ParamVector::zeros(spec.dim());
    let mut committee: Vec<usize> = if cfg.strategy.is_cmfl() {
        let mut rng = stream(cfg.seed, Purpose::CommitteeInit, 0, 0);
        let mut ids: Vec<usize> = rand::seq::index::sample(&mut rng, cfg.k, sizes.c)
            .into_iter()
            .collect();
        ids.sort_unstable();
        ids
    } else {
        Vec::new()
    };

    let mut records: Vec<RoundRecord> = Vec::with_capacity(cfg.rounds);
    let mut theory = cfg.collect_theory.then(|| TheoryTrace::new(cfg.k));
    let mut score_tables = Vec::new();

    for t in 1..=cfg.rounds {
        if let Some(th) = theory.as_mut() {
            th.iterates.push(w.clone());
        }
        let eta = cfg.schedule.eta(t);
        let s_c_now = committee.clone();

        // Activation: training clients come from the non-committee pool
        // under committee strategies, from everyone otherwise.
        let s_b: Vec<usize> = {
            let pool: Vec<usize> = (0..cfg.k).filter(|id| !s_c_now.contains(id)).collect();
            let mut rng = stream(cfg.seed, Purpose::Activation, t as u64, 0);
            let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, pool.len(), sizes.a)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            picked.sort_unstable();
            picked
        };

        // Local training. Every participant trains from the same global
        // model on its own (round, client) batch stream.
        let train_one = |id: usize, theory: &mut Option<TheoryTrace>| -> Result<ParamVector> {
            let mut rng = stream(cfg.seed, Purpose::Batches, t as u64, id as u64);
            let part = &dataset.partitions[id];
            if let Some(th) = theory.as_mut() {
                let (_, upload, trace) = model::local_sgd_traced(
                    &w,
                    part,
                    &spec,
                    cfg.tau,
                    cfg.batch_size,
                    &cfg.schedule,
                    t,
                    cfg.upload_mode,
                    &mut rng,
                )?;
                th.absorb(cfg, dataset, &spec, t, id, &trace)?;
                Ok(upload)
            } else {
                let (_, upload) = model::local_sgd(
                    &w,
                    part,
                    &spec,
                    cfg.tau,
                    cfg.batch_size,
                    &cfg.schedule,
                    t,
                    cfg.upload_mode,
                    &mut rng,
                )?;
                Ok(upload)
            }
        };
        let mut uploads: Vec<ParamVector> = Vec::with_capacity(s_b.len());
        for &id in &s_b {
            uploads.push(train_one(id, &mut theory)?);
        }
        let mut committee_grads: Vec<ParamVector> = Vec::with_capacity(s_c_now.len());
        for &id in &s_c_now {
            committee_grads.push(train_one(id, &mut theory)?);
        }

        // Attacks replace malicious uploads; everyone else's bytes are
        // untouched because attack draws live on their own stream.
        if cfg.attack.is_active() {
            for (i, &id) in s_b.iter().enumerate() {
                if malicious.contains(&id) {
                    let mut rng = stream(cfg.seed, Purpose::Attack, t as u64, id as u64);
                    uploads[i] = apply_attack(&uploads[i], &cfg.attack, &mut rng);
                }
            }
            if cfg.attack.attack_committee {
                for (i, &id) in s_c_now.iter().enumerate() {
                    if malicious.contains(&id) {
                        let mut rng = stream(cfg.seed, Purpose::Attack, t as u64, id as u64);
                        committee_grads[i] = apply_attack(&committee_grads[i], &cfg.attack, &mut rng);
                    }
                }
            }
        }

        let upload_of = |id: usize| -> ParamVector {
            let i = s_b.binary_search(&id).expect("aggregation ids come from S_b");
            uploads[i].clone()
        };

        // Scoring + selection (committee strategies) or direct robust
        // aggregation (baselines).
        let mut final_scores: Vec<f64> = Vec::new();
        let mut leader: Option<usize> = None;
        let mut next_committee: Option<Vec<usize>> = None;
        let (s_a_ids, aggregate): (Vec<usize>, ParamVector) = match cfg.strategy {
            Strategy::CmflI | Strategy::CmflII => {
                let table = score_round(&uploads, &committee_grads).map_err(|e| match e {
                    Error::DegenerateScore { k, c, dist_sq } => Error::RunAbort {
                        round: t,
                        reason: format!(
                            "degenerate score: training client {} and committee member {} \
                             uploaded identical gradients (squared distance {dist_sq:e})",
                            s_b[k], s_c_now[c]
                        ),
                    },
                    other => other,
                })?;
                let scored: Vec<ScoredClient> = s_b
                    .iter()
                    .zip(&table.final_scores)
                    .map(|(&id, &score)| ScoredClient { id, score })
                    .collect();
                let sel = if cfg.strategy == Strategy::CmflI {
                    SelectionStrategy::TopScores
                } else {
                    SelectionStrategy::BottomScores
                };
                let s_a = select_aggregation(&scored, sel, sizes.m)?;
                leader = Some(s_a[0].id);
                next_committee = Some(elect_committee(&s_a, sizes.c)?);
                final_scores = table.final_scores.clone();
                if cfg.export_scores {
                    score_tables.push((t, table, s_b.clone(), s_c_now.clone()));
                }
                let mut ids: Vec<usize> = s_a.iter().map(|s| s.id).collect();
                ids.sort_unstable();
                let totals: f64 = ids.iter().map(|&i| dataset.partitions[i].n() as f64).sum();
                let wts: Vec<f64> = ids
                    .iter()
                    .map(|&i| dataset.partitions[i].n() as f64 / totals)
                    .collect();
                let grads: Vec<ParamVector> = ids.iter().map(|&i| upload_of(i)).collect();
                let agg = aggregation::fedavg(&grads, &wts)?;
                (ids, agg)
            }
            Strategy::FedAvg => {
                let totals: f64 = s_b.iter().map(|&i| dataset.partitions[i].n() as f64).sum();
                let wts: Vec<f64> = s_b
                    .iter()
                    .map(|&i| dataset.partitions[i].n() as f64 / totals)
                    .collect();
                let agg = aggregation::fedavg(&uploads, &wts)?;
                (s_b.clone(), agg)
            }
            Strategy::Median => {
                let agg = aggregation::coordinate_median(&uploads)?;
                (s_b.clone(), agg)
            }
            Strategy::TrimmedMean => {
                let agg = aggregation::trimmed_mean(&uploads, cfg.trim_beta_percent)?;
                (s_b.clone(), agg)
            }
            Strategy::Krum => {
                let (agg, idx) = aggregation::krum(&uploads, sizes.f)?;
                (vec![s_b[idx]], agg)
            }
            Strategy::MultiKrum => {
                let (agg, selected) = aggregation::multi_krum(&uploads, sizes.f, sizes.m)?;
                let mut ids: Vec<usize> = selected.into_iter().map(|i| s_b[i]).collect();
                ids.sort_unstable();
                (ids, agg)
            }
        };

        // Global update at the leader, then committee rotation.
        w.add_scaled(-eta, &aggregate);
        if !w.is_finite() {
            return Err(Error::RunAbort {
                round: t,
                reason: "global parameters diverged to non-finite values".into(),
            });
        }
        if let Some(mut next) = next_committee {
            next.sort_unstable();
            committee = next;
        }
        if let Some(th) = theory.as_mut() {
            th.s_a.push(s_a_ids.clone());
        }

        let n1 = s_b.iter().filter(|id| malicious.contains(id)).count();
        let n2 = s_c_now.iter().filter(|id| malicious.contains(id)).count();
        let n3 = s_a_ids.iter().filter(|id| malicious.contains(id)).count();
        let (train_loss, _) = evaluate(&w, &pooled, &spec)?;
        let (test_loss, test_accuracy) = evaluate(&w, holdout, &spec)?;
        records.push(RoundRecord {
            round: t,
            train_loss,
            test_loss,
            test_accuracy,
            s_b,
            s_c: s_c_now,
            s_a: s_a_ids,
            final_scores,
            leader,
            n1,
            n2,
            n3,
            lr: eta,
        });
    }

    Ok(RunResult {
        records,
        final_params: w,
        config: cfg.clone(),
        wall_time: start_time.elapsed(),
        theory,
        score_tables,
    })
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Hyperparameter grid over (α, ω, ε); the cross product defines the cells.
#[derive(Clone, Debug)]
pub struct SweepGrid {
    pub alphas: Vec<f64>,
    pub omegas: Vec<f64>,
    pub epsilons: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellStatus {
    Ok,
    /// The (α, ω, ε) combination fails config validation (e.g. C ≥ m).
    Invalid,
    /// At least one seed aborted mid-run; means cover the completed seeds.
    Aborted,
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellStatus::Ok => "ok",
            CellStatus::Invalid => "invalid",
            CellStatus::Aborted => "aborted",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SweepCell {
    pub alpha: f64,
    pub omega: f64,
    pub epsilon: f64,
    pub status: CellStatus,
    pub seeds_completed: usize,
    pub mean_final_accuracy: Option<f64>,
    pub mean_final_test_loss: Option<f64>,
    pub note: String,
}

/// Run the grid's cross product; cells run in parallel, seeds within a cell
/// sequentially. Invalid combinations are marked, not fatal.
pub fn sweep(
    base: &SimConfig,
    dataset: &FederatedDataset,
    holdout: &[Sample],
    grid: &SweepGrid,
    seeds: &[u64],
) -> Result<Vec<SweepCell>> {
    if seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    if grid.alphas.is_empty() || grid.omegas.is_empty() || grid.epsilons.is_empty() {
        return Err(Error::Config("sweep grid axes must be non-empty".into()));
    }
    let mut combos = Vec::new();
    for &alpha in &grid.alphas {
        for &omega in &grid.omegas {
            for &epsilon in &grid.epsilons {
                combos.push((alpha, omega, epsilon));
            }
        }
    }
    let cells: Vec<SweepCell> = combos
        .par_iter()
        .map(|&(alpha, omega, epsilon)| {
            let mut cfg = base.clone();
            cfg.alpha_percent = alpha;
            cfg.omega_percent = omega;
            cfg.attack.epsilon_percent = epsilon;
            cfg.collect_theory = false;
            cfg.export_scores = false;
            if let Err(e) = cfg.validate(dataset) {
                return SweepCell {
                    alpha,
                    omega,
                    epsilon,
                    status: CellStatus::Invalid,
                    seeds_completed: 0,
                    mean_final_accuracy: None,
                    mean_final_test_loss: None,
                    note: clean_note(&e.to_string()),
                };
            }
            let mut accs = Vec::new();
            let mut losses = Vec::new();
            let mut note = String::new();
            let mut aborted = false;
            for &seed in seeds {
                cfg.seed = seed;
                match run(&cfg, dataset, holdout) {
                    Ok(res) => {
                        let rec = res.final_record();
                        accs.push(rec.test_accuracy);
                        losses.push(rec.test_loss);
                    }
                    Err(e) => {
                        aborted = true;
                        if note.is_empty() {
                            note = clean_note(&format!("seed {seed}: {e}"));
                        }
                    }
                }
            }
            let mean = |v: &[f64]| {
                if v.is_empty() {
                    None
                } else {
                    Some(v.iter().sum::<f64>() / v.len() as f64)
                }
            };
            SweepCell {
                alpha,
                omega,
                epsilon,
                status: if aborted { CellStatus::Aborted } else { CellStatus::Ok },
                seeds_completed: accs.len(),
                mean_final_accuracy: mean(&accs),
                mean_final_test_loss: mean(&losses),
                note,
            }
        })
        .collect();
    Ok(cells)
}

fn clean_note(msg: &str) -> String {
    msg.replace(',', ";").replace('\n', " ")
}

// ---------------------------------------------------------------------------
// Artifact writers
// ---------------------------------------------------------------------------

/// Write `content` to `path` atomically (temp file in the same directory,
/// then rename), creating parent directories as needed.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => Path::new(".").to_path_buf(),
    };
    fs::create_dir_all(&dir)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!("{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Per-round metrics in the run's canonical CSV layout.
pub fn metrics_csv(records: &[RoundRecord]) -> String {
    let mut out = String::from("round,train_loss,test_loss,test_accuracy,leader,N1,N2,N3,lr\n");
    for r in records {
        let leader = r.leader.map(|l| l.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{leader},{},{},{},{}\n",
            r.round, r.train_loss, r.test_loss, r.test_accuracy, r.n1, r.n2, r.n3, r.lr
        ));
    }
    out
}

pub fn write_metrics(path: &Path, records: &[RoundRecord]) -> Result<()> {
    write_atomic(path, &metrics_csv(records))
}

/// Long-format role assignments: `round,role,client`.
pub fn roles_csv(records: &[RoundRecord]) -> String {
    let mut out = String::from("round,role,client\n");
    for r in records {
        for &id in &r.s_b {
            out.push_str(&format!("{},training,{id}\n", r.round));
        }
        for &id in &r.s_c {
            out.push_str(&format!("{},committee,{id}\n", r.round));
        }
        for &id in &r.s_a {
            out.push_str(&format!("{},aggregation,{id}\n", r.round));
        }
        if let Some(l) = r.leader {
            out.push_str(&format!("{},leader,{l}\n", r.round));
        }
    }
    out
}

pub fn write_roles(path: &Path, records: &[RoundRecord]) -> Result<()> {
    write_atomic(path, &roles_csv(records))
}

/// Run snapshot: config echo plus the final parameter vector, one value per
/// line in shortest round-trip decimal.
pub fn format_snapshot(config_echo: &str, params: &ParamVector) -> String {
    let mut out = String::from("cmfl-run v1\n[config]\n");
    let trimmed = config_echo.trim_end();
    if !trimmed.is_empty() {
        out.push_str(trimmed);
        out.push('\n');
    }
    out.push_str("[final_params]\n");
    out.push_str(&format!("dim={}\n", params.dim()));
    for v in &params.values {
        out.push_str(&format!("{v}\n"));
    }
    out
}

/// Parse a snapshot back into `(config key/value pairs, final params)`.
pub fn parse_snapshot(text: &str, path_label: &str) -> Result<(Vec<(String, String)>, ParamVector)> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path_label.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "cmfl-run v1")) => {}
        other => {
            return Err(err(
                1,
                format!("expected header 'cmfl-run v1', got {:?}", other.map(|(_, l)| l)),
            ))
        }
    }
    match lines.next() {
        Some((_, "[config]")) => {}
        other => {
            return Err(err(
                2,
                format!("expected '[config]', got {:?}", other.map(|(_, l)| l)),
            ))
        }
    }
    let mut pairs = Vec::new();
    let mut dim_line = None;
    for (i, line) in lines.by_ref() {
        if line == "[final_params]" {
            dim_line = Some(i + 2);
            break;
        }
        match line.split_once('=') {
            Some((k, v)) => pairs.push((k.to_string(), v.to_string())),
            None => return Err(err(i + 1, format!("expected key=value, got '{line}'"))),
        }
    }
    let dim_at = dim_line.ok_or_else(|| err(text.lines().count(), "missing [final_params] section".into()))?;
    let dim: usize = match lines.next() {
        Some((_, l)) if l.starts_with("dim=") => l[4..]
            .parse()
            .map_err(|e| err(dim_at, format!("bad dim: {e}")))?,
        other => {
            return Err(err(
                dim_at,
                format!("expected 'dim=<n>', got {:?}", other.map(|(_, l)| l)),
            ))
        }
    };
    let mut values = Vec::with_capacity(dim);
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|e| err(i + 1, format!("bad parameter value '{line}': {e}")))?;
        values.push(v);
    }
    if values.len() != dim {
        return Err(err(
            text.lines().count(),
            format!("expected {dim} parameter values, found {}", values.len()),
        ));
    }
    Ok((pairs, ParamVector::from_values(values)))
}

pub fn write_snapshot(path: &Path, config_echo: &str, params: &ParamVector) -> Result<()> {
    write_atomic(path, &format_snapshot(config_echo, params))
}

/// Sweep results as CSV, one row per cell in grid order.
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from(
        "alpha,omega,epsilon,status,seeds_completed,mean_final_accuracy,mean_final_test_loss,note\n",
    );
    for c in cells {
        let acc = c.mean_final_accuracy.map(|v| v.to_string()).unwrap_or_default();
        let loss = c.mean_final_test_loss.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{acc},{loss},{}\n",
            c.alpha, c.omega, c.epsilon, c.status, c.seeds_completed, c.note
        ));
    }
    out
}
