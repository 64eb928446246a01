//! Command-line front end: flat key=value config files with flag overrides,
//! experiment presets, artifact export, and the report reader.
//!
//! The config format is a flat `key = value` text file ('#' starts a
//! comment). [`echo_config`] emits a canonical echo whose re-parse yields an
//! identical [`RunSpec`], and every command writes its artifacts atomically
//! so re-running a preset into a fresh directory reproduces files
//! byte-identically.

use crate::adversary::{AttackKind, AttackSpec};
use crate::committee::append_score_csv;
use crate::dataset::{
    generate_synthetic, load_partitions, partition, save_partitions, split_holdout,
    FederatedDataset, PartitionScheme, Sample,
};
use crate::diagnostics::{
    analyze_run, compute_optima, pooled_theorem_check, render_theory_report, theory_csv,
    verdict_line, TheoryReport, DEFAULT_OPT_TOL,
};
use crate::engine::{
    run, sweep, sweep_csv, write_atomic, write_metrics, write_roles, write_snapshot, RunResult,
    SimConfig, Strategy, SweepGrid,
};
use crate::error::{Error, Result};
use crate::model::{LossSpec, LrSchedule, UploadMode};
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Default scaling-attack floor when `attack = scaling` is chosen without an
/// explicit `scaling_floor`.
pub const DEFAULT_SCALING_FLOOR: f64 = 0.1;
/// Seeds presets run when none are given.
pub const DEFAULT_PRESET_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

// ---------------------------------------------------------------------------
// Run specification: simulation config + data source
// ---------------------------------------------------------------------------

/// Where the federated dataset comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    /// Generate Gaussian blobs and partition them in-process.
    Synthetic,
    /// Load a partitions file and a holdout file written by `gen-data`.
    Files {
        partitions: PathBuf,
        holdout: PathBuf,
    },
}

/// Dataset recipe. The synthetic fields are ignored for [`DataSource::Files`].
#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub source: DataSource,
    pub classes: usize,
    pub dim: usize,
    /// Generated samples per class, before the holdout split.
    pub per_class: usize,
    pub separation: f64,
    pub holdout_per_class: usize,
    pub scheme: PartitionScheme,
    pub seed: u64,
}

impl DataConfig {
    pub fn defaults() -> Self {
        DataConfig {
            source: DataSource::Synthetic,
            classes: 10,
            dim: 8,
            per_class: 150,
            separation: 3.0,
            holdout_per_class: 50,
            scheme: PartitionScheme::LabelShard {
                shards_per_client: 1,
            },
            seed: 7,
        }
    }
}

/// Everything one `run` needs: the simulation config plus the data recipe.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub sim: SimConfig,
    pub data: DataConfig,
}

impl RunSpec {
    pub fn defaults() -> Self {
        RunSpec {
            sim: SimConfig::defaults(),
            data: DataConfig::defaults(),
        }
    }
}

/// Materialize the dataset and holdout set for a spec.
pub fn load_data(data: &DataConfig, k: usize) -> Result<(FederatedDataset, Vec<Sample>)> {
    match &data.source {
        DataSource::Synthetic => {
            let samples = generate_synthetic(
                data.classes,
                data.dim,
                data.per_class,
                data.separation,
                data.seed,
            )?;
            let (train, holdout) = split_holdout(&samples, data.classes, data.holdout_per_class)?;
            let ds = partition(&train, k, data.scheme, data.seed)?;
            Ok((ds, holdout))
        }
        DataSource::Files {
            partitions,
            holdout,
        } => {
            let ds = load_partitions(partitions)?;
            let holdout = load_partitions(holdout)?.pooled();
            Ok((ds, holdout))
        }
    }
}

// ---------------------------------------------------------------------------
// Value parsing helpers
// ---------------------------------------------------------------------------

fn bad(key: &str, value: &str, want: &str) -> Error {
    Error::Config(format!("key `{key}`: cannot parse `{value}` as {want}"))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| bad(key, v, "an unsigned integer"))
}

fn parse_u64(key: &str, v: &str) -> Result<u64> {
    v.parse().map_err(|_| bad(key, v, "an unsigned integer"))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse().map_err(|_| bad(key, v, "a number"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, v, "`true` or `false`")),
    }
}

/// `constant:0.1` or `theorem-decay:0.1,3.0`.
pub fn parse_lr(key: &str, v: &str) -> Result<LrSchedule> {
    if let Some(rest) = v.strip_prefix("constant:") {
        return Ok(LrSchedule::Constant(parse_f64(key, rest.trim())?));
    }
    if let Some(rest) = v.strip_prefix("theorem-decay:") {
        let (mu, l) = rest
            .split_once(',')
            .ok_or_else(|| bad(key, v, "`theorem-decay:mu,L`"))?;
        return Ok(LrSchedule::TheoremDecay {
            mu: parse_f64(key, mu.trim())?,
            l: parse_f64(key, l.trim())?,
        });
    }
    Err(bad(key, v, "`constant:eta` or `theorem-decay:mu,L`"))
}

pub fn lr_string(s: &LrSchedule) -> String {
    match s {
        LrSchedule::Constant(eta) => format!("constant:{eta}"),
        LrSchedule::TheoremDecay { mu, l } => format!("theorem-decay:{mu},{l}"),
    }
}

/// `iid`, `label-shard:N`, or `dirichlet:conc`.
pub fn parse_scheme(key: &str, v: &str) -> Result<PartitionScheme> {
    if v == "iid" {
        return Ok(PartitionScheme::Iid);
    }
    if let Some(rest) = v.strip_prefix("label-shard:") {
        return Ok(PartitionScheme::LabelShard {
            shards_per_client: parse_usize(key, rest.trim())?,
        });
    }
    if let Some(rest) = v.strip_prefix("dirichlet:") {
        return Ok(PartitionScheme::Dirichlet {
            concentration: parse_f64(key, rest.trim())?,
        });
    }
    Err(bad(key, v, "`iid`, `label-shard:N`, or `dirichlet:conc`"))
}

pub fn scheme_string(s: &PartitionScheme) -> String {
    match s {
        PartitionScheme::Iid => "iid".to_string(),
        PartitionScheme::LabelShard { shards_per_client } => {
            format!("label-shard:{shards_per_client}")
        }
        PartitionScheme::Dirichlet { concentration } => format!("dirichlet:{concentration}"),
    }
}

/// Attack kind names as they appear in configs and flags. The scaling floor
/// is carried by the separate `scaling_floor` key.
pub fn parse_attack_kind(key: &str, v: &str, floor: f64) -> Result<AttackKind> {
    match v {
        "none" => Ok(AttackKind::None),
        "scaling" => Ok(AttackKind::GradientScaling { floor }),
        "same-value" => Ok(AttackKind::SameValue),
        "back-gradient" => Ok(AttackKind::BackGradient),
        _ => Err(bad(
            key,
            v,
            "`none`, `scaling`, `same-value`, or `back-gradient`",
        )),
    }
}

pub fn attack_kind_string(kind: &AttackKind) -> &'static str {
    match kind {
        AttackKind::None => "none",
        AttackKind::GradientScaling { .. } => "scaling",
        AttackKind::SameValue => "same-value",
        AttackKind::BackGradient => "back-gradient",
    }
}

fn parse_upload(key: &str, v: &str) -> Result<UploadMode> {
    match v {
        "last-batch" => Ok(UploadMode::LastBatchGradient),
        "pseudo" => Ok(UploadMode::PseudoGradient),
        _ => Err(bad(key, v, "`last-batch` or `pseudo`")),
    }
}

fn upload_string(m: UploadMode) -> &'static str {
    match m {
        UploadMode::LastBatchGradient => "last-batch",
        UploadMode::PseudoGradient => "pseudo",
    }
}

// ---------------------------------------------------------------------------
// Config parse and echo
// ---------------------------------------------------------------------------

/// Parse a flat key=value config into a [`RunSpec`]. Unknown and duplicate
/// keys are errors naming the key; range checks beyond syntax live in
/// `SimConfig::validate`.
pub fn parse_run_spec(text: &str, path_label: &str) -> Result<RunSpec> {
    let mut spec = RunSpec::defaults();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    // Attack pieces may arrive in any key order; assembled afterwards.
    let mut attack_name: Option<String> = None;
    let mut scaling_floor: Option<f64> = None;
    let mut scaling_per_gradient: Option<bool> = None;
    let mut data_source_name: Option<String> = None;
    let mut data_partitions: Option<PathBuf> = None;
    let mut data_holdout: Option<PathBuf> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path_label.to_string(),
            line: line_no,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) {
            return Err(Error::Parse {
                path: path_label.to_string(),
                line: line_no,
                msg: format!("duplicate key `{key}`"),
            });
        }
        match key {
            "k" => spec.sim.k = parse_usize(key, value)?,
            "rounds" => spec.sim.rounds = parse_usize(key, value)?,
            "tau" => spec.sim.tau = parse_usize(key, value)?,
            "activation_percent" => spec.sim.activation_percent = parse_f64(key, value)?,
            "alpha_percent" => spec.sim.alpha_percent = parse_f64(key, value)?,
            "omega_percent" => spec.sim.omega_percent = parse_f64(key, value)?,
            "batch_size" => spec.sim.batch_size = parse_usize(key, value)?,
            "lr" => spec.sim.schedule = parse_lr(key, value)?,
            "strategy" => {
                spec.sim.strategy = value
                    .parse()
                    .map_err(|e: Error| Error::Config(format!("key `strategy`: {e}")))?
            }
            "trim_beta_percent" => spec.sim.trim_beta_percent = parse_f64(key, value)?,
            "attack" => attack_name = Some(value.to_string()),
            "epsilon_percent" => spec.sim.attack.epsilon_percent = parse_f64(key, value)?,
            "scaling_floor" => scaling_floor = Some(parse_f64(key, value)?),
            "scaling_per_gradient" => scaling_per_gradient = Some(parse_bool(key, value)?),
            "attack_committee" => spec.sim.attack.attack_committee = parse_bool(key, value)?,
            "upload" => spec.sim.upload_mode = parse_upload(key, value)?,
            "reg_coeff" => spec.sim.reg_coeff = parse_f64(key, value)?,
            "seed" => spec.sim.seed = parse_u64(key, value)?,
            "collect_theory" => spec.sim.collect_theory = parse_bool(key, value)?,
            "export_scores" => spec.sim.export_scores = parse_bool(key, value)?,
            "data" => data_source_name = Some(value.to_string()),
            "data_partitions" => data_partitions = Some(PathBuf::from(value)),
            "data_holdout" => data_holdout = Some(PathBuf::from(value)),
            "data_classes" => spec.data.classes = parse_usize(key, value)?,
            "data_dim" => spec.data.dim = parse_usize(key, value)?,
            "data_per_class" => spec.data.per_class = parse_usize(key, value)?,
            "data_separation" => spec.data.separation = parse_f64(key, value)?,
            "data_holdout_per_class" => spec.data.holdout_per_class = parse_usize(key, value)?,
            "data_scheme" => spec.data.scheme = parse_scheme(key, value)?,
            "data_seed" => spec.data.seed = parse_u64(key, value)?,
            _ => {
                return Err(Error::Parse {
                    path: path_label.to_string(),
                    line: line_no,
                    msg: format!("unknown key `{key}`"),
                })
            }
        }
    }

    // Assemble the attack.
    let name = attack_name.unwrap_or_else(|| "none".to_string());
    if name != "scaling" && (scaling_floor.is_some() || scaling_per_gradient.is_some()) {
        return Err(Error::Config(format!(
            "scaling_floor/scaling_per_gradient are only valid with attack = scaling \
             (attack is `{name}`)"
        )));
    }
    spec.sim.attack.kind =
        parse_attack_kind("attack", &name, scaling_floor.unwrap_or(DEFAULT_SCALING_FLOOR))?;
    if let Some(pg) = scaling_per_gradient {
        spec.sim.attack.per_gradient_lambda = pg;
    }

    // Assemble the data source.
    match data_source_name.as_deref() {
        None | Some("synthetic") => {
            if data_partitions.is_some() || data_holdout.is_some() {
                return Err(Error::Config(
                    "data_partitions/data_holdout are only valid with data = files".into(),
                ));
            }
            spec.data.source = DataSource::Synthetic;
        }
        Some("files") => {
            let partitions = data_partitions.ok_or_else(|| {
                Error::Config("data = files requires data_partitions = <path>".into())
            })?;
            let holdout = data_holdout.ok_or_else(|| {
                Error::Config("data = files requires data_holdout = <path>".into())
            })?;
            spec.data.source = DataSource::Files {
                partitions,
                holdout,
            };
        }
        Some(other) => {
            return Err(Error::Config(format!(
                "key `data`: expected `synthetic` or `files`, got `{other}`"
            )))
        }
    }
    Ok(spec)
}

/// Canonical echo of a spec. `parse_run_spec(echo_config(s)) == s`, and the
/// derived sizes are included as comments.
pub fn echo_config(spec: &RunSpec) -> String {
    let d = spec.sim.derived();
    let mut out = String::new();
    let _ = writeln!(out, "# cmfl run configuration");
    let _ = writeln!(
        out,
        "# derived sizes: A={} C={} m={} f={}",
        d.a, d.c, d.m, d.f
    );
    let _ = writeln!(out, "k = {}", spec.sim.k);
    let _ = writeln!(out, "rounds = {}", spec.sim.rounds);
    let _ = writeln!(out, "tau = {}", spec.sim.tau);
    let _ = writeln!(out, "activation_percent = {}", spec.sim.activation_percent);
    let _ = writeln!(out, "alpha_percent = {}", spec.sim.alpha_percent);
    let _ = writeln!(out, "omega_percent = {}", spec.sim.omega_percent);
    let _ = writeln!(out, "batch_size = {}", spec.sim.batch_size);
    let _ = writeln!(out, "lr = {}", lr_string(&spec.sim.schedule));
    let _ = writeln!(out, "strategy = {}", spec.sim.strategy);
    let _ = writeln!(out, "trim_beta_percent = {}", spec.sim.trim_beta_percent);
    let _ = writeln!(out, "attack = {}", attack_kind_string(&spec.sim.attack.kind));
    let _ = writeln!(out, "epsilon_percent = {}", spec.sim.attack.epsilon_percent);
    if let AttackKind::GradientScaling { floor } = spec.sim.attack.kind {
        let _ = writeln!(out, "scaling_floor = {floor}");
        let _ = writeln!(
            out,
            "scaling_per_gradient = {}",
            spec.sim.attack.per_gradient_lambda
        );
    }
    let _ = writeln!(out, "attack_committee = {}", spec.sim.attack.attack_committee);
    let _ = writeln!(out, "upload = {}", upload_string(spec.sim.upload_mode));
    let _ = writeln!(out, "reg_coeff = {}", spec.sim.reg_coeff);
    let _ = writeln!(out, "seed = {}", spec.sim.seed);
    let _ = writeln!(out, "collect_theory = {}", spec.sim.collect_theory);
    let _ = writeln!(out, "export_scores = {}", spec.sim.export_scores);
    match &spec.data.source {
        DataSource::Synthetic => {
            let _ = writeln!(out, "data = synthetic");
            let _ = writeln!(out, "data_classes = {}", spec.data.classes);
            let _ = writeln!(out, "data_dim = {}", spec.data.dim);
            let _ = writeln!(out, "data_per_class = {}", spec.data.per_class);
            let _ = writeln!(out, "data_separation = {}", spec.data.separation);
            let _ = writeln!(
                out,
                "data_holdout_per_class = {}",
                spec.data.holdout_per_class
            );
            let _ = writeln!(out, "data_scheme = {}", scheme_string(&spec.data.scheme));
            let _ = writeln!(out, "data_seed = {}", spec.data.seed);
        }
        DataSource::Files {
            partitions,
            holdout,
        } => {
            let _ = writeln!(out, "data = files");
            let _ = writeln!(out, "data_partitions = {}", partitions.display());
            let _ = writeln!(out, "data_holdout = {}", holdout.display());
            // Synthetic recipe keys still echoed so a files→synthetic edit
            // starts from the same defaults.
            let _ = writeln!(out, "data_classes = {}", spec.data.classes);
            let _ = writeln!(out, "data_dim = {}", spec.data.dim);
            let _ = writeln!(out, "data_per_class = {}", spec.data.per_class);
            let _ = writeln!(out, "data_separation = {}", spec.data.separation);
            let _ = writeln!(
                out,
                "data_holdout_per_class = {}",
                spec.data.holdout_per_class
            );
            let _ = writeln!(out, "data_scheme = {}", scheme_string(&spec.data.scheme));
            let _ = writeln!(out, "data_seed = {}", spec.data.seed);
        }
    }
    out
}

/// Flag overrides applied on top of a parsed (or default) spec. Field names
/// mirror the CLI flags.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub k: Option<usize>,
    pub rounds: Option<usize>,
    pub tau: Option<usize>,
    pub activation: Option<f64>,
    pub alpha: Option<f64>,
    pub omega: Option<f64>,
    pub epsilon: Option<f64>,
    pub strategy: Option<String>,
    pub attack: Option<String>,
    pub seed: Option<u64>,
    pub collect_theory: bool,
    pub export_scores: bool,
}

pub fn apply_overrides(spec: &mut RunSpec, o: &Overrides) -> Result<()> {
    if let Some(k) = o.k {
        spec.sim.k = k;
    }
    if let Some(t) = o.rounds {
        spec.sim.rounds = t;
    }
    if let Some(tau) = o.tau {
        spec.sim.tau = tau;
    }
    if let Some(v) = o.activation {
        spec.sim.activation_percent = v;
    }
    if let Some(v) = o.alpha {
        spec.sim.alpha_percent = v;
    }
    if let Some(v) = o.omega {
        spec.sim.omega_percent = v;
    }
    if let Some(v) = o.epsilon {
        spec.sim.attack.epsilon_percent = v;
    }
    if let Some(s) = &o.strategy {
        spec.sim.strategy = s
            .parse()
            .map_err(|e: Error| Error::Config(format!("flag --strategy: {e}")))?;
    }
    if let Some(a) = &o.attack {
        let floor = match spec.sim.attack.kind {
            AttackKind::GradientScaling { floor } => floor,
            _ => DEFAULT_SCALING_FLOOR,
        };
        spec.sim.attack.kind = parse_attack_kind("--attack", a, floor)?;
    }
    if let Some(s) = o.seed {
        spec.sim.seed = s;
    }
    if o.collect_theory {
        spec.sim.collect_theory = true;
    }
    if o.export_scores {
        spec.sim.export_scores = true;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// Execute one run and write its artifacts into `out_dir`:
/// `config.txt`, `metrics.csv`, `roles.csv`, `snapshot.txt`, optionally
/// `scores-pairwise.csv`/`scores-final.csv`, and — when the theory trace and
/// decay schedule allow it — `theory.csv` + `theory-report.txt`.
pub fn cmd_run(spec: &RunSpec, out_dir: &Path) -> Result<String> {
    let (dataset, holdout) = load_data(&spec.data, spec.sim.k)?;
    let derived = spec.sim.validate(&dataset)?;
    create_dir(out_dir)?;
    let echo = echo_config(spec);
    write_atomic(&out_dir.join("config.txt"), &echo)?;

    let res = run(&spec.sim, &dataset, &holdout)?;
    write_metrics(&out_dir.join("metrics.csv"), &res.records)?;
    write_roles(&out_dir.join("roles.csv"), &res.records)?;
    write_snapshot(&out_dir.join("snapshot.txt"), &echo, &res.final_params)?;
    if spec.sim.export_scores {
        let (pairwise, finals) = score_csvs(&res)?;
        write_atomic(&out_dir.join("scores-pairwise.csv"), &pairwise)?;
        write_atomic(&out_dir.join("scores-final.csv"), &finals)?;
    }

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "run complete: strategy={} K={} T={} A={} C={} m={} f={}",
        spec.sim.strategy, spec.sim.k, spec.sim.rounds, derived.a, derived.c, derived.m, derived.f
    );
    let last = res.final_record();
    let _ = writeln!(
        summary,
        "final round {}: train_loss={:.6} test_loss={:.6} test_accuracy={:.4}",
        last.round, last.train_loss, last.test_loss, last.test_accuracy
    );

    if res.theory.is_some() {
        if matches!(spec.sim.schedule, LrSchedule::TheoremDecay { .. }) {
            let loss_spec = LossSpec {
                num_classes: dataset.num_classes,
                d_in: dataset.d_in,
                reg_coeff: spec.sim.reg_coeff,
            };
            let optima = compute_optima(&dataset, &loss_spec, DEFAULT_OPT_TOL)?;
            let report = analyze_run(&res, &dataset, &optima)?;
            write_atomic(
                &out_dir.join("theory.csv"),
                &theory_csv(&report.error_curve, &report.bound_curve),
            )?;
            write_atomic(&out_dir.join("theory-report.txt"), &render_theory_report(&report))?;
            let _ = writeln!(summary, "{}", verdict_line(report.first_violation()));
        } else {
            let _ = writeln!(
                summary,
                "theory trace collected; bound analysis needs lr = theorem-decay:mu,L"
            );
        }
    }
    let _ = writeln!(summary, "artifacts: {}", out_dir.display());
    Ok(summary)
}

/// Render the per-round score tables of a run into the two score CSVs.
fn score_csvs(res: &RunResult) -> Result<(String, String)> {
    let mut pairwise: Vec<u8> = b"round,k,c,pairwise\n".to_vec();
    let mut finals: Vec<u8> = b"round,k,final\n".to_vec();
    for (round, table, s_b, s_c) in &res.score_tables {
        append_score_csv(table, *round, s_b, s_c, &mut pairwise, &mut finals)?;
    }
    let decode = |v: Vec<u8>| String::from_utf8(v).expect("score CSV is ASCII");
    Ok((decode(pairwise), decode(finals)))
}

/// Generate a synthetic dataset and write `partitions.txt` + `holdout.txt`
/// (the holdout is stored as a single-partition file).
#[allow(clippy::too_many_arguments)]
pub fn cmd_gen_data(
    classes: usize,
    dim: usize,
    per_class: usize,
    separation: f64,
    holdout_per_class: usize,
    k: usize,
    scheme: PartitionScheme,
    seed: u64,
    out_dir: &Path,
) -> Result<String> {
    let samples = generate_synthetic(classes, dim, per_class, separation, seed)?;
    let (train, holdout) = split_holdout(&samples, classes, holdout_per_class)?;
    let ds = partition(&train, k, scheme, seed)?;
    create_dir(out_dir)?;
    save_partitions(&ds, &out_dir.join("partitions.txt"))?;
    let holdout_ds = FederatedDataset {
        partitions: vec![crate::dataset::Partition {
            client_id: 0,
            samples: holdout,
        }],
        num_classes: classes,
        d_in: dim,
    };
    save_partitions(&holdout_ds, &out_dir.join("holdout.txt"))?;
    Ok(format!(
        "wrote {} training partitions ({} samples) and {} holdout samples to {}",
        ds.k(),
        ds.partitions.iter().map(|p| p.n()).sum::<usize>(),
        holdout_ds.partitions[0].n(),
        out_dir.display()
    ))
}

/// Run a sweep from a base spec over explicit grid axes.
pub fn cmd_sweep(
    spec: &RunSpec,
    alphas: &[f64],
    omegas: &[f64],
    epsilons: &[f64],
    seeds: &[u64],
    out_dir: &Path,
) -> Result<String> {
    if alphas.is_empty() || omegas.is_empty() || epsilons.is_empty() || seeds.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one value on every axis (--alphas, --omegas, \
             --epsilons, --seeds)"
                .into(),
        ));
    }
    let (dataset, holdout) = load_data(&spec.data, spec.sim.k)?;
    let grid = SweepGrid {
        alphas: alphas.to_vec(),
        omegas: omegas.to_vec(),
        epsilons: epsilons.to_vec(),
    };
    let cells = sweep(&spec.sim, &dataset, &holdout, &grid, seeds)?;
    create_dir(out_dir)?;
    write_atomic(&out_dir.join("sweep.csv"), &sweep_csv(&cells))?;
    write_atomic(&out_dir.join("config.txt"), &echo_config(spec))?;
    Ok(format!(
        "swept {} cells × {} seeds; wrote {}",
        cells.len(),
        seeds.len(),
        out_dir.join("sweep.csv").display()
    ))
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// The four packaged experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Attack-free strategy comparison: FedAvg vs CMFL-I vs CMFL-II curves.
    NormalTraining,
    /// Strategy × attack grid against the robust baselines.
    Robustness,
    /// (α, ω, ε) sweeps around the operating point, including the cliff.
    HyperparamSweep,
    /// Malicious-role counts N1/N2/N3 as ε grows.
    CommitteeAnalysis,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::NormalTraining,
        Preset::Robustness,
        Preset::HyperparamSweep,
        Preset::CommitteeAnalysis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::NormalTraining => "normal-training",
            Preset::Robustness => "robustness",
            Preset::HyperparamSweep => "hyperparam-sweep",
            Preset::CommitteeAnalysis => "committee-analysis",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Preset> {
        match s {
            "normal-training" => Ok(Preset::NormalTraining),
            "robustness" => Ok(Preset::Robustness),
            "hyperparam-sweep" => Ok(Preset::HyperparamSweep),
            "committee-analysis" => Ok(Preset::CommitteeAnalysis),
            _ => Err(Error::Config(format!(
                "unknown preset `{s}`; expected one of normal-training, robustness, \
                 hyperparam-sweep, committee-analysis"
            ))),
        }
    }
}

/// The shared desk-scale instance every preset runs on: 20 clients over a
/// 20-class synthetic set with one label shard per client (every client
/// owns one class — maximally non-IID), 50% activation, committee of 2 out
/// of an aggregation set of 8.
pub fn preset_base() -> RunSpec {
    let mut spec = RunSpec::defaults();
    spec.data = DataConfig {
        source: DataSource::Synthetic,
        classes: 20,
        dim: 8,
        per_class: 120,
        separation: 3.0,
        holdout_per_class: 30,
        scheme: PartitionScheme::LabelShard {
            shards_per_client: 1,
        },
        seed: 7,
    };
    spec.sim.k = 20;
    spec.sim.rounds = 200;
    spec.sim.tau = 2;
    spec.sim.activation_percent = 50.0;
    spec.sim.alpha_percent = 80.0;
    spec.sim.omega_percent = 20.0;
    spec.sim.batch_size = 10;
    spec.sim.schedule = LrSchedule::Constant(0.12);
    spec.sim.strategy = Strategy::FedAvg;
    spec.sim.reg_coeff = 0.01;
    spec.sim.seed = 1;
    spec
}

fn strategy_file_tag(s: Strategy) -> String {
    s.to_string()
}

/// One completed preset cell ready for CSV emission.
struct CellRun {
    labels: Vec<(String, String)>,
    seed: u64,
    res: RunResult,
}

/// Run a list of (labels, spec) cells in parallel, deterministically ordered.
fn run_cells(cells: Vec<(Vec<(String, String)>, RunSpec)>) -> Result<Vec<CellRun>> {
    let results: Vec<Result<CellRun>> = cells
        .into_par_iter()
        .map(|(labels, spec)| {
            let (dataset, holdout) = load_data(&spec.data, spec.sim.k)?;
            let res = run(&spec.sim, &dataset, &holdout)?;
            Ok(CellRun {
                labels,
                seed: spec.sim.seed,
                res,
            })
        })
        .collect();
    results.into_iter().collect()
}

fn label_header(labels: &[(String, String)]) -> String {
    labels
        .iter()
        .map(|(k, _)| k.as_str())
        .collect::<Vec<_>>()
        .join(",")
}

fn label_values(labels: &[(String, String)]) -> String {
    labels
        .iter()
        .map(|(_, v)| v.as_str())
        .collect::<Vec<_>>()
        .join(",")
}

/// Write the shared preset artifacts: per-run metrics CSVs under `runs/`,
/// a long-format per-round curve table, and a per-seed summary table.
fn write_preset_tables(out_dir: &Path, runs: &[CellRun]) -> Result<()> {
    let runs_dir = out_dir.join("runs");
    create_dir(&runs_dir)?;
    let header = label_header(&runs[0].labels);
    let mut curves = format!("{header},seed,round,test_accuracy,test_loss\n");
    let mut summary = format!("{header},seed,final_accuracy,final_test_loss\n");
    for cell in runs {
        let tag: String = cell
            .labels
            .iter()
            .map(|(_, v)| v.replace(['/', ' '], "-"))
            .collect::<Vec<_>>()
            .join("-");
        write_metrics(
            &runs_dir.join(format!("{tag}-seed{}.csv", cell.seed)),
            &cell.res.records,
        )?;
        let values = label_values(&cell.labels);
        for r in &cell.res.records {
            let _ = writeln!(
                curves,
                "{values},{},{},{},{}",
                cell.seed, r.round, r.test_accuracy, r.test_loss
            );
        }
        let last = cell.res.final_record();
        let _ = writeln!(
            summary,
            "{values},{},{},{}",
            cell.seed, last.test_accuracy, last.test_loss
        );
    }
    write_atomic(&out_dir.join("curves.csv"), &curves)?;
    write_atomic(&out_dir.join("summary.csv"), &summary)?;
    Ok(())
}

/// Execute a preset into `out_dir` with the given seeds (defaults when empty).
pub fn cmd_preset(preset: Preset, out_dir: &Path, seeds: &[u64]) -> Result<String> {
    let seeds: Vec<u64> = if seeds.is_empty() {
        DEFAULT_PRESET_SEEDS.to_vec()
    } else {
        seeds.to_vec()
    };
    let out_dir = out_dir.join(preset.name());
    create_dir(&out_dir)?;
    let base = preset_base();
    write_atomic(&out_dir.join("base-config.txt"), &echo_config(&base))?;

    match preset {
        Preset::NormalTraining => {
            let mut cells = Vec::new();
            for strategy in [Strategy::FedAvg, Strategy::CmflI, Strategy::CmflII] {
                for &seed in &seeds {
                    let mut spec = base.clone();
                    spec.sim.strategy = strategy;
                    spec.sim.seed = seed;
                    cells.push((
                        vec![("strategy".to_string(), strategy_file_tag(strategy))],
                        spec,
                    ));
                }
            }
            let runs = run_cells(cells)?;
            write_preset_tables(&out_dir, &runs)?;
            Ok(format!(
                "normal-training: {} runs ({} strategies × {} seeds) → {}",
                runs.len(),
                3,
                seeds.len(),
                out_dir.display()
            ))
        }
        Preset::Robustness => {
            let strategies = [
                Strategy::FedAvg,
                Strategy::CmflI,
                Strategy::Median,
                Strategy::TrimmedMean,
                Strategy::Krum,
            ];
            let attacks = [
                ("none", AttackKind::None, 0.0),
                (
                    "scaling",
                    AttackKind::GradientScaling {
                        floor: DEFAULT_SCALING_FLOOR,
                    },
                    10.0,
                ),
                ("same-value", AttackKind::SameValue, 10.0),
                ("back-gradient", AttackKind::BackGradient, 10.0),
            ];
            let mut cells = Vec::new();
            for strategy in strategies {
                for (attack_name, kind, eps) in &attacks {
                    for &seed in &seeds {
                        let mut spec = base.clone();
                        spec.sim.strategy = strategy;
                        spec.sim.attack = AttackSpec::new(*kind, *eps);
                        spec.sim.seed = seed;
                        cells.push((
                            vec![
                                ("attack".to_string(), attack_name.to_string()),
                                ("strategy".to_string(), strategy_file_tag(strategy)),
                            ],
                            spec,
                        ));
                    }
                }
            }
            let runs = run_cells(cells)?;
            write_preset_tables(&out_dir, &runs)?;
            Ok(format!(
                "robustness: {} runs ({} strategies × {} attacks × {} seeds) → {}",
                runs.len(),
                strategies.len(),
                attacks.len(),
                seeds.len(),
                out_dir.display()
            ))
        }
        Preset::HyperparamSweep => {
            let (dataset, holdout) = load_data(&base.data, base.sim.k)?;
            let mut spec = base.clone();
            spec.sim.strategy = Strategy::CmflI;
            spec.sim.attack = AttackSpec::new(AttackKind::BackGradient, 10.0);
            // Three axes around the operating point, each holding one
            // dimension fixed.
            let grids = [
                (
                    "sweep-fixed-alpha.csv",
                    SweepGrid {
                        alphas: vec![70.0],
                        omegas: vec![30.0, 40.0, 50.0],
                        epsilons: vec![10.0, 30.0, 50.0],
                    },
                ),
                (
                    "sweep-fixed-omega.csv",
                    SweepGrid {
                        alphas: vec![40.0, 50.0, 60.0, 70.0],
                        omegas: vec![30.0],
                        epsilons: vec![10.0, 30.0, 50.0],
                    },
                ),
                (
                    "sweep-fixed-epsilon.csv",
                    SweepGrid {
                        alphas: vec![40.0, 50.0, 60.0, 70.0],
                        omegas: vec![20.0, 30.0, 40.0, 50.0],
                        epsilons: vec![10.0],
                    },
                ),
            ];
            let mut total = 0;
            for (file, grid) in &grids {
                let cells = sweep(&spec.sim, &dataset, &holdout, grid, &seeds)?;
                total += cells.len();
                write_atomic(&out_dir.join(file), &sweep_csv(&cells))?;
            }
            write_atomic(&out_dir.join("config.txt"), &echo_config(&spec))?;
            Ok(format!(
                "hyperparam-sweep: {} cells × {} seeds → {}",
                total,
                seeds.len(),
                out_dir.display()
            ))
        }
        Preset::CommitteeAnalysis => {
            let epsilons = [10.0, 20.0, 30.0, 40.0, 50.0];
            let mut cells = Vec::new();
            for &eps in &epsilons {
                for &seed in &seeds {
                    let mut spec = base.clone();
                    spec.sim.strategy = Strategy::CmflI;
                    spec.sim.omega_percent = 30.0;
                    spec.sim.attack = AttackSpec::new(AttackKind::BackGradient, eps);
                    spec.sim.seed = seed;
                    cells.push((vec![("epsilon".to_string(), format!("{eps}"))], spec));
                }
            }
            let runs = run_cells(cells)?;
            // Long-format N-counts plus a compact per-run mean table.
            let mut table = String::from("epsilon,seed,round,n1,n2,n3\n");
            let mut summary =
                String::from("epsilon,seed,mean_n1,mean_n2,mean_n3,final_accuracy\n");
            for cell in &runs {
                let eps = &cell.labels[0].1;
                let rounds = cell.res.records.len() as f64;
                let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
                for r in &cell.res.records {
                    let _ = writeln!(
                        table,
                        "{eps},{},{},{},{},{}",
                        cell.seed, r.round, r.n1, r.n2, r.n3
                    );
                    s1 += r.n1 as f64;
                    s2 += r.n2 as f64;
                    s3 += r.n3 as f64;
                }
                let _ = writeln!(
                    summary,
                    "{eps},{},{},{},{},{}",
                    cell.seed,
                    s1 / rounds,
                    s2 / rounds,
                    s3 / rounds,
                    cell.res.final_record().test_accuracy
                );
            }
            write_atomic(&out_dir.join("n-table.csv"), &table)?;
            write_atomic(&out_dir.join("summary.csv"), &summary)?;
            Ok(format!(
                "committee-analysis: {} runs ({} epsilons × {} seeds) → {}",
                runs.len(),
                epsilons.len(),
                seeds.len(),
                out_dir.display()
            ))
        }
    }
}

// ---------------------------------------------------------------------------
// Theory pipeline shared by `run --collect-theory` batches
// ---------------------------------------------------------------------------

/// Run the same spec across seeds with theory collection, analyze each run
/// against shared optima, and pool the results.
pub fn theory_across_seeds(spec: &RunSpec, seeds: &[u64]) -> Result<(Vec<TheoryReport>, String)> {
    if seeds.is_empty() {
        return Err(Error::Config("need at least one seed".into()));
    }
    let (dataset, holdout) = load_data(&spec.data, spec.sim.k)?;
    let loss_spec = LossSpec {
        num_classes: dataset.num_classes,
        d_in: dataset.d_in,
        reg_coeff: spec.sim.reg_coeff,
    };
    let optima = compute_optima(&dataset, &loss_spec, DEFAULT_OPT_TOL)?;
    let results: Vec<Result<RunResult>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut sim = spec.sim.clone();
            sim.seed = seed;
            sim.collect_theory = true;
            run(&sim, &dataset, &holdout)
        })
        .collect();
    let mut reports = Vec::new();
    for res in results {
        reports.push(analyze_run(&res?, &dataset, &optima)?);
    }
    let pooled = pooled_theorem_check(&reports)?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "pooled over {} seeds: phi_min={:.6e} phi_max={:.6e} L={:.6e} Gamma={:.6e}",
        pooled.runs,
        pooled.constants.phi_min,
        pooled.constants.phi_max,
        pooled.constants.l,
        pooled.constants.gamma_het
    );
    let _ = writeln!(text, "{}", verdict_line(pooled.first_violation));
    Ok((reports, text))
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// Parse a small CSV into (header, rows). Our emitters never quote, so a
/// plain comma split is exact.
fn parse_csv(text: &str, path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: "empty CSV".into(),
        })?
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
        if row.len() != header.len() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: i + 2,
                msg: format!("expected {} columns, got {}", header.len(), row.len()),
            });
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn col(header: &[String], name: &str) -> Option<usize> {
    header.iter().position(|h| h == name)
}

/// Group a summary table by every column left of `seed` and average the
/// requested value column.
fn summarize_by_group(
    header: &[String],
    rows: &[Vec<String>],
    value_col: &str,
) -> Option<Vec<(String, f64, usize)>> {
    let seed_idx = col(header, "seed")?;
    let value_idx = col(header, value_col)?;
    let mut groups: Vec<(String, f64, usize)> = Vec::new();
    for row in rows {
        let key = row[..seed_idx].join(",");
        let value: f64 = row[value_idx].parse().ok()?;
        match groups.iter_mut().find(|(k, _, _)| *k == key) {
            Some((_, sum, n)) => {
                *sum += value;
                *n += 1;
            }
            None => groups.push((key, value, 1)),
        }
    }
    Some(
        groups
            .into_iter()
            .map(|(k, sum, n)| (k, sum / n as f64, n))
            .collect(),
    )
}

/// Summarize the artifacts found under `dir` (recursing one level into
/// preset subdirectories): final accuracies from summary tables, sweep
/// grids, and the bound verdict from any theory CSV.
pub fn cmd_report(dir: &Path) -> Result<String> {
    if !dir.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} is not a directory", dir.display()),
        )));
    }
    let mut out = String::new();
    let mut found = false;

    // Collect candidate files here and one level down.
    let mut files: Vec<PathBuf> = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    let mut depth0 = true;
    while let Some(d) = stack.pop() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&d)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .collect();
        entries.sort();
        for path in entries {
            if path.is_dir() {
                if depth0 {
                    stack.push(path);
                }
            } else {
                files.push(path);
            }
        }
        depth0 = false;
    }

    for path in &files {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let rel = path.strip_prefix(dir).unwrap_or(path).display();
        match name {
            "summary.csv" => {
                let (header, rows) = parse_csv(&read_to_string(path)?, path)?;
                found = true;
                let _ = writeln!(out, "[{rel}]");
                if let Some(groups) = summarize_by_group(&header, &rows, "final_accuracy") {
                    let key_cols = &header[..col(&header, "seed").unwrap()];
                    let _ = writeln!(
                        out,
                        "  mean final accuracy by ({}):",
                        key_cols.join(", ")
                    );
                    for (key, mean, n) in groups {
                        let _ = writeln!(out, "    {key}: {mean:.4} ({n} seeds)");
                    }
                }
                if let Some(groups) = summarize_by_group(&header, &rows, "mean_n2") {
                    let _ = writeln!(out, "  mean committee infiltration (N2) by group:");
                    for (key, mean, n) in groups {
                        let _ = writeln!(out, "    {key}: {mean:.3} ({n} seeds)");
                    }
                }
            }
            "metrics.csv" => {
                let (header, rows) = parse_csv(&read_to_string(path)?, path)?;
                if let (Some(acc), Some(loss), Some(round), false) = (
                    col(&header, "test_accuracy"),
                    col(&header, "test_loss"),
                    col(&header, "round"),
                    rows.is_empty(),
                ) {
                    found = true;
                    let last = &rows[rows.len() - 1];
                    let _ = writeln!(
                        out,
                        "[{rel}] final round {}: test_accuracy={} test_loss={}",
                        last[round], last[acc], last[loss]
                    );
                }
            }
            "theory.csv" => {
                let (header, rows) = parse_csv(&read_to_string(path)?, path)?;
                let (r_idx, e_idx, b_idx) = match (
                    col(&header, "round"),
                    col(&header, "error"),
                    col(&header, "bound"),
                ) {
                    (Some(r), Some(e), Some(b)) => (r, e, b),
                    _ => continue,
                };
                found = true;
                let mut violation = None;
                for row in &rows {
                    let (t, e, b): (usize, f64, f64) = match (
                        row[r_idx].parse(),
                        row[e_idx].parse(),
                        row[b_idx].parse(),
                    ) {
                        (Ok(t), Ok(e), Ok(b)) => (t, e, b),
                        _ => {
                            return Err(Error::Parse {
                                path: path.display().to_string(),
                                line: 0,
                                msg: "non-numeric theory row".into(),
                            })
                        }
                    };
                    if e > b && violation.is_none() {
                        violation = Some(t);
                    }
                }
                let _ = writeln!(out, "[{rel}] {}", verdict_line(violation));
            }
            _ if name.starts_with("sweep") && name.ends_with(".csv") => {
                let (header, rows) = parse_csv(&read_to_string(path)?, path)?;
                found = true;
                let _ = writeln!(out, "[{rel}] {} sweep cells:", rows.len());
                let acc = col(&header, "mean_final_accuracy");
                for row in &rows {
                    let cell = &row[..3.min(row.len())];
                    let acc_txt = acc.map(|i| row[i].clone()).unwrap_or_default();
                    let status = col(&header, "status").map(|i| row[i].clone()).unwrap_or_default();
                    let _ = writeln!(
                        out,
                        "    alpha={} omega={} epsilon={}: {status} acc={acc_txt}",
                        cell[0], cell[1], cell[2]
                    );
                }
            }
            "theory-report.txt" => {
                found = true;
                let text = read_to_string(path)?;
                for line in text.lines().filter(|l| l.starts_with("THEOREM1:")) {
                    let _ = writeln!(out, "[{rel}] {line}");
                }
            }
            _ => {}
        }
    }

    if !found {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!(
                "no run artifacts under {}; expected metrics.csv, summary.csv, \
                 sweep*.csv, theory.csv, or theory-report.txt",
                dir.display()
            ),
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn defaults_echo_lists_the_baseline_operating_point() {
        let spec = RunSpec::defaults();
        let echo = echo_config(&spec);
        assert!(echo.contains("k = 100"), "{echo}");
        assert!(echo.contains("activation_percent = 10"), "{echo}");
        assert!(echo.contains("alpha_percent = 40"), "{echo}");
        assert!(echo.contains("omega_percent = 20"), "{echo}");
        // C < m out of the box, so the defaults are valid for every strategy.
        assert!(echo.contains("# derived sizes: A=10 C=2 m=4 f=0"), "{echo}");
    }

    #[test]
    fn echo_round_trips_to_an_identical_spec() {
        let mut spec = RunSpec::defaults();
        spec.sim.strategy = Strategy::CmflII;
        spec.sim.alpha_percent = 62.5;
        spec.sim.omega_percent = 21.0;
        spec.sim.schedule = LrSchedule::TheoremDecay { mu: 0.1, l: 3.25 };
        spec.sim.attack = AttackSpec::new(AttackKind::GradientScaling { floor: 0.35 }, 12.5);
        spec.sim.attack.per_gradient_lambda = true;
        spec.sim.attack.attack_committee = false;
        spec.sim.upload_mode = UploadMode::PseudoGradient;
        spec.sim.reg_coeff = 0.125;
        spec.sim.collect_theory = true;
        spec.data.scheme = PartitionScheme::Dirichlet {
            concentration: 0.55,
        };
        let echoed = echo_config(&spec);
        let reparsed = parse_run_spec(&echoed, "echo").unwrap();
        assert_eq!(reparsed, spec);
        // And the echo of the reparse is byte-identical.
        assert_eq!(echo_config(&reparsed), echoed);
    }

    #[test]
    fn files_source_round_trips_too() {
        let mut spec = RunSpec::defaults();
        spec.data.source = DataSource::Files {
            partitions: PathBuf::from("/tmp/p.txt"),
            holdout: PathBuf::from("/tmp/h.txt"),
        };
        let echoed = echo_config(&spec);
        assert_eq!(parse_run_spec(&echoed, "echo").unwrap(), spec);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_named() {
        let err = parse_run_spec("walrus = 9\n", "cfg").unwrap_err();
        assert!(err.to_string().contains("unknown key `walrus`"), "{err}");
        let err = parse_run_spec("k = 5\nk = 6\n", "cfg").unwrap_err();
        assert!(err.to_string().contains("duplicate key `k`"), "{err}");
        let err = parse_run_spec("k e 5\n", "cfg").unwrap_err();
        assert!(err.to_string().contains("expected `key = value`"), "{err}");
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let spec = parse_run_spec("# hi\n\nk = 12   # trailing\n", "cfg").unwrap();
        assert_eq!(spec.sim.k, 12);
    }

    #[test]
    fn epsilon_out_of_range_is_rejected_at_validation() {
        // parse accepts the syntax; SimConfig::validate (run path) rejects.
        let spec = parse_run_spec("epsilon_percent = 120\n", "cfg").unwrap();
        assert!(spec.sim.attack.validate().is_err());
    }

    #[test]
    fn files_source_requires_both_paths() {
        let err = parse_run_spec("data = files\n", "cfg").unwrap_err();
        assert!(err.to_string().contains("data_partitions"), "{err}");
        let err =
            parse_run_spec("data = files\ndata_partitions = p.txt\n", "cfg").unwrap_err();
        assert!(err.to_string().contains("data_holdout"), "{err}");
    }

    #[test]
    fn scaling_keys_need_the_scaling_attack() {
        let err = parse_run_spec("attack = back-gradient\nscaling_floor = 0.2\n", "cfg")
            .unwrap_err();
        assert!(err.to_string().contains("scaling_floor"), "{err}");
        let spec =
            parse_run_spec("attack = scaling\nscaling_floor = 0.2\n", "cfg").unwrap();
        assert_eq!(
            spec.sim.attack.kind,
            AttackKind::GradientScaling { floor: 0.2 }
        );
    }

    #[test]
    fn lr_and_scheme_strings_round_trip() {
        for s in [
            LrSchedule::Constant(0.125),
            LrSchedule::TheoremDecay { mu: 0.05, l: 2.5 },
        ] {
            assert_eq!(parse_lr("lr", &lr_string(&s)).unwrap(), s);
        }
        for s in [
            PartitionScheme::Iid,
            PartitionScheme::LabelShard {
                shards_per_client: 3,
            },
            PartitionScheme::Dirichlet {
                concentration: 0.5,
            },
        ] {
            assert_eq!(parse_scheme("data_scheme", &scheme_string(&s)).unwrap(), s);
        }
        assert!(parse_lr("lr", "cosine:1").is_err());
        assert!(parse_scheme("data_scheme", "shards").is_err());
    }

    #[test]
    fn overrides_apply_on_top_of_the_file() {
        let mut spec = parse_run_spec("k = 30\nseed = 4\n", "cfg").unwrap();
        let o = Overrides {
            k: Some(25),
            epsilon: Some(10.0),
            strategy: Some("cmfl-ii".into()),
            attack: Some("back-gradient".into()),
            ..Overrides::default()
        };
        apply_overrides(&mut spec, &o).unwrap();
        assert_eq!(spec.sim.k, 25);
        assert_eq!(spec.sim.seed, 4);
        assert_eq!(spec.sim.strategy, Strategy::CmflII);
        assert_eq!(spec.sim.attack.kind, AttackKind::BackGradient);
        assert_eq!(spec.sim.attack.epsilon_percent, 10.0);
        let bad = Overrides {
            strategy: Some("zen".into()),
            ..Overrides::default()
        };
        assert!(apply_overrides(&mut spec, &bad).is_err());
    }

    fn tiny_spec() -> RunSpec {
        let mut spec = RunSpec::defaults();
        spec.sim.k = 6;
        spec.sim.rounds = 3;
        spec.sim.tau = 2;
        spec.sim.activation_percent = 60.0;
        spec.sim.alpha_percent = 60.0;
        spec.sim.omega_percent = 20.0;
        spec.sim.batch_size = 4;
        spec.sim.strategy = Strategy::CmflI;
        spec.sim.reg_coeff = 0.05;
        spec.data.classes = 3;
        spec.data.dim = 3;
        spec.data.per_class = 20;
        spec.data.holdout_per_class = 4;
        spec.data.scheme = PartitionScheme::Iid;
        spec
    }

    #[test]
    fn cmd_run_writes_the_artifact_set() {
        let dir = tempdir().unwrap();
        let mut spec = tiny_spec();
        spec.sim.export_scores = true;
        let summary = cmd_run(&spec, dir.path()).unwrap();
        assert!(summary.contains("final round 3"), "{summary}");
        for f in [
            "config.txt",
            "metrics.csv",
            "roles.csv",
            "snapshot.txt",
            "scores-pairwise.csv",
            "scores-final.csv",
        ] {
            assert!(dir.path().join(f).is_file(), "missing {f}");
        }
        // Echo written to disk still round-trips.
        let text = std::fs::read_to_string(dir.path().join("config.txt")).unwrap();
        assert_eq!(parse_run_spec(&text, "disk").unwrap(), spec);
        // report over the run dir reads metrics and prints the final round.
        let report = cmd_report(dir.path()).unwrap();
        assert!(report.contains("final round 3"), "{report}");
    }

    #[test]
    fn cmd_run_with_theory_writes_bound_artifacts() {
        let dir = tempdir().unwrap();
        let mut spec = tiny_spec();
        spec.sim.collect_theory = true;
        spec.sim.schedule = LrSchedule::TheoremDecay { mu: 0.05, l: 3.0 };
        let summary = cmd_run(&spec, dir.path()).unwrap();
        assert!(summary.contains("THEOREM1:"), "{summary}");
        assert!(dir.path().join("theory.csv").is_file());
        assert!(dir.path().join("theory-report.txt").is_file());
        let report = cmd_report(dir.path()).unwrap();
        assert!(report.contains("THEOREM1:"), "{report}");
    }

    #[test]
    fn gen_data_then_files_run_matches_synthetic_run() {
        let dir = tempdir().unwrap();
        let spec = tiny_spec();
        // Generate the same data the synthetic path would build.
        cmd_gen_data(
            spec.data.classes,
            spec.data.dim,
            spec.data.per_class,
            spec.data.separation,
            spec.data.holdout_per_class,
            spec.sim.k,
            spec.data.scheme,
            spec.data.seed,
            dir.path(),
        )
        .unwrap();
        let mut files_spec = spec.clone();
        files_spec.data.source = DataSource::Files {
            partitions: dir.path().join("partitions.txt"),
            holdout: dir.path().join("holdout.txt"),
        };
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        cmd_run(&spec, &out_a).unwrap();
        cmd_run(&files_spec, &out_b).unwrap();
        let m_a = std::fs::read_to_string(out_a.join("metrics.csv")).unwrap();
        let m_b = std::fs::read_to_string(out_b.join("metrics.csv")).unwrap();
        assert_eq!(m_a, m_b, "files-backed run must reproduce the synthetic run");
    }

    #[test]
    fn report_on_an_empty_directory_lists_expected_artifacts() {
        let dir = tempdir().unwrap();
        let err = cmd_report(dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("metrics.csv"), "{msg}");
        assert!(msg.contains("theory.csv"), "{msg}");
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn report_flags_a_bound_violation_from_the_csv() {
        let dir = tempdir().unwrap();
        std::fs::write(
            dir.path().join("theory.csv"),
            "round,error,bound\n1,0.5,1.0\n2,0.9,0.8\n3,0.1,0.7\n",
        )
        .unwrap();
        let report = cmd_report(dir.path()).unwrap();
        assert!(report.contains("THEOREM1: VIOLATED at round 2"), "{report}");
        std::fs::write(
            dir.path().join("theory.csv"),
            "round,error,bound\n1,0.5,1.0\n",
        )
        .unwrap();
        let report = cmd_report(dir.path()).unwrap();
        assert!(report.contains("dominated"), "{report}");
    }

    #[test]
    fn preset_names_parse_and_match() {
        for p in Preset::ALL {
            let parsed: Preset = p.name().parse().unwrap();
            assert_eq!(parsed, p);
        }
        assert!("figure-2".parse::<Preset>().is_err());
    }

    #[test]
    fn sweep_command_writes_the_grid() {
        let dir = tempdir().unwrap();
        let mut spec = tiny_spec();
        spec.sim.strategy = Strategy::CmflI;
        let msg = cmd_sweep(
            &spec,
            &[60.0],
            &[20.0],
            &[0.0, 25.0],
            &[1, 2],
            dir.path(),
        )
        .unwrap();
        assert!(msg.contains("2 cells"), "{msg}");
        let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(text.lines().count(), 3, "{text}");
        assert!(cmd_report(dir.path()).unwrap().contains("sweep cells"));
    }
}
