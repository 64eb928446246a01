//! Synthetic data generation and federated partitioning.
//!
//! Data is standardized Gaussian blobs: one mean per class drawn on a sphere,
//! unit noise around it. Partitioning supports an IID split, a label-shard
//! scheme (sort by label, deal contiguous shards) and a Dirichlet scheme
//! (per-client label proportions), all deterministic given a seed.

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma, Normal};
use std::fmt::Write as _;
use std::path::Path;

/// One labeled observation. `id` is assigned at generation time (sequential)
/// so partition cover/disjointness stays mechanically checkable.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: usize,
    pub features: Vec<f64>,
    pub label: usize,
}

/// One client's local dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub client_id: usize,
    pub samples: Vec<Sample>,
}

impl Partition {
    /// Number of locally held samples (n_k).
    pub fn n(&self) -> usize {
        self.samples.len()
    }
}

/// The full federation: K disjoint partitions covering the source dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct FederatedDataset {
    pub partitions: Vec<Partition>,
    pub num_classes: usize,
    pub d_in: usize,
}

/// How samples are dealt to clients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PartitionScheme {
    /// Uniform random split into near-equal parts.
    Iid,
    /// Sort by label, cut into `K * shards_per_client` contiguous shards,
    /// deal shards at random. Small shard counts give strongly non-IID
    /// clients (each sees a half-class, one class, ...).
    LabelShard { shards_per_client: usize },
    /// Per-client label proportions drawn from a symmetric Dirichlet with
    /// the given concentration; small values give near-single-label clients.
    Dirichlet { concentration: f64 },
}

impl FederatedDataset {
    pub fn k(&self) -> usize {
        self.partitions.len()
    }

    pub fn total_samples(&self) -> usize {
        self.partitions.iter().map(Partition::n).sum()
    }

    /// Client weights p_k = n_k / Σ n_j; sums to 1 within 1e-12.
    pub fn weights(&self) -> Vec<f64> {
        let total = self.total_samples() as f64;
        self.partitions
            .iter()
            .map(|p| p.n() as f64 / total)
            .collect()
    }

    /// All samples pooled, partition order. Because p_k = n_k / N, the plain
    /// average loss over this pool equals the p_k-weighted federated
    /// objective, which is how the engine evaluates training loss.
    pub fn pooled(&self) -> Vec<Sample> {
        self.partitions
            .iter()
            .flat_map(|p| p.samples.iter().cloned())
            .collect()
    }

    /// Check structural invariants: nonempty partitions with dense client
    /// ids, uniform feature dimension, labels in range, finite features.
    pub fn validate(&self) -> Result<()> {
        if self.partitions.is_empty() {
            return Err(Error::Domain("dataset has no partitions".into()));
        }
        for (i, part) in self.partitions.iter().enumerate() {
            if part.client_id != i {
                return Err(Error::Domain(format!(
                    "partition {i} has client_id {}; ids must be dense and ordered",
                    part.client_id
                )));
            }
            if part.samples.is_empty() {
                return Err(Error::Domain(format!("client {i} owns no samples")));
            }
            for s in &part.samples {
                if s.features.len() != self.d_in {
                    return Err(Error::Domain(format!(
                        "sample {} has {} features, expected {}",
                        s.id,
                        s.features.len(),
                        self.d_in
                    )));
                }
                if s.label >= self.num_classes {
                    return Err(Error::Domain(format!(
                        "sample {} has label {} out of range (classes={})",
                        s.id, s.label, self.num_classes
                    )));
                }
                if !s.features.iter().all(|f| f.is_finite()) {
                    return Err(Error::Domain(format!(
                        "sample {} has non-finite features",
                        s.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Generate Gaussian blobs: one mean per class on the sphere of radius
/// `class_separation`, unit isotropic noise, `samples_per_class` each.
/// Deterministic given `seed`; sample ids are sequential in generation order
/// (grouped by class).
pub fn generate_synthetic(
    num_classes: usize,
    d_in: usize,
    samples_per_class: usize,
    class_separation: f64,
    seed: u64,
) -> Result<Vec<Sample>> {
    if num_classes < 2 {
        return Err(Error::Config(format!(
            "num_classes must be >= 2, got {num_classes}"
        )));
    }
    if d_in < 1 {
        return Err(Error::Config("d_in must be >= 1".into()));
    }
    if samples_per_class < 1 {
        return Err(Error::Config("samples_per_class must be >= 1".into()));
    }
    if !(class_separation > 0.0) || !class_separation.is_finite() {
        return Err(Error::Config(format!(
            "class_separation must be a positive finite number, got {class_separation}"
        )));
    }

    let mut rng = rng::stream(seed, Purpose::DataGen, 0, 0);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut means = Vec::with_capacity(num_classes);
    for _ in 0..num_classes {
        // Rejection only guards the measure-zero all-zeros draw.
        loop {
            let v: Vec<f64> = (0..d_in).map(|_| normal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-9 {
                means.push(v.iter().map(|x| x * class_separation / norm).collect::<Vec<_>>());
                break;
            }
        }
    }

    let mut samples = Vec::with_capacity(num_classes * samples_per_class);
    let mut id = 0;
    for (label, mean) in means.iter().enumerate() {
        for _ in 0..samples_per_class {
            let features: Vec<f64> = mean.iter().map(|m| m + normal.sample(&mut rng)).collect();
            samples.push(Sample {
                id,
                features,
                label,
            });
            id += 1;
        }
    }
    Ok(samples)
}

/// Split generated samples into a training set and a held-out evaluation set
/// by taking the last `holdout_per_class` samples of every class. No
/// randomness: generation order already is noise order within a class.
pub fn split_holdout(
    samples: &[Sample],
    num_classes: usize,
    holdout_per_class: usize,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let mut per_class: Vec<Vec<&Sample>> = vec![Vec::new(); num_classes];
    for s in samples {
        if s.label >= num_classes {
            return Err(Error::Domain(format!(
                "sample {} has label {} out of range (classes={})",
                s.id, s.label, num_classes
            )));
        }
        per_class[s.label].push(s);
    }
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for class in per_class {
        if class.len() <= holdout_per_class {
            return Err(Error::Config(format!(
                "holdout_per_class {} leaves no training samples for a class with {} samples",
                holdout_per_class,
                class.len()
            )));
        }
        let cut = class.len() - holdout_per_class;
        for s in &class[..cut] {
            train.push((*s).clone());
        }
        for s in &class[cut..] {
            holdout.push((*s).clone());
        }
    }
    Ok((train, holdout))
}

/// Deal `samples` to `k` clients under `scheme`. Disjoint cover by
/// construction; every client ends up nonempty (see `repair_empty`).
pub fn partition(
    samples: &[Sample],
    k: usize,
    scheme: PartitionScheme,
    seed: u64,
) -> Result<FederatedDataset> {
    if k == 0 {
        return Err(Error::Config("K must be >= 1".into()));
    }
    if samples.is_empty() {
        return Err(Error::Config("cannot partition an empty sample list".into()));
    }
    if k > samples.len() {
        return Err(Error::Config(format!(
            "K={k} exceeds sample count {}",
            samples.len()
        )));
    }
    let d_in = samples[0].features.len();
    let num_classes = samples.iter().map(|s| s.label).max().unwrap() + 1;
    let n = samples.len();

    let mut rng = rng::stream(seed, Purpose::Partition, 0, 0);
    let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); k];

    match scheme {
        PartitionScheme::Iid => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            // Near-equal contiguous chunks: the first n % k clients get one extra.
            let base = n / k;
            let extra = n % k;
            let mut cursor = 0;
            for (client, slot) in assignment.iter_mut().enumerate() {
                let take = base + usize::from(client < extra);
                slot.extend_from_slice(&idx[cursor..cursor + take]);
                cursor += take;
            }
        }
        PartitionScheme::LabelShard { shards_per_client } => {
            if shards_per_client == 0 {
                return Err(Error::Config("shards_per_client must be >= 1".into()));
            }
            let num_shards = k * shards_per_client;
            if num_shards > n {
                return Err(Error::Config(format!(
                    "{num_shards} shards exceed sample count {n}"
                )));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by_key(|&i| (samples[i].label, samples[i].id));
            // Cut the label-sorted list into contiguous shards (first n % S
            // shards one longer), then deal shards at random.
            let base = n / num_shards;
            let extra = n % num_shards;
            let mut shards: Vec<&[usize]> = Vec::with_capacity(num_shards);
            let mut cursor = 0;
            for shard in 0..num_shards {
                let take = base + usize::from(shard < extra);
                shards.push(&idx[cursor..cursor + take]);
                cursor += take;
            }
            let mut order: Vec<usize> = (0..num_shards).collect();
            order.shuffle(&mut rng);
            for (client, slot) in assignment.iter_mut().enumerate() {
                for &shard in &order[client * shards_per_client..(client + 1) * shards_per_client]
                {
                    slot.extend_from_slice(shards[shard]);
                }
            }
        }
        PartitionScheme::Dirichlet { concentration } => {
            if !(concentration > 0.0) || !concentration.is_finite() {
                return Err(Error::Config(format!(
                    "Dirichlet concentration must be > 0, got {concentration}"
                )));
            }
            // Per-client label proportions: normalized Gamma(conc, 1) draws.
            let gamma = Gamma::new(concentration, 1.0)
                .map_err(|e| Error::Config(format!("Dirichlet setup failed: {e}")))?;
            let mut proportions: Vec<Vec<f64>> = Vec::with_capacity(k);
            for _ in 0..k {
                let draws: Vec<f64> = (0..num_classes)
                    .map(|_| gamma.sample(&mut rng).max(1e-300))
                    .collect();
                let total: f64 = draws.iter().sum();
                proportions.push(draws.iter().map(|g| g / total).collect());
            }
            // Shuffled pool per class; clients take greedily from the class
            // where they are furthest below their target proportion, so each
            // client tracks its drawn mixture as closely as availability allows.
            let mut pools: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
            for (i, s) in samples.iter().enumerate() {
                pools[s.label].push(i);
            }
            for pool in &mut pools {
                pool.shuffle(&mut rng);
            }
            let base = n / k;
            let extra = n % k;
            for (client, slot) in assignment.iter_mut().enumerate() {
                let target = base + usize::from(client < extra);
                let mut taken = vec![0usize; num_classes];
                for _ in 0..target {
                    let pick = (0..num_classes)
                        .filter(|&c| !pools[c].is_empty())
                        .max_by(|&a, &b| {
                            let da = proportions[client][a] * target as f64 - taken[a] as f64;
                            let db = proportions[client][b] * target as f64 - taken[b] as f64;
                            da.partial_cmp(&db)
                                .unwrap()
                                .then(b.cmp(&a)) // tie -> lowest class index
                        })
                        .expect("pools cannot all be empty before n samples are dealt");
                    slot.push(pools[pick].pop().unwrap());
                    taken[pick] += 1;
                }
            }
        }
    }

    let mut partitions: Vec<Partition> = assignment
        .into_iter()
        .enumerate()
        .map(|(client_id, idx)| Partition {
            client_id,
            samples: idx.into_iter().map(|i| samples[i].clone()).collect(),
        })
        .collect();
    repair_empty(&mut partitions);

    let ds = FederatedDataset {
        partitions,
        num_classes,
        d_in,
    };
    ds.validate()?;
    Ok(ds)
}

/// Nonempty-partition repair: any empty client steals one sample from the
/// currently largest client (lowest id on ties), iterating by client id.
/// The built-in schemes never produce empty clients when K ≤ N, so this is
/// defensive, but the invariant n_k ≥ 1 must hold unconditionally.
fn repair_empty(partitions: &mut [Partition]) {
    for i in 0..partitions.len() {
        if !partitions[i].samples.is_empty() {
            continue;
        }
        let donor = partitions
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.n().cmp(&b.n()).then(ib.cmp(ia)))
            .map(|(idx, _)| idx)
            .unwrap();
        if partitions[donor].n() > 1 {
            let s = partitions[donor].samples.pop().unwrap();
            partitions[i].samples.push(s);
        }
    }
}

/// Serialize to the partition file format:
/// a header `cmfl-partitions v1 K=<K> classes=<c> din=<d>`, then one line
/// `client_id,label,f1,...,fd` per sample, grouped by client. Floats print
/// in shortest round-trip form. Sample ids are not persisted; loading
/// renumbers sequentially in file order.
pub fn format_partitions(ds: &FederatedDataset) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "cmfl-partitions v1 K={} classes={} din={}",
        ds.k(),
        ds.num_classes,
        ds.d_in
    );
    for part in &ds.partitions {
        for s in &part.samples {
            let _ = write!(out, "{},{}", part.client_id, s.label);
            for f in &s.features {
                let _ = write!(out, ",{f}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn save_partitions(ds: &FederatedDataset, path: &Path) -> Result<()> {
    crate::engine::write_atomic(path, &format_partitions(ds))
}

/// Parse the partition file format. Errors carry the 1-based line number.
pub fn parse_partitions(text: &str, path_label: &str) -> Result<FederatedDataset> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path_label.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty file: missing header".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "cmfl-partitions" || fields[1] != "v1" {
        return Err(err(
            1,
            format!("bad header {header:?}: expected `cmfl-partitions v1 K=<K> classes=<c> din=<d>`"),
        ));
    }
    let parse_kv = |field: &str, key: &str| -> Result<usize> {
        field
            .strip_prefix(key)
            .and_then(|v| v.strip_prefix('='))
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| err(1, format!("bad header field {field:?}: expected {key}=<int>")))
    };
    let k = parse_kv(fields[2], "K")?;
    let classes = parse_kv(fields[3], "classes")?;
    let d_in = parse_kv(fields[4], "din")?;
    if k == 0 || classes < 2 || d_in == 0 {
        return Err(err(1, format!("degenerate header: K={k} classes={classes} din={d_in}")));
    }

    let mut partitions: Vec<Partition> = (0..k)
        .map(|client_id| Partition {
            client_id,
            samples: Vec::new(),
        })
        .collect();
    let mut id = 0;
    for (zero_based, line) in lines {
        let line_no = zero_based + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let client: usize = cols
            .next()
            .unwrap()
            .trim()
            .parse()
            .map_err(|_| err(line_no, "bad client_id".into()))?;
        if client >= k {
            return Err(err(line_no, format!("client_id {client} out of range (K={k})")));
        }
        let label: usize = cols
            .next()
            .ok_or_else(|| err(line_no, "missing label".into()))?
            .trim()
            .parse()
            .map_err(|_| err(line_no, "bad label".into()))?;
        if label >= classes {
            return Err(err(
                line_no,
                format!("label {label} out of range (classes={classes})"),
            ));
        }
        let mut features = Vec::with_capacity(d_in);
        for col in cols {
            let f: f64 = col
                .trim()
                .parse()
                .map_err(|_| err(line_no, format!("bad feature value {col:?}")))?;
            if !f.is_finite() {
                return Err(err(line_no, "non-finite feature".into()));
            }
            features.push(f);
        }
        if features.len() != d_in {
            return Err(err(
                line_no,
                format!("expected {d_in} features, got {}", features.len()),
            ));
        }
        partitions[client].samples.push(Sample {
            id,
            features,
            label,
        });
        id += 1;
    }
    for part in &partitions {
        if part.samples.is_empty() {
            return Err(err(
                text.lines().count(),
                format!("client {} has no samples", part.client_id),
            ));
        }
    }
    let ds = FederatedDataset {
        partitions,
        num_classes: classes,
        d_in,
    };
    ds.validate().map_err(|e| err(1, e.to_string()))?;
    Ok(ds)
}

pub fn load_partitions(path: &Path) -> Result<FederatedDataset> {
    let text = std::fs::read_to_string(path)?;
    parse_partitions(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn blob_1000() -> Vec<Sample> {
        generate_synthetic(4, 10, 250, 3.0, 7).unwrap()
    }

    #[test]
    fn two_class_minimum_has_both_labels() {
        let s = generate_synthetic(2, 2, 1, 1.0, 3).unwrap();
        assert_eq!(s.len(), 2);
        let labels: BTreeSet<usize> = s.iter().map(|x| x.label).collect();
        assert_eq!(labels.len(), 2);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_synthetic(3, 5, 10, 2.0, 11).unwrap();
        let b = generate_synthetic(3, 5, 10, 2.0, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(3, 5, 10, 2.0, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generation_rejects_bad_dims() {
        assert!(generate_synthetic(1, 2, 5, 1.0, 0).is_err());
        assert!(generate_synthetic(2, 0, 5, 1.0, 0).is_err());
        assert!(generate_synthetic(2, 2, 0, 1.0, 0).is_err());
        assert!(generate_synthetic(2, 2, 5, 0.0, 0).is_err());
    }

    #[test]
    fn single_client_partition_is_identity() {
        let samples = generate_synthetic(2, 3, 5, 1.0, 1).unwrap();
        let ds = partition(&samples, 1, PartitionScheme::Iid, 9).unwrap();
        assert_eq!(ds.k(), 1);
        assert_eq!(ds.partitions[0].n(), samples.len());
        let ids: BTreeSet<usize> = ds.partitions[0].samples.iter().map(|s| s.id).collect();
        assert_eq!(ids, samples.iter().map(|s| s.id).collect());
    }

    #[test]
    fn iid_split_is_uniform_when_divisible() {
        let ds = partition(&blob_1000(), 10, PartitionScheme::Iid, 5).unwrap();
        for p in &ds.partitions {
            assert_eq!(p.n(), 100);
        }
    }

    #[test]
    fn partition_is_disjoint_cover() {
        let samples = blob_1000();
        for scheme in [
            PartitionScheme::Iid,
            PartitionScheme::LabelShard {
                shards_per_client: 2,
            },
            PartitionScheme::Dirichlet { concentration: 0.5 },
        ] {
            let ds = partition(&samples, 10, scheme, 5).unwrap();
            let mut seen = BTreeSet::new();
            for p in &ds.partitions {
                for s in &p.samples {
                    assert!(seen.insert(s.id), "sample {} dealt twice", s.id);
                }
            }
            assert_eq!(seen.len(), samples.len());
            let w = ds.weights();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn label_shard_gives_label_concentrated_clients() {
        // 1000 samples, 4 classes, 20 shards of 50: one shard per client
        // means every client sees exactly one class (250 = 5 shards each).
        let ds = partition(
            &blob_1000(),
            20,
            PartitionScheme::LabelShard {
                shards_per_client: 1,
            },
            3,
        )
        .unwrap();
        for p in &ds.partitions {
            assert_eq!(p.n(), 50);
            let labels: BTreeSet<usize> = p.samples.iter().map(|s| s.label).collect();
            assert_eq!(labels.len(), 1, "client {} mixes labels", p.client_id);
        }
    }

    #[test]
    fn dirichlet_low_concentration_skews_clients() {
        // Counting check on the dealt split: with concentration 0.1 at least
        // one client must be >= 80% single-label.
        let ds = partition(
            &blob_1000(),
            10,
            PartitionScheme::Dirichlet { concentration: 0.1 },
            7,
        )
        .unwrap();
        let mut best = 0.0f64;
        for p in &ds.partitions {
            let mut counts = vec![0usize; ds.num_classes];
            for s in &p.samples {
                counts[s.label] += 1;
            }
            let top = *counts.iter().max().unwrap() as f64 / p.n() as f64;
            best = best.max(top);
        }
        assert!(best >= 0.8, "most-skewed client only {best:.2} single-label");
    }

    #[test]
    fn dirichlet_rejects_nonpositive_concentration() {
        let samples = generate_synthetic(2, 2, 5, 1.0, 1).unwrap();
        assert!(matches!(
            partition(&samples, 2, PartitionScheme::Dirichlet { concentration: 0.0 }, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn oversized_k_is_rejected() {
        let samples = generate_synthetic(2, 2, 2, 1.0, 1).unwrap();
        assert!(matches!(
            partition(&samples, 5, PartitionScheme::Iid, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn repair_moves_a_sample_into_empty_partition() {
        let samples = generate_synthetic(2, 2, 3, 1.0, 1).unwrap();
        let mut parts = vec![
            Partition {
                client_id: 0,
                samples: samples.clone(),
            },
            Partition {
                client_id: 1,
                samples: Vec::new(),
            },
        ];
        repair_empty(&mut parts);
        assert_eq!(parts[0].n(), samples.len() - 1);
        assert_eq!(parts[1].n(), 1);
    }

    #[test]
    fn save_load_round_trip_preserves_content() {
        let ds = partition(
            &blob_1000(),
            7,
            PartitionScheme::Dirichlet { concentration: 0.3 },
            13,
        )
        .unwrap();
        let text = format_partitions(&ds);
        let back = parse_partitions(&text, "mem").unwrap();
        assert_eq!(back.k(), ds.k());
        assert_eq!(back.num_classes, ds.num_classes);
        assert_eq!(back.d_in, ds.d_in);
        // Ids are renumbered on load; compare content per client.
        for (a, b) in ds.partitions.iter().zip(&back.partitions) {
            assert_eq!(a.n(), b.n());
            for (sa, sb) in a.samples.iter().zip(&b.samples) {
                assert_eq!(sa.label, sb.label);
                assert_eq!(sa.features, sb.features);
            }
        }
        // And the serialized form is a fixed point.
        assert_eq!(format_partitions(&back), text);
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        let e = parse_partitions("", "mem").unwrap_err();
        match e {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn out_of_range_label_is_a_parse_error() {
        let text = "cmfl-partitions v1 K=1 classes=2 din=1\n0,2,0.5\n";
        let e = parse_partitions(text, "mem").unwrap_err();
        match e {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 2);
                assert!(msg.contains("label 2"), "{msg}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn malformed_float_reports_its_line() {
        let text = "cmfl-partitions v1 K=1 classes=2 din=1\n0,1,0.5\n0,0,zap\n";
        let e = parse_partitions(text, "mem").unwrap_err();
        match e {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn split_holdout_takes_class_tails() {
        let samples = generate_synthetic(3, 4, 10, 2.0, 5).unwrap();
        let (train, hold) = split_holdout(&samples, 3, 2).unwrap();
        assert_eq!(train.len(), 24);
        assert_eq!(hold.len(), 6);
        for label in 0..3 {
            assert_eq!(hold.iter().filter(|s| s.label == label).count(), 2);
        }
        // Disjoint by id.
        let train_ids: BTreeSet<usize> = train.iter().map(|s| s.id).collect();
        assert!(hold.iter().all(|s| !train_ids.contains(&s.id)));
    }
}
