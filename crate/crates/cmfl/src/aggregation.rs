//! Gradient aggregation rules: weighted averaging plus the Byzantine-robust
//! baselines (coordinate-wise median, trimmed mean, Krum, Multi-Krum).
//!
//! All rules consume a slice of gradients of identical dimension and produce
//! one aggregate gradient. The weighted rules take sample-proportional
//! weights that must sum to one; the robust rules are unweighted by
//! construction.

use crate::error::{Error, Result};
use crate::model::ParamVector;

const WEIGHT_SUM_TOL: f64 = 1e-12;

fn check_nonempty_same_dim(gradients: &[ParamVector]) -> Result<usize> {
    let first = gradients
        .first()
        .ok_or_else(|| Error::Domain("aggregation over an empty gradient set".into()))?;
    let dim = first.dim();
    for (i, g) in gradients.iter().enumerate() {
        if g.dim() != dim {
            return Err(Error::Domain(format!(
                "gradient {i} has dimension {} but expected {dim}",
                g.dim()
            )));
        }
        if !g.is_finite() {
            return Err(Error::Domain(format!("gradient {i} has non-finite entries")));
        }
    }
    Ok(dim)
}

/// Σ_k p_k g_k with p summing to one (sample-proportional federated
/// averaging). Accumulation follows input order, so callers that need
/// bit-reproducibility must pass a deterministically ordered slice.
pub fn fedavg(gradients: &[ParamVector], weights: &[f64]) -> Result<ParamVector> {
    let dim = check_nonempty_same_dim(gradients)?;
    if weights.len() != gradients.len() {
        return Err(Error::Domain(format!(
            "{} weights for {} gradients",
            weights.len(),
            gradients.len()
        )));
    }
    let mut sum = 0.0;
    for (i, w) in weights.iter().enumerate() {
        if !(w.is_finite() && *w >= 0.0) {
            return Err(Error::Domain(format!("weight {i} is invalid: {w}")));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Domain(format!(
            "aggregation weights sum to {sum}, expected 1"
        )));
    }
    let mut out = ParamVector::zeros(dim);
    for (g, w) in gradients.iter().zip(weights) {
        out.add_scaled(*w, g);
    }
    Ok(out)
}

/// Unweighted mean, the special case p_k = 1/n used by Multi-Krum. Sums
/// first and divides once, like `trimmed_mean`.
pub fn unweighted_mean(gradients: &[ParamVector]) -> Result<ParamVector> {
    let n = gradients.len();
    let dim = check_nonempty_same_dim(gradients)?;
    let mut out = ParamVector::zeros(dim);
    for g in gradients {
        out.add_scaled(1.0, g);
    }
    for v in &mut out.values {
        *v /= n as f64;
    }
    Ok(out)
}

/// Coordinate-wise median. Even counts take the midpoint of the two central
/// order statistics.
pub fn coordinate_median(gradients: &[ParamVector]) -> Result<ParamVector> {
    let dim = check_nonempty_same_dim(gradients)?;
    let n = gradients.len();
    let mut out = ParamVector::zeros(dim);
    let mut column = vec![0.0; n];
    for j in 0..dim {
        for (i, g) in gradients.iter().enumerate() {
            column[i] = g.values[j];
        }
        column.sort_by(|a, b| a.partial_cmp(b).expect("finiteness checked"));
        out.values[j] = if n % 2 == 1 {
            column[n / 2]
        } else {
            0.5 * (column[n / 2 - 1] + column[n / 2])
        };
    }
    Ok(out)
}

/// Coordinate-wise trimmed mean: drop `floor(beta_percent% * n)` values at
/// each end of every coordinate's sorted column, then average the rest.
pub fn trimmed_mean(gradients: &[ParamVector], beta_percent: f64) -> Result<ParamVector> {
    let dim = check_nonempty_same_dim(gradients)?;
    if !(0.0..50.0).contains(&beta_percent) {
        return Err(Error::Config(format!(
            "trim fraction must be in [0, 50) percent, got {beta_percent}"
        )));
    }
    let n = gradients.len();
    let cut = ((beta_percent / 100.0) * n as f64).floor() as usize;
    if 2 * cut >= n {
        return Err(Error::Config(format!(
            "trimming {cut} per side leaves no survivors out of {n} gradients"
        )));
    }
    let keep = n - 2 * cut;
    let mut out = ParamVector::zeros(dim);
    let mut column = vec![0.0; n];
    for j in 0..dim {
        for (i, g) in gradients.iter().enumerate() {
            column[i] = g.values[j];
        }
        column.sort_by(|a, b| a.partial_cmp(b).expect("finiteness checked"));
        out.values[j] = column[cut..n - cut].iter().sum::<f64>() / keep as f64;
    }
    Ok(out)
}

/// Krum score of every gradient: the sum of squared distances to its
/// `n - f - 2` nearest neighbours (excluding itself). Requires `n >= f + 3`
/// so at least one neighbour counts.
pub fn krum_scores(gradients: &[ParamVector], f: usize) -> Result<Vec<f64>> {
    check_nonempty_same_dim(gradients)?;
    let n = gradients.len();
    if n < f + 3 {
        return Err(Error::Config(format!(
            "krum needs n >= f + 3 gradients, got n={n}, f={f}"
        )));
    }
    let closest = n - f - 2;
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let mut dists: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| gradients[i].sq_dist(&gradients[j]))
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).expect("finiteness checked"));
        scores.push(dists[..closest].iter().sum());
    }
    Ok(scores)
}

/// Indices of the `m_select` lowest-Krum-score gradients, in ascending score
/// order with ties broken by lower index.
pub fn krum_select(gradients: &[ParamVector], f: usize, m_select: usize) -> Result<Vec<usize>> {
    if m_select == 0 || m_select > gradients.len() {
        return Err(Error::Config(format!(
            "multi-krum selection size {m_select} out of range for {} gradients",
            gradients.len()
        )));
    }
    let scores = krum_scores(gradients, f)?;
    let mut order: Vec<usize> = (0..gradients.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .expect("scores are finite")
            .then(a.cmp(&b))
    });
    Ok(order[..m_select].to_vec())
}

/// Krum: return the single gradient with the lowest score, plus its index.
pub fn krum(gradients: &[ParamVector], f: usize) -> Result<(ParamVector, usize)> {
    let idx = krum_select(gradients, f, 1)?[0];
    Ok((gradients[idx].clone(), idx))
}

/// Multi-Krum: unweighted mean of the `m_select` lowest-score gradients.
/// Returns the aggregate and the selected indices.
pub fn multi_krum(
    gradients: &[ParamVector],
    f: usize,
    m_select: usize,
) -> Result<(ParamVector, Vec<usize>)> {
    let selected = krum_select(gradients, f, m_select)?;
    let picked: Vec<ParamVector> = selected.iter().map(|&i| gradients[i].clone()).collect();
    Ok((unweighted_mean(&picked)?, selected))
}
