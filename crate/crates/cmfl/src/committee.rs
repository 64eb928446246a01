//! Committee mechanism: pairwise scoring of uploaded gradients, final-score
//! aggregation, the two selection strategies, and the middle-band election.
//!
//! A training client's pairwise score against one committee member is the
//! reciprocal squared distance between their gradients; its final score is
//! the reciprocal *mean* squared distance over the whole committee. High
//! score = close to the committee consensus.

use crate::error::{Error, Result, DEGENERATE_SQ_DIST};
use crate::model::ParamVector;
use std::io::Write;

/// Full scoring result for one round: `pairwise[k][c]` is training client
/// position `k` against committee position `c`; `final_scores[k]` combines
/// the row.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub pairwise: Vec<Vec<f64>>,
    pub final_scores: Vec<f64>,
}

/// A client id paired with its final score, the unit selection works on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredClient {
    pub id: usize,
    pub score: f64,
}

/// Which end of the score ranking the aggregation set comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionStrategy {
    /// Strategy I: keep the m highest-scored uploads (closest to the
    /// committee — the robustness-oriented choice).
    TopScores,
    /// Strategy II: keep the m lowest-scored uploads (furthest from the
    /// committee — the convergence-oriented choice).
    BottomScores,
}

/// Reciprocal squared distance between two gradients.
///
/// Identical gradients (squared distance below [`DEGENERATE_SQ_DIST`]) have
/// no defined score; `score_round` rewrites the error with the offending
/// (k, c) positions.
pub fn score_pairwise(g_k: &ParamVector, g_c: &ParamVector) -> Result<f64> {
    if g_k.dim() != g_c.dim() {
        return Err(Error::Domain(format!(
            "gradient dimensions differ: {} vs {}",
            g_k.dim(),
            g_c.dim()
        )));
    }
    let dist_sq = g_k.sq_dist(g_c);
    if dist_sq < DEGENERATE_SQ_DIST {
        return Err(Error::DegenerateScore {
            k: 0,
            c: 0,
            dist_sq,
        });
    }
    Ok(1.0 / dist_sq)
}

/// Combine one training client's pairwise scores: C / Σ (1/P_k^c), i.e. the
/// reciprocal of its mean squared distance to the committee gradients.
pub fn score_final(pairwise_row: &[f64]) -> Result<f64> {
    if pairwise_row.is_empty() {
        return Err(Error::Domain("final score over an empty pairwise row".into()));
    }
    let mut denom = 0.0;
    for (c, p) in pairwise_row.iter().enumerate() {
        if !(p.is_finite() && *p > 0.0) {
            return Err(Error::Domain(format!(
                "pairwise score at committee position {c} must be positive and finite, got {p}"
            )));
        }
        denom += 1.0 / p;
    }
    Ok(pairwise_row.len() as f64 / denom)
}

/// Score every training upload against every committee gradient.
///
/// Deterministic: rows and columns are filled in input order. A degenerate
/// pair aborts scoring with its (training position, committee position).
pub fn score_round(
    training_gradients: &[ParamVector],
    committee_gradients: &[ParamVector],
) -> Result<ScoreTable> {
    if training_gradients.is_empty() {
        return Err(Error::Domain("no training gradients to score".into()));
    }
    if committee_gradients.is_empty() {
        return Err(Error::Domain("no committee gradients to score against".into()));
    }
    let mut pairwise = Vec::with_capacity(training_gradients.len());
    let mut final_scores = Vec::with_capacity(training_gradients.len());
    for (k, g_k) in training_gradients.iter().enumerate() {
        let mut row = Vec::with_capacity(committee_gradients.len());
        for (c, g_c) in committee_gradients.iter().enumerate() {
            let p = match score_pairwise(g_k, g_c) {
                Ok(p) => p,
                Err(Error::DegenerateScore { dist_sq, .. }) => {
                    return Err(Error::DegenerateScore { k, c, dist_sq })
                }
                Err(e) => return Err(e),
            };
            row.push(p);
        }
        final_scores.push(score_final(&row)?);
        pairwise.push(row);
    }
    Ok(ScoreTable {
        pairwise,
        final_scores,
    })
}

/// Rank `scored` by final score and keep `m` of them as the aggregation set.
///
/// Sorting is score-descending with ties broken by ascending client id.
/// Strategy I returns the top m, Strategy II the bottom m; both keep the
/// descending order, so position 0 is the set's highest-scored member — the
/// leader that applies the global update.
pub fn select_aggregation(
    scored: &[ScoredClient],
    strategy: SelectionStrategy,
    m: usize,
) -> Result<Vec<ScoredClient>> {
    if m == 0 {
        return Err(Error::Config("aggregation set size m must be >= 1".into()));
    }
    if m > scored.len() {
        return Err(Error::Config(format!(
            "aggregation set size m={m} exceeds the {} scored clients",
            scored.len()
        )));
    }
    for s in scored {
        if !(s.score.is_finite() && s.score > 0.0) {
            return Err(Error::Domain(format!(
                "client {} has invalid final score {}",
                s.id, s.score
            )));
        }
    }
    let mut order: Vec<ScoredClient> = scored.to_vec();
    order.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores validated finite")
            .then(a.id.cmp(&b.id))
    });
    let selected = match strategy {
        SelectionStrategy::TopScores => order[..m].to_vec(),
        SelectionStrategy::BottomScores => order[order.len() - m..].to_vec(),
    };
    Ok(selected)
}

/// Elect the next committee: the centered band of `c` clients from the
/// aggregation set, which must be ordered by descending score.
///
/// The 0-based window start is `(m - c) / 2` (integer division) — the
/// symmetric middle band. Examples over 1-based positions: m=10, c=4 →
/// positions 4..7; m=3, c=1 → position 2; m=5, c=4 → positions 1..4.
pub fn elect_committee(sorted_aggregation: &[ScoredClient], c: usize) -> Result<Vec<usize>> {
    let m = sorted_aggregation.len();
    if c == 0 {
        return Err(Error::Config("committee size C must be >= 1".into()));
    }
    if c >= m {
        return Err(Error::Config(format!(
            "committee size C={c} must be smaller than the aggregation set (m={m})"
        )));
    }
    let start = ((m - c) / 2).min(m - c); // defensive clamp; (m-c)/2 <= m-c always
    Ok(sorted_aggregation[start..start + c]
        .iter()
        .map(|s| s.id)
        .collect())
}

/// Append one round's score table to per-round CSV writers
/// (`round,k,c,pairwise` and `round,k,final`, with k and c as client ids).
pub fn append_score_csv(
    table: &ScoreTable,
    round: usize,
    training_ids: &[usize],
    committee_ids: &[usize],
    pairwise_out: &mut impl Write,
    final_out: &mut impl Write,
) -> std::io::Result<()> {
    for (k, row) in table.pairwise.iter().enumerate() {
        for (c, p) in row.iter().enumerate() {
            writeln!(
                pairwise_out,
                "{round},{},{},{p}",
                training_ids[k], committee_ids[c]
            )?;
        }
        writeln!(final_out, "{round},{},{}", training_ids[k], table.final_scores[k])?;
    }
    Ok(())
}
