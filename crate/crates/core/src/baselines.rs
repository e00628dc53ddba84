//! Reference re-rankers for four-way comparisons: plain score truncation
//! (the recommender's original output), greedy per-user genre calibration,
//! and a global continent-quota visibility re-ranker.

use std::collections::{BTreeMap, BTreeSet};

use crate::moregin::largest_remainder_quotas;
use crate::stats::{GroupStats, PropensityTable};
use crate::types::{
    Catalog, Genre, ItemId, ItemMeta, ListOrdering, RecLists, RerankParams, ScoredRec, UserId,
};
use crate::{Error, Result};

/// Knobs of the greedy calibration re-ranker.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationParams {
    /// Trade-off between relevance (0) and calibration (1).
    pub lambda: f64,
    pub topk: usize,
    /// Smoothing added to the list's genre distribution so the divergence
    /// stays finite when a preferred genre is missing from the list.
    pub epsilon: f64,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        CalibrationParams { lambda: 0.99, topk: 10, epsilon: 1e-6 }
    }
}

impl CalibrationParams {
    pub fn new(lambda: f64, topk: usize) -> Result<Self> {
        let params = CalibrationParams { lambda, topk, ..Default::default() };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if self.topk == 0 {
            return Err(Error::invalid("topk must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon must be positive and finite"));
        }
        Ok(())
    }
}

/// The untouched baseline: every list truncated to its first `topk` entries.
pub fn or_rerank(recs_topn: &RecLists, topk: usize) -> Result<RecLists> {
    if topk == 0 {
        return Err(Error::invalid("topk must be at least 1"));
    }
    Ok(recs_topn.truncated(topk))
}

/// Objective of adding `candidate` to `selection`:
/// `(1−λ)·Σ scores − λ·KL(P_u ‖ q̃)`, where q̃ is the fractional genre
/// distribution of the grown list, ε-smoothed over the catalog's genre
/// universe, and the divergence uses natural log.
///
/// Computed from scratch on every call (no incremental caches) so the value
/// is a pure function of the arguments.
fn calibration_objective(
    list: &[ScoredRec],
    metas: &[&ItemMeta],
    selection: &[usize],
    candidate: usize,
    target: Option<&BTreeMap<Genre, f64>>,
    n_genres_universe: usize,
    params: &CalibrationParams,
) -> f64 {
    let mut score_sum = 0.0;
    for &i in selection {
        score_sum += list[i].score;
    }
    score_sum += list[candidate].score;

    let kl = match target {
        None => 0.0,
        Some(row) => {
            let size = (selection.len() + 1) as f64;
            let mut mass: BTreeMap<&Genre, f64> = BTreeMap::new();
            for &i in selection.iter().chain(std::iter::once(&candidate)) {
                let meta = metas[i];
                let w = 1.0 / meta.genres.len() as f64;
                for g in &meta.genres {
                    *mass.entry(g).or_insert(0.0) += w;
                }
            }
            let denom = 1.0 + params.epsilon * n_genres_universe as f64;
            let mut kl = 0.0;
            for (genre, p) in row {
                if *p <= 0.0 {
                    continue;
                }
                let q = mass.get(genre).copied().unwrap_or(0.0) / size;
                let q_smooth = (q + params.epsilon) / denom;
                kl += p * (p / q_smooth).ln();
            }
            kl
        }
    };

    (1.0 - params.lambda) * score_sum + params.lambda * (-kl)
}

/// Greedy calibration: per user, grow the output one item at a time, always
/// taking the candidate that maximizes [`calibration_objective`] (ties: the
/// earlier input rank). Output ranks follow selection order and keep the
/// original scores. Users without a propensity row degrade to pure
/// relevance; empty candidate lists are skipped with a warning.
pub fn cl_rerank(
    recs_topn: &RecLists,
    catalog: &Catalog,
    prop: &PropensityTable,
    params: &CalibrationParams,
) -> Result<RecLists> {
    params.validate()?;
    let n_genres = catalog.genres().len();

    let mut rows = Vec::new();
    let mut cold_start_users = 0usize;
    let mut empty_lists = 0usize;

    for (user, list) in recs_topn.iter() {
        if list.is_empty() {
            empty_lists += 1;
            continue;
        }
        let metas: Vec<&ItemMeta> = list
            .iter()
            .map(|r| {
                catalog.get(&r.item).ok_or_else(|| Error::UnknownItem { item: r.item.clone() })
            })
            .collect::<Result<_>>()?;
        let target = prop.row(user);
        if target.is_none() {
            cold_start_users += 1;
        }

        let mut selection: Vec<usize> = Vec::new();
        let mut available = vec![true; list.len()];
        for _ in 0..params.topk.min(list.len()) {
            let mut best: Option<(f64, usize)> = None;
            for (i, open) in available.iter().enumerate() {
                if !open {
                    continue;
                }
                let objective =
                    calibration_objective(list, &metas, &selection, i, target, n_genres, params);
                if best.is_none_or(|(b, _)| objective > b) {
                    best = Some((objective, i));
                }
            }
            let (_, pick) = best.expect("list is non-empty");
            available[pick] = false;
            selection.push(pick);
        }

        for (pos, &i) in selection.iter().enumerate() {
            rows.push((user.clone(), list[i].item.clone(), list[i].score, (pos + 1) as u32));
        }
    }

    if cold_start_users > 0 {
        log::warn!("calibration: {cold_start_users} users without history fall back to relevance");
    }
    if empty_lists > 0 {
        log::warn!("calibration: skipped {empty_lists} users with empty candidate lists");
    }

    let (lists, _) = RecLists::from_rows(rows, params.topk, ListOrdering::AllowScoreInversions)?;
    Ok(lists)
}

/// Visibility re-ranker: apportions `|users|·topk` slots across continents
/// exactly as the quota pass of the main re-ranker, then scans all
/// candidates globally by descending score (ties: user, then item),
/// granting a candidate when any of its continents has quota left — the
/// first such continent in label order is the one charged. A final
/// relevance-only pass fills lists the quotas left short.
pub fn pf_rerank(
    recs_topn: &RecLists,
    catalog: &Catalog,
    stats: &GroupStats,
    params: &RerankParams,
) -> Result<RecLists> {
    params.validate()?;
    let pool = recs_topn.truncated(params.topn);

    let continents = catalog.continents();
    let continent_index: BTreeMap<_, usize> =
        continents.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
    let shares: Vec<f64> = continents.iter().map(|c| stats.get(c)).collect();

    let mut empty_lists = 0usize;
    let mut entries: Vec<(&UserId, &ScoredRec)> = Vec::new();
    for (user, list) in pool.iter() {
        if list.is_empty() {
            empty_lists += 1;
            continue;
        }
        for rec in list {
            if !catalog.contains(&rec.item) {
                return Err(Error::UnknownItem { item: rec.item.clone() });
            }
            entries.push((user, rec));
        }
    }
    entries.sort_by(|a, b| {
        b.1.score
            .total_cmp(&a.1.score)
            .then_with(|| a.0.cmp(b.0))
            .then_with(|| a.1.item.cmp(&b.1.item))
    });

    let n_users = pool.n_users() - empty_lists;
    let mut remaining = largest_remainder_quotas(&shares, (n_users * params.topk) as u64);

    let mut counts: BTreeMap<&UserId, usize> = BTreeMap::new();
    let mut chosen: BTreeMap<&UserId, BTreeSet<&ItemId>> = BTreeMap::new();
    for (user, rec) in &entries {
        if counts.get(user).copied().unwrap_or(0) >= params.topk {
            continue;
        }
        let meta = catalog.get(&rec.item).expect("validated above");
        let slot = meta.continents.iter().find_map(|c| {
            let idx = continent_index[c];
            (remaining[idx] > 0).then_some(idx)
        });
        if let Some(idx) = slot {
            remaining[idx] -= 1;
            *counts.entry(user).or_default() += 1;
            chosen.entry(user).or_default().insert(&rec.item);
        }
    }

    // Fill pass: quotas may starve some users; complete their lists with
    // their own highest-ranked leftovers.
    for (user, list) in pool.iter() {
        let mut count = counts.get(user).copied().unwrap_or(0);
        if count >= params.topk {
            continue;
        }
        let set = chosen.entry(user).or_default();
        for rec in list {
            if count >= params.topk {
                break;
            }
            if set.insert(&rec.item) {
                count += 1;
            }
        }
    }

    if empty_lists > 0 {
        log::warn!("visibility rerank: skipped {empty_lists} users with empty candidate lists");
    }

    // Assemble in original per-user order, which is score-descending.
    let mut rows = Vec::new();
    for (user, list) in pool.iter() {
        let Some(set) = chosen.get(user) else { continue };
        let mut rank = 0u32;
        for rec in list {
            if set.contains(&rec.item) {
                rank += 1;
                rows.push((user.clone(), rec.item.clone(), rec.score, rank));
            }
        }
    }
    let (lists, _) = RecLists::from_rows(rows, params.topk, ListOrdering::StrictScores)?;
    Ok(lists)
}
