//! Evaluation metrics for produced top-k lists: disparate visibility per
//! continent (with its ΔTotal aggregate), per-user genre miscalibration
//! (with ΔGenre aggregates), and binary-relevance NDCG@k.
//!
//! List shares use the same fractional attribution as the statistics module
//! (`1/|C_i|`, `1/|G_i|` per multi-label item), so shares sum to 1 per list
//! and the signed deviations cancel to 0 — the aggregates therefore use
//! absolute values.

use std::collections::{BTreeMap, BTreeSet};

use crate::stats::{GroupStats, PropensityTable};
use crate::types::{Catalog, Continent, Genre, Interactions, ItemId, RecLists, UserId};
use crate::{Error, Result};

/// Per-continent visibility deviation of a set of top-k lists.
#[derive(Clone, Debug, PartialEq)]
pub struct VisibilityReport {
    /// ΔV_c: mean per-user share of continent c minus its representation.
    pub per_continent: BTreeMap<Continent, f64>,
    /// Σ_c |ΔV_c|.
    pub delta_total: f64,
    /// Users contributing to the averages.
    pub evaluated_users: usize,
    /// Users excluded because their list was empty.
    pub skipped_users: usize,
}

/// Per-user, per-genre calibration deviation of a set of top-k lists.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationReport {
    /// ΔM_ug: genre share in u's list minus u's propensity for the genre.
    pub per_user_genre: BTreeMap<UserId, BTreeMap<Genre, f64>>,
    /// Mean over users of Σ_g |ΔM_ug|.
    pub delta_genre_mean: f64,
    /// Sum over users of Σ_g |ΔM_ug|.
    pub delta_genre_sum: f64,
    /// Users contributing to the aggregates.
    pub evaluated_users: usize,
    /// Users excluded (empty list or no propensity row).
    pub skipped_users: usize,
}

/// NDCG@k of a set of top-k lists against held-out test interactions.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyReport {
    /// Mean NDCG over users with at least one test interaction; 0 when no
    /// user qualifies (callers should treat that case as "not measurable").
    pub ndcg_at_k: f64,
    pub per_user: BTreeMap<UserId, f64>,
    pub evaluated_users: usize,
}

/// Fractional continent shares of one list: each item spreads weight
/// `1/|C_i|` over its continents; totals divide by the list length.
fn continent_shares(
    list: &[crate::types::ScoredRec],
    catalog: &Catalog,
) -> Result<BTreeMap<Continent, f64>> {
    let mut mass: BTreeMap<Continent, f64> = BTreeMap::new();
    for rec in list {
        let meta =
            catalog.get(&rec.item).ok_or_else(|| Error::UnknownItem { item: rec.item.clone() })?;
        let w = 1.0 / meta.continents.len() as f64;
        for c in &meta.continents {
            *mass.entry(c.clone()).or_insert(0.0) += w;
        }
    }
    let len = list.len() as f64;
    Ok(mass.into_iter().map(|(c, m)| (c, m / len)).collect())
}

fn genre_shares(
    list: &[crate::types::ScoredRec],
    catalog: &Catalog,
) -> Result<BTreeMap<Genre, f64>> {
    let mut mass: BTreeMap<Genre, f64> = BTreeMap::new();
    for rec in list {
        let meta =
            catalog.get(&rec.item).ok_or_else(|| Error::UnknownItem { item: rec.item.clone() })?;
        let w = 1.0 / meta.genres.len() as f64;
        for g in &meta.genres {
            *mass.entry(g.clone()).or_insert(0.0) += w;
        }
    }
    let len = list.len() as f64;
    Ok(mass.into_iter().map(|(g, m)| (g, m / len)).collect())
}

/// ΔV_c = (1/|U|) Σ_u share_u(c) − R_c over the catalog's continent
/// universe, plus ΔTotal = Σ_c |ΔV_c|. Users with empty lists are skipped
/// with a warning; evaluating zero users is an error.
pub fn disparate_visibility(
    recs_at_k: &RecLists,
    catalog: &Catalog,
    stats: &GroupStats,
) -> Result<VisibilityReport> {
    let mut mean_share: BTreeMap<Continent, f64> = BTreeMap::new();
    let mut evaluated = 0usize;
    let mut skipped = 0usize;

    for (_, list) in recs_at_k.iter() {
        if list.is_empty() {
            skipped += 1;
            continue;
        }
        evaluated += 1;
        for (c, share) in continent_shares(list, catalog)? {
            *mean_share.entry(c).or_insert(0.0) += share;
        }
    }
    if evaluated == 0 {
        return Err(Error::invalid(
            "disparate visibility is undefined: no user has a non-empty list",
        ));
    }
    if skipped > 0 {
        log::warn!("visibility: skipped {skipped} users with empty lists");
    }
    for share in mean_share.values_mut() {
        *share /= evaluated as f64;
    }

    // The continent universe: everything in the catalog plus anything the
    // training statistics know about, so deficits (share 0) are visible.
    let mut universe: BTreeSet<Continent> = catalog.continents().iter().cloned().collect();
    universe.extend(stats.iter().map(|(c, _)| c.clone()));

    let mut per_continent = BTreeMap::new();
    let mut delta_total = 0.0;
    for continent in universe {
        let share = mean_share.get(&continent).copied().unwrap_or(0.0);
        let delta = share - stats.get(&continent);
        delta_total += delta.abs();
        per_continent.insert(continent, delta);
    }

    Ok(VisibilityReport {
        per_continent,
        delta_total,
        evaluated_users: evaluated,
        skipped_users: skipped,
    })
}

/// ΔM_ug = genre share in u's list − P_ug, over the union of the genres the
/// user was served and the genres the user has propensity for. Users
/// without a propensity row or with an empty list are skipped with a
/// warning; evaluating zero users is an error.
pub fn miscalibration(
    recs_at_k: &RecLists,
    catalog: &Catalog,
    prop: &PropensityTable,
) -> Result<CalibrationReport> {
    let mut per_user_genre = BTreeMap::new();
    let mut delta_genre_sum = 0.0;
    let mut skipped = 0usize;

    for (user, list) in recs_at_k.iter() {
        let row = match prop.row(user) {
            Some(row) if !list.is_empty() => row,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let shares = genre_shares(list, catalog)?;
        let mut universe: BTreeSet<&Genre> = row.keys().collect();
        universe.extend(shares.keys());

        let mut deltas = BTreeMap::new();
        let mut user_total = 0.0;
        for genre in universe {
            let share = shares.get(genre).copied().unwrap_or(0.0);
            let target = row.get(genre).copied().unwrap_or(0.0);
            let delta = share - target;
            user_total += delta.abs();
            deltas.insert(genre.clone(), delta);
        }
        delta_genre_sum += user_total;
        per_user_genre.insert(user.clone(), deltas);
    }

    let evaluated = per_user_genre.len();
    if evaluated == 0 {
        return Err(Error::invalid(
            "miscalibration is undefined: no user has both a list and a propensity row",
        ));
    }
    if skipped > 0 {
        log::warn!("calibration: skipped {skipped} users (empty list or no training history)");
    }

    Ok(CalibrationReport {
        per_user_genre,
        delta_genre_mean: delta_genre_sum / evaluated as f64,
        delta_genre_sum,
        evaluated_users: evaluated,
        skipped_users: skipped,
    })
}

/// Binary-relevance NDCG@k: DCG = Σ over hits at rank r ≤ k of
/// 1/log2(r+1); IDCG places min(k, |test items|) hits at the top ranks.
/// The mean covers only users with at least one test interaction.
pub fn ndcg(recs_at_k: &RecLists, test: &Interactions, k: usize) -> Result<AccuracyReport> {
    if k == 0 {
        return Err(Error::invalid("ndcg requires k >= 1"));
    }

    let mut test_items: BTreeMap<&UserId, BTreeSet<&ItemId>> = BTreeMap::new();
    for r in test.iter() {
        test_items.entry(&r.user).or_default().insert(&r.item);
    }

    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();

    let mut per_user = BTreeMap::new();
    let mut total = 0.0;
    for (user, list) in recs_at_k.iter() {
        let Some(relevant) = test_items.get(user) else { continue };
        if relevant.is_empty() {
            continue;
        }
        let mut dcg = 0.0;
        for (idx, rec) in list.iter().take(k).enumerate() {
            if relevant.contains(&rec.item) {
                dcg += discount(idx + 1);
            }
        }
        let ideal_hits = k.min(relevant.len());
        let mut idcg = 0.0;
        for rank in 1..=ideal_hits {
            idcg += discount(rank);
        }
        let value = dcg / idcg;
        total += value;
        per_user.insert(user.clone(), value);
    }

    let evaluated = per_user.len();
    let ndcg_at_k = if evaluated == 0 { 0.0 } else { total / evaluated as f64 };
    Ok(AccuracyReport { ndcg_at_k, per_user, evaluated_users: evaluated })
}
