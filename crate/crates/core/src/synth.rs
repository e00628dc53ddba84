//! Seeded synthetic data: a configurable generator for benchmarking, and a
//! constructive builder for instances whose continent quotas and genre
//! targets can all be met exactly.
//!
//! All randomness comes from `ChaCha8Rng` seeded with a caller-supplied
//! `u64`, so the same config always yields byte-identical datasets on every
//! platform.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::types::{
    Catalog, Continent, Genre, Interactions, ItemId, ItemMeta, ListOrdering, Rating, RecLists,
    RerankParams, UserId,
};
use crate::{Error, Result};

/// Probability that a user's next rating stays on their home continent, the
/// coupling that makes per-user genre tastes cluster geographically.
const HOME_BIAS: f64 = 0.7;

/// Shape of a generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_items: usize,
    /// Relative weight of each continent in the item catalog and in rating
    /// traffic. Weights need not sum to 1.
    pub continent_weights: BTreeMap<Continent, f64>,
    /// Per-continent genre weights; items and ratings on a continent draw
    /// their genre from its row.
    pub genre_weights: BTreeMap<Continent, BTreeMap<Genre, f64>>,
    pub ratings_per_user: usize,
    /// Probability that an item carries a second continent and a second
    /// genre label.
    pub multi_label_prob: f64,
    /// Amplitude of the uniform noise added to popularity-based scores.
    pub score_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let genres = |a: f64, c: f64, d: f64| -> BTreeMap<Genre, f64> {
            [(Genre::from("Action"), a), (Genre::from("Comedy"), c), (Genre::from("Drama"), d)]
                .into()
        };
        SynthConfig {
            n_users: 50,
            n_items: 200,
            continent_weights: [(Continent::from("NA"), 3.0), (Continent::from("EU"), 1.0)].into(),
            genre_weights: [
                (Continent::from("NA"), genres(3.0, 1.0, 1.0)),
                (Continent::from("EU"), genres(1.0, 3.0, 1.0)),
            ]
            .into(),
            ratings_per_user: 30,
            multi_label_prob: 0.1,
            score_noise: 0.05,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_items == 0 {
            return Err(Error::invalid("n_users and n_items must be at least 1"));
        }
        if self.ratings_per_user == 0 {
            return Err(Error::invalid("ratings_per_user must be at least 1"));
        }
        if self.ratings_per_user > self.n_items {
            return Err(Error::invalid(format!(
                "unsatisfiable config: ratings_per_user ({}) exceeds n_items ({}), \
                 so users cannot rate distinct items",
                self.ratings_per_user, self.n_items
            )));
        }
        if self.continent_weights.is_empty() {
            return Err(Error::invalid("continent_weights must not be empty"));
        }
        if self.n_items < self.continent_weights.len() {
            return Err(Error::invalid(format!(
                "unsatisfiable config: {} items cannot cover {} continents",
                self.n_items,
                self.continent_weights.len()
            )));
        }
        for (c, w) in &self.continent_weights {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::invalid(format!("continent weight for {c} must be > 0")));
            }
            let Some(row) = self.genre_weights.get(c) else {
                return Err(Error::invalid(format!("missing genre weights for continent {c}")));
            };
            if row.is_empty() {
                return Err(Error::invalid(format!("empty genre weights for continent {c}")));
            }
            for (g, gw) in row {
                if !(gw.is_finite() && *gw > 0.0) {
                    return Err(Error::invalid(format!("genre weight for {c}/{g} must be > 0")));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.multi_label_prob) {
            return Err(Error::invalid("multi_label_prob must lie in [0, 1]"));
        }
        if !(self.score_noise.is_finite() && self.score_noise >= 0.0) {
            return Err(Error::invalid("score_noise must be finite and >= 0"));
        }
        Ok(())
    }
}

fn digits(n: usize) -> usize {
    n.max(1).to_string().len()
}

/// Weighted pick over `entries`; falls back to the last entry on the
/// (measure-zero) edge where the cursor overshoots the cumulative total.
fn pick_weighted<'a, K>(rng: &mut ChaCha8Rng, entries: &'a [(K, f64)], total: f64) -> &'a K {
    let cursor = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (key, weight) in entries {
        acc += weight;
        if cursor < acc {
            return key;
        }
    }
    &entries.last().expect("entries not empty").0
}

/// One continent's genre weights in sampling order plus their total mass.
type GenreRow = (Vec<(Genre, f64)>, f64);

/// Generates a dataset: an item catalog labeled by weighted continents and
/// genres, user histories biased toward a home continent, and per-user
/// candidate lists scored by popularity plus uniform noise.
pub fn generate(config: &SynthConfig) -> Result<(Catalog, Interactions, RecLists)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let continents: Vec<(Continent, f64)> =
        config.continent_weights.iter().map(|(c, w)| (c.clone(), *w)).collect();
    let continent_total: f64 = continents.iter().map(|(_, w)| w).sum();
    let genre_rows: BTreeMap<&Continent, GenreRow> = config
        .genre_weights
        .iter()
        .map(|(c, row)| {
            let entries: Vec<(Genre, f64)> = row.iter().map(|(g, w)| (g.clone(), *w)).collect();
            let total = entries.iter().map(|(_, w)| w).sum();
            (c, (entries, total))
        })
        .collect();

    // Items: zero-padded ids so lexicographic order equals creation order.
    let item_width = digits(config.n_items);
    let mut ids: Vec<ItemId> = Vec::with_capacity(config.n_items);
    let mut metas: Vec<ItemMeta> = Vec::with_capacity(config.n_items);
    let mut by_continent_genre: BTreeMap<(Continent, Genre), Vec<usize>> = BTreeMap::new();
    let mut by_continent: BTreeMap<Continent, Vec<usize>> = BTreeMap::new();
    for idx in 0..config.n_items {
        let id = ItemId::from(format!("i{:0>width$}", idx + 1, width = item_width));
        let primary = pick_weighted(&mut rng, &continents, continent_total).clone();
        let mut item_continents: BTreeSet<Continent> = [primary.clone()].into();
        if continents.len() >= 2
            && config.multi_label_prob > 0.0
            && rng.random::<f64>() < config.multi_label_prob
        {
            for _ in 0..20 {
                let second = pick_weighted(&mut rng, &continents, continent_total);
                if *second != primary {
                    item_continents.insert(second.clone());
                    break;
                }
            }
            if item_continents.len() == 1 {
                let fallback = continents.iter().find(|(c, _)| *c != primary);
                item_continents.insert(fallback.expect(">= 2 continents").0.clone());
            }
        }

        let (genre_entries, genre_total) = &genre_rows[&primary];
        let primary_genre = pick_weighted(&mut rng, genre_entries, *genre_total).clone();
        let mut item_genres: BTreeSet<Genre> = [primary_genre.clone()].into();
        if genre_entries.len() >= 2
            && config.multi_label_prob > 0.0
            && rng.random::<f64>() < config.multi_label_prob
        {
            for _ in 0..20 {
                let second = pick_weighted(&mut rng, genre_entries, *genre_total);
                if *second != primary_genre {
                    item_genres.insert(second.clone());
                    break;
                }
            }
            if item_genres.len() == 1 {
                let fallback = genre_entries.iter().find(|(g, _)| *g != primary_genre);
                item_genres.insert(fallback.expect(">= 2 genres").0.clone());
            }
        }

        for c in &item_continents {
            by_continent.entry(c.clone()).or_default().push(idx);
            for g in &item_genres {
                by_continent_genre.entry((c.clone(), g.clone())).or_default().push(idx);
            }
        }
        ids.push(id);
        metas.push(ItemMeta::new(item_genres, item_continents)?);
    }

    // Histories: each rating draws a continent (home-biased), then a genre
    // on that continent, then an unrated item labeled with both (falling
    // back to the continent pool, then the whole catalog).
    let user_width = digits(config.n_users);
    let mut ratings: Vec<Rating> = Vec::with_capacity(config.n_users * config.ratings_per_user);
    let mut list_rows: Vec<(UserId, ItemId, f64, u32)> = Vec::new();
    for user_idx in 0..config.n_users {
        let user = UserId::from(format!("u{:0>width$}", user_idx + 1, width = user_width));
        let home = pick_weighted(&mut rng, &continents, continent_total).clone();
        let mut rated: BTreeSet<usize> = BTreeSet::new();
        for t in 1..=config.ratings_per_user {
            let continent = if rng.random::<f64>() < HOME_BIAS {
                home.clone()
            } else {
                pick_weighted(&mut rng, &continents, continent_total).clone()
            };
            let (genre_entries, genre_total) = &genre_rows[&continent];
            let genre = pick_weighted(&mut rng, genre_entries, *genre_total).clone();

            let full_pool: Vec<usize>;
            let pool: &[usize] = match by_continent_genre.get(&(continent.clone(), genre)) {
                Some(pool) => pool,
                None => match by_continent.get(&continent) {
                    Some(pool) => pool,
                    None => {
                        full_pool = (0..config.n_items).collect();
                        &full_pool
                    }
                },
            };

            let mut picked = None;
            for _ in 0..20 {
                let candidate = pool[rng.random_range(0..pool.len())];
                if !rated.contains(&candidate) {
                    picked = Some(candidate);
                    break;
                }
            }
            let idx = picked.unwrap_or_else(|| {
                pool.iter()
                    .copied()
                    .find(|i| !rated.contains(i))
                    .or_else(|| (0..config.n_items).find(|i| !rated.contains(i)))
                    .expect("ratings_per_user <= n_items guarantees a free item")
            });
            rated.insert(idx);
            ratings.push(Rating {
                user: user.clone(),
                item: ids[idx].clone(),
                value: rng.random_range(1..=5) as f64,
                timestamp: t as i64,
            });
        }

        // Candidate list: popularity (earlier items more popular) plus noise.
        let mut scored: Vec<(f64, usize)> = (0..config.n_items)
            .map(|idx| {
                let popularity = (config.n_items - idx) as f64 / config.n_items as f64;
                (popularity + rng.random::<f64>() * config.score_noise, idx)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        for (rank0, (score, idx)) in scored.into_iter().enumerate() {
            list_rows.push((user.clone(), ids[idx].clone(), score, (rank0 + 1) as u32));
        }
    }

    let catalog = Catalog::new(ids.into_iter().zip(metas).collect());
    let interactions = Interactions::new(ratings)?;
    let (reclists, _) = RecLists::from_rows(list_rows, config.n_items, ListOrdering::StrictScores)?;
    Ok((catalog, interactions, reclists))
}

/// Shape of an exactly-satisfiable instance: identical user histories whose
/// continent/genre composition makes every quota target a whole number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSpec {
    pub n_users: usize,
    /// Target continent shares; each `share · n_users · topk` must be a
    /// whole number of slots.
    pub continent_shares: BTreeMap<Continent, f64>,
    pub n_genres: usize,
    pub seed: u64,
}

/// Builds an instance the re-ranker can satisfy without deviation beyond
/// quota rounding:
///
/// - every user's history has the same length `L` (a multiple of
///   `n_genres` with all `share · L` integral), spread over a
///   continent x genre grid by a northwest-corner fill, so every user's
///   genre propensity is exactly `1 / n_genres`;
/// - each populated grid cell gets enough distinct single-label items that
///   no per-user pool ever runs dry;
/// - every user's candidate list covers the whole universe (`topn` must be
///   at least the universe size), scored by popularity plus per-user noise.
pub fn make_feasible_instance(
    params: &RerankParams,
    spec: &FeasibleSpec,
) -> Result<(Catalog, Interactions, RecLists)> {
    params.validate()?;
    if spec.n_users == 0 {
        return Err(Error::invalid("n_users must be at least 1"));
    }
    if spec.n_genres == 0 {
        return Err(Error::invalid("n_genres must be at least 1"));
    }
    // Validates each share and their sum.
    crate::stats::GroupStats::from_shares(spec.continent_shares.clone())?;

    if !params.topk.is_multiple_of(spec.n_genres) {
        return Err(Error::invalid(format!(
            "topk ({}) must be a multiple of n_genres ({}) for whole per-genre targets",
            params.topk, spec.n_genres
        )));
    }
    let total_slots = (spec.n_users * params.topk) as f64;
    for (continent, share) in &spec.continent_shares {
        let target = share * total_slots;
        if (target - target.round()).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "continent slot target for {continent} is not a whole number \
                 ({share} x {total_slots} = {target})"
            )));
        }
    }

    // Smallest history length L: a multiple of n_genres with every
    // share · L integral, so the northwest fill works on whole cells.
    let history_len = (1..=10_000usize)
        .map(|m| m * spec.n_genres)
        .find(|&len| {
            spec.continent_shares.values().all(|share| {
                let cell = share * len as f64;
                (cell - cell.round()).abs() <= 1e-9
            })
        })
        .ok_or_else(|| {
            Error::invalid("no history length up to 10000 x n_genres fits the continent shares")
        })?;

    let continents: Vec<&Continent> = spec.continent_shares.keys().collect();
    let continent_amounts: Vec<usize> = spec
        .continent_shares
        .values()
        .map(|share| (share * history_len as f64).round() as usize)
        .collect();
    debug_assert_eq!(continent_amounts.iter().sum::<usize>(), history_len);
    let per_genre = history_len / spec.n_genres;

    // Northwest-corner fill of the continent x genre grid: row sums equal
    // the continent amounts, column sums equal per_genre.
    let mut grid = vec![vec![0usize; spec.n_genres]; continents.len()];
    let mut genre_remaining = vec![per_genre; spec.n_genres];
    let mut genre_cursor = 0usize;
    for (ci, &amount) in continent_amounts.iter().enumerate() {
        let mut remaining = amount;
        while remaining > 0 {
            let take = remaining.min(genre_remaining[genre_cursor]);
            grid[ci][genre_cursor] += take;
            remaining -= take;
            genre_remaining[genre_cursor] -= take;
            if genre_remaining[genre_cursor] == 0 && genre_cursor + 1 < spec.n_genres {
                genre_cursor += 1;
            }
        }
    }

    let max_cell = grid.iter().flatten().copied().max().unwrap_or(0);
    let pool_size = params.topk.max(max_cell);

    let genre_width = digits(spec.n_genres);
    let genres: Vec<Genre> =
        (1..=spec.n_genres).map(|i| Genre::from(format!("g{i:0>genre_width$}"))).collect();

    // One pool of single-label items per populated cell, deep enough for
    // both the histories and a full top-k from any single cell.
    let pool_width = digits(pool_size);
    let mut items: BTreeMap<ItemId, ItemMeta> = BTreeMap::new();
    let mut cell_items: Vec<Vec<Vec<ItemId>>> =
        vec![vec![Vec::new(); spec.n_genres]; continents.len()];
    for (ci, continent) in continents.iter().enumerate() {
        for (gi, genre) in genres.iter().enumerate() {
            for j in 1..=pool_size {
                let id = ItemId::from(format!("{continent}-{genre}-{j:0>pool_width$}"));
                items.insert(
                    id.clone(),
                    ItemMeta::new([genre.clone()].into(), [(*continent).clone()].into())?,
                );
                cell_items[ci][gi].push(id);
            }
        }
    }
    let catalog = Catalog::new(items);
    let n_items = catalog.len();
    if params.topn < n_items {
        return Err(Error::invalid(format!(
            "topn ({}) must cover the whole universe of {n_items} items",
            params.topn
        )));
    }

    // Identical histories: each user rates the first grid[c][g] items of
    // every cell, in grid order, with increasing timestamps.
    let user_width = digits(spec.n_users);
    let users: Vec<UserId> =
        (1..=spec.n_users).map(|i| UserId::from(format!("u{i:0>user_width$}"))).collect();
    let mut ratings = Vec::with_capacity(spec.n_users * history_len);
    for user in &users {
        let mut t = 0i64;
        for (ci, row) in grid.iter().enumerate() {
            for (gi, &cell) in row.iter().enumerate() {
                for item in cell_items[ci][gi].iter().take(cell) {
                    t += 1;
                    ratings.push(Rating {
                        user: user.clone(),
                        item: item.clone(),
                        value: 4.0,
                        timestamp: t,
                    });
                }
            }
        }
    }
    let interactions = Interactions::new(ratings)?;

    // Full-universe candidate lists; noise below the popularity spacing
    // keeps scores distinct while letting lists differ per user.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let universe: Vec<&ItemId> = catalog.items().map(|(id, _)| id).collect();
    let noise = 2.0 / n_items as f64;
    let mut rows = Vec::with_capacity(spec.n_users * n_items);
    for user in &users {
        let mut scored: Vec<(f64, usize)> = (0..n_items)
            .map(|idx| {
                let popularity = (n_items - idx) as f64 / n_items as f64;
                (popularity + rng.random::<f64>() * noise, idx)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        for (rank0, (score, idx)) in scored.into_iter().enumerate() {
            rows.push((user.clone(), universe[idx].clone(), score, (rank0 + 1) as u32));
        }
    }
    let (reclists, _) = RecLists::from_rows(rows, n_items, ListOrdering::StrictScores)?;
    Ok((catalog, interactions, reclists))
}
