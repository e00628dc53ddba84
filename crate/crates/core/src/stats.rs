//! Training-set statistics that drive both the re-ranker and the metrics:
//! continent representation, per-user genre propensity, and the
//! genre×continent mass matrix.
//!
//! Multi-label items are attributed fractionally — a rating of an item with
//! `|C_i|` continents contributes `1/|C_i|` to each, and likewise `1/|G_i|`
//! per genre — so the continent shares sum to exactly 1 and every user's
//! genre shares sum to exactly 1 (up to float rounding). Raw membership
//! counting would double-count multi-label items and break both identities.
//!
//! Accumulation is plain sequential addition in sorted input order, so
//! results are bit-stable across runs.

use std::collections::BTreeMap;
use std::io;

use crate::types::{Catalog, Continent, Genre, Interactions, ItemMeta, UserId};
use crate::{Error, Result};

/// Share of training ratings attributable to each continent. Continents
/// with no attributed ratings are absent; [`GroupStats::get`] returns 0 for
/// them.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct GroupStats {
    representation: BTreeMap<Continent, f64>,
}

impl GroupStats {
    /// Builds stats from explicit shares; they must be in [0,1] and sum to 1
    /// within 1e-9. Useful for constructing target distributions.
    pub fn from_shares(representation: BTreeMap<Continent, f64>) -> Result<Self> {
        let mut sum = 0.0;
        for (continent, share) in &representation {
            if !(*share >= 0.0 && *share <= 1.0) {
                return Err(Error::invalid(format!(
                    "share for '{continent}' must lie in [0,1], got {share}"
                )));
            }
            sum += share;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("shares must sum to 1, got {sum}")));
        }
        Ok(GroupStats { representation })
    }

    pub fn get(&self, continent: &Continent) -> f64 {
        self.representation.get(continent).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Continent, f64)> {
        self.representation.iter().map(|(c, v)| (c, *v))
    }

    pub fn len(&self) -> usize {
        self.representation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representation.is_empty()
    }
}

/// Per-user genre shares of the training history. Users absent from the
/// training set have no row; absent (user, genre) pairs read as 0.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PropensityTable {
    rows: BTreeMap<UserId, BTreeMap<Genre, f64>>,
}

impl PropensityTable {
    pub fn get(&self, user: &UserId, genre: &Genre) -> f64 {
        self.rows.get(user).and_then(|row| row.get(genre)).copied().unwrap_or(0.0)
    }

    pub fn row(&self, user: &UserId) -> Option<&BTreeMap<Genre, f64>> {
        self.rows.get(user)
    }

    pub fn contains_user(&self, user: &UserId) -> bool {
        self.rows.contains_key(user)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserId> {
        self.rows.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&UserId, &BTreeMap<Genre, f64>)> {
        self.rows.iter()
    }

    pub fn n_users(&self) -> usize {
        self.rows.len()
    }
}

/// Aggregated genre×continent propensity mass: how much of the population's
/// genre interest is served by items from each continent.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct GenreContinentMatrix {
    cells: BTreeMap<Genre, BTreeMap<Continent, f64>>,
}

impl GenreContinentMatrix {
    pub fn cell(&self, genre: &Genre, continent: &Continent) -> f64 {
        self.cells.get(genre).and_then(|row| row.get(continent)).copied().unwrap_or(0.0)
    }

    pub fn row_sum(&self, genre: &Genre) -> f64 {
        self.cells.get(genre).map(|row| row.values().sum()).unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Genre, &BTreeMap<Continent, f64>)> {
        self.cells.iter()
    }
}

fn meta_of<'c>(catalog: &'c Catalog, item: &crate::types::ItemId) -> Result<&'c ItemMeta> {
    catalog.get(item).ok_or_else(|| Error::UnknownItem { item: item.clone() })
}

/// Continent representation: each rating contributes `1/|C_i|` to every
/// continent of its item; totals are divided by the number of ratings.
pub fn representation(train: &Interactions, catalog: &Catalog) -> Result<GroupStats> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut mass: BTreeMap<Continent, f64> = BTreeMap::new();
    for rating in train.iter() {
        let meta = meta_of(catalog, &rating.item)?;
        let w = 1.0 / meta.continents.len() as f64;
        for continent in &meta.continents {
            *mass.entry(continent.clone()).or_insert(0.0) += w;
        }
    }
    let n = train.len() as f64;
    let representation = mass.into_iter().map(|(c, m)| (c, m / n)).collect();
    Ok(GroupStats { representation })
}

/// Per-user genre propensity: within each user's history, a rating
/// contributes `1/|G_i|` to every genre of its item; totals are divided by
/// the history length. Users with no training ratings simply have no row.
pub fn propensity(train: &Interactions, catalog: &Catalog) -> Result<PropensityTable> {
    let mut rows: BTreeMap<UserId, BTreeMap<Genre, f64>> = BTreeMap::new();
    for (user, history) in train.by_user() {
        let mut mass: BTreeMap<Genre, f64> = BTreeMap::new();
        for rating in history {
            let meta = meta_of(catalog, &rating.item)?;
            let w = 1.0 / meta.genres.len() as f64;
            for genre in &meta.genres {
                *mass.entry(genre.clone()).or_insert(0.0) += w;
            }
        }
        let n = history.len() as f64;
        let row = mass.into_iter().map(|(g, m)| (g, m / n)).collect();
        rows.insert(user.clone(), row);
    }
    Ok(PropensityTable { rows })
}

/// Population-level genre×continent mass: summed over users, each rating
/// spreads its user's `1/|R_u|` share across all `(genre, continent)` pairs
/// of its item with weight `1/(|G_i|·|C_i|)`. Row sums therefore equal the
/// per-genre propensity aggregated over users.
pub fn genre_continent_matrix(
    prop: &PropensityTable,
    train: &Interactions,
    catalog: &Catalog,
) -> Result<GenreContinentMatrix> {
    let mut cells: BTreeMap<Genre, BTreeMap<Continent, f64>> = BTreeMap::new();
    for (_, history) in train.by_user() {
        let per_rating = 1.0 / history.len() as f64;
        for rating in history {
            let meta = meta_of(catalog, &rating.item)?;
            let w = per_rating / (meta.genres.len() * meta.continents.len()) as f64;
            for genre in &meta.genres {
                let row = cells.entry(genre.clone()).or_default();
                for continent in &meta.continents {
                    *row.entry(continent.clone()).or_insert(0.0) += w;
                }
            }
        }
    }
    let matrix = GenreContinentMatrix { cells };

    // Marginalization sanity: each genre row must sum to the aggregate
    // propensity of that genre (cheap cross-check of the two computations).
    if cfg!(debug_assertions) {
        for (genre, _) in matrix.iter() {
            let aggregate: f64 =
                prop.iter().map(|(_, row)| row.get(genre).copied().unwrap_or(0.0)).sum();
            debug_assert!(
                (matrix.row_sum(genre) - aggregate).abs() < 1e-9,
                "matrix row for '{genre}' diverges from aggregated propensity"
            );
        }
    }

    Ok(matrix)
}

/// Writes `continent,representation` rows sorted by continent.
pub fn write_group_stats<W: io::Write>(sink: W, stats: &GroupStats) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["continent", "representation"])?;
    for (continent, share) in stats.iter() {
        writer.write_record([continent.as_str(), &format!("{share}")])?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes `user,genre,propensity` rows sorted by (user, genre).
pub fn write_propensity<W: io::Write>(sink: W, prop: &PropensityTable) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["user", "genre", "propensity"])?;
    for (user, row) in prop.iter() {
        for (genre, value) in row {
            writer.write_record([user.as_str(), genre.as_str(), &format!("{value}")])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Writes `genre,continent,mass` rows sorted by (genre, continent).
pub fn write_matrix<W: io::Write>(sink: W, matrix: &GenreContinentMatrix) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["genre", "continent", "mass"])?;
    for (genre, row) in matrix.iter() {
        for (continent, mass) in row {
            writer.write_record([genre.as_str(), continent.as_str(), &format!("{mass}")])?;
        }
    }
    writer.flush()?;
    Ok(())
}
