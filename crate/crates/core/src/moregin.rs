//! The multi-objective re-ranking core.
//!
//! Candidate lists are exploded into one record per (candidate, genre,
//! continent) combination, annotated with the continent's training
//! representation and the user's genre propensity, and sorted so that
//! under-represented continents and under-served genres come first. Three
//! selection passes then fill the top-k lists:
//!
//! 1. **Hard pass** — a record is taken only while (1) its continent is
//!    under its global quota, (2) the user's count for the record's genre
//!    stays within `propensity·k`, and (3) the user still has open slots.
//! 2. **Continent-bound pass** — drops the genre condition.
//! 3. **Relevance fill** — per user in descending score order, drops every
//!    condition except the user's `topk` budget, guaranteeing full lists
//!    whenever enough distinct candidates exist.
//!
//! Each pass tests quotas before counting a selection, so no counter ever
//! exceeds the bound its phase enforces. An item appearing under several
//! (genre, continent) aliases is selected at most once per user; the alias
//! actually chosen is the one that charges the quotas.
//!
//! Everything here is deterministic: identifier tables are sorted so the
//! interned `u32` indices compare exactly like the labels, and every sort
//! key ends in a full tie-break chain.

use std::collections::{BTreeMap, HashSet};
use std::io;

use crate::stats::{GroupStats, PropensityTable};
use crate::types::{
    Catalog, Continent, Genre, ItemId, ListOrdering, RecLists, RerankParams, UserId,
};
use crate::{Error, Result};

/// Sorted, interned identifier tables. Index order equals lexicographic
/// label order, so the selection loops can compare raw `u32`s.
#[derive(Clone, Debug, PartialEq)]
pub struct Symbols {
    users: Vec<UserId>,
    items: Vec<ItemId>,
    genres: Vec<Genre>,
    continents: Vec<Continent>,
    user_index: BTreeMap<UserId, u32>,
    item_index: BTreeMap<ItemId, u32>,
    genre_index: BTreeMap<Genre, u32>,
    continent_index: BTreeMap<Continent, u32>,
}

fn index_of<T: Ord + Clone>(values: &[T]) -> BTreeMap<T, u32> {
    values.iter().enumerate().map(|(i, v)| (v.clone(), i as u32)).collect()
}

impl Symbols {
    /// Interns the users of the candidate lists and the catalog's item,
    /// genre, and continent universes.
    pub fn build(recs: &RecLists, catalog: &Catalog) -> Symbols {
        let users: Vec<UserId> = recs.users().cloned().collect();
        let items: Vec<ItemId> = catalog.items().map(|(i, _)| i.clone()).collect();
        let genres: Vec<Genre> = catalog.genres().to_vec();
        let continents: Vec<Continent> = catalog.continents().to_vec();
        Symbols {
            user_index: index_of(&users),
            item_index: index_of(&items),
            genre_index: index_of(&genres),
            continent_index: index_of(&continents),
            users,
            items,
            genres,
            continents,
        }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_genres(&self) -> usize {
        self.genres.len()
    }

    pub fn n_continents(&self) -> usize {
        self.continents.len()
    }

    pub fn user(&self, idx: u32) -> &UserId {
        &self.users[idx as usize]
    }

    pub fn item(&self, idx: u32) -> &ItemId {
        &self.items[idx as usize]
    }

    pub fn genre(&self, idx: u32) -> &Genre {
        &self.genres[idx as usize]
    }

    pub fn continent(&self, idx: u32) -> &Continent {
        &self.continents[idx as usize]
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn continents(&self) -> &[Continent] {
        &self.continents
    }
}

/// Which pass selected a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Unselected,
    /// Pass 1: continent quota + genre target + user budget.
    Hard,
    /// Pass 2: continent quota + user budget.
    ContinentBound,
    /// Pass 3: user budget only, by descending relevance.
    RelevanceFill,
}

impl Phase {
    /// Numeric code used in audit output: 0 = unselected, 1..3 = pass.
    pub fn code(self) -> u8 {
        match self {
            Phase::Unselected => 0,
            Phase::Hard => 1,
            Phase::ContinentBound => 2,
            Phase::RelevanceFill => 3,
        }
    }
}

/// One (candidate, genre, continent) combination awaiting selection.
/// `user/item/genre/continent` are [`Symbols`] indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BucketRecord {
    pub user: u32,
    pub item: u32,
    pub genre: u32,
    pub continent: u32,
    /// Predicted relevance from the input list.
    pub score: f64,
    /// Training representation of `continent`.
    pub rep: f64,
    /// The user's training propensity for `genre` (0 for cold-start users).
    pub prop: f64,
    /// 1-based rank in the user's input list; drives final output order and
    /// the relevance-fill pass.
    pub input_rank: u32,
    pub phase: Phase,
}

/// All bucket records in selection order, plus their symbol tables.
#[derive(Clone, Debug, PartialEq)]
pub struct JoinBucket {
    pub symbols: Symbols,
    pub records: Vec<BucketRecord>,
    /// Users whose candidates carry propensity 0 because they have no
    /// training history.
    pub cold_start_users: usize,
}

/// Explodes candidate lists into annotated records and sorts them by
/// (representation asc, propensity asc, score desc), with (user, item,
/// genre, continent) as the deterministic tail of the key. Users absent
/// from the propensity table pass through with propensity 0 and a warning.
pub fn build_buckets(
    recs_topn: &RecLists,
    catalog: &Catalog,
    stats: &GroupStats,
    prop: &PropensityTable,
) -> Result<JoinBucket> {
    let symbols = Symbols::build(recs_topn, catalog);
    let mut records = Vec::new();
    let mut cold_start_users = 0usize;

    for (user, list) in recs_topn.iter() {
        let user_idx = symbols.user_index[user];
        let row = prop.row(user);
        if row.is_none() {
            cold_start_users += 1;
        }
        for rec in list {
            let meta = catalog
                .get(&rec.item)
                .ok_or_else(|| Error::UnknownItem { item: rec.item.clone() })?;
            let item_idx = symbols.item_index[&rec.item];
            for genre in &meta.genres {
                let genre_idx = symbols.genre_index[genre];
                let prop_value = row.and_then(|r| r.get(genre)).copied().unwrap_or(0.0);
                for continent in &meta.continents {
                    records.push(BucketRecord {
                        user: user_idx,
                        item: item_idx,
                        genre: genre_idx,
                        continent: symbols.continent_index[continent],
                        score: rec.score,
                        rep: stats.get(continent),
                        prop: prop_value,
                        input_rank: rec.rank,
                        phase: Phase::Unselected,
                    });
                }
            }
        }
    }

    records.sort_by(|a, b| {
        a.rep
            .total_cmp(&b.rep)
            .then_with(|| a.prop.total_cmp(&b.prop))
            .then_with(|| b.score.total_cmp(&a.score))
            .then_with(|| a.user.cmp(&b.user))
            .then_with(|| a.item.cmp(&b.item))
            .then_with(|| a.genre.cmp(&b.genre))
            .then_with(|| a.continent.cmp(&b.continent))
    });

    if cold_start_users > 0 {
        log::warn!(
            "buckets: {cold_start_users} users have no training history; their candidates \
             carry propensity 0 and defer to the later passes"
        );
    }

    Ok(JoinBucket { symbols, records, cold_start_users })
}

/// Integer quotas proportional to `shares` summing exactly to
/// `total_slots`: floor every target, then hand leftover slots to the
/// largest fractional remainders (ties: lower index first, cycling if
/// needed).
pub(crate) fn largest_remainder_quotas(shares: &[f64], total_slots: u64) -> Vec<u64> {
    let mut quotas: Vec<u64> = Vec::with_capacity(shares.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(shares.len());
    let mut assigned = 0u64;
    for (idx, share) in shares.iter().enumerate() {
        let target = share * total_slots as f64;
        let base = target.floor().max(0.0) as u64;
        quotas.push(base);
        remainders.push((idx, target - base as f64));
        assigned += base;
    }
    let mut deficit = total_slots.saturating_sub(assigned);
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    while deficit > 0 {
        for (idx, _) in &remainders {
            if deficit == 0 {
                break;
            }
            quotas[*idx] += 1;
            deficit -= 1;
        }
        if remainders.is_empty() {
            break;
        }
    }
    quotas
}

/// Mutable selection state: per-entity counters, their quotas, and the
/// (user, item) pairs already granted (the cross-alias dedup set).
#[derive(Clone, Debug)]
pub struct QuotaState {
    topk: u32,
    n_genres: usize,
    /// Selections per user (bounded by `topk`).
    pub user_counts: Vec<u32>,
    /// Selections per (user, genre), dense at `user·|G| + genre`.
    pub user_genre_counts: Vec<u32>,
    /// Selections per continent.
    pub continent_counts: Vec<u32>,
    /// Global continent quotas summing to `|users|·topk`.
    pub expected_continent: Vec<u64>,
    /// Per-(user, genre) target `propensity·topk`, kept as a real: the
    /// hard pass admits the m-th selection of a genre iff m ≤ target.
    pub expected_user_genre: Vec<f64>,
    taken: HashSet<(u32, u32)>,
}

impl QuotaState {
    fn ug(&self, user: u32, genre: u32) -> usize {
        user as usize * self.n_genres + genre as usize
    }

    pub fn topk(&self) -> u32 {
        self.topk
    }

    pub fn user_genre_count(&self, user: u32, genre: u32) -> u32 {
        self.user_genre_counts[self.ug(user, genre)]
    }

    pub fn user_genre_quota(&self, user: u32, genre: u32) -> f64 {
        self.expected_user_genre[self.ug(user, genre)]
    }

    pub fn is_taken(&self, user: u32, item: u32) -> bool {
        self.taken.contains(&(user, item))
    }
}

/// Zeroed counters plus quotas: continent quotas apportion `|users|·topk`
/// slots proportionally to representation (largest-remainder rounding);
/// genre targets stay real-valued at `propensity·topk`.
pub fn compute_quotas(
    stats: &GroupStats,
    prop: &PropensityTable,
    symbols: &Symbols,
    params: &RerankParams,
) -> QuotaState {
    let n_users = symbols.n_users();
    let n_genres = symbols.n_genres();
    let n_continents = symbols.n_continents();

    let shares: Vec<f64> = symbols.continents.iter().map(|c| stats.get(c)).collect();
    let total_slots = (n_users * params.topk) as u64;
    let expected_continent = largest_remainder_quotas(&shares, total_slots);

    let mut expected_user_genre = vec![0.0f64; n_users * n_genres];
    for (user_idx, user) in symbols.users.iter().enumerate() {
        if let Some(row) = prop.row(user) {
            for (genre, value) in row {
                let genre_idx = symbols.genre_index[genre] as usize;
                expected_user_genre[user_idx * n_genres + genre_idx] = value * params.topk as f64;
            }
        }
    }

    QuotaState {
        topk: params.topk as u32,
        n_genres,
        user_counts: vec![0; n_users],
        user_genre_counts: vec![0; n_users * n_genres],
        continent_counts: vec![0; n_continents],
        expected_continent,
        expected_user_genre,
        taken: HashSet::new(),
    }
}

/// Pass 1: walk the bucket in order and select every record satisfying all
/// three conditions — continent under quota, resulting genre count within
/// `propensity·k`, and user under `topk` — skipping items the user already
/// holds. Quotas are tested before counters move, so none is ever exceeded.
pub fn select_hard(bucket: &mut JoinBucket, quotas: &mut QuotaState) {
    for rec in &mut bucket.records {
        if rec.phase != Phase::Unselected || quotas.taken.contains(&(rec.user, rec.item)) {
            continue;
        }
        let c = rec.continent as usize;
        let u = rec.user as usize;
        let ug = quotas.ug(rec.user, rec.genre);
        let continent_ok = (quotas.continent_counts[c] as u64) < quotas.expected_continent[c];
        let genre_ok = (quotas.user_genre_counts[ug] + 1) as f64 <= quotas.expected_user_genre[ug];
        let budget_ok = quotas.user_counts[u] < quotas.topk;
        if continent_ok && genre_ok && budget_ok {
            rec.phase = Phase::Hard;
            quotas.user_counts[u] += 1;
            quotas.user_genre_counts[ug] += 1;
            quotas.continent_counts[c] += 1;
            quotas.taken.insert((rec.user, rec.item));
        }
    }
}

/// The two relaxation passes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SoftPhase {
    /// Pass 2: keep the continent quota and user budget, drop the genre
    /// target.
    ContinentBound,
    /// Pass 3: per user in descending score order, keep only the user
    /// budget.
    RelevanceFill,
}

/// Passes 2 and 3. Pass 2 re-walks the bucket order; pass 3 walks each
/// user's remaining records by descending score (= ascending input rank,
/// aliases in label order) so the most relevant leftovers fill the gaps.
pub fn select_soft(bucket: &mut JoinBucket, quotas: &mut QuotaState, phase: SoftPhase) {
    match phase {
        SoftPhase::ContinentBound => {
            for rec in &mut bucket.records {
                if rec.phase != Phase::Unselected || quotas.taken.contains(&(rec.user, rec.item)) {
                    continue;
                }
                let c = rec.continent as usize;
                let u = rec.user as usize;
                let continent_ok =
                    (quotas.continent_counts[c] as u64) < quotas.expected_continent[c];
                let budget_ok = quotas.user_counts[u] < quotas.topk;
                if continent_ok && budget_ok {
                    rec.phase = Phase::ContinentBound;
                    quotas.user_counts[u] += 1;
                    quotas.continent_counts[c] += 1;
                    quotas.taken.insert((rec.user, rec.item));
                }
            }
        }
        SoftPhase::RelevanceFill => {
            let mut per_user: Vec<Vec<usize>> = vec![Vec::new(); bucket.symbols.n_users()];
            for (idx, rec) in bucket.records.iter().enumerate() {
                if rec.phase == Phase::Unselected {
                    per_user[rec.user as usize].push(idx);
                }
            }
            for indices in &mut per_user {
                indices.sort_by_key(|&i| {
                    let r = &bucket.records[i];
                    (r.input_rank, r.genre, r.continent)
                });
            }
            for indices in per_user {
                for idx in indices {
                    let rec = &mut bucket.records[idx];
                    if quotas.taken.contains(&(rec.user, rec.item)) {
                        continue;
                    }
                    let u = rec.user as usize;
                    if quotas.user_counts[u] < quotas.topk {
                        rec.phase = Phase::RelevanceFill;
                        quotas.user_counts[u] += 1;
                        quotas.continent_counts[rec.continent as usize] += 1;
                        quotas.taken.insert((rec.user, rec.item));
                    }
                }
            }
        }
    }
}

/// One selected slot in the final output, with the (genre, continent) alias
/// that won the selection and the pass that granted it.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditRecord {
    pub user: UserId,
    pub item: ItemId,
    pub rank: u32,
    pub score: f64,
    pub genre: Genre,
    pub continent: Continent,
    pub phase: u8,
}

/// Full re-rank result: the top-k lists plus the per-slot audit trail.
#[derive(Clone, Debug, PartialEq)]
pub struct RerankOutcome {
    pub lists: RecLists,
    /// One row per selected slot, ordered by (user, rank).
    pub audit: Vec<AuditRecord>,
    pub cold_start_users: usize,
    /// Users whose pool held fewer than topk distinct candidates.
    pub underfull_users: usize,
}

/// Runs the full pipeline — bucket construction, quota computation, three
/// selection passes, and final per-user assembly (selected items in
/// descending-score order, i.e. their original relative order).
pub fn rerank_with_audit(
    recs_topn: &RecLists,
    catalog: &Catalog,
    stats: &GroupStats,
    prop: &PropensityTable,
    params: &RerankParams,
) -> Result<RerankOutcome> {
    params.validate()?;
    let pool = recs_topn.truncated(params.topn);

    let mut bucket = build_buckets(&pool, catalog, stats, prop)?;
    let mut quotas = compute_quotas(stats, prop, &bucket.symbols, params);
    select_hard(&mut bucket, &mut quotas);
    select_soft(&mut bucket, &mut quotas, SoftPhase::ContinentBound);
    select_soft(&mut bucket, &mut quotas, SoftPhase::RelevanceFill);

    // Assemble per user: selected records sorted by input rank, which within
    // a list equals descending score with first-come tie-breaking.
    let mut selected: BTreeMap<&UserId, Vec<&BucketRecord>> = BTreeMap::new();
    for rec in &bucket.records {
        if rec.phase != Phase::Unselected {
            selected.entry(bucket.symbols.user(rec.user)).or_default().push(rec);
        }
    }

    let mut rows = Vec::new();
    let mut audit = Vec::new();
    let mut underfull_users = 0usize;
    for (user, mut recs) in selected {
        recs.sort_by_key(|r| r.input_rank);
        if recs.len() < params.topk {
            underfull_users += 1;
        }
        for (i, rec) in recs.iter().enumerate() {
            let rank = (i + 1) as u32;
            rows.push((user.clone(), bucket.symbols.item(rec.item).clone(), rec.score, rank));
            audit.push(AuditRecord {
                user: user.clone(),
                item: bucket.symbols.item(rec.item).clone(),
                rank,
                score: rec.score,
                genre: bucket.symbols.genre(rec.genre).clone(),
                continent: bucket.symbols.continent(rec.continent).clone(),
                phase: rec.phase.code(),
            });
        }
    }
    if underfull_users > 0 {
        log::warn!(
            "rerank: {underfull_users} users had fewer than topk distinct candidates; \
             their lists are shorter"
        );
    }

    let (lists, _) = RecLists::from_rows(rows, params.topk, ListOrdering::StrictScores)?;
    Ok(RerankOutcome { lists, audit, cold_start_users: bucket.cold_start_users, underfull_users })
}

/// [`rerank_with_audit`] without the audit trail.
pub fn rerank(
    recs_topn: &RecLists,
    catalog: &Catalog,
    stats: &GroupStats,
    prop: &PropensityTable,
    params: &RerankParams,
) -> Result<RecLists> {
    Ok(rerank_with_audit(recs_topn, catalog, stats, prop, params)?.lists)
}

/// Writes the audit trail as `user,item,rank,score,genre,continent,phase`.
pub fn write_audit<W: io::Write>(sink: W, audit: &[AuditRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["user", "item", "rank", "score", "genre", "continent", "phase"])?;
    for row in audit {
        writer.write_record([
            row.user.as_str(),
            row.item.as_str(),
            &row.rank.to_string(),
            &format!("{}", row.score),
            row.genre.as_str(),
            row.continent.as_str(),
            &row.phase.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
