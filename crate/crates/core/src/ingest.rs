//! CSV parsing, temporal train/test splitting, and output serialization.
//!
//! File formats (UTF-8, comma-delimited, with header; `|` separates values
//! inside multi-valued cells):
//!
//! - ratings:  `user,item,rating,timestamp`
//! - items:    `item,genres,continents`
//! - reclists: `user,item,score,rank`
//!
//! Writers emit the same formats with deterministic row order, so every
//! artifact round-trips through its parser unchanged.

use std::collections::BTreeMap;
use std::io;

use crate::types::{
    Catalog, Continent, Genre, Interactions, ItemId, ItemMeta, ListOrdering, Rating, RatingDomain,
    RecLists, UserId,
};
use crate::{Error, Result};

/// Column names (and rating domain) used to read a ratings file, so datasets
/// with differently labelled headers can be ingested without rewriting them.
#[derive(Clone, Debug, PartialEq)]
pub struct RatingsSchema {
    pub user: String,
    pub item: String,
    pub rating: String,
    pub timestamp: String,
    pub domain: RatingDomain,
}

impl Default for RatingsSchema {
    fn default() -> Self {
        RatingsSchema {
            user: "user".into(),
            item: "item".into(),
            rating: "rating".into(),
            timestamp: "timestamp".into(),
            domain: RatingDomain::default(),
        }
    }
}

/// Non-fatal observations made while parsing a ratings file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestWarnings {
    /// `(user, item)` pairs that appeared more than once; only the rating
    /// with the latest timestamp was kept.
    pub duplicates_dropped: usize,
}

/// Per-user temporal split configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitConfig {
    /// Fraction of each user's history, earliest first, that goes to train.
    pub train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train_fraction: 0.8 }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "train fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Result of [`temporal_split`].
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Interactions,
    pub test: Interactions,
    /// Users with fewer than 2 ratings, whose entire history went to train.
    pub short_history_users: usize,
}

fn line_of(position: Option<&csv::Position>) -> u64 {
    position.map(|p| p.line()).unwrap_or(0)
}

fn csv_error(e: csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::parse(p.line(), e.to_string()),
        None => Error::Csv(e),
    }
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::invalid(format!("missing column '{name}' in header")))
}

fn field<'r>(record: &'r csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<&'r str> {
    record.get(idx).ok_or_else(|| Error::parse(line, format!("missing field '{name}'")))
}

/// Parses a ratings file. Duplicate `(user, item)` pairs keep the rating
/// with the latest timestamp (ties: the later row wins) and are counted in
/// the returned warnings. Out-of-domain or malformed values are hard errors
/// carrying the offending line number.
pub fn parse_ratings<R: io::Read>(
    source: R,
    schema: &RatingsSchema,
) -> Result<(Interactions, IngestWarnings)> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let user_idx = header_index(&headers, &schema.user)?;
    let item_idx = header_index(&headers, &schema.item)?;
    let rating_idx = header_index(&headers, &schema.rating)?;
    let ts_idx = header_index(&headers, &schema.timestamp)?;

    let mut latest: BTreeMap<(UserId, ItemId), Rating> = BTreeMap::new();
    let mut duplicates = 0usize;

    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(record.position());

        let user = UserId::from(field(&record, user_idx, &schema.user, line)?);
        let item = ItemId::from(field(&record, item_idx, &schema.item, line)?);
        let raw_value = field(&record, rating_idx, &schema.rating, line)?;
        let value: f64 = raw_value
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid rating '{raw_value}'")))?;
        if !schema.domain.contains(value) {
            return Err(Error::parse(
                line,
                format!(
                    "rating {raw_value} outside domain [{}, {}]",
                    schema.domain.min, schema.domain.max
                ),
            ));
        }
        let raw_ts = field(&record, ts_idx, &schema.timestamp, line)?;
        let timestamp: i64 = raw_ts
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid timestamp '{raw_ts}'")))?;

        let rating = Rating { user: user.clone(), item: item.clone(), value, timestamp };
        match latest.entry((user, item)) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(rating);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                duplicates += 1;
                if rating.timestamp >= e.get().timestamp {
                    e.insert(rating);
                }
            }
        }
    }

    let interactions = Interactions::new(latest.into_values().collect())?;
    if duplicates > 0 {
        log::warn!("ratings: dropped {duplicates} duplicate (user, item) rows (kept latest)");
    }
    Ok((interactions, IngestWarnings { duplicates_dropped: duplicates }))
}

/// Parses an item metadata file into a [`Catalog`]. Multi-valued cells are
/// pipe-separated and de-duplicated; an empty genre or continent cell is an
/// error because downstream statistics divide by the label-set sizes.
pub fn parse_item_meta<R: io::Read>(source: R) -> Result<Catalog> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let item_idx = header_index(&headers, "item")?;
    let genres_idx = header_index(&headers, "genres")?;
    let continents_idx = header_index(&headers, "continents")?;

    let mut items: BTreeMap<ItemId, ItemMeta> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(record.position());

        let item = ItemId::from(field(&record, item_idx, "item", line)?);
        let genres: std::collections::BTreeSet<Genre> = field(&record, genres_idx, "genres", line)?
            .split('|')
            .filter(|s| !s.is_empty())
            .map(Genre::from)
            .collect();
        if genres.is_empty() {
            return Err(Error::parse(line, format!("item '{item}': empty genre set")));
        }
        let continents: std::collections::BTreeSet<Continent> =
            field(&record, continents_idx, "continents", line)?
                .split('|')
                .filter(|s| !s.is_empty())
                .map(Continent::from)
                .collect();
        if continents.is_empty() {
            return Err(Error::parse(line, format!("item '{item}': empty continent set")));
        }

        let meta =
            ItemMeta::new(genres, continents).map_err(|e| Error::parse(line, e.to_string()))?;
        if items.insert(item.clone(), meta).is_some() {
            return Err(Error::parse(line, format!("duplicate item row '{item}'")));
        }
    }

    Ok(Catalog::new(items))
}

/// Flat `(user, item, score, rank)` rows plus the longest per-user list.
type RecListRows = (Vec<(UserId, ItemId, f64, u32)>, usize);

fn read_reclist_rows<R: io::Read>(source: R) -> Result<RecListRows> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let user_idx = header_index(&headers, "user")?;
    let item_idx = header_index(&headers, "item")?;
    let score_idx = header_index(&headers, "score")?;
    let rank_idx = header_index(&headers, "rank")?;

    let mut rows = Vec::new();
    let mut per_user: BTreeMap<UserId, usize> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(record.position());

        let user = UserId::from(field(&record, user_idx, "user", line)?);
        let item = ItemId::from(field(&record, item_idx, "item", line)?);
        let raw_score = field(&record, score_idx, "score", line)?;
        let score: f64 = raw_score
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid score '{raw_score}'")))?;
        if !score.is_finite() {
            return Err(Error::parse(line, format!("non-finite score '{raw_score}'")));
        }
        let raw_rank = field(&record, rank_idx, "rank", line)?;
        let rank: u32 = raw_rank
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid rank '{raw_rank}'")))?;
        if rank == 0 {
            return Err(Error::parse(line, "rank must be 1-based".to_string()));
        }

        *per_user.entry(user.clone()).or_default() += 1;
        rows.push((user, item, score, rank));
    }

    let max_len = per_user.values().copied().max().unwrap_or(0);
    Ok((rows, max_len))
}

/// Parses a ranked-list file, enforcing contiguous 1-based ranks and
/// non-increasing scores per user. The declared list bound is the longest
/// list observed.
pub fn parse_reclists<R: io::Read>(source: R) -> Result<RecLists> {
    let (rows, max_len) = read_reclist_rows(source)?;
    let (lists, _) = RecLists::from_rows(rows, max_len, ListOrdering::StrictScores)?;
    Ok(lists)
}

/// Like [`parse_reclists`] but tolerates score inversions, returning their
/// count. Re-ranked lists keep original model scores in a deliberately
/// different order, so their files fail the strict parser by design.
pub fn parse_reclists_lenient<R: io::Read>(source: R) -> Result<(RecLists, usize)> {
    let (rows, max_len) = read_reclist_rows(source)?;
    let (lists, inversions) =
        RecLists::from_rows(rows, max_len, ListOrdering::AllowScoreInversions)?;
    if inversions > 0 {
        log::info!("reclists: {inversions} score inversions (re-ranked input)");
    }
    Ok((lists, inversions))
}

/// Number of train ratings for a history of length `n`: ⌈fraction·n⌉, with a
/// tolerance guard so that products that are integral in exact arithmetic
/// (e.g. 0.8·35 = 28, which floats render as 28.000000000000004) do not get
/// ceiled one past the intended size.
fn train_size(n: usize, fraction: f64) -> usize {
    let raw = fraction * n as f64;
    let nearest = raw.round();
    let size = if (raw - nearest).abs() < 1e-9 { nearest } else { raw.ceil() };
    (size as usize).clamp(1, n)
}

/// Splits each user's history at ⌈train_fraction·|R_u|⌉: the earliest
/// ratings (by timestamp, ties by item id) go to train, the rest to test.
/// Users with fewer than 2 ratings keep their whole history in train and
/// are counted as warnings.
pub fn temporal_split(interactions: &Interactions, cfg: &SplitConfig) -> Result<Split> {
    cfg.validate()?;

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut short_history_users = 0usize;

    for (_, history) in interactions.by_user() {
        if history.len() < 2 {
            short_history_users += 1;
            train.extend_from_slice(history);
            continue;
        }
        let n_train = train_size(history.len(), cfg.train_fraction);
        train.extend_from_slice(&history[..n_train]);
        test.extend_from_slice(&history[n_train..]);
    }

    if short_history_users > 0 {
        log::warn!("split: {short_history_users} users with <2 ratings kept entirely in train");
    }

    Ok(Split {
        train: Interactions::new(train)?,
        test: Interactions::new(test)?,
        short_history_users,
    })
}

fn fmt_f64(v: f64) -> String {
    // `Display` for f64 prints the shortest string that round-trips, which
    // keeps outputs byte-stable and parse(write(x)) == x.
    format!("{v}")
}

/// Writes a ratings file, rows sorted by (user, timestamp, item).
pub fn write_ratings<W: io::Write>(sink: W, interactions: &Interactions) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["user", "item", "rating", "timestamp"])?;
    for r in interactions.iter() {
        writer.write_record([
            r.user.as_str(),
            r.item.as_str(),
            &fmt_f64(r.value),
            &r.timestamp.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes an item metadata file, rows sorted by item id.
pub fn write_item_meta<W: io::Write>(sink: W, catalog: &Catalog) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["item", "genres", "continents"])?;
    for (item, meta) in catalog.items() {
        let genres: Vec<&str> = meta.genres.iter().map(|g| g.as_str()).collect();
        let continents: Vec<&str> = meta.continents.iter().map(|c| c.as_str()).collect();
        writer.write_record([item.as_str(), &genres.join("|"), &continents.join("|")])?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes a ranked-list file, rows sorted by (user, rank).
pub fn write_reclists<W: io::Write>(sink: W, recs: &RecLists) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["user", "item", "score", "rank"])?;
    for (user, list) in recs.iter() {
        for rec in list {
            writer.write_record([
                user.as_str(),
                rec.item.as_str(),
                &fmt_f64(rec.score),
                &rec.rank.to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> (Interactions, IngestWarnings) {
        parse_ratings(s.as_bytes(), &RatingsSchema::default()).unwrap()
    }

    #[test]
    fn parses_well_formed_ratings() {
        let (ix, warnings) =
            parse("user,item,rating,timestamp\nu1,i1,4,100\nu1,i2,3.5,200\nu2,i1,5,50\n");
        assert_eq!(ix.len(), 3);
        assert_eq!(warnings.duplicates_dropped, 0);
    }

    #[test]
    fn rejects_out_of_domain_rating_with_line() {
        let err = parse_ratings(
            "user,item,rating,timestamp\nu1,i1,4,100\nu1,i2,9,200\n".as_bytes(),
            &RatingsSchema::default(),
        )
        .unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("outside domain"), "{msg}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn duplicate_pair_keeps_latest_timestamp() {
        let (ix, warnings) = parse("user,item,rating,timestamp\nu1,i1,2,5\nu1,i1,5,9\n");
        assert_eq!(ix.len(), 1);
        assert_eq!(warnings.duplicates_dropped, 1);
        let kept = ix.iter().next().unwrap();
        assert_eq!((kept.value, kept.timestamp), (5.0, 9));

        // Reversed row order keeps the same (latest) record.
        let (ix2, _) = parse("user,item,rating,timestamp\nu1,i1,5,9\nu1,i1,2,5\n");
        assert_eq!(ix.iter().next(), ix2.iter().next());
    }

    #[test]
    fn custom_schema_maps_columns() {
        let schema = RatingsSchema {
            user: "uid".into(),
            item: "movie".into(),
            rating: "stars".into(),
            timestamp: "ts".into(),
            domain: RatingDomain::default(),
        };
        let (ix, _) =
            parse_ratings("movie,stars,uid,ts\ni9,4,u7,123\n".as_bytes(), &schema).unwrap();
        assert_eq!(ix.iter().next().unwrap().user, UserId::from("u7"));
    }

    #[test]
    fn missing_column_is_an_error() {
        let err =
            parse_ratings("user,item,rating\nu1,i1,4\n".as_bytes(), &RatingsSchema::default())
                .unwrap_err();
        assert!(err.to_string().contains("missing column 'timestamp'"), "{err}");
    }

    #[test]
    fn item_meta_splits_and_dedups_labels() {
        let catalog = parse_item_meta(
            "item,genres,continents\ni1,Action|Comedy,NA\ni3,Drama,NA|EU|NA\n".as_bytes(),
        )
        .unwrap();
        let i1 = catalog.get(&ItemId::from("i1")).unwrap();
        assert_eq!(i1.genres.len(), 2);
        assert_eq!(i1.continents.len(), 1);
        let i3 = catalog.get(&ItemId::from("i3")).unwrap();
        assert_eq!(i3.continents.len(), 2, "NA|EU|NA dedups to two labels");
    }

    #[test]
    fn item_meta_empty_cell_is_an_error() {
        let err = parse_item_meta("item,genres,continents\ni2,,NA\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("empty genre set"), "{err}");
        let err = parse_item_meta("item,genres,continents\ni2,Drama,\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("empty continent set"), "{err}");
    }

    #[test]
    fn item_meta_duplicate_item_is_an_error() {
        let err = parse_item_meta("item,genres,continents\ni1,Drama,NA\ni1,Action,EU\n".as_bytes())
            .unwrap_err();
        assert!(err.to_string().contains("duplicate item row"), "{err}");
    }

    #[test]
    fn reclists_parse_long_list() {
        let mut src = String::from("user,item,score,rank\n");
        for rank in 1..=1000 {
            src.push_str(&format!("u1,i{rank},{},{rank}\n", 1000 - rank));
        }
        let recs = parse_reclists(src.as_bytes()).unwrap();
        assert_eq!(recs.get(&UserId::from("u1")).unwrap().len(), 1000);
        assert_eq!(recs.max_len(), 1000);
    }

    #[test]
    fn reclists_empty_file_is_zero_users() {
        let recs = parse_reclists("user,item,score,rank\n".as_bytes()).unwrap();
        assert_eq!(recs.n_users(), 0);
    }

    #[test]
    fn reclists_rank_gap_names_user_and_rank() {
        let err = parse_reclists(
            "user,item,score,rank\nu1,i1,0.9,1\nu1,i2,0.8,2\nu1,i3,0.7,4\n".as_bytes(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("u1"), "{err}");
        assert!(err.to_string().contains("gap at rank 3"), "{err}");
    }

    #[test]
    fn split_ten_ratings_at_point_eight() {
        let rows: String = (1..=10).map(|t| format!("u1,i{t},4,{t}\n")).collect();
        let (ix, _) = parse(&format!("user,item,rating,timestamp\n{rows}"));
        let split = temporal_split(&ix, &SplitConfig::default()).unwrap();
        assert_eq!(split.train.len(), 8);
        assert_eq!(split.test.len(), 2);
        let max_train_ts = split.train.iter().map(|r| r.timestamp).max().unwrap();
        let min_test_ts = split.test.iter().map(|r| r.timestamp).min().unwrap();
        assert!(max_train_ts <= min_test_ts);
        assert_eq!(split.test.iter().map(|r| r.timestamp).collect::<Vec<_>>(), vec![9, 10]);
    }

    #[test]
    fn split_single_rating_user_warns() {
        let (ix, _) = parse("user,item,rating,timestamp\nu1,i1,4,1\n");
        let split = temporal_split(&ix, &SplitConfig::default()).unwrap();
        assert_eq!(split.train.len(), 1);
        assert_eq!(split.test.len(), 0);
        assert_eq!(split.short_history_users, 1);
    }

    #[test]
    fn split_counts_over_five_users() {
        // Independent arithmetic: 5 users x 10 ratings at 0.8 -> ceil(8.0)=8
        // train each, so 40 train / 10 test in total.
        let mut src = String::from("user,item,rating,timestamp\n");
        for u in 1..=5 {
            for t in 1..=10 {
                src.push_str(&format!("u{u},i{t},3,{t}\n"));
            }
        }
        let (ix, _) = parse(&src);
        let split = temporal_split(&ix, &SplitConfig::default()).unwrap();
        let expected_train: usize = (0..5).map(|_| (0.8f64 * 10.0).ceil() as usize).sum();
        assert_eq!(split.train.len(), expected_train);
        assert_eq!(split.train.len(), 40);
        assert_eq!(split.test.len(), 10);
    }

    #[test]
    fn split_fraction_bounds_are_enforced() {
        let (ix, _) = parse("user,item,rating,timestamp\nu1,i1,4,1\n");
        for bad in [0.0, 1.0, 1.5, -0.2, f64::NAN] {
            assert!(
                temporal_split(&ix, &SplitConfig { train_fraction: bad }).is_err(),
                "fraction {bad} should be rejected"
            );
        }
    }

    #[test]
    fn train_size_resists_float_dust() {
        // 0.8 * 35 evaluates to 28.000000000000004 in f64; a naive ceil
        // would claim 29.
        assert_eq!(train_size(35, 0.8), 28);
        assert_eq!(train_size(10, 0.8), 8);
        assert_eq!(train_size(3, 0.5), 2); // ceil(1.5)
        assert_eq!(train_size(10, 0.999), 10);
        assert_eq!(train_size(10, 0.001), 1);
    }

    #[test]
    fn ratings_round_trip() {
        let (ix, _) = parse("user,item,rating,timestamp\nu1,i1,4.5,100\nu2,i9,1,3\nu1,i2,3,50\n");
        let mut buf = Vec::new();
        write_ratings(&mut buf, &ix).unwrap();
        let (again, warnings) = parse_ratings(buf.as_slice(), &RatingsSchema::default()).unwrap();
        assert_eq!(ix, again);
        assert_eq!(warnings.duplicates_dropped, 0);
    }

    #[test]
    fn item_meta_round_trip() {
        let catalog = parse_item_meta(
            "item,genres,continents\ni1,Action|Comedy,NA\ni2,Drama,EU|NA\n".as_bytes(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_item_meta(&mut buf, &catalog).unwrap();
        assert_eq!(catalog, parse_item_meta(buf.as_slice()).unwrap());
    }

    #[test]
    fn reclists_round_trip() {
        let recs = parse_reclists(
            "user,item,score,rank\nu1,i1,0.9,1\nu1,i2,0.8,2\nu2,i3,0.7,1\n".as_bytes(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_reclists(&mut buf, &recs).unwrap();
        assert_eq!(recs, parse_reclists(buf.as_slice()).unwrap());
    }

    #[test]
    fn lenient_parse_counts_inversions() {
        let src = "user,item,score,rank\nu1,i1,0.5,1\nu1,i2,0.9,2\n";
        assert!(parse_reclists(src.as_bytes()).is_err());
        let (recs, inversions) = parse_reclists_lenient(src.as_bytes()).unwrap();
        assert_eq!(inversions, 1);
        assert_eq!(recs.get(&UserId::from("u1")).unwrap().len(), 2);
    }

    proptest! {
        /// Train and test partition the input exactly, per user the split is
        /// chronological, and the train side is never empty for non-empty
        /// histories.
        #[test]
        fn split_partitions_and_is_monotone(
            histories in proptest::collection::btree_map(
                "u[0-9]{2}",
                proptest::collection::vec((0i64..1000, 1u8..50), 1..20),
                1..8,
            ),
            fraction in 0.05f64..0.95,
        ) {
            let mut ratings = Vec::new();
            for (user, rows) in &histories {
                // Distinct items per user via the index; timestamps may tie.
                for (idx, (ts, _)) in rows.iter().enumerate() {
                    ratings.push(Rating {
                        user: UserId::from(user.as_str()),
                        item: ItemId::from(format!("i{idx}")),
                        value: 3.0,
                        timestamp: *ts,
                    });
                }
            }
            let ix = Interactions::new(ratings).unwrap();
            let split = temporal_split(&ix, &SplitConfig { train_fraction: fraction }).unwrap();

            // Partition: multiset union reproduces the input.
            let mut merged: Vec<Rating> = split.train.iter().cloned().collect();
            merged.extend(split.test.iter().cloned());
            let merged = Interactions::new(merged).unwrap();
            prop_assert_eq!(&merged, &ix);

            // Monotone per user under the (timestamp, item) order.
            for (user, train_run) in split.train.by_user() {
                if let Some(test_run) = split.test.by_user().find(|(u, _)| u == &user).map(|(_, r)| r) {
                    let last_train = train_run.last().unwrap();
                    let first_test = test_run.first().unwrap();
                    prop_assert!(
                        (last_train.timestamp, &last_train.item)
                            <= (first_test.timestamp, &first_test.item)
                    );
                }
                prop_assert!(!train_run.is_empty());
            }
        }

        /// Reclist writer output always re-parses to the same value.
        #[test]
        fn reclists_write_parse_round_trip(
            n_users in 1usize..6,
            len in 1usize..12,
            seed_scores in proptest::collection::vec(0.0f64..100.0, 12),
        ) {
            let mut rows = Vec::new();
            for u in 0..n_users {
                let mut scores: Vec<f64> = seed_scores.iter().take(len).cloned().collect();
                scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
                for (i, score) in scores.iter().enumerate() {
                    rows.push((
                        UserId::from(format!("u{u}")),
                        ItemId::from(format!("i{i}")),
                        *score,
                        (i + 1) as u32,
                    ));
                }
            }
            let (recs, _) = RecLists::from_rows(rows, len, ListOrdering::StrictScores).unwrap();
            let mut buf = Vec::new();
            write_reclists(&mut buf, &recs).unwrap();
            let again = parse_reclists(buf.as_slice()).unwrap();
            prop_assert_eq!(recs, again);
        }
    }
}
