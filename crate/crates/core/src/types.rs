//! Core domain types shared by every pipeline stage.
//!
//! All collections are ordered (`BTreeMap`/`BTreeSet`) so that iteration
//! order — and therefore every downstream computation and serialized output —
//! is deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

id_type!(
    /// Opaque user identifier.
    UserId
);
id_type!(
    /// Opaque item identifier.
    ItemId
);
id_type!(
    /// Genre label, e.g. `"Drama"`.
    Genre
);
id_type!(
    /// Continent label identifying an item's provider group, e.g. `"EU"`.
    Continent
);

/// Inclusive range of admissible rating values. Values outside the range are
/// hard ingest errors, not warnings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingDomain {
    pub min: f64,
    pub max: f64,
}

impl Default for RatingDomain {
    fn default() -> Self {
        RatingDomain { min: 1.0, max: 5.0 }
    }
}

impl RatingDomain {
    pub fn contains(&self, value: f64) -> bool {
        value.is_finite() && value >= self.min && value <= self.max
    }
}

/// A single explicit feedback record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub user: UserId,
    pub item: ItemId,
    pub value: f64,
    pub timestamp: i64,
}

/// A rating history with unique `(user, item)` pairs, stored sorted by
/// `(user, timestamp, item)` so per-user chronological runs are contiguous.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Interactions {
    ratings: Vec<Rating>,
}

impl Interactions {
    /// Sorts the ratings and rejects duplicate `(user, item)` pairs.
    /// De-duplication policy (e.g. keep-latest) is the parser's job; by the
    /// time an `Interactions` exists the pairs must be unique.
    pub fn new(mut ratings: Vec<Rating>) -> Result<Self> {
        ratings
            .sort_by(|a, b| (&a.user, a.timestamp, &a.item).cmp(&(&b.user, b.timestamp, &b.item)));
        let mut seen: BTreeSet<(&UserId, &ItemId)> = BTreeSet::new();
        for r in &ratings {
            if !seen.insert((&r.user, &r.item)) {
                return Err(Error::invalid(format!(
                    "duplicate rating for user '{}', item '{}'",
                    r.user, r.item
                )));
            }
        }
        drop(seen);
        Ok(Interactions { ratings })
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Rating> {
        self.ratings.iter()
    }

    pub fn users(&self) -> BTreeSet<&UserId> {
        self.ratings.iter().map(|r| &r.user).collect()
    }

    pub fn items(&self) -> BTreeSet<&ItemId> {
        self.ratings.iter().map(|r| &r.item).collect()
    }

    /// Iterates `(user, chronological ratings)` groups in user order.
    pub fn by_user(&self) -> ByUser<'_> {
        ByUser { ratings: &self.ratings }
    }
}

/// Iterator over contiguous per-user runs of a sorted rating history.
pub struct ByUser<'a> {
    ratings: &'a [Rating],
}

impl<'a> Iterator for ByUser<'a> {
    type Item = (&'a UserId, &'a [Rating]);

    fn next(&mut self) -> Option<Self::Item> {
        let first = self.ratings.first()?;
        let end =
            self.ratings.iter().position(|r| r.user != first.user).unwrap_or(self.ratings.len());
        let (head, tail) = self.ratings.split_at(end);
        self.ratings = tail;
        Some((&first.user, head))
    }
}

/// Genre and continent labels of a catalog item. Both sets are non-empty and
/// de-duplicated by construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemMeta {
    pub genres: BTreeSet<Genre>,
    pub continents: BTreeSet<Continent>,
}

impl ItemMeta {
    pub fn new(genres: BTreeSet<Genre>, continents: BTreeSet<Continent>) -> Result<Self> {
        if genres.is_empty() {
            return Err(Error::invalid("item has no genres"));
        }
        if continents.is_empty() {
            return Err(Error::invalid("item has no continents"));
        }
        Ok(ItemMeta { genres, continents })
    }
}

/// The item catalog plus the derived, sorted genre and continent universes.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Catalog {
    items: BTreeMap<ItemId, ItemMeta>,
    genres: Vec<Genre>,
    continents: Vec<Continent>,
}

impl Catalog {
    pub fn new(items: BTreeMap<ItemId, ItemMeta>) -> Self {
        let genres: BTreeSet<Genre> =
            items.values().flat_map(|m| m.genres.iter().cloned()).collect();
        let continents: BTreeSet<Continent> =
            items.values().flat_map(|m| m.continents.iter().cloned()).collect();
        Catalog {
            items,
            genres: genres.into_iter().collect(),
            continents: continents.into_iter().collect(),
        }
    }

    pub fn get(&self, item: &ItemId) -> Option<&ItemMeta> {
        self.items.get(item)
    }

    pub fn contains(&self, item: &ItemId) -> bool {
        self.items.contains_key(item)
    }

    pub fn items(&self) -> impl Iterator<Item = (&ItemId, &ItemMeta)> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// All genres appearing on any item, sorted.
    pub fn genres(&self) -> &[Genre] {
        &self.genres
    }

    /// All continents appearing on any item, sorted.
    pub fn continents(&self) -> &[Continent] {
        &self.continents
    }
}

/// One candidate recommendation: an item with its model score and its
/// 1-based rank in the owning user's list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredRec {
    pub item: ItemId,
    pub score: f64,
    pub rank: u32,
}

/// How strictly list construction treats score/rank disagreement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ListOrdering {
    /// Scores must be non-increasing in rank order; an inversion is an error.
    StrictScores,
    /// Score inversions are tolerated and counted (re-ranked lists keep
    /// original model scores, so a deliberate re-ordering is not an error).
    AllowScoreInversions,
}

/// Per-user ranked candidate lists plus the declared maximum list length.
///
/// Invariants enforced at construction: ranks within each user run `1..=m`
/// with no gaps, no user recommends the same item twice, and no list exceeds
/// the declared length.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RecLists {
    lists: BTreeMap<UserId, Vec<ScoredRec>>,
    max_len: usize,
}

impl RecLists {
    /// Builds lists from flat rows, validating per-user rank contiguity and
    /// (optionally) score monotonicity. Returns the lists and the number of
    /// score inversions observed (always 0 under [`ListOrdering::StrictScores`]).
    pub fn from_rows(
        rows: Vec<(UserId, ItemId, f64, u32)>,
        max_len: usize,
        ordering: ListOrdering,
    ) -> Result<(Self, usize)> {
        let mut lists: BTreeMap<UserId, Vec<ScoredRec>> = BTreeMap::new();
        for (user, item, score, rank) in rows {
            if !score.is_finite() {
                return Err(Error::invalid(format!(
                    "user '{user}': non-finite score for item '{item}'"
                )));
            }
            lists.entry(user).or_default().push(ScoredRec { item, score, rank });
        }

        let mut inversions = 0usize;
        for (user, list) in &mut lists {
            list.sort_by_key(|r| r.rank);
            let mut seen = BTreeSet::new();
            for (i, rec) in list.iter().enumerate() {
                let expected = (i + 1) as u32;
                if rec.rank != expected {
                    let what = if rec.rank > expected { "gap at" } else { "duplicate" };
                    return Err(Error::invalid(format!("user '{user}': {what} rank {expected}")));
                }
                if !seen.insert(&rec.item) {
                    return Err(Error::invalid(format!(
                        "user '{user}': item '{}' appears twice",
                        rec.item
                    )));
                }
                if i > 0 && rec.score > list[i - 1].score {
                    match ordering {
                        ListOrdering::StrictScores => {
                            return Err(Error::invalid(format!(
                                "user '{user}': score increases at rank {} ({} > {})",
                                rec.rank,
                                rec.score,
                                list[i - 1].score
                            )));
                        }
                        ListOrdering::AllowScoreInversions => inversions += 1,
                    }
                }
            }
            if list.len() > max_len {
                return Err(Error::invalid(format!(
                    "user '{user}': list length {} exceeds declared bound {max_len}",
                    list.len()
                )));
            }
        }

        Ok((RecLists { lists, max_len }, inversions))
    }

    /// Declared maximum list length (n for candidate pools, k for outputs).
    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn n_users(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn get(&self, user: &UserId) -> Option<&[ScoredRec]> {
        self.lists.get(user).map(|v| v.as_slice())
    }

    pub fn users(&self) -> impl Iterator<Item = &UserId> {
        self.lists.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&UserId, &[ScoredRec])> {
        self.lists.iter().map(|(u, l)| (u, l.as_slice()))
    }

    /// Keeps the first `k` entries of every list (re-assigning nothing:
    /// prefixes keep their ranks) and declares the bound as `k`.
    pub fn truncated(&self, k: usize) -> RecLists {
        let lists = self
            .lists
            .iter()
            .map(|(u, l)| (u.clone(), l.iter().take(k).cloned().collect()))
            .collect();
        RecLists { lists, max_len: k }
    }
}

/// Re-ranking geometry: output length `topk` drawn from candidate pools of
/// length at most `topn`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerankParams {
    pub topk: usize,
    pub topn: usize,
}

impl Default for RerankParams {
    fn default() -> Self {
        RerankParams { topk: 10, topn: 1000 }
    }
}

impl RerankParams {
    pub fn new(topk: usize, topn: usize) -> Result<Self> {
        let params = RerankParams { topk, topn };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.topk == 0 {
            return Err(Error::invalid("topk must be at least 1"));
        }
        if self.topn < self.topk {
            return Err(Error::invalid(format!(
                "topn ({}) must be at least topk ({})",
                self.topn, self.topk
            )));
        }
        Ok(())
    }
}

/// A single cross-input consistency problem found by [`validate_join`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// A recommended item is missing from the catalog.
    UnknownRecItem { user: UserId, item: ItemId },
    /// A rated item is missing from the catalog.
    UnknownRatedItem { user: UserId, item: ItemId },
    /// A user has an empty candidate list.
    EmptyUserList { user: UserId },
    /// A list's scores increase at this rank.
    NonMonotoneScores { user: UserId, rank: u32 },
    /// A list's ranks skip this value.
    RankGap { user: UserId, expected_rank: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownRecItem { user, item } => {
                write!(f, "user '{user}': recommended item '{item}' not in catalog")
            }
            Violation::UnknownRatedItem { user, item } => {
                write!(f, "user '{user}': rated item '{item}' not in catalog")
            }
            Violation::EmptyUserList { user } => write!(f, "user '{user}': empty list"),
            Violation::NonMonotoneScores { user, rank } => {
                write!(f, "user '{user}': scores increase at rank {rank}")
            }
            Violation::RankGap { user, expected_rank } => {
                write!(f, "user '{user}': rank gap at {expected_rank}")
            }
        }
    }
}

/// Outcome of joining the three inputs; `ok()` iff no violations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Cross-checks the three inputs: every recommended and rated item must be
/// in the catalog, lists must be non-empty with contiguous ranks and
/// non-increasing scores. Collects all violations instead of failing fast.
pub fn validate_join(
    catalog: &Catalog,
    interactions: &Interactions,
    recs: &RecLists,
) -> ValidationReport {
    let mut violations = Vec::new();

    for r in interactions.iter() {
        if !catalog.contains(&r.item) {
            violations
                .push(Violation::UnknownRatedItem { user: r.user.clone(), item: r.item.clone() });
        }
    }

    for (user, list) in recs.iter() {
        if list.is_empty() {
            violations.push(Violation::EmptyUserList { user: user.clone() });
            continue;
        }
        for (i, rec) in list.iter().enumerate() {
            if !catalog.contains(&rec.item) {
                violations
                    .push(Violation::UnknownRecItem { user: user.clone(), item: rec.item.clone() });
            }
            let expected = (i + 1) as u32;
            if rec.rank != expected {
                violations.push(Violation::RankGap { user: user.clone(), expected_rank: expected });
            }
            if i > 0 && rec.score > list[i - 1].score {
                violations
                    .push(Violation::NonMonotoneScores { user: user.clone(), rank: rec.rank });
            }
        }
    }

    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rating(user: &str, item: &str, value: f64, ts: i64) -> Rating {
        Rating { user: user.into(), item: item.into(), value, timestamp: ts }
    }

    fn meta(genres: &[&str], continents: &[&str]) -> ItemMeta {
        ItemMeta::new(
            genres.iter().map(|g| Genre::from(*g)).collect(),
            continents.iter().map(|c| Continent::from(*c)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn interactions_sort_by_user_then_time_then_item() {
        let ix = Interactions::new(vec![
            rating("u2", "i1", 4.0, 5),
            rating("u1", "i2", 3.0, 9),
            rating("u1", "i1", 5.0, 2),
            rating("u1", "i3", 2.0, 2),
        ])
        .unwrap();
        let order: Vec<(&str, &str)> =
            ix.iter().map(|r| (r.user.as_str(), r.item.as_str())).collect();
        assert_eq!(order, vec![("u1", "i1"), ("u1", "i3"), ("u1", "i2"), ("u2", "i1")]);
    }

    #[test]
    fn interactions_reject_duplicate_pairs() {
        let err = Interactions::new(vec![rating("u1", "i1", 4.0, 1), rating("u1", "i1", 2.0, 7)])
            .unwrap_err();
        assert!(err.to_string().contains("duplicate rating"));
    }

    #[test]
    fn by_user_groups_are_contiguous_and_chronological() {
        let ix = Interactions::new(vec![
            rating("b", "i1", 1.0, 3),
            rating("a", "i2", 1.0, 2),
            rating("a", "i1", 1.0, 1),
        ])
        .unwrap();
        let groups: Vec<(&str, usize)> =
            ix.by_user().map(|(u, rs)| (u.as_str(), rs.len())).collect();
        assert_eq!(groups, vec![("a", 2), ("b", 1)]);
        let (_, a_run) = ix.by_user().next().unwrap();
        assert!(a_run.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[test]
    fn item_meta_requires_both_label_kinds() {
        assert!(ItemMeta::new(BTreeSet::new(), [Continent::from("EU")].into()).is_err());
        assert!(ItemMeta::new([Genre::from("Drama")].into(), BTreeSet::new()).is_err());
    }

    #[test]
    fn catalog_derives_sorted_universes() {
        let catalog = Catalog::new(
            [
                (ItemId::from("i1"), meta(&["Drama", "Action"], &["EU"])),
                (ItemId::from("i2"), meta(&["Comedy"], &["NA", "AS"])),
            ]
            .into(),
        );
        let genres: Vec<&str> = catalog.genres().iter().map(|g| g.as_str()).collect();
        let continents: Vec<&str> = catalog.continents().iter().map(|c| c.as_str()).collect();
        assert_eq!(genres, vec!["Action", "Comedy", "Drama"]);
        assert_eq!(continents, vec!["AS", "EU", "NA"]);
    }

    #[test]
    fn rating_domain_is_inclusive() {
        let d = RatingDomain::default();
        assert!(d.contains(1.0));
        assert!(d.contains(5.0));
        assert!(!d.contains(0.5));
        assert!(!d.contains(5.5));
        assert!(!d.contains(f64::NAN));
    }

    #[test]
    fn rec_lists_enforce_rank_contiguity() {
        let rows = vec![
            (UserId::from("u1"), ItemId::from("i1"), 0.9, 1),
            (UserId::from("u1"), ItemId::from("i2"), 0.8, 3),
        ];
        let err = RecLists::from_rows(rows, 10, ListOrdering::StrictScores).unwrap_err();
        assert!(err.to_string().contains("gap at rank 2"), "{err}");
    }

    #[test]
    fn rec_lists_enforce_unique_items_per_user() {
        let rows = vec![
            (UserId::from("u1"), ItemId::from("i1"), 0.9, 1),
            (UserId::from("u1"), ItemId::from("i1"), 0.8, 2),
        ];
        let err = RecLists::from_rows(rows, 10, ListOrdering::StrictScores).unwrap_err();
        assert!(err.to_string().contains("appears twice"), "{err}");
    }

    #[test]
    fn rec_lists_score_inversion_strict_vs_lenient() {
        let rows = vec![
            (UserId::from("u1"), ItemId::from("i1"), 0.5, 1),
            (UserId::from("u1"), ItemId::from("i2"), 0.9, 2),
        ];
        let err = RecLists::from_rows(rows.clone(), 10, ListOrdering::StrictScores).unwrap_err();
        assert!(err.to_string().contains("score increases"), "{err}");

        let (lists, inversions) =
            RecLists::from_rows(rows, 10, ListOrdering::AllowScoreInversions).unwrap();
        assert_eq!(inversions, 1);
        assert_eq!(lists.get(&UserId::from("u1")).unwrap().len(), 2);
    }

    #[test]
    fn rec_lists_respect_declared_bound() {
        let rows = vec![
            (UserId::from("u1"), ItemId::from("i1"), 0.9, 1),
            (UserId::from("u1"), ItemId::from("i2"), 0.8, 2),
        ];
        let err = RecLists::from_rows(rows, 1, ListOrdering::StrictScores).unwrap_err();
        assert!(err.to_string().contains("exceeds declared bound"), "{err}");
    }

    #[test]
    fn truncated_keeps_prefixes() {
        let rows = vec![
            (UserId::from("u1"), ItemId::from("i1"), 0.9, 1),
            (UserId::from("u1"), ItemId::from("i2"), 0.8, 2),
            (UserId::from("u1"), ItemId::from("i3"), 0.7, 3),
        ];
        let (lists, _) = RecLists::from_rows(rows, 10, ListOrdering::StrictScores).unwrap();
        let top2 = lists.truncated(2);
        assert_eq!(top2.max_len(), 2);
        let list = top2.get(&UserId::from("u1")).unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(list[1].item, ItemId::from("i2"));
        assert_eq!(list[1].rank, 2);
    }

    #[test]
    fn rerank_params_validation() {
        assert!(RerankParams::new(0, 10).is_err());
        assert!(RerankParams::new(10, 5).is_err());
        let p = RerankParams::default();
        assert_eq!((p.topk, p.topn), (10, 1000));
    }

    #[test]
    fn validate_join_flags_all_cross_input_issues() {
        let catalog = Catalog::new([(ItemId::from("i1"), meta(&["Drama"], &["EU"]))].into());
        let ix = Interactions::new(vec![rating("u1", "ghost", 4.0, 1)]).unwrap();
        let (recs, _) = RecLists::from_rows(
            vec![
                (UserId::from("u1"), ItemId::from("i1"), 0.9, 1),
                (UserId::from("u1"), ItemId::from("missing"), 0.8, 2),
            ],
            10,
            ListOrdering::StrictScores,
        )
        .unwrap();

        let report = validate_join(&catalog, &ix, &recs);
        assert!(!report.ok());
        assert!(report
            .violations
            .contains(&Violation::UnknownRatedItem { user: "u1".into(), item: "ghost".into() }));
        assert!(report
            .violations
            .contains(&Violation::UnknownRecItem { user: "u1".into(), item: "missing".into() }));

        let clean = validate_join(
            &Catalog::new(
                [
                    (ItemId::from("i1"), meta(&["Drama"], &["EU"])),
                    (ItemId::from("missing"), meta(&["Drama"], &["EU"])),
                    (ItemId::from("ghost"), meta(&["Drama"], &["EU"])),
                ]
                .into(),
            ),
            &ix,
            &recs,
        );
        assert!(clean.ok());
    }
}
