//! Item recommendation from cluster profiles, diversity flags, and tagging
//! effort.
//!
//! A trained [`Model`] is an immutable view over one training folksonomy:
//! per-user cluster profiles (which tag clusters the user has touched),
//! binary diversity flags singling out the broader half of the users, and a
//! per-user, per-item tagging effort index. A candidate item is scored by
//! averaging, over its annotators, a blend of profile similarity and effort:
//!
//! ```text
//! liking(u, p) = sum over annotators v of (d * S(u,v) + (1-d) * f(v,p)) * w(v)
//!                ------------------------------------------------------------
//!                                        m
//! ```
//!
//! where `S` is Jaccard overlap of cluster profiles, `f(v,p)` the fraction
//! of `v`'s distinct tags spent on `p`, `w` the diversity flag, and `m` the
//! number of annotators counted by the configured denominator rule. The
//! target user's own annotations never contribute: they are excluded from
//! both the sum and `m`.

use std::collections::HashMap;

use crate::clustering::TagClustering;
use crate::corpus::Folksonomy;
use crate::{Error, Result};

/// Which end of the cluster-count ranking receives diversity flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiversityOrder {
    /// Users touching the most clusters are flagged (default).
    #[default]
    MostDiverseFirst,
    /// Mirrored variant for sensitivity runs: fewest clusters first.
    LeastDiverseFirst,
}

/// Which annotators the liking denominator `m` counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LikingDenominator {
    /// Every annotator of the item, flagged or not (default).
    #[default]
    AllAnnotators,
    /// Only annotators carrying a diversity flag.
    FlaggedAnnotators,
}

/// Scoring controls shared by every recommendation method.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    /// Blend factor `d`: weight of profile similarity versus effort.
    pub blend_factor: f64,
    pub top_n: usize,
    /// Exclusive lower bound a score must beat to be recommended.
    pub threshold_probability: f64,
    pub denominator: LikingDenominator,
}

impl ModelParams {
    /// Defaults: top 20 list, strictly positive scores only.
    pub fn with_blend(blend_factor: f64) -> ModelParams {
        ModelParams {
            blend_factor,
            top_n: 20,
            threshold_probability: 0.0,
            denominator: LikingDenominator::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.blend_factor) {
            return Err(Error::InvalidArgument(format!(
                "blend factor {} must lie in [0, 1]",
                self.blend_factor
            )));
        }
        if self.top_n == 0 {
            return Err(Error::InvalidArgument("top_n must be at least 1".into()));
        }
        if !self.threshold_probability.is_finite() {
            return Err(Error::InvalidArgument(
                "threshold_probability must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// One recommended item with its computed score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recommendation {
    /// Item index in the training folksonomy.
    pub item: u32,
    pub score: f64,
}

/// Maps tag strings to cluster ids so profiles survive re-indexing between
/// folksonomy views. Tags the clustering never saw can be appended as fresh
/// singleton clusters.
#[derive(Debug, Clone)]
pub struct ClusterMap {
    map: HashMap<String, u32>,
    next_id: u32,
}

impl ClusterMap {
    pub fn from_clustering(clustering: &TagClustering) -> ClusterMap {
        let map = clustering
            .labels()
            .iter()
            .enumerate()
            .map(|(i, label)| (label.clone(), clustering.cluster_of(i)))
            .collect();
        ClusterMap {
            map,
            next_id: clustering.len() as u32,
        }
    }

    /// Builds a map from explicit assignments (tests, fixtures).
    pub fn from_pairs<I, S>(pairs: I) -> ClusterMap
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        let map: HashMap<String, u32> = pairs
            .into_iter()
            .map(|(tag, cluster)| (tag.into(), cluster))
            .collect();
        let next_id = map.values().max().map_or(0, |&m| m + 1);
        ClusterMap { map, next_id }
    }

    /// Assigns fresh singleton cluster ids to unknown tags, in the order
    /// given. Pass tags in a canonical order for deterministic ids.
    pub fn extend_with_tags<'a, I: IntoIterator<Item = &'a str>>(&mut self, tags: I) {
        for tag in tags {
            if !self.map.contains_key(tag) {
                self.map.insert(tag.to_string(), self.next_id);
                self.next_id += 1;
            }
        }
    }

    pub fn get(&self, tag: &str) -> Option<u32> {
        self.map.get(tag).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// A user's side of a similarity query: the sorted set of cluster ids their
/// tags touch, plus their training identity when they are a training user
/// (so their own annotations can be excluded from scoring).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryProfile {
    clusters: Vec<u32>,
    training_user: Option<u32>,
}

impl QueryProfile {
    /// Profile of a user of an arbitrary folksonomy view. The map must
    /// cover every tag the user used.
    pub fn from_user(
        folksonomy: &Folksonomy,
        user: usize,
        map: &ClusterMap,
    ) -> Result<QueryProfile> {
        if user >= folksonomy.user_count() {
            return Err(Error::InvalidArgument(format!(
                "user index {user} out of range"
            )));
        }
        let mut clusters = Vec::new();
        for &tag in folksonomy.user_tags(user) {
            let name = &folksonomy.tags()[tag as usize];
            let cluster = map.get(name).ok_or_else(|| {
                Error::InvalidArgument(format!("tag {name:?} missing from cluster map"))
            })?;
            clusters.push(cluster);
        }
        clusters.sort_unstable();
        clusters.dedup();
        Ok(QueryProfile {
            clusters,
            training_user: None,
        })
    }

    pub fn clusters(&self) -> &[u32] {
        &self.clusters
    }
    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }
}

/// Jaccard overlap of two sorted, deduplicated id sets; two empty sets
/// count as 0 (no evidence of similarity).
pub fn jaccard(a: &[u32], b: &[u32]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let mut i = 0;
    let mut j = 0;
    let mut both = 0usize;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                both += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - both;
    both as f64 / union as f64
}

/// Flags the top half of the users: ranked by `counts` (descending under
/// [`DiversityOrder::MostDiverseFirst`], ascending under the mirror), ties
/// by index ascending, and the first `ceil(n / 2)` get a flag.
pub fn diversity_flags(counts: &[usize], order: DiversityOrder) -> Vec<bool> {
    let n = counts.len();
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&x, &y| {
        let by_count = match order {
            DiversityOrder::MostDiverseFirst => counts[y].cmp(&counts[x]),
            DiversityOrder::LeastDiverseFirst => counts[x].cmp(&counts[y]),
        };
        by_count.then(x.cmp(&y))
    });
    let cut = n.div_ceil(2);
    let mut flags = vec![false; n];
    for &u in ranked.iter().take(cut) {
        flags[u] = true;
    }
    flags
}

/// `d * similarity + (1 - d) * effort`.
pub fn pair_probability(blend_factor: f64, similarity: f64, effort: f64) -> f64 {
    blend_factor * similarity + (1.0 - blend_factor) * effort
}

/// Applies the shared ranking rules: keep scores strictly above the
/// threshold, sort descending, break ties by ascending item index (item
/// indices follow lexicographic item id order), truncate to `top_n`.
pub fn rank_scored(
    scored: impl IntoIterator<Item = (u32, f64)>,
    top_n: usize,
    threshold: f64,
) -> Vec<Recommendation> {
    let mut kept: Vec<Recommendation> = scored
        .into_iter()
        .filter(|&(_, score)| score > threshold)
        .map(|(item, score)| Recommendation { item, score })
        .collect();
    kept.sort_unstable_by(|a, b| b.score.total_cmp(&a.score).then(a.item.cmp(&b.item)));
    kept.truncate(top_n);
    kept
}

/// Blend-independent pieces of one (user, item) liking score, so a whole
/// grid of blend factors can be swept from one scoring pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikingTerms {
    /// Sum of flagged annotators' profile similarities to the query user.
    pub similarity_sum: f64,
    /// Sum of flagged annotators' tagging efforts on the item.
    pub effort_sum: f64,
    /// Annotators of the item (target user excluded).
    pub all_annotators: usize,
    /// Flagged annotators of the item (target user excluded).
    pub flagged_annotators: usize,
}

impl LikingTerms {
    /// Resolves the terms into a score for one blend factor.
    pub fn score(&self, params: &ModelParams) -> f64 {
        let m = match params.denominator {
            LikingDenominator::AllAnnotators => self.all_annotators,
            LikingDenominator::FlaggedAnnotators => self.flagged_annotators,
        };
        if m == 0 {
            return 0.0;
        }
        let d = params.blend_factor;
        (d * self.similarity_sum + (1.0 - d) * self.effort_sum) / m as f64
    }
}

/// Immutable trained state over one training folksonomy.
#[derive(Debug)]
pub struct Model<'f> {
    training: &'f Folksonomy,
    /// Sorted distinct cluster ids per training user.
    profiles: Vec<Vec<u32>>,
    flags: Vec<bool>,
    /// Distinct tag count per training user.
    tag_totals: Vec<u32>,
    /// Per training user: (item, distinct tags the user put on it), sorted
    /// by item.
    item_tag_counts: Vec<Vec<(u32, u32)>>,
}

impl<'f> Model<'f> {
    /// Builds profiles, flags, and the effort index. The cluster map must
    /// cover every training tag; extend it with
    /// [`ClusterMap::extend_with_tags`] first if the clustering predates
    /// this folksonomy.
    pub fn new(
        training: &'f Folksonomy,
        map: &ClusterMap,
        order: DiversityOrder,
    ) -> Result<Model<'f>> {
        let cluster_of_tag: Vec<u32> = training
            .tags()
            .iter()
            .map(|tag| {
                map.get(tag).ok_or_else(|| {
                    Error::InvalidArgument(format!("tag {tag:?} missing from cluster map"))
                })
            })
            .collect::<Result<_>>()?;
        let users = training.user_count();
        let mut profiles = Vec::with_capacity(users);
        let mut tag_totals = Vec::with_capacity(users);
        let mut item_tag_counts = Vec::with_capacity(users);
        for u in 0..users {
            let mut clusters: Vec<u32> = training
                .user_tags(u)
                .iter()
                .map(|&t| cluster_of_tag[t as usize])
                .collect();
            clusters.sort_unstable();
            clusters.dedup();
            profiles.push(clusters);
            tag_totals.push(training.user_tags(u).len() as u32);
            // Posts of one user are sorted by (item, tag) and deduplicated,
            // so distinct tags per item are run lengths.
            let mut counts: Vec<(u32, u32)> = Vec::new();
            for post in training.user_posts(u) {
                match counts.last_mut() {
                    Some((item, n)) if *item == post.item => *n += 1,
                    _ => counts.push((post.item, 1)),
                }
            }
            item_tag_counts.push(counts);
        }
        let counts: Vec<usize> = profiles.iter().map(|p| p.len()).collect();
        let flags = diversity_flags(&counts, order);
        Ok(Model {
            training,
            profiles,
            flags,
            tag_totals,
            item_tag_counts,
        })
    }

    pub fn training(&self) -> &Folksonomy {
        self.training
    }
    /// Sorted cluster ids a training user's tags touch.
    pub fn profile(&self, user: usize) -> &[u32] {
        &self.profiles[user]
    }
    pub fn flag(&self, user: usize) -> bool {
        self.flags[user]
    }

    /// Query profile of a training user, carrying their identity so their
    /// own annotations are excluded when scoring.
    pub fn query_for_training_user(&self, user: usize) -> Result<QueryProfile> {
        if user >= self.profiles.len() {
            return Err(Error::InvalidArgument(format!(
                "user index {user} out of range"
            )));
        }
        Ok(QueryProfile {
            clusters: self.profiles[user].clone(),
            training_user: Some(user as u32),
        })
    }

    /// Fraction of the user's distinct tags spent on one item.
    pub fn tagging_effort(&self, user: usize, item: u32) -> f64 {
        let counts = &self.item_tag_counts[user];
        let on_item = match counts.binary_search_by_key(&item, |&(i, _)| i) {
            Ok(pos) => counts[pos].1,
            Err(_) => 0,
        };
        on_item as f64 / self.tag_totals[user] as f64
    }

    /// Jaccard similarity between a query profile and a training user.
    pub fn similarity_to(&self, query: &QueryProfile, user: usize) -> f64 {
        jaccard(&query.clusters, &self.profiles[user])
    }

    /// Accumulates one item's liking terms over its annotators in
    /// ascending user order.
    pub fn liking_terms(&self, query: &QueryProfile, item: u32) -> LikingTerms {
        let mut terms = LikingTerms {
            similarity_sum: 0.0,
            effort_sum: 0.0,
            all_annotators: 0,
            flagged_annotators: 0,
        };
        for &annotator in self.training.item_annotators(item as usize) {
            if query.training_user == Some(annotator) {
                continue;
            }
            let user = annotator as usize;
            terms.all_annotators += 1;
            if self.flags[user] {
                terms.flagged_annotators += 1;
                terms.similarity_sum += self.similarity_to(query, user);
                terms.effort_sum += self.tagging_effort(user, item);
            }
        }
        terms
    }

    /// Liking terms for many items of one query. Profile similarities are
    /// computed once per training user and reused, and each item's sums
    /// still accumulate in ascending annotator order, so every term is
    /// bit-identical to [`Model::liking_terms`] on the same item.
    pub fn liking_terms_bulk(&self, query: &QueryProfile, items: &[u32]) -> Vec<LikingTerms> {
        let similarities: Vec<f64> = (0..self.training.user_count())
            .map(|u| {
                if self.flags[u] {
                    self.similarity_to(query, u)
                } else {
                    0.0
                }
            })
            .collect();
        items
            .iter()
            .map(|&item| {
                let mut terms = LikingTerms {
                    similarity_sum: 0.0,
                    effort_sum: 0.0,
                    all_annotators: 0,
                    flagged_annotators: 0,
                };
                for &annotator in self.training.item_annotators(item as usize) {
                    if query.training_user == Some(annotator) {
                        continue;
                    }
                    let user = annotator as usize;
                    terms.all_annotators += 1;
                    if self.flags[user] {
                        terms.flagged_annotators += 1;
                        terms.similarity_sum += similarities[user];
                        terms.effort_sum += self.tagging_effort(user, item);
                    }
                }
                terms
            })
            .collect()
    }

    /// Blended liking score of one candidate item for the query user.
    pub fn item_liking(&self, query: &QueryProfile, item: u32, params: &ModelParams) -> f64 {
        self.liking_terms(query, item).score(params)
    }

    /// Scores every candidate and applies the shared ranking rules.
    pub fn recommend(
        &self,
        query: &QueryProfile,
        candidates: &[u32],
        params: &ModelParams,
    ) -> Result<Vec<Recommendation>> {
        params.validate()?;
        let scored = candidates
            .iter()
            .map(|&item| (item, self.item_liking(query, item, params)));
        Ok(rank_scored(
            scored,
            params.top_n,
            params.threshold_probability,
        ))
    }

    /// Candidate set for a query user: every training item, minus the
    /// user's own training annotations when they are a training user.
    pub fn candidates_for(&self, query: &QueryProfile) -> Vec<u32> {
        let items = self.training.item_count() as u32;
        match query.training_user {
            None => (0..items).collect(),
            Some(u) => {
                let owned = self.training.user_items(u as usize);
                (0..items)
                    .filter(|i| owned.binary_search(i).is_err())
                    .collect()
            }
        }
    }
}
