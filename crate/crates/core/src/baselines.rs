//! Comparison recommenders sharing the ranking rules of [`crate::recommender`]:
//! vector space cosine over raw tag frequencies, tag and topic transition
//! probabilities, and seeded uniform random choice.
//!
//! All methods are trained on one training folksonomy and queried with
//! profiles built from a possibly different folksonomy view, so a test
//! user's own posts never leak into the trained state. Identity crosses
//! views through tag strings; query tags unseen in training keep their
//! weight in the user's norm or probability mass but cannot match any item.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

use crate::corpus::Folksonomy;
use crate::recommender::{rank_scored, ClusterMap, ModelParams, Recommendation};
use crate::{Error, Result};

/// Raw tag usage counts with a precomputed squared Euclidean norm.
///
/// `weights` holds only tags mapped into the training vocabulary (sorted by
/// training tag index); `norm_squared` also covers unmapped tags, so a
/// query vector keeps its full length even when parts of it cannot match.
#[derive(Debug, Clone, PartialEq)]
pub struct TagVector {
    weights: Vec<(u32, f64)>,
    norm_squared: f64,
}

impl TagVector {
    /// Builds a vector from (tag index, count) pairs, all considered
    /// in-vocabulary. The norm accumulates in ascending tag order.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> TagVector {
        let mut weights: Vec<(u32, f64)> = pairs.into_iter().collect();
        weights.sort_unstable_by_key(|&(t, _)| t);
        let norm_squared = weights.iter().map(|&(_, w)| w * w).sum();
        TagVector {
            weights,
            norm_squared,
        }
    }

    pub fn norm_squared(&self) -> f64 {
        self.norm_squared
    }

    pub fn is_zero(&self) -> bool {
        self.norm_squared == 0.0
    }
}

/// Cosine of the angle between two tag vectors. The denominator is
/// computed as `sqrt(|a|^2 * |b|^2)` so a vector compared against itself
/// scores exactly 1.
pub fn cosine_similarity(a: &TagVector, b: &TagVector) -> Result<f64> {
    if a.is_zero() || b.is_zero() {
        return Err(Error::InvalidArgument(
            "cosine similarity of a zero-norm vector is undefined".into(),
        ));
    }
    let mut dot = 0.0;
    let mut i = 0;
    let mut j = 0;
    while i < a.weights.len() && j < b.weights.len() {
        match a.weights[i].0.cmp(&b.weights[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a.weights[i].1 * b.weights[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(dot / (a.norm_squared * b.norm_squared).sqrt())
}

/// Vector space method: rank candidates by cosine between the user's tag
/// frequency vector and each item's.
#[derive(Debug)]
pub struct VectorSpaceModel<'f> {
    training: &'f Folksonomy,
    item_vectors: Vec<TagVector>,
}

impl<'f> VectorSpaceModel<'f> {
    pub fn new(training: &'f Folksonomy) -> VectorSpaceModel<'f> {
        let mut counts: Vec<HashMap<u32, u32>> = vec![HashMap::new(); training.item_count()];
        for post in training.posts() {
            *counts[post.item as usize].entry(post.tag).or_insert(0) += 1;
        }
        let item_vectors = counts
            .into_iter()
            .map(|c| TagVector::from_pairs(c.into_iter().map(|(t, n)| (t, n as f64))))
            .collect();
        VectorSpaceModel {
            training,
            item_vectors,
        }
    }

    pub fn item_vector(&self, item: usize) -> &TagVector {
        &self.item_vectors[item]
    }

    /// Tag frequency vector of a user in an arbitrary folksonomy view,
    /// weights being the number of items the user applied each tag to.
    /// Tags unknown to the training vocabulary contribute to the norm
    /// only.
    pub fn user_vector(&self, view: &Folksonomy, user: usize) -> Result<TagVector> {
        if user >= view.user_count() {
            return Err(Error::InvalidArgument(format!(
                "user index {user} out of range"
            )));
        }
        let mut counts: HashMap<u32, u32> = HashMap::new();
        for post in view.user_posts(user) {
            *counts.entry(post.tag).or_insert(0) += 1;
        }
        let mut weights = Vec::new();
        let mut norm_squared = 0.0;
        for &tag in view.user_tags(user) {
            let w = counts[&tag] as f64;
            norm_squared += w * w;
            if let Some(t) = self.training.tag_index(&view.tags()[tag as usize]) {
                weights.push((t as u32, w));
            }
        }
        weights.sort_unstable_by_key(|&(t, _)| t);
        Ok(TagVector {
            weights,
            norm_squared,
        })
    }

    pub fn recommend(
        &self,
        user: &TagVector,
        candidates: &[u32],
        params: &ModelParams,
    ) -> Result<Vec<Recommendation>> {
        params.validate()?;
        if user.is_zero() {
            return Err(Error::InvalidArgument("user vector has zero norm".into()));
        }
        let scored = candidates.iter().map(|&item| {
            let vector = &self.item_vectors[item as usize];
            let score = if vector.is_zero() {
                0.0
            } else {
                cosine_similarity(user, vector).expect("both norms checked positive")
            };
            (item, score)
        });
        Ok(rank_scored(
            scored,
            params.top_n,
            params.threshold_probability,
        ))
    }
}

/// Tag or topic transition method: `score(i) = sum over keys t of
/// p(t | user) * p(i | t)`, keys being training tags or cluster ids.
///
/// Both conditional probabilities are maximum-likelihood ratios of distinct
/// post counts. Summation runs in ascending key order, then ascending item
/// order, so scores are bit-stable.
#[derive(Debug)]
pub struct TransitionModel {
    /// Per key: total post count and per-item post counts, item-sorted.
    transitions: HashMap<u32, (u64, Vec<(u32, u32)>)>,
}

/// A query user's side of the transition method: per-key distinct post
/// counts (key-sorted) and their overall total, unmapped keys included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyCounts {
    counts: Vec<(u32, u32)>,
    total: u64,
}

impl TransitionModel {
    /// Keys are training tag indices; a post's key count is 1 per distinct
    /// (user, tag, item) triple.
    pub fn tag_based(training: &Folksonomy) -> TransitionModel {
        let mut per_key: HashMap<u32, HashMap<u32, u32>> = HashMap::new();
        for post in training.posts() {
            *per_key
                .entry(post.tag)
                .or_default()
                .entry(post.item)
                .or_insert(0) += 1;
        }
        TransitionModel::from_nested(per_key)
    }

    /// Keys are cluster ids: every tag is replaced by its cluster before
    /// counting, so same-cluster tags on one (user, item) pair collapse
    /// into a single distinct post.
    pub fn topic_based(training: &Folksonomy, map: &ClusterMap) -> Result<TransitionModel> {
        let cluster_of_tag: Vec<u32> = training
            .tags()
            .iter()
            .map(|tag| {
                map.get(tag).ok_or_else(|| {
                    Error::InvalidArgument(format!("tag {tag:?} missing from cluster map"))
                })
            })
            .collect::<Result<_>>()?;
        let mut replaced: Vec<(u32, u32, u32)> = training
            .posts()
            .iter()
            .map(|p| (cluster_of_tag[p.tag as usize], p.item, p.user))
            .collect();
        replaced.sort_unstable();
        replaced.dedup();
        let mut per_key: HashMap<u32, HashMap<u32, u32>> = HashMap::new();
        for (key, item, _) in replaced {
            *per_key.entry(key).or_default().entry(item).or_insert(0) += 1;
        }
        Ok(TransitionModel::from_nested(per_key))
    }

    fn from_nested(per_key: HashMap<u32, HashMap<u32, u32>>) -> TransitionModel {
        let transitions = per_key
            .into_iter()
            .map(|(key, items)| {
                let mut items: Vec<(u32, u32)> = items.into_iter().collect();
                items.sort_unstable_by_key(|&(i, _)| i);
                let total: u64 = items.iter().map(|&(_, n)| n as u64).sum();
                (key, (total, items))
            })
            .collect();
        TransitionModel { transitions }
    }

    /// Tag-key counts of a user in a folksonomy view, keyed by training
    /// tag index. Tags outside the training vocabulary stay in the total
    /// (they are part of the user's usage mass) under an out-of-range key.
    pub fn user_tag_counts(
        training: &Folksonomy,
        view: &Folksonomy,
        user: usize,
    ) -> Result<KeyCounts> {
        if user >= view.user_count() {
            return Err(Error::InvalidArgument(format!(
                "user index {user} out of range"
            )));
        }
        let mut counts = Vec::new();
        let mut total = 0u64;
        let posts = view.user_posts(user);
        let mut i = 0;
        // Per-tag distinct item counts from the user's posts.
        let mut by_tag: HashMap<u32, u32> = HashMap::new();
        while i < posts.len() {
            *by_tag.entry(posts[i].tag).or_insert(0) += 1;
            i += 1;
        }
        for &tag in view.user_tags(user) {
            let n = by_tag[&tag];
            total += n as u64;
            if let Some(t) = training.tag_index(&view.tags()[tag as usize]) {
                counts.push((t as u32, n));
            }
        }
        counts.sort_unstable_by_key(|&(k, _)| k);
        Ok(KeyCounts { counts, total })
    }

    /// Cluster-key counts of a user: distinct (cluster, item) pairs over
    /// the user's posts. The map must cover every tag the user used.
    pub fn user_topic_counts(
        view: &Folksonomy,
        user: usize,
        map: &ClusterMap,
    ) -> Result<KeyCounts> {
        if user >= view.user_count() {
            return Err(Error::InvalidArgument(format!(
                "user index {user} out of range"
            )));
        }
        let mut pairs: Vec<(u32, u32)> = view
            .user_posts(user)
            .iter()
            .map(|p| {
                let name = &view.tags()[p.tag as usize];
                map.get(name).map(|c| (c, p.item)).ok_or_else(|| {
                    Error::InvalidArgument(format!("tag {name:?} missing from cluster map"))
                })
            })
            .collect::<Result<_>>()?;
        pairs.sort_unstable();
        pairs.dedup();
        let mut counts: Vec<(u32, u32)> = Vec::new();
        for (key, _) in pairs {
            match counts.last_mut() {
                Some((k, n)) if *k == key => *n += 1,
                _ => counts.push((key, 1)),
            }
        }
        let total = counts.iter().map(|&(_, n)| n as u64).sum();
        Ok(KeyCounts { counts, total })
    }

    /// Probability the trained state assigns to an item given a key.
    pub fn item_given_key(&self, key: u32, item: u32) -> f64 {
        match self.transitions.get(&key) {
            None => 0.0,
            Some((total, items)) => match items.binary_search_by_key(&item, |&(i, _)| i) {
                Ok(pos) => items[pos].1 as f64 / *total as f64,
                Err(_) => 0.0,
            },
        }
    }

    pub fn score_map(&self, user: &KeyCounts) -> HashMap<u32, f64> {
        let mut scores: HashMap<u32, f64> = HashMap::new();
        if user.total == 0 {
            return scores;
        }
        for &(key, n) in &user.counts {
            let p_key = n as f64 / user.total as f64;
            if let Some((total, items)) = self.transitions.get(&key) {
                for &(item, c) in items {
                    *scores.entry(item).or_insert(0.0) += p_key * (c as f64 / *total as f64);
                }
            }
        }
        scores
    }

    pub fn recommend(
        &self,
        user: &KeyCounts,
        candidates: &[u32],
        params: &ModelParams,
    ) -> Result<Vec<Recommendation>> {
        params.validate()?;
        let scores = self.score_map(user);
        let scored = candidates
            .iter()
            .map(|&item| (item, scores.get(&item).copied().unwrap_or(0.0)));
        Ok(rank_scored(
            scored,
            params.top_n,
            params.threshold_probability,
        ))
    }
}

/// FNV-1a over the user id, mixed into the master seed so each user draws
/// an independent, reproducible stream.
fn user_stream_seed(master_seed: u64, user_id: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for byte in user_id.bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    master_seed ^ h
}

/// Uniform random choice without replacement, deterministic per
/// (seed, user id). Drawn items carry descending placeholder scores in
/// (0, 1] so the shared ranking rules keep the draw order.
pub fn random_recommend(
    user_id: &str,
    candidates: &[u32],
    params: &ModelParams,
    seed: u64,
) -> Result<Vec<Recommendation>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(user_stream_seed(seed, user_id));
    let mut pool: Vec<u32> = candidates.to_vec();
    pool.sort_unstable();
    let k = params.top_n.min(pool.len());
    let mut scored = Vec::with_capacity(k);
    for round in 0..k {
        let pick = rng.gen_range(round..pool.len());
        pool.swap(round, pick);
        scored.push((pool[round], (k - round) as f64 / k as f64));
    }
    Ok(rank_scored(
        scored,
        params.top_n,
        params.threshold_probability,
    ))
}
