//! Seeded generator for benchmark corpora.
//!
//! Produces a concept taxonomy and a matching annotation stream shaped like
//! a mid-sized social bookmarking service: topical communities whose members
//! share a skewed vocabulary, casual members who annotate too little to
//! survive the population filters, drive-by users who spray a handful of
//! generic tags over everything, and a few isolated groups whose vocabulary
//! nobody else touches. Both artifacts are plain text in the formats the
//! corpus and taxonomy parsers accept, and generation is a pure function of
//! the configuration, so corpora are reproducible from a seed alone.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

/// Inclusive bounds for a per-user count drawn at generation time.
#[derive(Debug, Clone, Copy)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

impl CountRange {
    pub fn new(min: usize, max: usize) -> CountRange {
        assert!(min <= max, "empty count range");
        CountRange { min, max }
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> usize {
        rng.gen_range(self.min..=self.max)
    }
}

/// Shape of the generated corpus. Field defaults are calibrated so that
/// sampling 1000 users and applying the default population filters lands
/// near 500 users, 850 items and 3200 tags.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    /// Specialist topics, each one subtree of the taxonomy.
    pub specialist_topics: usize,
    pub tags_per_topic: CountRange,
    /// Size of the generic vocabulary every drive-by user draws from.
    pub generic_tags: usize,
    /// Zipf exponent of every vocabulary draw.
    pub vocabulary_skew: f64,
    /// Topical communities of committed and casual users.
    pub communities: usize,
    pub topics_per_community: CountRange,
    pub items_per_community: usize,
    /// Users annotating enough to survive the population filters.
    pub committed_users: usize,
    pub committed_items: CountRange,
    pub committed_vocabulary: CountRange,
    /// Community members with too few items to survive the filters.
    pub casual_users: usize,
    pub casual_items: CountRange,
    /// Drive-by users with generic tags on many items.
    pub heavy_noise_users: usize,
    pub heavy_noise_items: CountRange,
    /// Drive-by users with generic tags on few items.
    pub light_noise_users: usize,
    pub light_noise_items: CountRange,
    pub noise_vocabulary: CountRange,
    pub noise_tags_per_item: CountRange,
    /// Isolated groups annotating a private item pool with a private topic.
    pub isolated_groups: usize,
    pub users_per_isolated_group: usize,
    pub items_per_isolated_group: usize,
    pub isolated_items: CountRange,
    pub isolated_vocabulary: CountRange,
    /// How many times isolated items are duplicated in the drive-by users'
    /// sampling pool, so private pools still attract enough annotators to
    /// clear the population filters.
    pub isolated_noise_boost: usize,
    /// Distinct tags a community or isolated user puts on one item.
    pub tags_per_item: CountRange,
    /// Fraction of a community user's items drawn from their primary topic.
    pub primary_topic_share: f64,
    /// Fraction of a community user's vocabulary drawn from their primary
    /// topic.
    pub primary_vocabulary_share: f64,
    /// Probability that one tag slot prefers tags matching the item's topic.
    pub on_topic_tag_share: f64,
    /// Probability of adding one generic tag to a community user's item.
    pub generic_aside_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            specialist_topics: 36,
            tags_per_topic: CountRange::new(68, 92),
            generic_tags: 30,
            vocabulary_skew: 0.5,
            communities: 32,
            topics_per_community: CountRange::new(3, 4),
            items_per_community: 34,
            committed_users: 420,
            committed_items: CountRange::new(26, 34),
            committed_vocabulary: CountRange::new(16, 26),
            casual_users: 380,
            casual_items: CountRange::new(14, 22),
            heavy_noise_users: 120,
            heavy_noise_items: CountRange::new(32, 46),
            light_noise_users: 180,
            light_noise_items: CountRange::new(8, 16),
            noise_vocabulary: CountRange::new(2, 4),
            noise_tags_per_item: CountRange::new(1, 2),
            isolated_groups: 3,
            users_per_isolated_group: 12,
            items_per_isolated_group: 24,
            isolated_items: CountRange::new(22, 24),
            isolated_vocabulary: CountRange::new(10, 16),
            isolated_noise_boost: 3,
            tags_per_item: CountRange::new(4, 6),
            primary_topic_share: 0.7,
            primary_vocabulary_share: 0.75,
            on_topic_tag_share: 0.65,
            generic_aside_rate: 0.12,
        }
    }
}

/// The two generated artifacts, ready to be written to disk or parsed
/// directly.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    /// `article|user|timestamp|tag` lines.
    pub annotations: String,
    /// Sectioned taxonomy text: concepts, IS-A edges, tag mappings.
    pub taxonomy: String,
}

/// One topic subtree: its tags (one per concept) in concept order.
struct Topic {
    tags: Vec<String>,
}

/// Draws Zipf-ranked elements from a fixed pool ordering.
struct SkewedPool<'a> {
    pool: &'a [String],
    zipf: Zipf<f64>,
}

impl<'a> SkewedPool<'a> {
    fn new(pool: &'a [String], skew: f64) -> SkewedPool<'a> {
        assert!(!pool.is_empty(), "cannot draw from an empty pool");
        SkewedPool {
            pool,
            zipf: Zipf::new(pool.len() as u64, skew).expect("pool length and skew are positive"),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> &'a str {
        let rank = self.zipf.sample(rng) as usize;
        &self.pool[rank - 1]
    }

    /// Distinct draws; falls back to the pool prefix when the pool is close
    /// to exhausted so the loop always terminates.
    fn draw_distinct(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<&'a str> {
        let n = n.min(self.pool.len());
        let mut out: Vec<&'a str> = Vec::with_capacity(n);
        let mut attempts = 0;
        while out.len() < n {
            let tag = self.draw(rng);
            if !out.contains(&tag) {
                out.push(tag);
            }
            attempts += 1;
            if attempts > 64 * n {
                for tag in self.pool {
                    if out.len() == n {
                        break;
                    }
                    if !out.contains(&tag.as_str()) {
                        out.push(tag);
                    }
                }
            }
        }
        out
    }
}

/// Generates the taxonomy and annotation stream for one configuration.
pub fn generate(config: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut taxonomy = String::new();
    let mut concepts: Vec<(String, u64)> = vec![("root".to_string(), 1)];
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut mappings: Vec<(String, String)> = Vec::new();

    // One random subtree per topic, one tag per concept. Specialist and
    // isolated concepts carry small frequency counts (specific, high
    // information content); generic concepts carry large ones.
    let mut build_topic =
        |prefix: &str, count: usize, freq: CountRange, rng: &mut ChaCha8Rng| -> Topic {
            let mut tags = Vec::with_capacity(count);
            for i in 0..count {
                let concept = format!("{prefix}_c{i:03}");
                concepts.push((concept.clone(), freq.pick(rng) as u64));
                if i == 0 {
                    edges.push((concept.clone(), "root".to_string()));
                } else {
                    let parent = rng.gen_range(0..i);
                    edges.push((concept.clone(), format!("{prefix}_c{parent:03}")));
                }
                let tag = format!("{prefix}.t{i:03}");
                mappings.push((tag.clone(), concept));
                tags.push(tag);
            }
            Topic { tags }
        };

    let specialist: Vec<Topic> = (0..config.specialist_topics)
        .map(|t| {
            let count = config.tags_per_topic.pick(&mut rng);
            build_topic(&format!("s{t:02}"), count, CountRange::new(1, 8), &mut rng)
        })
        .collect();
    let isolated: Vec<Topic> = (0..config.isolated_groups)
        .map(|g| {
            let count = config.tags_per_topic.pick(&mut rng);
            build_topic(&format!("x{g}"), count, CountRange::new(1, 8), &mut rng)
        })
        .collect();
    let generic = build_topic("g", config.generic_tags, CountRange::new(50, 200), &mut rng);

    writeln!(taxonomy, "[concepts]").unwrap();
    for (concept, freq) in &concepts {
        writeln!(taxonomy, "{concept} {freq}").unwrap();
    }
    writeln!(taxonomy, "[edges]").unwrap();
    for (child, parent) in &edges {
        writeln!(taxonomy, "{child} {parent}").unwrap();
    }
    writeln!(taxonomy, "[mappings]").unwrap();
    for (tag, concept) in &mappings {
        writeln!(taxonomy, "{tag} {concept}").unwrap();
    }

    // Communities: a topic selection, an item pool with one topic per item,
    // and a community-specific vocabulary order shared by all members.
    struct Community {
        topic_ids: Vec<usize>,
        /// Tag pool of the community, shuffled once so every member shares
        /// the same skewed head.
        vocabulary: Vec<String>,
        /// Items grouped by the community topic they belong to.
        items_by_topic: Vec<Vec<String>>,
    }

    // Topics are dealt from a reshuffling deck so every topic is adopted by
    // at least one community (orphaned topics would leave dead vocabulary).
    let mut deck: Vec<usize> = (0..config.specialist_topics).collect();
    deck.shuffle(&mut rng);
    let mut dealt = 0;
    let mut communities: Vec<Community> = Vec::with_capacity(config.communities);
    for c in 0..config.communities {
        let k = config.topics_per_community.pick(&mut rng);
        let mut topic_ids: Vec<usize> = Vec::with_capacity(k);
        while topic_ids.len() < k {
            if dealt == deck.len() {
                deck.shuffle(&mut rng);
                dealt = 0;
            }
            let topic = deck[dealt];
            dealt += 1;
            if !topic_ids.contains(&topic) {
                topic_ids.push(topic);
            }
        }
        let mut vocabulary: Vec<String> = topic_ids
            .iter()
            .flat_map(|&t| specialist[t].tags.iter().cloned())
            .collect();
        vocabulary.shuffle(&mut rng);
        let mut items_by_topic: Vec<Vec<String>> = vec![Vec::new(); k];
        for j in 0..config.items_per_community {
            let topic = rng.gen_range(0..k);
            items_by_topic[topic].push(format!("a{c:02}-{j:02}"));
        }
        // An empty topic bucket would leave a primary user with no items.
        for topic in 0..k {
            if items_by_topic[topic].is_empty() {
                let donor = (0..k).find(|&t| items_by_topic[t].len() > 1).unwrap();
                let moved = items_by_topic[donor].pop().unwrap();
                items_by_topic[topic].push(moved);
            }
        }
        communities.push(Community {
            topic_ids,
            vocabulary,
            items_by_topic,
        });
    }

    let all_items: Vec<String> = communities
        .iter()
        .flat_map(|c| c.items_by_topic.iter().flatten().cloned())
        .chain((0..config.isolated_groups).flat_map(|g| {
            (0..config.items_per_isolated_group).map(move |j| format!("z{g}-{j:02}"))
        }))
        .collect();

    let mut posts: Vec<(String, String, String)> = Vec::new();

    // Community members, committed and casual alike: a primary topic, a
    // vocabulary skewed toward it, and items drawn mostly from it.
    let mut emit_member = |user: String, community: usize, items: usize, rng: &mut ChaCha8Rng| {
        let community = &communities[community];
        let vocab_size = config.committed_vocabulary.pick(rng);
        let primary = rng.gen_range(0..community.topic_ids.len());
        // Personal shuffle: members of one topic favor different corners of
        // its vocabulary, so usage spreads across the whole pool.
        let mut primary_tags: Vec<String> = specialist[community.topic_ids[primary]].tags.clone();
        primary_tags.shuffle(rng);
        let primary_pool = SkewedPool::new(&primary_tags, config.vocabulary_skew);
        let community_pool = SkewedPool::new(&community.vocabulary, config.vocabulary_skew);
        let primary_share = (vocab_size as f64 * config.primary_vocabulary_share).round() as usize;
        let mut vocabulary: Vec<&str> = primary_pool.draw_distinct(rng, primary_share);
        for tag in community_pool.draw_distinct(rng, vocab_size) {
            if vocabulary.len() >= vocab_size {
                break;
            }
            if !vocabulary.contains(&tag) {
                vocabulary.push(tag);
            }
        }
        // Vocabulary split by community topic, for on-topic tagging; tag
        // names carry their topic prefix.
        let by_topic: Vec<Vec<&str>> = community
            .topic_ids
            .iter()
            .map(|&t| {
                let prefix = format!("s{t:02}.");
                vocabulary
                    .iter()
                    .copied()
                    .filter(|tag| tag.starts_with(&prefix))
                    .collect()
            })
            .collect();

        let primary_items =
            ((items as f64 * config.primary_topic_share).round() as usize).min(items);
        let mut chosen: Vec<(usize, &String)> = Vec::new();
        for item in community.items_by_topic[primary].choose_multiple(rng, primary_items) {
            chosen.push((primary, item));
        }
        let others: Vec<(usize, &String)> = community
            .items_by_topic
            .iter()
            .enumerate()
            .filter(|&(t, _)| t != primary)
            .flat_map(|(t, pool)| pool.iter().map(move |i| (t, i)))
            .collect();
        for &(topic, item) in others.choose_multiple(rng, items.saturating_sub(chosen.len())) {
            chosen.push((topic, item));
        }

        let generic_pool = SkewedPool::new(&generic.tags, config.vocabulary_skew);
        for (topic, item) in chosen {
            let slots = config.tags_per_item.pick(rng);
            for _ in 0..slots {
                let on_topic =
                    !by_topic[topic].is_empty() && rng.gen_bool(config.on_topic_tag_share);
                let tag = if on_topic {
                    by_topic[topic][rng.gen_range(0..by_topic[topic].len())]
                } else {
                    vocabulary[rng.gen_range(0..vocabulary.len())]
                };
                posts.push((item.clone(), user.clone(), tag.to_string()));
            }
            if rng.gen_bool(config.generic_aside_rate) {
                posts.push((
                    item.clone(),
                    user.clone(),
                    generic_pool.draw(rng).to_string(),
                ));
            }
        }
    };

    for u in 0..config.committed_users {
        let items = config.committed_items.pick(&mut rng);
        emit_member(format!("s{u:04}"), u % config.communities, items, &mut rng);
    }
    for u in 0..config.casual_users {
        let items = config.casual_items.pick(&mut rng);
        emit_member(format!("c{u:04}"), u % config.communities, items, &mut rng);
    }

    // Drive-by users: a couple of generic tags sprayed across the whole
    // item space. Isolated items are oversampled so private pools still
    // reach the annotator floor of the population filters.
    let mut noise_items: Vec<&String> = all_items.iter().collect();
    for _ in 1..config.isolated_noise_boost.max(1) {
        noise_items.extend(all_items.iter().filter(|i| i.starts_with('z')));
    }
    let generic_pool = SkewedPool::new(&generic.tags, config.vocabulary_skew);
    let mut emit_noise = |user: String, items: usize, rng: &mut ChaCha8Rng| {
        let vocab_size = config.noise_vocabulary.pick(rng);
        let vocabulary = generic_pool.draw_distinct(rng, vocab_size);
        for &item in noise_items.choose_multiple(rng, items) {
            for _ in 0..config.noise_tags_per_item.pick(rng) {
                let tag = vocabulary[rng.gen_range(0..vocabulary.len())];
                posts.push((item.clone(), user.clone(), tag.to_string()));
            }
        }
    };
    for u in 0..config.heavy_noise_users {
        let items = config.heavy_noise_items.pick(&mut rng);
        emit_noise(format!("n{u:04}"), items, &mut rng);
    }
    for u in 0..config.light_noise_users {
        let items = config.light_noise_items.pick(&mut rng);
        emit_noise(format!("o{u:04}"), items, &mut rng);
    }

    // Isolated groups: private topic, private items, no generic tags, so
    // their profiles share nothing with the rest of the population.
    for (g, group) in isolated.iter().enumerate() {
        let group_items: Vec<String> = (0..config.items_per_isolated_group)
            .map(|j| format!("z{g}-{j:02}"))
            .collect();
        for m in 0..config.users_per_isolated_group {
            let user = format!("h{g}-{m:02}");
            let mut member_tags = group.tags.clone();
            member_tags.shuffle(&mut rng);
            let pool = SkewedPool::new(&member_tags, config.vocabulary_skew);
            let vocab_size = config.isolated_vocabulary.pick(&mut rng);
            let vocabulary: Vec<String> = pool
                .draw_distinct(&mut rng, vocab_size)
                .into_iter()
                .map(str::to_string)
                .collect();
            let items = config.isolated_items.pick(&mut rng).min(group_items.len());
            for item in group_items.choose_multiple(&mut rng, items) {
                for _ in 0..config.tags_per_item.pick(&mut rng) {
                    let tag = &vocabulary[rng.gen_range(0..vocabulary.len())];
                    posts.push((item.clone(), user.clone(), tag.clone()));
                }
            }
        }
    }

    let mut annotations = String::new();
    for (line, (article, user, tag)) in posts.iter().enumerate() {
        writeln!(
            annotations,
            "{article}|{user}|{}|{tag}",
            1_300_000_000 + line as u64
        )
        .unwrap();
    }

    SynthCorpus {
        annotations,
        taxonomy,
    }
}
