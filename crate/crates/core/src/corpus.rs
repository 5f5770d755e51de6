//! Annotation parsing and folksonomy construction.
//!
//! An annotation stream is a line-per-post text file (CiteULike `who` style):
//! delimited fields carrying an article id, a user id, a timestamp and one
//! tag. Posts are binary: the folksonomy keeps each distinct
//! `(user, tag, item)` triple once, no matter how often it appears in the
//! input. Population filters, user sampling and fold splitting all return new
//! folksonomies or plans and never mutate their input, so every pipeline
//! stage stays replayable from its arguments.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// One well-formed annotation line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub article: String,
    pub user: String,
    /// Seconds since epoch. Retained for completeness, unused downstream.
    pub timestamp: i64,
    /// Normalized: Unicode-lowercased and trimmed.
    pub tag: String,
}

/// Field layout of the annotation input.
///
/// `article`, `user`, `timestamp` and `tag` are zero-based positions in the
/// delimited line; extra fields are ignored. The default matches
/// `article|user|timestamp|tag`.
#[derive(Debug, Clone)]
pub struct InputFormat {
    pub delimiter: char,
    pub article: usize,
    pub user: usize,
    pub timestamp: usize,
    pub tag: usize,
    /// Parsing fails once more than this fraction of non-empty lines is
    /// malformed.
    pub max_malformed_fraction: f64,
}

impl Default for InputFormat {
    fn default() -> Self {
        InputFormat {
            delimiter: '|',
            article: 0,
            user: 1,
            timestamp: 2,
            tag: 3,
            max_malformed_fraction: 0.1,
        }
    }
}

impl InputFormat {
    fn validate(&self) -> Result<()> {
        let mut positions = [self.article, self.user, self.timestamp, self.tag];
        positions.sort_unstable();
        if positions.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(
                "field positions must be distinct".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.max_malformed_fraction) {
            return Err(Error::InvalidArgument(
                "max_malformed_fraction must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn width(&self) -> usize {
        *[self.article, self.user, self.timestamp, self.tag]
            .iter()
            .max()
            .unwrap()
            + 1
    }
}

/// Lowercases (Unicode-aware) and trims a raw tag token.
pub fn normalize_tag(raw: &str) -> String {
    raw.trim().to_lowercase()
}

/// Parse result: surviving records plus the count of skipped lines.
#[derive(Debug)]
pub struct ParsedAnnotations {
    pub records: Vec<AnnotationRecord>,
    pub malformed_lines: usize,
}

/// Reads an annotation stream line by line.
///
/// Malformed lines (too few fields, empty ids, empty tag after
/// normalization, non-integer timestamp) are counted and skipped; the whole
/// parse fails when their share of non-empty lines exceeds
/// `format.max_malformed_fraction`. Blank lines are ignored entirely.
pub fn parse_annotations<R: BufRead>(reader: R, format: &InputFormat) -> Result<ParsedAnnotations> {
    format.validate()?;
    let width = format.width();
    let mut records = Vec::new();
    let mut malformed = 0usize;
    let mut seen = 0usize;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        seen += 1;
        let fields: Vec<&str> = line.split(format.delimiter).collect();
        if fields.len() < width {
            malformed += 1;
            continue;
        }
        let article = fields[format.article].trim();
        let user = fields[format.user].trim();
        let tag = normalize_tag(fields[format.tag]);
        let timestamp: Option<i64> = fields[format.timestamp].trim().parse().ok();
        match timestamp {
            Some(timestamp) if !article.is_empty() && !user.is_empty() && !tag.is_empty() => {
                records.push(AnnotationRecord {
                    article: article.to_string(),
                    user: user.to_string(),
                    timestamp,
                    tag,
                });
            }
            _ => malformed += 1,
        }
    }
    if seen > 0 && malformed as f64 > format.max_malformed_fraction * seen as f64 {
        return Err(Error::AnnotationFormat(format!(
            "{malformed} of {seen} lines malformed, above the allowed fraction {}",
            format.max_malformed_fraction
        )));
    }
    Ok(ParsedAnnotations {
        records,
        malformed_lines: malformed,
    })
}

/// One binary post: indices into the folksonomy's user, tag and item lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Post {
    pub user: u32,
    pub item: u32,
    pub tag: u32,
}

/// Tripartite user-item-tag structure with distinct binary posts.
///
/// Users, items and tags are kept sorted lexicographically; posts are kept
/// sorted by `(user, item, tag)` index so per-user and per-(user, item) runs
/// are contiguous. All derived views (annotator lists, vocabularies) are
/// precomputed at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Folksonomy {
    users: Vec<String>,
    items: Vec<String>,
    tags: Vec<String>,
    posts: Vec<Post>,
    /// posts[user_offsets[u]..user_offsets[u+1]] are user u's posts.
    user_offsets: Vec<usize>,
    /// Distinct annotators per item, ascending user index.
    item_annotators: Vec<Vec<u32>>,
    /// Distinct items per user, ascending item index.
    user_items: Vec<Vec<u32>>,
    /// Distinct tags per user, ascending tag index.
    user_tags: Vec<Vec<u32>>,
    /// Post count per tag.
    tag_uses: Vec<u32>,
}

/// Builds a folksonomy from parsed records, collapsing duplicate triples.
pub fn build_folksonomy(records: &[AnnotationRecord]) -> Folksonomy {
    Folksonomy::from_triples(
        records
            .iter()
            .map(|r| (r.user.as_str(), r.tag.as_str(), r.article.as_str())),
    )
}

fn intern(names: &mut Vec<String>, index: &mut HashMap<String, u32>, name: &str) -> u32 {
    if let Some(&id) = index.get(name) {
        return id;
    }
    let id = names.len() as u32;
    names.push(name.to_string());
    index.insert(name.to_string(), id);
    id
}

impl Folksonomy {
    /// Builds from raw `(user, tag, item)` string triples.
    pub fn from_triples<'a, I>(triples: I) -> Folksonomy
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    {
        let mut users = Vec::new();
        let mut items = Vec::new();
        let mut tags = Vec::new();
        let (mut ui, mut ii, mut ti) = (HashMap::new(), HashMap::new(), HashMap::new());
        let mut posts = Vec::new();
        for (user, tag, item) in triples {
            posts.push(Post {
                user: intern(&mut users, &mut ui, user),
                item: intern(&mut items, &mut ii, item),
                tag: intern(&mut tags, &mut ti, tag),
            });
        }
        Self::assemble(users, items, tags, posts)
    }

    /// Canonicalizes entity order, remaps posts, sorts and dedupes, then
    /// builds the derived views.
    fn assemble(
        users: Vec<String>,
        items: Vec<String>,
        tags: Vec<String>,
        posts: Vec<Post>,
    ) -> Folksonomy {
        let sort_map = |names: Vec<String>| {
            let mut order: Vec<u32> = (0..names.len() as u32).collect();
            order.sort_by(|&a, &b| names[a as usize].cmp(&names[b as usize]));
            let mut remap = vec![0u32; names.len()];
            for (new, &old) in order.iter().enumerate() {
                remap[old as usize] = new as u32;
            }
            let mut sorted: Vec<String> = names.clone();
            sorted.sort();
            (sorted, remap)
        };
        let (users, umap) = sort_map(users);
        let (items, imap) = sort_map(items);
        let (tags, tmap) = sort_map(tags);
        let mut posts: Vec<Post> = posts
            .into_iter()
            .map(|p| Post {
                user: umap[p.user as usize],
                item: imap[p.item as usize],
                tag: tmap[p.tag as usize],
            })
            .collect();
        posts.sort_unstable();
        posts.dedup();

        let mut user_offsets = vec![0usize; users.len() + 1];
        for p in &posts {
            user_offsets[p.user as usize + 1] += 1;
        }
        for u in 0..users.len() {
            user_offsets[u + 1] += user_offsets[u];
        }
        let mut item_annotators = vec![Vec::new(); items.len()];
        let mut user_items = vec![Vec::new(); users.len()];
        let mut user_tags = vec![Vec::new(); users.len()];
        let mut tag_uses = vec![0u32; tags.len()];
        for p in &posts {
            let (u, i, t) = (p.user as usize, p.item as usize, p.tag as usize);
            if item_annotators[i].last() != Some(&p.user) {
                item_annotators[i].push(p.user);
            }
            if user_items[u].last() != Some(&p.item) {
                user_items[u].push(p.item);
            }
            user_tags[u].push(p.tag);
            tag_uses[t] += 1;
        }
        for list in &mut item_annotators {
            list.sort_unstable();
            list.dedup();
        }
        for list in &mut user_tags {
            list.sort_unstable();
            list.dedup();
        }
        Folksonomy {
            users,
            items,
            tags,
            posts,
            user_offsets,
            item_annotators,
            user_items,
            user_tags,
            tag_uses,
        }
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }
    pub fn item_count(&self) -> usize {
        self.items.len()
    }
    pub fn tag_count(&self) -> usize {
        self.tags.len()
    }
    /// Number of distinct posts (transactions).
    pub fn post_count(&self) -> usize {
        self.posts.len()
    }
    pub fn users(&self) -> &[String] {
        &self.users
    }
    pub fn items(&self) -> &[String] {
        &self.items
    }
    pub fn tags(&self) -> &[String] {
        &self.tags
    }
    pub fn posts(&self) -> &[Post] {
        &self.posts
    }
    pub fn user_index(&self, name: &str) -> Option<usize> {
        self.users.binary_search_by(|u| u.as_str().cmp(name)).ok()
    }
    pub fn item_index(&self, name: &str) -> Option<usize> {
        self.items.binary_search_by(|i| i.as_str().cmp(name)).ok()
    }
    pub fn tag_index(&self, name: &str) -> Option<usize> {
        self.tags.binary_search_by(|t| t.as_str().cmp(name)).ok()
    }

    /// Posts of one user, sorted by (item, tag).
    pub fn user_posts(&self, user: usize) -> &[Post] {
        &self.posts[self.user_offsets[user]..self.user_offsets[user + 1]]
    }
    /// Distinct annotators of an item, ascending user index.
    pub fn item_annotators(&self, item: usize) -> &[u32] {
        &self.item_annotators[item]
    }
    /// Distinct items of a user, ascending item index.
    pub fn user_items(&self, user: usize) -> &[u32] {
        &self.user_items[user]
    }
    /// Distinct tag vocabulary of a user, ascending tag index.
    pub fn user_tags(&self, user: usize) -> &[u32] {
        &self.user_tags[user]
    }
    /// Number of posts carrying the tag.
    pub fn tag_uses(&self, tag: usize) -> u32 {
        self.tag_uses[tag]
    }

    /// New folksonomy containing only the posts of the given users.
    /// Entities without remaining posts are dropped.
    pub fn restrict_to_users(&self, keep: &[usize]) -> Folksonomy {
        let mut mask = vec![false; self.users.len()];
        for &u in keep {
            mask[u] = true;
        }
        self.retain_posts(|p| mask[p.user as usize])
    }

    fn retain_posts<F: Fn(&Post) -> bool>(&self, pred: F) -> Folksonomy {
        Folksonomy::from_triples(self.posts.iter().filter(|p| pred(p)).map(|p| {
            (
                self.users[p.user as usize].as_str(),
                self.tags[p.tag as usize].as_str(),
                self.items[p.item as usize].as_str(),
            )
        }))
    }

    /// Applies the population filters in a fixed single pass:
    /// items by annotator count, then tags by use count, then users by item
    /// count. No fixpoint iteration; counts for each pass reflect the output
    /// of the previous pass.
    pub fn apply_filters(&self, config: &FilterConfig) -> Result<Folksonomy> {
        config.validate()?;
        let keep_item: Vec<bool> = self
            .item_annotators
            .iter()
            .map(|a| {
                let n = a.len() as u32;
                n >= config.min_item_annotators && n <= config.max_item_annotators
            })
            .collect();
        let after_items: Vec<&Post> = self
            .posts
            .iter()
            .filter(|p| keep_item[p.item as usize])
            .collect();

        let mut tag_uses = vec![0u32; self.tags.len()];
        for p in &after_items {
            tag_uses[p.tag as usize] += 1;
        }
        let after_tags: Vec<&Post> = after_items
            .into_iter()
            .filter(|p| tag_uses[p.tag as usize] >= config.min_tag_uses)
            .collect();

        let mut user_items: Vec<Vec<u32>> = vec![Vec::new(); self.users.len()];
        for p in &after_tags {
            let list = &mut user_items[p.user as usize];
            if list.last() != Some(&p.item) {
                list.push(p.item);
            }
        }
        let keep_user: Vec<bool> = user_items
            .iter_mut()
            .map(|list| {
                list.sort_unstable();
                list.dedup();
                list.len() as u32 >= config.min_user_items
            })
            .collect();

        Ok(Folksonomy::from_triples(
            after_tags
                .into_iter()
                .filter(|p| keep_user[p.user as usize])
                .map(|p| {
                    (
                        self.users[p.user as usize].as_str(),
                        self.tags[p.tag as usize].as_str(),
                        self.items[p.item as usize].as_str(),
                    )
                }),
        ))
    }

    /// Keeps a uniform random subset of `n` users (all their posts), chosen
    /// by a partial Fisher-Yates pass over the sorted user list with a
    /// ChaCha8 generator seeded by `seed`. `n >= user_count` is an identity.
    pub fn sample_users(&self, n: usize, seed: u64) -> Folksonomy {
        if n >= self.users.len() {
            return self.clone();
        }
        let picked = sample_indices(self.users.len(), n, seed);
        self.restrict_to_users(&picked)
    }

    /// Splits users into `k` balanced folds: the sorted user list is
    /// shuffled (Fisher-Yates, ChaCha8 seeded by `seed`) and dealt round
    /// robin, so fold sizes differ by at most one.
    pub fn split_folds(&self, k: usize, seed: u64) -> Result<FoldPlan> {
        if k == 0 || k > self.users.len() {
            return Err(Error::InvalidArgument(format!(
                "fold count {k} must lie in 1..={}",
                self.users.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.users.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut fold_of = vec![0u32; self.users.len()];
        for (pos, &user) in order.iter().enumerate() {
            fold_of[user] = (pos % k) as u32;
        }
        Ok(FoldPlan { k, fold_of })
    }

    /// Writes the canonical snapshot: entity lists in index order followed by
    /// `(user, item, tag)` index triples. Output bytes are a pure function of
    /// the folksonomy.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#folksonomy v1")?;
        writeln!(
            w,
            "#counts users={} items={} tags={} posts={}",
            self.users.len(),
            self.items.len(),
            self.tags.len(),
            self.posts.len()
        )?;
        for u in &self.users {
            writeln!(w, "U {u}")?;
        }
        for i in &self.items {
            writeln!(w, "I {i}")?;
        }
        for t in &self.tags {
            writeln!(w, "T {t}")?;
        }
        for p in &self.posts {
            writeln!(w, "P {} {} {}", p.user, p.item, p.tag)?;
        }
        Ok(())
    }

    /// Reads a snapshot produced by [`Folksonomy::write_snapshot`].
    pub fn read_snapshot<R: BufRead>(reader: R) -> Result<Folksonomy> {
        let mut lines = reader.lines();
        match lines.next() {
            Some(Ok(header)) if header == "#folksonomy v1" => {}
            _ => {
                return Err(Error::SnapshotFormat(
                    "missing '#folksonomy v1' header".into(),
                ))
            }
        }
        let mut users = Vec::new();
        let mut items = Vec::new();
        let mut tags = Vec::new();
        let mut posts = Vec::new();
        for (no, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (kind, rest) = line.split_at(1);
            let rest = rest.strip_prefix(' ').ok_or_else(|| {
                Error::SnapshotFormat(format!("line {}: missing separator", no + 2))
            })?;
            match kind {
                "U" => users.push(rest.to_string()),
                "I" => items.push(rest.to_string()),
                "T" => tags.push(rest.to_string()),
                "P" => {
                    let mut fields = rest.split(' ');
                    let mut next = |what: &str| -> Result<u32> {
                        fields.next().and_then(|f| f.parse().ok()).ok_or_else(|| {
                            Error::SnapshotFormat(format!("line {}: bad {what} index", no + 2))
                        })
                    };
                    let (u, i, t) = (next("user")?, next("item")?, next("tag")?);
                    posts.push(Post {
                        user: u,
                        item: i,
                        tag: t,
                    });
                }
                other => {
                    return Err(Error::SnapshotFormat(format!(
                        "line {}: unknown record kind {other:?}",
                        no + 2
                    )))
                }
            }
        }
        for p in &posts {
            if p.user as usize >= users.len()
                || p.item as usize >= items.len()
                || p.tag as usize >= tags.len()
            {
                return Err(Error::SnapshotFormat(format!(
                    "post ({}, {}, {}) references a missing id",
                    p.user, p.item, p.tag
                )));
            }
        }
        Ok(Folksonomy::assemble(users, items, tags, posts))
    }
}

/// Partial Fisher-Yates selection of `n` out of `0..len`, sorted ascending.
fn sample_indices(len: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        let j = rng.gen_range(i..len);
        order.swap(i, j);
    }
    let mut picked = order[..n].to_vec();
    picked.sort_unstable();
    picked
}

/// Population thresholds applied by [`Folksonomy::apply_filters`], plus the
/// sampling knobs the pipeline pairs them with.
#[derive(Debug, Clone)]
pub struct FilterConfig {
    /// Keep items annotated by at least this many distinct users.
    pub min_item_annotators: u32,
    /// Keep items annotated by at most this many distinct users.
    pub max_item_annotators: u32,
    /// Keep tags carried by at least this many posts.
    pub min_tag_uses: u32,
    /// Keep users who annotated at least this many distinct items.
    pub min_user_items: u32,
    /// User sample drawn before (default) or after filtering.
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_item_annotators: 15,
            max_item_annotators: 75,
            min_tag_uses: 10,
            min_user_items: 20,
            sample_size: 1000,
            seed: 42,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_item_annotators == 0
            || self.max_item_annotators == 0
            || self.min_tag_uses == 0
            || self.min_user_items == 0
            || self.sample_size == 0
        {
            return Err(Error::InvalidArgument(
                "filter thresholds and sample size must be at least 1".into(),
            ));
        }
        if self.min_item_annotators > self.max_item_annotators {
            return Err(Error::InvalidArgument(format!(
                "min_item_annotators {} exceeds max_item_annotators {}",
                self.min_item_annotators, self.max_item_annotators
            )));
        }
        Ok(())
    }
}

/// Assignment of every user to exactly one fold.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    k: usize,
    fold_of: Vec<u32>,
}

impl FoldPlan {
    pub fn fold_count(&self) -> usize {
        self.k
    }
    pub fn fold_of(&self, user: usize) -> usize {
        self.fold_of[user] as usize
    }
    /// User indices of one fold, ascending.
    pub fn fold_users(&self, fold: usize) -> Vec<usize> {
        self.fold_of
            .iter()
            .enumerate()
            .filter(|(_, &f)| f as usize == fold)
            .map(|(u, _)| u)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use std::io::Cursor;

    fn parse(text: &str) -> ParsedAnnotations {
        parse_annotations(Cursor::new(text), &InputFormat::default()).unwrap()
    }

    #[test]
    fn parses_pipe_delimited_line() {
        let parsed = parse("42|u7|1230000000|bayes\n");
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.malformed_lines, 0);
        let r = &parsed.records[0];
        assert_eq!(
            (
                r.article.as_str(),
                r.user.as_str(),
                r.timestamp,
                r.tag.as_str()
            ),
            ("42", "u7", 1230000000, "bayes")
        );
    }

    #[test]
    fn normalizes_tags_to_lowercase_and_trims() {
        assert_eq!(normalize_tag(" Bayes "), "bayes");
        assert_eq!(normalize_tag("ÉCOLE"), "école");
        let parsed = parse("42|u7|1| Bayes \n");
        assert_eq!(parsed.records[0].tag, "bayes");
    }

    #[test]
    fn empty_input_yields_empty_list() {
        let parsed = parse("");
        assert!(parsed.records.is_empty());
        assert_eq!(parsed.malformed_lines, 0);
    }

    #[test]
    fn counts_malformed_lines_and_keeps_good_ones() {
        let format = InputFormat {
            max_malformed_fraction: 0.5,
            ..InputFormat::default()
        };
        let parsed = parse_annotations(
            Cursor::new("42|u7|1|a\nbroken line\n43|u7|notatime|b\n44|u8|2|c\n"),
            &format,
        )
        .unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.malformed_lines, 2);
    }

    #[test]
    fn fails_when_malformed_fraction_exceeded() {
        let err = parse_annotations(
            Cursor::new("junk\nmore junk\n42|u7|1|a\n"),
            &InputFormat::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::AnnotationFormat(_)));
    }

    #[test]
    fn custom_field_order_and_delimiter() {
        let format = InputFormat {
            delimiter: ';',
            tag: 0,
            user: 1,
            article: 2,
            timestamp: 3,
            ..InputFormat::default()
        };
        let parsed = parse_annotations(Cursor::new("ml;u1;doc9;77\n"), &format).unwrap();
        let r = &parsed.records[0];
        assert_eq!(
            (
                r.article.as_str(),
                r.user.as_str(),
                r.timestamp,
                r.tag.as_str()
            ),
            ("doc9", "u1", 77, "ml")
        );
    }

    #[test]
    fn rejects_overlapping_field_positions() {
        let format = InputFormat {
            user: 0,
            ..InputFormat::default()
        };
        assert!(parse_annotations(Cursor::new(""), &format).is_err());
    }

    fn toy(triples: &[(&str, &str, &str)]) -> Folksonomy {
        Folksonomy::from_triples(triples.iter().copied())
    }

    #[test]
    fn duplicate_triples_collapse_to_one_post() {
        let f = toy(&[("u1", "t1", "i1"), ("u1", "t1", "i1"), ("u1", "t2", "i1")]);
        assert_eq!(f.post_count(), 2);
        assert_eq!(f.user_count(), 1);
        assert_eq!(f.item_count(), 1);
        assert_eq!(f.tag_count(), 2);
    }

    #[test]
    fn projections_match_posts() {
        let f = toy(&[
            ("u2", "t1", "i1"),
            ("u1", "t2", "i2"),
            ("u1", "t1", "i1"),
            ("u2", "t3", "i2"),
        ]);
        let u1 = f.user_index("u1").unwrap();
        let i1 = f.item_index("i1").unwrap();
        let tags_of_u1: Vec<&str> = f
            .user_tags(u1)
            .iter()
            .map(|&t| f.tags()[t as usize].as_str())
            .collect();
        assert_eq!(tags_of_u1, ["t1", "t2"]);
        let annotators: Vec<&str> = f
            .item_annotators(i1)
            .iter()
            .map(|&u| f.users()[u as usize].as_str())
            .collect();
        assert_eq!(annotators, ["u1", "u2"]);
        let items_of_u1: Vec<&str> = f
            .user_items(u1)
            .iter()
            .map(|&i| f.items()[i as usize].as_str())
            .collect();
        assert_eq!(items_of_u1, ["i1", "i2"]);
    }

    /// Filter oracle used by the boundary tests: an item with one annotator
    /// fewer than the minimum disappears together with its posts.
    #[test]
    fn item_below_min_annotators_is_removed() {
        let mut triples = Vec::new();
        for u in 0..14 {
            triples.push((format!("u{u:02}"), "t".to_string(), "small".to_string()));
        }
        for u in 0..15 {
            triples.push((format!("u{u:02}"), "t".to_string(), "big".to_string()));
        }
        let f = Folksonomy::from_triples(
            triples
                .iter()
                .map(|(u, t, i)| (u.as_str(), t.as_str(), i.as_str())),
        );
        let config = FilterConfig {
            min_item_annotators: 15,
            max_item_annotators: 75,
            min_tag_uses: 1,
            min_user_items: 1,
            ..FilterConfig::default()
        };
        let filtered = f.apply_filters(&config).unwrap();
        assert_eq!(filtered.item_count(), 1);
        assert_eq!(filtered.items()[0], "big");
        assert_eq!(filtered.user_count(), 15);
    }

    #[test]
    fn max_annotator_bound_is_inclusive() {
        let mut triples = Vec::new();
        for u in 0..3 {
            triples.push((format!("u{u}"), "t".to_string(), "at-max".to_string()));
        }
        for u in 0..4 {
            triples.push((format!("u{u}"), "t".to_string(), "above".to_string()));
        }
        let f = Folksonomy::from_triples(
            triples
                .iter()
                .map(|(u, t, i)| (u.as_str(), t.as_str(), i.as_str())),
        );
        let config = FilterConfig {
            min_item_annotators: 1,
            max_item_annotators: 3,
            min_tag_uses: 1,
            min_user_items: 1,
            ..FilterConfig::default()
        };
        let filtered = f.apply_filters(&config).unwrap();
        assert_eq!(filtered.item_count(), 1);
        assert_eq!(filtered.items()[0], "at-max");
    }

    #[test]
    fn filter_passes_run_in_item_tag_user_order() {
        // t-rare survives the tag pass only if counted after the item pass:
        // it has 2 uses overall but 1 of them sits on a dropped item.
        let f = toy(&[
            ("u1", "t-rare", "kept"),
            ("u2", "t-common", "kept"),
            ("u1", "t-rare", "dropped"),
            ("u2", "t-common", "dropped-2"),
            ("u3", "t-common", "kept"),
        ]);
        let config = FilterConfig {
            min_item_annotators: 2,
            max_item_annotators: 10,
            min_tag_uses: 2,
            min_user_items: 1,
            ..FilterConfig::default()
        };
        let filtered = f.apply_filters(&config).unwrap();
        // "kept" has 3 annotators; both single-annotator items drop first,
        // which leaves t-rare with a single use, below the threshold.
        assert!(filtered.tag_index("t-rare").is_none());
        assert!(filtered.tag_index("t-common").is_some());
        assert_eq!(filtered.item_count(), 1);
    }

    #[test]
    fn identity_thresholds_keep_everything() {
        let f = toy(&[("u1", "t1", "i1"), ("u2", "t2", "i1"), ("u2", "t1", "i2")]);
        let config = FilterConfig {
            min_item_annotators: 1,
            max_item_annotators: u32::MAX,
            min_tag_uses: 1,
            min_user_items: 1,
            ..FilterConfig::default()
        };
        assert_eq!(f.apply_filters(&config).unwrap(), f);
    }

    #[test]
    fn rejects_inverted_annotator_bounds() {
        let f = toy(&[("u", "t", "i")]);
        let config = FilterConfig {
            min_item_annotators: 10,
            max_item_annotators: 5,
            ..FilterConfig::default()
        };
        assert!(f.apply_filters(&config).is_err());
    }

    #[test]
    fn sampling_everyone_is_identity() {
        let f = toy(&[("u1", "t1", "i1"), ("u2", "t2", "i2")]);
        assert_eq!(f.sample_users(2, 9), f);
        assert_eq!(f.sample_users(50, 9), f);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let triples: Vec<(String, String, String)> = (0..30)
            .map(|u| {
                (
                    format!("u{u:02}"),
                    "t".to_string(),
                    format!("i{u}", u = u % 7),
                )
            })
            .collect();
        let f = Folksonomy::from_triples(
            triples
                .iter()
                .map(|(u, t, i)| (u.as_str(), t.as_str(), i.as_str())),
        );
        let a = f.sample_users(10, 7);
        let b = f.sample_users(10, 7);
        let c = f.sample_users(10, 8);
        assert_eq!(a, b);
        assert_eq!(a.user_count(), 10);
        assert_ne!(a.users(), c.users());
    }

    /// Independent re-implementation of the documented selection procedure:
    /// a partial Fisher-Yates pass over `0..len` driven by the same seeded
    /// generator, written out step by step.
    fn reference_sample(len: usize, n: usize, seed: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pool: Vec<usize> = (0..len).collect();
        let mut chosen = Vec::new();
        for round in 0..n {
            let pick = rng.gen_range(round..len);
            pool.swap(round, pick);
            chosen.push(pool[round]);
        }
        chosen.sort_unstable();
        chosen
    }

    #[test]
    fn sampling_matches_reference_selection() {
        let names: Vec<String> = (0..5).map(|u| format!("u{u}")).collect();
        let triples: Vec<(String, String, String)> = names
            .iter()
            .map(|u| (u.clone(), "t".to_string(), "i".to_string()))
            .collect();
        let f = Folksonomy::from_triples(
            triples
                .iter()
                .map(|(u, t, i)| (u.as_str(), t.as_str(), i.as_str())),
        );
        for seed in 0..20 {
            let expected: Vec<String> = reference_sample(5, 2, seed)
                .into_iter()
                .map(|u| names[u].clone())
                .collect();
            assert_eq!(
                f.sample_users(2, seed).users(),
                expected.as_slice(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn folds_partition_all_users_evenly() {
        let triples: Vec<(String, String, String)> = (0..1000)
            .map(|u| (format!("u{u:04}"), "t".to_string(), "i".to_string()))
            .collect();
        let f = Folksonomy::from_triples(
            triples
                .iter()
                .map(|(u, t, i)| (u.as_str(), t.as_str(), i.as_str())),
        );
        let plan = f.split_folds(5, 3).unwrap();
        for fold in 0..5 {
            assert_eq!(plan.fold_users(fold).len(), 200);
        }
        let plan = f.split_folds(7, 3).unwrap();
        let sizes: Vec<usize> = (0..7).map(|k| plan.fold_users(k).len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 1000);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn ten_users_two_per_fold() {
        let triples: Vec<(String, String, String)> = (0..10)
            .map(|u| (format!("u{u}"), "t".to_string(), "i".to_string()))
            .collect();
        let f = Folksonomy::from_triples(
            triples
                .iter()
                .map(|(u, t, i)| (u.as_str(), t.as_str(), i.as_str())),
        );
        let plan = f.split_folds(5, 11).unwrap();
        for fold in 0..5 {
            assert_eq!(plan.fold_users(fold).len(), 2);
        }
    }

    #[test]
    fn fold_split_is_deterministic_and_validates_k() {
        let f = toy(&[("u1", "t", "i"), ("u2", "t", "i"), ("u3", "t", "i")]);
        let a = f.split_folds(3, 5).unwrap();
        let b = f.split_folds(3, 5).unwrap();
        assert_eq!(a.fold_of, b.fold_of);
        assert!(f.split_folds(0, 5).is_err());
        assert!(f.split_folds(4, 5).is_err());
    }

    #[test]
    fn snapshot_round_trips_and_is_byte_stable() {
        let f = toy(&[
            ("u2", "machine learning", "i1"),
            ("u1", "bayes", "i2"),
            ("u1", "bayes", "i1"),
        ]);
        let mut bytes = Vec::new();
        f.write_snapshot(&mut bytes).unwrap();
        let g = Folksonomy::read_snapshot(Cursor::new(&bytes)).unwrap();
        assert_eq!(f, g);
        let mut again = Vec::new();
        g.write_snapshot(&mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn snapshot_rejects_bad_headers_and_indices() {
        assert!(Folksonomy::read_snapshot(Cursor::new("#nope\n")).is_err());
        let text = "#folksonomy v1\nU u1\nI i1\nT t1\nP 0 0 5\n";
        assert!(Folksonomy::read_snapshot(Cursor::new(text)).is_err());
    }

    prop_compose! {
        fn arb_triples()(
            raw in proptest::collection::vec((0u8..6, 0u8..6, 0u8..8), 1..40)
        ) -> Vec<(String, String, String)> {
            raw.into_iter()
                .map(|(u, i, t)| (format!("u{u}"), format!("t{t}"), format!("i{i}")))
                .collect()
        }
    }

    proptest! {
        /// Posts fully determine the projections.
        #[test]
        fn projections_agree_with_post_set(triples in arb_triples()) {
            let f = Folksonomy::from_triples(
                triples.iter().map(|(u, t, i)| (u.as_str(), t.as_str(), i.as_str())),
            );
            for (u, _) in f.users().iter().enumerate() {
                let mut items: Vec<u32> = f.user_posts(u).iter().map(|p| p.item).collect();
                items.sort_unstable();
                items.dedup();
                prop_assert_eq!(items.as_slice(), f.user_items(u));
                let mut tags: Vec<u32> = f.user_posts(u).iter().map(|p| p.tag).collect();
                tags.sort_unstable();
                tags.dedup();
                prop_assert_eq!(tags.as_slice(), f.user_tags(u));
            }
            let total: usize = (0..f.user_count()).map(|u| f.user_posts(u).len()).sum();
            prop_assert_eq!(total, f.post_count());
        }

        /// Every sampled user keeps all of their posts.
        #[test]
        fn sampling_preserves_posts_of_chosen_users(
            triples in arb_triples(), n in 1usize..5, seed in 0u64..50
        ) {
            let f = Folksonomy::from_triples(
                triples.iter().map(|(u, t, i)| (u.as_str(), t.as_str(), i.as_str())),
            );
            let sampled = f.sample_users(n, seed);
            prop_assert!(sampled.user_count() <= f.user_count().min(n.max(f.user_count().min(n))));
            for (su, name) in sampled.users().iter().enumerate() {
                let fu = f.user_index(name).unwrap();
                prop_assert_eq!(sampled.user_posts(su).len(), f.user_posts(fu).len());
            }
        }

        /// Fold assignment is a partition: every user appears exactly once.
        #[test]
        fn folds_form_a_partition(triples in arb_triples(), seed in 0u64..20) {
            let f = Folksonomy::from_triples(
                triples.iter().map(|(u, t, i)| (u.as_str(), t.as_str(), i.as_str())),
            );
            let k = f.user_count().min(3);
            let plan = f.split_folds(k, seed).unwrap();
            let mut seen = vec![0u32; f.user_count()];
            for fold in 0..k {
                for u in plan.fold_users(fold) {
                    seen[u] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }
}
