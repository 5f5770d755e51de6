//! Concept taxonomy, information content and tag-to-tag similarity.
//!
//! The taxonomy file is a line-oriented text format with three sections.
//! Blank lines and `#` comments are allowed anywhere; every entry line splits
//! on its last whitespace run, so ids may contain inner spaces:
//!
//! ```text
//! [concepts]
//! <concept id>  <frequency count>
//! [edges]
//! <child concept>  <parent concept>
//! [mappings]
//! <tag>  <concept id>
//! ```
//!
//! Edges are IS-A links and must form an acyclic graph. A concept's
//! probability is its cumulative frequency (its own count plus the counts of
//! every distinct concept below it) over the total mass of the taxonomy, and
//! its information content is `-log2 p`. The similarity of two concepts is
//! the largest information content among their common subsumers, so sharing
//! only a root (probability 1) means similarity zero. A tag mapped to several
//! concepts resolves to the one with the highest own frequency, ties to the
//! lexicographically smaller concept id; tags without any mapping get a zero
//! row in the similarity matrix, self-similarity included.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::{Error, Result};

/// IS-A concept graph with frequency counts and tag mappings.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    concepts: Vec<String>,
    freqs: Vec<u64>,
    parents: Vec<Vec<u32>>,
    children: Vec<Vec<u32>>,
    /// tag -> resolved concept index.
    tag_map: HashMap<String, u32>,
}

/// Per-concept probability and information content, aligned with the
/// taxonomy's concept indices.
#[derive(Debug, Clone)]
pub struct InformationContentTable {
    pub p: Vec<f64>,
    pub ic: Vec<f64>,
}

impl Taxonomy {
    /// Parses the sectioned text format described in the module docs.
    pub fn parse<R: BufRead>(reader: R) -> Result<Taxonomy> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Concepts,
            Edges,
            Mappings,
        }
        let mut section = Section::None;
        let mut declared: Vec<(String, u64)> = Vec::new();
        let mut edge_names: Vec<(String, String)> = Vec::new();
        let mut mapping_names: Vec<(String, String)> = Vec::new();
        for (no, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[concepts]" => section = Section::Concepts,
                "[edges]" => section = Section::Edges,
                "[mappings]" => section = Section::Mappings,
                _ if line.starts_with('[') => {
                    return Err(Error::TaxonomyFormat(format!(
                        "line {}: unknown section {line}",
                        no + 1
                    )));
                }
                entry => {
                    let (left, right) = split_entry(entry).ok_or_else(|| {
                        Error::TaxonomyFormat(format!("line {}: expected two fields", no + 1))
                    })?;
                    match section {
                        Section::None => {
                            return Err(Error::TaxonomyFormat(format!(
                                "line {}: entry before any section header",
                                no + 1
                            )));
                        }
                        Section::Concepts => {
                            let freq: u64 = right.parse().map_err(|_| {
                                Error::TaxonomyFormat(format!(
                                    "line {}: bad frequency {right:?}",
                                    no + 1
                                ))
                            })?;
                            declared.push((left.to_string(), freq));
                        }
                        Section::Edges => {
                            edge_names.push((left.to_string(), right.to_string()));
                        }
                        Section::Mappings => {
                            mapping_names.push((left.to_string(), right.to_string()));
                        }
                    }
                }
            }
        }
        Taxonomy::build(declared, edge_names, mapping_names)
    }

    fn build(
        mut declared: Vec<(String, u64)>,
        edge_names: Vec<(String, String)>,
        mapping_names: Vec<(String, String)>,
    ) -> Result<Taxonomy> {
        declared.sort_by(|a, b| a.0.cmp(&b.0));
        if declared.windows(2).any(|w| w[0].0 == w[1].0) {
            let dup = declared
                .windows(2)
                .find(|w| w[0].0 == w[1].0)
                .map(|w| w[0].0.clone())
                .unwrap();
            return Err(Error::TaxonomyFormat(format!(
                "concept {dup:?} declared twice"
            )));
        }
        let concepts: Vec<String> = declared.iter().map(|(c, _)| c.clone()).collect();
        let freqs: Vec<u64> = declared.iter().map(|&(_, f)| f).collect();
        let index: HashMap<&str, u32> = concepts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i as u32))
            .collect();

        let mut parents = vec![Vec::new(); concepts.len()];
        let mut children = vec![Vec::new(); concepts.len()];
        for (child, parent) in &edge_names {
            let c = *index.get(child.as_str()).ok_or_else(|| {
                Error::TaxonomyFormat(format!("edge references unknown concept {child:?}"))
            })?;
            let p = *index.get(parent.as_str()).ok_or_else(|| {
                Error::TaxonomyFormat(format!("edge references unknown concept {parent:?}"))
            })?;
            if c == p {
                return Err(Error::TaxonomyFormat(format!(
                    "self-edge on concept {child:?}"
                )));
            }
            if !parents[c as usize].contains(&p) {
                parents[c as usize].push(p);
                children[p as usize].push(c);
            }
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }

        // Kahn's algorithm: leftover nodes mean a cycle.
        let mut indegree: Vec<usize> = parents.iter().map(|p| p.len()).collect();
        let mut queue: Vec<u32> = (0..concepts.len() as u32)
            .filter(|&c| indegree[c as usize] == 0)
            .collect();
        let mut visited = 0usize;
        let mut cursor = 0usize;
        while cursor < queue.len() {
            let c = queue[cursor];
            cursor += 1;
            visited += 1;
            for &ch in &children[c as usize] {
                indegree[ch as usize] -= 1;
                if indegree[ch as usize] == 0 {
                    queue.push(ch);
                }
            }
        }
        if visited != concepts.len() {
            return Err(Error::TaxonomyFormat("taxonomy contains a cycle".into()));
        }

        // Polysemy: keep the mapping to the highest-frequency concept,
        // ties to the lexicographically smaller concept id. The sorted
        // concept order makes "smaller index" and "smaller id" the same.
        let mut tag_map: HashMap<String, u32> = HashMap::new();
        for (tag, concept) in mapping_names {
            let c = *index.get(concept.as_str()).ok_or_else(|| {
                Error::TaxonomyFormat(format!("mapping references unknown concept {concept:?}"))
            })?;
            tag_map
                .entry(tag)
                .and_modify(|cur| {
                    let better = freqs[c as usize] > freqs[*cur as usize]
                        || (freqs[c as usize] == freqs[*cur as usize] && c < *cur);
                    if better {
                        *cur = c;
                    }
                })
                .or_insert(c);
        }

        Ok(Taxonomy {
            concepts,
            freqs,
            parents,
            children,
            tag_map,
        })
    }

    pub fn concept_count(&self) -> usize {
        self.concepts.len()
    }
    pub fn concepts(&self) -> &[String] {
        &self.concepts
    }
    pub fn frequency(&self, concept: usize) -> u64 {
        self.freqs[concept]
    }
    pub fn parents(&self, concept: usize) -> &[u32] {
        &self.parents[concept]
    }
    pub fn concept_index(&self, id: &str) -> Option<usize> {
        self.concepts.binary_search_by(|c| c.as_str().cmp(id)).ok()
    }
    /// Resolved concept of a tag, if any mapping exists.
    pub fn concept_of_tag(&self, tag: &str) -> Option<usize> {
        self.tag_map.get(tag).map(|&c| c as usize)
    }

    /// Concept indices in a parents-before-children order.
    fn topological_order(&self) -> Vec<u32> {
        let mut indegree: Vec<usize> = self.parents.iter().map(|p| p.len()).collect();
        let mut order: Vec<u32> = (0..self.concepts.len() as u32)
            .filter(|&c| indegree[c as usize] == 0)
            .collect();
        let mut cursor = 0;
        while cursor < order.len() {
            let c = order[cursor];
            cursor += 1;
            for &ch in &self.children[c as usize] {
                indegree[ch as usize] -= 1;
                if indegree[ch as usize] == 0 {
                    order.push(ch);
                }
            }
        }
        order
    }

    /// Computes cumulative probabilities and information content.
    ///
    /// The cumulative count of a concept adds each distinct descendant once,
    /// which matters when the graph is a DAG rather than a tree; descendant
    /// sets are carried as bitsets from the leaves upward. Probabilities
    /// normalize by the total own-frequency mass, so a sole root gets
    /// probability one and information content zero. A concept whose subtree
    /// carries no mass at all has probability zero and infinite information
    /// content; that only happens on degenerate inputs.
    pub fn compute_information_content(&self) -> InformationContentTable {
        let n = self.concepts.len();
        let words = n.div_ceil(64);
        let mut descendants = vec![0u64; n * words];
        let order = self.topological_order();
        for &c in order.iter().rev() {
            let c = c as usize;
            for &ch in &self.children[c] {
                let ch = ch as usize;
                let (head, tail) = descendants.split_at_mut(c.max(ch) * words);
                let (dst, src) = if c < ch {
                    (&mut head[c * words..c * words + words], &tail[..words])
                } else {
                    (&mut tail[..words], &head[ch * words..ch * words + words])
                };
                for (d, s) in dst.iter_mut().zip(src) {
                    *d |= s;
                }
                descendants[c * words + ch / 64] |= 1u64 << (ch % 64);
            }
        }
        let total: u64 = self.freqs.iter().sum();
        let mut p = vec![0.0; n];
        let mut ic = vec![0.0; n];
        for c in 0..n {
            let mut cumulative = self.freqs[c];
            for w in 0..words {
                let mut bits = descendants[c * words + w];
                while bits != 0 {
                    let b = bits.trailing_zeros() as usize;
                    cumulative += self.freqs[w * 64 + b];
                    bits &= bits - 1;
                }
            }
            p[c] = if total == 0 {
                0.0
            } else {
                cumulative as f64 / total as f64
            };
            ic[c] = -p[c].log2();
            if ic[c] == 0.0 {
                ic[c] = 0.0; // normalize -0.0 from p == 1
            }
        }
        InformationContentTable { p, ic }
    }

    /// Ancestor indices of a concept, self included, ascending.
    fn ancestors(&self, concept: usize) -> Vec<u32> {
        let mut seen = vec![false; self.concepts.len()];
        let mut stack = vec![concept as u32];
        seen[concept] = true;
        while let Some(c) = stack.pop() {
            for &p in &self.parents[c as usize] {
                if !seen[p as usize] {
                    seen[p as usize] = true;
                    stack.push(p);
                }
            }
        }
        (0..self.concepts.len() as u32)
            .filter(|&c| seen[c as usize])
            .collect()
    }

    /// Largest information content among common subsumers of two concepts
    /// (every concept subsumes itself); zero when nothing is shared.
    pub fn resnik_similarity(&self, ic: &InformationContentTable, c1: usize, c2: usize) -> f64 {
        max_common_ic(&self.ancestors(c1), &self.ancestors(c2), &ic.ic)
    }

    /// Builds the dense tag-to-tag similarity matrix for `tags`.
    ///
    /// Tags without a concept mapping are reported back and contribute an
    /// all-zero row and column, their self-similarity included.
    pub fn build_similarity_matrix(&self, tags: &[String]) -> (SimilarityMatrix, Vec<String>) {
        let ic = self.compute_information_content();
        let concept_of: Vec<Option<usize>> = tags.iter().map(|t| self.concept_of_tag(t)).collect();
        let unmapped: Vec<String> = tags
            .iter()
            .zip(&concept_of)
            .filter(|(_, c)| c.is_none())
            .map(|(t, _)| t.clone())
            .collect();
        let ancestor_lists: Vec<Option<Vec<u32>>> = {
            // Ancestor lists are shared between tags mapped to the same
            // concept; compute each needed concept once.
            let mut cache: HashMap<usize, Vec<u32>> = HashMap::new();
            for c in concept_of.iter().flatten() {
                cache.entry(*c).or_insert_with(|| self.ancestors(*c));
            }
            concept_of
                .iter()
                .map(|c| c.map(|c| cache[&c].clone()))
                .collect()
        };
        let n = tags.len();
        let mut values = vec![0.0f64; n * n];
        values
            .par_chunks_mut(n.max(1))
            .enumerate()
            .for_each(|(i, row)| {
                let Some(a) = &ancestor_lists[i] else {
                    return;
                };
                for (j, cell) in row.iter_mut().enumerate() {
                    if let Some(b) = &ancestor_lists[j] {
                        *cell = max_common_ic(a, b, &ic.ic);
                    }
                }
            });
        (
            SimilarityMatrix {
                labels: tags.to_vec(),
                values,
            },
            unmapped,
        )
    }
}

fn split_entry(line: &str) -> Option<(&str, &str)> {
    let (left, right) = line.rsplit_once(|c: char| c.is_whitespace())?;
    let (left, right) = (left.trim(), right.trim());
    if left.is_empty() || right.is_empty() {
        None
    } else {
        Some((left, right))
    }
}

/// Max information content over the intersection of two ascending index
/// lists; zero for an empty intersection.
fn max_common_ic(a: &[u32], b: &[u32], ic: &[f64]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut best = 0.0f64;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                best = best.max(ic[a[i] as usize]);
                i += 1;
                j += 1;
            }
        }
    }
    best
}

/// Dense symmetric tag similarity matrix with row labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    labels: Vec<String>,
    /// Row-major `n x n`.
    values: Vec<f64>,
}

/// Import outcome: the matrix plus the number of label pairs that were
/// absent from the file and defaulted to zero.
#[derive(Debug)]
pub struct ImportedMatrix {
    pub matrix: SimilarityMatrix,
    pub missing_pairs: usize,
}

impl SimilarityMatrix {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> SimilarityMatrix {
        assert_eq!(labels.len() * labels.len(), values.len());
        SimilarityMatrix { labels, values }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
    pub fn labels(&self) -> &[String] {
        &self.labels
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.labels.len() + j]
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Writes `tag1<TAB>tag2<TAB>value` lines: the full diagonal first in
    /// label order (which pins the label set and its order), then every
    /// nonzero upper-triangle entry. Values use the shortest decimal form
    /// that parses back to the identical float.
    pub fn export_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.labels.len();
        for i in 0..n {
            writeln!(
                w,
                "{}\t{}\t{}",
                self.labels[i],
                self.labels[i],
                self.get(i, i)
            )?;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.get(i, j);
                if v != 0.0 {
                    writeln!(w, "{}\t{}\t{}", self.labels[i], self.labels[j], v)?;
                }
            }
        }
        Ok(())
    }

    /// Reads the TSV form. Labels appear in first-mention order; pairs never
    /// mentioned default to zero and are tallied in `missing_pairs`. A pair
    /// stated twice (in either orientation) with different values is a
    /// format error, as is an asymmetric conflict.
    pub fn import_tsv<R: BufRead>(reader: R) -> Result<ImportedMatrix> {
        let mut labels: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (no, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(a), Some(b), Some(v), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(Error::MatrixFormat(format!(
                    "line {}: expected tag<TAB>tag<TAB>value",
                    no + 1
                )));
            };
            let value: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::MatrixFormat(format!("line {}: bad value {v:?}", no + 1)))?;
            let mut id_of = |name: &str| -> usize {
                if let Some(&i) = index.get(name) {
                    return i;
                }
                let i = labels.len();
                labels.push(name.to_string());
                index.insert(name.to_string(), i);
                i
            };
            let (i, j) = (id_of(a), id_of(b));
            entries.push((i, j, value));
        }
        let n = labels.len();
        let mut values = vec![0.0f64; n * n];
        let mut stated = vec![false; n * n];
        for (i, j, v) in entries {
            for (r, c) in [(i, j), (j, i)] {
                let slot = r * n + c;
                if stated[slot] && values[slot] != v {
                    return Err(Error::MatrixFormat(format!(
                        "conflicting values for pair {:?} / {:?}: {} vs {}",
                        labels[r], labels[c], values[slot], v
                    )));
                }
                stated[slot] = true;
                values[slot] = v;
            }
        }
        let missing_pairs = (0..n)
            .flat_map(|i| (i..n).map(move |j| i * n + j))
            .filter(|&slot| !stated[slot])
            .count();
        Ok(ImportedMatrix {
            matrix: SimilarityMatrix { labels, values },
            missing_pairs,
        })
    }
}
