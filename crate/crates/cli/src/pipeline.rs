//! Artifact pipeline behind the subcommands.
//!
//! Every step writes its output into the run directory next to a `.inputs`
//! sidecar holding a digest of everything that produced it: the input file
//! bytes and the parameters that shaped the computation. A rerun recomputes
//! a step only when that digest changed (or `--force` is given), so the
//! pipeline is rerunnable and pure given its inputs, and expensive stages
//! like clustering run once per distinct input.

use std::fs;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use sha2::{Digest, Sha256};

use tagrec_core::clustering::{affinity_propagation, PreferencePolicy, TagClustering};
use tagrec_core::corpus::{build_folksonomy, parse_annotations, Folksonomy};
use tagrec_core::eval::{
    run_protocol, write_cdf_csv, write_recommendations_csv, write_report_csv, CvConfig,
    ProtocolConfig,
};
use tagrec_core::recommender::{ClusterMap, Model, ModelParams};
use tagrec_core::synth::{generate, SynthConfig};
use tagrec_core::taxonomy::{SimilarityMatrix, Taxonomy};

use crate::config::RunConfig;

pub struct Pipeline<'a> {
    pub config: &'a RunConfig,
    pub force: bool,
}

impl Pipeline<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    /// True when the artifact exists and records exactly this input digest.
    fn fresh(&self, artifact: &Path, stamp: &str) -> bool {
        if self.force || !artifact.exists() {
            return false;
        }
        match fs::read_to_string(sidecar(artifact)) {
            Ok(recorded) => recorded.trim() == stamp,
            Err(_) => false,
        }
    }

    fn commit(&self, artifact: &Path, stamp: &str) -> Result<()> {
        fs::write(sidecar(artifact), format!("{stamp}\n"))
            .with_context(|| format!("cannot record inputs of {}", artifact.display()))?;
        Ok(())
    }

    fn skip_line(&self, artifact: &Path) {
        println!(
            "{} is up to date (inputs unchanged; --force rebuilds)",
            artifact.display()
        );
    }

    // -- snapshots ---------------------------------------------------------

    /// Raw snapshot: the parsed, canonicalized folksonomy.
    pub fn ensure_snapshot(&self) -> Result<PathBuf> {
        let out = self.path("folksonomy.snapshot");
        let stamp = digest_parts(&[
            b"snapshot v1",
            &file_bytes(&self.config.annotations)?,
            input_params(self.config).as_bytes(),
        ]);
        if self.fresh(&out, &stamp) {
            self.skip_line(&out);
            return Ok(out);
        }
        let file = File::open(&self.config.annotations)
            .with_context(|| format!("cannot open {}", self.config.annotations.display()))?;
        let parsed = parse_annotations(BufReader::new(file), &self.config.input)?;
        println!(
            "parsed {} annotations ({} malformed lines skipped)",
            parsed.records.len(),
            parsed.malformed_lines
        );
        let folksonomy = build_folksonomy(&parsed.records);
        println!(
            "raw folksonomy: {} users, {} items, {} tags, {} posts",
            folksonomy.user_count(),
            folksonomy.item_count(),
            folksonomy.tag_count(),
            folksonomy.post_count()
        );
        write_with(&out, |w| folksonomy.write_snapshot(w))?;
        self.commit(&out, &stamp)?;
        println!("wrote {}", out.display());
        Ok(out)
    }

    /// Filtered snapshot: the seeded user sample with population filters
    /// applied, the corpus every downstream artifact is built from.
    pub fn ensure_filtered(&self) -> Result<PathBuf> {
        let raw = self.ensure_snapshot()?;
        let out = self.path("filtered.snapshot");
        let stamp = digest_parts(&[
            b"filtered v1",
            &file_bytes(&raw)?,
            filter_params(self.config).as_bytes(),
        ]);
        if self.fresh(&out, &stamp) {
            self.skip_line(&out);
            return Ok(out);
        }
        let folksonomy = read_snapshot(&raw)?;
        let filtered = folksonomy
            .sample_users(self.config.filter.sample_size, self.config.filter.seed)
            .apply_filters(&self.config.filter)?;
        println!(
            "filtered sample: {} users, {} items, {} tags, {} posts",
            filtered.user_count(),
            filtered.item_count(),
            filtered.tag_count(),
            filtered.post_count()
        );
        write_with(&out, |w| filtered.write_snapshot(w))?;
        self.commit(&out, &stamp)?;
        println!("wrote {}", out.display());
        Ok(out)
    }

    // -- similarity matrix -------------------------------------------------

    /// Tag similarity matrix over the filtered vocabulary, or the
    /// user-supplied precomputed matrix when one is configured.
    pub fn ensure_matrix(&self) -> Result<PathBuf> {
        if let Some(path) = &self.config.similarity {
            return Ok(path.clone());
        }
        let filtered = self.ensure_filtered()?;
        let out = self.path("similarity.tsv");
        let stamp = digest_parts(&[
            b"simmatrix v1",
            &file_bytes(&filtered)?,
            &file_bytes(&self.config.taxonomy)?,
        ]);
        if self.fresh(&out, &stamp) {
            self.skip_line(&out);
            return Ok(out);
        }
        let folksonomy = read_snapshot(&filtered)?;
        let file = File::open(&self.config.taxonomy)
            .with_context(|| format!("cannot open {}", self.config.taxonomy.display()))?;
        let taxonomy = Taxonomy::parse(BufReader::new(file))?;
        let (matrix, unmapped) = taxonomy.build_similarity_matrix(folksonomy.tags());
        println!(
            "similarity matrix: {} tags, {} without a concept mapping",
            matrix.len(),
            unmapped.len()
        );
        write_with(&out, |w| matrix.export_tsv(w))?;
        self.commit(&out, &stamp)?;
        println!("wrote {}", out.display());
        Ok(out)
    }

    // -- clustering ----------------------------------------------------------

    pub fn ensure_clustering(&self) -> Result<PathBuf> {
        let matrix_path = self.ensure_matrix()?;
        let out = self.path("clusters.tsv");
        let histogram = self.path("cluster_sizes.csv");
        let stamp = digest_parts(&[
            b"clusters v1",
            &file_bytes(&matrix_path)?,
            clustering_params(self.config).as_bytes(),
        ]);
        if self.fresh(&out, &stamp) && histogram.exists() {
            self.skip_line(&out);
            return Ok(out);
        }
        let imported = {
            let file = File::open(&matrix_path)
                .with_context(|| format!("cannot open {}", matrix_path.display()))?;
            SimilarityMatrix::import_tsv(BufReader::new(file))?
        };
        if imported.missing_pairs > 0 {
            println!(
                "note: {} unstated tag pairs default to zero similarity",
                imported.missing_pairs
            );
        }
        let clustering = affinity_propagation(&imported.matrix, &self.config.clustering)?;
        println!(
            "clustered {} tags into {} clusters ({} singletons), converged {} after {} iterations",
            clustering.len(),
            clustering.cluster_count(),
            clustering.singleton_count(),
            clustering.converged,
            clustering.iterations
        );
        write_with(&out, |w| clustering.write_tsv(w))?;
        write_with(&histogram, |w| {
            writeln!(w, "size,count")?;
            for (size, count) in clustering.size_histogram() {
                writeln!(w, "{size},{count}")?;
            }
            Ok(())
        })?;
        self.commit(&out, &stamp)?;
        println!("wrote {} and {}", out.display(), histogram.display());
        Ok(out)
    }

    // -- evaluation ----------------------------------------------------------

    pub fn ensure_report(&self) -> Result<(PathBuf, PathBuf)> {
        let snapshot = self.ensure_snapshot()?;
        let clustering_path = if self.config.needs_clustering() {
            Some(self.ensure_clustering()?)
        } else {
            None
        };
        let report_path = self.path("report.csv");
        let cdf_path = self.path("cdf.csv");
        let clustering_bytes = match &clustering_path {
            Some(path) => file_bytes(path)?,
            None => Vec::new(),
        };
        let stamp = digest_parts(&[
            b"report v1",
            &file_bytes(&snapshot)?,
            &clustering_bytes,
            filter_params(self.config).as_bytes(),
            evaluate_params(self.config).as_bytes(),
        ]);
        if self.fresh(&report_path, &stamp) && self.fresh(&cdf_path, &stamp) {
            self.skip_line(&report_path);
            return Ok((report_path, cdf_path));
        }

        let raw = read_snapshot(&snapshot)?;
        let clustering = match &clustering_path {
            Some(path) => {
                let file =
                    File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
                Some(TagClustering::read_tsv(BufReader::new(file))?)
            }
            None => None,
        };
        let protocol = ProtocolConfig {
            filter: self.config.filter.clone(),
            cv: CvConfig {
                folds: self.config.folds,
                seed: self.config.master_seed,
                params: self.model_params(self.config.blend_grid[0]),
                methods: self.config.method_specs(),
            },
            repetitions: self.config.repetitions,
            master_seed: self.config.master_seed,
            cdf_levels: ProtocolConfig::default_cdf_levels(),
        };
        let report = run_protocol(&raw, clustering.as_ref(), &protocol)?;
        write_with(&report_path, |w| write_report_csv(&report, w))?;
        write_with(&cdf_path, |w| write_cdf_csv(&report, w))?;
        self.commit(&report_path, &stamp)?;
        self.commit(&cdf_path, &stamp)?;
        println!(
            "evaluated {} method rows over {} repetitions",
            report.rows.len(),
            report.repetitions
        );
        if let Some(best) = report
            .rows
            .iter()
            .max_by(|a, b| a.f_score.total_cmp(&b.f_score))
        {
            println!(
                "best F: {} (F={}, P={}, R={})",
                best.label.column_name(),
                best.f_score,
                best.precision,
                best.recall
            );
        }
        println!("wrote {} and {}", report_path.display(), cdf_path.display());
        Ok((report_path, cdf_path))
    }

    // -- single-user recommendations ----------------------------------------

    pub fn cmd_recommend(&self, user: &str, blend: f64) -> Result<()> {
        let filtered_path = self.ensure_filtered()?;
        let clustering_path = self.ensure_clustering()?;
        let filtered = read_snapshot(&filtered_path)?;
        let clustering = {
            let file = File::open(&clustering_path)
                .with_context(|| format!("cannot open {}", clustering_path.display()))?;
            TagClustering::read_tsv(BufReader::new(file))?
        };
        let mut map = ClusterMap::from_clustering(&clustering);
        map.extend_with_tags(filtered.tags().iter().map(|t| t.as_str()));
        let index = filtered.user_index(user).ok_or_else(|| {
            anyhow::Error::new(tagrec_core::Error::InvalidArgument(format!(
                "user {user:?} is not in the filtered snapshot"
            )))
        })?;
        let model = Model::new(&filtered, &map, self.config.diversity)?;
        let query = model.query_for_training_user(index)?;
        let candidates = model.candidates_for(&query);
        let params = self.model_params(blend);
        let recommendations = model.recommend(&query, &candidates, &params)?;

        println!(
            "top {} of {} candidates for {user} (d={blend}):",
            params.top_n,
            candidates.len()
        );
        println!("{:>4}  {:<24}  score", "rank", "item");
        for (rank, rec) in recommendations.iter().enumerate() {
            println!(
                "{:>4}  {:<24}  {}",
                rank + 1,
                filtered.items()[rec.item as usize],
                rec.score
            );
        }
        let out = self.path("recommendations.csv");
        let entries = vec![(
            format!("proposed_d{blend}"),
            user.to_string(),
            recommendations
                .iter()
                .map(|r| (filtered.items()[r.item as usize].clone(), r.score))
                .collect::<Vec<_>>(),
        )];
        write_with(&out, |w| write_recommendations_csv(&entries, w))?;
        println!("wrote {}", out.display());
        Ok(())
    }

    // -- report rendering ----------------------------------------------------

    pub fn cmd_report(&self, file: Option<&Path>) -> Result<()> {
        let path = file
            .map(Path::to_path_buf)
            .unwrap_or_else(|| self.path("report.csv"));
        let text = fs::read_to_string(&path)
            .with_context(|| format!("cannot read report {}", path.display()))?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| anyhow!("report {} is empty", path.display()))?
            .split(',')
            .collect();
        // The leading columns mirror the comparison table; the rest are
        // supplementary and stay in the CSV.
        let shown = header.len().min(8);
        let rows: Vec<Vec<String>> = lines
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        let mut widths: Vec<usize> = header[..shown].iter().map(|h| h.len()).collect();
        for row in &rows {
            for (i, cell) in row.iter().take(shown).enumerate() {
                widths[i] = widths[i].max(cell.len());
            }
        }
        let render = |cells: &[String]| {
            cells
                .iter()
                .take(shown)
                .enumerate()
                .map(|(i, c)| format!("{:<width$}", c, width = widths[i]))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let header_cells: Vec<String> = header[..shown].iter().map(|s| s.to_string()).collect();
        println!("{}", render(&header_cells));
        let f_column = header.iter().position(|&h| h == "F");
        let mut best: Option<(f64, String)> = None;
        for row in &rows {
            println!("{}", render(row));
            if let Some(f_idx) = f_column {
                if let Some(f) = row.get(f_idx).and_then(|v| v.parse::<f64>().ok()) {
                    let label = match row[1].is_empty() {
                        true => row[0].clone(),
                        false => format!("{} (d={})", row[0], row[1]),
                    };
                    if best.as_ref().is_none_or(|(b, _)| f > *b) {
                        best = Some((f, label));
                    }
                }
            }
        }
        if let Some((f, label)) = best {
            println!("best F: {label} at {f}");
        }
        Ok(())
    }

    // -- corpus generation ----------------------------------------------------

    pub fn cmd_synth(&self, seed: u64, small: bool) -> Result<()> {
        let synth_config = if small {
            SynthConfig {
                seed,
                specialist_topics: 10,
                generic_tags: 12,
                communities: 5,
                items_per_community: 14,
                committed_users: 60,
                casual_users: 20,
                heavy_noise_users: 15,
                light_noise_users: 10,
                isolated_groups: 1,
                users_per_isolated_group: 6,
                items_per_isolated_group: 10,
                ..SynthConfig::default()
            }
        } else {
            SynthConfig {
                seed,
                ..SynthConfig::default()
            }
        };
        let corpus = generate(&synth_config);
        if let Some(dir) = self.config.annotations.parent() {
            fs::create_dir_all(dir).ok();
        }
        if let Some(dir) = self.config.taxonomy.parent() {
            fs::create_dir_all(dir).ok();
        }
        fs::write(&self.config.annotations, &corpus.annotations)
            .with_context(|| format!("cannot write {}", self.config.annotations.display()))?;
        fs::write(&self.config.taxonomy, &corpus.taxonomy)
            .with_context(|| format!("cannot write {}", self.config.taxonomy.display()))?;
        println!(
            "wrote {} ({} lines) and {} ({} lines)",
            self.config.annotations.display(),
            corpus.annotations.lines().count(),
            self.config.taxonomy.display(),
            corpus.taxonomy.lines().count()
        );
        Ok(())
    }

    pub fn cmd_ingest(&self) -> Result<()> {
        self.ensure_filtered()?;
        Ok(())
    }

    fn model_params(&self, blend: f64) -> ModelParams {
        ModelParams {
            blend_factor: blend,
            top_n: self.config.top_n,
            threshold_probability: self.config.threshold,
            denominator: self.config.denominator,
        }
    }
}

fn sidecar(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".inputs");
    artifact.with_file_name(name)
}

fn file_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn digest_parts(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    format!("{:x}", hasher.finalize())
}

fn input_params(config: &RunConfig) -> String {
    let i = &config.input;
    format!(
        "delimiter={} article={} user={} timestamp={} tag={} max_malformed={}",
        i.delimiter, i.article, i.user, i.timestamp, i.tag, i.max_malformed_fraction
    )
}

fn filter_params(config: &RunConfig) -> String {
    let f = &config.filter;
    format!(
        "min_item={} max_item={} min_tag={} min_user={} sample={} seed={}",
        f.min_item_annotators,
        f.max_item_annotators,
        f.min_tag_uses,
        f.min_user_items,
        f.sample_size,
        f.seed
    )
}

fn clustering_params(config: &RunConfig) -> String {
    let c = &config.clustering;
    let preference = match c.preference {
        PreferencePolicy::MinOffDiagonal => "min".to_string(),
        PreferencePolicy::MedianOffDiagonal => "median".to_string(),
        PreferencePolicy::Explicit(v) => format!("{v}"),
    };
    format!(
        "damping={} max_iterations={} window={} preference={}",
        c.damping, c.max_iterations, c.convergence_window, preference
    )
}

fn evaluate_params(config: &RunConfig) -> String {
    let grid: Vec<String> = config.blend_grid.iter().map(|d| format!("{d}")).collect();
    format!(
        "folds={} repetitions={} master_seed={} top_n={} threshold={} grid={} diversity={:?} denominator={:?} methods={}",
        config.folds,
        config.repetitions,
        config.master_seed,
        config.top_n,
        config.threshold,
        grid.join(","),
        config.diversity,
        config.denominator,
        config.methods.join(",")
    )
}

fn read_snapshot(path: &Path) -> Result<Folksonomy> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(Folksonomy::read_snapshot(BufReader::new(file))?)
}

fn write_with<F>(path: &Path, render: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> tagrec_core::Result<()>,
{
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut writer = BufWriter::new(file);
    render(&mut writer)?;
    writer.flush()?;
    Ok(())
}
