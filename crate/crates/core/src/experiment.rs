//! End-to-end experiment driver behind the CLI: dataset preparation, seed
//! sweeps, report/record emission, config comparison, kernel caching, and
//! plot generation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::clustering::{ClusteringResult, classical_kmeans, kernel_matrix_kmeans, quantum_kmeans};
use crate::config::{ExperimentConfig, Method, ModeName};
use crate::data::{ColumnRef, Dataset, fit_scale, load_csv, select_features};
use crate::error::{Error, Result, StageExt};
use crate::evaluation::{EvaluationReport, evaluate};
use crate::feature_maps::{
    FeatureMapConfig, MapKind, ThetaParameters, generate_theta, required_theta_count,
};
use crate::fingerprint::Fingerprint;
use crate::kernel::{
    KernelMatrix, KernelMode, kernel_matrix, load_kernel, save_kernel, to_distance,
};
use crate::plot;

/// CLI flag overrides applied on top of the parsed config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub out: Option<PathBuf>,
    pub kernel_cache: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            config.clustering.init_seeds = vec![seed];
        }
        if let Some(shots) = self.shots {
            config.clustering.shots = shots;
            config.clustering.mode = ModeName::Shots;
        }
        if let Some(dir) = &self.out {
            config.rebase_output(dir);
        }
        if let Some(path) = &self.kernel_cache {
            config.output.kernel_cache = Some(path.to_string_lossy().into_owned());
        }
    }
}

/// One point of the seed sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub theta_seed: u64,
    pub init_seed: u64,
    pub accuracy: f64,
    pub ari: f64,
    pub ami: f64,
    pub iterations_run: usize,
    pub converged: bool,
}

/// Everything needed to reproduce and re-score a run without re-running
/// circuits; `duration_seconds` is the only field allowed to vary between
/// identical reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub config_digest: Fingerprint,
    /// Hash of the selected columns before scaling; identifies the dataset
    /// across configs that scale differently.
    pub source_fingerprint: Fingerprint,
    /// Hash of the scaled feature matrix actually clustered.
    pub dataset_fingerprint: Fingerprint,
    pub theta_seed: u64,
    pub init_seed: u64,
    pub labels: Vec<usize>,
    pub truth: Vec<usize>,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub centroids: Vec<Vec<f64>>,
    pub medoids: Option<Vec<usize>>,
    pub iterations_run: usize,
    pub converged: bool,
    pub similarity_trace: Vec<f64>,
    pub report: EvaluationReport,
    pub sweep: Vec<SweepPoint>,
    pub duration_seconds: f64,
}

impl RunRecord {
    pub fn best_accuracy(&self) -> f64 {
        self.report.accuracy
    }

    pub fn sweep_accuracies(&self) -> Vec<f64> {
        self.sweep.iter().map(|p| p.accuracy).collect()
    }
}

/// Scaled dataset plus the pre-scaling fingerprint.
pub struct PreparedData {
    pub dataset: Dataset,
    pub source_fingerprint: Fingerprint,
}

/// Load → select → compatibility guard → scale. The qubit/feature check runs
/// before any scaling or encoding work.
pub fn prepare_dataset(config: &ExperimentConfig) -> Result<PreparedData> {
    let schema = crate::data::CsvSchema {
        label_column: config.dataset.label_column.clone(),
        feature_columns: None,
        has_header: config.dataset.has_header,
    };
    let raw = load_csv(Path::new(&config.dataset.path), &schema).stage("dataset load")?;
    let selected = match &config.dataset.feature_columns {
        Some(columns) => select_features(&raw, columns).stage("feature selection")?,
        None => raw,
    };
    config
        .check_map_compatibility(selected.d())
        .stage("map compatibility")?;
    let source_fingerprint = selected.fingerprint;
    let (scaled, _spec) = fit_scale(&selected, config.dataset.scaling_kind());
    Ok(PreparedData {
        dataset: scaled,
        source_fingerprint,
    })
}

fn theta_for(map: &FeatureMapConfig, d: usize) -> Result<ThetaParameters> {
    match map.map_kind {
        MapKind::EfficientSu2 => {
            let count = required_theta_count(map, d)?;
            Ok(generate_theta(map.theta_seed, count))
        }
        _ => Ok(ThetaParameters::empty()),
    }
}

/// Theta seeds to sweep. Only the hardware-efficient ansatz consumes theta;
/// other maps collapse to a single pass.
fn theta_seed_list(config: &ExperimentConfig) -> Vec<u64> {
    let base = config.map.as_ref().map(|m| m.theta_seed).unwrap_or(0);
    match (&config.map, &config.clustering.theta_seeds) {
        (Some(map), Some(seeds)) if map.kind == MapKind::EfficientSu2 && !seeds.is_empty() => {
            seeds.clone()
        }
        _ => vec![base],
    }
}

fn kernel_cache_path_for(config: &ExperimentConfig, theta_seed: u64, sweeping: bool) -> PathBuf {
    let base = config.kernel_cache_path();
    if !sweeping {
        return base;
    }
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "kernel".to_string());
    let ext = base
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "bin".to_string());
    base.with_file_name(format!("{stem}-t{theta_seed}.{ext}"))
}

/// Computes the kernel through the cache: a valid cached matrix is reused,
/// anything stale or missing is recomputed and rewritten.
pub fn kernel_via_cache(
    data: &Dataset,
    map: &FeatureMapConfig,
    theta: &ThetaParameters,
    mode: KernelMode,
    cache_path: &Path,
) -> Result<(KernelMatrix, bool)> {
    match load_kernel(cache_path, map, mode, &data.fingerprint) {
        Ok(kernel) => Ok((kernel, true)),
        Err(Error::NotFound(_)) | Err(Error::StaleCache(_)) => {
            let kernel = kernel_matrix(&data.features, map, theta, mode, data.fingerprint)?;
            save_kernel(&kernel, cache_path)?;
            Ok((kernel, false))
        }
        Err(other) => Err(other),
    }
}

struct SweepOutcome {
    points: Vec<SweepPoint>,
    best_result: ClusteringResult,
    best_report: EvaluationReport,
    best_theta_seed: u64,
    best_init_seed: u64,
}

fn run_sweep(config: &ExperimentConfig, data: &Dataset) -> Result<SweepOutcome> {
    let method = config.clustering.method;
    let k = config.clustering.k;
    let t_max = config.clustering.t_max;
    let strategy = config.clustering.init;
    let mode = config.clustering.kernel_mode();
    let theta_seeds = theta_seed_list(config);
    let init_seeds = config.clustering.init_seeds.clone();
    let sweeping_theta = theta_seeds.len() > 1;
    let total = theta_seeds.len() * init_seeds.len();

    let mut points = Vec::with_capacity(total);
    let mut best: Option<(usize, ClusteringResult, EvaluationReport, u64, u64)> = None;
    let mut done = 0usize;

    for &theta_seed in &theta_seeds {
        let map = config.map.as_ref().map(|m| {
            let mut fm = m.to_feature_map_config();
            fm.theta_seed = theta_seed;
            fm
        });
        let theta = match &map {
            Some(fm) => theta_for(fm, data.d())?,
            None => ThetaParameters::empty(),
        };
        let distance = if method == Method::KernelMatrix {
            let fm = map.as_ref().expect("validated: kernel_matrix needs a map");
            let cache = kernel_cache_path_for(config, theta_seed, sweeping_theta);
            let (kernel, hit) =
                kernel_via_cache(data, fm, &theta, mode, &cache).stage("kernel matrix")?;
            eprintln!(
                "kernel matrix {} ({})",
                if hit { "cache hit" } else { "computed" },
                cache.display()
            );
            Some(to_distance(&kernel))
        } else {
            None
        };

        for &init_seed in &init_seeds {
            let result = match method {
                Method::Classical => {
                    classical_kmeans(&data.features, k, t_max, strategy, init_seed)
                        .stage("clustering")?
                }
                Method::Quantum => {
                    let fm = map.as_ref().expect("validated: quantum needs a map");
                    quantum_kmeans(
                        &data.features,
                        k,
                        fm,
                        &theta,
                        t_max,
                        mode,
                        strategy,
                        init_seed,
                    )
                    .stage("clustering")?
                }
                Method::KernelMatrix => {
                    kernel_matrix_kmeans(distance.as_ref().unwrap(), k, t_max, init_seed)
                        .stage("clustering")?
                }
            };
            let report =
                evaluate(&result.labels, &data.labels, data.n_classes()).stage("evaluation")?;
            points.push(SweepPoint {
                theta_seed,
                init_seed,
                accuracy: report.accuracy,
                ari: report.ari,
                ami: report.ami,
                iterations_run: result.iterations_run,
                converged: result.converged,
            });
            let index = points.len() - 1;
            let better = match &best {
                None => true,
                Some((_, _, r, _, _)) => report.accuracy > r.accuracy,
            };
            if better {
                best = Some((index, result, report, theta_seed, init_seed));
            }
            done += 1;
            if total > 1 {
                eprintln!(
                    "sweep {done}/{total}: theta_seed={theta_seed} init_seed={init_seed} \
                     accuracy={:.4}",
                    points[index].accuracy
                );
            }
        }
    }

    let (_, best_result, best_report, best_theta_seed, best_init_seed) =
        best.expect("at least one sweep point");
    Ok(SweepOutcome {
        points,
        best_result,
        best_report,
        best_theta_seed,
        best_init_seed,
    })
}

/// Runs the configured pipeline end to end and assembles the run record.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord> {
    let started = Instant::now();
    let prepared = prepare_dataset(config)?;
    let data = &prepared.dataset;
    let outcome = run_sweep(config, data)?;

    let centroids = if outcome.best_result.centroids.is_empty() {
        // medoid path: map representative indices back to feature vectors
        outcome
            .best_result
            .medoids
            .as_ref()
            .map(|ms| ms.iter().map(|&m| data.features[m].clone()).collect())
            .unwrap_or_default()
    } else {
        outcome
            .best_result
            .centroids
            .iter()
            .map(|c| c.vector.clone())
            .collect()
    };

    Ok(RunRecord {
        config: config.clone(),
        config_digest: config.digest(),
        source_fingerprint: prepared.source_fingerprint,
        dataset_fingerprint: data.fingerprint,
        theta_seed: outcome.best_theta_seed,
        init_seed: outcome.best_init_seed,
        labels: outcome.best_result.labels.clone(),
        truth: data.labels.clone(),
        class_names: data.class_names.clone(),
        feature_names: data.feature_names.clone(),
        centroids,
        medoids: outcome.best_result.medoids.clone(),
        iterations_run: outcome.best_result.iterations_run,
        converged: outcome.best_result.converged,
        similarity_trace: outcome.best_result.similarity_trace.clone(),
        report: outcome.best_report,
        sweep: outcome.points,
        duration_seconds: started.elapsed().as_secs_f64(),
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Flat key=value lines, one metric per line; excludes wall-clock time so
/// identical reruns are byte-identical.
pub fn render_results(record: &RunRecord) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}={v}");
    };
    kv("method", record.config.clustering.method.name().to_string());
    kv(
        "map",
        record
            .config
            .map
            .as_ref()
            .map(|m| m.kind.name().to_string())
            .unwrap_or_else(|| "none".to_string()),
    );
    kv("config_digest", record.config_digest.to_hex());
    kv("source_fingerprint", record.source_fingerprint.to_hex());
    kv("dataset_fingerprint", record.dataset_fingerprint.to_hex());
    kv("n", record.labels.len().to_string());
    kv("k", record.config.clustering.k.to_string());
    kv("accuracy", format!("{:.10}", record.report.accuracy));
    kv("ari", format!("{:.10}", record.report.ari));
    kv("ami", format!("{:.10}", record.report.ami));
    kv("iterations", record.iterations_run.to_string());
    kv("converged", record.converged.to_string());
    kv("best.theta_seed", record.theta_seed.to_string());
    kv("best.init_seed", record.init_seed.to_string());
    let accuracies = record.sweep_accuracies();
    let (mean, std) = mean_std(&accuracies);
    kv("sweep.count", accuracies.len().to_string());
    kv(
        "sweep.best_accuracy",
        format!("{:.10}", record.report.accuracy),
    );
    kv("sweep.mean_accuracy", format!("{mean:.10}"));
    kv("sweep.std_accuracy", format!("{std:.10}"));
    kv(
        "sweep.min_accuracy",
        format!(
            "{:.10}",
            accuracies.iter().cloned().fold(f64::INFINITY, f64::min)
        ),
    );
    kv(
        "sweep.max_accuracy",
        format!(
            "{:.10}",
            accuracies.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        ),
    );
    for (t, row) in record.report.confusion.iter().enumerate() {
        for (p, &count) in row.iter().enumerate() {
            let _ = writeln!(out, "confusion.{t}.{p}={count}");
        }
    }
    out
}

/// Human-readable summary mirroring the key=value file.
pub fn render_report(record: &RunRecord) -> String {
    let mut out = String::new();
    let c = &record.config;
    let _ = writeln!(
        out,
        "{} k-means on {}",
        c.clustering.method.name(),
        c.dataset.path
    );
    let _ = writeln!(
        out,
        "  n={} d={} classes={}",
        record.labels.len(),
        record.feature_names.len(),
        record.class_names.len()
    );
    if let Some(m) = &c.map {
        let _ = writeln!(
            out,
            "  map: {} ({} qubits, {} rep{}, {:?} entanglement)",
            m.kind.name(),
            m.qubits,
            m.reps,
            if m.reps == 1 { "" } else { "s" },
            m.entanglement
        );
    }
    let _ = writeln!(
        out,
        "  k={} t_max={} init={:?} mode={:?}",
        c.clustering.k, c.clustering.t_max, c.clustering.init, c.clustering.mode
    );
    let accuracies = record.sweep_accuracies();
    let (mean, std) = mean_std(&accuracies);
    let _ = writeln!(
        out,
        "  sweep: {} runs, accuracy best={:.4} mean={:.4} std={:.4}",
        accuracies.len(),
        record.report.accuracy,
        mean,
        std
    );
    let _ = writeln!(
        out,
        "best run: theta_seed={} init_seed={} iterations={}{}",
        record.theta_seed,
        record.init_seed,
        record.iterations_run,
        if record.converged { " (converged)" } else { "" }
    );
    let _ = writeln!(out, "  accuracy = {:.4}", record.report.accuracy);
    let _ = writeln!(out, "  ari      = {:.4}", record.report.ari);
    let _ = writeln!(out, "  ami      = {:.4}", record.report.ami);
    let _ = writeln!(out, "confusion matrix (rows = truth, cols = predicted):");
    let name_width = record
        .class_names
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(6)
        .max(6);
    let _ = write!(out, "  {:name_width$}", "");
    for name in &record.class_names {
        let _ = write!(out, " {name:>10}");
    }
    out.push('\n');
    for (t, row) in record.report.confusion.iter().enumerate() {
        let _ = write!(out, "  {:name_width$}", record.class_names[t]);
        for &count in row {
            let _ = write!(out, " {count:>10}");
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent()
        && !parent.as_os_str().is_empty()
    {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// `run` command: executes the pipeline, writes the text report, the
/// key=value results, and the JSON run record.
pub fn cmd_run(config_path: &Path, overrides: &Overrides) -> Result<RunRecord> {
    let mut config = ExperimentConfig::load(config_path).stage("config")?;
    overrides.apply(&mut config);
    let record = run_experiment(&config)?;
    write_file(&config.report_path(), &render_report(&record)).stage("report output")?;
    write_file(&config.results_path(), &render_results(&record)).stage("results output")?;
    let json = serde_json::to_string_pretty(&record)
        .map_err(|e| Error::Config(format!("record serialization: {e}")))?;
    write_file(&config.record_path(), &json).stage("record output")?;
    Ok(record)
}

/// `compare` command: runs every config (sweeps included), checks they share
/// a dataset, and renders a tab-delimited table sorted by accuracy.
pub fn cmd_compare(config_paths: &[PathBuf], overrides: &Overrides) -> Result<String> {
    if config_paths.len() < 2 {
        return Err(Error::invalid("compare needs at least two configs"));
    }
    let mut rows: Vec<(String, String, RunRecord)> = Vec::new();
    for path in config_paths {
        let mut config = ExperimentConfig::load(path).stage("config")?;
        let scoped = Overrides {
            out: overrides.out.as_ref().map(|d| {
                d.join(
                    path.file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "config".to_string()),
                )
            }),
            ..overrides.clone()
        };
        scoped.apply(&mut config);
        let label = config
            .map
            .as_ref()
            .map(|m| format!("{} ({:?}, {}q)", m.kind.name(), m.entanglement, m.qubits))
            .unwrap_or_else(|| "classical".to_string());
        let record = run_experiment(&config)
            .map_err(|e| e.in_stage(&format!("config {}", path.display())))?;
        rows.push((label, config.clustering.method.name().to_string(), record));
    }

    let first = rows[0].2.source_fingerprint;
    for (_, _, record) in &rows {
        if record.source_fingerprint != first {
            return Err(Error::invalid(
                "compare needs configs over the same dataset (fingerprint mismatch)",
            ));
        }
    }

    rows.sort_by(|a, b| b.2.report.accuracy.total_cmp(&a.2.report.accuracy));
    let mut table = String::from("model\tmethod\taccuracy\tari\tami\n");
    for (label, method, record) in &rows {
        let _ = writeln!(
            table,
            "{label}\t{method}\t{:.4}\t{:.4}\t{:.4}",
            record.report.accuracy, record.report.ari, record.report.ami
        );
    }
    Ok(table)
}

/// `kernel` command: computes (or reloads) the full kernel matrix through
/// the cache and prints summary statistics.
pub fn cmd_kernel(config_path: &Path, overrides: &Overrides) -> Result<String> {
    let mut config = ExperimentConfig::load(config_path).stage("config")?;
    overrides.apply(&mut config);
    let map_block = config
        .map
        .as_ref()
        .ok_or_else(|| Error::Config("kernel command needs a [map] block".to_string()))?;
    let prepared = prepare_dataset(&config)?;
    let fm = map_block.to_feature_map_config();
    let theta = theta_for(&fm, prepared.dataset.d())?;
    let mode = config.clustering.kernel_mode();
    let cache = config.kernel_cache_path();
    let (kernel, hit) =
        kernel_via_cache(&prepared.dataset, &fm, &theta, mode, &cache).stage("kernel matrix")?;

    let (min, mean) = kernel.off_diagonal_stats();
    let diag_ok = (0..kernel.n()).all(|i| (kernel.get(i, i) - 1.0).abs() <= 1e-12);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "kernel {} ({})",
        if hit {
            "cache hit"
        } else {
            "computed and cached"
        },
        cache.display()
    );
    let _ = writeln!(out, "n={} mode={:?}", kernel.n(), kernel.mode);
    let _ = writeln!(out, "off-diagonal min={min:.6} mean={mean:.6}");
    let _ = writeln!(
        out,
        "symmetric={} unit_diagonal={diag_ok}",
        kernel.is_symmetric()
    );
    Ok(out)
}

/// Written plot artifacts.
#[derive(Debug)]
pub struct PlotOutputs {
    pub files: Vec<PathBuf>,
}

/// `plot` command: renders the confusion heatmap and the truth/predicted
/// scatter panels from a run record, with the numbers alongside as TSV.
pub fn cmd_plot(record_path: &Path, overrides: &Overrides) -> Result<PlotOutputs> {
    let text = fs::read_to_string(record_path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(record_path.to_path_buf())
        } else {
            Error::Io(e)
        }
    })?;
    let record: RunRecord =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("run record parse: {e}")))?;

    let dir = overrides
        .out
        .clone()
        .unwrap_or_else(|| record.config.plot_dir());
    fs::create_dir_all(&dir)?;

    let title = format!(
        "{} on {}",
        record
            .config
            .map
            .as_ref()
            .map(|m| m.kind.name().to_string())
            .unwrap_or_else(|| "classical k-means".to_string()),
        record.config.dataset.path
    );

    let heatmap =
        plot::confusion_heatmap_svg(&record.report.confusion, &record.class_names, &title);
    let confusion_tsv = plot::confusion_tsv(&record.report.confusion, &record.class_names);

    // scatter needs the feature values: rebuild the scaled dataset and check
    // it still matches the record
    let prepared = prepare_dataset(&record.config)?;
    if prepared.dataset.fingerprint != record.dataset_fingerprint {
        return Err(Error::invalid(
            "dataset on disk no longer matches the run record fingerprint",
        ));
    }
    let names = &prepared.dataset.feature_names;
    let pair: (usize, usize) = match &record.config.output.scatter_features {
        Some(refs) if refs.len() >= 2 => {
            let resolve = |r: &ColumnRef| -> Result<usize> {
                match r {
                    ColumnRef::Index(i) if *i < names.len() => Ok(*i),
                    ColumnRef::Name(n) => names
                        .iter()
                        .position(|f| f == n)
                        .ok_or_else(|| Error::invalid(format!("unknown scatter feature '{n}'"))),
                    ColumnRef::Index(i) => Err(Error::invalid(format!(
                        "scatter feature index {i} out of range"
                    ))),
                }
            };
            (resolve(&refs[0])?, resolve(&refs[1])?)
        }
        _ => (0, 1.min(names.len() - 1)),
    };
    let points: Vec<(f64, f64)> = prepared
        .dataset
        .features
        .iter()
        .map(|row| (row[pair.0], row[pair.1]))
        .collect();
    let aligned: Vec<usize> = {
        // color the predicted panel by each cluster's majority class so the
        // two panels share a palette
        let alignment = crate::evaluation::majority_vote(&record.labels, &record.truth)?;
        record
            .labels
            .iter()
            .map(|l| *alignment.cluster_to_class.get(l).unwrap_or(l))
            .collect()
    };
    let scatter = plot::scatter_panels_svg(
        &points,
        &record.truth,
        &aligned,
        &record.class_names,
        &names[pair.0],
        &names[pair.1],
        &title,
    );
    let scatter_tsv = plot::scatter_tsv(
        &points,
        &record.truth,
        &record.labels,
        &names[pair.0],
        &names[pair.1],
    );

    let files = vec![
        (dir.join("confusion.svg"), heatmap),
        (dir.join("confusion.tsv"), confusion_tsv),
        (dir.join("scatter.svg"), scatter),
        (dir.join("scatter.tsv"), scatter_tsv),
    ];
    let mut written = Vec::new();
    for (path, contents) in files {
        write_file(&path, &contents)?;
        written.push(path);
    }
    Ok(PlotOutputs { files: written })
}
