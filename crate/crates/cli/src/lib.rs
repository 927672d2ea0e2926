//! Subcommand implementations behind the `aurora` binary.
//!
//! Exit codes: 0 on success, 1 for configuration or input errors, 2 when a
//! run diverges (non-finite encoder loss).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use aurora_qd::metrics::{self, TaskPoint};
use aurora_qd::runner::{self, RunState};
use aurora_qd::snapshot::Snapshot;
use aurora_qd::{ExperimentConfig, Task, Variant};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SNAPSHOT_FILE: &str = "snapshot.csv";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] aurora_qd::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(aurora_qd::Error::Divergence { .. }) => 2,
            _ => 1,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputHash {
    pub file: String,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// `ok`, or `failed` for the diagnostic manifest of an aborted run.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub variant: Variant,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub timings: Timings,
    pub iterations: usize,
    pub evaluations: usize,
    pub final_container_size: usize,
    pub final_threshold: f64,
    pub encoder_phase_iterations: Vec<usize>,
    pub outputs: Vec<OutputHash>,
    pub outputs_hash: String,
}

impl RunManifest {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }
}

/// Hash of a file body framed like a git blob, with SHA-256.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Combined hash over `(file, hash)` pairs, independent of listing order.
pub fn combined_hash(outputs: &[OutputHash]) -> String {
    let mut sorted: Vec<&OutputHash> = outputs.iter().collect();
    sorted.sort_by(|a, b| a.file.cmp(&b.file));
    let mut h = Sha256::new();
    for o in sorted {
        h.update(format!("{}  {}\n", o.hash, o.file).as_bytes());
    }
    hex::encode(h.finalize())
}

pub fn hash_outputs(dir: &Path, files: &[PathBuf]) -> CliResult<Vec<OutputHash>> {
    files
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p).map_err(|e| CliError::io(p, e))?;
            let file = p
                .strip_prefix(dir)
                .unwrap_or(p)
                .to_string_lossy()
                .replace('\\', "/");
            Ok(OutputHash {
                file,
                hash: blob_hash(&bytes),
            })
        })
        .collect()
}

/// Re-hashes every file listed in the manifest in `dir` and compares.
pub fn verify_manifest(dir: &Path, manifest: &RunManifest) -> CliResult<bool> {
    let files: Vec<PathBuf> = manifest.outputs.iter().map(|o| dir.join(&o.file)).collect();
    let fresh = hash_outputs(dir, &files)?;
    Ok(fresh == manifest.outputs && combined_hash(&fresh) == manifest.outputs_hash)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub variant: Option<Variant>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub plot: bool,
}

pub fn resolve_config(opts: &RunOptions) -> CliResult<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(variant) = opts.variant {
        config.variant = variant;
    }
    if let Some(threads) = opts.threads {
        config.threads = threads;
    }
    if let Some(dir) = &opts.out_dir {
        config.output_dir = dir.clone();
    }
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Default)]
struct Progress {
    iteration: usize,
    evaluations: usize,
    size: usize,
    threshold: f64,
    phases: Vec<usize>,
}

impl Progress {
    fn record(&mut self, s: &RunState) {
        self.iteration = s.iteration;
        self.evaluations = s.trace.evaluations;
        self.size = s.container.len();
        self.threshold = s.container.threshold();
        self.phases = s.trace.encoder_phase_iterations();
    }
}

/// Runs one experiment and writes its artifacts plus `manifest.json`.
///
/// A failed run still leaves a manifest with `status = "failed"`.
pub fn cmd_run(opts: &RunOptions) -> CliResult<RunManifest> {
    let config = resolve_config(opts)?;
    run_config(config, opts.plot)
}

pub fn run_config(config: ExperimentConfig, plot: bool) -> CliResult<RunManifest> {
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let start = Instant::now();
    let mut progress = Progress::default();
    let outcome = runner::run_with_progress(config.clone(), |s| progress.record(s)).and_then(|state| {
        let files = runner::write_artifacts(&state, &dir, plot)?;
        Ok((state, files))
    });
    let mut manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        status: "ok".into(),
        error: None,
        variant: config.variant,
        seed: config.seed,
        config,
        timings: Timings {
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        },
        iterations: progress.iteration,
        evaluations: progress.evaluations,
        final_container_size: progress.size,
        final_threshold: progress.threshold,
        encoder_phase_iterations: progress.phases,
        outputs: Vec::new(),
        outputs_hash: combined_hash(&[]),
    };
    match outcome {
        Ok((state, files)) => {
            manifest.iterations = state.iteration;
            manifest.evaluations = state.trace.evaluations;
            manifest.final_container_size = state.container.len();
            manifest.final_threshold = state.container.threshold();
            manifest.encoder_phase_iterations = state.trace.encoder_phase_iterations();
            manifest.outputs = hash_outputs(&dir, &files)?;
            manifest.outputs_hash = combined_hash(&manifest.outputs);
            manifest.write(&dir.join(MANIFEST_FILE))?;
            Ok(manifest)
        }
        Err(e) => {
            manifest.status = "failed".into();
            manifest.error = Some(e.to_string());
            manifest.write(&dir.join(MANIFEST_FILE))?;
            Err(e.into())
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub snapshot: PathBuf,
    /// Empty means every task present in the snapshot.
    pub tasks: Vec<Task>,
    pub out_dir: Option<PathBuf>,
    pub n_thresholds: usize,
    pub plot: bool,
}

/// Writes `coverage_<task>.csv` per requested task; returns the written paths.
///
/// With a manifest next to the snapshot, only the task that drove replacement
/// gets a full threshold sweep; others get total coverage only.
pub fn cmd_eval(opts: &EvalOptions) -> CliResult<Vec<PathBuf>> {
    let snapshot = Snapshot::read(&opts.snapshot)?;
    let parent = opts.snapshot.parent().unwrap_or(Path::new("."));
    let out_dir = opts.out_dir.clone().unwrap_or_else(|| parent.join("eval"));
    let manifest_path = parent.join(MANIFEST_FILE);
    let manifest = if manifest_path.exists() {
        Some(RunManifest::read(&manifest_path)?)
    } else {
        None
    };
    let tasks = if opts.tasks.is_empty() {
        snapshot.tasks.clone()
    } else {
        opts.tasks.clone()
    };
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let (seed, label) = match &manifest {
        Some(m) => (m.seed, m.variant.name()),
        None => (0, "unknown"),
    };
    let mut written = Vec::new();
    for task in tasks {
        let points = snapshot.task_points(task)?;
        let full = match &manifest {
            Some(m) => m.config.active_task() == task,
            None => true,
        };
        let curve = if full && !points.is_empty() {
            metrics::coverage_curve(&points, task, opts.n_thresholds)?
        } else {
            metrics::coverage_only(&points, task)
        };
        let path = out_dir.join(format!("coverage_{task}.csv"));
        metrics::write_coverage_csv(&path, &curve, seed, label)?;
        written.push(path);
        if opts.plot {
            let path = out_dir.join(format!("scatter_{task}.svg"));
            std::fs::write(&path, metrics::scatter_svg(&points, &format!("{label} seed {seed} on {task}")))
                .map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub variant: Variant,
    pub seed: u64,
    pub coverage: usize,
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariantSummary {
    pub variant: Variant,
    pub runs: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    pub task: Task,
    pub rows: Vec<CompareRow>,
    pub summary: Vec<VariantSummary>,
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn total_coverage_of(snapshot: &Snapshot, task: Task) -> CliResult<usize> {
    let points: Vec<TaskPoint> = snapshot.task_points(task)?;
    Ok(metrics::total_coverage(&points))
}

/// Total coverage on `task` for every run matched by `pattern`, plus per-variant
/// median and quartiles.
pub fn cmd_compare(pattern: &str, task: Task) -> CliResult<CompareTable> {
    let paths = glob::glob(pattern).map_err(|e| CliError::Usage(format!("bad glob `{pattern}`: {e}")))?;
    let mut manifests = Vec::new();
    for p in paths {
        let p = p.map_err(|e| CliError::Usage(e.to_string()))?;
        manifests.push(p);
    }
    manifests.sort();
    if manifests.len() < 2 {
        return Err(CliError::Usage(format!(
            "`{pattern}` matched {} manifest(s); at least 2 are needed",
            manifests.len()
        )));
    }
    let mut rows = Vec::new();
    for path in manifests {
        let manifest = RunManifest::read(&path)?;
        if manifest.status != "ok" {
            return Err(CliError::Usage(format!("{}: run did not finish", path.display())));
        }
        let dir = path.parent().unwrap_or(Path::new("."));
        let snapshot = Snapshot::read(&dir.join(SNAPSHOT_FILE))?;
        rows.push(CompareRow {
            variant: manifest.variant,
            seed: manifest.seed,
            coverage: total_coverage_of(&snapshot, task)?,
            manifest: path,
        });
    }
    rows.sort_by_key(|r| (r.variant, r.seed));
    let mut groups: BTreeMap<Variant, Vec<f64>> = BTreeMap::new();
    for r in &rows {
        groups.entry(r.variant).or_default().push(r.coverage as f64);
    }
    let summary = groups
        .into_iter()
        .map(|(variant, mut v)| {
            v.sort_by(f64::total_cmp);
            VariantSummary {
                variant,
                runs: v.len(),
                median: quantile(&v, 0.5),
                q1: quantile(&v, 0.25),
                q3: quantile(&v, 0.75),
            }
        })
        .collect();
    Ok(CompareTable { task, rows, summary })
}

impl CompareTable {
    pub fn summary_for(&self, variant: Variant) -> Option<&VariantSummary> {
        self.summary.iter().find(|s| s.variant == variant)
    }

    /// Raw rows, then one summary row per variant.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,variant,seed,task,coverage,q1,q3\n");
        for r in &self.rows {
            out += &format!("run,{},{},{},{},,\n", r.variant, r.seed, self.task, r.coverage);
        }
        for s in &self.summary {
            out += &format!("median,{},,{},{},{},{}\n", s.variant, self.task, s.median, s.q1, s.q3);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git_sha256_objects() {
        // `git hash-object` in a repository created with --object-format=sha256.
        assert_eq!(
            blob_hash(b"hello"),
            "8aec4e4876f854f688d0ebfc8f37598f38e5fd6903cccc850ca36591175aeb60"
        );
        assert_eq!(
            blob_hash(b""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }

    #[test]
    fn combined_hash_ignores_listing_order() {
        let out = |file: &str, body: &[u8]| OutputHash {
            file: file.into(),
            hash: blob_hash(body),
        };
        let (a, b) = (out("a.csv", b"1"), out("b.csv", b"2"));
        assert_eq!(combined_hash(&[a.clone(), b.clone()]), combined_hash(&[b, a.clone()]));
        assert_ne!(
            combined_hash(&[a.clone(), out("b.csv", b"2")]),
            combined_hash(&[a, out("b.csv", b"3")])
        );
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.5), 1.5);
        assert_eq!(quantile(&[7.0], 0.75), 7.0);
    }

    #[test]
    fn divergence_maps_to_exit_two() {
        let e: CliError = aurora_qd::Error::Divergence { step: 3, loss: f64::NAN }.into();
        assert_eq!(e.exit_code(), 2);
        let e: CliError = aurora_qd::Error::Config("x".into()).into();
        assert_eq!(e.exit_code(), 1);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
    }
}
