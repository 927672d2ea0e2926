//! Experiment loop: bootstrap, QD iterations with periodic size control,
//! and (for AURORA) encoder phases on the triangular schedule.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Variant};
use crate::container::{AddOutcome, Container, ContainerEntry};
use crate::dimred::{EncoderModel, EncoderSchedule, FitReport, ReconstructionStats};
use crate::env::{simulate_episode, Evaluation, GENOTYPE_LEN, TRAJECTORY_LEN};
use crate::error::{Error, Result};
use crate::genotype::{Genotype, GENE_MAX, GENE_MIN};
use crate::metrics::{self, EntropyReport};
use crate::rng::{Purpose, RngState};
use crate::snapshot::{format_float, Snapshot};
use crate::variation::{polynomial_mutate, select_uniform_indices, MutationParams};

/// Archive size and threshold after an iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeSample {
    pub iteration: usize,
    pub size: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderPhaseRecord {
    pub iteration: usize,
    pub loss_before: Option<ReconstructionStats>,
    pub loss_after: ReconstructionStats,
    pub size_before: usize,
    pub size_after: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub sizes: Vec<SizeSample>,
    pub container_updates: Vec<usize>,
    pub encoder_phases: Vec<EncoderPhaseRecord>,
    pub bootstrap_fit: Option<FitReport>,
    pub evaluations: usize,
    pub added: usize,
    pub replaced: usize,
    pub rejected: usize,
}

impl RunTrace {
    fn count(&mut self, outcome: AddOutcome) {
        match outcome {
            AddOutcome::Added => self.added += 1,
            AddOutcome::ReplacedNearest => self.replaced += 1,
            AddOutcome::Rejected => self.rejected += 1,
        }
    }

    pub fn encoder_phase_iterations(&self) -> Vec<usize> {
        self.encoder_phases.iter().map(|p| p.iteration).collect()
    }
}

pub struct RunState {
    pub config: ExperimentConfig,
    pub iteration: usize,
    pub container: Container,
    /// Present only for variants that learn their descriptor.
    pub encoder: Option<EncoderModel>,
    pub schedule: Option<EncoderSchedule>,
    pub rng: RngState,
    pub trace: RunTrace,
    mutation: MutationParams,
    pool: Option<Arc<rayon::ThreadPool>>,
}

/// Active descriptor of an evaluated policy under `variant`.
pub fn descriptor(variant: Variant, evaluation: &Evaluation, encoder: Option<&EncoderModel>) -> Result<Vec<f64>> {
    match variant {
        Variant::Aurora => encoder
            .ok_or(Error::NotFitted)?
            .encode(evaluation.trajectory.as_slice()),
        Variant::MeanStreams => Ok(evaluation.bd_mes.to_vec()),
        hc => Ok(evaluation
            .task_bd(hc.hand_coded_task().expect("hand-coded variant"))
            .to_vec()),
    }
}

fn descriptor_dim(config: &ExperimentConfig) -> usize {
    match config.variant {
        Variant::Aurora => config.latent_dim,
        Variant::MeanStreams => crate::env::N_STREAMS,
        _ => 2,
    }
}

impl RunState {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            None => (0..n).map(f).collect(),
        }
    }

    fn make_entry(&self, genotype: Genotype, evaluation: Evaluation) -> Result<ContainerEntry> {
        let bd = descriptor(self.config.variant, &evaluation, self.encoder.as_ref())?;
        Ok(ContainerEntry::new(genotype, bd, evaluation, self.config.active_task()))
    }

    fn record_size(&mut self) {
        self.trace.sizes.push(SizeSample {
            iteration: self.iteration,
            size: self.container.len(),
            threshold: self.container.threshold(),
        });
    }

    fn trajectories(&self) -> Vec<&[f64]> {
        self.container
            .iter()
            .map(|e| e.evaluation.trajectory.as_slice())
            .collect()
    }

    /// Entropy of archived trajectories against entropy of their active descriptors.
    pub fn entropy_report(&self) -> Result<EntropyReport> {
        let trajs = self.trajectories();
        metrics::entropy_inequality_report(&trajs, |t| match &self.encoder {
            Some(enc) => enc.encode(t),
            None => {
                // Baselines: the stored descriptor is a function of the trajectory.
                let e = self
                    .container
                    .iter()
                    .find(|e| e.evaluation.trajectory.as_slice() == t)
                    .expect("trajectory comes from the archive");
                Ok(e.bd.clone())
            }
        })
    }
}

/// Evaluates the random bootstrap population and seeds the archive.
pub fn init_run(config: ExperimentConfig) -> Result<RunState> {
    config.validate()?;
    let rng = RngState::new(config.seed);
    let pool = if config.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Some(Arc::new(pool))
    } else {
        None
    };
    let mutation = MutationParams::for_genotype(config.mutation_eta, config.mutation_rate, GENOTYPE_LEN)?;
    let container = Container::new(descriptor_dim(&config), config.initial_threshold, config.novelty_k);
    let schedule = config
        .variant
        .uses_encoder()
        .then(|| EncoderSchedule::new(config.encoder.first_update));
    let mut state = RunState {
        iteration: 0,
        container,
        encoder: None,
        schedule,
        rng,
        trace: RunTrace::default(),
        mutation,
        pool,
        config,
    };

    let mut boot_rng = state.rng.split(Purpose::Bootstrap, 0);
    let genotypes: Vec<Genotype> = (0..state.config.bootstrap_size)
        .map(|_| {
            let genes = (0..GENOTYPE_LEN)
                .map(|_| boot_rng.random_range(GENE_MIN..=GENE_MAX))
                .collect();
            Genotype::new(genes)
        })
        .collect::<Result<_>>()?;
    let evaluations = state
        .map_indexed(genotypes.len(), |i| simulate_episode(&genotypes[i]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    state.trace.evaluations += evaluations.len();

    if state.config.variant.uses_encoder() {
        let mut init_rng = state.rng.split(Purpose::Encoder, 0);
        let mut encoder = EncoderModel::new(TRAJECTORY_LEN, state.config.latent_dim, &state.config.encoder, &mut init_rng);
        let rows: Vec<&[f64]> = evaluations.iter().map(|e| e.trajectory.as_slice()).collect();
        let report = encoder.fit(&rows, &mut state.rng.split(Purpose::Encoder, 1))?;
        state.trace.bootstrap_fit = Some(report);
        state.encoder = Some(encoder);
    }

    for (g, e) in genotypes.into_iter().zip(evaluations) {
        let entry = state.make_entry(g, e)?;
        let outcome = state.container.try_add(entry)?;
        state.trace.count(outcome);
    }
    state.record_size();
    Ok(state)
}

/// Select, mutate, evaluate and insert one batch; runs size control every
/// `container_update_period` iterations.
pub fn qd_iteration(state: &mut RunState) -> Result<()> {
    state.iteration += 1;
    let it = state.iteration as u64;
    let batch = state.config.batch_size;
    let parents = select_uniform_indices(&state.container, batch, &mut state.rng.split(Purpose::Selection, it))?;
    let offspring = {
        let s = &*state;
        s.map_indexed(batch, |j| -> Result<ContainerEntry> {
            let mut rng = s.rng.split(Purpose::Variation, it * batch as u64 + j as u64);
            let parent = &s.container.entries()[parents[j]].genotype;
            let child = polynomial_mutate(parent, &s.mutation, &mut rng)?;
            let evaluation = simulate_episode(&child)?;
            s.make_entry(child, evaluation)
        })
    };
    state.trace.evaluations += batch;
    for entry in offspring {
        let outcome = state.container.try_add(entry?)?;
        state.trace.count(outcome);
    }
    if state.iteration.is_multiple_of(state.config.container_update_period) {
        state.container.update(state.config.container_target);
        state.trace.container_updates.push(state.iteration);
    }
    state.record_size();
    Ok(())
}

/// Whether an encoder phase is due after the current iteration.
pub fn encoder_phase_due(state: &RunState) -> bool {
    state
        .schedule
        .as_ref()
        .is_some_and(|s| s.next_iteration() == state.iteration)
}

/// Retrains the encoder on all archived trajectories and recomputes every descriptor.
pub fn encoder_phase(state: &mut RunState) -> Result<()> {
    let phase = state
        .schedule
        .as_ref()
        .ok_or_else(|| Error::Config("encoder phase requested for a variant without encoder".into()))?
        .completed();
    let mut rng = state.rng.split(Purpose::Encoder, phase as u64 + 2);
    let size_before = state.container.len();
    let rows: Vec<&[f64]> = state
        .container
        .iter()
        .map(|e| e.evaluation.trajectory.as_slice())
        .collect();
    let encoder = state.encoder.as_mut().ok_or(Error::NotFitted)?;
    let report = encoder.fit(&rows, &mut rng)?;
    let encoder = &*encoder;
    state
        .container
        .refresh_descriptors(|e| encoder.encode(e.trajectory.as_slice()))?;
    state.trace.encoder_phases.push(EncoderPhaseRecord {
        iteration: state.iteration,
        loss_before: report.loss_before,
        loss_after: report.loss_after,
        size_before,
        size_after: state.container.len(),
    });
    if let Some(s) = state.schedule.as_mut() {
        s.advance();
    }
    Ok(())
}

/// Full run: bootstrap then `n_iterations` QD iterations with scheduled encoder phases.
pub fn run(config: ExperimentConfig) -> Result<RunState> {
    run_with_progress(config, |_| {})
}

pub fn run_with_progress<F: FnMut(&RunState)>(config: ExperimentConfig, mut progress: F) -> Result<RunState> {
    let mut state = init_run(config)?;
    while state.iteration < state.config.n_iterations {
        qd_iteration(&mut state)?;
        if encoder_phase_due(&state) {
            encoder_phase(&mut state)?;
        }
        progress(&state);
    }
    Ok(state)
}

/// Snapshot, metrics CSVs and (for AURORA) the encoder file; returns the written paths.
pub fn write_artifacts(state: &RunState, dir: &Path, plot: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg = &state.config;
    let mut written = Vec::new();

    let snapshot = Snapshot::from_container(&state.container);
    let path = dir.join("snapshot.csv");
    snapshot.write(&path)?;
    written.push(path);

    for &task in &cfg.tasks {
        let points = snapshot.task_points(task)?;
        let curve = if points.is_empty() {
            metrics::coverage_only(&points, task)
        } else if task == cfg.active_task() {
            metrics::coverage_curve(&points, task, 20)?
        } else {
            metrics::coverage_only(&points, task)
        };
        let path = dir.join(format!("coverage_{task}.csv"));
        metrics::write_coverage_csv(&path, &curve, cfg.seed, cfg.variant.name())?;
        written.push(path);
        if plot {
            let path = dir.join(format!("scatter_{task}.svg"));
            let title = format!("{} seed {} on {task}", cfg.variant, cfg.seed);
            std::fs::write(&path, metrics::scatter_svg(&points, &title)).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }

    let path = dir.join("entropy.csv");
    metrics::write_entropy_csv(&path, &state.entropy_report()?, cfg.seed, cfg.variant.name())?;
    written.push(path);

    let path = dir.join("size_trace.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["iteration", "size", "threshold"])?;
    for s in &state.trace.sizes {
        w.write_record([s.iteration.to_string(), s.size.to_string(), format_float(s.threshold)])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    written.push(path);

    if let Some(encoder) = &state.encoder {
        let path = dir.join("encoder_phases.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record([
            "iteration",
            "loss_before_mean",
            "loss_before_median",
            "loss_after_mean",
            "loss_after_median",
            "size_before",
            "size_after",
        ])?;
        let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        for p in &state.trace.encoder_phases {
            w.write_record([
                p.iteration.to_string(),
                opt(p.loss_before.map(|l| l.mean)),
                opt(p.loss_before.map(|l| l.median)),
                format_float(p.loss_after.mean),
                format_float(p.loss_after.median),
                p.size_before.to_string(),
                p.size_after.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);

        let path = dir.join("encoder.bin");
        encoder.save(&path)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{EncoderKind, Task};

    fn small(variant: Variant) -> ExperimentConfig {
        let mut c = ExperimentConfig {
            variant,
            n_iterations: 30,
            batch_size: 16,
            bootstrap_size: 64,
            container_target: 50,
            ..ExperimentConfig::default()
        };
        c.encoder.train_steps = 50;
        c.encoder.hidden = 16;
        c.encoder.batch_size = 32;
        c
    }

    #[test]
    fn evaluation_count_and_update_cadence() {
        let state = run(small(Variant::HcNav)).unwrap();
        assert_eq!(state.trace.evaluations, 64 + 16 * 30);
        assert_eq!(state.trace.container_updates, vec![10, 20, 30]);
        assert!(state.encoder.is_none());
        assert_eq!(state.trace.sizes.len(), 31);
    }

    #[test]
    fn bootstrap_only_run() {
        let mut c = small(Variant::MeanStreams);
        c.n_iterations = 0;
        let state = run(c).unwrap();
        assert_eq!(state.iteration, 0);
        assert!(state.container.len() <= 64 && !state.container.is_empty());
        assert_eq!(state.trace.evaluations, 64);
    }

    #[test]
    fn cloned_parents_without_mutation_are_rejected() {
        let mut c = small(Variant::HcForw);
        c.n_iterations = 0;
        let mut state = init_run(c).unwrap();
        state.mutation.rate = 0.0;
        let before = state.trace.rejected;
        qd_iteration(&mut state).unwrap();
        assert_eq!(state.trace.rejected - before, 16);
    }

    #[test]
    fn aurora_schedule_and_descriptor_consistency() {
        let mut c = small(Variant::Aurora);
        c.n_iterations = 100;
        let state = run(c).unwrap();
        assert_eq!(state.trace.encoder_phase_iterations(), vec![10, 30, 60, 100]);
        let enc = state.encoder.as_ref().unwrap();
        for e in state.container.iter() {
            assert_eq!(e.bd, enc.encode(e.evaluation.trajectory.as_slice()).unwrap());
            assert!(e.bd.iter().all(|b| (0.0..=1.0).contains(b)));
            assert_eq!(e.fitness, e.evaluation.score(Task::Nav));
        }
    }

    #[test]
    fn aurora_bootstrap_descriptors_in_unit_box() {
        let mut c = small(Variant::Aurora);
        c.n_iterations = 0;
        c.encoder.kind = EncoderKind::Pca;
        let state = init_run(c).unwrap();
        assert!(state.trace.bootstrap_fit.is_some());
        for e in state.container.iter() {
            assert!(e.bd.iter().all(|b| (0.0..=1.0).contains(b)));
        }
    }

    #[test]
    fn identical_archive_collapses_after_encoder_phase() {
        let mut c = small(Variant::Aurora);
        c.n_iterations = 0;
        c.encoder.kind = EncoderKind::Pca;
        let mut state = init_run(c).unwrap();
        // Force every entry to hold the same trajectory.
        let template = state.container.entries()[0].evaluation.clone();
        let mut forced = Container::new(2, state.container.threshold(), 15);
        for (i, e) in state.container.iter().enumerate() {
            let mut e = e.clone();
            e.evaluation = template.clone();
            e.bd = vec![i as f64, 0.0];
            forced.try_add(e).unwrap();
        }
        assert!(forced.len() > 1);
        state.container = forced;
        state.iteration = 10;
        encoder_phase(&mut state).unwrap();
        assert_eq!(state.container.len(), 1);
    }

    #[test]
    fn threads_do_not_change_results() {
        let mut a = small(Variant::Aurora);
        a.n_iterations = 20;
        let mut b = a.clone();
        b.threads = 3;
        let sa = run(a).unwrap();
        let sb = run(b).unwrap();
        assert_eq!(
            Snapshot::from_container(&sa.container),
            Snapshot::from_container(&sb.container)
        );
        assert_eq!(sa.trace.sizes, sb.trace.sizes);
    }
}
