//! Unstructured archive with distance-threshold insertion and size control.

mod kdtree;

pub use kdtree::{squared_distance, KdTree};

use crate::config::Task;
use crate::env::Evaluation;
use crate::error::{Error, Result};
use crate::genotype::Genotype;

/// One archived policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ContainerEntry {
    pub genotype: Genotype,
    /// Active descriptor used for novelty and insertion.
    pub bd: Vec<f64>,
    pub evaluation: Evaluation,
    pub fitness: f64,
}

impl ContainerEntry {
    /// Entry whose fitness is `task`'s score on `evaluation`.
    pub fn new(genotype: Genotype, bd: Vec<f64>, evaluation: Evaluation, task: Task) -> Self {
        let fitness = evaluation.score(task);
        Self {
            genotype,
            bd,
            evaluation,
            fitness,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AddOutcome {
    Added,
    ReplacedNearest,
    Rejected,
}

#[derive(Debug, Clone)]
pub struct Container {
    entries: Vec<ContainerEntry>,
    dim: usize,
    /// Minimum distance to the nearest entry for a plain addition.
    threshold: f64,
    k: usize,
    index: KdTree,
}

impl Container {
    pub fn new(dim: usize, threshold: f64, k: usize) -> Self {
        assert!(dim >= 1 && k >= 1, "descriptor dimension and k must be >= 1");
        assert!(threshold > 0.0, "threshold must be positive");
        Self {
            entries: Vec::new(),
            dim,
            threshold,
            k,
            index: KdTree::new(dim),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn entries(&self) -> &[ContainerEntry] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &ContainerEntry> {
        self.entries.iter()
    }

    fn check_dim(&self, bd: &[f64]) -> Result<()> {
        if bd.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: bd.len(),
            });
        }
        Ok(())
    }

    /// Index and distance of the closest entry (lowest index on ties).
    pub fn nearest(&self, bd: &[f64]) -> Result<Option<(usize, f64)>> {
        self.check_dim(bd)?;
        Ok(self.index.nearest(bd, 1).first().map(|&(d2, id)| (id, d2.sqrt())))
    }

    /// Mean distance to the `min(k, len)` nearest entries; `+inf` when empty.
    pub fn novelty(&self, bd: &[f64]) -> Result<f64> {
        self.check_dim(bd)?;
        let near = self.index.nearest(bd, self.k);
        if near.is_empty() {
            return Ok(f64::INFINITY);
        }
        Ok(near.iter().map(|(d2, _)| d2.sqrt()).sum::<f64>() / near.len() as f64)
    }

    pub fn try_add(&mut self, candidate: ContainerEntry) -> Result<AddOutcome> {
        self.check_dim(&candidate.bd)?;
        let Some((id, dist)) = self.nearest(&candidate.bd)? else {
            self.push(candidate);
            return Ok(AddOutcome::Added);
        };
        if dist > self.threshold {
            self.push(candidate);
            Ok(AddOutcome::Added)
        } else if candidate.fitness > self.entries[id].fitness {
            self.index.remove(id);
            self.index.insert(id, &candidate.bd);
            self.entries[id] = candidate;
            Ok(AddOutcome::ReplacedNearest)
        } else {
            Ok(AddOutcome::Rejected)
        }
    }

    fn push(&mut self, entry: ContainerEntry) {
        self.index.insert(self.entries.len(), &entry.bd);
        self.entries.push(entry);
    }

    /// Rescales the threshold towards `target` entries and rebuilds; returns the new threshold.
    ///
    /// `l <- l * (len / target)^(1/d)`, then every entry is re-inserted in
    /// descending fitness order.
    pub fn update(&mut self, target: usize) -> f64 {
        assert!(target >= 1);
        if !self.entries.is_empty() {
            let ratio = self.entries.len() as f64 / target as f64;
            self.threshold *= ratio.powf(1.0 / self.dim as f64);
            self.rebuild();
        }
        self.threshold
    }

    pub fn set_threshold(&mut self, threshold: f64) {
        assert!(threshold > 0.0);
        self.threshold = threshold;
    }

    /// Recomputes every descriptor from its cached evaluation, then rebuilds
    /// under the current threshold.
    pub fn refresh_descriptors<F>(&mut self, mut bd_fn: F) -> Result<()>
    where
        F: FnMut(&Evaluation) -> Result<Vec<f64>>,
    {
        let mut new_dim = None;
        for entry in &mut self.entries {
            let bd = bd_fn(&entry.evaluation)?;
            match new_dim {
                None => new_dim = Some(bd.len()),
                Some(d) if d != bd.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        actual: bd.len(),
                    })
                }
                _ => {}
            }
            entry.bd = bd;
        }
        if let Some(d) = new_dim {
            self.dim = d;
        }
        self.rebuild();
        Ok(())
    }

    /// Re-inserts all entries through [`Container::try_add`] in descending fitness order.
    pub fn rebuild(&mut self) {
        let mut entries = std::mem::take(&mut self.entries);
        // Stable: equal fitness keeps archive order.
        entries.sort_by(|a, b| b.fitness.total_cmp(&a.fitness));
        self.index = KdTree::new(self.dim);
        for entry in entries {
            self.try_add(entry).expect("dimension checked on insertion");
        }
    }
}
