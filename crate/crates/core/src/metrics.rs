//! Coverage per minimum performance and plug-in entropy estimates over
//! finished archives.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::config::Task;
use crate::env::{N_SAMPLES, STREAM_BOUNDS, TRAJECTORY_LEN};
use crate::error::{Error, Result};
use crate::snapshot::format_float;

/// Cells per axis of the task descriptor grid.
pub const GRID_RESOLUTION: usize = 50;
/// Bins per dimension for entropy estimates.
pub const ENTROPY_BINS: usize = 10;

/// A policy projected into one task: its hand-coded descriptor and score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskPoint {
    pub bd: [f64; 2],
    pub score: f64,
}

pub fn grid_cell(bd: [f64; 2]) -> (usize, usize) {
    let idx = |b: f64| ((b * GRID_RESOLUTION as f64).floor().max(0.0) as usize).min(GRID_RESOLUTION - 1);
    (idx(bd[0]), idx(bd[1]))
}

/// Number of grid cells holding at least one point scoring above `f_min`.
pub fn coverage(points: &[TaskPoint], f_min: f64) -> usize {
    let mut occupied = vec![false; GRID_RESOLUTION * GRID_RESOLUTION];
    let mut count = 0;
    for p in points.iter().filter(|p| p.score > f_min) {
        let (i, j) = grid_cell(p.bd);
        let cell = &mut occupied[i * GRID_RESOLUTION + j];
        if !*cell {
            *cell = true;
            count += 1;
        }
    }
    count
}

/// Coverage with no performance requirement.
pub fn total_coverage(points: &[TaskPoint]) -> usize {
    coverage(points, f64::NEG_INFINITY)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCurve {
    pub task: Task,
    /// Ascending; the first threshold is `-inf` (total coverage).
    pub thresholds: Vec<f64>,
    pub coverage: Vec<usize>,
    pub resolution: usize,
    pub bounds: [(f64, f64); 2],
}

/// Coverage at `-inf` followed by `n_thresholds` levels spaced evenly from
/// the lowest to the highest observed score.
pub fn coverage_curve(points: &[TaskPoint], task: Task, n_thresholds: usize) -> Result<CoverageCurve> {
    if points.is_empty() {
        return Err(Error::EmptyContainer);
    }
    if n_thresholds < 2 {
        return Err(Error::Config("a coverage curve needs at least 2 thresholds".into()));
    }
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.score), hi.max(p.score)));
    let mut thresholds = vec![f64::NEG_INFINITY];
    let step = (hi - lo) / (n_thresholds - 1) as f64;
    thresholds.extend((0..n_thresholds).map(|i| if i + 1 == n_thresholds { hi } else { lo + step * i as f64 }));

    // Best score per occupied cell; coverage at f is the number of cells whose best exceeds f.
    let mut best: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for p in points {
        let slot = best.entry(grid_cell(p.bd)).or_insert(f64::NEG_INFINITY);
        *slot = slot.max(p.score);
    }
    let mut cell_best: Vec<f64> = best.into_values().collect();
    cell_best.sort_by(f64::total_cmp);
    let coverage = thresholds
        .iter()
        .map(|&f| cell_best.len() - cell_best.partition_point(|&s| s <= f))
        .collect();
    Ok(CoverageCurve {
        task,
        thresholds,
        coverage,
        resolution: GRID_RESOLUTION,
        bounds: [(0.0, 1.0), (0.0, 1.0)],
    })
}

/// The single `-inf` point used when a container's variant did not optimise this task's score.
pub fn coverage_only(points: &[TaskPoint], task: Task) -> CoverageCurve {
    CoverageCurve {
        task,
        thresholds: vec![f64::NEG_INFINITY],
        coverage: vec![total_coverage(points)],
        resolution: GRID_RESOLUTION,
        bounds: [(0.0, 1.0), (0.0, 1.0)],
    }
}

pub fn write_coverage_csv(path: &Path, curve: &CoverageCurve, seed: u64, variant: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["threshold", "coverage", "seed", "variant"])?;
    for (t, c) in curve.thresholds.iter().zip(&curve.coverage) {
        w.write_record([format_float(*t), c.to_string(), seed.to_string(), variant.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Plug-in Shannon entropy (nats) of the multi-dimensional histogram.
pub fn empirical_entropy(samples: &[&[f64]], bins_per_dim: usize, bounds: &[(f64, f64)]) -> f64 {
    assert!(bins_per_dim >= 1);
    let mut counts: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    for s in samples {
        assert_eq!(s.len(), bounds.len(), "sample and bounds dimensions differ");
        let key = s
            .iter()
            .zip(bounds)
            .map(|(x, (lo, hi))| {
                let f = ((x - lo) / (hi - lo) * bins_per_dim as f64).floor();
                (f.max(0.0) as u32).min(bins_per_dim as u32 - 1)
            })
            .collect();
        *counts.entry(key).or_default() += 1;
    }
    let n = samples.len() as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Physical bounds of each coordinate of a flattened trajectory.
pub fn trajectory_bounds() -> Vec<(f64, f64)> {
    (0..TRAJECTORY_LEN).map(|i| STREAM_BOUNDS[i / N_SAMPLES]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyReport {
    pub h_trajectory: f64,
    pub h_descriptor: f64,
    pub holds: bool,
}

/// Compares the histogram entropy of trajectories with that of their encodings.
pub fn entropy_inequality_report<F>(trajectories: &[&[f64]], mut encode: F) -> Result<EntropyReport>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if trajectories.is_empty() {
        return Ok(EntropyReport {
            h_trajectory: 0.0,
            h_descriptor: 0.0,
            holds: true,
        });
    }
    let bds = trajectories.iter().map(|t| encode(t)).collect::<Result<Vec<_>>>()?;
    let dim = bds[0].len();
    let bd_refs: Vec<&[f64]> = bds.iter().map(|b| b.as_slice()).collect();
    let h_s = empirical_entropy(trajectories, ENTROPY_BINS, &trajectory_bounds());
    let h_b = empirical_entropy(&bd_refs, ENTROPY_BINS, &vec![(0.0, 1.0); dim]);
    Ok(EntropyReport {
        h_trajectory: h_s,
        h_descriptor: h_b,
        holds: h_b <= h_s + 1e-9,
    })
}

pub fn write_entropy_csv(path: &Path, report: &EntropyReport, seed: u64, variant: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["seed", "variant", "h_trajectory", "h_descriptor", "holds"])?;
    w.write_record([
        seed.to_string(),
        variant.to_string(),
        format_float(report.h_trajectory),
        format_float(report.h_descriptor),
        report.holds.to_string(),
    ])?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Static SVG scatter of task descriptors on the unit square, coloured by score.
pub fn scatter_svg(points: &[TaskPoint], title: &str) -> String {
    const SIZE: f64 = 480.0;
    const MARGIN: f64 = 40.0;
    let plot = SIZE - 2.0 * MARGIN;
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.score), hi.max(p.score)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>\n\
         <rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{plot}\" height=\"{plot}\" fill=\"none\" stroke=\"black\"/>\n\
         <text x=\"{MARGIN}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        MARGIN - 12.0,
        escape(title)
    );
    for p in points {
        let t = ((p.score - lo) / span).clamp(0.0, 1.0);
        // Blue (low) to orange (high).
        let (r, g, b) = (
            (30.0 + 225.0 * t) as u8,
            (60.0 + 100.0 * t) as u8,
            (200.0 - 180.0 * t) as u8,
        );
        let x = MARGIN + p.bd[0].clamp(0.0, 1.0) * plot;
        let y = MARGIN + (1.0 - p.bd[1].clamp(0.0, 1.0)) * plot;
        let _ = writeln!(svg, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2.5\" fill=\"rgb({r},{g},{b})\"/>");
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
