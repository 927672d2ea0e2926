mod oracle;

use aurora_qd::container::{AddOutcome, Container, ContainerEntry, KdTree};
use aurora_qd::dimred::{pca_fit, AutoEncoder};
use aurora_qd::env::{Trajectory, TRAJECTORY_LEN};
use aurora_qd::metrics::{coverage, coverage_curve, TaskPoint};
use aurora_qd::variation::{polynomial_delta, polynomial_mutate, MutationParams};
use aurora_qd::{Evaluation, Genotype, Task};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn entry(bd: Vec<f64>) -> ContainerEntry {
    ContainerEntry {
        genotype: Genotype::zeros(2),
        bd,
        evaluation: Evaluation::from_trajectory(Trajectory::from_flat(vec![0.0; TRAJECTORY_LEN]).unwrap()),
        fitness: 0.0,
    }
}

#[test]
fn pca_eigenvalues_match_jacobi() {
    let mut r = rng(1);
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|_| {
            let a: f64 = r.random_range(-1.0..1.0);
            (0..24).map(|j| a * (j as f64 * 0.3).sin() + 0.2 * r.random_range(-1.0..1.0)).collect()
        })
        .collect();
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let pca = pca_fit(&refs, 3).unwrap();
    let (values, vectors) = oracle::jacobi_eigen(oracle::covariance(&rows));
    for (a, b) in pca.eigenvalues.iter().zip(&values) {
        assert!((a - b.max(0.0)).abs() < 1e-10, "{a} vs {b}");
    }
    for (c, v) in pca.components.iter().zip(&vectors) {
        let dot: f64 = c.iter().zip(v).map(|(x, y)| x * y).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn pca_reconstruction_identities_on_180_dim_data() {
    let mut r = rng(2);
    let rows: Vec<Vec<f64>> = (0..100)
        .map(|_| (0..180).map(|j| r.random_range(-1.0..1.0) * (1.0 + j as f64 / 60.0)).collect())
        .collect();
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let d = 2;
    let pca = pca_fit(&refs, d).unwrap();
    let mse = rows.iter().map(|x| pca.reconstruction_error(x)).sum::<f64>() / rows.len() as f64;
    let (values, _) = oracle::jacobi_eigen(oracle::covariance(&rows));
    let tail: f64 = values[d..].iter().map(|v| v.max(0.0)).sum::<f64>() / 180.0;
    assert!((mse - tail).abs() < 1e-10 * tail.max(1.0), "{mse} vs {tail}");
    assert!((oracle::projection_mse(&rows, &pca.components) - mse).abs() < 1e-12);
    for _ in 0..20 {
        let basis = oracle::random_orthonormal(d, 180, &mut r);
        assert!(mse <= oracle::projection_mse(&rows, &basis) + 1e-12);
    }
}

#[test]
fn pca_recovers_exact_low_rank_data() {
    let mut r = rng(3);
    let basis = oracle::random_orthonormal(3, 180, &mut r);
    let offset: Vec<f64> = (0..180).map(|_| r.random_range(-0.5..0.5)).collect();
    let rows: Vec<Vec<f64>> = (0..80)
        .map(|_| {
            let z: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
            (0..180)
                .map(|j| offset[j] + (0..3).map(|k| z[k] * basis[k][j]).sum::<f64>())
                .collect()
        })
        .collect();
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let pca = pca_fit(&refs, 3).unwrap();
    let worst = rows.iter().map(|x| pca.reconstruction_error(x)).fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn novelty_matches_brute_force_up_to_2000_entries() {
    let mut r = rng(4);
    for &(n, dim, k) in &[(1usize, 2usize, 15usize), (37, 2, 15), (500, 3, 5), (2000, 2, 15), (800, 6, 15)] {
        let mut c = Container::new(dim, 1e-12, k);
        let mut pts = Vec::new();
        while c.len() < n {
            let p: Vec<f64> = (0..dim).map(|_| r.random_range(0.0..1.0)).collect();
            if c.try_add(entry(p.clone())).unwrap() == AddOutcome::Added {
                pts.push(p);
            }
        }
        for _ in 0..200 {
            let q: Vec<f64> = (0..dim).map(|_| r.random_range(-0.2..1.2)).collect();
            let a = c.novelty(&q).unwrap();
            let b = oracle::brute_novelty(&pts, &q, k);
            assert!((a - b).abs() <= 1e-12, "n={n} dim={dim}: {a} vs {b}");
        }
    }
}

#[test]
fn kdtree_survives_removal_and_reinsertion() {
    let mut r = rng(5);
    let pts: Vec<Vec<f64>> = (0..600).map(|_| vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)]).collect();
    let mut tree = KdTree::build(2, pts.iter().enumerate().map(|(i, p)| (i, p.as_slice())));
    let mut live: Vec<bool> = vec![true; pts.len()];
    for i in (0..pts.len()).step_by(3) {
        assert!(tree.remove(i));
        live[i] = false;
    }
    for i in (0..pts.len()).step_by(9) {
        tree.insert(i, &pts[i]);
        live[i] = true;
    }
    let alive: Vec<Vec<f64>> = pts.iter().zip(&live).filter(|(_, l)| **l).map(|(p, _)| p.clone()).collect();
    assert_eq!(tree.len(), alive.len());
    for _ in 0..300 {
        let q = [r.random_range(0.0..1.0), r.random_range(0.0..1.0)];
        let got = tree.nearest(&q, 7);
        let mean = got.iter().map(|(d2, _)| d2.sqrt()).sum::<f64>() / got.len() as f64;
        assert!((mean - oracle::brute_novelty(&alive, &q, 7)).abs() < 1e-12);
        assert!(got.iter().all(|(_, id)| live[*id]));
    }
}

#[test]
fn coverage_curve_equals_recount() {
    let mut r = rng(6);
    for n in [1usize, 5, 300, 3000] {
        let points: Vec<TaskPoint> = (0..n)
            .map(|_| TaskPoint {
                bd: [r.random_range(0.0..1.0), r.random_range(0.0..=1.0)],
                score: (r.random_range(-3.0..0.0f64) * 4.0).round() / 4.0,
            })
            .collect();
        let curve = coverage_curve(&points, Task::Nav, 20).unwrap();
        for (t, c) in curve.thresholds.iter().zip(&curve.coverage) {
            assert_eq!(*c, oracle::recount_coverage(&points, *t));
            assert_eq!(*c, coverage(&points, *t));
        }
    }
}

#[test]
fn mutation_statistics_over_a_million_draws() {
    let mut r = rng(7);
    let n = 1_000_000;
    let (mut sum, mut neg) = (0.0, 0usize);
    for _ in 0..n {
        let d = polynomial_delta(r.random::<f64>(), 10.0);
        sum += d;
        neg += (d < 0.0) as usize;
    }
    assert!((sum / n as f64).abs() < 0.003);
    assert!((neg as f64 / n as f64 - 0.5).abs() < 0.003);

    let params = MutationParams::for_genotype(10.0, 0.3, 100).unwrap();
    let parent = Genotype::zeros(100);
    let mut changed = 0usize;
    for _ in 0..n / 100 {
        let child = polynomial_mutate(&parent, &params, &mut r).unwrap();
        changed += child.params().iter().filter(|&&x| x != 0.0).count();
    }
    assert!((changed as f64 / n as f64 - 0.3).abs() < 0.003);
}

#[test]
fn autoencoder_gradients_match_finite_differences() {
    let mut r = rng(8);
    for m in 0..10 {
        let (input, hidden, latent) = (3 + m % 4, 2 + m % 3, 1 + m % 2);
        let model = AutoEncoder::random(input, hidden, latent, &mut r);
        let batch = Array2::from_shape_simple_fn((4, input), || r.random_range(-1.0..1.0));
        let (_, grad) = model.loss_and_grad(batch.view());
        let analytic: Vec<f64> = grad.param_slices().concat();
        let numeric = oracle::finite_difference_grad(&model, batch.view(), 1e-5);
        assert!(oracle::max_relative_error(&analytic, &numeric) < 1e-4);
    }
}
