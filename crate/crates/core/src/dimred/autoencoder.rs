//! Fully connected autoencoder `D -> H -> d -> H -> D` trained on
//! reconstruction MSE with Adam.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.01;

fn leaky(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

fn leaky_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Affine layer `y = x W^T + b`, weights stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            weights: Array2::zeros((n_out, n_in)),
            bias: Array1::zeros(n_out),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        Self {
            weights: Array2::from_shape_simple_fn((n_out, n_in), || rng.random_range(-limit..=limit)),
            bias: Array1::zeros(n_out),
        }
    }

    pub fn n_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.weights.nrows()
    }

    fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights.t()) + &self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoEncoder {
    /// Encoder hidden, latent, decoder hidden, reconstruction layers.
    pub layers: [Dense; 4],
}

/// Intermediate values of a batched forward pass.
struct Forward {
    z1: Array2<f64>,
    a1: Array2<f64>,
    latent: Array2<f64>,
    z3: Array2<f64>,
    a3: Array2<f64>,
    recon: Array2<f64>,
}

impl AutoEncoder {
    pub fn zeros(input: usize, hidden: usize, latent: usize) -> Self {
        Self {
            layers: [
                Dense::zeros(input, hidden),
                Dense::zeros(hidden, latent),
                Dense::zeros(latent, hidden),
                Dense::zeros(hidden, input),
            ],
        }
    }

    pub fn random<R: Rng + ?Sized>(input: usize, hidden: usize, latent: usize, rng: &mut R) -> Self {
        Self {
            layers: [
                Dense::glorot(input, hidden, rng),
                Dense::glorot(hidden, latent, rng),
                Dense::glorot(latent, hidden, rng),
                Dense::glorot(hidden, input, rng),
            ],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers[0].n_out()
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[1].n_out()
    }

    fn forward_batch(&self, x: ArrayView2<f64>) -> Forward {
        let z1 = self.layers[0].apply(x);
        let a1 = z1.mapv(leaky);
        let latent = self.layers[1].apply(a1.view());
        let z3 = self.layers[2].apply(latent.view());
        let a3 = z3.mapv(leaky);
        let recon = self.layers[3].apply(a3.view());
        Forward {
            z1,
            a1,
            latent,
            z3,
            a3,
            recon,
        }
    }

    /// Latent codes of each row.
    pub fn encode_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let a1 = self.layers[0].apply(x).mapv(leaky);
        self.layers[1].apply(a1.view())
    }

    /// Reconstructions of each row.
    pub fn reconstruct_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward_batch(x).recon
    }

    pub fn forward(&self, input: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
        let x = input.insert_axis(Axis(0));
        let f = self.forward_batch(x);
        (f.latent.row(0).to_owned(), f.recon.row(0).to_owned())
    }

    /// Mean squared reconstruction error over all rows and coordinates.
    pub fn loss(&self, batch: ArrayView2<f64>) -> f64 {
        let f = self.forward_batch(batch);
        (&f.recon - &batch).mapv(|e| e * e).mean().unwrap_or(0.0)
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, batch: ArrayView2<f64>) -> (f64, AutoEncoder) {
        let f = self.forward_batch(batch);
        let diff = &f.recon - &batch;
        let count = diff.len() as f64;
        let loss = diff.mapv(|e| e * e).sum() / count;

        let g4 = diff * (2.0 / count);
        let dense = |g: &Array2<f64>, input: &Array2<f64>| Dense {
            weights: g.t().dot(input).as_standard_layout().into_owned(),
            bias: g.sum_axis(Axis(0)),
        };
        let d4 = dense(&g4, &f.a3);
        let g3 = g4.dot(&self.layers[3].weights) * f.z3.mapv(leaky_grad);
        let d3 = dense(&g3, &f.latent);
        let g2 = g3.dot(&self.layers[2].weights);
        let d2 = dense(&g2, &f.a1);
        let g1 = g2.dot(&self.layers[1].weights) * f.z1.mapv(leaky_grad);
        let d1 = dense(&g1, &batch.to_owned());
        (loss, AutoEncoder { layers: [d1, d2, d3, d4] })
    }

    /// Every parameter array, in a fixed order.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weights.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weights.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }
}

/// Adam moments for a list of parameter arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(shapes: &[usize], learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_model(model: &AutoEncoder, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let shapes: Vec<usize> = model.param_slices().iter().map(|s| s.len()).collect();
        Self::new(&shapes, learning_rate, beta1, beta2, epsilon)
    }

    /// One bias-corrected update.
    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), self.first.len());
        assert_eq!(grads.len(), self.first.len());
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            assert_eq!(p.len(), g.len());
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

/// Backpropagates the batch loss and applies one Adam step; returns the
/// pre-update loss.
pub fn ae_train_step(model: &mut AutoEncoder, adam: &mut AdamState, batch: ArrayView2<f64>) -> Result<f64> {
    let (loss, grad) = model.loss_and_grad(batch);
    if !loss.is_finite() {
        return Err(Error::Divergence {
            step: adam.step as usize + 1,
            loss,
        });
    }
    let grads = grad.param_slices();
    adam.update(&mut model.param_slices_mut(), &grads);
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_batch(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = AutoEncoder::zeros(180, 64, 2);
        let x = Array1::from_iter((0..180).map(|i| i as f64 * 0.01));
        let (z, r) = m.forward(x.view());
        assert!(z.iter().all(|&v| v == 0.0));
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_construction_reconstructs_input() {
        // Hidden layer holds (x, -x); leaky(x) - leaky(-x) = (1 + slope) x.
        let n = 5;
        let scale = 1.0 / (1.0 + LEAKY_SLOPE);
        let mut m = AutoEncoder::zeros(n, 2 * n, n);
        for i in 0..n {
            for l in [0, 2] {
                m.layers[l].weights[[i, i]] = 1.0;
                m.layers[l].weights[[n + i, i]] = -1.0;
            }
            for l in [1, 3] {
                m.layers[l].weights[[i, i]] = scale;
                m.layers[l].weights[[i, n + i]] = -scale;
            }
        }
        let x = array![0.3, -1.2, 0.0, 2.5, -0.01];
        let (z, r) = m.forward(x.view());
        for i in 0..n {
            assert!((z[i] - x[i]).abs() < 1e-14);
            assert!((r[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = AutoEncoder::random(7, 4, 2, &mut rng);
        let x: Vec<f64> = (0..7).map(|i| (i as f64 - 3.0) * 0.37).collect();
        // Scalar loops, one layer at a time.
        let affine = |l: &Dense, input: &[f64]| -> Vec<f64> {
            (0..l.n_out())
                .map(|o| l.bias[o] + (0..l.n_in()).map(|i| l.weights[[o, i]] * input[i]).sum::<f64>())
                .collect::<Vec<f64>>()
        };
        let lrelu = |v: Vec<f64>| v.into_iter().map(|z| if z > 0.0 { z } else { 0.01 * z }).collect::<Vec<_>>();
        let h = lrelu(affine(&m.layers[0], &x));
        let z = affine(&m.layers[1], &h);
        let h2 = lrelu(affine(&m.layers[2], &z));
        let r = affine(&m.layers[3], &h2);
        let (z_m, r_m) = m.forward(Array1::from(x).view());
        for (a, b) in z.iter().zip(z_m.iter()).chain(r.iter().zip(r_m.iter())) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-5;
        for trial in 0..10 {
            let input = 3 + trial % 4;
            let model = AutoEncoder::random(input, 4, 1 + trial % 3, &mut rng);
            let batch = random_batch(3, input, &mut rng);
            let (_, grad) = model.loss_and_grad(batch.view());
            let analytic: Vec<f64> = grad.param_slices().concat();
            let mut worst: f64 = 0.0;
            let mut idx = 0;
            for (s, len) in model.param_slices().iter().map(|s| s.len()).enumerate() {
                for j in 0..len {
                    let mut plus = model.clone();
                    plus.param_slices_mut()[s][j] += h;
                    let mut minus = model.clone();
                    minus.param_slices_mut()[s][j] -= h;
                    let numeric = (plus.loss(batch.view()) - minus.loss(batch.view())) / (2.0 * h);
                    let a = analytic[idx];
                    let scale = a.abs().max(numeric.abs());
                    if scale > 1e-8 {
                        worst = worst.max((a - numeric).abs() / scale);
                    }
                    idx += 1;
                }
            }
            assert!(worst < 1e-4, "trial {trial}: relative error {worst}");
        }
    }

    #[test]
    fn adam_first_step_magnitude() {
        let lr = 1e-3;
        let eps = 1e-8;
        let mut adam = AdamState::new(&[3], lr, 0.9, 0.999, eps);
        let g = [0.5, -2.0, 1e-3];
        let mut p = vec![0.0; 3];
        adam.update(&mut [p.as_mut_slice()], &[&g]);
        for i in 0..3 {
            let expected = -lr * g[i] / (g[i].abs() + eps);
            assert!((p[i] - expected).abs() < 1e-15, "{i}");
        }
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut adam = AdamState::new(&[2], 1e-3, 0.9, 0.999, 1e-8);
        let mut p = vec![0.25, -0.5];
        adam.update(&mut [p.as_mut_slice()], &[&[0.0, 0.0]]);
        assert_eq!(p, vec![0.25, -0.5]);
    }

    #[test]
    fn adam_is_scale_invariant_on_first_step() {
        let g = [0.3, -0.7, 1.1];
        let scaled: Vec<f64> = g.iter().map(|x| x * 250.0).collect();
        let mut a = AdamState::new(&[3], 1e-3, 0.9, 0.999, 1e-8);
        let mut b = a.clone();
        let mut pa = vec![0.0; 3];
        let mut pb = vec![0.0; 3];
        a.update(&mut [pa.as_mut_slice()], &[&g]);
        b.update(&mut [pb.as_mut_slice()], &[&scaled]);
        for i in 0..3 {
            assert_eq!(pa[i].signum(), pb[i].signum());
            assert!((pa[i] - pb[i]).abs() < 1e-3 * 1e-7);
        }
    }

    #[test]
    fn perfect_reconstruction_leaves_params_unchanged() {
        let model = AutoEncoder::zeros(4, 3, 2);
        let batch = Array2::<f64>::zeros((5, 4));
        let mut m = model.clone();
        let mut adam = AdamState::for_model(&m, 1e-3, 0.9, 0.999, 1e-8);
        let loss = ae_train_step(&mut m, &mut adam, batch.view()).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(m, model);
    }

    #[test]
    fn divergence_is_reported() {
        let mut m = AutoEncoder::zeros(2, 2, 1);
        let mut adam = AdamState::for_model(&m, 1e-3, 0.9, 0.999, 1e-8);
        let batch = array![[f64::NAN, 0.0]];
        assert!(matches!(
            ae_train_step(&mut m, &mut adam, batch.view()),
            Err(Error::Divergence { step: 1, .. })
        ));
    }
}
