//! Planar unicycle robot driven by a small MLP controller.
//!
//! The controller reads a proprioceptive observation at 50 Hz and commands a
//! forward speed and a yaw rate; both follow their command through a
//! first-order lag. Full-state samples are recorded at 10 Hz over a 3 s
//! episode, giving 6 streams of 30 samples.

use std::f64::consts::PI;

use crate::config::Task;
use crate::error::{Error, Result};
use crate::genotype::{controller_param_count, Genotype};

/// Half-width of the square arena used to normalise positions, meters.
pub const ARENA_HALF_WIDTH: f64 = 3.0;
pub const V_MAX: f64 = 1.0;
pub const OMEGA_MAX: f64 = 2.0;
/// Time constant of the speed and yaw-rate lags, seconds.
pub const TAU: f64 = 0.2;
/// Control period (50 Hz).
pub const DT: f64 = 0.02;
pub const CONTROL_STEPS: usize = 150;
/// Control steps between two recorded samples (10 Hz).
pub const RECORD_EVERY: usize = 5;
pub const N_SAMPLES: usize = CONTROL_STEPS / RECORD_EVERY;
pub const N_STREAMS: usize = 6;
pub const TRAJECTORY_LEN: usize = N_STREAMS * N_SAMPLES;

pub const N_INPUTS: usize = 6;
pub const N_HIDDEN: usize = 8;
pub const N_OUTPUTS: usize = 2;
pub const GENOTYPE_LEN: usize = controller_param_count(N_INPUTS, N_HIDDEN, N_OUTPUTS);

/// Stream order inside a [`Trajectory`].
pub const STREAM_NAMES: [&str; N_STREAMS] = ["x", "y", "cos_theta", "sin_theta", "v", "omega"];

/// Physical range of each stream, used for normalisation and binning.
pub const STREAM_BOUNDS: [(f64, f64); N_STREAMS] = [
    (-ARENA_HALF_WIDTH, ARENA_HALF_WIDTH),
    (-ARENA_HALF_WIDTH, ARENA_HALF_WIDTH),
    (-1.0, 1.0),
    (-1.0, 1.0),
    (-V_MAX, V_MAX),
    (-OMEGA_MAX, OMEGA_MAX),
];

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let r = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    /// Heading, always in `(-π, π]`.
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
}

impl RobotState {
    /// Controller input: positions scaled by the arena, rates by their limits, all clamped to `[-1, 1]`.
    pub fn observation(&self) -> [f64; N_INPUTS] {
        [
            self.x / ARENA_HALF_WIDTH,
            self.y / ARENA_HALF_WIDTH,
            self.theta.cos(),
            self.theta.sin(),
            self.v / V_MAX,
            self.omega / OMEGA_MAX,
        ]
        .map(|o| o.clamp(-1.0, 1.0))
    }

    /// One explicit Euler step under commands in `[-1, 1]`.
    pub fn step(&self, command: [f64; N_OUTPUTS]) -> Self {
        let v_dot = (command[0] * V_MAX - self.v) / TAU;
        let omega_dot = (command[1] * OMEGA_MAX - self.omega) / TAU;
        Self {
            x: self.x + DT * self.v * self.theta.cos(),
            y: self.y + DT * self.v * self.theta.sin(),
            theta: wrap_angle(self.theta + DT * self.omega),
            v: self.v + DT * v_dot,
            omega: self.omega + DT * omega_dot,
        }
    }

    fn sample(&self) -> [f64; N_STREAMS] {
        [
            self.x,
            self.y,
            self.theta.cos(),
            self.theta.sin(),
            self.v,
            self.omega,
        ]
    }
}

/// Evaluates the controller network.
///
/// Genotype layout: for each hidden unit, `N_INPUTS` input weights followed
/// by its bias; then for each output (speed, yaw rate), `N_HIDDEN` weights
/// followed by its bias. Both layers use `tanh`.
pub fn controller_forward(genotype: &Genotype, observation: &[f64; N_INPUTS]) -> Result<[f64; N_OUTPUTS]> {
    let params = genotype.params();
    if params.len() != GENOTYPE_LEN {
        return Err(Error::GenotypeLength {
            expected: GENOTYPE_LEN,
            actual: params.len(),
        });
    }
    Ok(forward_unchecked(params, observation))
}

fn forward_unchecked(params: &[f64], observation: &[f64; N_INPUTS]) -> [f64; N_OUTPUTS] {
    let (hidden_params, output_params) = params.split_at((N_INPUTS + 1) * N_HIDDEN);
    let mut hidden = [0.0; N_HIDDEN];
    for (h, row) in hidden.iter_mut().zip(hidden_params.chunks_exact(N_INPUTS + 1)) {
        let pre = row[..N_INPUTS]
            .iter()
            .zip(observation)
            .fold(row[N_INPUTS], |acc, (w, o)| acc + w * o);
        *h = pre.tanh();
    }
    let mut out = [0.0; N_OUTPUTS];
    for (o, row) in out.iter_mut().zip(output_params.chunks_exact(N_HIDDEN + 1)) {
        let pre = row[..N_HIDDEN]
            .iter()
            .zip(&hidden)
            .fold(row[N_HIDDEN], |acc, (w, h)| acc + w * h);
        *o = pre.tanh();
    }
    out
}

/// Genotype of the controller reflected about the x-axis.
///
/// Negates the hidden-layer weights reading `y`, `sin θ` and `ω`, and the
/// whole yaw-rate output row, so the mirrored policy produces the mirrored
/// trajectory.
pub fn mirror_genotype(genotype: &Genotype) -> Result<Genotype> {
    let mut params = genotype.params().to_vec();
    if params.len() != GENOTYPE_LEN {
        return Err(Error::GenotypeLength {
            expected: GENOTYPE_LEN,
            actual: params.len(),
        });
    }
    let (hidden, output) = params.split_at_mut((N_INPUTS + 1) * N_HIDDEN);
    for row in hidden.chunks_exact_mut(N_INPUTS + 1) {
        for i in [1, 3, 5] {
            row[i] = -row[i];
        }
    }
    for w in output[N_HIDDEN + 1..].iter_mut() {
        *w = -*w;
    }
    Genotype::new(params)
}

/// Recorded state streams of one episode, stream-major: `x[0..30], y[0..30], ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory(Vec<f64>);

impl Trajectory {
    pub fn from_flat(values: Vec<f64>) -> Result<Self> {
        if values.len() != TRAJECTORY_LEN {
            return Err(Error::DimensionMismatch {
                expected: TRAJECTORY_LEN,
                actual: values.len(),
            });
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn stream(&self, index: usize) -> &[f64] {
        &self.0[index * N_SAMPLES..(index + 1) * N_SAMPLES]
    }

    fn last(&self, index: usize) -> f64 {
        self.stream(index)[N_SAMPLES - 1]
    }

    pub fn final_x(&self) -> f64 {
        self.last(0)
    }

    pub fn final_y(&self) -> f64 {
        self.last(1)
    }

    pub fn final_heading(&self) -> f64 {
        self.last(3).atan2(self.last(2))
    }

    pub fn final_v(&self) -> f64 {
        self.last(4)
    }

    pub fn final_omega(&self) -> f64 {
        self.last(5)
    }
}

/// Everything measured about one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub trajectory: Trajectory,
    pub bd_nav: [f64; 2],
    pub bd_forw: [f64; 2],
    pub bd_turn: [f64; 2],
    pub bd_mes: [f64; N_STREAMS],
    pub f_nav: f64,
    pub f_forw: f64,
    pub f_turn: f64,
}

impl Evaluation {
    pub fn from_trajectory(trajectory: Trajectory) -> Self {
        let (bd_nav, f_nav) = task_nav(&trajectory);
        let (bd_forw, f_forw) = task_forw(&trajectory);
        let (bd_turn, f_turn) = task_turn(&trajectory);
        let bd_mes = mes_descriptor(&trajectory);
        Self {
            trajectory,
            bd_nav,
            bd_forw,
            bd_turn,
            bd_mes,
            f_nav,
            f_forw,
            f_turn,
        }
    }

    pub fn task_bd(&self, task: Task) -> [f64; 2] {
        match task {
            Task::Nav => self.bd_nav,
            Task::Forw => self.bd_forw,
            Task::Turn => self.bd_turn,
        }
    }

    pub fn score(&self, task: Task) -> f64 {
        match task {
            Task::Nav => self.f_nav,
            Task::Forw => self.f_forw,
            Task::Turn => self.f_turn,
        }
    }
}

/// Rolls out one 3 s episode from rest at the origin.
pub fn simulate_episode(genotype: &Genotype) -> Result<Evaluation> {
    Ok(Evaluation::from_trajectory(rollout(genotype)?))
}

/// Rolls out one episode and returns only the recorded streams.
pub fn rollout(genotype: &Genotype) -> Result<Trajectory> {
    if genotype.len() != GENOTYPE_LEN {
        return Err(Error::GenotypeLength {
            expected: GENOTYPE_LEN,
            actual: genotype.len(),
        });
    }
    let params = genotype.params();
    let mut samples = [[0.0; N_SAMPLES]; N_STREAMS];
    let mut state = RobotState::default();
    for step in 1..=CONTROL_STEPS {
        let command = forward_unchecked(params, &state.observation());
        state = state.step(command);
        if step % RECORD_EVERY == 0 {
            let t = step / RECORD_EVERY - 1;
            for (stream, value) in samples.iter_mut().zip(state.sample()) {
                stream[t] = value;
            }
        }
    }
    Ok(Trajectory(samples.concat()))
}

fn unit(value: f64, (low, high): (f64, f64)) -> f64 {
    ((value - low) / (high - low)).clamp(0.0, 1.0)
}

/// Final position descriptor and orientation error along a circular arc.
pub fn task_nav(trajectory: &Trajectory) -> ([f64; 2], f64) {
    let (x, y) = (trajectory.final_x(), trajectory.final_y());
    let bd = [unit(x, STREAM_BOUNDS[0]), unit(y, STREAM_BOUNDS[1])];
    let desired = if x == 0.0 && y == 0.0 {
        0.0
    } else {
        2.0 * y.atan2(x)
    };
    let f = -wrap_angle(trajectory.final_heading() - desired).abs();
    (bd, f)
}

/// Mean actuation descriptor and final forward position.
pub fn task_forw(trajectory: &Trajectory) -> ([f64; 2], f64) {
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let bd = [
        mean(trajectory.stream(4)) / V_MAX * 0.5 + 0.5,
        mean(trajectory.stream(5)) / OMEGA_MAX * 0.5 + 0.5,
    ]
    .map(|b| b.clamp(0.0, 1.0));
    (bd, trajectory.final_x())
}

/// Final velocity descriptor and distance of the final heading from a half-turn.
pub fn task_turn(trajectory: &Trajectory) -> ([f64; 2], f64) {
    let bd = [
        unit(trajectory.final_v(), STREAM_BOUNDS[4]),
        unit(trajectory.final_omega(), STREAM_BOUNDS[5]),
    ];
    let f = -wrap_angle(trajectory.final_heading() - PI).abs();
    (bd, f)
}

/// Per-stream temporal means, each scaled into `[0, 1]` by the stream bounds.
pub fn mes_descriptor(trajectory: &Trajectory) -> [f64; N_STREAMS] {
    std::array::from_fn(|i| {
        let s = trajectory.stream(i);
        unit(s.iter().sum::<f64>() / N_SAMPLES as f64, STREAM_BOUNDS[i])
    })
}
