//! Linear, norm-preserving evolution of amplitude vectors.
//!
//! A generator `G` has an imaginary diagonal and satisfies `g_sj = −conj(g_js)`,
//! so `exp(G t)` is unitary. The trace of `G` only rotates the global phase;
//! [`GeneratorParams`] fixes it to zero, leaving `K² − 1` real numbers.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm, CMatrix};
use crate::transform::StateVector;

/// Tolerance applied to the generator constraints, relative to `max(1, max|g|)`.
pub const GENERATOR_TOLERANCE: f64 = 1e-12;
pub const PREDICTED_NORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    matrix: CMatrix,
}

/// Describes the worst violation of the generator constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintViolation {
    /// Largest `|Re g_ss|`.
    pub diagonal_real: f64,
    /// Largest `|g_sj + conj(g_js)|` over `s ≠ j`.
    pub anti_hermitian: f64,
}

pub fn constraint_violation(matrix: &CMatrix) -> ConstraintViolation {
    let k = matrix.nrows();
    let mut diagonal_real: f64 = 0.0;
    let mut anti_hermitian: f64 = 0.0;
    for s in 0..k {
        diagonal_real = diagonal_real.max(matrix[(s, s)].re.abs());
        for j in 0..k {
            if j != s {
                anti_hermitian = anti_hermitian.max((matrix[(s, j)] + matrix[(j, s)].conj()).norm());
            }
        }
    }
    ConstraintViolation {
        diagonal_real,
        anti_hermitian,
    }
}

/// Whether `matrix` is square and satisfies both constraints.
pub fn is_valid_generator(matrix: &CMatrix) -> bool {
    if !matrix.is_square() || matrix.nrows() < 2 {
        return false;
    }
    let scale = matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let v = constraint_violation(matrix);
    v.diagonal_real <= GENERATOR_TOLERANCE * scale && v.anti_hermitian <= GENERATOR_TOLERANCE * scale
}

impl Generator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() < 2 {
            return Err(Error::InvalidParameter(format!(
                "generator must be square with K >= 2, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !is_valid_generator(&matrix) {
            let v = constraint_violation(&matrix);
            return Err(Error::InvalidParameter(format!(
                "generator violates constraints: max |Re g_ss| = {:e}, max |g_sj + conj g_js| = {:e}",
                v.diagonal_real, v.anti_hermitian
            )));
        }
        Ok(Self { matrix })
    }

    pub fn zero(dimension: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dimension, dimension),
        }
    }

    /// The Hermitian `iG`, whose real spectrum gives the oscillation frequencies.
    pub fn hermitian(&self) -> CMatrix {
        &self.matrix * Complex64::i()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    /// Eigenvalues of `iG` in ascending order.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.hermitian().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Spectral norm, `max |λ(iG)|`.
    pub fn norm(&self) -> f64 {
        self.frequencies().iter().map(|l| l.abs()).fold(0.0, f64::max)
    }

    /// `λ_max − λ_min` of `iG`; the fastest beat frequency of any probability.
    pub fn spectral_spread(&self) -> f64 {
        let f = self.frequencies();
        f[f.len() - 1] - f[0]
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `G − (tr G / K)·1`, the same evolution up to a global phase.
    pub fn traceless(&self) -> Self {
        let k = self.dimension();
        let shift = self.trace() / k as f64;
        let mut m = self.matrix.clone();
        for s in 0..k {
            m[(s, s)] -= shift;
        }
        Self { matrix: m }
    }

    /// `exp(G t)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        expm(&(&self.matrix * Complex64::new(t, 0.0)))
    }
}

/// `K² − 1` reals describing a traceless generator. Layout: for each pair
/// `s < j` in row-major order, `(Re g_sj, Im g_sj)`; then `Im g_ss` for
/// `s = 1..K−1`, with `g_KK` fixed by the zero trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    values: Vec<f64>,
    dimension: usize,
}

pub const GAUGE_CONVENTION: &str = "trace(G) = 0; initial vector's first component real and non-negative";

pub fn generator_param_count(dimension: usize) -> usize {
    dimension * dimension - 1
}

impl GeneratorParams {
    pub fn new(values: Vec<f64>, dimension: usize) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::InvalidParameter("generator dimension must be >= 2".into()));
        }
        if values.len() != generator_param_count(dimension) {
            return Err(Error::DimensionMismatch {
                expected: generator_param_count(dimension),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("generator parameters must be finite".into()));
        }
        Ok(Self { values, dimension })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
}

/// `dG/dθ_i` for each parameter of the traceless layout.
pub fn generator_basis(dimension: usize) -> Vec<CMatrix> {
    let k = dimension;
    let mut basis = Vec::with_capacity(generator_param_count(k));
    for s in 0..k {
        for j in (s + 1)..k {
            let mut re = CMatrix::zeros(k, k);
            re[(s, j)] = Complex64::new(1.0, 0.0);
            re[(j, s)] = Complex64::new(-1.0, 0.0);
            basis.push(re);
            let mut im = CMatrix::zeros(k, k);
            im[(s, j)] = Complex64::i();
            im[(j, s)] = Complex64::i();
            basis.push(im);
        }
    }
    for s in 0..k - 1 {
        let mut d = CMatrix::zeros(k, k);
        d[(s, s)] = Complex64::i();
        d[(k - 1, k - 1)] = -Complex64::i();
        basis.push(d);
    }
    basis
}

pub fn generator_from_params(params: &GeneratorParams) -> Generator {
    let k = params.dimension;
    let mut m = CMatrix::zeros(k, k);
    let v = &params.values;
    let mut i = 0;
    for s in 0..k {
        for j in (s + 1)..k {
            let g = Complex64::new(v[i], v[i + 1]);
            m[(s, j)] = g;
            m[(j, s)] = -g.conj();
            i += 2;
        }
    }
    let mut last = 0.0;
    for s in 0..k - 1 {
        m[(s, s)] = Complex64::new(0.0, v[i + s]);
        last -= v[i + s];
    }
    m[(k - 1, k - 1)] = Complex64::new(0.0, last);
    Generator { matrix: m }
}

/// Inverse of [`generator_from_params`]; the generator must be traceless.
pub fn params_from_generator(generator: &Generator) -> Result<GeneratorParams> {
    let k = generator.dimension();
    let m = generator.matrix();
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if generator.trace().norm() > GENERATOR_TOLERANCE * scale * k as f64 {
        return Err(Error::InvalidParameter(format!(
            "generator has trace {}; take Generator::traceless() first",
            generator.trace()
        )));
    }
    let mut values = Vec::with_capacity(generator_param_count(k));
    for s in 0..k {
        for j in (s + 1)..k {
            values.push(m[(s, j)].re);
            values.push(m[(s, j)].im);
        }
    }
    values.extend((0..k - 1).map(|s| m[(s, s)].im));
    GeneratorParams::new(values, k)
}

/// Amplitudes `φ_s` at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedState {
    amplitudes: Vec<Complex64>,
    time: f64,
}

impl PredictedState {
    pub fn new(amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > PREDICTED_NORM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "predicted state has squared norm {norm2}, expected 1"
            )));
        }
        Ok(Self { amplitudes, time })
    }

    pub fn from_state(state: &StateVector, time: f64) -> Self {
        Self {
            amplitudes: state.amplitudes().to_vec(),
            time,
        }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }
}

fn check_dimension(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// One first-order step `(1 + G dt) φ`, renormalized. The norm before
/// renormalization is `1 + O(dt²)`.
pub fn evolve_step(state: &PredictedState, generator: &Generator, dt: f64) -> Result<PredictedState> {
    check_dimension(generator.dimension(), state.dimension())?;
    let norm = generator.norm();
    if norm > 0.0 && dt.abs() > 0.1 / norm {
        log::warn!(
            "evolve_step: dt = {dt} exceeds 0.1/|G| = {}; first-order error is large",
            0.1 / norm
        );
    }
    let phi = DVector::from_column_slice(state.amplitudes());
    let next = &phi + generator.matrix() * &phi * Complex64::new(dt, 0.0);
    let len = next.norm();
    Ok(PredictedState {
        amplitudes: next.iter().map(|z| z / len).collect(),
        time: state.time + dt,
    })
}

/// `n` composed first-order steps of size `t / n`.
pub fn evolve_stepwise(state0: &StateVector, generator: &Generator, t: f64, steps: usize) -> Result<PredictedState> {
    let mut state = PredictedState::from_state(state0, 0.0);
    let dt = t / steps as f64;
    for _ in 0..steps {
        state = evolve_step(&state, generator, dt)?;
    }
    Ok(state)
}

pub(crate) fn apply(propagator: &CMatrix, amplitudes: &[Complex64]) -> Vec<Complex64> {
    (propagator * DVector::from_column_slice(amplitudes))
        .iter()
        .copied()
        .collect()
}

/// `φ(t) = exp(G t) ψ`.
pub fn evolve(state0: &StateVector, generator: &Generator, t: f64) -> Result<PredictedState> {
    check_dimension(generator.dimension(), state0.dimension())?;
    Ok(PredictedState {
        amplitudes: apply(&generator.propagator(t), state0.amplitudes()),
        time: t,
    })
}

/// [`evolve`] at each of `times`.
pub fn evolve_trace(state0: &StateVector, generator: &Generator, times: &[f64]) -> Result<Vec<PredictedState>> {
    times.iter().map(|&t| evolve(state0, generator, t)).collect()
}

/// `P_s = |φ_s|²`.
pub fn predicted_probabilities(state: &PredictedState) -> Vec<f64> {
    state.amplitudes.iter().map(|a| a.norm_sqr()).collect()
}

/// Trial counts `N_m` of the auxiliary experiments feeding a prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    trials: Vec<u64>,
}

impl ErrorBudget {
    pub fn new(trials: Vec<u64>) -> Result<Self> {
        if trials.is_empty() || trials.contains(&0) {
            return Err(Error::InvalidParameter(
                "every auxiliary experiment needs N_m >= 1".into(),
            ));
        }
        Ok(Self { trials })
    }

    pub fn trials(&self) -> &[u64] {
        &self.trials
    }

    pub fn with_trials(&self, m: usize, n: u64) -> Result<Self> {
        let mut t = self.trials.clone();
        t[m] = n;
        Self::new(t)
    }
}

/// Constant derivatives `∂φ_s/∂ψ_j^m` of a linear prediction, indexed
/// `[s][m][j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPrediction {
    rows: Vec<Vec<Vec<Complex64>>>,
}

impl LinearPrediction {
    pub fn new(rows: Vec<Vec<Vec<Complex64>>>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidParameter("prediction has no outputs".into()));
        };
        let shape: Vec<usize> = first.iter().map(Vec::len).collect();
        for row in &rows {
            check_dimension(shape.len(), row.len())?;
            for (coeffs, &k) in row.iter().zip(&shape) {
                check_dimension(k, coeffs.len())?;
            }
        }
        Ok(Self { rows })
    }

    /// The rows of `exp(G t)` as a prediction from one experiment.
    pub fn from_propagator(generator: &Generator, t: f64) -> Self {
        let u = generator.propagator(t);
        let rows = u.row_iter().map(|r| vec![r.iter().copied().collect()]).collect();
        Self { rows }
    }

    pub fn outputs(&self) -> usize {
        self.rows.len()
    }

    pub fn experiments(&self) -> usize {
        self.rows[0].len()
    }

    /// `Σ_j |∂φ_s/∂ψ_j^m|²`.
    pub fn row_weight(&self, s: usize, m: usize) -> f64 {
        self.rows[s][m].iter().map(|a| a.norm_sqr()).sum()
    }
}

/// `Δφ_s = sqrt(Σ_m (1/(4 N_m)) Σ_j |∂φ_s/∂ψ_j^m|²)`.
pub fn prediction_stddev(prediction: &LinearPrediction, budget: &ErrorBudget) -> Result<Vec<f64>> {
    check_dimension(prediction.experiments(), budget.trials.len())?;
    Ok((0..prediction.outputs())
        .map(|s| {
            budget
                .trials
                .iter()
                .enumerate()
                .map(|(m, &n)| prediction.row_weight(s, m) / (4.0 * n as f64))
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

/// `∂Δφ_s/∂N_m = −Σ_j|∂φ_s/∂ψ_j^m|² / (8 N_m² Δφ_s)`, indexed `[s][m]`.
pub fn trial_sensitivity(prediction: &LinearPrediction, budget: &ErrorBudget) -> Result<Vec<Vec<f64>>> {
    let sd = prediction_stddev(prediction, budget)?;
    Ok(sd
        .iter()
        .enumerate()
        .map(|(s, &d)| {
            budget
                .trials
                .iter()
                .enumerate()
                .map(|(m, &n)| -prediction.row_weight(s, m) / (8.0 * (n as f64).powi(2) * d))
                .collect()
        })
        .collect())
}
