//! Reconstruction of a generator and initial amplitudes from frequency data
//! recorded at several delay times.
//!
//! A traceless generator carries `K² − 1` reals and a normalized initial
//! vector with its global phase removed carries `2K − 2`, so `(K + 3)(K − 1)`
//! numbers are needed; each experiment contributes `K − 1`, hence `K + 3`
//! experiments. The fit minimizes the squared probability residuals
//! `Σ_m Σ_j (|φ_j(t_m)|² − ν_j^m)²` by multi-start Levenberg–Marquardt with
//! analytic Jacobians.
//!
//! The initial vector is encoded in hyperspherical form: polar angles
//! `a_1..a_{K−1}` give the moduli and phases `β_2..β_K` the arguments, with
//! the first component real and non-negative.

use std::f64::consts::PI;

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{
    apply, generator_basis, generator_from_params, generator_param_count, params_from_generator,
    predicted_probabilities, Generator, GeneratorParams, PredictedState, GAUGE_CONVENTION,
};
use crate::linalg::{expm_frechet, CMatrix};
use crate::lm::{minimize, numerical_rank, LeastSquares, LmOptions};
use crate::multinomial::{relative_frequencies, sample_trials_on, ExperimentConfig, FrequencyVector};
use crate::rng::{stream_rng, StreamId};
use crate::transform::StateVector;

/// Real numbers needed to predict: `K² + 2K − 3`.
pub fn parameter_count(order: usize) -> Result<usize> {
    check_order(order)?;
    Ok(order * order + 2 * order - 3)
}

/// Experiments needed: `K + 3`, each yielding `K − 1` independent numbers.
pub fn required_experiments(order: usize) -> Result<usize> {
    check_order(order)?;
    Ok(order + 3)
}

/// Reals encoding the gauge-fixed initial vector: `2K − 2`.
pub fn state_param_count(order: usize) -> usize {
    2 * order - 2
}

fn check_order(order: usize) -> Result<()> {
    if order < 2 {
        return Err(Error::InvalidParameter(format!("order K must be >= 2, got {order}")));
    }
    Ok(())
}

/// Components of the unit vector described by `angles` (`2K − 2` reals).
pub fn state_from_angles(angles: &[f64]) -> Vec<Complex64> {
    let k = angles.len() / 2 + 1;
    let (polar, phases) = angles.split_at(k - 1);
    (0..k)
        .map(|j| {
            let r = modulus(polar, j, None);
            if j == 0 {
                Complex64::new(r, 0.0)
            } else {
                Complex64::from_polar(r, phases[j - 1])
            }
        })
        .collect()
}

// r_j = Π_{l<j} sin a_l · (cos a_j if j < K−1). With `diff = Some(i)` the
// factor in a_i is replaced by its derivative.
fn modulus(polar: &[f64], j: usize, diff: Option<usize>) -> f64 {
    let last = polar.len();
    let mut r = 1.0;
    for (l, &a) in polar.iter().enumerate().take(j.min(last) + 1) {
        let d = diff == Some(l);
        r *= if l < j {
            if d {
                a.cos()
            } else {
                a.sin()
            }
        } else if d {
            -a.sin()
        } else {
            a.cos()
        };
    }
    if let Some(i) = diff {
        if i > j {
            return 0.0;
        }
    }
    r
}

/// `∂ψ/∂angle_i` for every angle, indexed `[i][j]`.
pub fn state_angle_derivatives(angles: &[f64]) -> Vec<Vec<Complex64>> {
    let k = angles.len() / 2 + 1;
    let (polar, phases) = angles.split_at(k - 1);
    let phase = |j: usize| {
        if j == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, phases[j - 1])
        }
    };
    let mut out = Vec::with_capacity(angles.len());
    for i in 0..k - 1 {
        out.push((0..k).map(|j| phase(j) * modulus(polar, j, Some(i))).collect());
    }
    for p in 1..k {
        let mut d = vec![Complex64::new(0.0, 0.0); k];
        d[p] = Complex64::i() * phase(p) * modulus(polar, p, None);
        out.push(d);
    }
    out
}

/// Gauge-fixed angles of `state`: the global phase is chosen so that the
/// first nonzero component is real and positive.
pub fn angles_from_state(state: &[Complex64]) -> Vec<f64> {
    let k = state.len();
    let reference = state.iter().find(|z| z.norm() > 0.0).map(|z| z.arg()).unwrap_or(0.0);
    let rotate = Complex64::from_polar(1.0, -reference);
    let fixed: Vec<Complex64> = state.iter().map(|z| z * rotate).collect();
    let mods: Vec<f64> = fixed.iter().map(|z| z.norm()).collect();
    let mut polar = Vec::with_capacity(k - 1);
    for j in 0..k - 1 {
        let tail = mods[j + 1..].iter().map(|m| m * m).sum::<f64>().sqrt();
        polar.push(tail.atan2(mods[j]));
    }
    let phases = fixed[1..].iter().map(|z| if z.norm() > 0.0 { z.arg() } else { 0.0 });
    polar.into_iter().chain(phases).collect()
}

/// A box split into `K` bins of width `w / K`, an unknown evolution, and
/// the prepared initial vector. The width is bookkeeping only.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxScenario {
    pub bins: usize,
    pub box_width: f64,
    pub generator: Generator,
    pub initial: StateVector,
    pub seed: u64,
}

impl BoxScenario {
    pub fn new(generator: Generator, initial: StateVector, box_width: f64, seed: u64) -> Result<Self> {
        if generator.dimension() != initial.dimension() {
            return Err(Error::DimensionMismatch {
                expected: generator.dimension(),
                got: initial.dimension(),
            });
        }
        if !(box_width > 0.0) {
            return Err(Error::InvalidParameter("box width must be positive".into()));
        }
        Ok(Self {
            bins: generator.dimension(),
            box_width,
            generator,
            initial,
            seed,
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.box_width / self.bins as f64
    }

    /// True position probabilities at `t`.
    pub fn probabilities(&self, t: f64) -> Vec<f64> {
        let phi = apply(&self.generator.propagator(t), self.initial.amplitudes());
        phi.iter().map(|z| z.norm_sqr()).collect()
    }

    /// The scenario's parameters in the fit's gauge.
    pub fn gauge_fixed_parameters(&self) -> Vec<f64> {
        let g = params_from_generator(&self.generator.traceless()).expect("traceless by construction");
        let mut theta = g.values().to_vec();
        theta.extend(angles_from_state(self.initial.amplitudes()));
        theta
    }
}

/// `M` evenly spaced delay times covering one period of the fastest beat of
/// `generator`, starting at zero.
pub fn default_training_times(generator: &Generator, count: usize) -> Vec<f64> {
    let spread = generator.spectral_spread();
    let period = if spread > 1e-12 { 2.0 * PI / spread } else { 1.0 };
    (0..count).map(|m| period * m as f64 / count as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub time: f64,
    pub trials: u64,
    pub frequencies: FrequencyVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionDataset {
    order: usize,
    records: Vec<Record>,
}

impl PredictionDataset {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        let Some(first) = records.first() else {
            return Err(Error::InvalidParameter("dataset has no records".into()));
        };
        let order = first.frequencies.order();
        for (i, r) in records.iter().enumerate() {
            if r.frequencies.order() != order {
                return Err(Error::DimensionMismatch {
                    expected: order,
                    got: r.frequencies.order(),
                });
            }
            if r.trials != r.frequencies.trials() {
                return Err(Error::InvalidParameter(format!(
                    "record {i}: trial count {} disagrees with its frequencies ({})",
                    r.trials,
                    r.frequencies.trials()
                )));
            }
            if !r.time.is_finite() {
                return Err(Error::InvalidParameter(format!("record {i}: non-finite time")));
            }
            if i > 0 && !(r.time > records[i - 1].time) {
                return Err(Error::InvalidParameter(format!(
                    "record {i}: times must be strictly increasing ({} after {})",
                    r.time,
                    records[i - 1].time
                )));
            }
        }
        Ok(Self { order, records })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }
}

/// Builds timed frequency records. Record `m` is sampled from stream `(m, 0)` of the
/// scenario seed; with `noiseless` the exact probabilities are recorded.
pub fn synthesize_dataset(
    scenario: &BoxScenario,
    times: &[f64],
    trials: &[u64],
    noiseless: bool,
) -> Result<PredictionDataset> {
    if times.len() != trials.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: trials.len(),
        });
    }
    let records = times
        .iter()
        .zip(trials)
        .enumerate()
        .map(|(m, (&t, &n))| {
            let mut p = scenario.probabilities(t);
            let total: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= total);
            let frequencies = if noiseless {
                FrequencyVector::new(p, n)?
            } else {
                let config = ExperimentConfig::new(p, n, scenario.seed)?;
                relative_frequencies(&sample_trials_on(&config, StreamId::new(m as u32, 0)))
            };
            Ok(Record {
                time: t,
                trials: n,
                frequencies,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let dataset = PredictionDataset::new(records)?;
    let (rank, expected) = identifiability_rank(scenario, times);
    if rank < expected {
        warn!(
            "synthesize: Jacobian at the true parameters has rank {rank} < {expected}; \
             these delay times may not identify the evolution"
        );
    }
    Ok(dataset)
}

/// Rank of the residual Jacobian at the scenario's true parameters, and the
/// largest rank the data can show. Conjugating `G` and `ψ` by a diagonal
/// phase leaves every probability unchanged, so at most `(K + 2)(K − 1)`
/// directions are visible, and `M` experiments carry `M(K − 1)` numbers.
pub fn identifiability_rank(scenario: &BoxScenario, times: &[f64]) -> (usize, usize) {
    let k = scenario.bins;
    let problem = FitProblem::from_times(k, 0.0, times.to_vec(), vec![vec![0.0; k]; times.len()]);
    let (_, jac) = problem.evaluate(&scenario.gauge_fixed_parameters());
    let expected = ((k + 2) * (k - 1)).min(times.len() * (k - 1));
    (numerical_rank(&jac, 1e-8), expected)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Gradient and step tolerance of the local refinement.
    pub tolerance: f64,
    /// Restarts whose loss is within this of the best are tied; ties go to
    /// the smallest spectral spread, then the lowest restart index.
    pub tie_tolerance: f64,
    /// Perturb-and-refine attempts after each restart's first refinement;
    /// a hop is kept only when it lowers the loss.
    pub hops: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 16,
            seed: 0,
            max_iterations: 500,
            tolerance: 1e-12,
            tie_tolerance: 1e-14,
            hops: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub dimension: usize,
    pub generator_params: GeneratorParams,
    /// Hyperspherical angles of the initial vector, `2K − 2` reals.
    pub initial_phases: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the restart that produced this result.
    pub restart: usize,
    pub gauge: String,
}

impl FitResult {
    pub fn generator(&self) -> Generator {
        generator_from_params(&self.generator_params)
    }

    pub fn initial_state(&self) -> StateVector {
        StateVector::from_amplitudes(state_from_angles(&self.initial_phases))
            .expect("hyperspherical encoding is normalized")
    }

    fn predict(&self, time: f64) -> Vec<f64> {
        let g = self.generator();
        let phi = apply(&g.propagator(time), &state_from_angles(&self.initial_phases));
        predicted_probabilities(&PredictedState::new(phi, time).expect("unitary evolution keeps the norm"))
    }
}

/// Residuals `|φ_j(t_m)|² − ν_j^m` over all records and outcomes.
///
/// The state parameters describe the amplitudes at `origin`; the amplitudes
/// at `t` are `exp(G (t − origin)) φ(origin)`.
pub struct FitProblem {
    order: usize,
    origin: f64,
    times: Vec<f64>,
    targets: Vec<Vec<f64>>,
    basis: Vec<CMatrix>,
}

impl FitProblem {
    /// Residuals of `dataset` with the origin at its first record.
    pub fn new(dataset: &PredictionDataset) -> Self {
        Self::from_times(
            dataset.order(),
            dataset.records()[0].time,
            dataset.times(),
            dataset
                .records()
                .iter()
                .map(|r| r.frequencies.freqs().to_vec())
                .collect(),
        )
    }

    fn from_times(order: usize, origin: f64, times: Vec<f64>, targets: Vec<Vec<f64>>) -> Self {
        Self {
            order,
            origin,
            times,
            targets,
            basis: generator_basis(order),
        }
    }

    fn split<'a>(&self, theta: &'a [f64]) -> (GeneratorParams, &'a [f64]) {
        let ng = generator_param_count(self.order);
        let g = GeneratorParams::new(theta[..ng].to_vec(), self.order).expect("length checked by caller");
        (g, &theta[ng..])
    }

    /// `Σ r²`.
    pub fn loss(&self, theta: &[f64]) -> f64 {
        self.residuals(theta).norm_squared()
    }

    /// `∇ Σ r² = 2 Jᵀ r`.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let (r, j) = self.evaluate(theta);
        (j.transpose() * r * 2.0).iter().copied().collect()
    }
}

impl LeastSquares for FitProblem {
    fn parameters(&self) -> usize {
        parameter_count(self.order).expect("order validated")
    }

    fn residuals(&self, theta: &[f64]) -> DVector<f64> {
        let (gp, angles) = self.split(theta);
        let g = generator_from_params(&gp);
        let psi0 = state_from_angles(angles);
        let k = self.order;
        let mut r = DVector::zeros(self.times.len() * k);
        for (m, (&t, target)) in self.times.iter().zip(&self.targets).enumerate() {
            let phi = apply(&g.propagator(t - self.origin), &psi0);
            for j in 0..k {
                r[m * k + j] = phi[j].norm_sqr() - target[j];
            }
        }
        r
    }

    fn evaluate(&self, theta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let (gp, angles) = self.split(theta);
        let g = generator_from_params(&gp);
        let psi0 = state_from_angles(angles);
        let dpsi = state_angle_derivatives(angles);
        let k = self.order;
        let ng = self.basis.len();
        let np = ng + dpsi.len();
        let mut r = DVector::zeros(self.times.len() * k);
        let mut jac = DMatrix::zeros(self.times.len() * k, np);
        let ct = |t: f64| Complex64::new(t, 0.0);
        for (m, (&t, target)) in self.times.iter().zip(&self.targets).enumerate() {
            let t = t - self.origin;
            let tg = g.matrix() * ct(t);
            let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(np);
            let mut u = None;
            for e in &self.basis {
                let (um, l) = expm_frechet(&tg, &(e * ct(t)));
                columns.push(apply(&l, &psi0));
                u.get_or_insert(um);
            }
            let u = u.expect("at least one generator parameter");
            let phi = apply(&u, &psi0);
            for d in &dpsi {
                columns.push(apply(&u, d));
            }
            for j in 0..k {
                let row = m * k + j;
                r[row] = phi[j].norm_sqr() - target[j];
                for (c, dphi) in columns.iter().enumerate() {
                    jac[(row, c)] = 2.0 * (phi[j].conj() * dphi[j]).re;
                }
            }
        }
        (r, jac)
    }
}

// Generator entries uniform in ±scale; the moduli of the state at the
// origin are the square roots of the first record's frequencies and only the
// phases are random.
fn random_start<R: Rng>(rng: &mut R, order: usize, scale: f64, first: &[f64]) -> Vec<f64> {
    let ng = generator_param_count(order);
    let mut theta: Vec<f64> = (0..ng).map(|_| rng.random_range(-scale..=scale)).collect();
    let amplitudes: Vec<Complex64> = first
        .iter()
        .map(|nu| Complex64::from_polar(nu.max(0.0).sqrt(), rng.random_range(-PI..=PI)))
        .collect();
    theta.extend(angles_from_state(&amplitudes));
    theta
}

fn spectral_spread_of(theta: &[f64], order: usize) -> f64 {
    let ng = generator_param_count(order);
    let params = GeneratorParams::new(theta[..ng].to_vec(), order).expect("length fixed by the problem");
    generator_from_params(&params).spectral_spread()
}

/// Recovers a generator and initial vector from `dataset`.
///
/// Restart `r` of `R` starts from a point drawn on stream `(r, 0)` of
/// `options.seed`, with generator entries uniform in `±s·(r + 1)/R` where
/// `s` is half the Nyquist frequency `π/Δt` of the mean record spacing.
/// Evenly spaced records are also fitted exactly by aliased evolutions with
/// faster beats, so among restarts tied on loss the one with the smallest
/// spectral spread wins (then the lowest index).
///
/// A result that did not converge is returned with `converged = false`.
// Prefix continuation starts from three records and gives each stage a
// short iteration budget.
const PREFIX_START: usize = 2;
const PREFIX_ITERATIONS: usize = 200;
// Hop sizes: generator entries relative to the Nyquist-derived scale, angles
// in radians.
const HOP_GENERATOR: f64 = 0.15;
const HOP_ANGLE: f64 = 0.3;

pub fn fit(dataset: &PredictionDataset, options: &FitOptions) -> Result<FitResult> {
    let k = dataset.order();
    let required = required_experiments(k)?;
    if dataset.len() < required {
        return Err(Error::Underdetermined {
            required,
            provided: dataset.len(),
        });
    }
    if options.restarts == 0 {
        return Err(Error::InvalidParameter("at least one restart is required".into()));
    }
    let problem = FitProblem::new(dataset);
    // prefixes[m] holds the first m + 1 records
    let prefixes: Vec<FitProblem> = (0..dataset.len() - 1)
        .map(|m| {
            let sub = PredictionDataset::new(dataset.records()[..=m].to_vec()).expect("prefix of a valid dataset");
            FitProblem::new(&sub)
        })
        .collect();
    let first = dataset.records()[0].frequencies.freqs();
    let times = dataset.times();
    let span = times[times.len() - 1] - times[0];
    let spacing = span / (times.len() - 1) as f64;
    let scale = if spacing > 0.0 { 0.5 * PI / spacing } else { 1.0 };
    let lm = LmOptions {
        max_iterations: options.max_iterations,
        gradient_tolerance: options.tolerance,
        step_tolerance: options.tolerance,
        ..LmOptions::default()
    };
    let outcomes: Vec<_> = (0..options.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(options.seed, StreamId::new(r as u32, 0));
            let level = scale * (r + 1) as f64 / options.restarts as f64;
            let mut theta = random_start(&mut rng, k, level, first);
            // fit growing prefixes of the records so early, short-time data
            // fixes the slow structure before the full record set is seen
            for m in PREFIX_START.min(prefixes.len())..prefixes.len() {
                let short = LmOptions {
                    max_iterations: PREFIX_ITERATIONS,
                    ..lm
                };
                theta = minimize(&prefixes[m], &theta, &short).theta;
            }
            let mut current = minimize(&problem, &theta, &lm);
            for _ in 0..options.hops {
                if current.loss <= lm.loss_floor {
                    break;
                }
                let ng = generator_param_count(k);
                let candidate: Vec<f64> = current
                    .theta
                    .iter()
                    .enumerate()
                    .map(|(i, x)| {
                        let z: f64 = rng.sample(StandardNormal);
                        x + z * if i < ng { HOP_GENERATOR * scale } else { HOP_ANGLE }
                    })
                    .collect();
                let next = minimize(&problem, &candidate, &lm);
                if next.loss < current.loss {
                    current = next;
                }
            }
            current
        })
        .collect();
    let best = outcomes
        .iter()
        .map(|o| o.loss)
        .filter(|l| l.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::NotConverged("every restart produced a non-finite loss".into()));
    }
    let window = best + options.tie_tolerance.max(best * 1e-9);
    let (restart, chosen) = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.loss <= window)
        .min_by(|(ia, a), (ib, b)| {
            spectral_spread_of(&a.theta, k)
                .total_cmp(&spectral_spread_of(&b.theta, k))
                .then(ia.cmp(ib))
        })
        .expect("the best restart is inside its own window");
    if !chosen.converged {
        warn!(
            "fit: best restart {restart} stopped after {} iterations without converging",
            chosen.iterations
        );
    }
    let ng = generator_param_count(k);
    let generator_params = GeneratorParams::new(chosen.theta[..ng].to_vec(), k)?;
    let at_origin = state_from_angles(&chosen.theta[ng..]);
    let initial = apply(
        &generator_from_params(&generator_params).propagator(-problem.origin),
        &at_origin,
    );
    let angles = angles_from_state(&initial);
    Ok(FitResult {
        dimension: k,
        generator_params,
        initial_phases: angles,
        loss: chosen.loss,
        iterations: chosen.iterations,
        converged: chosen.converged,
        restart,
        gauge: GAUGE_CONVENTION.to_string(),
    })
}

/// Predicted probabilities at `time` from a converged fit.
pub fn predict_holdout(fit: &FitResult, time: f64) -> Result<Vec<f64>> {
    if !fit.converged {
        return Err(Error::NotConverged(format!(
            "refusing to predict from an unconverged fit (loss {:e} after {} iterations)",
            fit.loss, fit.iterations
        )));
    }
    Ok(fit.predict(time))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rotation(w: f64) -> Generator {
        generator_from_params(&GeneratorParams::new(vec![w, 0.0, 0.0], 2).unwrap())
    }

    fn up() -> StateVector {
        StateVector::from_amplitudes(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap()
    }

    #[test]
    fn counting() {
        assert_eq!(parameter_count(2).unwrap(), 5);
        assert_eq!(parameter_count(4).unwrap(), 21);
        assert_eq!(required_experiments(2).unwrap(), 5);
        assert_eq!(required_experiments(4).unwrap(), 7);
        for k in 2..=50 {
            assert_eq!(parameter_count(k).unwrap(), (k + 3) * (k - 1));
            assert_eq!(
                parameter_count(k).unwrap(),
                generator_param_count(k) + state_param_count(k)
            );
        }
        assert!(parameter_count(1).is_err());
        assert!(required_experiments(0).is_err());
    }

    #[test]
    fn angle_encoding_round_trips() {
        let angles = vec![0.4, 1.1, 0.3, -2.0, 0.7, 2.5];
        let s = state_from_angles(&angles);
        assert_eq!(s.len(), 4);
        assert!((s.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-15);
        let back = angles_from_state(&s);
        for (a, b) in back.iter().zip(&angles) {
            assert!((a - b).abs() < 1e-13, "{back:?}");
        }
        // global phase does not matter
        let rotated: Vec<_> = s.iter().map(|z| z * Complex64::from_polar(1.0, 0.9)).collect();
        for (a, b) in angles_from_state(&rotated).iter().zip(&angles) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn first_component_zero_is_encodable() {
        let s = vec![c(0.0, 0.0), c(0.0, 0.6), c(0.8, 0.0)];
        let back = state_from_angles(&angles_from_state(&s));
        let p: Vec<f64> = back.iter().map(|z| z.norm_sqr()).collect();
        assert!((p[0]).abs() < 1e-15 && (p[1] - 0.36).abs() < 1e-14 && (p[2] - 0.64).abs() < 1e-14);
    }

    #[test]
    fn angle_derivatives_match_finite_differences() {
        let angles = vec![0.4, 1.1, 0.3, -2.0, 0.7, 2.5];
        let d = state_angle_derivatives(&angles);
        let h = 1e-6;
        for i in 0..angles.len() {
            let mut plus = angles.clone();
            let mut minus = angles.clone();
            plus[i] += h;
            minus[i] -= h;
            let sp = state_from_angles(&plus);
            let sm = state_from_angles(&minus);
            for j in 0..4 {
                let fd = (sp[j] - sm[j]) / (2.0 * h);
                assert!((fd - d[i][j]).norm() < 1e-8, "angle {i} comp {j}");
            }
        }
    }

    #[test]
    fn static_scenario() {
        let psi = StateVector::from_amplitudes(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let sc = BoxScenario::new(Generator::zero(2), psi, 1.0, 3).unwrap();
        let ds = synthesize_dataset(&sc, &[0.0, 1.0, 2.0], &[10, 10, 10], true).unwrap();
        for r in ds.records() {
            assert!((r.frequencies.freqs()[0] - 0.36).abs() < 1e-15);
            assert!((r.frequencies.freqs()[1] - 0.64).abs() < 1e-15);
        }
    }

    #[test]
    fn noiseless_records_are_exact() {
        let w = 1.0;
        let sc = BoxScenario::new(rotation(w), up(), 2.0, 0).unwrap();
        let ds = synthesize_dataset(&sc, &[0.1, FRAC_PI_2 / w], &[50, 50], true).unwrap();
        let p = sc.probabilities(0.1);
        for (a, b) in ds.records()[0].frequencies.freqs().iter().zip(&p) {
            assert!((a - b).abs() <= 1e-15);
        }
        let last = ds.records()[1].frequencies.freqs();
        assert!(last[0].abs() < 1e-15 && (last[1] - 1.0).abs() < 1e-15);
        assert_eq!(sc.bin_width(), 1.0);
    }

    #[test]
    fn sampled_records_are_reproducible() {
        let sc = BoxScenario::new(rotation(0.7), up(), 1.0, 9).unwrap();
        let times = [0.0, 0.5, 1.0];
        let a = synthesize_dataset(&sc, &times, &[100; 3], false).unwrap();
        let b = synthesize_dataset(&sc, &times, &[100; 3], false).unwrap();
        assert_eq!(a, b);
        assert!(a.records().iter().all(|r| r.frequencies.is_lattice()));
    }

    #[test]
    fn dataset_validation() {
        let f = FrequencyVector::new(vec![0.5, 0.5], 10).unwrap();
        let rec = |t| Record {
            time: t,
            trials: 10,
            frequencies: f.clone(),
        };
        assert!(PredictionDataset::new(vec![rec(1.0), rec(1.0)]).is_err());
        assert!(PredictionDataset::new(vec![rec(1.0), rec(0.5)]).is_err());
        assert!(PredictionDataset::new(vec![]).is_err());
        let ds = PredictionDataset::new(vec![rec(0.0), rec(1.0)]).unwrap();
        assert_eq!(
            fit(&ds, &FitOptions::default()),
            Err(Error::Underdetermined {
                required: 5,
                provided: 2
            })
        );
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let g =
            generator_from_params(&GeneratorParams::new(vec![0.3, -0.5, 0.2, 0.1, 0.4, -0.3, 0.25, -0.15], 3).unwrap());
        let psi = StateVector::from_amplitudes(state_from_angles(&[0.7, 0.9, 1.2, -0.4])).unwrap();
        let sc = BoxScenario::new(g, psi, 1.0, 5).unwrap();
        let times: Vec<f64> = (0..6).map(|m| 0.6 * m as f64).collect();
        let ds = synthesize_dataset(&sc, &times, &[200; 6], false).unwrap();
        let problem = FitProblem::new(&ds);
        let theta: Vec<f64> = sc
            .gauge_fixed_parameters()
            .iter()
            .enumerate()
            .map(|(i, x)| x + 0.05 * (i as f64).cos())
            .collect();
        let grad = problem.gradient(&theta);
        let h = 1e-6;
        for i in 0..theta.len() {
            let mut p = theta.clone();
            let mut m = theta.clone();
            p[i] += h;
            m[i] -= h;
            let fd = (problem.loss(&p) - problem.loss(&m)) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / grad[i].abs().max(1e-8);
            assert!(rel < 1e-4, "param {i}: analytic {} fd {fd}", grad[i]);
        }
    }

    #[test]
    fn rank_counts_visible_directions() {
        let g =
            generator_from_params(&GeneratorParams::new(vec![0.3, -0.5, 0.2, 0.1, 0.4, -0.3, 0.25, -0.15], 3).unwrap());
        let psi = StateVector::from_amplitudes(state_from_angles(&[0.7, 0.9, 1.2, -0.4])).unwrap();
        let sc = BoxScenario::new(g.clone(), psi, 1.0, 5).unwrap();
        let (rank, expected) = identifiability_rank(&sc, &default_training_times(&g, 6));
        assert_eq!(expected, 10);
        assert_eq!(rank, expected);
        // an eigenvector of G never moves
        let still = BoxScenario::new(
            Generator::zero(3),
            StateVector::from_amplitudes(state_from_angles(&[0.7, 0.9, 1.2, -0.4])).unwrap(),
            1.0,
            0,
        )
        .unwrap();
        let (rank, _) = identifiability_rank(&still, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(rank < 10);
    }

    #[test]
    fn unconverged_fit_refuses_to_predict() {
        let r = FitResult {
            dimension: 2,
            generator_params: GeneratorParams::new(vec![0.0; 3], 2).unwrap(),
            initial_phases: vec![0.3, 0.0],
            loss: 1.0,
            iterations: 1,
            converged: false,
            restart: 0,
            gauge: GAUGE_CONVENTION.into(),
        };
        assert!(matches!(predict_holdout(&r, 1.0), Err(Error::NotConverged(_))));
        let ok = FitResult { converged: true, ..r };
        let p0 = predict_holdout(&ok, 0.0).unwrap();
        let p9 = predict_holdout(&ok, 9.0).unwrap();
        assert_eq!(p0, p9);
    }
}
