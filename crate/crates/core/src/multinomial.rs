//! Multinomial data collection: the exact probability law of the counts, a
//! reproducible sampler, relative frequencies and their moments, and the
//! Chebyshev interval widths for the probability and its arcsine image.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamId};

/// Tolerance on `|Σ p_j − 1|` and `|Σ ν_j − 1|`. Vectors outside it are
/// rejected rather than renormalized.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

pub(crate) fn check_distribution(values: &[f64], what: &str) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::InvalidProbabilities(format!(
            "{what} needs at least 2 outcomes, got {}",
            values.len()
        )));
    }
    if let Some((j, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidProbabilities(format!(
            "{what}[{j}] = {v} is outside [0, 1]"
        )));
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::InvalidProbabilities(format!(
            "{what} sum to {sum:.17}, not 1 within {NORMALIZATION_TOLERANCE:e}"
        )));
    }
    Ok(())
}

/// One probabilistic experiment: `K` outcomes with probabilities `p_j`,
/// repeated for `N` trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    order: usize,
    trials: u64,
    probabilities: Vec<f64>,
    seed: u64,
}

impl ExperimentConfig {
    pub fn new(probabilities: Vec<f64>, trials: u64, seed: u64) -> Result<Self> {
        check_distribution(&probabilities, "probabilities")?;
        if trials == 0 {
            return Err(Error::InvalidParameter("trial count must be at least 1".into()));
        }
        Ok(Self {
            order: probabilities.len(),
            trials,
            probabilities,
            seed,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Raw counts `L_j` of one experiment; always sums to the trial count.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialCounts {
    counts: Vec<u64>,
    trials: u64,
}

impl TrialCounts {
    pub fn new(counts: Vec<u64>, trials: u64) -> Result<Self> {
        let sum: u64 = counts.iter().sum();
        if sum != trials {
            return Err(Error::CountSum { sum, trials });
        }
        Ok(Self { counts, trials })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn order(&self) -> usize {
        self.counts.len()
    }
}

/// Relative frequencies `ν_j`.
///
/// Vectors built from counts lie on the `1/N` lattice. Idealized vectors
/// (exact probabilities standing in for data, or values read back from a
/// file) only need to be a valid distribution; see [`Self::is_lattice`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector {
    freqs: Vec<f64>,
    trials: u64,
}

impl FrequencyVector {
    pub fn new(freqs: Vec<f64>, trials: u64) -> Result<Self> {
        check_distribution(&freqs, "frequencies")?;
        if trials == 0 {
            return Err(Error::InvalidParameter("trial count must be at least 1".into()));
        }
        Ok(Self { freqs, trials })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn order(&self) -> usize {
        self.freqs.len()
    }

    /// Whether every `ν_j·N` is an integer (to 1e-9).
    pub fn is_lattice(&self) -> bool {
        let n = self.trials as f64;
        self.freqs.iter().all(|v| ((v * n) - (v * n).round()).abs() < 1e-9)
    }
}

/// Exact probability of `counts` under `config`, evaluated in log space.
pub fn multinomial_pmf(counts: &TrialCounts, config: &ExperimentConfig) -> Result<f64> {
    if counts.order() != config.order() {
        return Err(Error::DimensionMismatch {
            expected: config.order(),
            got: counts.order(),
        });
    }
    if counts.trials() != config.trials() {
        return Err(Error::CountSum {
            sum: counts.trials(),
            trials: config.trials(),
        });
    }
    let mut log_p = ln_factorial(counts.trials());
    for (&l, &p) in counts.counts().iter().zip(config.probabilities()) {
        if l == 0 {
            continue;
        }
        if p == 0.0 {
            return Ok(0.0);
        }
        log_p += l as f64 * p.ln() - ln_factorial(l);
    }
    Ok(log_p.exp().min(1.0))
}

/// Binomial pmf `C(n, l) p^l (1-p)^(n-l)` in log space; exact at `p ∈ {0, 1}`.
pub fn binomial_pmf(l: u64, n: u64, p: f64) -> f64 {
    if l > n {
        return 0.0;
    }
    if p == 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if l == n { 1.0 } else { 0.0 };
    }
    let log_c = ln_factorial(n) - ln_factorial(l) - ln_factorial(n - l);
    (log_c + l as f64 * p.ln() + (n - l) as f64 * (-p).ln_1p()).exp()
}

/// Draws `N` trials by sequential conditional binomials: outcome `j` takes
/// `Binomial(remaining, p_j / remaining_mass)` and the last outcome takes
/// whatever is left.
pub fn sample_counts_with<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> TrialCounts {
    let probs = config.probabilities();
    let mut remaining = config.trials();
    let mut mass = 1.0_f64;
    let mut counts = Vec::with_capacity(probs.len());
    for (j, &p) in probs.iter().enumerate() {
        if j + 1 == probs.len() {
            counts.push(remaining);
            break;
        }
        let draw = if remaining == 0 || p == 0.0 {
            0
        } else if mass <= 0.0 || p >= mass {
            remaining
        } else {
            let cond = (p / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, cond)
                .expect("conditional probability is in [0, 1]")
                .sample(rng)
        };
        counts.push(draw);
        remaining -= draw;
        mass -= p;
    }
    TrialCounts {
        counts,
        trials: config.trials(),
    }
}

/// Samples one experiment from the default stream of `config.seed()`.
pub fn sample_trials(config: &ExperimentConfig) -> TrialCounts {
    sample_trials_on(config, StreamId::default())
}

/// Samples one experiment from an explicit stream of `config.seed()`.
pub fn sample_trials_on(config: &ExperimentConfig, stream: StreamId) -> TrialCounts {
    let mut rng = stream_rng(config.seed(), stream);
    sample_counts_with(config, &mut rng)
}

pub fn relative_frequencies(counts: &TrialCounts) -> FrequencyVector {
    let n = counts.trials() as f64;
    FrequencyVector {
        freqs: counts.counts().iter().map(|&l| l as f64 / n).collect(),
        trials: counts.trials(),
    }
}

/// Mean and standard deviation of each relative frequency.
pub fn frequency_moments(config: &ExperimentConfig) -> (Vec<f64>, Vec<f64>) {
    let n = config.trials() as f64;
    let mean = config.probabilities().to_vec();
    let sd = mean.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect();
    (mean, sd)
}

/// An interval width together with the confidence parameter that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevWidth {
    pub width: f64,
    pub confidence_k: f64,
}

/// Widths of the Chebyshev intervals for one outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevWidths {
    /// Data-dependent width for `p`; an [`Error::Endpoint`] at `ν ∈ {0, 1}`.
    pub w_p: Result<ChebyshevWidth>,
    /// Data-free upper bound on the width for `p`.
    pub w_p_upper: ChebyshevWidth,
    /// Width for the limit of the arcsine variable, `C = 1/π`.
    pub w_x: ChebyshevWidth,
}

pub fn chebyshev_widths(nu: f64, trials: u64, k: f64) -> Result<ChebyshevWidths> {
    if !(k > 1.0) || !k.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "confidence parameter k must be > 1, got {k}"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trial count must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::Domain {
            value: nu,
            domain: "[0, 1]",
        });
    }
    let root_n = (trials as f64).sqrt();
    let w_p = if nu == 0.0 || nu == 1.0 {
        Err(Error::Endpoint(nu))
    } else {
        Ok(ChebyshevWidth {
            width: 2.0 * k * (nu * (1.0 - nu) / trials as f64).sqrt(),
            confidence_k: k,
        })
    };
    Ok(ChebyshevWidths {
        w_p,
        w_p_upper: ChebyshevWidth {
            width: k / root_n,
            confidence_k: k,
        },
        w_x: ChebyshevWidth {
            width: std::f64::consts::FRAC_2_PI * k / root_n,
            confidence_k: k,
        },
    })
}

/// All count vectors of length `order` summing to `trials`, in lexicographic
/// order. Exponential in `order`; for enumeration checks only.
pub fn enumerate_counts(order: usize, trials: u64) -> Vec<Vec<u64>> {
    fn rec(order: usize, left: u64, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if order == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for l in 0..=left {
            prefix.push(l);
            rec(order - 1, left - l, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if order > 0 {
        rec(order, trials, &mut Vec::with_capacity(order), &mut out);
    }
    out
}
