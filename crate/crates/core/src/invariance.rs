//! Checks of the invariance claims: how the spread of a transformed binomial
//! frequency depends on `p`, computed exactly by summation over all counts
//! and cross-checked by Monte Carlo.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multinomial::{binomial_pmf, sample_counts_with, ExperimentConfig};
use crate::rng::{stream_rng, StreamId};
use crate::transform::{self, RealERParams};

/// Largest `N` accepted by the exact summation.
pub const MAX_EXACT_TRIALS: u64 = 1_000_000;
/// Fewest replications accepted by the Monte Carlo estimator.
pub const MIN_REPLICATIONS: usize = 1_000;
/// Relative departure above which a few-trials row is flagged.
pub const DEPARTURE_FLAG_THRESHOLD: f64 = 0.10;
/// Five probabilities from the tails to the centre, symmetric about 1/2.
pub const STANDARD_P_GRID: [f64; 5] = [0.07, 0.25, 0.50, 0.75, 0.93];

/// Which function of the binomial frequency is analysed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Frequency,
    Chi {
        params: RealERParams,
    },
    Zeta,
    /// `psi(ν, φ)`; its spread is `sqrt(Var Re + Var Im)` and independent of `φ`.
    Psi {
        phase: f64,
    },
    /// `√ν`, the modulus of the naive amplitude `√ν·e^{iα}`.
    NaiveSqrt,
}

impl Transform {
    pub fn chi() -> Self {
        Transform::Chi {
            params: RealERParams::default(),
        }
    }

    pub fn psi() -> Self {
        Transform::Psi { phase: 0.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Transform::Frequency => "frequency",
            Transform::Chi { .. } => "chi",
            Transform::Zeta => "zeta",
            Transform::Psi { .. } => "psi",
            Transform::NaiveSqrt => "naive_sqrt",
        }
    }

    /// The transformed value as one or two real coordinates.
    fn coordinates(&self, nu: f64) -> [f64; 2] {
        match self {
            Transform::Frequency => [nu, 0.0],
            Transform::Chi { params } => [transform::chi(nu, params).unwrap_or(f64::NAN), 0.0],
            Transform::Zeta => [transform::zeta(nu).unwrap_or(f64::NAN), 0.0],
            Transform::Psi { phase } => {
                let z = transform::psi(nu, *phase).unwrap_or(num_complex::Complex64::new(f64::NAN, f64::NAN));
                [z.re, z.im]
            }
            Transform::NaiveSqrt => [nu.sqrt(), 0.0],
        }
    }

    fn is_complex(&self) -> bool {
        matches!(self, Transform::Psi { .. })
    }

    /// The `p`-independent spread an efficient variable of this scale would
    /// have. For the frequency itself the exact law `sqrt(p(1-p)/N)` is used;
    /// the naive amplitude is compared with the constant of `ψ`.
    pub fn target_stddev(&self, p: f64, trials: u64) -> f64 {
        let n = trials as f64;
        match self {
            Transform::Frequency => (p * (1.0 - p) / n).sqrt(),
            Transform::Chi { params } => params.scale().abs() / n.sqrt(),
            Transform::Zeta | Transform::Psi { .. } | Transform::NaiveSqrt => 0.5 / n.sqrt(),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Transform {
    type Err = Error;

    /// Parses a tag with default constants.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frequency" => Ok(Transform::Frequency),
            "chi" => Ok(Transform::chi()),
            "zeta" => Ok(Transform::Zeta),
            "psi" => Ok(Transform::psi()),
            "naive_sqrt" => Ok(Transform::NaiveSqrt),
            other => Err(Error::Parse(format!(
                "unknown transform '{other}' (expected frequency, chi, zeta, psi or naive_sqrt)"
            ))),
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain {
            value: p,
            domain: "[0, 1]",
        })
    }
}

fn check_capacity(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trial count must be at least 1".into()));
    }
    if trials > MAX_EXACT_TRIALS {
        return Err(Error::Capacity(format!(
            "exact summation supports N <= {MAX_EXACT_TRIALS}, got {trials}"
        )));
    }
    Ok(())
}

/// Exact standard deviation of `f(L/N)` for `L ~ Binomial(N, p)`.
pub fn exact_pushforward_stddev(p: f64, trials: u64, transform: &Transform) -> Result<f64> {
    check_p(p)?;
    check_capacity(trials)?;
    let n = trials as f64;
    let weighted: Vec<(f64, [f64; 2])> = (0..=trials)
        .map(|l| (binomial_pmf(l, trials, p), transform.coordinates(l as f64 / n)))
        .filter(|(w, _)| *w > 0.0)
        .collect();
    let dims = if transform.is_complex() { 2 } else { 1 };
    let mut variance = 0.0;
    for d in 0..dims {
        let mean: f64 = weighted.iter().map(|(w, v)| w * v[d]).sum();
        variance += weighted.iter().map(|(w, v)| w * (v[d] - mean).powi(2)).sum::<f64>();
    }
    Ok(variance.sqrt())
}

/// Probability table of `f(L/N)`: one `(value, prob)` pair per count `L`.
pub fn distribution_table(p: f64, trials: u64, transform: &Transform) -> Result<Vec<(f64, f64)>> {
    check_p(p)?;
    check_capacity(trials)?;
    if transform.is_complex() {
        return Err(Error::InvalidParameter(
            "a complex transform has no scalar distribution table".into(),
        ));
    }
    let n = trials as f64;
    Ok((0..=trials)
        .map(|l| (transform.coordinates(l as f64 / n)[0], binomial_pmf(l, trials, p)))
        .collect())
}

/// Sample standard deviation of the transformed frequency over
/// `replications` binomial draws. Replication `r` uses stream `(0, r)`.
pub fn mc_pushforward_stddev(
    p: f64,
    trials: u64,
    transform: &Transform,
    replications: usize,
    seed: u64,
) -> Result<f64> {
    mc_pushforward_stddev_on(p, trials, transform, replications, seed, 0)
}

pub(crate) fn mc_pushforward_stddev_on(
    p: f64,
    trials: u64,
    transform: &Transform,
    replications: usize,
    seed: u64,
    experiment: u32,
) -> Result<f64> {
    check_p(p)?;
    if replications < MIN_REPLICATIONS {
        return Err(Error::InvalidParameter(format!(
            "Monte Carlo needs at least {MIN_REPLICATIONS} replications, got {replications}"
        )));
    }
    let replications_u32 =
        u32::try_from(replications).map_err(|_| Error::Capacity("replication count exceeds 2^32".into()))?;
    let config = ExperimentConfig::new(vec![p, 1.0 - p], trials, seed)?;
    let n = trials as f64;
    let samples: Vec<[f64; 2]> = (0..replications_u32)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, StreamId::new(experiment, r));
            let counts = sample_counts_with(&config, &mut rng);
            transform.coordinates(counts.counts()[0] as f64 / n)
        })
        .collect();
    let dims = if transform.is_complex() { 2 } else { 1 };
    let denom = (replications - 1) as f64;
    let mut variance = 0.0;
    for d in 0..dims {
        let mean = samples.iter().map(|v| v[d]).sum::<f64>() / replications as f64;
        variance += samples.iter().map(|v| (v[d] - mean).powi(2)).sum::<f64>() / denom;
    }
    Ok(variance.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub p_grid: Vec<f64>,
    pub trials: u64,
    pub transform: Transform,
    /// Monte Carlo replications per cell; `0` skips the Monte Carlo column.
    pub replications: usize,
    pub seed: u64,
}

impl SweepSpec {
    /// The standard grid at `N = 100`.
    pub fn standard(transform: Transform) -> Self {
        Self {
            p_grid: STANDARD_P_GRID.to_vec(),
            trials: 100,
            transform,
            replications: 0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_grid.is_empty() {
            return Err(Error::InvalidParameter("p grid is empty".into()));
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::Domain {
                value: *p,
                domain: "(0, 1) for sweep grid entries",
            });
        }
        if self.replications != 0 && self.replications < MIN_REPLICATIONS {
            return Err(Error::InvalidParameter(format!(
                "Monte Carlo needs at least {MIN_REPLICATIONS} replications, got {}",
                self.replications
            )));
        }
        check_capacity(self.trials)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub exact_sd: f64,
    pub mc_sd: Option<f64>,
    pub target_sd: f64,
    /// `exact_sd / target_sd − 1`.
    pub rel_departure: f64,
}

impl SweepRow {
    pub fn flagged(&self, threshold: f64) -> bool {
        self.rel_departure.abs() > threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub trials: u64,
    pub transform: Transform,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// `(max − min) / min` of the exact spreads over rows whose `p` lies in `[lo, hi]`.
    pub fn exact_spread(&self, lo: f64, hi: f64) -> f64 {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.p >= lo && r.p <= hi)
            .map(|r| r.exact_sd)
            .collect();
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        (max - min) / min
    }

    pub fn max_abs_departure(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_departure.abs()).fold(0.0, f64::max)
    }
}

/// One row per grid point. Cell `i` draws its Monte Carlo replications from
/// experiment stream `i`, so rows are independent of evaluation order.
pub fn grid_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    spec.validate()?;
    let rows = spec
        .p_grid
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let exact_sd = exact_pushforward_stddev(p, spec.trials, &spec.transform)?;
            let mc_sd = if spec.replications > 0 {
                Some(mc_pushforward_stddev_on(
                    p,
                    spec.trials,
                    &spec.transform,
                    spec.replications,
                    spec.seed,
                    i as u32,
                )?)
            } else {
                None
            };
            let target_sd = spec.transform.target_stddev(p, spec.trials);
            Ok(SweepRow {
                p,
                exact_sd,
                mc_sd,
                target_sd,
                rel_departure: exact_sd / target_sd - 1.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        trials: spec.trials,
        transform: spec.transform,
        seed: spec.seed,
        rows,
    })
}

/// Finite-`N` departure of `χ` and `ψ` from their asymptotic spreads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewTrialsReport {
    pub threshold: f64,
    pub chi: SweepReport,
    pub psi: SweepReport,
}

impl FewTrialsReport {
    pub fn flagged_rows(&self) -> impl Iterator<Item = (&'static str, &SweepRow)> {
        let t = self.threshold;
        self.chi
            .rows
            .iter()
            .map(|r| ("chi", r))
            .chain(self.psi.rows.iter().map(|r| ("psi", r)))
            .filter(move |(_, r)| r.flagged(t))
    }
}

pub const FEW_TRIALS_MAX: u64 = 20;

pub fn few_trials_report(p_grid: &[f64], trials: u64) -> Result<FewTrialsReport> {
    if trials > FEW_TRIALS_MAX {
        return Err(Error::InvalidParameter(format!(
            "few-trials report is for N <= {FEW_TRIALS_MAX}, got {trials}"
        )));
    }
    let sweep = |transform| {
        grid_sweep(&SweepSpec {
            p_grid: p_grid.to_vec(),
            trials,
            transform,
            replications: 0,
            seed: 0,
        })
    };
    Ok(FewTrialsReport {
        threshold: DEPARTURE_FLAG_THRESHOLD,
        chi: sweep(Transform::chi())?,
        psi: sweep(Transform::psi())?,
    })
}
