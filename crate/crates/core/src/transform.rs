//! Efficient random variables: one-to-one maps of a relative frequency whose
//! spread stops depending on the underlying probability as `N` grows.
//!
//! The real family is the arcsine map `χ = C·asin(2ν − 1) + θ`; the complex
//! family places the unit-diameter semicircle in the complex plane,
//! `β = a(√(ν(1−ν)) + iν)e^{−iφ} + b`, with `ψ` the `a = 1, b = 0` member.

use std::f64::consts::{FRAC_1_PI, FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multinomial::FrequencyVector;

fn check_unit(nu: f64) -> Result<()> {
    if (0.0..=1.0).contains(&nu) {
        Ok(())
    } else {
        Err(Error::Domain {
            value: nu,
            domain: "[0, 1]",
        })
    }
}

/// Reduces an angle to `(−π, π]`.
pub fn reduce_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealERParams {
    scale: f64,
    offset: f64,
}

impl RealERParams {
    pub fn new(scale: f64, offset: f64) -> Result<Self> {
        if scale == 0.0 || !scale.is_finite() || !offset.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "real ER needs a finite nonzero scale, got C = {scale}, theta = {offset}"
            )));
        }
        Ok(Self { scale, offset })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}

impl Default for RealERParams {
    /// `C = 1/π`, `θ = 1/2`: maps `[0, 1]` onto `[0, 1]`.
    fn default() -> Self {
        Self {
            scale: FRAC_1_PI,
            offset: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexERParams {
    scale: f64,
    tilt: f64,
    offset: Complex64,
}

impl ComplexERParams {
    pub fn new(scale: f64, tilt: f64, offset: Complex64) -> Result<Self> {
        if scale == 0.0 || !scale.is_finite() || !tilt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "complex ER needs a finite nonzero scale, got a = {scale}, phi = {tilt}"
            )));
        }
        Ok(Self {
            scale,
            tilt: reduce_angle(tilt),
            offset,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Tilt angle in `(−π, π]`.
    pub fn tilt(&self) -> f64 {
        self.tilt
    }

    pub fn offset(&self) -> Complex64 {
        self.offset
    }
}

impl Default for ComplexERParams {
    fn default() -> Self {
        Self {
            scale: 1.0,
            tilt: 0.0,
            offset: Complex64::new(0.0, 0.0),
        }
    }
}

pub fn chi(nu: f64, params: &RealERParams) -> Result<f64> {
    check_unit(nu)?;
    Ok(params.scale * (2.0 * nu - 1.0).asin() + params.offset)
}

pub fn chi_inverse(x: f64, params: &RealERParams) -> Result<f64> {
    let arg = (x - params.offset) / params.scale;
    // one ulp of slack so that chi(1) and chi(0) invert
    let limit = FRAC_PI_2 * (1.0 + f64::EPSILON);
    if !(arg.abs() <= limit) {
        return Err(Error::Domain {
            value: x,
            domain: "principal branch (x - theta)/C in [-pi/2, pi/2]",
        });
    }
    Ok(((1.0 + arg.clamp(-FRAC_PI_2, FRAC_PI_2).sin()) / 2.0).clamp(0.0, 1.0))
}

/// Arc length along the unit-diameter semicircle above `ν`.
pub fn zeta(nu: f64) -> Result<f64> {
    check_unit(nu)?;
    Ok((PI + 2.0 * (2.0 * nu - 1.0).asin()) / 4.0)
}

fn semicircle(nu: f64) -> Complex64 {
    Complex64::new((nu * (1.0 - nu)).sqrt(), nu)
}

pub fn beta(nu: f64, params: &ComplexERParams) -> Result<Complex64> {
    check_unit(nu)?;
    Ok(semicircle(nu) * params.scale * Complex64::from_polar(1.0, -params.tilt) + params.offset)
}

/// The normalized complex ER, `|ψ|² = ν`.
pub fn psi(nu: f64, phase: f64) -> Result<Complex64> {
    check_unit(nu)?;
    Ok(semicircle(nu) * Complex64::from_polar(1.0, -phase))
}

/// The modulus-only amplitude `√ν`; not variance stabilized.
pub fn naive_sqrt(nu: f64) -> Result<f64> {
    check_unit(nu)?;
    Ok(nu.sqrt())
}

/// Asymptotic standard deviations `(Δχ, Δψ) = (|C|/√N, 1/(2√N))`.
pub fn er_stddev_laws(trials: u64, params: &RealERParams) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trial count must be at least 1".into()));
    }
    let root_n = (trials as f64).sqrt();
    Ok((params.scale.abs() / root_n, 0.5 / root_n))
}

/// A normalized complex amplitude vector. `phases` holds the tilt used for
/// each component when it was built from frequencies; it is empty for
/// vectors constructed directly from amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    phases: Vec<f64>,
}

pub const STATE_NORM_TOLERANCE: f64 = 1e-10;

impl StateVector {
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidParameter(
                "state vector needs at least 2 components".into(),
            ));
        }
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > STATE_NORM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "state vector has squared norm {norm2}, expected 1"
            )));
        }
        Ok(Self {
            amplitudes,
            phases: Vec::new(),
        })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// `ψ_j = psi(ν_j, φ_j)` componentwise.
pub fn state_vector(freqs: &FrequencyVector, phases: &[f64]) -> Result<StateVector> {
    if phases.len() != freqs.order() {
        return Err(Error::DimensionMismatch {
            expected: freqs.order(),
            got: phases.len(),
        });
    }
    let amplitudes = freqs
        .freqs()
        .iter()
        .zip(phases)
        .map(|(&nu, &phi)| psi(nu, phi))
        .collect::<Result<Vec<_>>>()?;
    Ok(StateVector {
        amplitudes,
        phases: phases.iter().copied().map(reduce_angle).collect(),
    })
}

/// One row of the `nu,chi,zeta,re_psi,im_psi` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformRow {
    pub nu: f64,
    pub chi: f64,
    pub zeta: f64,
    pub re_psi: f64,
    pub im_psi: f64,
}

/// Tabulates every transform on `points` evenly spaced frequencies in `[0, 1]`.
pub fn transform_table(points: usize, params: &RealERParams, phase: f64) -> Result<Vec<TransformRow>> {
    if points < 2 {
        return Err(Error::InvalidParameter(
            "transform table needs at least 2 points".into(),
        ));
    }
    (0..points)
        .map(|i| {
            let nu = i as f64 / (points - 1) as f64;
            let z = psi(nu, phase)?;
            Ok(TransformRow {
                nu,
                chi: chi(nu, params)?,
                zeta: zeta(nu)?,
                re_psi: z.re,
                im_psi: z.im,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const EPS: f64 = 1e-14;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn chi_values() {
        let p = RealERParams::default();
        assert_relative_eq!(chi(0.5, &p).unwrap(), 0.5, epsilon = EPS);
        assert_relative_eq!(chi(1.0, &p).unwrap(), 1.0, epsilon = EPS);
        assert_relative_eq!(chi(0.0, &p).unwrap(), 0.0, epsilon = EPS);
        assert_relative_eq!(chi(0.25, &p).unwrap(), 1.0 / 3.0, epsilon = EPS);
        assert!(matches!(chi(1.0 + 1e-12, &p), Err(Error::Domain { .. })));
        assert!(chi(-0.1, &p).is_err());
    }

    #[test]
    fn chi_inverse_values() {
        let p = RealERParams::default();
        assert_relative_eq!(chi_inverse(0.5, &p).unwrap(), 0.5, epsilon = EPS);
        assert_relative_eq!(chi_inverse(1.0, &p).unwrap(), 1.0, epsilon = EPS);
        assert_relative_eq!(chi_inverse(1.0 / 3.0, &p).unwrap(), 0.25, epsilon = EPS);
        assert!(chi_inverse(1.2, &p).is_err());
        assert!(chi_inverse(-0.01, &p).is_err());
    }

    #[test]
    fn params_reject_zero_scale() {
        assert!(RealERParams::new(0.0, 1.0).is_err());
        assert!(ComplexERParams::new(0.0, 0.0, Complex64::default()).is_err());
        let c = ComplexERParams::new(1.0, 3.0 * PI, Complex64::default()).unwrap();
        assert_relative_eq!(c.tilt(), PI, epsilon = 1e-12);
        let c = ComplexERParams::new(1.0, -PI, Complex64::default()).unwrap();
        assert_relative_eq!(c.tilt(), PI, epsilon = 1e-12);
    }

    #[test]
    fn zeta_values() {
        assert_relative_eq!(zeta(0.5).unwrap(), PI / 4.0, epsilon = EPS);
        assert_relative_eq!(zeta(0.0).unwrap(), 0.0, epsilon = EPS);
        assert_relative_eq!(zeta(1.0).unwrap(), PI / 2.0, epsilon = EPS);
        assert!(zeta(2.0).is_err());
    }

    #[test]
    fn beta_values() {
        let p = ComplexERParams::new(2.0, 0.0, Complex64::default()).unwrap();
        assert!(close(beta(0.5, &p).unwrap(), Complex64::new(1.0, 1.0), EPS));
        let p = ComplexERParams::new(3.0, 1.1, Complex64::default()).unwrap();
        assert!(close(beta(0.0, &p).unwrap(), Complex64::default(), EPS));
        let p = ComplexERParams::new(1.0, FRAC_PI_2, Complex64::default()).unwrap();
        assert!(close(beta(0.5, &p).unwrap(), Complex64::new(0.5, -0.5), EPS));
        let d = ComplexERParams::default();
        assert!(close(beta(0.3, &d).unwrap(), psi(0.3, 0.0).unwrap(), EPS));
    }

    #[test]
    fn psi_values() {
        assert!(close(psi(0.5, 0.0).unwrap(), Complex64::new(0.5, 0.5), EPS));
        assert!(close(psi(1.0, 0.0).unwrap(), Complex64::i(), EPS));
        assert_relative_eq!(psi(0.25, 0.0).unwrap().norm_sqr(), 0.25, epsilon = EPS);
        assert!(psi(-1e-9, 0.0).is_err());
    }

    #[test]
    fn stddev_laws() {
        let (dc, dp) = er_stddev_laws(100, &RealERParams::default()).unwrap();
        assert_relative_eq!(dc, 0.031830988618379067, epsilon = 1e-16);
        assert_relative_eq!(dp, 0.05, epsilon = 1e-16);
        let (dc4, dp4) = er_stddev_laws(400, &RealERParams::default()).unwrap();
        assert_relative_eq!(dc4, dc / 2.0, epsilon = 1e-16);
        assert_relative_eq!(dp4, dp / 2.0, epsilon = 1e-16);
    }

    #[test]
    fn state_vectors() {
        let s = state_vector(&FrequencyVector::new(vec![1.0, 0.0], 10).unwrap(), &[0.0, 0.0]).unwrap();
        assert!(close(s.amplitudes()[0], Complex64::i(), EPS));
        assert!(close(s.amplitudes()[1], Complex64::default(), EPS));
        let s = state_vector(&FrequencyVector::new(vec![0.5, 0.5], 10).unwrap(), &[0.0, 0.0]).unwrap();
        assert!(close(s.amplitudes()[1], Complex64::new(0.5, 0.5), EPS));
        let f = FrequencyVector::new(vec![0.25, 0.25, 0.5], 4).unwrap();
        let s = state_vector(&f, &[0.3, -2.0, 7.0]).unwrap();
        assert_relative_eq!(s.probabilities().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        for (p, nu) in s.probabilities().iter().zip(f.freqs()) {
            assert_relative_eq!(*p, *nu, epsilon = 1e-12);
        }
        assert!(matches!(state_vector(&f, &[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn table_has_endpoints() {
        let t = transform_table(11, &RealERParams::default(), 0.0).unwrap();
        assert_eq!(t.len(), 11);
        assert_eq!(t[0].nu, 0.0);
        assert_eq!(t[10].nu, 1.0);
        assert_relative_eq!(t[10].chi, 1.0, epsilon = EPS);
    }

    #[test]
    fn chi_round_trip_on_grid() {
        let p = RealERParams::default();
        for i in 0..=10_000 {
            let nu = i as f64 / 10_000.0;
            let back = chi_inverse(chi(nu, &p).unwrap(), &p).unwrap();
            assert!((back - nu).abs() <= 1e-14, "nu={nu} back={back}");
        }
    }

    proptest! {
        #[test]
        fn chi_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let p = RealERParams::default();
            prop_assume!(a < b);
            prop_assert!(chi(a, &p).unwrap() < chi(b, &p).unwrap());
        }

        #[test]
        fn chi_inverse_round_trips(x in 0.01f64..=0.99, c in 0.1f64..3.0, theta in -2.0f64..2.0) {
            let p = RealERParams::new(c / PI, theta).unwrap();
            let xs = theta + x * c - c / 2.0;
            let nu = chi_inverse(xs, &p).unwrap();
            prop_assert!((chi(nu, &p).unwrap() - xs).abs() <= 1e-14 * (1.0 + xs.abs()) * 4.0);
        }

        #[test]
        fn modulus_identities(nu in 0.0f64..=1.0, phi in -10.0f64..10.0, a in 0.1f64..5.0) {
            prop_assert!((psi(nu, phi).unwrap().norm_sqr() - nu).abs() <= 1e-14);
            let p = ComplexERParams::new(a, phi, Complex64::default()).unwrap();
            prop_assert!((beta(nu, &p).unwrap().norm_sqr() - a * a * nu).abs() <= 1e-13 * a * a);
        }

        #[test]
        fn phase_covariance(nu in 0.0f64..=1.0, p1 in -4.0f64..4.0, p2 in -4.0f64..4.0) {
            let lhs = psi(nu, p1 + p2).unwrap();
            let rhs = psi(nu, p1).unwrap() * Complex64::from_polar(1.0, -p2);
            prop_assert!((lhs - rhs).norm() <= 1e-14);
        }
    }
}
