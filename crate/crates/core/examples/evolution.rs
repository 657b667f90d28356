//! Evolve an amplitude vector with the exact exponential and with composed
//! first-order steps, and watch the norm.

use erlab::evolution::{evolve, evolve_stepwise, generator_from_params, predicted_probabilities, GeneratorParams};
use erlab::transform::StateVector;
use num_complex::Complex64;

fn main() -> erlab::Result<()> {
    let g = generator_from_params(&GeneratorParams::new(
        vec![0.8, 0.1, 0.0, 0.3, -0.4, 0.5, 0.2, -0.6],
        3,
    )?);
    println!("frequencies of iG: {:?}", g.frequencies());
    let psi = StateVector::from_amplitudes(vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
    ])?;

    for t in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let exact = evolve(&psi, &g, t)?;
        let norm: f64 = exact.amplitudes().iter().map(|a| a.norm_sqr()).sum();
        let p = predicted_probabilities(&exact);
        println!(
            "t = {t:.1}: P = [{:.4}, {:.4}, {:.4}], |phi|^2 - 1 = {:.1e}",
            p[0],
            p[1],
            p[2],
            norm - 1.0
        );
    }

    let t = 2.0;
    let exact = evolve(&psi, &g, t)?;
    for steps in [100, 200, 400, 800] {
        let approx = evolve_stepwise(&psi, &g, t, steps)?;
        let err: f64 = approx
            .amplitudes()
            .iter()
            .zip(exact.amplitudes())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        println!("{steps:>4} steps: error {err:.3e}");
    }
    Ok(())
}
