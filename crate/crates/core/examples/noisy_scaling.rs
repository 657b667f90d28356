//! Held-out prediction error of a two-bin fit shrinks like 1/sqrt(N) as the
//! trials per record grow.

use erlab::evolution::{generator_from_params, GeneratorParams};
use erlab::tomography::{default_training_times, fit, predict_holdout, synthesize_dataset, BoxScenario, FitOptions};
use erlab::transform::StateVector;
use num_complex::Complex64;

fn main() -> erlab::Result<()> {
    let g = generator_from_params(&GeneratorParams::new(vec![0.9, 0.3, 0.25], 2)?);
    let psi = StateVector::from_amplitudes(vec![Complex64::new(0.8, 0.0), Complex64::new(0.0, 0.6)])?;
    let times = default_training_times(&g, 5);
    let holdout: Vec<f64> = (0..10).map(|i| 0.3 + 0.45 * i as f64).collect();
    let reps = 20;

    for n in [100u64, 1_000, 10_000] {
        let mut errors = Vec::with_capacity(reps);
        for seed in 0..reps as u64 {
            let scenario = BoxScenario::new(g.clone(), psi.clone(), 1.0, seed)?;
            let data = synthesize_dataset(&scenario, &times, &vec![n; times.len()], false)?;
            let result = fit(
                &data,
                &FitOptions {
                    seed,
                    ..FitOptions::default()
                },
            )?;
            let mut worst: f64 = 0.0;
            for &t in &holdout {
                let p = predict_holdout(&result, t)?;
                worst = worst.max((p[0] - scenario.probabilities(t)[0]).abs());
            }
            errors.push(worst);
        }
        errors.sort_by(f64::total_cmp);
        let median = errors[reps / 2];
        println!(
            "N = {n:>6}: median error {median:.4e}, times sqrt(N) {:.3}",
            median * (n as f64).sqrt()
        );
    }
    Ok(())
}
