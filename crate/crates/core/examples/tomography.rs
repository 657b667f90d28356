//! Recover an unknown three-bin evolution and its initial vector from six
//! noiseless timed records, then predict times that were never measured.

use erlab::evolution::{generator_from_params, GeneratorParams};
use erlab::tomography::{
    default_training_times, fit, identifiability_rank, predict_holdout, required_experiments, synthesize_dataset,
    BoxScenario, FitOptions,
};
use erlab::transform::StateVector;
use num_complex::Complex64;

fn main() -> erlab::Result<()> {
    let g = generator_from_params(&GeneratorParams::new(
        vec![0.7, 0.2, -0.3, 0.5, 0.6, -0.4, 0.4, -0.1],
        3,
    )?);
    let psi = StateVector::from_amplitudes(vec![
        Complex64::new(0.6, 0.0),
        Complex64::new(0.0, 0.48),
        Complex64::new(0.64, 0.0),
    ])?;
    let scenario = BoxScenario::new(g.clone(), psi, 1.0, 1)?;

    let m = required_experiments(3)?;
    let times = default_training_times(&g, m);
    let (rank, expected) = identifiability_rank(&scenario, &times);
    println!("{m} records at {times:.3?}; Jacobian rank {rank} of {expected}");

    let data = synthesize_dataset(&scenario, &times, &vec![1000; m], true)?;
    let result = fit(&data, &FitOptions::default())?;
    println!(
        "loss {:.2e} after {} iterations (restart {}), converged: {}",
        result.loss, result.iterations, result.restart, result.converged
    );
    println!("true spectrum   {:.6?}", g.frequencies());
    println!("fitted spectrum {:.6?}", result.generator().frequencies());

    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let t = 0.37 + 0.61 * i as f64;
        let predicted = predict_holdout(&result, t)?;
        let truth = scenario.probabilities(t);
        let err = predicted
            .iter()
            .zip(&truth)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
        println!("t = {t:.2}: predicted {predicted:.5?}, true {truth:.5?}");
    }
    println!("largest held-out error {worst:.2e}");
    Ok(())
}
