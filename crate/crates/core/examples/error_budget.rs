//! Linear error propagation from the auxiliary experiments to a prediction,
//! and the effect of giving one experiment more trials.

use erlab::evolution::{prediction_stddev, trial_sensitivity, ErrorBudget, LinearPrediction};
use num_complex::Complex64;

fn main() -> erlab::Result<()> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    // two predicted amplitudes built from two experiments with two outcomes each
    let prediction = LinearPrediction::new(vec![
        vec![vec![c(0.6, 0.0), c(0.0, 0.3)], vec![c(0.2, -0.1), c(0.5, 0.0)]],
        vec![vec![c(0.1, 0.1), c(0.4, 0.0)], vec![c(0.0, 0.7), c(0.3, 0.2)]],
    ])?;
    let budget = ErrorBudget::new(vec![200, 800])?;
    println!("delta phi: {:.5?}", prediction_stddev(&prediction, &budget)?);
    println!("d(delta phi)/dN: {:?}", trial_sensitivity(&prediction, &budget)?);

    for extra in [1, 100, 10_000] {
        let more = budget.with_trials(0, 200 + extra)?;
        println!(
            "N_1 = {:>5}: delta phi {:.6?}",
            200 + extra,
            prediction_stddev(&prediction, &more)?
        );
    }
    Ok(())
}
