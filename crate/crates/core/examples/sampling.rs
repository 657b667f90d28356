//! Draw multinomial experiments, compare the empirical spread of the
//! relative frequencies with the exact moments, and print Chebyshev widths.

use erlab::multinomial::{
    chebyshev_widths, frequency_moments, multinomial_pmf, relative_frequencies, sample_trials_on, ExperimentConfig,
    TrialCounts,
};
use erlab::rng::StreamId;

fn main() -> erlab::Result<()> {
    let config = ExperimentConfig::new(vec![0.2, 0.3, 0.5], 400, 2024)?;
    let counts = sample_trials_on(&config, StreamId::new(0, 0));
    println!("one draw: {:?}", counts.counts());
    println!("its probability: {:.6e}", multinomial_pmf(&counts, &config)?);

    let reps = 2000;
    let mut sum = [0.0; 3];
    let mut sum2 = [0.0; 3];
    for r in 0..reps {
        let nu = relative_frequencies(&sample_trials_on(&config, StreamId::new(0, r)));
        for (j, v) in nu.freqs().iter().enumerate() {
            sum[j] += v;
            sum2[j] += v * v;
        }
    }
    let (mean, sd) = frequency_moments(&config);
    for j in 0..3 {
        let m = sum[j] / reps as f64;
        let s = (sum2[j] / reps as f64 - m * m).sqrt();
        println!(
            "outcome {j}: mean {m:.4} (exact {:.4}), sd {s:.5} (exact {:.5})",
            mean[j], sd[j]
        );
    }

    // the most likely outcome of four fair trials split two ways
    let fair = ExperimentConfig::new(vec![0.5, 0.5], 4, 0)?;
    println!(
        "P(2, 2) = {}",
        multinomial_pmf(&TrialCounts::new(vec![2, 2], 4)?, &fair)?
    );

    let w = chebyshev_widths(0.3, 400, 3.0)?;
    println!(
        "k = 3: w_p = {:.4}, bound {:.4}, w_x = {:.4}",
        w.w_p?.width, w.w_p_upper.width, w.w_x.width
    );
    Ok(())
}
