//! Drive the command layer from code: synthesize a dataset, fit it and
//! predict held-out times, exactly as `erlab run --config` would.

use erlab::cli::{run, RunConfig};

fn main() -> erlab::Result<()> {
    let dir = std::env::temp_dir().join("erlab-run-config-example");
    let synth = format!(
        r#"
command = "synthesize"
seed = 3
output = "{out}/data"
[params]
generator = [[0.0, 0.2], [0.5, 0.3], [-0.5, 0.3], [0.0, -0.2]]
initial = [[0.8, 0.0], [0.6, 0.0]]
trials = 5000
"#,
        out = dir.display()
    );
    let summary = run(&RunConfig::from_toml(&synth, None)?)?;
    println!("synthesize wrote {:?}", summary.files);

    let fit = format!(
        r#"
command = "fit"
seed = 3
output = "{out}/fit"
[params]
dataset = "{out}/data/dataset.csv"
holdout = [0.5, 1.0, 1.5]
"#,
        out = dir.display()
    );
    let summary = run(&RunConfig::from_toml(&fit, None)?)?;
    println!("fit wrote {:?}", summary.files);
    print!(
        "{}",
        std::fs::read_to_string(summary.output.join("holdout.csv")).map_err(erlab::Error::from)?
    );
    Ok(())
}
