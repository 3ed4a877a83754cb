//! Config-driven convergence run, as the `converge` subcommand does it, into a temp directory.

use smoothmix::harness::{run_converge, ExperimentConfig, RunOptions};

const CONFIG: &str = r#"
models = ["M0", "M4"]
m_grid = [64, 256, 1024]
n = 100000
seed = 7
method = "both"

[target]
family = "laplace"
rate = { type = "constant", value = 1.0 }
"#;

fn main() -> smoothmix::Result<()> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    let out = std::env::temp_dir().join("smoothmix-harness-example");
    let report = run_converge(&cfg, &RunOptions { out: out.clone(), workers: 1, dump_model: false })?;
    for r in &report.rate_fits {
        if let Some(f) = &r.fit {
            println!("{} ({}): slope {:.3}, theory -{:.4}", r.kind, r.method, f.slope, r.theoretical_exponent.unwrap_or(f64::NAN));
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}
