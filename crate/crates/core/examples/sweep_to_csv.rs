//! Small sweep written to CSV and JSON in the temp directory.

use mmimo::config::NetworkConfig;
use mmimo::experiment::run_experiment;
use mmimo::results::{write_table, Format};

fn main() -> mmimo::Result<()> {
    let mut cfg = NetworkConfig::from_toml_str(
        r#"
        M = [32, 64]
        K = 4
        beta = [1, 3]
        trials = 50
        drops = 2
        schemes = "M-MMSE, MF"
        "#,
    )?;
    cfg.set("seed=11")?;
    let table = run_experiment(&cfg)?;

    for s in table.summary() {
        println!(
            "{:6} M={:3} beta={}  {:.3} ± {:.3}",
            s.scheme.name(),
            s.antennas,
            s.beta,
            s.sum_se.unwrap_or(f64::NAN),
            s.sum_se_stderr.unwrap_or(f64::NAN)
        );
    }

    let dir = std::env::temp_dir();
    for (name, format) in [("sweep.csv", Format::Csv), ("sweep.json", Format::Json)] {
        let path = dir.join(name);
        write_table(&table, &path, format)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
