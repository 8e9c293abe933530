//! Monte Carlo spectral efficiency of the four detectors on one drop.

use std::sync::Arc;

use mmimo::config::NetworkConfig;
use mmimo::detectors::Scheme;
use mmimo::experiment::{make_drop, make_scenario};
use mmimo::geometry::build_layout;
use mmimo::performance::{monte_carlo_se, McSettings};

fn main() -> mmimo::Result<()> {
    let cfg = NetworkConfig::default();
    let layout = build_layout(cfg.radius_m)?;
    let drop = Arc::new(make_drop(&cfg, &layout, 10, 0)?);

    for m in [50, 100, 200] {
        let sc = make_scenario(&cfg, &layout, Arc::clone(&drop), m, 4)?;
        print!("M = {m:3}:");
        for (scheme, rep) in monte_carlo_se(&sc, &Scheme::ALL, &McSettings::new(200, cfg.seed)) {
            match rep {
                Ok(r) => print!("  {scheme} {:.2} ± {:.2}", r.sum_se_per_cell, r.sum_se_stderr),
                Err(e) => print!("  {scheme} failed ({})", e.kind()),
            }
        }
        println!();
    }
    Ok(())
}
