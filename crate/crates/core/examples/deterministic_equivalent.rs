//! Large-system SINR approximation next to the Monte Carlo average.

use std::sync::Arc;

use mmimo::config::NetworkConfig;
use mmimo::detectors::Scheme;
use mmimo::detequiv::{det_equiv_sinr, DetEquivOptions};
use mmimo::experiment::{make_drop, make_scenario};
use mmimo::geometry::build_layout;
use mmimo::performance::{monte_carlo_se, McSettings};

fn main() -> mmimo::Result<()> {
    let cfg = NetworkConfig::default();
    let layout = build_layout(cfg.radius_m)?;
    let drop = Arc::new(make_drop(&cfg, &layout, 10, 0)?);

    println!("   M   Monte Carlo   approximation");
    for m in [25, 50, 100, 200, 400] {
        let sc = make_scenario(&cfg, &layout, Arc::clone(&drop), m, 4)?;
        let rep = det_equiv_sinr(
            sc.drop(),
            sc.allocation(),
            sc.powers(),
            sc.estimator_state(),
            sc.detector_state(),
            sc.sigma2(),
            m,
            DetEquivOptions::default(),
        )?;
        let approx = rep.sum_se_per_cell(cfg.coherence, sc.allocation().num_pilots())?;
        let mc = monte_carlo_se(&sc, &[Scheme::MultiCellMmse], &McSettings::new(100, cfg.seed));
        let mc = mc[0].1.as_ref().map_err(Clone::clone)?;
        println!("{m:4}   {:6.2} ± {:.2}   {approx:6.2}", mc.sum_se_per_cell, mc.sum_se_stderr);
    }
    Ok(())
}
