//! Self-checks: closed forms, Monte Carlo oracles and exact identities on
//! random instances.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::detectors::{build_bank, m_mmse, m_mmse_full_sum, mf, m_zf, s_mmse, Scheme, SingleCellOptions};
use crate::error::Result;
use crate::estimation::{
    build_estimate_set, estimate_directions, estimate_directions_explicit, pilot_observation, sample_channels,
    EstimateSet,
};
use crate::geometry::UserDrop;
use crate::linalg::{complex_normal_matrix, complex_normal_vector, relative_difference_mat, relative_error, C64};
use crate::performance::{instantaneous_sinr, instantaneous_sinr_dense, optimal_sinr, Scenario};
use crate::pilots::{dft_pilot_book, PilotAllocation, PowerAllocation};
use crate::rmt::{
    normalized_trace, resolvent_trace_oracle, sandwich_trace_oracle, solve_resolvent, solve_resolvent_sandwich,
    Operator, ResolventInput, SolverOptions,
};
use crate::rng::{substream, tag};

/// Size of a random instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub cells: usize,
    pub users_per_cell: usize,
    pub beta: usize,
    pub antennas: usize,
}

/// Random network with strong serving links, weaker cross links, random
/// powers and noise, and a cyclic pilot reuse pattern over `beta` groups.
pub fn random_scenario<R: Rng + ?Sized>(rng: &mut R, shape: Shape) -> Result<Scenario> {
    let Shape {
        cells,
        users_per_cell: k,
        beta,
        antennas,
    } = shape;
    let users = cells * k;
    let fading: Vec<f64> = (0..cells * users)
        .map(|t| {
            let (j, u) = (t / users, t % users);
            if u / k == j {
                rng.random_range(0.3..1.5)
            } else {
                rng.random_range(0.001..0.3)
            }
        })
        .collect();
    let drop = UserDrop::from_fading(cells, k, fading)?;
    let index = (0..cells)
        .flat_map(|l| (0..k).map(move |m| (l % beta) * k + m))
        .collect();
    let alloc = PilotAllocation::from_indices(cells, k, beta * k, index)?;
    let powers = PowerAllocation {
        pilot: (0..users).map(|_| rng.random_range(0.2..3.0)).collect(),
        payload: (0..users).map(|_| rng.random_range(0.2..3.0)).collect(),
    };
    let sigma2 = rng.random_range(0.05..2.0);
    Scenario::new(
        Arc::new(drop),
        alloc,
        powers,
        sigma2,
        antennas,
        (beta * k).max(1) * 2,
        SingleCellOptions::default(),
    )
}

/// One draw of the estimated directions of a scenario.
pub fn random_estimates<R: Rng + ?Sized>(sc: &Scenario, rng: &mut R) -> Result<EstimateSet> {
    let dirs = (0..sc.drop().num_cells())
        .map(|j| {
            let mut h = complex_normal_matrix(rng, sc.antennas(), sc.allocation().num_pilots(), 1.0);
            for b in 0..h.ncols() {
                h.column_mut(b).scale_mut(sc.statistics().dir_cov(j, b).sqrt());
            }
            h
        })
        .collect();
    build_estimate_set(dirs, sc.allocation(), sc.powers(), sc.drop(), sc.estimator_state())
}

/// Worst estimate variance split error `|est + err - d| / d`.
pub fn variance_split_error(sc: &Scenario) -> f64 {
    let stats = sc.statistics();
    let mut worst = 0.0_f64;
    for j in 0..stats.num_cells() {
        for u in 0..stats.num_users() {
            let d = sc.drop().gain(j, u);
            worst = worst.max(relative_error(stats.est_cov(j, u) + stats.err_cov(j, u), d));
        }
    }
    worst
}

/// Worst `1 - |ĥ_uᴴĥ_v|² / (‖ĥ_u‖² ‖ĥ_v‖²)` over pairs of users sharing a pilot.
pub fn collinearity_error(est: &EstimateSet) -> f64 {
    let stats = est.stats();
    let mut worst = 0.0_f64;
    for j in 0..stats.num_cells() {
        for u in 0..stats.num_users() {
            for v in u + 1..stats.num_users() {
                if stats.pilot_of(u) != stats.pilot_of(v) {
                    continue;
                }
                let (a, b) = (est.estimate(j, u), est.estimate(j, v));
                let cos2 = a.dotc(&b).norm_sqr() / (a.norm_squared() * b.norm_squared());
                worst = worst.max((1.0 - cos2).abs());
            }
        }
    }
    worst
}

/// Worst relative gap between the weighted-direction M-MMSE detector and the
/// one built from the sum over every user.
pub fn detector_form_error(sc: &Scenario, est: &EstimateSet) -> Result<f64> {
    let mut worst = 0.0_f64;
    for j in 0..sc.drop().num_cells() {
        for k in 0..sc.drop().users_per_cell() {
            let a = m_mmse(est, sc.detector_state(), sc.sigma2(), j, k)?;
            let b = m_mmse_full_sum(est, sc.powers(), sc.sigma2(), j, k)?;
            worst = worst.max(crate::linalg::relative_difference(&a, &b));
        }
    }
    Ok(worst)
}

/// Worst relative gap between the per-pilot estimator and the one inverting
/// the full pilot covariance, on a fresh channel and noise draw.
pub fn estimator_form_error<R: Rng + ?Sized>(sc: &Scenario, rng: &mut R) -> Result<f64> {
    let book = dft_pilot_book(sc.allocation().num_pilots())?;
    let channels = sample_channels(sc.drop(), sc.antennas(), rng)?;
    let mut worst = 0.0_f64;
    for j in 0..sc.drop().num_cells() {
        let y = pilot_observation(&channels, sc.allocation(), &book, sc.powers(), sc.sigma2(), j, rng)?;
        let fast = estimate_directions(&y, sc.estimator_state(), j, &book)?;
        let slow =
            estimate_directions_explicit(&y, sc.allocation(), sc.powers(), sc.drop(), sc.sigma2(), j, &book)?;
        worst = worst.max(relative_difference_mat(&fast, &slow));
    }
    Ok(worst)
}

/// Worst change of the SINR when a random detector is scaled by a random
/// complex factor.
pub fn scale_invariance_error<R: Rng + ?Sized>(sc: &Scenario, est: &EstimateSet, rng: &mut R) -> Result<f64> {
    let mut worst = 0.0_f64;
    for j in 0..sc.drop().num_cells() {
        for k in 0..sc.drop().users_per_cell() {
            let g = complex_normal_vector(rng, sc.antennas(), 1.0);
            let c = C64::from_polar(rng.random_range(1e-3..1e3), rng.random_range(0.0..std::f64::consts::TAU));
            let a = instantaneous_sinr(&g, est, sc.powers(), sc.sigma2(), j, k)?;
            let b = instantaneous_sinr(&(&g * c), est, sc.powers(), sc.sigma2(), j, k)?;
            worst = worst.max(relative_error(b, a));
        }
    }
    Ok(worst)
}

/// Worst gap between the scalar-form SINR and the explicit `M × M`
/// denominator for random detectors.
pub fn sinr_form_error<R: Rng + ?Sized>(sc: &Scenario, est: &EstimateSet, rng: &mut R) -> Result<f64> {
    let mut worst = 0.0_f64;
    for j in 0..sc.drop().num_cells() {
        for k in 0..sc.drop().users_per_cell() {
            let g = complex_normal_vector(rng, sc.antennas(), 1.0);
            let a = instantaneous_sinr(&g, est, sc.powers(), sc.sigma2(), j, k)?;
            let b = instantaneous_sinr_dense(&g, est, sc.powers(), sc.sigma2(), j, k)?;
            worst = worst.max(relative_error(a, b));
        }
    }
    Ok(worst)
}

/// Outcome of the optimality check on one instance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OptimalityReport {
    /// Worst `|η_MMSE - η_max| / η_max`.
    pub optimum_gap: f64,
    /// Largest `(η_other - η_MMSE) / η_MMSE` over baselines and random
    /// detectors; non-positive when M-MMSE wins everywhere.
    pub worst_excess: f64,
}

/// Compare M-MMSE with the closed-form maximum, the other detectors and
/// `random_detectors` random combining vectors for every user.
pub fn optimality<R: Rng + ?Sized>(
    sc: &Scenario,
    est: &EstimateSet,
    random_detectors: usize,
    rng: &mut R,
) -> Result<OptimalityReport> {
    let (sigma2, powers) = (sc.sigma2(), sc.powers());
    let mut rep = OptimalityReport {
        optimum_gap: 0.0,
        worst_excess: f64::NEG_INFINITY,
    };
    for j in 0..sc.drop().num_cells() {
        for k in 0..sc.drop().users_per_cell() {
            let g = m_mmse(est, sc.detector_state(), sigma2, j, k)?;
            let eta = instantaneous_sinr(&g, est, powers, sigma2, j, k)?;
            let best = optimal_sinr(est, powers, sigma2, j, k)?;
            rep.optimum_gap = rep.optimum_gap.max(relative_error(eta, best));
            let mut others = vec![
                mf(est, j, k),
                s_mmse(est, powers, sc.drop(), sigma2, sc.options(), j, k)?,
            ];
            if let Ok(zf) = m_zf(est, j, k) {
                others.push(zf);
            }
            others.extend((0..random_detectors).map(|_| complex_normal_vector(rng, sc.antennas(), 1.0)));
            for other in &others {
                let e = instantaneous_sinr(other, est, powers, sigma2, j, k)?;
                rep.worst_excess = rep.worst_excess.max((e - eta) / eta);
            }
        }
    }
    Ok(rep)
}

/// Worst relative gap between the Gram-based SINRs of the Monte Carlo engine
/// and the explicit detectors, over every scheme that can be built.
pub fn kernel_error(sc: &Scenario, est: &EstimateSet) -> Result<f64> {
    let mut worst = 0.0_f64;
    for scheme in Scheme::ALL {
        let bank = match build_bank(
            scheme,
            est,
            sc.detector_state(),
            sc.powers(),
            sc.drop(),
            sc.sigma2(),
            sc.options(),
        ) {
            Ok(b) => b,
            Err(_) => continue,
        };
        for j in 0..sc.drop().num_cells() {
            let fast = sc.sinrs_for_directions(scheme, j, est.directions(j))?;
            for (k, f) in fast.iter().enumerate() {
                let slow = instantaneous_sinr(bank.vector(j, k), est, sc.powers(), sc.sigma2(), j, k)?;
                worst = worst.max(relative_error(*f, slow));
            }
        }
    }
    Ok(worst)
}

/// `|δ - (√5 - 1)/2|` for `B = M = 64`, `R_b = I`, `ρ = 1`.
pub fn golden_ratio_error() -> Result<f64> {
    let input = ResolventInput::isotropic(64, &[1.0; 64], 1.0);
    let sol = solve_resolvent(&input, SolverOptions::default())?;
    let target = (5.0_f64.sqrt() - 1.0) / 2.0;
    Ok(sol.delta.iter().map(|d| (d - target).abs()).fold(0.0, f64::max))
}

/// One named check of [`run_checks`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed error, in the units of `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn outcome(name: &'static str, tolerance: f64, worst: Result<f64>) -> CheckOutcome {
    match worst {
        Ok(w) => CheckOutcome {
            name,
            passed: w <= tolerance,
            worst: w,
            tolerance,
            error: None,
        },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            worst: f64::NAN,
            tolerance,
            error: Some(format!("{}: {e}", e.kind())),
        },
    }
}

/// Oracle error in units of `max(3 stderr, 2% of the target)`.
fn oracle_ratio(oracle: f64, stderr: f64, target: f64) -> f64 {
    (oracle - target).abs() / (3.0 * stderr).max(0.02 * target.abs())
}

/// Quick suite for the command line: identities on `instances` random
/// instances plus small fixed-point and oracle checks.
pub fn run_checks(instances: usize, seed: u64) -> Vec<CheckOutcome> {
    let shape = Shape {
        cells: 3,
        users_per_cell: 2,
        beta: 2,
        antennas: 8,
    };
    let mut worst = [0.0_f64; 8];
    let identities = (|| -> Result<()> {
        for i in 0..instances {
            let mut rng = substream(seed, &[tag::VALIDATE, i as u64]);
            let sc = random_scenario(&mut rng, shape)?;
            let est = random_estimates(&sc, &mut rng)?;
            let opt = optimality(&sc, &est, 10, &mut rng)?;
            let values = [
                variance_split_error(&sc),
                collinearity_error(&est),
                detector_form_error(&sc, &est)?,
                estimator_form_error(&sc, &mut rng)?,
                scale_invariance_error(&sc, &est, &mut rng)?,
                sinr_form_error(&sc, &est, &mut rng)?,
                opt.optimum_gap.max(opt.worst_excess.max(0.0)),
                kernel_error(&sc, &est)?,
            ];
            for (w, v) in worst.iter_mut().zip(values) {
                *w = w.max(v);
            }
        }
        Ok(())
    })();
    let names: [(&'static str, f64); 8] = [
        ("variance_split", 1e-12),
        ("same_pilot_collinearity", 1e-12),
        ("mmse_two_forms", 1e-8),
        ("estimator_two_forms", 1e-8),
        ("sinr_scale_invariance", 1e-12),
        ("sinr_two_forms", 1e-10),
        ("mmse_optimality", 1e-9),
        ("gram_kernel", 1e-9),
    ];
    let mut out: Vec<CheckOutcome> = names
        .iter()
        .zip(worst)
        .map(|(&(name, tol), w)| match &identities {
            Ok(()) => outcome(name, tol, Ok(w)),
            Err(e) => outcome(name, tol, Err(e.clone())),
        })
        .collect();
    out.push(outcome(
        "pilot_book_orthogonality",
        1e-10,
        dft_pilot_book(28).map(|b| b.gram_error()),
    ));
    out.push(outcome("fixed_point_golden_ratio", 1e-10, golden_ratio_error()));
    out.push(outcome("resolvent_oracle", 1.0, resolvent_check(seed)));
    out.push(outcome("sandwich_oracle", 1.0, sandwich_check(seed)));
    out
}

fn resolvent_check(seed: u64) -> Result<f64> {
    let input = ResolventInput::isotropic(32, &[1.0; 32], 1.0);
    let sol = solve_resolvent(&input, SolverOptions::default())?;
    let target = normalized_trace(&Operator::identity(), &sol.t, input.m);
    let o = resolvent_trace_oracle(&input, &Operator::identity(), 200, seed)?;
    Ok(oracle_ratio(o.mean, o.stderr, target))
}

fn sandwich_check(seed: u64) -> Result<f64> {
    let mut rng = substream(seed, &[tag::VALIDATE, u64::MAX]);
    let r: Vec<f64> = (0..16).map(|_| rng.random_range(0.1..2.0)).collect();
    let input = ResolventInput::isotropic(64, &r, 1.0);
    let base = solve_resolvent(&input, SolverOptions::default())?;
    let s = solve_resolvent_sandwich(&input, &base, &Operator::identity())?;
    let target = normalized_trace(&Operator::identity(), &s.t_prime, input.m);
    let o = sandwich_trace_oracle(&input, &Operator::identity(), &Operator::identity(), 200, seed)?;
    Ok(oracle_ratio(o.mean, o.stderr, target))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        for c in run_checks(20, 3) {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn random_scenarios_are_valid() {
        let mut rng = substream(1, &[0]);
        for beta in [1, 2, 3] {
            let shape = Shape {
                cells: 4,
                users_per_cell: 3,
                beta,
                antennas: 5,
            };
            let sc = random_scenario(&mut rng, shape).unwrap();
            assert_eq!(sc.allocation().num_pilots(), 3 * beta);
            assert!(sc.coherence() >= sc.allocation().num_pilots());
            let est = random_estimates(&sc, &mut rng).unwrap();
            assert_eq!(est.directions(3).shape(), (5, 3 * beta));
        }
    }
}
