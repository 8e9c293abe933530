//! Large-system deterministic equivalent of the M-MMSE uplink SINR.
//!
//! At BS `j` the detector resolvent is `((1/M) Ĥ_V,j Λ_j Ĥ_V,jᴴ + α I)⁻¹` with
//! `α = (σ² + φ_j)/M`. Its columns have covariance `γ_jb α_jb B I` with
//! `γ_jb = λ_jb`, so every trace reduces to the isotropic fixed point.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::DetectorState;
use crate::error::{Error, Result};
use crate::estimation::EstimatorState;
use crate::geometry::UserDrop;
use crate::pilots::{PilotAllocation, PowerAllocation};
use crate::rmt::{
    normalized_trace, solve_resolvent, solve_resolvent_sandwich, Operator, ResolventInput,
    SolverOptions,
};

/// Options of the deterministic equivalent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetEquivOptions {
    /// Add `Σ_{i_lm = i_jk} τ_lm c_jlm ϑ″_jk / M` to the denominator: the
    /// estimation error of the users sharing the served user's pilot,
    /// including its own. Turning it off keeps only thermal noise on the
    /// `ϑ″` term, which overstates the SINR by up to a factor `1 + φ_j/σ²`.
    pub same_pilot_error: bool,
    pub solver: SolverSettings,
}

impl Default for DetEquivOptions {
    fn default() -> Self {
        Self {
            same_pilot_error: true,
            solver: SolverSettings::default(),
        }
    }
}

/// Stopping rule forwarded to the fixed-point solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
        }
    }
}

/// Fixed-point quantities of one BS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsEquivalent {
    /// `α = (σ² + φ_j)/M`.
    pub shift: f64,
    /// `γ_jb`.
    pub gamma: Vec<f64>,
    /// `α_jb B`, the direction variance.
    pub dir_cov: Vec<f64>,
    /// `(1/M) tr(T_j)`.
    pub t: f64,
    /// `ϑ_jb = (1/M) tr(Φ̃_V,jb T_j)`.
    pub vartheta: Vec<f64>,
    /// `(1/M) tr(T′_jk)` keyed by the pilot index `i_jk`.
    pub t_prime: BTreeMap<usize, f64>,
    /// `(1/M) tr(T″_j)`.
    pub t_double_prime: f64,
    pub iterations: usize,
}

impl BsEquivalent {
    /// `ϑ′_jlmk` for an interferer on pilot `b` and served pilot `i`.
    pub fn vartheta_prime(&self, i: usize, b: usize) -> f64 {
        self.dir_cov[b] * self.t_prime[&i]
    }

    /// `ϑ″_jk` for served pilot `i`.
    pub fn vartheta_double_prime(&self, i: usize) -> f64 {
        self.dir_cov[i] * self.t_double_prime
    }
}

/// Deterministic-equivalent SINRs of every user and the per-BS
/// intermediates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetEquivReport {
    pub antennas: usize,
    pub users_per_cell: usize,
    /// `η̄_jk` at index `j K + k`.
    pub per_user_sinr: Vec<f64>,
    pub per_bs: Vec<BsEquivalent>,
    /// Denominator split per user: same-pilot contamination, other pilots,
    /// noise (including the optional same-pilot error term).
    pub denominator_parts: Vec<[f64; 3]>,
}

impl DetEquivReport {
    /// `δ_jk`.
    pub fn delta(&self, j: usize, pilot: usize) -> f64 {
        self.per_bs[j].vartheta[pilot]
    }

    /// Sum SE per cell, averaged over cells, for coherence length `s`.
    pub fn sum_se_per_cell(&self, coherence: usize, num_pilots: usize) -> Result<f64> {
        let se = det_equiv_se(self, coherence, num_pilots)?;
        Ok(se.iter().sum::<f64>() / self.per_bs.len() as f64)
    }
}

/// `μ_jlmk` for an interferer with pilot power `p`, fading `d` on pilot `b`,
/// when serving pilot `i`.
pub fn mu(bs: &BsEquivalent, i: usize, b: usize, p: f64, d: f64) -> f64 {
    let g = bs.gamma[b];
    let th = bs.vartheta[b];
    let x = g * th;
    bs.t_prime[&i] - p * d * g * bs.vartheta_prime(i, b) * th * (2.0 + x) / (1.0 + x).powi(2)
}

fn solve_bs(
    j: usize,
    alloc: &PilotAllocation,
    est_state: &EstimatorState,
    det_state: &DetectorState,
    sigma2: f64,
    m: usize,
    opts: SolverOptions,
) -> Result<BsEquivalent> {
    let b = alloc.num_pilots();
    let bf = b as f64;
    let shift = (sigma2 + det_state.phi(j)) / m as f64;
    let gamma = det_state.lambdas_at(j).to_vec();
    let dir_cov: Vec<f64> = est_state.alphas_at(j).iter().map(|a| a * bf).collect();
    let r: Vec<f64> = gamma.iter().zip(&dir_cov).map(|(g, a)| g * a).collect();
    let input = ResolventInput::isotropic(m, &r, shift);
    let own: Vec<usize> = (0..alloc.users_per_cell()).map(|k| alloc.pilot(j, k)).collect();
    let first = own.first().copied().unwrap_or(0);
    let base = solve_resolvent(&input, opts).map_err(|e| e.with_pilot_context(j, first))?;
    let t = normalized_trace(&Operator::identity(), &base.t, m);
    let vartheta: Vec<f64> = dir_cov.iter().map(|a| a * t).collect();
    let mut t_prime = BTreeMap::new();
    for &i in &own {
        if t_prime.contains_key(&i) {
            continue;
        }
        let sw = solve_resolvent_sandwich(&input, &base, &Operator::Scaled(dir_cov[i]))
            .map_err(|e| e.with_pilot_context(j, i))?;
        t_prime.insert(i, normalized_trace(&Operator::identity(), &sw.t_prime, m));
    }
    let sw = solve_resolvent_sandwich(&input, &base, &Operator::identity())
        .map_err(|e| e.with_pilot_context(j, first))?;
    Ok(BsEquivalent {
        shift,
        gamma,
        dir_cov,
        t,
        vartheta,
        t_prime,
        t_double_prime: normalized_trace(&Operator::identity(), &sw.t_prime, m),
        iterations: base.iterations,
    })
}

/// Deterministic-equivalent SINR of every user from large-scale quantities.
#[allow(clippy::too_many_arguments)]
pub fn det_equiv_sinr(
    drop: &UserDrop,
    alloc: &PilotAllocation,
    powers: &PowerAllocation,
    est_state: &EstimatorState,
    det_state: &DetectorState,
    sigma2: f64,
    m: usize,
    options: DetEquivOptions,
) -> Result<DetEquivReport> {
    if m == 0 {
        return Err(Error::InvalidParameter("M must be at least 1".into()));
    }
    if alloc.num_cells() != drop.num_cells()
        || alloc.users_per_cell() != drop.users_per_cell()
        || powers.len() != drop.num_users()
        || est_state.num_pilots() != alloc.num_pilots()
        || det_state.num_pilots() != alloc.num_pilots()
    {
        return Err(Error::DimensionMismatch("deterministic equivalent inputs".into()));
    }
    let opts = SolverOptions {
        tol: options.solver.tol,
        max_iter: options.solver.max_iter,
    };
    let cells = drop.num_cells();
    let kk = drop.users_per_cell();
    let bf = alloc.num_pilots() as f64;
    let mf = m as f64;
    let per_bs: Vec<BsEquivalent> = (0..cells)
        .into_par_iter()
        .map(|j| solve_bs(j, alloc, est_state, det_state, sigma2, m, opts))
        .collect::<Result<_>>()?;
    let mut per_user_sinr = Vec::with_capacity(cells * kk);
    let mut parts = Vec::with_capacity(cells * kk);
    for (j, bs) in per_bs.iter().enumerate() {
        for k in 0..kk {
            let own = j * kk + k;
            let i = alloc.pilot_of(own);
            let delta = bs.vartheta[i];
            let tpd2 = |u: usize| {
                let d = drop.gain(j, u);
                powers.payload[u] * powers.pilot[u] * d * d
            };
            let mut same = 0.0;
            let mut same_err = 0.0;
            let mut other = 0.0;
            for u in 0..drop.num_users() {
                let b = alloc.pilot_of(u);
                let d = drop.gain(j, u);
                let tau = powers.payload[u];
                if b == i {
                    let c = d * (1.0 - powers.pilot[u] * d * est_state.alpha(j, b) * bf);
                    same_err += tau * c;
                    if u != own {
                        same += tpd2(u);
                    }
                } else {
                    other += tau * d * mu(bs, i, b, powers.pilot[u], d) / mf;
                }
            }
            let vdp = bs.vartheta_double_prime(i);
            let mut noise = sigma2 * vdp / mf;
            if options.same_pilot_error {
                noise += same_err * vdp / mf;
            }
            let contamination = delta * delta * same;
            let num = tpd2(own) * delta * delta;
            per_user_sinr.push(num / (contamination + other + noise));
            parts.push([contamination, other, noise]);
        }
    }
    Ok(DetEquivReport {
        antennas: m,
        users_per_cell: kk,
        per_user_sinr,
        per_bs,
        denominator_parts: parts,
    })
}

/// `(1 − B/S) log2(1 + η̄_jk)` per user.
pub fn det_equiv_se(report: &DetEquivReport, coherence: usize, num_pilots: usize) -> Result<Vec<f64>> {
    if coherence < num_pilots || coherence == 0 {
        return Err(Error::InvalidParameter(format!(
            "coherence block S = {coherence} is shorter than B = {num_pilots}"
        )));
    }
    let prelog = 1.0 - num_pilots as f64 / coherence as f64;
    Ok(report
        .per_user_sinr
        .iter()
        .map(|e| prelog * (1.0 + e).log2())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{detector_state, SingleCellOptions, Scheme};
    use crate::estimation::estimator_coefficients;
    use crate::performance::Scenario;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    struct Net {
        drop: UserDrop,
        alloc: PilotAllocation,
        powers: PowerAllocation,
        est: EstimatorState,
        det: DetectorState,
    }

    fn net(drop: UserDrop, index: Vec<usize>, b: usize, powers: PowerAllocation, sigma2: f64) -> Net {
        let alloc = PilotAllocation::from_indices(drop.num_cells(), drop.users_per_cell(), b, index).unwrap();
        let est = estimator_coefficients(&alloc, &powers, &drop, sigma2).unwrap();
        let det = detector_state(&alloc, &powers, &drop, &est).unwrap();
        Net {
            drop,
            alloc,
            powers,
            est,
            det,
        }
    }

    fn report(n: &Net, sigma2: f64, m: usize) -> DetEquivReport {
        det_equiv_sinr(&n.drop, &n.alloc, &n.powers, &n.est, &n.det, sigma2, m, DetEquivOptions::default()).unwrap()
    }

    #[test]
    fn se_arithmetic() {
        let rep = DetEquivReport {
            antennas: 1,
            users_per_cell: 3,
            per_user_sinr: vec![1.0, 0.0, 3.0],
            per_bs: vec![],
            denominator_parts: vec![],
        };
        let se = det_equiv_se(&rep, 2, 1).unwrap();
        assert!((se[0] - 0.5).abs() < 1e-15);
        assert_eq!(se[1], 0.0);
        let se = det_equiv_se(&rep, 300, 40).unwrap();
        assert!((se[2] - 26.0 / 30.0 * 2.0).abs() < 1e-12);
        assert!(det_equiv_se(&rep, 10, 20).is_err());
    }

    #[test]
    fn t_prime_is_linear_in_theta() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fading = (0..2 * 4).map(|_| rng.random_range(0.1..1.0)).collect();
        let n = net(
            UserDrop::from_fading(2, 2, fading).unwrap(),
            vec![0, 1, 2, 3],
            4,
            PowerAllocation::uniform(4, 1.0, 1.0),
            1.0,
        );
        let rep = report(&n, 1.0, 16);
        for bs in &rep.per_bs {
            for (&i, &tp) in &bs.t_prime {
                assert!((tp - bs.vartheta_double_prime(i)).abs() < 1e-10 * tp);
            }
        }
    }

    #[test]
    fn dense_solver_path_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fading = (0..2 * 4).map(|_| rng.random_range(0.1..1.0)).collect();
        let n = net(
            UserDrop::from_fading(2, 2, fading).unwrap(),
            vec![0, 1, 2, 0],
            3,
            PowerAllocation::uniform(4, 1.0, 1.0),
            1.0,
        );
        let m = 6;
        let rep = report(&n, 1.0, m);
        for (j, bs) in rep.per_bs.iter().enumerate() {
            let r: Vec<f64> = bs.gamma.iter().zip(&bs.dir_cov).map(|(g, a)| g * a).collect();
            let input = ResolventInput::isotropic(m, &r, bs.shift).densified();
            let base = solve_resolvent(&input, SolverOptions::default()).unwrap();
            let t = normalized_trace(&Operator::identity(), &base.t, m);
            assert!((t - bs.t).abs() < 1e-10 * t, "bs {j}");
            let sw = solve_resolvent_sandwich(&input, &base, &Operator::identity()).unwrap();
            let tpp = normalized_trace(&Operator::identity(), &sw.t_prime, m);
            assert!((tpp - bs.t_double_prime).abs() < 1e-9 * tpp);
        }
    }

    #[test]
    fn contamination_ceiling() {
        // two cells, one user each, same pilot, symmetric fading
        let drop = UserDrop::from_fading(2, 1, vec![1.0, 0.5, 0.5, 1.0]).unwrap();
        let n = net(drop, vec![0, 0], 1, PowerAllocation::uniform(2, 1.0, 1.0), 1.0);
        let mut last = 0.0;
        for m in [16, 64, 256, 4096, 65536] {
            let rep = report(&n, 1.0, m);
            let eta = rep.per_user_sinr[0];
            assert!(eta > last);
            last = eta;
            let [c, o, z] = rep.denominator_parts[0];
            assert!(o == 0.0 && c > 0.0 && z > 0.0);
        }
        // ceiling τp d₁² / τp d₂² = 4
        assert!((last - 4.0).abs() < 0.01 * 4.0, "{last}");
        assert!(last < 4.0);
    }

    #[test]
    fn contamination_dominates_as_m_grows() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let fading = (0..3 * 6).map(|_| rng.random_range(0.05..1.0)).collect();
        let n = net(
            UserDrop::from_fading(3, 2, fading).unwrap(),
            vec![0, 1, 2, 3, 0, 1],
            4,
            PowerAllocation::uniform(6, 1.0, 1.0),
            1.0,
        );
        let ratio = |m| {
            let rep = report(&n, 1.0, m);
            let [c, o, _] = rep.denominator_parts[0];
            o / c
        };
        assert!(ratio(400) < ratio(100));
        assert!(ratio(100) < ratio(25));
    }

    #[test]
    fn deterministic_across_calls() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let fading = (0..3 * 6).map(|_| rng.random_range(0.05..1.0)).collect();
        let n = net(
            UserDrop::from_fading(3, 2, fading).unwrap(),
            vec![0, 1, 2, 3, 0, 1],
            4,
            PowerAllocation::uniform(6, 1.2, 0.8),
            0.5,
        );
        assert_eq!(report(&n, 0.5, 40), report(&n, 0.5, 40));
    }

    #[test]
    fn single_user_mean_sinr() {
        let drop = UserDrop::from_fading(1, 1, vec![1.0]).unwrap();
        let n = net(drop.clone(), vec![0], 1, PowerAllocation::uniform(1, 1.0, 1.0), 1.0);
        let m = 128;
        let sc = Scenario::new(
            Arc::new(drop),
            n.alloc.clone(),
            n.powers.clone(),
            1.0,
            m,
            300,
            SingleCellOptions::default(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trials = 4000;
        let a = sc.statistics().dir_cov(0, 0);
        let mean: f64 = (0..trials)
            .map(|_| {
                let x = crate::linalg::complex_normal_matrix(&mut rng, m, 1, a);
                sc.sinrs_for_directions(Scheme::MultiCellMmse, 0, &x).unwrap()[0]
            })
            .sum::<f64>()
            / trials as f64;
        let complete = det_equiv_sinr(
            &n.drop,
            &n.alloc,
            &n.powers,
            &n.est,
            &n.det,
            1.0,
            m,
            DetEquivOptions {
                same_pilot_error: true,
                ..Default::default()
            },
        )
        .unwrap()
        .per_user_sinr[0];
        assert!((mean - complete).abs() < 0.02 * complete, "{mean} vs {complete}");
        // without the own error term the noise is underestimated by
        // σ² / (σ² + φ)
        let reduced = det_equiv_sinr(
            &n.drop,
            &n.alloc,
            &n.powers,
            &n.est,
            &n.det,
            1.0,
            m,
            DetEquivOptions {
                same_pilot_error: false,
                ..Default::default()
            },
        )
        .unwrap()
        .per_user_sinr[0];
        let phi = n.det.phi(0);
        assert!((reduced / complete - (1.0 + phi)).abs() < 1e-6 * reduced);
    }
}
