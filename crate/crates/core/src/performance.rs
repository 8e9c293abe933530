//! Instantaneous SINR and Monte Carlo ergodic spectral efficiency.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{
    detector_state, single_cell_interference, DetectorState, InterferenceModel, Scheme,
    SingleCellOptions,
};
use crate::error::{Error, Result};
use crate::estimation::{
    estimate_all, estimator_coefficients, sample_channels, EstimateSet, EstimationStatistics,
    EstimatorState,
};
use crate::geometry::UserDrop;
use crate::kernel::{bs_sinrs, BsConstants, SplitMatrix, Workspace};
use crate::linalg::{hpd_cholesky, scaled_identity, CMat, CVec, C64};
use crate::pilots::{dft_pilot_book, PilotAllocation, PilotBook, PowerAllocation};
use crate::rng::{substream, tag};

fn check_detector(g: &CVec) -> Result<()> {
    if g.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::ZeroDetector);
    }
    Ok(())
}

/// Conditional SINR of user `k` in cell `j` for combining vector `g`.
///
/// All error covariances are scaled identities, so the denominator is
/// `Σ_{(l,m)≠(j,k)} τ_lm |gᴴĥ_jlm|² + ‖g‖² (Σ_{l,m} τ_lm c_jlm + σ²)`.
pub fn instantaneous_sinr(
    g: &CVec,
    est: &EstimateSet,
    powers: &PowerAllocation,
    sigma2: f64,
    j: usize,
    k: usize,
) -> Result<f64> {
    check_detector(g)?;
    let stats = est.stats();
    let own = j * stats.users_per_cell() + k;
    let dirs = est.directions(j);
    // gᴴ x_b for every pilot direction
    let proj: Vec<C64> = (0..stats.num_pilots())
        .map(|b| g.dotc(&dirs.column(b)))
        .collect();
    let mut interference = 0.0;
    let mut error = sigma2;
    let mut signal = 0.0;
    for u in 0..stats.num_users() {
        let tau = powers.payload[u];
        let s = stats.scale(j, u);
        let gain = tau * s * s * proj[stats.pilot_of(u)].norm_sqr();
        error += tau * stats.err_cov(j, u);
        if u == own {
            signal = gain;
        } else {
            interference += gain;
        }
    }
    Ok(signal / (interference + g.norm_squared() * error))
}

/// Interference-plus-noise matrix
/// `τ_jk C_jjk + Σ_{(l,m)≠(j,k)} τ_lm (ĥ_jlm ĥ_jlmᴴ + C_jlm) + σ² I`.
pub fn interference_matrix(
    est: &EstimateSet,
    powers: &PowerAllocation,
    sigma2: f64,
    j: usize,
    k: usize,
) -> CMat {
    let stats = est.stats();
    let own = j * stats.users_per_cell() + k;
    let m = est.antennas();
    let mut sigma = scaled_identity(m, sigma2);
    for u in 0..stats.num_users() {
        let tau = powers.payload[u];
        sigma += scaled_identity(m, tau * stats.err_cov(j, u));
        if u != own {
            let h = est.estimate(j, u);
            sigma += (&h * h.adjoint()) * C64::new(tau, 0.0);
        }
    }
    sigma
}

/// [`instantaneous_sinr`] evaluated with the explicit `M × M` denominator.
pub fn instantaneous_sinr_dense(
    g: &CVec,
    est: &EstimateSet,
    powers: &PowerAllocation,
    sigma2: f64,
    j: usize,
    k: usize,
) -> Result<f64> {
    check_detector(g)?;
    let own = j * est.stats().users_per_cell() + k;
    let h = est.estimate(j, own);
    let sigma = interference_matrix(est, powers, sigma2, j, k);
    let num = powers.payload[own] * g.dotc(&h).norm_sqr();
    let den = g.dotc(&(&sigma * g)).re;
    Ok(num / den)
}

/// Largest achievable SINR `τ_jk ĥ_jjkᴴ Σ⁻¹ ĥ_jjk` over all combining vectors.
pub fn optimal_sinr(
    est: &EstimateSet,
    powers: &PowerAllocation,
    sigma2: f64,
    j: usize,
    k: usize,
) -> Result<f64> {
    let own = j * est.stats().users_per_cell() + k;
    let h = est.estimate(j, own);
    let chol = hpd_cholesky(interference_matrix(est, powers, sigma2, j, k))?;
    Ok(powers.payload[own] * h.dotc(&chol.solve(&h)).re)
}

/// How a Monte Carlo trial produces the estimated directions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Draw `Ĥ_V,j` directly: its columns are independent `CN(0, α_jb B I)`.
    #[default]
    Estimates,
    /// Draw channels and noise, then run the estimator.
    Channels,
}

/// Everything that stays fixed across the trials of one drop.
#[derive(Clone, Debug)]
pub struct Scenario {
    drop: Arc<UserDrop>,
    alloc: PilotAllocation,
    powers: PowerAllocation,
    sigma2: f64,
    antennas: usize,
    coherence: usize,
    options: SingleCellOptions,
    book: PilotBook,
    est_state: EstimatorState,
    stats: Arc<EstimationStatistics>,
    det_state: DetectorState,
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        drop: Arc<UserDrop>,
        alloc: PilotAllocation,
        powers: PowerAllocation,
        sigma2: f64,
        antennas: usize,
        coherence: usize,
        options: SingleCellOptions,
    ) -> Result<Self> {
        if antennas == 0 {
            return Err(Error::InvalidParameter("M must be at least 1".into()));
        }
        if coherence < alloc.num_pilots() {
            return Err(Error::InvalidParameter(format!(
                "coherence block S = {coherence} is shorter than B = {}",
                alloc.num_pilots()
            )));
        }
        let book = dft_pilot_book(alloc.num_pilots())?;
        let est_state = estimator_coefficients(&alloc, &powers, &drop, sigma2)?;
        let stats = Arc::new(EstimationStatistics::new(&alloc, &powers, &drop, &est_state)?);
        let det_state = detector_state(&alloc, &powers, &drop, &est_state)?;
        Ok(Self {
            drop,
            alloc,
            powers,
            sigma2,
            antennas,
            coherence,
            options,
            book,
            est_state,
            stats,
            det_state,
        })
    }

    pub fn drop(&self) -> &UserDrop {
        &self.drop
    }

    pub fn allocation(&self) -> &PilotAllocation {
        &self.alloc
    }

    pub fn powers(&self) -> &PowerAllocation {
        &self.powers
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn coherence(&self) -> usize {
        self.coherence
    }

    pub fn options(&self) -> SingleCellOptions {
        self.options
    }

    pub fn estimator_state(&self) -> &EstimatorState {
        &self.est_state
    }

    pub fn statistics(&self) -> &Arc<EstimationStatistics> {
        &self.stats
    }

    pub fn detector_state(&self) -> &DetectorState {
        &self.det_state
    }

    /// `1 − B/S`.
    pub fn prelog(&self) -> f64 {
        1.0 - self.alloc.num_pilots() as f64 / self.coherence as f64
    }

    fn bs_constants(&self, j: usize) -> BsConstants {
        let kk = self.drop.users_per_cell();
        let own_pilot: Vec<usize> = (0..kk).map(|k| self.alloc.pilot(j, k)).collect();
        let signal: Vec<f64> = (0..kk)
            .map(|k| {
                let u = j * kk + k;
                let s = self.stats.scale(j, u);
                self.powers.payload[u] * s * s
            })
            .collect();
        let contamination = (0..kk)
            .map(|k| {
                let own = j * kk + k;
                self.alloc
                    .users_on(own_pilot[k])
                    .iter()
                    .filter(|&&u| u != own)
                    .map(|&u| {
                        let s = self.stats.scale(j, u);
                        self.powers.payload[u] * s * s
                    })
                    .sum()
            })
            .collect();
        let z = match self.options.z_mode {
            InterferenceModel::Zero => 0.0,
            InterferenceModel::Statistical => {
                single_cell_interference(&self.stats, &self.powers, &self.drop, self.options.tau_mode, j)
            }
        };
        BsConstants {
            lambda: self.det_state.lambdas_at(j).to_vec(),
            noise: self.sigma2 + self.det_state.phi(j),
            single_cell_noise: self.sigma2 + z,
            own_pilot,
            signal,
            contamination,
        }
    }

    /// Per-user SINRs of BS `j` for `scheme`, for the given direction
    /// estimates `Ĥ_V,j`.
    pub fn sinrs_for_directions(&self, scheme: Scheme, j: usize, directions: &CMat) -> Result<Vec<f64>> {
        if directions.ncols() != self.alloc.num_pilots() {
            return Err(Error::DimensionMismatch("direction matrix has wrong column count".into()));
        }
        let bs = self.bs_constants(j);
        let mut out = vec![vec![0.0; self.drop.users_per_cell()]];
        let x = SplitMatrix::from_cmat(directions);
        match bs_sinrs(&x, &bs, &[scheme], &mut Workspace::default(), &mut out)
            .pop()
            .flatten()
        {
            Some(e) => Err(e),
            None => Ok(out.pop().unwrap_or_default()),
        }
    }
}

/// Monte Carlo controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSettings {
    pub trials: usize,
    pub seed: u64,
    /// Drop index, part of the per-trial random stream coordinates.
    pub drop_id: u64,
    pub sampling: Sampling,
}

impl McSettings {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            drop_id: 0,
            sampling: Sampling::Estimates,
        }
    }
}

/// Monte Carlo spectral efficiency of one scheme for one drop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeReport {
    pub scheme: Scheme,
    /// `prelog · mean log2(1 + η_jk)` at index `j K + k`.
    pub per_user_se: Vec<f64>,
    /// Sum SE of each cell.
    pub per_cell_sum_se: Vec<f64>,
    /// Mean of [`SeReport::per_cell_sum_se`] over cells.
    pub sum_se_per_cell: f64,
    /// Standard error of `sum_se_per_cell` over trials; zero for one trial.
    pub sum_se_stderr: f64,
    pub trials: usize,
    pub prelog: f64,
}

/// Per trial: for each scheme either `log2(1 + η)` of every user or the error.
type TrialOutcome = Vec<std::result::Result<Vec<f64>, Error>>;

fn run_trial(sc: &Scenario, schemes: &[Scheme], consts: &[BsConstants], settings: &McSettings, t: usize) -> TrialOutcome {
    let mut rng = substream(
        settings.seed,
        &[
            tag::TRIAL,
            settings.drop_id,
            t as u64,
            sc.antennas as u64,
            sc.alloc.beta() as u64,
            sc.drop.users_per_cell() as u64,
        ],
    );
    let cells = sc.drop.num_cells();
    let kk = sc.drop.users_per_cell();
    let mut outcome: TrialOutcome = schemes.iter().map(|_| Ok(vec![0.0; cells * kk])).collect();
    let estimated = match settings.sampling {
        Sampling::Estimates => None,
        Sampling::Channels => {
            let run = sample_channels(&sc.drop, sc.antennas, &mut rng).and_then(|h| {
                estimate_all(&h, &sc.alloc, &sc.book, &sc.powers, &sc.est_state, &mut rng)
            });
            match run {
                Ok(d) => Some(d),
                Err(e) => return schemes.iter().map(|_| Err(e.clone())).collect(),
            }
        }
    };
    let mut ws = Workspace::default();
    let mut x = SplitMatrix::default();
    let mut buf: Vec<Vec<f64>> = schemes.iter().map(|_| vec![0.0; kk]).collect();
    for j in 0..cells {
        match &estimated {
            None => x.sample(&mut rng, sc.antennas, sc.stats.dir_covs_at(j)),
            Some(d) => x.load(&d[j]),
        }
        let failures = bs_sinrs(&x, &consts[j], schemes, &mut ws, &mut buf);
        for (s, fail) in failures.into_iter().enumerate() {
            if let Ok(values) = &mut outcome[s] {
                match fail {
                    Some(e) => outcome[s] = Err(e),
                    None => {
                        for k in 0..kk {
                            values[j * kk + k] = (1.0 + buf[s][k]).log2();
                        }
                    }
                }
            }
        }
    }
    outcome
}

/// Monte Carlo estimate of the ergodic SE of each scheme for the scenario's
/// drop. Schemes share channel realizations. Results are independent of the
/// rayon thread count.
pub fn monte_carlo_se(sc: &Scenario, schemes: &[Scheme], settings: &McSettings) -> Vec<(Scheme, Result<SeReport>)> {
    if settings.trials == 0 {
        let e = Error::InvalidParameter("trials must be at least 1".into());
        return schemes.iter().map(|&s| (s, Err(e.clone()))).collect();
    }
    let consts: Vec<BsConstants> = (0..sc.drop.num_cells()).map(|j| sc.bs_constants(j)).collect();
    let trials: Vec<TrialOutcome> = (0..settings.trials)
        .into_par_iter()
        .map(|t| run_trial(sc, schemes, &consts, settings, t))
        .collect();
    schemes
        .iter()
        .enumerate()
        .map(|(s, &scheme)| (scheme, aggregate(sc, scheme, trials.iter().map(|t| &t[s]))))
        .collect()
}

fn aggregate<'a>(
    sc: &Scenario,
    scheme: Scheme,
    trials: impl Iterator<Item = &'a std::result::Result<Vec<f64>, Error>>,
) -> Result<SeReport> {
    let cells = sc.drop.num_cells();
    let kk = sc.drop.users_per_cell();
    let prelog = sc.prelog();
    let mut sums = vec![0.0; cells * kk];
    let mut per_trial = Vec::new();
    for t in trials {
        let values = t.as_ref().map_err(Clone::clone)?;
        for (acc, v) in sums.iter_mut().zip(values) {
            *acc += v;
        }
        per_trial.push(prelog * values.iter().sum::<f64>() / cells as f64);
    }
    let n = per_trial.len() as f64;
    let per_user_se: Vec<f64> = sums.iter().map(|s| prelog * s / n).collect();
    let per_cell_sum_se: Vec<f64> = per_user_se.chunks(kk).map(|c| c.iter().sum()).collect();
    let sum_se_per_cell = per_cell_sum_se.iter().sum::<f64>() / cells as f64;
    Ok(SeReport {
        scheme,
        per_user_se,
        per_cell_sum_se,
        sum_se_per_cell,
        sum_se_stderr: standard_error(&per_trial),
        trials: per_trial.len(),
        prelog,
    })
}

/// Standard error of the mean; zero for fewer than two samples.
pub fn standard_error(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}
