//! Linear uplink detectors built from an [`EstimateSet`].

use std::fmt;
use std::str::FromStr;

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{EstimateSet, EstimationStatistics, EstimatorState};
use crate::geometry::UserDrop;
use crate::linalg::{hpd_cholesky, scaled_identity, CMat, CVec, C64};
use crate::pilots::{PilotAllocation, PowerAllocation};

/// Condition-number bound above which a Gram matrix is treated as singular.
pub const ZF_CONDITION_LIMIT: f64 = 1e12;

/// Detection scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "M-MMSE")]
    MultiCellMmse,
    #[serde(rename = "S-MMSE")]
    SingleCellMmse,
    #[serde(rename = "M-ZF")]
    MultiCellZf,
    #[serde(rename = "MF")]
    MatchedFilter,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::MultiCellMmse,
        Scheme::SingleCellMmse,
        Scheme::MultiCellZf,
        Scheme::MatchedFilter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::MultiCellMmse => "M-MMSE",
            Scheme::SingleCellMmse => "S-MMSE",
            Scheme::MultiCellZf => "M-ZF",
            Scheme::MatchedFilter => "MF",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "mmmse" => Ok(Scheme::MultiCellMmse),
            "smmse" => Ok(Scheme::SingleCellMmse),
            "mzf" => Ok(Scheme::MultiCellZf),
            "mf" => Ok(Scheme::MatchedFilter),
            _ => Err(Error::InvalidParameter(format!("unknown scheme '{s}'"))),
        }
    }
}

/// How S-MMSE accounts for inter-cell interference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceModel {
    /// `Z_j = 0`.
    Zero,
    /// `Z_j` is the expected error-plus-inter-cell covariance.
    #[default]
    Statistical,
}

/// Which payload power weights the inter-cell part of the statistical `Z_j`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfererPower {
    /// The interfering user's own power `τ_lm`.
    #[default]
    Interferer,
    /// The same-index user of the serving cell, `τ_jm`.
    Serving,
}

/// Options for the S-MMSE baseline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleCellOptions {
    pub z_mode: InterferenceModel,
    pub tau_mode: InterfererPower,
}

/// Diagonal `Λ_j` and scalar `φ_j` of the multi-cell MMSE detector.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorState {
    num_pilots: usize,
    lambda: Vec<f64>,
    phi: Vec<f64>,
}

impl DetectorState {
    pub fn num_pilots(&self) -> usize {
        self.num_pilots
    }

    /// `λ_jb = Σ_{i_lk = b} τ_lk p_lk d_j²(z_lk)`.
    #[inline]
    pub fn lambda(&self, j: usize, b: usize) -> f64 {
        self.lambda[j * self.num_pilots + b]
    }

    pub fn lambdas_at(&self, j: usize) -> &[f64] {
        &self.lambda[j * self.num_pilots..(j + 1) * self.num_pilots]
    }

    /// `φ_j = Σ_{l,k} τ_lk c_jlk`.
    #[inline]
    pub fn phi(&self, j: usize) -> f64 {
        self.phi[j]
    }
}

pub fn detector_state(
    alloc: &PilotAllocation,
    powers: &PowerAllocation,
    drop: &UserDrop,
    est_state: &EstimatorState,
) -> Result<DetectorState> {
    let b = alloc.num_pilots();
    if est_state.num_pilots() != b || powers.len() != drop.num_users() {
        return Err(Error::DimensionMismatch("detector state inputs".into()));
    }
    let cells = drop.num_cells();
    let mut lambda = vec![0.0; cells * b];
    let mut phi = vec![0.0; cells];
    for j in 0..cells {
        for u in 0..drop.num_users() {
            let d = drop.gain(j, u);
            let (p, tau) = (powers.pilot[u], powers.payload[u]);
            let pilot = alloc.pilot_of(u);
            lambda[j * b + pilot] += tau * p * d * d;
            phi[j] += tau * d * (1.0 - p * d * est_state.alpha(j, pilot) * b as f64);
        }
    }
    Ok(DetectorState {
        num_pilots: b,
        lambda,
        phi,
    })
}

fn own_user(est: &EstimateSet, j: usize, k: usize) -> usize {
    j * est.stats().users_per_cell() + k
}

/// `Ĥ_V,j Λ_j Ĥ_V,jᴴ + (σ² + φ_j) I_M`.
pub fn m_mmse_matrix(est: &EstimateSet, state: &DetectorState, sigma2: f64, j: usize) -> CMat {
    let h = est.directions(j);
    let weighted = CMat::from_fn(h.nrows(), h.ncols(), |r, c| h[(r, c)] * state.lambda(j, c));
    let mut a = weighted * h.adjoint();
    a += scaled_identity(h.nrows(), sigma2 + state.phi(j));
    a
}

fn factor(a: CMat) -> Result<Cholesky<C64, nalgebra::Dyn>> {
    hpd_cholesky(a)
}

/// Multi-cell MMSE detector `(Ĥ_V,j Λ_j Ĥ_V,jᴴ + (σ² + φ_j) I)⁻¹ ĥ_jjk`.
pub fn m_mmse(est: &EstimateSet, state: &DetectorState, sigma2: f64, j: usize, k: usize) -> Result<CVec> {
    if !(sigma2 + state.phi(j) > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let chol = factor(m_mmse_matrix(est, state, sigma2, j))?;
    Ok(chol.solve(&est.estimate(j, own_user(est, j, k))))
}

/// The same detector from its defining sum over every user of the network,
/// `(Σ_{l,m} τ_lm (ĥ_jlm ĥ_jlmᴴ + C_jlm) + σ² I)⁻¹ ĥ_jjk`. Reference path.
pub fn m_mmse_full_sum(
    est: &EstimateSet,
    powers: &PowerAllocation,
    sigma2: f64,
    j: usize,
    k: usize,
) -> Result<CVec> {
    let m = est.antennas();
    let mut a = scaled_identity(m, sigma2);
    for u in 0..est.stats().num_users() {
        let h = est.estimate(j, u);
        let tau = C64::new(powers.payload[u], 0.0);
        a += (&h * h.adjoint()) * tau;
        a += scaled_identity(m, powers.payload[u] * est.err_cov(j, u));
    }
    let chol = factor(a)?;
    Ok(chol.solve(&est.estimate(j, own_user(est, j, k))))
}

/// Scalar `Z_j / I_M` of the statistical S-MMSE variant.
pub fn single_cell_interference(
    stats: &EstimationStatistics,
    powers: &PowerAllocation,
    drop: &UserDrop,
    tau_mode: InterfererPower,
    j: usize,
) -> f64 {
    let kk = drop.users_per_cell();
    let own: f64 = (0..kk)
        .map(|m| {
            let u = j * kk + m;
            powers.payload[u] * stats.err_cov(j, u)
        })
        .sum();
    let other: f64 = (0..drop.num_cells())
        .filter(|&l| l != j)
        .flat_map(|l| (0..kk).map(move |m| (l, m)))
        .map(|(l, m)| {
            let u = l * kk + m;
            let tau = match tau_mode {
                InterfererPower::Interferer => powers.payload[u],
                InterfererPower::Serving => powers.payload[j * kk + m],
            };
            tau * drop.gain(j, u)
        })
        .sum();
    own + other
}

/// `Σ_m τ_jm ĥ_jjm ĥ_jjmᴴ + Z_j + σ² I`.
pub fn s_mmse_matrix(
    est: &EstimateSet,
    powers: &PowerAllocation,
    drop: &UserDrop,
    sigma2: f64,
    options: SingleCellOptions,
    j: usize,
) -> CMat {
    let kk = drop.users_per_cell();
    let z = match options.z_mode {
        InterferenceModel::Zero => 0.0,
        InterferenceModel::Statistical => {
            single_cell_interference(est.stats(), powers, drop, options.tau_mode, j)
        }
    };
    let mut a = scaled_identity(est.antennas(), sigma2 + z);
    for m in 0..kk {
        let u = j * kk + m;
        let h = est.estimate(j, u);
        a += (&h * h.adjoint()) * C64::new(powers.payload[u], 0.0);
    }
    a
}

/// Single-cell MMSE detector.
pub fn s_mmse(
    est: &EstimateSet,
    powers: &PowerAllocation,
    drop: &UserDrop,
    sigma2: f64,
    options: SingleCellOptions,
    j: usize,
    k: usize,
) -> Result<CVec> {
    let chol = factor(s_mmse_matrix(est, powers, drop, sigma2, options, j))?;
    Ok(chol.solve(&est.estimate(j, own_user(est, j, k))))
}

/// Cholesky of `Ĥ_V,jᴴ Ĥ_V,j` with the rank checks of the multi-cell ZF
/// detector.
fn zf_factor(est: &EstimateSet, j: usize) -> Result<Cholesky<C64, nalgebra::Dyn>> {
    let h = est.directions(j);
    if h.nrows() <= h.ncols() {
        return Err(Error::RankDeficient(format!(
            "M-ZF needs M > B (M = {}, B = {})",
            h.nrows(),
            h.ncols()
        )));
    }
    let chol = factor(h.adjoint() * h)
        .map_err(|_| Error::RankDeficient("direction Gram matrix is singular".into()))?;
    let diag: Vec<f64> = (0..h.ncols()).map(|i| chol.l_dirty()[(i, i)].re).collect();
    let max = diag.iter().copied().fold(0.0_f64, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let cond = (max / min).powi(2);
    if !(cond <= ZF_CONDITION_LIMIT) {
        return Err(Error::RankDeficient(format!(
            "direction Gram matrix condition estimate {cond:e}"
        )));
    }
    Ok(chol)
}

/// Multi-cell ZF `Ĥ_V,j (Ĥ_V,jᴴ Ĥ_V,j)⁻¹ e_{i_jk}`.
pub fn m_zf(est: &EstimateSet, j: usize, k: usize) -> Result<CVec> {
    let chol = zf_factor(est, j)?;
    let b = est.stats().num_pilots();
    let mut e = CVec::zeros(b);
    e[est.stats().pilot_of(own_user(est, j, k))] = C64::new(1.0, 0.0);
    Ok(est.directions(j) * chol.solve(&e))
}

/// Matched filter `ĥ_jjk`.
pub fn mf(est: &EstimateSet, j: usize, k: usize) -> CVec {
    est.estimate(j, own_user(est, j, k))
}

/// Combining vectors of one scheme for every served user, `vectors[j K + k]`.
#[derive(Clone, Debug)]
pub struct DetectorBank {
    pub scheme: Scheme,
    pub users_per_cell: usize,
    pub vectors: Vec<CVec>,
}

impl DetectorBank {
    pub fn vector(&self, j: usize, k: usize) -> &CVec {
        &self.vectors[j * self.users_per_cell + k]
    }
}

/// Build the detectors of `scheme` for every BS, sharing one factorization
/// per BS across its users.
pub fn build_bank(
    scheme: Scheme,
    est: &EstimateSet,
    state: &DetectorState,
    powers: &PowerAllocation,
    drop: &UserDrop,
    sigma2: f64,
    options: SingleCellOptions,
) -> Result<DetectorBank> {
    let kk = est.stats().users_per_cell();
    let mut vectors = Vec::with_capacity(est.stats().num_users());
    for j in 0..est.stats().num_cells() {
        match scheme {
            Scheme::MatchedFilter => vectors.extend((0..kk).map(|k| mf(est, j, k))),
            Scheme::MultiCellMmse | Scheme::SingleCellMmse => {
                let a = if scheme == Scheme::MultiCellMmse {
                    m_mmse_matrix(est, state, sigma2, j)
                } else {
                    s_mmse_matrix(est, powers, drop, sigma2, options, j)
                };
                let chol = factor(a)?;
                vectors.extend((0..kk).map(|k| chol.solve(&est.estimate(j, own_user(est, j, k)))));
            }
            Scheme::MultiCellZf => {
                let chol = zf_factor(est, j)?;
                let dirs = est.directions(j);
                for k in 0..kk {
                    let mut e = CVec::zeros(dirs.ncols());
                    e[est.stats().pilot_of(own_user(est, j, k))] = C64::new(1.0, 0.0);
                    vectors.push(dirs * chol.solve(&e));
                }
            }
        }
    }
    Ok(DetectorBank {
        scheme,
        users_per_cell: kk,
        vectors,
    })
}
