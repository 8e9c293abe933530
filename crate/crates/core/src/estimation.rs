//! Channel realizations and MMSE channel estimation under pilot contamination.
//!
//! With an orthogonal pilot book the covariance of the vectorised pilot
//! observation at BS `j` is diagonal in the pilot basis:
//! `v_bᴴ Ψ_j⁻¹ = α_jb v_bᴴ` with
//! `α_jb = 1 / (B Σ_{i_lm = b} p_lm d_j(z_lm) + σ²)`. The estimated direction
//! for pilot `b` is therefore `α_jb Y_j v_b*`, and every user on pilot `b` has
//! an estimate that is a real multiple of that single direction.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::UserDrop;
use crate::linalg::{complex_normal, CMat, CVec, C64};
use crate::pilots::{PilotAllocation, PilotBook, PowerAllocation};

const NEGATIVE_VARIANCE_TOL: f64 = 1e-12;

/// One small-scale fading realization: `h_jlk ~ CN(0, d_j(z_lk) I_M)`.
///
/// `per_bs[j]` is `M × (L K)` with column `u` holding the channel of user `u`.
#[derive(Clone, Debug)]
pub struct ChannelTensor {
    per_bs: Vec<CMat>,
}

impl ChannelTensor {
    pub fn antennas(&self) -> usize {
        self.per_bs.first().map_or(0, |m| m.nrows())
    }

    pub fn num_bs(&self) -> usize {
        self.per_bs.len()
    }

    /// Channels of all users towards BS `j`.
    pub fn at_bs(&self, j: usize) -> &CMat {
        &self.per_bs[j]
    }

    /// `h_{j,u}`.
    pub fn channel(&self, j: usize, u: usize) -> CVec {
        self.per_bs[j].column(u).into_owned()
    }
}

/// Draw independent Rayleigh channels for every (BS, user) pair.
pub fn sample_channels<R: Rng + ?Sized>(drop: &UserDrop, m: usize, rng: &mut R) -> Result<ChannelTensor> {
    if m == 0 {
        return Err(Error::InvalidParameter("M must be at least 1".into()));
    }
    let users = drop.num_users();
    let per_bs = (0..drop.num_cells())
        .map(|j| {
            let gains = drop.gains_to(j);
            let mut h = CMat::zeros(m, users);
            for u in 0..users {
                for a in 0..m {
                    h[(a, u)] = complex_normal(rng, gains[u]);
                }
            }
            h
        })
        .collect();
    Ok(ChannelTensor { per_bs })
}

fn check_network(alloc: &PilotAllocation, powers: &PowerAllocation, drop: &UserDrop) -> Result<()> {
    if alloc.num_cells() != drop.num_cells() || alloc.users_per_cell() != drop.users_per_cell() {
        return Err(Error::DimensionMismatch(format!(
            "allocation covers {}x{} users, drop has {}x{}",
            alloc.num_cells(),
            alloc.users_per_cell(),
            drop.num_cells(),
            drop.users_per_cell()
        )));
    }
    if powers.pilot.len() != drop.num_users() || powers.payload.len() != drop.num_users() {
        return Err(Error::DimensionMismatch(format!(
            "power allocation has {} / {} entries for {} users",
            powers.pilot.len(),
            powers.payload.len(),
            drop.num_users()
        )));
    }
    Ok(())
}

/// Received pilot block `Y_j = Σ √p_lk h_jlk v_{i_lk}ᵀ + N_j` (`M × B`).
pub fn pilot_observation<R: Rng + ?Sized>(
    channels: &ChannelTensor,
    alloc: &PilotAllocation,
    book: &PilotBook,
    powers: &PowerAllocation,
    sigma2: f64,
    j: usize,
    rng: &mut R,
) -> Result<CMat> {
    let b = alloc.num_pilots();
    if book.len() != b {
        return Err(Error::DimensionMismatch(format!(
            "pilot book has {} sequences, allocation uses {b}",
            book.len()
        )));
    }
    let h = channels.at_bs(j);
    if h.ncols() != alloc.indices().len() || powers.pilot.len() != h.ncols() {
        return Err(Error::DimensionMismatch(
            "channel tensor, allocation and powers disagree on the user count".into(),
        ));
    }
    let m = h.nrows();
    let mut y = CMat::zeros(m, b);
    for u in 0..h.ncols() {
        let amp = powers.pilot[u].sqrt();
        let pilot = alloc.pilot_of(u);
        let hu = h.column(u);
        for n in 0..b {
            let coef = book.entry(pilot, n) * amp;
            y.column_mut(n).axpy(coef, &hu, C64::new(1.0, 0.0));
        }
    }
    for n in 0..b {
        for a in 0..m {
            y[(a, n)] += complex_normal(rng, sigma2);
        }
    }
    Ok(y)
}

/// The per-BS, per-pilot coefficients `α_jb`.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState {
    num_pilots: usize,
    alpha: Vec<f64>,
    sigma2: f64,
}

impl EstimatorState {
    pub fn num_pilots(&self) -> usize {
        self.num_pilots
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `α_jb`.
    #[inline]
    pub fn alpha(&self, j: usize, b: usize) -> f64 {
        self.alpha[j * self.num_pilots + b]
    }

    pub fn alphas_at(&self, j: usize) -> &[f64] {
        &self.alpha[j * self.num_pilots..(j + 1) * self.num_pilots]
    }
}

/// `α_jb = 1 / (B Σ_{i_lm = b} p_lm d_j(z_lm) + σ²)` for every BS and pilot.
pub fn estimator_coefficients(
    alloc: &PilotAllocation,
    powers: &PowerAllocation,
    drop: &UserDrop,
    sigma2: f64,
) -> Result<EstimatorState> {
    check_network(alloc, powers, drop)?;
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise power must be positive, got {sigma2}"
        )));
    }
    let b = alloc.num_pilots();
    let mut alpha = Vec::with_capacity(drop.num_cells() * b);
    for j in 0..drop.num_cells() {
        for pilot in 0..b {
            let load: f64 = alloc
                .users_on(pilot)
                .iter()
                .map(|&u| powers.pilot[u] * drop.gain(j, u))
                .sum();
            alpha.push(1.0 / (b as f64 * load + sigma2));
        }
    }
    Ok(EstimatorState {
        num_pilots: b,
        alpha,
        sigma2,
    })
}

/// `Ĥ_V,j`: column `b` is `α_jb Y_j v_b*`.
pub fn estimate_directions(y: &CMat, state: &EstimatorState, j: usize, book: &PilotBook) -> Result<CMat> {
    let b = state.num_pilots();
    if y.ncols() != b || book.len() != b {
        return Err(Error::DimensionMismatch(format!(
            "observation has {} columns, book {} sequences, estimator {b} pilots",
            y.ncols(),
            book.len()
        )));
    }
    let conj_book = book.matrix().map(|z| z.conj());
    let mut dirs = y * conj_book;
    for (pilot, mut col) in dirs.column_iter_mut().enumerate() {
        col *= C64::new(state.alpha(j, pilot), 0.0);
    }
    Ok(dirs)
}

/// `Ĥ_V,j = Y_j (Ψ_j*)⁻¹ [v_1*, …, v_B*]` with `Ψ_j` assembled and inverted
/// explicitly. Reference path for checking [`estimate_directions`].
pub fn estimate_directions_explicit(
    y: &CMat,
    alloc: &PilotAllocation,
    powers: &PowerAllocation,
    drop: &UserDrop,
    sigma2: f64,
    j: usize,
    book: &PilotBook,
) -> Result<CMat> {
    check_network(alloc, powers, drop)?;
    let b = alloc.num_pilots();
    if y.ncols() != b || book.len() != b {
        return Err(Error::DimensionMismatch("observation / pilot book size".into()));
    }
    let mut psi = CMat::from_diagonal_element(b, b, C64::new(sigma2, 0.0));
    for u in 0..drop.num_users() {
        let v = book.matrix().column(alloc.pilot_of(u));
        let w = powers.pilot[u] * drop.gain(j, u);
        psi += (&v * v.adjoint()) * C64::new(w, 0.0);
    }
    let psi_conj_inv = psi
        .map(|z| z.conj())
        .try_inverse()
        .ok_or(Error::Singular { condition: f64::INFINITY })?;
    let conj_book = book.matrix().map(|z| z.conj());
    Ok(y * psi_conj_inv * conj_book)
}

/// Large-scale quantities of an estimate set; identical for every channel
/// realization of the same scenario.
///
/// Per (BS `j`, user `u`) entries are stored at `j * (L K) + u`.
#[derive(Clone, Debug)]
pub struct EstimationStatistics {
    num_cells: usize,
    users_per_cell: usize,
    num_pilots: usize,
    pilot_index: Vec<usize>,
    /// `√p_u d_j(z_u)`: the amplitude mapping the direction to the estimate.
    scale: Vec<f64>,
    err_cov: Vec<f64>,
    est_cov: Vec<f64>,
    dir_cov: Vec<f64>,
}

impl EstimationStatistics {
    pub fn new(
        alloc: &PilotAllocation,
        powers: &PowerAllocation,
        drop: &UserDrop,
        state: &EstimatorState,
    ) -> Result<Self> {
        check_network(alloc, powers, drop)?;
        let users = drop.num_users();
        let b = alloc.num_pilots();
        if state.num_pilots() != b {
            return Err(Error::DimensionMismatch("estimator and allocation pilot counts".into()));
        }
        let cells = drop.num_cells();
        let mut scale = Vec::with_capacity(cells * users);
        let mut err_cov = Vec::with_capacity(cells * users);
        let mut est_cov = Vec::with_capacity(cells * users);
        for j in 0..cells {
            for u in 0..users {
                let d = drop.gain(j, u);
                let p = powers.pilot[u];
                let alpha = state.alpha(j, alloc.pilot_of(u));
                let c = d * (1.0 - p * d * alpha * b as f64);
                if c < -NEGATIVE_VARIANCE_TOL * d.max(1.0) {
                    return Err(Error::NegativeVariance {
                        bs: j,
                        cell: drop.cell_of(u),
                        user: u % drop.users_per_cell(),
                        value: c,
                    });
                }
                scale.push(p.sqrt() * d);
                err_cov.push(c);
                est_cov.push(d - c);
            }
        }
        let dir_cov = (0..cells)
            .flat_map(|j| (0..b).map(move |pilot| (j, pilot)))
            .map(|(j, pilot)| state.alpha(j, pilot) * b as f64)
            .collect();
        Ok(Self {
            num_cells: cells,
            users_per_cell: drop.users_per_cell(),
            num_pilots: b,
            pilot_index: alloc.indices().to_vec(),
            scale,
            err_cov,
            est_cov,
            dir_cov,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    pub fn num_users(&self) -> usize {
        self.num_cells * self.users_per_cell
    }

    pub fn num_pilots(&self) -> usize {
        self.num_pilots
    }

    #[inline]
    pub fn pilot_of(&self, u: usize) -> usize {
        self.pilot_index[u]
    }

    /// `√p_u d_j(z_u)`.
    #[inline]
    pub fn scale(&self, j: usize, u: usize) -> f64 {
        self.scale[j * self.num_users() + u]
    }

    /// `c_ju` with `C_ju = c_ju I_M`.
    #[inline]
    pub fn err_cov(&self, j: usize, u: usize) -> f64 {
        self.err_cov[j * self.num_users() + u]
    }

    /// `φ_ju` with `Φ_ju = φ_ju I_M`.
    #[inline]
    pub fn est_cov(&self, j: usize, u: usize) -> f64 {
        self.est_cov[j * self.num_users() + u]
    }

    /// `α_jb B`, the per-entry variance of the estimated direction for pilot `b`.
    #[inline]
    pub fn dir_cov(&self, j: usize, b: usize) -> f64 {
        self.dir_cov[j * self.num_pilots + b]
    }

    pub fn dir_covs_at(&self, j: usize) -> &[f64] {
        &self.dir_cov[j * self.num_pilots..(j + 1) * self.num_pilots]
    }
}

/// Estimated directions at every BS together with the large-scale statistics.
#[derive(Clone, Debug)]
pub struct EstimateSet {
    stats: Arc<EstimationStatistics>,
    directions: Vec<CMat>,
}

impl EstimateSet {
    pub fn from_parts(stats: Arc<EstimationStatistics>, directions: Vec<CMat>) -> Result<Self> {
        if directions.len() != stats.num_cells() {
            return Err(Error::DimensionMismatch(format!(
                "{} direction matrices for {} BSs",
                directions.len(),
                stats.num_cells()
            )));
        }
        let m = directions.first().map_or(0, |d| d.nrows());
        if directions
            .iter()
            .any(|d| d.ncols() != stats.num_pilots() || d.nrows() != m)
        {
            return Err(Error::DimensionMismatch("direction matrix shape".into()));
        }
        Ok(Self { stats, directions })
    }

    pub fn stats(&self) -> &EstimationStatistics {
        &self.stats
    }

    pub fn shared_stats(&self) -> Arc<EstimationStatistics> {
        Arc::clone(&self.stats)
    }

    pub fn antennas(&self) -> usize {
        self.directions[0].nrows()
    }

    /// `Ĥ_V,j`.
    pub fn directions(&self, j: usize) -> &CMat {
        &self.directions[j]
    }

    /// `ĥ_{j,u} = √p_u d_j(z_u) Ĥ_V,j e_{i_u}`.
    pub fn estimate(&self, j: usize, u: usize) -> CVec {
        let col = self.directions[j].column(self.stats.pilot_of(u));
        col * C64::new(self.stats.scale(j, u), 0.0)
    }

    /// `ĥ_jlk` by cell and user.
    pub fn estimate_of(&self, j: usize, l: usize, k: usize) -> CVec {
        self.estimate(j, l * self.stats.users_per_cell() + k)
    }

    pub fn err_cov(&self, j: usize, u: usize) -> f64 {
        self.stats.err_cov(j, u)
    }

    pub fn est_cov(&self, j: usize, u: usize) -> f64 {
        self.stats.est_cov(j, u)
    }

    pub fn dir_cov(&self, j: usize, b: usize) -> f64 {
        self.stats.dir_cov(j, b)
    }
}

/// Assemble the estimate set from per-BS directions.
pub fn build_estimate_set(
    directions: Vec<CMat>,
    alloc: &PilotAllocation,
    powers: &PowerAllocation,
    drop: &UserDrop,
    state: &EstimatorState,
) -> Result<EstimateSet> {
    let stats = EstimationStatistics::new(alloc, powers, drop, state)?;
    EstimateSet::from_parts(Arc::new(stats), directions)
}

/// Full estimation chain for one realization: pilot observations at every BS
/// followed by direction estimation.
pub fn estimate_all<R: Rng + ?Sized>(
    channels: &ChannelTensor,
    alloc: &PilotAllocation,
    book: &PilotBook,
    powers: &PowerAllocation,
    state: &EstimatorState,
    rng: &mut R,
) -> Result<Vec<CMat>> {
    (0..channels.num_bs())
        .map(|j| {
            let y = pilot_observation(channels, alloc, book, powers, state.sigma2(), j, rng)?;
            estimate_directions(&y, state, j, book)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::relative_difference_mat;
    use crate::pilots::dft_pilot_book;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_user_two_pilots() -> (UserDrop, PilotAllocation, PowerAllocation) {
        let drop = UserDrop::from_fading(1, 1, vec![1.0]).unwrap();
        let alloc = PilotAllocation::from_indices(1, 1, 2, vec![0]).unwrap();
        (drop, alloc, PowerAllocation::uniform(1, 1.0, 1.0))
    }

    #[test]
    fn alpha_closed_form_example() {
        let (drop, alloc, powers) = one_user_two_pilots();
        let s = estimator_coefficients(&alloc, &powers, &drop, 1.0).unwrap();
        assert!((s.alpha(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.alpha(0, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_matches_psi_inverse() {
        let (drop, alloc, powers) = one_user_two_pilots();
        let book = dft_pilot_book(2).unwrap();
        let mut psi = CMat::identity(2, 2);
        let v = book.matrix().column(0);
        psi += &v * v.adjoint();
        let inv = psi.try_inverse().unwrap();
        let s = estimator_coefficients(&alloc, &powers, &drop, 1.0).unwrap();
        for b in 0..2 {
            let vb = book.matrix().column(b);
            let lhs = vb.adjoint() * &inv;
            let rhs = vb.adjoint() * C64::new(s.alpha(0, b), 0.0);
            assert!((lhs - rhs).norm() < 1e-14);
        }
    }

    #[test]
    fn alpha_empty_and_monotone() {
        let drop = UserDrop::from_fading(1, 1, vec![1.0]).unwrap();
        let alloc = PilotAllocation::from_indices(1, 1, 3, vec![2]).unwrap();
        let p1 = PowerAllocation::uniform(1, 1.0, 1.0);
        let p2 = PowerAllocation::uniform(1, 2.0, 1.0);
        let a = estimator_coefficients(&alloc, &p1, &drop, 0.5).unwrap();
        let b = estimator_coefficients(&alloc, &p2, &drop, 0.5).unwrap();
        assert_eq!(a.alpha(0, 0), 2.0);
        assert_eq!(a.alpha(0, 1), 2.0);
        assert!(b.alpha(0, 2) < a.alpha(0, 2));
        assert!(a.alpha(0, 2) <= 1.0 / 0.5);
    }

    #[test]
    fn covariance_scalars_example() {
        let (drop, alloc, powers) = one_user_two_pilots();
        let s = estimator_coefficients(&alloc, &powers, &drop, 1.0).unwrap();
        let stats = EstimationStatistics::new(&alloc, &powers, &drop, &s).unwrap();
        assert!((stats.err_cov(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((stats.est_cov(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(stats.err_cov(0, 0) + stats.est_cov(0, 0), 1.0);
        assert!((stats.dir_cov(0, 0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn vanishing_noise_gives_perfect_estimation() {
        let (drop, alloc, powers) = one_user_two_pilots();
        let s = estimator_coefficients(&alloc, &powers, &drop, 1e-12).unwrap();
        let stats = EstimationStatistics::new(&alloc, &powers, &drop, &s).unwrap();
        assert!(stats.err_cov(0, 0) < 1e-11);
    }

    #[test]
    fn single_user_noiseless_estimate_is_collinear_with_channel() {
        let (drop, alloc, powers) = one_user_two_pilots();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let book = dft_pilot_book(2).unwrap();
        let ch = sample_channels(&drop, 6, &mut rng).unwrap();
        let tiny = 1e-300;
        let y = pilot_observation(&ch, &alloc, &book, &powers, tiny, 0, &mut rng).unwrap();
        let s = estimator_coefficients(&alloc, &powers, &drop, tiny).unwrap();
        let dirs = estimate_directions(&y, &s, 0, &book).unwrap();
        let h = ch.channel(0, 0);
        let expect = &h * C64::new(s.alpha(0, 0) * 2.0, 0.0);
        assert!((dirs.column(0) - expect).norm() < 1e-12 * h.norm());
    }

    #[test]
    fn noiseless_observation_is_rank_one() {
        let (drop, alloc, powers) = one_user_two_pilots();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let book = dft_pilot_book(2).unwrap();
        let ch = sample_channels(&drop, 4, &mut rng).unwrap();
        let y = pilot_observation(&ch, &alloc, &book, &powers, 0.0, 0, &mut rng).unwrap();
        let expect = ch.channel(0, 0) * book.matrix().column(0).transpose();
        assert!(relative_difference_mat(&y, &expect) < 1e-14);
    }

    #[test]
    fn despreading_isolates_pilot_sum() {
        // two users on pilot 0, one on pilot 1, B = 3
        let drop = UserDrop::from_fading(3, 1, vec![1.0, 0.5, 0.2, 0.3, 1.0, 0.4, 0.1, 0.2, 1.0]).unwrap();
        let alloc = PilotAllocation::from_indices(3, 1, 3, vec![0, 0, 1]).unwrap();
        let powers = PowerAllocation::uniform(3, 2.0, 1.0);
        let book = dft_pilot_book(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let ch = sample_channels(&drop, 5, &mut rng).unwrap();
        let y = pilot_observation(&ch, &alloc, &book, &powers, 0.0, 0, &mut rng).unwrap();
        let v0c = book.matrix().column(0).map(|z| z.conj());
        let got = (&y * v0c) / C64::new(3.0, 0.0);
        let expect = (ch.channel(0, 0) + ch.channel(0, 1)) * C64::new(2f64.sqrt(), 0.0);
        assert!((got - expect).norm() < 1e-12);
    }

    #[test]
    fn shortcut_matches_explicit_inverse() {
        let drop = UserDrop::from_fading(2, 2, (0..8).map(|i| 0.2 + 0.1 * i as f64).collect()).unwrap();
        let alloc = PilotAllocation::from_indices(2, 2, 4, vec![0, 1, 1, 3]).unwrap();
        let powers = PowerAllocation {
            pilot: vec![1.0, 2.0, 0.5, 1.5],
            payload: vec![1.0; 4],
        };
        let book = dft_pilot_book(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = sample_channels(&drop, 6, &mut rng).unwrap();
        let s = estimator_coefficients(&alloc, &powers, &drop, 0.7).unwrap();
        for j in 0..2 {
            let y = pilot_observation(&ch, &alloc, &book, &powers, 0.7, j, &mut rng).unwrap();
            let fast = estimate_directions(&y, &s, j, &book).unwrap();
            let slow = estimate_directions_explicit(&y, &alloc, &powers, &drop, 0.7, j, &book).unwrap();
            assert!(relative_difference_mat(&fast, &slow) < 1e-8);
        }
        // pilot 2 is unused: its direction is Y v* / σ²
        let y = pilot_observation(&ch, &alloc, &book, &powers, 0.7, 0, &mut rng).unwrap();
        let dirs = estimate_directions(&y, &s, 0, &book).unwrap();
        let v2c = book.matrix().column(2).map(|z| z.conj());
        let expect = (&y * v2c) / C64::new(0.7, 0.0);
        assert!((dirs.column(2) - expect).norm() < 1e-12 * dirs.column(2).norm());
    }

    #[test]
    fn shared_pilot_estimates_are_parallel() {
        let drop = UserDrop::from_fading(2, 1, vec![1.0, 0.3, 0.2, 0.9]).unwrap();
        let alloc = PilotAllocation::from_indices(2, 1, 1, vec![0, 0]).unwrap();
        let powers = PowerAllocation::uniform(2, 1.0, 1.0);
        let book = dft_pilot_book(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ch = sample_channels(&drop, 8, &mut rng).unwrap();
        let s = estimator_coefficients(&alloc, &powers, &drop, 1.0).unwrap();
        let dirs = estimate_all(&ch, &alloc, &book, &powers, &s, &mut rng).unwrap();
        let est = build_estimate_set(dirs, &alloc, &powers, &drop, &s).unwrap();
        for j in 0..2 {
            let a = est.estimate(j, 0) * C64::new(est.stats().scale(j, 1), 0.0);
            let b = est.estimate(j, 1) * C64::new(est.stats().scale(j, 0), 0.0);
            assert!((a - b).norm() <= 1e-15 * est.estimate(j, 0).norm());
        }
    }

    #[test]
    fn channel_second_moment() {
        let drop = UserDrop::from_fading(1, 1, vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = sample_channels(&drop, 10_000, &mut rng).unwrap();
        let p = ch.channel(0, 0).norm_squared() / 10_000.0;
        assert!((p - 1.0).abs() < 0.02, "{p}");
        let again = sample_channels(&drop, 10_000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(ch.at_bs(0), again.at_bs(0));
    }

    #[test]
    fn negative_variance_is_rejected() {
        let (drop, alloc, powers) = one_user_two_pilots();
        let mut s = estimator_coefficients(&alloc, &powers, &drop, 1.0).unwrap();
        s.alpha[0] = 10.0;
        assert!(matches!(
            EstimationStatistics::new(&alloc, &powers, &drop, &s),
            Err(Error::NegativeVariance { .. })
        ));
    }
}
