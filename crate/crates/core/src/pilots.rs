//! Orthogonal pilot book, reuse-pattern pilot allocation and power control.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CellLayout, UserDrop};
use crate::linalg::{CMat, C64};

/// `B` orthogonal sequences of length `B` with `v_aᴴ v_b = B δ_ab`.
#[derive(Clone, Debug)]
pub struct PilotBook {
    sequences: CMat,
}

impl PilotBook {
    pub fn len(&self) -> usize {
        self.sequences.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.ncols() == 0
    }

    /// All sequences as columns of a `B × B` matrix.
    pub fn matrix(&self) -> &CMat {
        &self.sequences
    }

    /// Entry `n` of sequence `b`.
    #[inline]
    pub fn entry(&self, b: usize, n: usize) -> C64 {
        self.sequences[(n, b)]
    }

    /// Largest deviation of the Gram matrix from `B · I`.
    pub fn gram_error(&self) -> f64 {
        let b = self.len();
        let gram = self.sequences.adjoint() * &self.sequences;
        let mut worst = 0.0_f64;
        for r in 0..b {
            for c in 0..b {
                let target = if r == c { b as f64 } else { 0.0 };
                worst = worst.max((gram[(r, c)] - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// DFT pilot book scaled to unit-modulus entries.
pub fn dft_pilot_book(b: usize) -> Result<PilotBook> {
    if b == 0 {
        return Err(Error::InvalidParameter("pilot length must be at least 1".into()));
    }
    let sequences = CMat::from_fn(b, b, |n, col| {
        // reduce the phase index before scaling to keep it exact
        let phase = ((n * col) % b) as f64 / b as f64;
        C64::from_polar(1.0, -2.0 * PI * phase)
    });
    Ok(PilotBook { sequences })
}

/// Pilot index of every user plus the reuse grouping that produced it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PilotAllocation {
    beta: usize,
    num_pilots: usize,
    users_per_cell: usize,
    cell_groups: Vec<usize>,
    index: Vec<usize>,
    users_on_pilot: Vec<Vec<usize>>,
}

impl PilotAllocation {
    /// Arbitrary allocation from explicit pilot indices (`index[l * K + k]`,
    /// zero-based). Indices within one cell must be distinct.
    pub fn from_indices(
        num_cells: usize,
        users_per_cell: usize,
        num_pilots: usize,
        index: Vec<usize>,
    ) -> Result<Self> {
        if index.len() != num_cells * users_per_cell {
            return Err(Error::DimensionMismatch(format!(
                "{} pilot indices for {} users",
                index.len(),
                num_cells * users_per_cell
            )));
        }
        if num_pilots < users_per_cell {
            return Err(Error::InvalidParameter(format!(
                "B = {num_pilots} is smaller than K = {users_per_cell}"
            )));
        }
        let mut users_on_pilot = vec![Vec::new(); num_pilots];
        for (u, &i) in index.iter().enumerate() {
            if i >= num_pilots {
                return Err(Error::InvalidParameter(format!(
                    "pilot index {i} out of range for B = {num_pilots}"
                )));
            }
            users_on_pilot[i].push(u);
        }
        for l in 0..num_cells {
            let cell = &index[l * users_per_cell..(l + 1) * users_per_cell];
            for a in 0..cell.len() {
                if cell[a + 1..].contains(&cell[a]) {
                    return Err(Error::InvalidParameter(format!(
                        "pilot {} used twice in cell {l}",
                        cell[a]
                    )));
                }
            }
        }
        let beta = num_pilots / users_per_cell;
        Ok(Self {
            beta,
            num_pilots,
            users_per_cell,
            cell_groups: (0..num_cells)
                .map(|l| index[l * users_per_cell] / users_per_cell)
                .collect(),
            index,
            users_on_pilot,
        })
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    pub fn num_pilots(&self) -> usize {
        self.num_pilots
    }

    pub fn num_cells(&self) -> usize {
        self.cell_groups.len()
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    /// Reuse group of each cell.
    pub fn cell_groups(&self) -> &[usize] {
        &self.cell_groups
    }

    /// Zero-based pilot index `i_lk`.
    pub fn pilot(&self, l: usize, k: usize) -> usize {
        self.index[l * self.users_per_cell + k]
    }

    /// Pilot of user index `u`.
    #[inline]
    pub fn pilot_of(&self, u: usize) -> usize {
        self.index[u]
    }

    pub fn indices(&self) -> &[usize] {
        &self.index
    }

    /// User indices transmitting pilot `b`.
    pub fn users_on(&self, b: usize) -> &[usize] {
        &self.users_on_pilot[b]
    }
}

/// Reuse group of a site for the standard hexagonal colorings. They are
/// proper on the planar cluster; under wrap-around β = 3 and β = 4 leave 9
/// co-group neighbor pairs, since 19 is not a multiple of either.
fn reuse_group(beta: usize, (q, s): (i32, i32)) -> Result<usize> {
    let g = match beta {
        1 => 0,
        3 => (q - s).rem_euclid(3),
        4 => q.rem_euclid(2) + 2 * s.rem_euclid(2),
        7 => (q + 5 * s).rem_euclid(7),
        other => return Err(Error::UnsupportedReuse(other)),
    };
    Ok(g as usize)
}

/// Symmetric block allocation: a cell in reuse group `g` uses pilots
/// `g K .. (g + 1) K`, user `k` taking the `k`-th of them.
pub fn allocate_pilots(layout: &CellLayout, beta: usize, k: usize) -> Result<PilotAllocation> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    let groups = (0..layout.cell_count())
        .map(|l| reuse_group(beta, layout.axial(l)))
        .collect::<Result<Vec<_>>>()?;
    let index = groups
        .iter()
        .flat_map(|&g| (0..k).map(move |m| g * k + m))
        .collect();
    let mut alloc = PilotAllocation::from_indices(layout.cell_count(), k, beta * k, index)?;
    alloc.beta = beta;
    alloc.cell_groups = groups;
    Ok(alloc)
}

/// Pilot powers `p_lk` and payload powers `τ_lk`, indexed by user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub pilot: Vec<f64>,
    pub payload: Vec<f64>,
}

impl PowerAllocation {
    pub fn uniform(num_users: usize, pilot: f64, payload: f64) -> Self {
        Self {
            pilot: vec![pilot; num_users],
            payload: vec![payload; num_users],
        }
    }

    pub fn len(&self) -> usize {
        self.pilot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pilot.is_empty()
    }
}

/// Statistical channel inversion: `p_lk = τ_lk = ρ / d_l(z_lk)`.
pub fn channel_inversion_power(drop: &UserDrop, rho_target: f64) -> Result<PowerAllocation> {
    if !(rho_target >= 0.0 && rho_target.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "target received power must be non-negative, got {rho_target}"
        )));
    }
    let mut p = Vec::with_capacity(drop.num_users());
    for u in 0..drop.num_users() {
        let d = drop.serving_gain(u);
        if !(d > 0.0) {
            return Err(Error::DegenerateFading {
                cell: drop.cell_of(u),
                user: u % drop.users_per_cell(),
            });
        }
        p.push(rho_target / d);
    }
    Ok(PowerAllocation {
        pilot: p.clone(),
        payload: p,
    })
}

/// `ρ` from the per-antenna SNR target in dB and the noise power.
pub fn rho_from_snr_db(snr_db: f64, sigma2: f64) -> f64 {
    sigma2 * 10f64.powf(snr_db / 10.0)
}
