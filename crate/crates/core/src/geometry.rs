//! Hexagonal 19-cell network with wrap-around, user drops and large-scale
//! fading.
//!
//! Cells are pointy-top hexagons of circumradius `r`. Base stations sit on the
//! hexagonal lattice spanned by `a1 = (√3 r, 0)` and `a2 = (√3 r / 2, 3 r / 2)`,
//! so adjacent sites are `√3 r` apart. The 19 cells are the lattice points with
//! axial coordinates `(q, s)` satisfying `max(|q|, |s|, |q + s|) ≤ 2`.
//!
//! The cluster tiles the plane under translations by the axial vector `(3, 2)`
//! and its five 60° rotations; those six translations plus the identity are
//! the wrap-around offsets. Distances are always measured to the nearest image.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use rand::SeedableRng;

use crate::error::{Error, Result};

/// Number of cells in the wrap-around cluster.
pub const CELL_COUNT: usize = 19;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Rotate counter-clockwise about the origin by `k · 60°`.
    pub fn rotate_sixth(self, k: i32) -> Point {
        let theta = f64::from(k.rem_euclid(6)) * std::f64::consts::FRAC_PI_3;
        let (s, c) = theta.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// Axial lattice coordinate `(q, s)` of a cell site.
pub type Axial = (i32, i32);

fn axial_rotate(a: Axial) -> Axial {
    (-a.1, a.0 + a.1)
}

/// The 19-cell hexagonal layout with its wrap-around translations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellLayout {
    radius_m: f64,
    axial: Vec<Axial>,
    bs_positions: Vec<Point>,
    wrap_offsets: Vec<Point>,
}

impl CellLayout {
    /// Build the layout for cell radius `radius_m` (metres).
    pub fn new(radius_m: f64) -> Result<Self> {
        if !(radius_m > 0.0 && radius_m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cell radius must be positive, got {radius_m}"
            )));
        }
        let mut axial: Vec<Axial> = Vec::with_capacity(CELL_COUNT);
        for q in -2_i32..=2 {
            for s in -2_i32..=2 {
                if q.abs().max(s.abs()).max((q + s).abs()) <= 2 {
                    axial.push((q, s));
                }
            }
        }
        let ring = |a: &Axial| a.0.abs().max(a.1.abs()).max((a.0 + a.1).abs());
        let to_point = |a: Axial| axial_to_point(a, radius_m);
        // center first, then each ring counter-clockwise from the +x axis
        axial.sort_by(|a, b| {
            let (pa, pb) = (to_point(*a), to_point(*b));
            ring(a)
                .cmp(&ring(b))
                .then(angle_key(pa).total_cmp(&angle_key(pb)))
        });
        let bs_positions = axial.iter().map(|&a| to_point(a)).collect();

        let mut wrap_offsets = vec![Point::ORIGIN];
        let mut t: Axial = (3, 2);
        for _ in 0..6 {
            wrap_offsets.push(to_point(t));
            t = axial_rotate(t);
        }

        Ok(Self {
            radius_m,
            axial,
            bs_positions,
            wrap_offsets,
        })
    }

    pub fn radius_m(&self) -> f64 {
        self.radius_m
    }

    pub fn cell_count(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn bs_positions(&self) -> &[Point] {
        &self.bs_positions
    }

    pub fn bs_position(&self, j: usize) -> Point {
        self.bs_positions[j]
    }

    pub fn axial(&self, j: usize) -> Axial {
        self.axial[j]
    }

    pub fn wrap_offsets(&self) -> &[Point] {
        &self.wrap_offsets
    }

    /// Distance from `z` to BS `j`, minimised over all wrap-around images.
    pub fn wrap_distance(&self, z: Point, j: usize) -> f64 {
        let b = self.bs_positions[j];
        self.wrap_offsets
            .iter()
            .map(|&o| (z + o).distance(b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Plain Euclidean distance without wrap-around.
    pub fn euclidean_distance(&self, z: Point, j: usize) -> f64 {
        z.distance(self.bs_positions[j])
    }

    /// Whether `z` lies inside hexagon `j` (boundary included).
    pub fn contains(&self, j: usize, z: Point) -> bool {
        in_hexagon(z - self.bs_positions[j], self.radius_m)
    }

    /// Cells whose sites are adjacent to `j` on the wrap-around torus.
    pub fn neighbors(&self, j: usize) -> Vec<usize> {
        let spacing = SQRT3 * self.radius_m;
        (0..self.cell_count())
            .filter(|&l| {
                l != j
                    && (self.wrap_distance(self.bs_positions[l], j) - spacing).abs()
                        < 1e-6 * spacing
            })
            .collect()
    }

    /// Cells adjacent to `j` without wrap-around.
    pub fn planar_neighbors(&self, j: usize) -> Vec<usize> {
        let spacing = SQRT3 * self.radius_m;
        (0..self.cell_count())
            .filter(|&l| {
                l != j
                    && (self.euclidean_distance(self.bs_positions[l], j) - spacing).abs()
                        < 1e-6 * spacing
            })
            .collect()
    }
}

/// Build the 19-cell layout. The layout is fully deterministic.
pub fn build_layout(radius_m: f64) -> Result<CellLayout> {
    CellLayout::new(radius_m)
}

fn axial_to_point(a: Axial, r: f64) -> Point {
    let (q, s) = (f64::from(a.0), f64::from(a.1));
    Point::new(SQRT3 * r * (q + 0.5 * s), 1.5 * r * s)
}

fn angle_key(p: Point) -> f64 {
    let a = p.y.atan2(p.x);
    if a < -1e-9 {
        a + 2.0 * std::f64::consts::PI
    } else {
        a.max(0.0)
    }
}

fn in_hexagon(d: Point, r: f64) -> bool {
    let ax = d.x.abs();
    ax <= 0.5 * SQRT3 * r && d.y.abs() <= r - ax / SQRT3
}

/// Pathloss and shadowing parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Propagation {
    /// Pathloss exponent κ.
    pub kappa: f64,
    /// Shadowing variance σ_sf² in dB².
    pub sigma_sf_sq: f64,
    /// Minimum user distance to its serving BS as a fraction of the radius.
    pub min_dist_frac: f64,
}

impl Default for Propagation {
    fn default() -> Self {
        Self {
            kappa: 3.7,
            sigma_sf_sq: 5.0,
            min_dist_frac: 0.14,
        }
    }
}

/// `C / dist^κ` with `10 log10 C ~ N(0, σ_sf²)` for a point `z` and BS `j`.
pub fn large_scale_fading<R: Rng + ?Sized>(
    layout: &CellLayout,
    z: Point,
    j: usize,
    kappa: f64,
    sigma_sf_sq: f64,
    rng: &mut R,
) -> Result<f64> {
    let dist = layout.wrap_distance(z, j);
    fading_at_distance(dist, kappa, sigma_sf_sq, rng).map_err(|e| match e {
        Error::DegenerateGeometry { .. } => Error::DegenerateGeometry { bs: j },
        other => other,
    })
}

/// Same as [`large_scale_fading`] for an explicit distance.
pub fn fading_at_distance<R: Rng + ?Sized>(
    dist: f64,
    kappa: f64,
    sigma_sf_sq: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(kappa > 0.0) || !(sigma_sf_sq >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa must be positive and sigma_sf_sq non-negative (got {kappa}, {sigma_sf_sq})"
        )));
    }
    if dist <= 0.0 {
        return Err(Error::DegenerateGeometry { bs: usize::MAX });
    }
    // always consume one draw so streams stay aligned across σ_sf² values
    let n: f64 = rng.sample(StandardNormal);
    let shadow_db = sigma_sf_sq.sqrt() * n;
    Ok(10f64.powf(shadow_db / 10.0) / dist.powf(kappa))
}

/// User positions and the full large-scale fading map.
///
/// Users are indexed `u = l * K + k` (user `k` of cell `l`), and fading is
/// stored BS-major: `fading[j * (L K) + u] = d_j(z_lk)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UserDrop {
    num_cells: usize,
    users_per_cell: usize,
    positions: Vec<Point>,
    fading: Vec<f64>,
    shadow_seed: u64,
}

impl UserDrop {
    /// A drop given directly by its fading map (no positions), e.g. for
    /// synthetic or reduced networks.
    pub fn from_fading(num_cells: usize, users_per_cell: usize, fading: Vec<f64>) -> Result<Self> {
        let users = num_cells * users_per_cell;
        if num_cells == 0 || users_per_cell == 0 {
            return Err(Error::InvalidParameter(
                "a drop needs at least one cell and one user per cell".into(),
            ));
        }
        if fading.len() != num_cells * users {
            return Err(Error::DimensionMismatch(format!(
                "fading map has {} entries, expected {}",
                fading.len(),
                num_cells * users
            )));
        }
        if let Some(pos) = fading.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
            let u = pos % users;
            return Err(Error::DegenerateFading {
                cell: u / users_per_cell,
                user: u % users_per_cell,
            });
        }
        Ok(Self {
            num_cells,
            users_per_cell,
            positions: Vec::new(),
            fading,
            shadow_seed: 0,
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

    pub fn user_index(&self, l: usize, k: usize) -> usize {
        l * self.users_per_cell + k
    }

    /// Serving cell of user index `u`.
    pub fn cell_of(&self, u: usize) -> usize {
        u / self.users_per_cell
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn position(&self, l: usize, k: usize) -> Option<Point> {
        self.positions.get(self.user_index(l, k)).copied()
    }

    pub fn shadow_seed(&self) -> u64 {
        self.shadow_seed
    }

    /// `d_j(z_u)` for BS `j` and user index `u`.
    #[inline]
    pub fn gain(&self, j: usize, u: usize) -> f64 {
        self.fading[j * self.num_users() + u]
    }

    /// `d_j(z_lk)`.
    pub fn fading(&self, j: usize, l: usize, k: usize) -> f64 {
        self.gain(j, self.user_index(l, k))
    }

    /// Fading from all users to BS `j`.
    pub fn gains_to(&self, j: usize) -> &[f64] {
        let n = self.num_users();
        &self.fading[j * n..(j + 1) * n]
    }

    /// Fading of every user towards its own serving BS.
    pub fn serving_gain(&self, u: usize) -> f64 {
        self.gain(self.cell_of(u), u)
    }
}

/// Drop `users_per_cell` users uniformly in every hexagon, at least
/// `min_dist_frac · r` from the serving BS, and fill the fading map.
pub fn drop_users<R: Rng + ?Sized>(
    layout: &CellLayout,
    users_per_cell: usize,
    propagation: &Propagation,
    rng: &mut R,
) -> Result<UserDrop> {
    if users_per_cell == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    let r = layout.radius_m();
    let min_dist = propagation.min_dist_frac * r;
    if !(0.0..0.8).contains(&propagation.min_dist_frac) {
        return Err(Error::InvalidParameter(format!(
            "min_dist_frac must lie in [0, 0.8), got {}",
            propagation.min_dist_frac
        )));
    }
    let cells = layout.cell_count();
    let half_width = 0.5 * SQRT3 * r;

    let mut positions = Vec::with_capacity(cells * users_per_cell);
    for l in 0..cells {
        let center = layout.bs_position(l);
        for _ in 0..users_per_cell {
            let z = loop {
                let d = Point::new(
                    rng.random_range(-half_width..=half_width),
                    rng.random_range(-r..=r),
                );
                if in_hexagon(d, r) && layout.wrap_distance(center + d, l) >= min_dist {
                    break center + d;
                }
            };
            positions.push(z);
        }
    }

    let shadow_seed: u64 = rng.random();
    let mut shadow_rng = ChaCha8Rng::seed_from_u64(shadow_seed);
    let users = positions.len();
    let mut fading = vec![0.0; cells * users];
    for j in 0..cells {
        for (u, &z) in positions.iter().enumerate() {
            fading[j * users + u] = large_scale_fading(
                layout,
                z,
                j,
                propagation.kappa,
                propagation.sigma_sf_sq,
                &mut shadow_rng,
            )?;
        }
    }

    Ok(UserDrop {
        num_cells: cells,
        users_per_cell,
        positions,
        fading,
        shadow_seed,
    })
}
