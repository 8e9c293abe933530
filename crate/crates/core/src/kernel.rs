//! Per-BS SINR evaluation through the Gram matrix of the pilot directions.
//!
//! Every detector in this crate lies in the span of the columns of `Ĥ_V,j`,
//! so with `g = Ĥ_V,j w` all SINR ingredients follow from `A = Ĥ_V,jᴴ Ĥ_V,j`
//! and `w`: `Ĥ_V,jᴴ g = A w` and `‖g‖² = wᴴ A w`. This keeps the per-trial
//! cost at one `M × B²` Gram plus `B × B` factorizations.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::detectors::{Scheme, ZF_CONDITION_LIMIT};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

/// Column-major `M × B` matrix split into real and imaginary planes.
#[derive(Clone, Debug, Default)]
pub(crate) struct SplitMatrix {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl SplitMatrix {
    pub(crate) fn from_cmat(x: &CMat) -> Self {
        let mut s = SplitMatrix::default();
        s.load(x);
        s
    }

    pub(crate) fn load(&mut self, x: &CMat) {
        self.rows = x.nrows();
        self.cols = x.ncols();
        self.re.clear();
        self.im.clear();
        // nalgebra storage is column-major as well
        self.re.extend(x.iter().map(|z| z.re));
        self.im.extend(x.iter().map(|z| z.im));
    }

    /// Fill with independent columns `CN(0, var_b I_M)`.
    pub(crate) fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R, rows: usize, var: &[f64]) {
        self.rows = rows;
        self.cols = var.len();
        self.re.resize(rows * var.len(), 0.0);
        self.im.resize(rows * var.len(), 0.0);
        for (b, &v) in var.iter().enumerate() {
            let sd = (0.5 * v).sqrt();
            let (re, im) = (
                &mut self.re[b * rows..(b + 1) * rows],
                &mut self.im[b * rows..(b + 1) * rows],
            );
            for n in 0..rows {
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                re[n] = sd * x;
                im[n] = sd * y;
            }
        }
    }

    pub(crate) fn rows(&self) -> usize {
        self.rows
    }

    /// Row-major Hermitian Gram `A[a][b] = x_aᴴ x_b`, both triangles filled.
    pub(crate) fn gram(&self, out: &mut Vec<C64>) {
        let (m, n) = (self.rows, self.cols);
        out.clear();
        out.resize(n * n, C64::new(0.0, 0.0));
        let col = |c: usize| (&self.re[c * m..(c + 1) * m], &self.im[c * m..(c + 1) * m]);
        let mut put = |a: usize, b: usize, z: C64| {
            out[a * n + b] = z;
            out[b * n + a] = z.conj();
        };
        // 2 × 2 column blocks on and above the diagonal
        let mut a = 0;
        while a + 1 < n {
            let (x0, x1) = (col(a), col(a + 1));
            put(a, a, conj_dot(x0, x0));
            put(a, a + 1, conj_dot(x0, x1));
            put(a + 1, a + 1, conj_dot(x1, x1));
            let mut b = a + 2;
            while b + 1 < n {
                let z = conj_dot_2x2(x0, x1, col(b), col(b + 1));
                put(a, b, z[0]);
                put(a, b + 1, z[1]);
                put(a + 1, b, z[2]);
                put(a + 1, b + 1, z[3]);
                b += 2;
            }
            if b < n {
                put(a, b, conj_dot(x0, col(b)));
                put(a + 1, b, conj_dot(x1, col(b)));
            }
            a += 2;
        }
        if a < n {
            let x = col(a);
            put(a, a, conj_dot(x, x));
        }
    }
}

type Column<'a> = (&'a [f64], &'a [f64]);

fn conj_dot((ar, ai): Column, (br, bi): Column) -> C64 {
    let mut re = [0.0; 4];
    let mut im = [0.0; 4];
    let chunks = ar
        .chunks_exact(4)
        .zip(ai.chunks_exact(4))
        .zip(br.chunks_exact(4).zip(bi.chunks_exact(4)));
    for ((xr, xi), (yr, yi)) in chunks {
        for l in 0..4 {
            re[l] += xr[l] * yr[l] + xi[l] * yi[l];
            im[l] += xr[l] * yi[l] - xi[l] * yr[l];
        }
    }
    let mut z = C64::new(re[0] + re[1] + re[2] + re[3], im[0] + im[1] + im[2] + im[3]);
    for s in ar.len() / 4 * 4..ar.len() {
        z.re += ar[s] * br[s] + ai[s] * bi[s];
        z.im += ar[s] * bi[s] - ai[s] * br[s];
    }
    z
}

/// `[x0ᴴy0, x0ᴴy1, x1ᴴy0, x1ᴴy1]` in one pass over the rows.
fn conj_dot_2x2(x0: Column, x1: Column, y0: Column, y1: Column) -> [C64; 4] {
    let m = x0.0.len();
    let mut acc = [[0.0_f64; 2]; 8];
    let pairs = x0
        .0
        .chunks_exact(2)
        .zip(x0.1.chunks_exact(2))
        .zip(x1.0.chunks_exact(2).zip(x1.1.chunks_exact(2)))
        .zip(
            y0.0.chunks_exact(2)
                .zip(y0.1.chunks_exact(2))
                .zip(y1.0.chunks_exact(2).zip(y1.1.chunks_exact(2))),
        );
    for (((a0r, a0i), (a1r, a1i)), ((b0r, b0i), (b1r, b1i))) in pairs {
        for l in 0..2 {
            acc[0][l] += a0r[l] * b0r[l] + a0i[l] * b0i[l];
            acc[1][l] += a0r[l] * b0i[l] - a0i[l] * b0r[l];
            acc[2][l] += a0r[l] * b1r[l] + a0i[l] * b1i[l];
            acc[3][l] += a0r[l] * b1i[l] - a0i[l] * b1r[l];
            acc[4][l] += a1r[l] * b0r[l] + a1i[l] * b0i[l];
            acc[5][l] += a1r[l] * b0i[l] - a1i[l] * b0r[l];
            acc[6][l] += a1r[l] * b1r[l] + a1i[l] * b1i[l];
            acc[7][l] += a1r[l] * b1i[l] - a1i[l] * b1r[l];
        }
    }
    let s = m / 2 * 2;
    let mut z = [C64::new(0.0, 0.0); 4];
    for (t, zt) in z.iter_mut().enumerate() {
        *zt = C64::new(acc[2 * t][0] + acc[2 * t][1], acc[2 * t + 1][0] + acc[2 * t + 1][1]);
    }
    if s < m {
        let (a0r, a0i, a1r, a1i) = (x0.0[s], x0.1[s], x1.0[s], x1.1[s]);
        let (b0r, b0i, b1r, b1i) = (y0.0[s], y0.1[s], y1.0[s], y1.1[s]);
        z[0] += C64::new(a0r * b0r + a0i * b0i, a0r * b0i - a0i * b0r);
        z[1] += C64::new(a0r * b1r + a0i * b1i, a0r * b1i - a0i * b1r);
        z[2] += C64::new(a1r * b0r + a1i * b0i, a1r * b0i - a1i * b0r);
        z[3] += C64::new(a1r * b1r + a1i * b1i, a1r * b1i - a1i * b1r);
    }
    z
}

/// In-place lower Cholesky factor of a row-major Hermitian `n × n` matrix.
/// Only the lower triangle is read.
pub(crate) fn cholesky_in_place(g: &mut [C64], n: usize) -> Result<()> {
    for j in 0..n {
        let row_j = &mut g[j * n..(j + 1) * n];
        let mut d = row_j[j].re;
        for p in 0..j {
            d -= row_j[p].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let ljj = d.sqrt();
        row_j[j] = C64::new(ljj, 0.0);
        for i in j + 1..n {
            let (upper, lower) = g.split_at_mut(i * n);
            let row_j = &upper[j * n..j * n + j];
            let row_i = &mut lower[..n];
            let mut s = row_i[j];
            for p in 0..j {
                s -= row_i[p] * row_j[p].conj();
            }
            row_i[j] = s / ljj;
        }
    }
    Ok(())
}

/// Solve `L y = e_i` into `y` (length `n`).
fn forward_unit(l: &[C64], n: usize, i: usize, y: &mut [C64]) {
    y[..i].iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    for r in i..n {
        let row = &l[r * n..r * n + r];
        let mut s = if r == i { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        for p in i..r {
            s -= row[p] * y[p];
        }
        y[r] = s / row_diag(l, n, r);
    }
}

#[inline]
fn row_diag(l: &[C64], n: usize, r: usize) -> f64 {
    l[r * n + r].re
}

/// Solve `Lᴴ w = y` in place.
fn backward(l: &[C64], n: usize, y: &mut [C64]) {
    for r in (0..n).rev() {
        let w = y[r] / row_diag(l, n, r);
        y[r] = w;
        let row = &l[r * n..r * n + r];
        for p in 0..r {
            y[p] -= row[p].conj() * w;
        }
    }
}

/// Large-scale constants of one BS.
#[derive(Clone, Debug)]
pub(crate) struct BsConstants {
    /// `λ_jb`.
    pub lambda: Vec<f64>,
    /// `σ² + φ_j`.
    pub noise: f64,
    /// `σ² + Z_j` of S-MMSE.
    pub single_cell_noise: f64,
    /// Pilot of each served user.
    pub own_pilot: Vec<usize>,
    /// `τ_jk p_jk d_j²(z_jk)`.
    pub signal: Vec<f64>,
    /// `Σ τ p d²` over the other users on the served user's pilot.
    pub contamination: Vec<f64>,
}

/// Scratch buffers reused across BSs and trials.
#[derive(Default)]
pub(crate) struct Workspace {
    gram: Vec<C64>,
    fac: Vec<C64>,
    small: Vec<C64>,
    w: Vec<C64>,
    u: Vec<C64>,
    support: Vec<usize>,
    position: Vec<usize>,
}

/// SINRs of every served user of one BS for each scheme, given the
/// directions.
pub(crate) fn bs_sinrs(
    x: &SplitMatrix,
    bs: &BsConstants,
    schemes: &[Scheme],
    ws: &mut Workspace,
    out: &mut [Vec<f64>],
) -> Vec<Option<Error>> {
    let b = bs.lambda.len();
    let mut gram = std::mem::take(&mut ws.gram);
    x.gram(&mut gram);
    let mut failures = Vec::with_capacity(schemes.len());
    for (s, scheme) in schemes.iter().enumerate() {
        let res = match scheme {
            Scheme::MatchedFilter => mf(&gram, b, bs, &mut out[s]),
            Scheme::MultiCellZf => zf(&gram, b, x.rows(), bs, ws, &mut out[s]),
            Scheme::MultiCellMmse => m_mmse(&gram, b, bs, ws, &mut out[s]),
            Scheme::SingleCellMmse => s_mmse(&gram, b, bs, ws, &mut out[s]),
        };
        failures.push(res.err());
    }
    ws.gram = gram;
    failures
}

/// `η` from `u = Ĥᴴ g`, `‖g‖²` and the served user's constants.
fn sinr(bs: &BsConstants, k: usize, u: &[C64], g2: f64) -> Result<f64> {
    let i = bs.own_pilot[k];
    let ui = u[i].norm_sqr();
    let mut den = bs.contamination[k] * ui + g2 * bs.noise;
    for (b, (&l, z)) in bs.lambda.iter().zip(u).enumerate() {
        if b != i {
            den += l * z.norm_sqr();
        }
    }
    if !(g2 > 0.0) || !(den > 0.0) {
        return Err(Error::ZeroDetector);
    }
    Ok(bs.signal[k] * ui / den)
}

fn mf(a: &[C64], b: usize, bs: &BsConstants, out: &mut [f64]) -> Result<()> {
    for k in 0..bs.own_pilot.len() {
        let i = bs.own_pilot[k];
        let row = &a[i * b..(i + 1) * b];
        out[k] = sinr(bs, k, row, a[i * b + i].re)?;
    }
    Ok(())
}

fn zf(a: &[C64], b: usize, m: usize, bs: &BsConstants, ws: &mut Workspace, out: &mut [f64]) -> Result<()> {
    if m <= b {
        return Err(Error::RankDeficient(format!("M-ZF needs M > B (M = {m}, B = {b})")));
    }
    ws.fac.clear();
    ws.fac.extend_from_slice(a);
    cholesky_in_place(&mut ws.fac, b)
        .map_err(|_| Error::RankDeficient("direction Gram matrix is singular".into()))?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for r in 0..b {
        let d = row_diag(&ws.fac, b, r);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let cond = (hi / lo).powi(2);
    if !(cond <= ZF_CONDITION_LIMIT) {
        return Err(Error::RankDeficient(format!(
            "direction Gram matrix condition estimate {cond:e}"
        )));
    }
    ws.w.resize(b, C64::new(0.0, 0.0));
    ws.u.clear();
    ws.u.resize(b, C64::new(0.0, 0.0));
    for k in 0..bs.own_pilot.len() {
        let i = bs.own_pilot[k];
        // (A⁻¹)_ii = ‖L⁻¹ e_i‖²
        forward_unit(&ws.fac, b, i, &mut ws.w);
        let g2: f64 = ws.w[i..].iter().map(|z| z.norm_sqr()).sum();
        ws.u[i] = C64::new(1.0, 0.0);
        out[k] = sinr(bs, k, &ws.u, g2)?;
        ws.u[i] = C64::new(0.0, 0.0);
    }
    Ok(())
}

fn m_mmse(a: &[C64], b: usize, bs: &BsConstants, ws: &mut Workspace, out: &mut [f64]) -> Result<()> {
    // restrict to pilots with nonzero weight; the others do not enter the
    // detector nor the interference sum
    ws.support.clear();
    ws.position.clear();
    ws.position.resize(b, usize::MAX);
    for (p, &l) in bs.lambda.iter().enumerate() {
        if l > 0.0 {
            ws.position[p] = ws.support.len();
            ws.support.push(p);
        }
    }
    let n = ws.support.len();
    let c = bs.noise;
    if !(c > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    ws.fac.clear();
    ws.fac.resize(n * n, C64::new(0.0, 0.0));
    for (r, &pr) in ws.support.iter().enumerate() {
        for (q, &pq) in ws.support[..=r].iter().enumerate() {
            ws.fac[r * n + q] = a[pr * b + pq];
        }
        ws.fac[r * n + r] += c / bs.lambda[pr];
    }
    cholesky_in_place(&mut ws.fac, n)?;
    ws.w.resize(n, C64::new(0.0, 0.0));
    ws.u.clear();
    ws.u.resize(b, C64::new(0.0, 0.0));
    for k in 0..bs.own_pilot.len() {
        let i = ws.position[bs.own_pilot[k]];
        forward_unit(&ws.fac, n, i, &mut ws.w);
        backward(&ws.fac, n, &mut ws.w);
        let mut g2 = ws.w[i].re;
        for (q, &p) in ws.support.iter().enumerate() {
            let scaled = ws.w[q] * (c / bs.lambda[p]);
            g2 -= (ws.w[q].conj() * scaled).re;
            ws.u[p] = -scaled;
        }
        ws.u[bs.own_pilot[k]] += C64::new(1.0, 0.0);
        out[k] = sinr(bs, k, &ws.u, g2)?;
    }
    Ok(())
}

fn s_mmse(a: &[C64], b: usize, bs: &BsConstants, ws: &mut Workspace, out: &mut [f64]) -> Result<()> {
    let own = &bs.own_pilot;
    let n = own.len();
    let c = bs.single_cell_noise;
    if !(c > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    ws.small.clear();
    ws.small.resize(n * n, C64::new(0.0, 0.0));
    for r in 0..n {
        for q in 0..=r {
            ws.small[r * n + q] = a[own[r] * b + own[q]];
        }
        ws.small[r * n + r] += c / bs.signal[r];
    }
    cholesky_in_place(&mut ws.small, n)?;
    ws.w.resize(n, C64::new(0.0, 0.0));
    ws.u.clear();
    ws.u.resize(b, C64::new(0.0, 0.0));
    for k in 0..n {
        forward_unit(&ws.small, n, k, &mut ws.w);
        backward(&ws.small, n, &mut ws.w);
        for (p, up) in ws.u.iter_mut().enumerate() {
            let row = &a[p * b..(p + 1) * b];
            *up = own.iter().zip(&ws.w).map(|(&o, &wq)| row[o] * wq).sum();
        }
        let g2: f64 = own
            .iter()
            .zip(&ws.w)
            .map(|(&o, &wq)| (wq.conj() * ws.u[o]).re)
            .sum();
        out[k] = sinr(bs, k, &ws.u, g2)?;
    }
    Ok(())
}
