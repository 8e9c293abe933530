//! Fixed-point solvers for deterministic equivalents of resolvent traces.
//!
//! For `H = [h_1 … h_B]` with independent columns `h_b ~ CN(0, R_b / M)`,
//! `(1/M) tr(D (HHᴴ + ρI)⁻¹)` is approximated by `(1/M) tr(D T)` where
//!
//! ```text
//! T = ((1/M) Σ_b R_b / (1 + δ_b) + ρ I)⁻¹,   δ_b = (1/M) tr(R_b T),
//! ```
//!
//! and `(1/M) tr(D Q Θ Q)` by `(1/M) tr(D T′)` from the sandwich solver.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{complex_normal, hpd_cholesky, scaled_identity, CMat, C64};
use crate::performance::standard_error;
use crate::rng::{substream, tag};

/// Condition estimate above which `I − J` is treated as singular.
pub const SANDWICH_CONDITION_LIMIT: f64 = 1e12;

/// A Hermitian `M × M` operator, either `c I` or an explicit matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum Operator {
    Scaled(f64),
    Dense(CMat),
}

impl Operator {
    pub fn identity() -> Self {
        Operator::Scaled(1.0)
    }

    pub fn to_dense(&self, m: usize) -> CMat {
        match self {
            Operator::Scaled(c) => scaled_identity(m, *c),
            Operator::Dense(a) => a.clone(),
        }
    }

    fn scalar(&self) -> Option<f64> {
        match self {
            Operator::Scaled(c) => Some(*c),
            Operator::Dense(_) => None,
        }
    }

    fn check(&self, m: usize) -> Result<()> {
        match self {
            Operator::Scaled(c) if !c.is_finite() => {
                Err(Error::InvalidParameter(format!("non-finite scaling {c}")))
            }
            Operator::Dense(a) if a.nrows() != m || a.ncols() != m => Err(Error::DimensionMismatch(
                format!("{}x{} operator for M = {m}", a.nrows(), a.ncols()),
            )),
            _ => Ok(()),
        }
    }
}

/// `(1/M) tr(A B)`.
pub fn normalized_trace(a: &Operator, b: &Operator, m: usize) -> f64 {
    match (a, b) {
        (Operator::Scaled(x), Operator::Scaled(y)) => x * y,
        (Operator::Scaled(x), Operator::Dense(d)) | (Operator::Dense(d), Operator::Scaled(x)) => {
            x * d.trace().re / m as f64
        }
        (Operator::Dense(x), Operator::Dense(y)) => {
            let mut s = C64::new(0.0, 0.0);
            for r in 0..m {
                for c in 0..m {
                    s += x[(r, c)] * y[(c, r)];
                }
            }
            s.re / m as f64
        }
    }
}

/// Column covariances and resolvent shift.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolventInput {
    pub m: usize,
    pub covariances: Vec<Operator>,
    pub rho: f64,
}

impl ResolventInput {
    /// Isotropic input `R_b = r_b I_M`.
    pub fn isotropic(m: usize, r: &[f64], rho: f64) -> Self {
        Self {
            m,
            covariances: r.iter().map(|&v| Operator::Scaled(v)).collect(),
            rho,
        }
    }

    /// Same input with every covariance stored as an explicit matrix, which
    /// forces the general solver path.
    pub fn densified(&self) -> Self {
        Self {
            m: self.m,
            covariances: self
                .covariances
                .iter()
                .map(|c| Operator::Dense(c.to_dense(self.m)))
                .collect(),
            rho: self.rho,
        }
    }

    fn isotropic_values(&self) -> Option<Vec<f64>> {
        self.covariances.iter().map(Operator::scalar).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParameter("M must be at least 1".into()));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {}", self.rho)));
        }
        for c in &self.covariances {
            c.check(self.m)?;
            if let Operator::Scaled(v) = c {
                if *v < 0.0 {
                    return Err(Error::InvalidParameter(format!("negative covariance scale {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Stopping rule of the fixed-point iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// Converged `δ` and `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolventSolution {
    pub delta: Vec<f64>,
    pub t: Operator,
    pub iterations: usize,
    pub residual: f64,
}

/// Sandwich solution `δ′` and `T′` for one `Θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SandwichSolution {
    pub delta_prime: Vec<f64>,
    pub t_prime: Operator,
    /// 1-norm condition estimate of `I − J`.
    pub condition: f64,
}

/// Iterate `δ` from `δ⁽⁰⁾ = 1/ρ` until the sup-norm change is at most `tol`.
pub fn solve_resolvent(input: &ResolventInput, opts: SolverOptions) -> Result<ResolventSolution> {
    input.validate()?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    match input.isotropic_values() {
        Some(r) => solve_scalar(input.m, &r, input.rho, opts),
        None => solve_dense(input, opts),
    }
}

fn scalar_t(m: usize, r: &[f64], delta: &[f64], rho: f64) -> f64 {
    let s: f64 = r.iter().zip(delta).map(|(r, d)| r / (1.0 + d)).sum();
    1.0 / (s / m as f64 + rho)
}

fn solve_scalar(m: usize, r: &[f64], rho: f64, opts: SolverOptions) -> Result<ResolventSolution> {
    let mut delta = vec![1.0 / rho; r.len()];
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let t = scalar_t(m, r, &delta, rho);
        residual = 0.0;
        for (d, &rb) in delta.iter_mut().zip(r) {
            let next = rb * t;
            residual = residual.max((next - *d).abs());
            *d = next;
        }
        if !residual.is_finite() {
            break;
        }
        if residual <= opts.tol {
            return Ok(ResolventSolution {
                t: Operator::Scaled(scalar_t(m, r, &delta, rho)),
                delta,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
        context: None,
    })
}

fn dense_t(input: &ResolventInput, delta: &[f64]) -> Result<CMat> {
    let m = input.m;
    let mut a = scaled_identity(m, input.rho);
    for (c, d) in input.covariances.iter().zip(delta) {
        let w = 1.0 / (m as f64 * (1.0 + d));
        match c {
            Operator::Scaled(v) => {
                for i in 0..m {
                    a[(i, i)] += v * w;
                }
            }
            Operator::Dense(r) => a += r * C64::new(w, 0.0),
        }
    }
    let chol = hpd_cholesky(a)?;
    Ok(chol.inverse())
}

fn solve_dense(input: &ResolventInput, opts: SolverOptions) -> Result<ResolventSolution> {
    let m = input.m;
    let mut delta = vec![1.0 / input.rho; input.covariances.len()];
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let t = Operator::Dense(dense_t(input, &delta)?);
        residual = 0.0;
        for (d, c) in delta.iter_mut().zip(&input.covariances) {
            let next = normalized_trace(c, &t, m);
            residual = residual.max((next - *d).abs());
            *d = next;
        }
        if !residual.is_finite() {
            break;
        }
        if residual <= opts.tol {
            return Ok(ResolventSolution {
                t: Operator::Dense(dense_t(input, &delta)?),
                delta,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
        context: None,
    })
}

/// Solve `(I − J) δ′ = v` and assemble `T′ = TΘT + T((1/M) Σ R_b δ′_b/(1+δ_b)²)T`.
pub fn solve_resolvent_sandwich(
    input: &ResolventInput,
    base: &ResolventSolution,
    theta: &Operator,
) -> Result<SandwichSolution> {
    input.validate()?;
    theta.check(input.m)?;
    let m = input.m;
    let mf = m as f64;
    let nb = input.covariances.len();
    if base.delta.len() != nb {
        return Err(Error::DimensionMismatch("base solution does not match the input".into()));
    }
    let scalar = match (input.isotropic_values(), &base.t, theta.scalar()) {
        (Some(r), Operator::Scaled(t), Some(th)) => Some((r, *t, th)),
        _ => None,
    };
    let delta = &base.delta;
    // J and v
    let (j, v, tdense) = match &scalar {
        Some((r, t, th)) => {
            let j = DMatrix::from_fn(nb, nb, |b, l| r[b] * r[l] * t * t / (mf * (1.0 + delta[l]).powi(2)));
            let v = nalgebra::DVector::from_fn(nb, |b, _| r[b] * th * t * t);
            (j, v, None)
        }
        None => {
            let t = base.t.to_dense(m);
            let rt: Vec<CMat> = input
                .covariances
                .iter()
                .map(|c| match c {
                    Operator::Scaled(s) => &t * C64::new(*s, 0.0),
                    Operator::Dense(r) => r * &t,
                })
                .collect();
            let tht = match theta {
                Operator::Scaled(s) => &t * &t * C64::new(*s, 0.0),
                Operator::Dense(th) => &t * th * &t,
            };
            let j = DMatrix::from_fn(nb, nb, |b, l| {
                normalized_trace(&Operator::Dense(rt[b].clone()), &Operator::Dense(rt[l].clone()), m)
                    / (mf * (1.0 + delta[l]).powi(2))
            });
            let v = nalgebra::DVector::from_fn(nb, |b, _| {
                let rb = input.covariances[b].to_dense(m);
                normalized_trace(&Operator::Dense(rb), &Operator::Dense(tht.clone()), m)
            });
            (j, v, Some((t, tht)))
        }
    };
    let system = DMatrix::<f64>::identity(nb, nb) - j;
    let (delta_prime, condition) = if nb == 0 {
        (Vec::new(), 1.0)
    } else {
        let inv = system
            .clone()
            .try_inverse()
            .ok_or(Error::Singular { condition: f64::INFINITY })?;
        let condition = one_norm(&system) * one_norm(&inv);
        if !(condition <= SANDWICH_CONDITION_LIMIT) {
            return Err(Error::Singular { condition });
        }
        let sol = system
            .lu()
            .solve(&v)
            .ok_or(Error::Singular { condition })?;
        (sol.iter().copied().collect::<Vec<f64>>(), condition)
    };
    let weights: Vec<f64> = delta_prime
        .iter()
        .zip(delta)
        .map(|(dp, d)| dp / (mf * (1.0 + d).powi(2)))
        .collect();
    let t_prime = match (scalar, tdense) {
        (Some((r, t, th)), _) => {
            let s: f64 = r.iter().zip(&weights).map(|(r, w)| r * w).sum();
            Operator::Scaled(th * t * t + t * t * s)
        }
        (None, Some((t, tht))) => {
            let mut mid = CMat::zeros(m, m);
            for (c, w) in input.covariances.iter().zip(&weights) {
                match c {
                    Operator::Scaled(s) => {
                        for i in 0..m {
                            mid[(i, i)] += C64::new(s * w, 0.0);
                        }
                    }
                    Operator::Dense(r) => mid += r * C64::new(*w, 0.0),
                }
            }
            Operator::Dense(tht + &t * mid * &t)
        }
        (None, None) => unreachable!("dense path always keeps T"),
    };
    Ok(SandwichSolution {
        delta_prime,
        t_prime,
        condition,
    })
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Sample mean and standard error of a Monte Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Monte Carlo estimate of `(1/M) tr(D Q)` with `Q = (HHᴴ + ρI)⁻¹`.
pub fn resolvent_trace_oracle(
    input: &ResolventInput,
    d: &Operator,
    samples: usize,
    seed: u64,
) -> Result<OracleEstimate> {
    oracle(input, d, None, samples, seed)
}

/// Monte Carlo estimate of `(1/M) tr(D Q Θ Q)`.
pub fn sandwich_trace_oracle(
    input: &ResolventInput,
    d: &Operator,
    theta: &Operator,
    samples: usize,
    seed: u64,
) -> Result<OracleEstimate> {
    oracle(input, d, Some(theta), samples, seed)
}

fn oracle(
    input: &ResolventInput,
    d: &Operator,
    theta: Option<&Operator>,
    samples: usize,
    seed: u64,
) -> Result<OracleEstimate> {
    input.validate()?;
    d.check(input.m)?;
    if let Some(th) = theta {
        th.check(input.m)?;
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let shortcut = match (input.isotropic_values(), d.scalar(), theta.map(Operator::scalar)) {
        (Some(r), Some(dv), None) => Some((r, dv, None)),
        (Some(r), Some(dv), Some(Some(th))) => Some((r, dv, Some(th))),
        _ => None,
    };
    let roots: Option<Vec<CMat>> = if shortcut.is_some() {
        None
    } else {
        Some(
            input
                .covariances
                .iter()
                .map(|c| hermitian_sqrt(&c.to_dense(input.m)))
                .collect(),
        )
    };
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = substream(seed, &[tag::ORACLE, s as u64]);
            match &shortcut {
                Some((r, dv, th)) => isotropic_sample(input.m, r, input.rho, *dv, *th, &mut rng),
                None => dense_sample(input, roots.as_deref().unwrap_or(&[]), d, theta, &mut rng),
            }
        })
        .collect::<Result<_>>()?;
    let n = values.len() as f64;
    Ok(OracleEstimate {
        mean: values.iter().sum::<f64>() / n,
        stderr: standard_error(&values),
        samples,
    })
}

fn hermitian_sqrt(a: &CMat) -> CMat {
    let eig = a.clone().symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| C64::new(v.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * CMat::from_diagonal(&vals) * eig.eigenvectors.adjoint()
}

fn isotropic_sample<R: Rng + ?Sized>(
    m: usize,
    r: &[f64],
    rho: f64,
    d: f64,
    theta: Option<f64>,
    rng: &mut R,
) -> Result<f64> {
    let b = r.len();
    let mf = m as f64;
    // nonzero spectra of HHᴴ and HᴴH coincide; the remaining M − B
    // eigenvalues of HHᴴ are zero
    let h = CMat::from_fn(m, b, |_, c| complex_normal(rng, r[c] / mf));
    let small = h.adjoint() * &h + scaled_identity(b, rho);
    let inv = hpd_cholesky(small)?.inverse();
    let extra = (m as f64 - b as f64) / rho;
    let value = match theta {
        None => extra + inv.trace().re,
        Some(th) => th * (extra / rho + inv.iter().map(|z| z.norm_sqr()).sum::<f64>()),
    };
    Ok(d * value / mf)
}

fn dense_sample<R: Rng + ?Sized>(
    input: &ResolventInput,
    roots: &[CMat],
    d: &Operator,
    theta: Option<&Operator>,
    rng: &mut R,
) -> Result<f64> {
    let m = input.m;
    let scale = (1.0 / m as f64).sqrt();
    let mut h = CMat::zeros(m, roots.len());
    for (b, root) in roots.iter().enumerate() {
        let z = CMat::from_fn(m, 1, |_, _| complex_normal(rng, 1.0) * scale);
        h.set_column(b, &(root * z).column(0));
    }
    let q = hpd_cholesky(&h * h.adjoint() + scaled_identity(m, input.rho))?.inverse();
    let inner = match theta {
        None => q,
        Some(th) => &q * th.to_dense(m) * &q,
    };
    Ok(normalized_trace(d, &Operator::Dense(inner), m))
}
