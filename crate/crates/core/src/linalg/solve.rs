use std::fmt;
use std::str::FromStr;

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet as FaerTriplet};

use super::{norm2, LinalgError, SparseSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Sparse LU with partial pivoting and a fill-reducing column ordering.
    #[default]
    Direct,
    /// Conjugate gradients; the matrix must be symmetric positive definite.
    Cg,
    /// MINRES for symmetric, possibly indefinite matrices.
    Minres,
    Bicgstab,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Direct => "direct",
            SolverKind::Cg => "cg",
            SolverKind::Minres => "minres",
            SolverKind::Bicgstab => "bicgstab",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(SolverKind::Direct),
            "cg" => Ok(SolverKind::Cg),
            "minres" => Ok(SolverKind::Minres),
            "bicgstab" => Ok(SolverKind::Bicgstab),
            other => Err(format!("unknown solver `{other}` (expected direct, cg, minres or bicgstab)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` to relative residual `tol`. Iterative methods start
/// from zero and stop after `10 n` iterations.
pub fn solve(system: &SparseSystem, method: SolverKind, tol: f64) -> Result<(Vec<f64>, SolveReport), LinalgError> {
    let n = system.n();
    if n == 0 {
        return Ok((Vec::new(), SolveReport { iterations: 0, relative_residual: 0.0 }));
    }
    if norm2(&system.rhs) == 0.0 {
        return Ok((vec![0.0; n], SolveReport { iterations: 0, relative_residual: 0.0 }));
    }
    let cap = 10 * n;
    let (x, iterations) = match method {
        SolverKind::Direct => (direct(system)?, 0),
        SolverKind::Cg => {
            if system.symmetry_defect() > 1e-12 {
                return Err(LinalgError::NotSymmetric);
            }
            cg(system, tol, cap)?
        }
        SolverKind::Minres => minres(system, tol, cap)?,
        SolverKind::Bicgstab => bicgstab(system, tol, cap)?,
    };
    let relative_residual = system.relative_residual(&x);
    if !relative_residual.is_finite() {
        return Err(LinalgError::SingularPivot);
    }
    if relative_residual > tol {
        return Err(LinalgError::NotConverged { method: method.name(), iterations, residual: relative_residual });
    }
    Ok((x, SolveReport { iterations, relative_residual }))
}

fn direct(system: &SparseSystem) -> Result<Vec<f64>, LinalgError> {
    let n = system.n();
    let p = &system.pattern;
    let mut entries = Vec::with_capacity(system.nnz());
    for i in 0..n {
        for k in p.row_ptr[i]..p.row_ptr[i + 1] {
            entries.push(FaerTriplet::new(i, p.col_idx[k], system.values[k]));
        }
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &entries).map_err(|_| LinalgError::SingularPivot)?;
    let lu = a.sp_lu().map_err(|_| LinalgError::SingularPivot)?;
    let b = faer::Col::from_fn(n, |i| system.rhs[i]);
    let x = lu.solve(&b);
    let x: Vec<f64> = (0..n).map(|i| x[i]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::SingularPivot);
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn cg(a: &SparseSystem, tol: f64, cap: usize) -> Result<(Vec<f64>, usize), LinalgError> {
    let n = a.n();
    let bnorm = norm2(&a.rhs);
    let mut x = vec![0.0; n];
    let mut r = a.rhs.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 1..=cap {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(LinalgError::Breakdown { method: "cg", iteration: it });
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * bnorm && a.relative_residual(&x) <= tol {
            return Ok((x, it));
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    Err(LinalgError::NotConverged { method: "cg", iterations: cap, residual: a.relative_residual(&x) })
}

/// Unpreconditioned MINRES (Paige & Saunders).
fn minres(a: &SparseSystem, tol: f64, cap: usize) -> Result<(Vec<f64>, usize), LinalgError> {
    let n = a.n();
    let beta1 = norm2(&a.rhs);
    let mut x = vec![0.0; n];
    let mut r1 = a.rhs.clone();
    let mut r2 = a.rhs.clone();
    let mut y = a.rhs.clone();
    let mut v = vec![0.0; n];
    let (mut w, mut w1, mut w2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut oldb = 0.0;
    let mut beta = beta1;
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    for it in 1..=cap {
        if beta == 0.0 {
            return Err(LinalgError::Breakdown { method: "minres", iteration: it });
        }
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        a.mul_vec(&v, &mut y);
        if it >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = norm2(&y);
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
        }
        axpy(phi, &w, &mut x);
        if phibar <= tol * beta1 && a.relative_residual(&x) <= tol {
            return Ok((x, it));
        }
    }
    Err(LinalgError::NotConverged { method: "minres", iterations: cap, residual: a.relative_residual(&x) })
}

fn bicgstab(a: &SparseSystem, tol: f64, cap: usize) -> Result<(Vec<f64>, usize), LinalgError> {
    let n = a.n();
    let bnorm = norm2(&a.rhs);
    let mut x = vec![0.0; n];
    let mut r = a.rhs.clone();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=cap {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(LinalgError::Breakdown { method: "bicgstab", iteration: it });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        a.mul_vec(&p, &mut v);
        alpha = rho / dot(&r0, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= tol * bnorm {
            axpy(alpha, &p, &mut x);
            if a.relative_residual(&x) <= tol {
                return Ok((x, it));
            }
            axpy(-alpha, &p, &mut x);
        }
        a.mul_vec(&s, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= tol * bnorm && a.relative_residual(&x) <= tol {
            return Ok((x, it));
        }
    }
    Err(LinalgError::NotConverged { method: "bicgstab", iterations: cap, residual: a.relative_residual(&x) })
}
