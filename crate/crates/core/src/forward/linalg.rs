//! Matrix-free Krylov solvers with diagonal (Jacobi) preconditioning.
//!
//! Dirichlet rows are handled by lifting: the known boundary values are moved
//! to the right-hand side and the iteration runs on vectors that vanish on
//! the fixed entries.

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
}

impl SolverOptions {
    pub fn for_size(n: usize) -> SolverOptions {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: 20 * n + 1000,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn precondition(diag: &[f64], r: &[f64]) -> Vec<f64> {
    r.iter().zip(diag).map(|(v, d)| if *d != 0.0 { v / d } else { *v }).collect()
}

/// Preconditioned conjugate gradients for a symmetric positive-definite
/// operator. `x` holds the initial guess and receives the solution.
pub fn cg(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    diag: &[f64],
    x: &mut [f64],
    opts: SolverOptions,
) -> Result<usize> {
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let ax = apply(x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    if norm(&r) <= opts.tol * bnorm {
        return Ok(0);
    }
    let mut z = precondition(diag, &r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=opts.max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap.is_finite() && pap > 0.0) {
            return Err(Error::Numerical(format!("conjugate gradients broke down (p.Ap = {pap:e})")));
        }
        let a = rz / pap;
        for i in 0..x.len() {
            x[i] += a * p[i];
            r[i] -= a * ap[i];
        }
        let rn = norm(&r);
        if !rn.is_finite() {
            return Err(Error::Numerical("conjugate gradients produced a non-finite residual".into()));
        }
        if rn <= opts.tol * bnorm {
            return Ok(it);
        }
        z = precondition(diag, &r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Numerical(format!(
        "conjugate gradients did not reach tolerance {:e} in {} iterations",
        opts.tol, opts.max_iter
    )))
}

/// Right-preconditioned BiCGSTAB for general nonsingular operators.
pub fn bicgstab(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    diag: &[f64],
    x: &mut [f64],
    opts: SolverOptions,
) -> Result<usize> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let ax = apply(x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    if norm(&r) <= opts.tol * bnorm {
        return Ok(0);
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for it in 1..=opts.max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return Err(Error::Numerical("BiCGSTAB broke down (rho = 0)".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precondition(diag, &p);
        v = apply(&p_hat);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            return Err(Error::Numerical("BiCGSTAB broke down (r.v = 0)".into()));
        }
        alpha = rho / rv;
        let s: Vec<f64> = r.iter().zip(&v).map(|(r, v)| r - alpha * v).collect();
        if norm(&s) <= opts.tol * bnorm {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return Ok(it);
        }
        let s_hat = precondition(diag, &s);
        let t = apply(&s_hat);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::Numerical("BiCGSTAB broke down (t = 0)".into()));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        let rn = norm(&r);
        if !rn.is_finite() {
            return Err(Error::Numerical("BiCGSTAB produced a non-finite residual".into()));
        }
        if rn <= opts.tol * bnorm {
            return Ok(it);
        }
        if omega == 0.0 {
            return Err(Error::Numerical("BiCGSTAB broke down (omega = 0)".into()));
        }
    }
    Err(Error::Numerical(format!(
        "BiCGSTAB did not reach tolerance {:e} in {} iterations",
        opts.tol, opts.max_iter
    )))
}

/// A linear system on full-length vectors where the entries with
/// `fixed[i] == true` carry prescribed values.
pub struct DirichletSystem<'a> {
    pub apply: &'a dyn Fn(&[f64]) -> Vec<f64>,
    pub fixed: &'a [bool],
    pub diag: &'a [f64],
    pub symmetric: bool,
}

impl DirichletSystem<'_> {
    /// Solves `A x = rhs` on the free entries with `x = values` on the fixed
    /// ones. `guess` seeds the iteration on the free entries.
    pub fn solve(&self, rhs: &[f64], values: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = rhs.len();
        let lift: Vec<f64> = (0..n).map(|i| if self.fixed[i] { values[i] } else { 0.0 }).collect();
        let a_lift = (self.apply)(&lift);
        let b: Vec<f64> = (0..n)
            .map(|i| if self.fixed[i] { 0.0 } else { rhs[i] - a_lift[i] })
            .collect();
        let restricted = |z: &[f64]| -> Vec<f64> {
            let mut y = (self.apply)(z);
            for (yi, &f) in y.iter_mut().zip(self.fixed) {
                if f {
                    *yi = 0.0;
                }
            }
            y
        };
        let mut z: Vec<f64> = match guess {
            Some(g) => (0..n).map(|i| if self.fixed[i] { 0.0 } else { g[i] }).collect(),
            None => vec![0.0; n],
        };
        let opts = SolverOptions::for_size(n);
        if self.symmetric {
            cg(&restricted, &b, self.diag, &mut z, opts)?;
        } else {
            bicgstab(&restricted, &b, self.diag, &mut z, opts)?;
        }
        Ok((0..n).map(|i| if self.fixed[i] { values[i] } else { z[i] }).collect())
    }
}
