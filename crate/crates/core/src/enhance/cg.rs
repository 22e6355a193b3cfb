//! Jacobi-preconditioned conjugate gradient for symmetric positive definite
//! operators given in matrix-free form.

use crate::error::{Error, Result};

pub trait SpdOperator {
    fn dim(&self) -> usize;
    /// `out = A x`
    fn apply(&self, x: &[f64], out: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    /// Stop once `||A x - b||_inf` drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tolerance: 1e-9, max_iterations: 20_000 }
    }
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_inf: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn solve<A: SpdOperator>(op: &A, b: &[f64], x0: Option<&[f64]>, opts: CgOptions) -> Result<CgSolution> {
    let n = op.dim();
    if b.len() != n {
        return Err(Error::dim(format!("rhs has {} entries, operator is {n}", b.len())));
    }
    let inv_diag: Vec<f64> = op.diagonal().into_iter().map(|d| 1.0 / d).collect();
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| b.to_vec());
    let mut ax = vec![0.0; n];
    op.apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for it in 0..opts.max_iterations {
        if inf_norm(&r) < opts.tolerance {
            return Ok(CgSolution { x, iterations: it, residual_inf: inf_norm(&r) });
        }
        op.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        // Recompute the true residual now and then so drift cannot fake convergence.
        if (it + 1) % 50 == 0 {
            op.apply(&x, &mut ax);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    op.apply(&x, &mut ax);
    let residual = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).abs()).fold(0.0, f64::max);
    if residual < opts.tolerance {
        Ok(CgSolution { x, iterations: opts.max_iterations, residual_inf: residual })
    } else {
        Err(Error::NotConverged { iterations: opts.max_iterations, residual })
    }
}
