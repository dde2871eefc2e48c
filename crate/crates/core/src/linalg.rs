//! Small vector kernels, dense symmetric eigensolves (via faer), conjugate
//! gradients and a Lanczos extreme-eigenvalue solver.

use faer::{ColRef, Mat, MatRef, Side};

use crate::error::{Error, Result};

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y ← y + a·x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale(a: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= a);
}

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
pub fn sym_eig(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver: {e:?}")))?;
    let s = e.S().column_vector();
    let vals: Vec<f64> = (0..n).map(|i| s[i]).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("symmetric eigensolver returned non-finite values".into()));
    }
    Ok((vals, e.U().to_owned()))
}

/// `y = M x` for a dense matrix.
pub fn mat_vec(m: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    let y = m * ColRef::from_slice(x);
    y.iter().copied().collect()
}

/// `y = Mᵀ x` for a dense matrix.
pub fn mat_t_vec(m: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    let y = m.transpose() * ColRef::from_slice(x);
    y.iter().copied().collect()
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `‖b − Kx‖ / ‖b‖`.
    pub residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// operator. `precond` is an optional diagonal (applied as division).
pub fn cg(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x0: Option<&[f64]>,
    precond: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    let mut r = b.to_vec();
    let mut ap = vec![0.0; n];
    if x0.is_some() {
        apply(&x, &mut ap);
        for (ri, a) in r.iter_mut().zip(&ap) {
            *ri -= a;
        }
    }
    let precondition = |r: &[f64], z: &mut Vec<f64>| {
        z.clear();
        match precond {
            Some(d) => z.extend(r.iter().zip(d).map(|(a, b)| a / b)),
            None => z.extend_from_slice(r),
        }
    };
    let mut z = Vec::with_capacity(n);
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = norm(&r) / bnorm;
    let mut it = 0;
    while res > tol && it < max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        res = norm(&r) / bnorm;
        it += 1;
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    CgOutcome {
        x,
        iterations: it,
        residual: res,
        converged: res <= tol,
    }
}

#[derive(Clone, Debug)]
pub struct LanczosOutcome {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// `‖Kv − θv‖` at the returned pair.
    pub residual: f64,
}

/// Largest eigenpair of a symmetric operator by Lanczos with full
/// reorthogonalization. Stops once the Ritz residual falls below
/// `tol·|θ|`.
pub fn lanczos_max(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<LanczosOutcome> {
    let n = start.len();
    let max_iter = max_iter.min(n).max(1);
    let s = norm(start);
    if s == 0.0 {
        return Err(Error::InvalidInput("Lanczos start vector is zero".into()));
    }
    let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|v| v / s).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for k in 0..max_iter {
        let mut w = apply(&basis[k]);
        let a = dot(&w, &basis[k]);
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                axpy(-c, q, &mut w);
            }
        }
        let b = norm(&w);
        let m = alpha.len();
        let check = k + 1 == max_iter || b < 1e-14 || m % 4 == 0 || m < 4;
        if check {
            let t = Mat::from_fn(m, m, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j {
                    beta[i]
                } else if j + 1 == i {
                    beta[j]
                } else {
                    0.0
                }
            });
            let (vals, vecs) = sym_eig(t.as_ref())?;
            let theta = vals[m - 1];
            let y: Vec<f64> = (0..m).map(|i| vecs[(i, m - 1)]).collect();
            let ritz_res = (b * y[m - 1]).abs();
            let mut v = vec![0.0; n];
            for (yi, q) in y.iter().zip(&basis) {
                axpy(*yi, q, &mut v);
            }
            best = Some((theta, v, ritz_res));
            if ritz_res <= tol * theta.abs().max(f64::MIN_POSITIVE) || b < 1e-14 {
                let (value, mut vector, _) = best.take().unwrap();
                let nv = norm(&vector);
                scale(1.0 / nv, &mut vector);
                let kv = apply(&vector);
                let residual = kv
                    .iter()
                    .zip(&vector)
                    .map(|(a, b)| (a - value * b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                return Ok(LanczosOutcome {
                    value,
                    vector,
                    iterations: m,
                    residual,
                });
            }
        }
        if k + 1 == max_iter {
            break;
        }
        beta.push(b);
        scale(1.0 / b, &mut w);
        basis.push(w);
    }
    let residual = best.as_ref().map_or(f64::INFINITY, |b| b.2);
    Err(Error::IterationCap {
        stage: "lanczos",
        cap: max_iter,
        residual,
    })
}
