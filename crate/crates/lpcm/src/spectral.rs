//! Manifold-harmonics reference basis and spectral reconstruction.
//!
//! Solves the generalized eigenproblem `L_pd phi = lambda D phi` for the
//! smallest eigenpairs: densely via `D^(-1/2) L_pd D^(-1/2)` for small
//! meshes, and by shift-invert Lanczos in the D-inner product (reusing the
//! sparse LDL^T factorization) above [`DENSE_LIMIT`] vertices.

use crate::operators::MassDiag;
use crate::solver::updates::d_orthonormalize;
use crate::sparse::{Ldlt, SparseSymMatrix};
use crate::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;

/// Largest vertex count handled by the dense eigensolver path.
pub const DENSE_LIMIT: usize = 3000;

/// Eigenvalue/eigenvector residual accepted by the iterative path.
const RITZ_TOL: f64 = 1e-7;

/// A D-orthonormal eigenbasis with non-decreasing eigenvalues.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub phi: DMatrix<f64>,
    pub lambdas: Vec<f64>,
}

/// Smallest `count` eigenpairs of `L_pd phi = lambda D phi`.
///
/// `seed` feeds the Lanczos start vector on the iterative path; `None` uses
/// a fixed default so results are reproducible.
pub fn mhb(
    l_pd: &SparseSymMatrix,
    d: &MassDiag,
    count: usize,
    seed: Option<u64>,
) -> Result<EigenBasis> {
    let n = l_pd.n();
    if count > n {
        return Err(Error::InvalidParameter(format!(
            "requested {count} eigenpairs of an {n}-dim operator"
        )));
    }
    if count == 0 {
        return Ok(EigenBasis { phi: DMatrix::zeros(n, 0), lambdas: Vec::new() });
    }
    if n <= DENSE_LIMIT {
        mhb_dense(l_pd, d, count)
    } else {
        mhb_lanczos(l_pd, d, count, seed.unwrap_or(42))
    }
}

/// Dense path: full symmetric eigendecomposition of `D^(-1/2) L D^(-1/2)`.
pub fn mhb_dense(l_pd: &SparseSymMatrix, d: &MassDiag, count: usize) -> Result<EigenBasis> {
    let n = l_pd.n();
    let inv_sqrt: Vec<f64> = d.as_slice().iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        let (cols, vals) = l_pd.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            b[(i, j)] = v * inv_sqrt[i] * inv_sqrt[j];
        }
    }
    // enforce exact symmetry before the eigensolver
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = avg;
            b[(j, i)] = avg;
        }
    }
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[c]));

    let mut phi = DMatrix::zeros(n, count);
    let mut lambdas = Vec::with_capacity(count);
    for (k, &src) in order.iter().take(count).enumerate() {
        lambdas.push(eig.eigenvalues[src]);
        for i in 0..n {
            phi[(i, k)] = eig.eigenvectors[(i, src)] * inv_sqrt[i];
        }
    }
    Ok(EigenBasis { phi, lambdas })
}

/// Iterative path: shift-invert Lanczos on `(L + s D)^(-1) D` in the
/// D-inner product, with full reorthogonalization.
pub fn mhb_lanczos(
    l_pd: &SparseSymMatrix,
    d: &MassDiag,
    count: usize,
    seed: u64,
) -> Result<EigenBasis> {
    let n = l_pd.n();
    let dv = d.as_slice();
    // small positive shift keeps the factorized matrix SPD even with the
    // constant null vector of closed meshes
    let trace_l: f64 = (0..n).map(|i| l_pd.get(i, i)).sum();
    let shift = (1e-4 * trace_l / d.total()).max(1e-12);
    let shifted = l_pd.plus_diag(&dv.iter().map(|v| v * shift).collect::<Vec<_>>());
    let factor = Ldlt::factor(&shifted)?;

    let mut steps = (2 * count + 30).min(n);
    loop {
        let (lambdas, phi, resids) = lanczos_run(l_pd, d, &factor, shift, count, steps, seed)?;
        let achieved = resids.iter().take_while(|&&r| r <= RITZ_TOL).count();
        if achieved >= count {
            // polish orthonormality and return
            let phi = d_orthonormalize(&phi, d)?;
            return Ok(EigenBasis { phi, lambdas });
        }
        if steps >= n {
            return Err(Error::EigenNonConvergence { achieved, requested: count });
        }
        steps = (2 * steps).min(n);
    }
}

#[allow(clippy::type_complexity)]
fn lanczos_run(
    l_pd: &SparseSymMatrix,
    d: &MassDiag,
    factor: &Ldlt,
    shift: f64,
    count: usize,
    steps: usize,
    seed: u64,
) -> Result<(Vec<f64>, DMatrix<f64>, Vec<f64>)> {
    let n = l_pd.n();
    let dv = d.as_slice();
    let d_dot = |a: &[f64], b: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            acc += dv[i] * a[i] * b[i];
        }
        acc
    };

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::new();

    let mut v0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nrm = d_dot(&v0, &v0).sqrt();
    for x in v0.iter_mut() {
        *x /= nrm;
    }
    v.push(v0);

    let mut work = vec![0f64; n];
    for j in 0..steps {
        // w = (L + s D)^(-1) D v_j
        for i in 0..n {
            work[i] = dv[i] * v[j][i];
        }
        let mut w = factor.solve(&work);
        let a_j = d_dot(&w, &v[j]);
        alpha.push(a_j);
        for i in 0..n {
            w[i] -= a_j * v[j][i];
        }
        if j > 0 {
            let b_prev = beta[j - 1];
            for i in 0..n {
                w[i] -= b_prev * v[j - 1][i];
            }
        }
        // full reorthogonalization, two passes
        for _ in 0..2 {
            for vk in &v {
                let c = d_dot(&w, vk);
                for i in 0..n {
                    w[i] -= c * vk[i];
                }
            }
        }
        if j + 1 == steps {
            break;
        }
        let b_j = d_dot(&w, &w).sqrt();
        if b_j < 1e-14 {
            // invariant subspace found; restart direction
            let mut fresh: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for vk in &v {
                let c = d_dot(&fresh, vk);
                for i in 0..n {
                    fresh[i] -= c * vk[i];
                }
            }
            let nrm = d_dot(&fresh, &fresh).sqrt();
            if nrm < 1e-14 {
                break;
            }
            for x in fresh.iter_mut() {
                *x /= nrm;
            }
            beta.push(0.0);
            v.push(fresh);
        } else {
            for x in w.iter_mut() {
                *x /= b_j;
            }
            beta.push(b_j);
            v.push(w);
        }
    }

    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for j in 0..m {
        t[(j, j)] = alpha[j];
        if j + 1 < m {
            t[(j, j + 1)] = beta[j];
            t[(j + 1, j)] = beta[j];
        }
    }
    let eig = SymmetricEigen::new(t);
    // largest theta of the shift-inverted operator = smallest lambda
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let take = count.min(m);
    let mut phi = DMatrix::zeros(n, take);
    let mut lambdas = Vec::with_capacity(take);
    for (k, &src) in order.iter().take(take).enumerate() {
        let theta = eig.eigenvalues[src];
        lambdas.push(1.0 / theta - shift);
        for (j, vj) in v.iter().enumerate().take(m) {
            let y = eig.eigenvectors[(j, src)];
            for i in 0..n {
                phi[(i, k)] += y * vj[i];
            }
        }
    }

    // residuals of the shifted problem: || L phi - lambda D phi || over
    // || (lambda + shift) D phi ||, which stays well scaled at lambda = 0
    let mut resids = Vec::with_capacity(take);
    let mut lphi = vec![0f64; n];
    for k in 0..take {
        let col: Vec<f64> = (0..n).map(|i| phi[(i, k)]).collect();
        l_pd.mul_vec(&col, &mut lphi);
        let target = lambdas[k] + shift;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let dphi = dv[i] * col[i];
            let r = lphi[i] - lambdas[k] * dphi;
            num += r * r;
            den += (target * dphi) * (target * dphi);
        }
        resids.push((num / den.max(1e-300)).sqrt());
    }
    Ok((lambdas, phi, resids))
}

/// D-orthogonal projection of `x` onto the span of `basis`:
/// `basis (basis^T D x)`.
pub fn reconstruct(basis: &DMatrix<f64>, d: &MassDiag, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut dx = x.clone();
    let dv = d.as_slice();
    for mut col in dx.column_iter_mut() {
        for i in 0..n {
            col[i] *= dv[i];
        }
    }
    let coeffs = basis.transpose() * dx;
    basis * coeffs
}

/// D-weighted relative L2 error of an approximation.
pub fn rel_error_d(x: &DMatrix<f64>, xhat: &DMatrix<f64>, d: &MassDiag) -> f64 {
    let dv = d.as_slice();
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            let e = x[(i, j)] - xhat[(i, j)];
            num += dv[i] * e * e;
            den += dv[i] * x[(i, j)] * x[(i, j)];
        }
    }
    (num / den.max(1e-300)).sqrt()
}

/// D-weighted principal angles (radians, ascending) between the spans of
/// two D-orthonormal bases.
pub fn principal_angles_d(a: &DMatrix<f64>, b: &DMatrix<f64>, d: &MassDiag) -> Vec<f64> {
    let n = a.nrows();
    let dv = d.as_slice();
    let scale = |m: &DMatrix<f64>| {
        let mut out = m.clone();
        for mut col in out.column_iter_mut() {
            for i in 0..n {
                col[i] *= dv[i].sqrt();
            }
        }
        out
    };
    let w = scale(a).transpose() * scale(b);
    let svd = w.svd(false, false);
    let mut cosines: Vec<f64> = svd.singular_values.iter().map(|&s| s.clamp(0.0, 1.0)).collect();
    cosines.sort_by(|x, y| y.total_cmp(x));
    cosines.into_iter().map(|c| c.acos()).collect()
}

/// Reconstruction error table rows as CSV: `basis,N,rel_error`.
pub fn write_error_table<W: std::io::Write>(
    rows: &[(String, usize, f64)],
    w: &mut W,
) -> std::io::Result<()> {
    writeln!(w, "basis,N,rel_error")?;
    for (basis, n, err) in rows {
        writeln!(w, "{basis},{n},{err}")?;
    }
    Ok(())
}
