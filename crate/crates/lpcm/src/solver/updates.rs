//! The three ADMM primal updates: D-orthonormal projection for the mode
//! matrix, elementwise Lp shrinkage for the sparsity variable, and a cached
//! SPD direct solve for the smoothing variable.
//!
//! Each update has a `_seq` twin used by the benchmark suite to compare the
//! sequential fallback against the rayon path; the unsuffixed functions
//! dispatch on the `parallel` feature.

use super::prox::ProxRow;
use super::SolverConfig;
use crate::operators::MassDiag;
use crate::parallel;
use crate::sparse::{Ldlt, SparseSymMatrix};
use crate::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};

/// Relative eigenvalue floor below which the Gram matrix counts as singular.
const RANK_TOL: f64 = 1e-12;

/// Orthonormality defect after projection is polished below this bound.
const ORTHO_POLISH_TOL: f64 = 1e-9;

/// Required relative residual of every linear solve in the E update.
pub const E_SOLVE_TOL: f64 = 1e-10;

/// D-weighted Gram matrix `Y^T D Y` (N x N).
///
/// Every entry is an independent dot product accumulated in index order, so
/// the result does not depend on the thread count.
pub fn gram(y: &DMatrix<f64>, d: &MassDiag) -> DMatrix<f64> {
    let (n, nm) = (y.nrows(), y.ncols());
    let dv = d.as_slice();
    let ys = y.as_slice();
    let mut entries = vec![0f64; nm * nm];
    parallel::fill_indexed(&mut entries, |idx| {
        let (a, b) = (idx / nm, idx % nm);
        if a > b {
            return 0.0;
        }
        let ca = &ys[a * n..(a + 1) * n];
        let cb = &ys[b * n..(b + 1) * n];
        let mut acc = 0.0;
        for i in 0..n {
            acc += dv[i] * ca[i] * cb[i];
        }
        acc
    });
    let mut g = DMatrix::zeros(nm, nm);
    for a in 0..nm {
        for b in a..nm {
            let v = entries[a * nm + b];
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    g
}

fn gram_seq(y: &DMatrix<f64>, d: &MassDiag) -> DMatrix<f64> {
    let (n, nm) = (y.nrows(), y.ncols());
    let dv = d.as_slice();
    let ys = y.as_slice();
    let mut g = DMatrix::zeros(nm, nm);
    for a in 0..nm {
        for b in a..nm {
            let ca = &ys[a * n..(a + 1) * n];
            let cb = &ys[b * n..(b + 1) * n];
            let mut acc = 0.0;
            for i in 0..n {
                acc += dv[i] * ca[i] * cb[i];
            }
            g[(a, b)] = acc;
            g[(b, a)] = acc;
        }
    }
    g
}

/// Max-norm of `Psi^T D Psi - I`.
pub fn ortho_error(psi: &DMatrix<f64>, d: &MassDiag) -> f64 {
    let g = gram(psi, d);
    let nm = g.nrows();
    let mut err = 0f64;
    for a in 0..nm {
        for b in 0..nm {
            let target = if a == b { 1.0 } else { 0.0 };
            err = err.max((g[(a, b)] - target).abs());
        }
    }
    err
}

/// Project `y` onto the D-orthonormal frames: `y V S^(-1/2) V^T` where
/// `V S V^T = y^T D y`. Errors when the Gram matrix is numerically singular.
pub fn d_orthonormalize(y: &DMatrix<f64>, d: &MassDiag) -> Result<DMatrix<f64>> {
    let mut psi = project(y, &gram(y, d))?;
    // one projection leaves a defect on the order of the Gram condition
    // number times machine epsilon; repeat until it is negligible
    for _ in 0..3 {
        if ortho_error(&psi, d) <= ORTHO_POLISH_TOL {
            break;
        }
        psi = project(&psi, &gram(&psi, d))?;
    }
    Ok(psi)
}

fn d_orthonormalize_seq(y: &DMatrix<f64>, d: &MassDiag) -> Result<DMatrix<f64>> {
    let mut psi = project(y, &gram_seq(y, d))?;
    for _ in 0..3 {
        let g = gram_seq(&psi, d);
        let mut err = 0f64;
        for a in 0..g.nrows() {
            for b in 0..g.ncols() {
                let target = if a == b { 1.0 } else { 0.0 };
                err = err.max((g[(a, b)] - target).abs());
            }
        }
        if err <= ORTHO_POLISH_TOL {
            break;
        }
        psi = project(&psi, &g)?;
    }
    Ok(psi)
}

fn project(y: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let nm = g.nrows();
    let eig = SymmetricEigen::new(g.clone());
    let mut max = f64::MIN;
    let mut min = f64::MAX;
    for &s in eig.eigenvalues.iter() {
        max = max.max(s);
        min = min.min(s);
    }
    if !(min > RANK_TOL * max) || !min.is_finite() {
        return Err(Error::RankDeficient(min / max));
    }
    // V diag(s^-1/2) V^T
    let mut m = DMatrix::zeros(nm, nm);
    for a in 0..nm {
        for b in 0..nm {
            let mut acc = 0.0;
            for k in 0..nm {
                acc += eig.eigenvectors[(a, k)] * eig.eigenvectors[(b, k)]
                    / eig.eigenvalues[k].sqrt();
            }
            m[(a, b)] = acc;
        }
    }
    Ok(y * m)
}

/// Closed-form solution of the orthogonality-constrained subproblem: the
/// D-orthonormal matrix closest to `Y = (S + U_S/rho + E + U_E/rho) / 2`
/// in the Frobenius norm, via the N x N eigendecomposition of `Y^T D Y`.
pub fn psi_update(
    s: &DMatrix<f64>,
    e: &DMatrix<f64>,
    u_s: &DMatrix<f64>,
    u_e: &DMatrix<f64>,
    rho: f64,
    d: &MassDiag,
) -> Result<DMatrix<f64>> {
    let y = combine_y(s, e, u_s, u_e, rho);
    d_orthonormalize(&y, d)
}

pub fn psi_update_seq(
    s: &DMatrix<f64>,
    e: &DMatrix<f64>,
    u_s: &DMatrix<f64>,
    u_e: &DMatrix<f64>,
    rho: f64,
    d: &MassDiag,
) -> Result<DMatrix<f64>> {
    let y = combine_y(s, e, u_s, u_e, rho);
    d_orthonormalize_seq(&y, d)
}

fn combine_y(
    s: &DMatrix<f64>,
    e: &DMatrix<f64>,
    u_s: &DMatrix<f64>,
    u_e: &DMatrix<f64>,
    rho: f64,
) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(s.nrows(), s.ncols());
    let inv = 0.5 / rho;
    let (ys, ss, es, uss, ues) =
        (y.as_mut_slice(), s.as_slice(), e.as_slice(), u_s.as_slice(), u_e.as_slice());
    for i in 0..ys.len() {
        ys[i] = 0.5 * (ss[i] + es[i]) + inv * (uss[i] + ues[i]);
    }
    y
}

/// Elementwise Lp shrinkage: `S_ij = prox(q_ij, d_i / (rho mu), p)` with
/// `q_ij = Psi_ij - (U_S)_ij / rho`.
pub fn s_update(
    psi: &DMatrix<f64>,
    u_s: &DMatrix<f64>,
    cfg: &SolverConfig,
    d: &MassDiag,
) -> DMatrix<f64> {
    let n = psi.nrows();
    let rows = prox_rows(cfg, d);
    let mut out = DMatrix::zeros(n, psi.ncols());
    let (ps, us) = (psi.as_slice(), u_s.as_slice());
    let rho = cfg.rho;
    let (p, iters) = (cfg.p, cfg.newton_iters);
    parallel::for_each_chunk_mut(out.as_mut_slice(), n, |k, col| {
        let off = k * n;
        for i in 0..n {
            let q = ps[off + i] - us[off + i] / rho;
            col[i] = rows[i].apply(q, p, iters);
        }
    });
    out
}

pub fn s_update_seq(
    psi: &DMatrix<f64>,
    u_s: &DMatrix<f64>,
    cfg: &SolverConfig,
    d: &MassDiag,
) -> DMatrix<f64> {
    let n = psi.nrows();
    let rows = prox_rows(cfg, d);
    let mut out = DMatrix::zeros(n, psi.ncols());
    let (ps, us) = (psi.as_slice(), u_s.as_slice());
    parallel::for_each_chunk_mut_seq(out.as_mut_slice(), n, |k, col| {
        let off = k * n;
        for i in 0..n {
            let q = ps[off + i] - us[off + i] / cfg.rho;
            col[i] = rows[i].apply(q, cfg.p, cfg.newton_iters);
        }
    });
    out
}

fn prox_rows(cfg: &SolverConfig, d: &MassDiag) -> Vec<ProxRow> {
    d.as_slice()
        .iter()
        .map(|di| ProxRow::new(di / (cfg.rho * cfg.mu), cfg.p))
        .collect()
}

/// The SPD system `(rho I + 2 L_pd) E = rho Psi - U_E`, factorized once and
/// reused for every iteration and every column.
#[derive(Debug)]
pub struct EOperator {
    matrix: SparseSymMatrix,
    factor: Ldlt,
    rho: f64,
}

impl EOperator {
    pub fn new(l_pd: &SparseSymMatrix, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho = {rho} must be positive")));
        }
        let matrix = l_pd.scaled(2.0).plus_diag(&vec![rho; l_pd.n()]);
        let factor = Ldlt::factor(&matrix)?;
        Ok(EOperator { matrix, factor, rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn matrix(&self) -> &SparseSymMatrix {
        &self.matrix
    }

    fn solve_column(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        let rel = self.factor.solve_refined_into(&self.matrix, b, x, E_SOLVE_TOL, 4);
        if rel > E_SOLVE_TOL {
            return Err(Error::SolveResidual { residual: rel, tol: E_SOLVE_TOL });
        }
        Ok(())
    }
}

/// Smoothing update: one factorized solve per column, columns independent.
pub fn e_update(psi: &DMatrix<f64>, u_e: &DMatrix<f64>, op: &EOperator) -> Result<DMatrix<f64>> {
    let (n, nm) = (psi.nrows(), psi.ncols());
    let rhs = e_rhs(psi, u_e, op.rho);
    let mut out = DMatrix::zeros(n, nm);
    let rs = rhs.as_slice();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.as_mut_slice()
            .par_chunks_mut(n)
            .enumerate()
            .try_for_each(|(k, col)| op.solve_column(&rs[k * n..(k + 1) * n], col))?;
    }
    #[cfg(not(feature = "parallel"))]
    for (k, col) in out.as_mut_slice().chunks_mut(n).enumerate() {
        op.solve_column(&rs[k * n..(k + 1) * n], col)?;
    }
    Ok(out)
}

pub fn e_update_seq(
    psi: &DMatrix<f64>,
    u_e: &DMatrix<f64>,
    op: &EOperator,
) -> Result<DMatrix<f64>> {
    let (n, nm) = (psi.nrows(), psi.ncols());
    let rhs = e_rhs(psi, u_e, op.rho);
    let mut out = DMatrix::zeros(n, nm);
    let rs = rhs.as_slice();
    for (k, col) in out.as_mut_slice().chunks_mut(n).enumerate() {
        op.solve_column(&rs[k * n..(k + 1) * n], col)?;
    }
    Ok(out)
}

fn e_rhs(psi: &DMatrix<f64>, u_e: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let mut rhs = DMatrix::zeros(psi.nrows(), psi.ncols());
    let (rs, ps, us) = (rhs.as_mut_slice(), psi.as_slice(), u_e.as_slice());
    for i in 0..rs.len() {
        rs[i] = rho * ps[i] - us[i];
    }
    rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{cotan_stiffness, lumped_mass, MassLumping};
    use crate::solver::prox::prox_lp_scalar;
    use crate::synth;
    use rand::Rng;
    use rand::SeedableRng;

    fn unit_mass(n: usize) -> MassDiag {
        MassDiag::new(vec![1.0; n]).unwrap()
    }

    fn random_matrix(n: usize, nm: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, nm, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_mass_orthonormal_input_is_fixed_point() {
        // Y with orthonormal columns and D = I: psi = Y
        let q = random_matrix(30, 3, 1);
        let d = unit_mass(30);
        let q = d_orthonormalize(&q, &d).unwrap();
        let psi = d_orthonormalize(&q, &d).unwrap();
        assert!((&psi - &q).norm() < 1e-12);
    }

    #[test]
    fn column_scaling_cancels() {
        let q = random_matrix(30, 3, 2);
        let d = unit_mass(30);
        let q = d_orthonormalize(&q, &d).unwrap();
        let y = &q * 5.0;
        let psi = d_orthonormalize(&y, &d).unwrap();
        assert!((&psi - &q).norm() < 1e-10);
    }

    #[test]
    fn projection_is_closest_among_random_samples() {
        // derived oracle: the projection of Y must beat 1000 random
        // D-orthonormal frames in Frobenius distance to Y
        let n = 50;
        let nm = 4;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let d = MassDiag::new((0..n).map(|_| rng.random_range(0.2..3.0)).collect()).unwrap();
        let y = random_matrix(n, nm, 4);
        let psi = d_orthonormalize(&y, &d).unwrap();
        assert!(ortho_error(&psi, &d) <= 1e-9);
        let dist = (&psi - &y).norm();
        for seed in 0..1000 {
            let cand = d_orthonormalize(&random_matrix(n, nm, 100 + seed), &d).unwrap();
            assert!((&cand - &y).norm() + 1e-12 >= dist, "sample {seed} beat the projection");
        }
    }

    #[test]
    fn rank_deficient_reported() {
        let mut y = random_matrix(20, 3, 5);
        let col0: Vec<f64> = y.column(0).iter().copied().collect();
        y.set_column(2, &nalgebra::DVector::from_vec(col0));
        let d = unit_mass(20);
        assert!(matches!(
            d_orthonormalize(&y, &d),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn s_update_zero_inputs() {
        let psi = DMatrix::zeros(10, 2);
        let u_s = DMatrix::zeros(10, 2);
        let cfg = SolverConfig { mu: 10.0, p: 0.8, ..SolverConfig::default() };
        let d = unit_mass(10);
        let s = s_update(&psi, &u_s, &cfg, &d);
        assert_eq!(s, DMatrix::zeros(10, 2));
    }

    #[test]
    fn s_update_matches_scalar_prox() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 20;
        let psi = random_matrix(n, 3, 8);
        let u_s = random_matrix(n, 3, 9);
        let d = MassDiag::new((0..n).map(|_| rng.random_range(0.2..3.0)).collect()).unwrap();
        let cfg = SolverConfig { mu: 2.0, p: 0.8, rho: 1.5, ..SolverConfig::default() };
        let s = s_update(&psi, &u_s, &cfg, &d);
        for j in 0..3 {
            for i in 0..n {
                let q = psi[(i, j)] - u_s[(i, j)] / cfg.rho;
                let w = d.get(i) / (cfg.rho * cfg.mu);
                assert_eq!(s[(i, j)], prox_lp_scalar(q, w, cfg.p, cfg.newton_iters));
            }
        }
        assert_eq!(s, s_update_seq(&psi, &u_s, &cfg, &d));
    }

    #[test]
    fn s_update_entries_are_per_entry_minima() {
        // each output entry beats 10 random perturbations of itself
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let n = 20;
        let psi = random_matrix(n, 3, 18);
        let u_s = random_matrix(n, 3, 19);
        let d = MassDiag::new((0..n).map(|_| rng.random_range(0.2..3.0)).collect()).unwrap();
        let cfg = SolverConfig { mu: 1.0, p: 0.5, ..SolverConfig::default() };
        let s = s_update(&psi, &u_s, &cfg, &d);
        let f = |s: f64, q: f64, w: f64| w * s.abs().powf(cfg.p) + 0.5 * (s - q) * (s - q);
        for j in 0..3 {
            for i in 0..n {
                let q = psi[(i, j)] - u_s[(i, j)] / cfg.rho;
                let w = d.get(i) / (cfg.rho * cfg.mu);
                let fs = f(s[(i, j)], q, w);
                for _ in 0..10 {
                    let cand = s[(i, j)] + rng.random_range(-0.5..0.5);
                    assert!(fs <= f(cand, q, w) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn e_update_identity_when_l_zero() {
        let l = SparseSymMatrix::from_triplets(8, &[]).unwrap();
        let op = EOperator::new(&l, 2.0).unwrap();
        let psi = random_matrix(8, 2, 20);
        let u_e = random_matrix(8, 2, 21);
        let e = e_update(&psi, &u_e, &op).unwrap();
        // (rho I) E = rho Psi - U_E  =>  E = Psi - U_E / rho
        for j in 0..2 {
            for i in 0..8 {
                let expect = psi[(i, j)] - u_e[(i, j)] / 2.0;
                assert!((e[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn e_update_zero_inputs_stay_zero() {
        let m = synth::octahedron();
        let l_pd = cotan_stiffness(&m).unwrap().l_pd();
        let op = EOperator::new(&l_pd, 1.0).unwrap();
        let psi = DMatrix::zeros(6, 2);
        let u_e = DMatrix::zeros(6, 2);
        let e = e_update(&psi, &u_e, &op).unwrap();
        assert_eq!(e, DMatrix::zeros(6, 2));
    }

    #[test]
    fn e_update_matches_dense_solve_on_octahedron() {
        let m = synth::octahedron();
        let l_pd = cotan_stiffness(&m).unwrap().l_pd();
        let rho = 1.0;
        let op = EOperator::new(&l_pd, rho).unwrap();
        let psi = random_matrix(6, 3, 22);
        let u_e = random_matrix(6, 3, 23);
        let e = e_update(&psi, &u_e, &op).unwrap();
        assert_eq!(e, e_update_seq(&psi, &u_e, &op).unwrap());

        let dense = op.matrix().to_dense();
        let rhs = &psi * rho - &u_e;
        let expected = dense.clone().lu().solve(&rhs).unwrap();
        assert!((&e - &expected).norm() < 1e-10);

        // explicit residual check
        let res = dense * &e - rhs.clone();
        assert!(res.norm() / rhs.norm() <= 1e-10);
    }

    #[test]
    fn e_update_is_linear() {
        let m = synth::icosphere(1);
        let l_pd = cotan_stiffness(&m).unwrap().l_pd();
        let op = EOperator::new(&l_pd, 0.7).unwrap();
        let n = m.n_vertices();
        let psi1 = random_matrix(n, 2, 30);
        let psi2 = random_matrix(n, 2, 31);
        let z = DMatrix::zeros(n, 2);
        let e1 = e_update(&psi1, &z, &op).unwrap();
        let e2 = e_update(&psi2, &z, &op).unwrap();
        let e12 = e_update(&(&psi1 + &psi2), &z, &op).unwrap();
        assert!((&e12 - (&e1 + &e2)).norm() < 1e-8);
    }

    #[test]
    fn psi_update_variants_agree() {
        let n = 40;
        let d = lumped_mass(&synth::icosphere(1), MassLumping::Full).unwrap();
        let nverts = d.len();
        let _ = n;
        let s = random_matrix(nverts, 3, 40);
        let e = random_matrix(nverts, 3, 41);
        let u_s = random_matrix(nverts, 3, 42);
        let u_e = random_matrix(nverts, 3, 43);
        let a = psi_update(&s, &e, &u_s, &u_e, 1.3, &d).unwrap();
        let b = psi_update_seq(&s, &e, &u_s, &u_e, 1.3, &d).unwrap();
        assert_eq!(a, b);
        assert!(ortho_error(&a, &d) <= 1e-9);
    }
}
