//! ADMM solver for the sparse-mode model: minimize
//! `(1/mu) ||Psi||_p^p + Tr(Psi^T L_pd Psi)` subject to `Psi^T D Psi = I`,
//! by splitting into a D-orthonormal projection (Psi), an elementwise Lp
//! shrinkage (S), a smoothing linear solve (E) and two dual updates.

pub mod prox;
pub mod updates;

pub use prox::{lp_threshold, prox_lp_scalar};
pub use updates::{
    e_update, e_update_seq, psi_update, psi_update_seq, s_update, s_update_seq, EOperator,
};

use crate::mesh::TriMesh;
use crate::operators::{cotan_stiffness, lumped_mass, weighted_lp_norm_p, MassDiag, MassLumping};
use crate::sparse::SparseSymMatrix;
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;

/// Parameters of one ADMM solve.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    /// Sparsity penalty weight; larger means wider supports.
    pub mu: f64,
    /// Sparsity exponent in (0, 1].
    pub p: f64,
    /// ADMM penalty parameter.
    pub rho: f64,
    /// Stop when the relative change of Psi drops below this.
    pub tol_rel_change: f64,
    pub max_iter: usize,
    /// Fixed-point rounds inside the scalar prox.
    pub newton_iters: usize,
    /// Seed for the random initial iterate.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mu: 100.0,
            p: 0.8,
            rho: 1.0,
            tol_rel_change: 1e-3,
            max_iter: 5000,
            newton_iters: 8,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu = {} must be positive", self.mu)));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::InvalidParameter(format!("p = {} must be in (0, 1]", self.p)));
        }
        if !(self.rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho = {} must be positive", self.rho)));
        }
        if !(self.tol_rel_change > 0.0) {
            return Err(Error::InvalidParameter("tol_rel_change must be positive".into()));
        }
        if self.max_iter == 0 || self.newton_iters == 0 {
            return Err(Error::InvalidParameter("iteration counts must be positive".into()));
        }
        Ok(())
    }
}

/// One convergence-history row.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub err_psi: f64,
    pub primal_residual_sq: f64,
    pub energy: f64,
    pub ortho_error: f64,
}

/// Full primal/dual state of a solve, with its history.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub psi: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub u_s: DMatrix<f64>,
    pub u_e: DMatrix<f64>,
    pub iter: usize,
    pub history: Vec<IterRecord>,
}

/// A D-orthonormal set of modes with its provenance.
#[derive(Debug, Clone)]
pub struct ModeSet {
    pub psi: DMatrix<f64>,
    pub mu: f64,
    pub p: f64,
    pub converged: bool,
    pub iters: usize,
}

impl ModeSet {
    pub fn n_vertices(&self) -> usize {
        self.psi.nrows()
    }

    pub fn num_modes(&self) -> usize {
        self.psi.ncols()
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.psi.as_slice()[k * self.psi.nrows()..(k + 1) * self.psi.nrows()]
    }
}

/// Everything that depends only on (mesh, lumping, rho): the PSD stiffness,
/// the mass diagonal, and the factorized E-system. Built once, shared by all
/// solves on the mesh.
#[derive(Debug)]
pub struct SolveContext {
    l_pd: SparseSymMatrix,
    d: MassDiag,
    e_op: EOperator,
}

impl SolveContext {
    pub fn new(l_pd: SparseSymMatrix, d: MassDiag, rho: f64) -> Result<Self> {
        if d.len() != l_pd.n() {
            return Err(Error::InvalidParameter(format!(
                "mass has {} entries for a {}-dim operator",
                d.len(),
                l_pd.n()
            )));
        }
        let e_op = EOperator::new(&l_pd, rho)?;
        Ok(SolveContext { l_pd, d, e_op })
    }

    /// Assemble operators from a mesh and build the context.
    pub fn for_mesh(mesh: &TriMesh, lumping: MassLumping, rho: f64) -> Result<Self> {
        let l_pd = cotan_stiffness(mesh)?.l_pd();
        let d = lumped_mass(mesh, lumping)?;
        SolveContext::new(l_pd, d, rho)
    }

    pub fn n(&self) -> usize {
        self.l_pd.n()
    }

    pub fn l_pd(&self) -> &SparseSymMatrix {
        &self.l_pd
    }

    pub fn d(&self) -> &MassDiag {
        &self.d
    }

    pub fn e_op(&self) -> &EOperator {
        &self.e_op
    }

    pub fn rho(&self) -> f64 {
        self.e_op.rho()
    }
}

/// Objective value `(1/mu) ||Psi||_p^p + Tr(Psi^T L_pd Psi)` with the
/// mass-weighted Lp norm.
pub fn energy(l_pd: &SparseSymMatrix, d: &MassDiag, psi: &DMatrix<f64>, mu: f64, p: f64) -> f64 {
    let lp = if mu.is_infinite() {
        0.0
    } else {
        weighted_lp_norm_p(psi, d, p).unwrap_or(f64::NAN) / mu
    };
    lp + trace_quadratic(l_pd, psi)
}

/// `Tr(Psi^T A Psi)`, column by column.
pub fn trace_quadratic(a: &SparseSymMatrix, psi: &DMatrix<f64>) -> f64 {
    let n = psi.nrows();
    let s = psi.as_slice();
    (0..psi.ncols()).map(|k| a.quadratic_form(&s[k * n..(k + 1) * n])).sum()
}

/// Run the ADMM iteration for `num_modes` modes.
///
/// The initial iterate is a seeded uniform random matrix projected to the
/// D-orthonormal frames; S and E start equal to it and the duals at zero.
/// Stops when the relative change of Psi falls below `tol_rel_change` or at
/// `max_iter` (returned with `converged = false`). A rank failure in the
/// projection triggers one automatic restart with a reseeded iterate.
pub fn solve(ctx: &SolveContext, num_modes: usize, cfg: &SolverConfig) -> Result<(ModeSet, AdmmState)> {
    cfg.validate()?;
    if cfg.rho != ctx.rho() {
        return Err(Error::InvalidParameter(format!(
            "config rho = {} differs from the factorized context rho = {}",
            cfg.rho,
            ctx.rho()
        )));
    }
    if num_modes == 0 || num_modes > ctx.n() {
        return Err(Error::InvalidParameter(format!(
            "num_modes = {num_modes} must be in [1, {}]",
            ctx.n()
        )));
    }
    match solve_attempt(ctx, num_modes, cfg, cfg.seed) {
        Err(Error::RankDeficient(_)) => {
            log::warn!("rank-deficient iterate; restarting with reseeded initializer");
            solve_attempt(ctx, num_modes, cfg, cfg.seed.wrapping_add(1))
        }
        other => other,
    }
}

fn solve_attempt(
    ctx: &SolveContext,
    num_modes: usize,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<(ModeSet, AdmmState)> {
    let n = ctx.n();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::from_iterator(
        n,
        num_modes,
        std::iter::repeat_with(|| rng.random_range(-1.0..1.0)).take(n * num_modes),
    );
    let mut psi = updates::d_orthonormalize(&raw, ctx.d())?;
    let mut s = psi.clone();
    let mut e = psi.clone();
    let mut u_s = DMatrix::zeros(n, num_modes);
    let mut u_e = DMatrix::zeros(n, num_modes);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iter = 0;

    for k in 1..=cfg.max_iter {
        iter = k;
        let psi_next = updates::psi_update(&s, &e, &u_s, &u_e, cfg.rho, ctx.d())?;
        s = updates::s_update(&psi_next, &u_s, cfg, ctx.d());
        e = updates::e_update(&psi_next, &u_e, ctx.e_op())?;
        axpy(&mut u_s, -cfg.rho, &psi_next, &s);
        axpy(&mut u_e, -cfg.rho, &psi_next, &e);

        let err_psi = (&psi_next - &psi).norm() / psi.norm();
        let primal_residual_sq =
            (&psi_next - &s).norm_squared() + (&psi_next - &e).norm_squared();
        let energy = energy(ctx.l_pd(), ctx.d(), &psi_next, cfg.mu, cfg.p);
        let ortho_error = updates::ortho_error(&psi_next, ctx.d());
        history.push(IterRecord { iter: k, err_psi, primal_residual_sq, energy, ortho_error });
        psi = psi_next;
        // the first projection returns the initializer unchanged (S = E =
        // Psi, zero duals), so the relative-change rule only applies once
        // the duals have moved
        if k > 1 && err_psi < cfg.tol_rel_change {
            converged = true;
            break;
        }
    }

    let modes = ModeSet { psi: psi.clone(), mu: cfg.mu, p: cfg.p, converged, iters: iter };
    debug_assert!(gram_fro_defect(&modes.psi, ctx.d()) <= 1e-6);
    Ok((modes, AdmmState { psi, s, e, u_s, u_e, iter, history }))
}

/// `u += alpha * (a - b)`, elementwise.
fn axpy(u: &mut DMatrix<f64>, alpha: f64, a: &DMatrix<f64>, b: &DMatrix<f64>) {
    let (us, as_, bs) = (u.as_mut_slice(), a.as_slice(), b.as_slice());
    for i in 0..us.len() {
        us[i] += alpha * (as_[i] - bs[i]);
    }
}

fn gram_fro_defect(psi: &DMatrix<f64>, d: &MassDiag) -> f64 {
    let g = updates::gram(psi, d);
    let mut acc = 0.0;
    for a in 0..g.nrows() {
        for b in 0..g.ncols() {
            let t = if a == b { 1.0 } else { 0.0 };
            acc += (g[(a, b)] - t) * (g[(a, b)] - t);
        }
    }
    acc.sqrt()
}

/// First-order stationarity diagnostic: the norm of the constraint-tangential
/// part of the objective gradient, evaluated off the zero entries only.
///
/// The gradient of the objective at `Psi` (off zeros) is
/// `G = (1/mu) * nu + 2 L_pd Psi` with `nu_ij = d_i p sign(Psi_ij)
/// |Psi_ij|^(p-1)`; at a constrained stationary point `G = 2 D Psi Lambda'`
/// for some symmetric multiplier, so after mapping through `D^(-1/2)` the
/// residual is the part of the gradient orthogonal to the frame.
pub fn stationarity_residual(
    modes: &ModeSet,
    l_pd: &SparseSymMatrix,
    d: &MassDiag,
    mu: f64,
    p: f64,
) -> f64 {
    let psi = &modes.psi;
    let (n, nm) = (psi.nrows(), psi.ncols());
    let inv_mu = if mu.is_infinite() { 0.0 } else { 1.0 / mu };

    // an entry is a zero of the mode when it falls under the support floor
    let floors: Vec<f64> = (0..nm)
        .map(|k| {
            let max = modes.column(k).iter().fold(0f64, |a, v| a.max(v.abs()));
            (crate::basis::SUPPORT_REL_FLOOR * max).max(1e-10)
        })
        .collect();

    // G = (1/mu) nu + 2 L_pd Psi
    let mut g = DMatrix::zeros(n, nm);
    {
        let (gs, ps) = (g.as_mut_slice(), psi.as_slice());
        let dv = d.as_slice();
        let mut lcol = vec![0f64; n];
        for k in 0..nm {
            l_pd.mul_vec(&ps[k * n..(k + 1) * n], &mut lcol);
            for i in 0..n {
                let v = ps[k * n + i];
                let nu = if v.abs() > floors[k] {
                    dv[i] * p * v.signum() * v.abs().powf(p - 1.0)
                } else {
                    0.0
                };
                gs[k * n + i] = inv_mu * nu + 2.0 * lcol[i];
            }
        }
    }

    // map through D^(1/2): phi = D^(1/2) Psi is orthonormal
    let sqrt_d: Vec<f64> = d.as_slice().iter().map(|v| v.sqrt()).collect();
    let mut phi = psi.clone();
    let mut gt = g;
    for k in 0..nm {
        for i in 0..n {
            phi[(i, k)] *= sqrt_d[i];
            gt[(i, k)] /= sqrt_d[i];
        }
    }
    let w = phi.transpose() * &gt;
    let sym = (&w + w.transpose()) * 0.5;
    let r = &gt - &phi * sym;

    let mut acc = 0.0;
    for k in 0..nm {
        for i in 0..n {
            if psi[(i, k)].abs() > floors[k] {
                acc += r[(i, k)] * r[(i, k)];
            }
        }
    }
    acc.sqrt()
}

/// Write the convergence history as CSV.
pub fn write_history_csv<W: std::io::Write>(history: &[IterRecord], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "iter,err_psi,primal_residual_sq,energy,ortho_error")?;
    for r in history {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.iter, r.err_psi, r.primal_residual_sq, r.energy, r.ortho_error
        )?;
    }
    Ok(())
}
