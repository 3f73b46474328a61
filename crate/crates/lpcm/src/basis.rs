//! Outer loops that grow a mode basis until its supports cover the mesh:
//! either the mode count N grows at fixed mu, or mu grows geometrically at
//! fixed N. Every round re-solves from a fresh seeded initializer; there is
//! no warm starting, so reruns are bit-identical.

use crate::solver::{solve, IterRecord, ModeSet, SolveContext, SolverConfig};
use crate::{Error, Result};

/// A vertex counts as inside a mode's support when its magnitude exceeds
/// this fraction of the column maximum.
///
/// The floor must sit above the consensus gap the stopping rule leaves in
/// the mode matrix (out-of-support entries settle near 1e-4 of the column
/// maximum at the default tolerance, orders below genuine support values).
pub const SUPPORT_REL_FLOOR: f64 = 1e-2;

/// Which vertices are uncovered by every mode's support.
#[derive(Debug, Clone)]
pub struct CoverageReport {
    pub uncovered_vertices: Vec<usize>,
    pub covered_fraction: f64,
}

impl CoverageReport {
    pub fn is_full(&self) -> bool {
        self.uncovered_vertices.is_empty()
    }
}

/// One basis-growing round.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub num_modes: usize,
    pub mu: f64,
    pub covered_fraction: f64,
    pub solve_iters: usize,
    pub wall_seconds: f64,
}

/// Final mode set of a growing run plus its per-round log.
#[derive(Debug, Clone)]
pub struct BasisResult {
    pub modes: ModeSet,
    pub coverage: CoverageReport,
    pub rounds: Vec<RoundRecord>,
    /// Convergence history of the final round's solve.
    pub history: Vec<IterRecord>,
    /// False when the growth cap was reached with vertices still uncovered.
    pub covered: bool,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct GrowNConfig {
    pub n_start: usize,
    pub n_max: usize,
}

impl Default for GrowNConfig {
    fn default() -> Self {
        GrowNConfig { n_start: 2, n_max: 64 }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct GrowMuConfig {
    pub mu_start: f64,
    pub mu_factor: f64,
    pub mu_max: f64,
}

impl Default for GrowMuConfig {
    fn default() -> Self {
        GrowMuConfig { mu_start: 2.0, mu_factor: 4.0, mu_max: 2.0 * 4f64.powi(10) }
    }
}

/// Per-mode support masks over vertices (relative magnitude floor).
pub fn support_masks(modes: &ModeSet) -> Vec<Vec<bool>> {
    let n = modes.n_vertices();
    (0..modes.num_modes())
        .map(|k| {
            let col = modes.column(k);
            let max = col.iter().fold(0f64, |a, v| a.max(v.abs()));
            let floor = SUPPORT_REL_FLOOR * max;
            (0..n).map(|i| col[i].abs() > floor).collect()
        })
        .collect()
}

/// A vertex is covered when it lies in at least one mode's support.
pub fn coverage(modes: &ModeSet) -> CoverageReport {
    let n = modes.n_vertices();
    let masks = support_masks(modes);
    let mut uncovered = Vec::new();
    for i in 0..n {
        if !masks.iter().any(|m| m[i]) {
            uncovered.push(i);
        }
    }
    let covered_fraction = (n - uncovered.len()) as f64 / n as f64;
    CoverageReport { uncovered_vertices: uncovered, covered_fraction }
}

/// Fixed mu, grow N from `n_start` until full coverage (or `n_max`,
/// returning a flagged result).
pub fn build_grow_n(
    ctx: &SolveContext,
    mu: f64,
    cfg: &SolverConfig,
    grow: &GrowNConfig,
) -> Result<BasisResult> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu = {mu} must be positive")));
    }
    let mut cfg = cfg.clone();
    cfg.mu = mu;
    let mut rounds = Vec::new();
    let mut num_modes = grow.n_start;
    let mut round = 0;
    loop {
        round += 1;
        let t0 = std::time::Instant::now();
        let (modes, state) = solve(ctx, num_modes, &cfg)?;
        let report = coverage(&modes);
        rounds.push(RoundRecord {
            round,
            num_modes,
            mu,
            covered_fraction: report.covered_fraction,
            solve_iters: state.iter,
            wall_seconds: t0.elapsed().as_secs_f64(),
        });
        log::info!(
            "grow-N round {round}: N = {num_modes}, covered {:.4}",
            report.covered_fraction
        );
        let covered = report.is_full();
        if covered || num_modes >= grow.n_max.min(ctx.n()) {
            return Ok(BasisResult {
                modes,
                coverage: report,
                rounds,
                history: state.history,
                covered,
            });
        }
        num_modes += 1;
    }
}

/// Fixed N, grow mu by `mu_factor` per round (the first solved value is
/// `mu_start * mu_factor`) until full coverage or `mu_max`.
pub fn build_grow_mu(
    ctx: &SolveContext,
    num_modes: usize,
    cfg: &SolverConfig,
    grow: &GrowMuConfig,
) -> Result<BasisResult> {
    let mut mu = grow.mu_start;
    let mut rounds = Vec::new();
    let mut round = 0;
    let mut best: Option<(ModeSet, CoverageReport, Vec<IterRecord>)> = None;
    loop {
        mu *= grow.mu_factor;
        if mu > grow.mu_max {
            let (modes, coverage, history) = best.ok_or_else(|| {
                Error::InvalidParameter("mu_max below the first scheduled mu".into())
            })?;
            return Ok(BasisResult { modes, coverage, rounds, history, covered: false });
        }
        round += 1;
        let mut round_cfg = cfg.clone();
        round_cfg.mu = mu;
        let t0 = std::time::Instant::now();
        let (modes, state) = solve(ctx, num_modes, &round_cfg)?;
        let report = coverage(&modes);
        rounds.push(RoundRecord {
            round,
            num_modes,
            mu,
            covered_fraction: report.covered_fraction,
            solve_iters: state.iter,
            wall_seconds: t0.elapsed().as_secs_f64(),
        });
        log::info!("grow-mu round {round}: mu = {mu}, covered {:.4}", report.covered_fraction);
        if report.is_full() {
            return Ok(BasisResult {
                modes,
                coverage: report,
                rounds,
                history: state.history,
                covered: true,
            });
        }
        best = Some((modes, report, state.history));
    }
}

/// Greedy maximal-overlap matching between two support-mask families.
/// Returns (index in `prev`, index in `next`) pairs.
pub fn match_modes_by_overlap(prev: &[Vec<bool>], next: &[Vec<bool>]) -> Vec<(usize, usize)> {
    let mut overlaps = Vec::new();
    for (a, ma) in prev.iter().enumerate() {
        for (b, mb) in next.iter().enumerate() {
            let count = ma.iter().zip(mb).filter(|(x, y)| **x && **y).count();
            overlaps.push((count, a, b));
        }
    }
    overlaps.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; prev.len()];
    let mut used_b = vec![false; next.len()];
    let mut pairs = Vec::new();
    for (count, a, b) in overlaps {
        if count == 0 || used_a[a] || used_b[b] {
            continue;
        }
        used_a[a] = true;
        used_b[b] = true;
        pairs.push((a, b));
    }
    pairs
}

/// Write the round log as CSV.
pub fn write_round_log_csv<W: std::io::Write>(
    rounds: &[RoundRecord],
    w: &mut W,
) -> std::io::Result<()> {
    writeln!(w, "round,num_modes,mu,covered_fraction,solve_iters,wall_seconds")?;
    for r in rounds {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.round, r.num_modes, r.mu, r.covered_fraction, r.solve_iters, r.wall_seconds
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::MassLumping;
    use crate::synth;
    use nalgebra::DMatrix;

    fn fake_modes(psi: DMatrix<f64>) -> ModeSet {
        ModeSet { psi, mu: 1.0, p: 0.8, converged: true, iters: 1 }
    }

    #[test]
    fn zero_row_is_uncovered() {
        let mut psi = DMatrix::from_element(5, 2, 1.0);
        psi[(3, 0)] = 0.0;
        psi[(3, 1)] = 0.0;
        let report = coverage(&fake_modes(psi));
        assert_eq!(report.uncovered_vertices, vec![3]);
        assert!((report.covered_fraction - 0.8).abs() < 1e-15);
    }

    #[test]
    fn strictly_positive_matrix_is_fully_covered() {
        let psi = DMatrix::from_element(6, 3, 0.2);
        let report = coverage(&fake_modes(psi));
        assert!(report.is_full());
        assert_eq!(report.covered_fraction, 1.0);
    }

    #[test]
    fn half_supported_column_covers_half() {
        let psi = DMatrix::from_fn(10, 1, |i, _| if i < 5 { 1.0 } else { 0.0 });
        let report = coverage(&fake_modes(psi));
        assert_eq!(report.covered_fraction, 0.5);
        assert_eq!(report.uncovered_vertices.len(), 5);
    }

    #[test]
    fn support_floor_is_relative_to_column_max() {
        let mut psi = DMatrix::zeros(4, 1);
        psi[(0, 0)] = 1.0;
        psi[(1, 0)] = 0.5; // above 1e-2 * 1.0
        psi[(2, 0)] = 1e-3; // below
        let masks = support_masks(&fake_modes(psi));
        assert!(masks[0][0]);
        assert!(masks[0][1]);
        assert!(!masks[0][2]);
        assert!(!masks[0][3]);
    }

    #[test]
    fn grow_mu_visits_the_schedule() {
        let m = synth::icosphere(1);
        let ctx = SolveContext::for_mesh(&m, MassLumping::Full, 1.0).unwrap();
        let cfg = SolverConfig::default();
        let result = build_grow_mu(&ctx, 2, &cfg, &GrowMuConfig::default()).unwrap();
        assert!(result.covered);
        for (i, r) in result.rounds.iter().enumerate() {
            assert_eq!(r.mu, 2.0 * 4f64.powi(i as i32 + 1));
        }
        assert_eq!(result.rounds[0].mu, 8.0);
    }

    #[test]
    fn grow_n_weak_sparsity_stops_at_two() {
        let m = synth::icosphere(1);
        let ctx = SolveContext::for_mesh(&m, MassLumping::Full, 1.0).unwrap();
        let cfg = SolverConfig::default();
        let result = build_grow_n(&ctx, 1e6, &cfg, &GrowNConfig::default()).unwrap();
        assert!(result.covered);
        assert_eq!(result.modes.num_modes(), 2);
    }

    #[test]
    fn grow_n_cap_yields_flagged_result() {
        let m = synth::star5(16, 16);
        let ctx = SolveContext::for_mesh(&m, MassLumping::Full, 1.0).unwrap();
        let cfg = SolverConfig { max_iter: 1000, ..SolverConfig::default() };
        let result =
            build_grow_n(&ctx, 8.0, &cfg, &GrowNConfig { n_start: 2, n_max: 3 }).unwrap();
        assert!(!result.covered);
        assert_eq!(result.modes.num_modes(), 3);
        assert!(!result.coverage.is_full());
    }

    #[test]
    fn grow_mu_cap_yields_flagged_result() {
        let m = synth::star5(16, 16);
        let ctx = SolveContext::for_mesh(&m, MassLumping::Full, 1.0).unwrap();
        let cfg = SolverConfig { max_iter: 1000, ..SolverConfig::default() };
        let grow = GrowMuConfig { mu_start: 2.0, mu_factor: 4.0, mu_max: 10.0 };
        let result = build_grow_mu(&ctx, 2, &cfg, &grow).unwrap();
        assert!(!result.covered);
        assert_eq!(result.rounds.len(), 1);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let m = synth::icosphere(1);
        let ctx = SolveContext::for_mesh(&m, MassLumping::Full, 1.0).unwrap();
        let cfg = SolverConfig::default();
        let a = build_grow_mu(&ctx, 2, &cfg, &GrowMuConfig::default()).unwrap();
        let b = build_grow_mu(&ctx, 2, &cfg, &GrowMuConfig::default()).unwrap();
        assert_eq!(a.modes.psi, b.modes.psi);
        assert_eq!(a.rounds.len(), b.rounds.len());
    }

    #[test]
    fn greedy_matching_pairs_by_overlap() {
        let prev = vec![
            vec![true, true, false, false],
            vec![false, false, true, true],
        ];
        let next = vec![
            vec![false, false, true, true],
            vec![true, true, true, false],
        ];
        let pairs = match_modes_by_overlap(&prev, &next);
        assert!(pairs.contains(&(1, 0)));
        assert!(pairs.contains(&(0, 1)));
    }
}
