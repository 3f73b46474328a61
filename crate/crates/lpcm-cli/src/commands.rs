//! Subcommand implementations. Every command loads the mesh, resolves the
//! configuration, runs its pipeline stage(s), writes outputs next to a run
//! manifest, and reports timings.

use crate::config::{OutputFormat, Resolved};
use crate::manifest::{output_path, RunManifest};
use crate::CliError;
use lpcm::basis::{
    build_grow_mu, build_grow_n, coverage, write_round_log_csv, BasisResult, RoundRecord,
};
use lpcm::io::{self, Attributes};
use lpcm::mesh::TriMesh;
use lpcm::segmentation::{patch_report, refine_patches, region_grow, Partition, RefineConfig};
use lpcm::solver::{solve, write_history_csv, SolveContext};
use lpcm::spectral;
use nalgebra::DMatrix;
use std::path::Path;
use std::time::Instant;

pub struct Job<'a> {
    pub input: &'a Path,
    pub out_dir: &'a Path,
    pub resolved: Resolved,
}

impl Job<'_> {
    fn out(&self, suffix: &str) -> std::path::PathBuf {
        output_path(self.out_dir, self.input, suffix)
    }
}

fn load(job: &Job, manifest: &mut RunManifest) -> Result<TriMesh, CliError> {
    let t0 = Instant::now();
    let mesh = io::load_mesh(job.input, None).map_err(CliError::from)?;
    manifest.record_timing("load", t0.elapsed().as_secs_f64());
    log::info!(
        "loaded {}: {} vertices, {} triangles",
        job.input.display(),
        mesh.n_vertices(),
        mesh.n_triangles()
    );
    Ok(mesh)
}

fn build_context(
    mesh: &TriMesh,
    job: &Job,
    manifest: &mut RunManifest,
) -> Result<SolveContext, CliError> {
    let t0 = Instant::now();
    let ctx = SolveContext::for_mesh(mesh, job.resolved.mass_lumping, job.resolved.rho)
        .map_err(CliError::from)?;
    manifest.record_timing("operators", t0.elapsed().as_secs_f64());
    Ok(ctx)
}

/// Step 1 dispatch: both flags = one fixed solve; --mu alone grows N;
/// --num-modes alone grows mu.
fn compute_modes(
    ctx: &SolveContext,
    job: &Job,
    manifest: &mut RunManifest,
) -> Result<BasisResult, CliError> {
    let r = &job.resolved;
    let t0 = Instant::now();
    let result = match (r.mu, r.num_modes) {
        (Some(mu), Some(n)) => {
            let mut cfg = r.solver();
            cfg.mu = mu;
            let (modes, state) = solve(ctx, n, &cfg)?;
            let report = coverage(&modes);
            let covered = report.is_full();
            BasisResult {
                rounds: vec![RoundRecord {
                    round: 1,
                    num_modes: n,
                    mu,
                    covered_fraction: report.covered_fraction,
                    solve_iters: state.iter,
                    wall_seconds: t0.elapsed().as_secs_f64(),
                }],
                history: state.history,
                modes,
                coverage: report,
                covered,
            }
        }
        (Some(mu), None) => build_grow_n(ctx, mu, &r.solver(), &r.grow_n)?,
        (None, Some(n)) => build_grow_mu(ctx, n, &r.solver(), &r.grow_mu)?,
        (None, None) => {
            return Err(CliError::usage(
                "exactly one of --mu (grow N) or --num-modes (grow mu) is required, or both for a single fixed solve",
            ))
        }
    };
    manifest.record_timing("step1", t0.elapsed().as_secs_f64());
    let last = result.rounds.last().expect("at least one round");
    log::info!(
        "step 1 done: N = {}, mu = {}, covered fraction {:.4}",
        last.num_modes,
        last.mu,
        last.covered_fraction
    );
    Ok(result)
}

fn mode_attributes(modes: &lpcm::solver::ModeSet) -> Attributes {
    Attributes {
        vertex_scalars: (0..modes.num_modes())
            .map(|k| (format!("mode_{k}"), modes.column(k).to_vec()))
            .collect(),
        face_labels: None,
    }
}

fn write_mesh_payload(
    path: &Path,
    mesh: &TriMesh,
    attrs: &Attributes,
    format: OutputFormat,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    match format {
        OutputFormat::Ply => io::write_ply(path, mesh, attrs)?,
        OutputFormat::Vtk => io::write_vtk(path, mesh, attrs)?,
    }
    manifest.record_output(path);
    Ok(())
}

fn write_modes_outputs(
    mesh: &TriMesh,
    result: &BasisResult,
    job: &Job,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let fmt = job.resolved.format;
    let modes_path = job.out(&format!("_modes.{}", fmt.extension()));
    write_mesh_payload(&modes_path, mesh, &mode_attributes(&result.modes), fmt, manifest)?;

    let conv_path = job.out("_convergence.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&conv_path)?);
    write_history_csv(&result.history, &mut w)?;
    manifest.record_output(&conv_path);

    let rounds_path = job.out("_rounds.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&rounds_path)?);
    write_round_log_csv(&result.rounds, &mut w)?;
    manifest.record_output(&rounds_path);
    Ok(())
}

fn finish(job: &Job, mut manifest: RunManifest, t_total: Instant) -> Result<(), CliError> {
    manifest.record_timing("total", t_total.elapsed().as_secs_f64());
    let path = job.out("_manifest.json");
    manifest.write(&path)?;
    println!("manifest: {}", path.display());
    Ok(())
}

pub fn cmd_modes(job: &Job) -> Result<(), CliError> {
    let t_total = Instant::now();
    let mut manifest = RunManifest::new("modes", job.input, job.resolved.clone())?;
    let mesh = load(job, &mut manifest)?;
    let ctx = build_context(&mesh, job, &mut manifest)?;
    let result = compute_modes(&ctx, job, &mut manifest)?;
    if !result.covered {
        log::warn!(
            "growth cap reached with {} uncovered vertices",
            result.coverage.uncovered_vertices.len()
        );
    }
    write_modes_outputs(&mesh, &result, job, &mut manifest)?;
    finish(job, manifest, t_total)
}

fn segment_stage(
    mesh: &TriMesh,
    job: &Job,
    manifest: &mut RunManifest,
) -> Result<(BasisResult, Partition), CliError> {
    let (_, components) = mesh.vertex_components();
    if components != 1 {
        return Err(CliError::from(lpcm::Error::NotConnected(components)));
    }
    let ctx = build_context(mesh, job, manifest)?;
    let result = compute_modes(&ctx, job, manifest)?;
    if !result.covered {
        return Err(CliError::from(lpcm::Error::IncompleteCoverage {
            uncovered: result.coverage.uncovered_vertices.len(),
        }));
    }
    let t0 = Instant::now();
    let partition = region_grow(mesh, &result.modes, job.resolved.epsilon)?;
    manifest.record_timing("step2", t0.elapsed().as_secs_f64());
    log::info!("step 2 done: {} parts", partition.num_parts);
    Ok((result, partition))
}

fn write_partition_outputs(
    mesh: &TriMesh,
    partition: &Partition,
    suffix_base: &str,
    job: &Job,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let fmt = job.resolved.format;
    let labels_path = job.out(&format!("{suffix_base}.{}", fmt.extension()));
    let attrs = Attributes {
        vertex_scalars: Vec::new(),
        face_labels: Some(partition.labels.clone()),
    };
    write_mesh_payload(&labels_path, mesh, &attrs, fmt, manifest)?;

    let report = patch_report(mesh, partition)?;
    let parts_path = job.out(&format!("{suffix_base}_parts.json"));
    std::fs::write(&parts_path, serde_json::to_string_pretty(&report).expect("serializes"))?;
    manifest.record_output(&parts_path);
    Ok(())
}

pub fn cmd_segment(job: &Job) -> Result<(), CliError> {
    let t_total = Instant::now();
    let mut manifest = RunManifest::new("segment", job.input, job.resolved.clone())?;
    let mesh = load(job, &mut manifest)?;
    let (result, partition) = segment_stage(&mesh, job, &mut manifest)?;
    write_modes_outputs(&mesh, &result, job, &mut manifest)?;
    write_partition_outputs(&mesh, &partition, "_labels", job, &mut manifest)?;
    finish(job, manifest, t_total)
}

pub fn cmd_patch(job: &Job) -> Result<(), CliError> {
    let t_total = Instant::now();
    let mut manifest = RunManifest::new("patch", job.input, job.resolved.clone())?;
    let mesh = load(job, &mut manifest)?;
    let (result, partition) = segment_stage(&mesh, job, &mut manifest)?;

    let t0 = Instant::now();
    let refine_cfg = RefineConfig {
        solver: job.resolved.solver(),
        grow_mu: job.resolved.grow_mu,
        epsilon: job.resolved.epsilon,
        max_depth: job.resolved.max_depth,
        lumping: job.resolved.mass_lumping,
    };
    let (refined, report, resolved_flag) = refine_patches(&mesh, &partition, &refine_cfg)?;
    manifest.record_timing("step3", t0.elapsed().as_secs_f64());
    if !resolved_flag {
        log::warn!("recursion cap hit; some parts remain out of spec (see patch report)");
    }
    log::info!(
        "step 3 done: {} parts, all_pass = {}",
        refined.num_parts,
        report.all_pass
    );

    write_modes_outputs(&mesh, &result, job, &mut manifest)?;
    write_partition_outputs(&mesh, &refined, "_patches", job, &mut manifest)?;
    let report_path = job.out("_patch_report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report).expect("serializes"))?;
    manifest.record_output(&report_path);
    finish(job, manifest, t_total)
}

pub fn cmd_reconstruct(
    job: &Job,
    basis_kind: &str,
    n_values: &[usize],
    write_geometry: bool,
) -> Result<(), CliError> {
    let t_total = Instant::now();
    let mut manifest = RunManifest::new("reconstruct", job.input, job.resolved.clone())?;
    let mesh = load(job, &mut manifest)?;
    let n = mesh.n_vertices();
    if let Some(&bad) = n_values.iter().find(|&&v| v > n) {
        return Err(CliError::usage(format!(
            "requested basis size {bad} exceeds the vertex count {n}"
        )));
    }
    let ctx = build_context(&mesh, job, &mut manifest)?;
    let coords = DMatrix::from_fn(n, 3, |i, j| mesh.vertex(i)[j]);

    let mut rows: Vec<(String, usize, f64)> = Vec::new();
    let fmt = job.resolved.format;
    let t0 = Instant::now();
    if basis_kind == "mhb" || basis_kind == "both" {
        let max_n = *n_values.iter().max().expect("non-empty");
        let basis = spectral::mhb(ctx.l_pd(), ctx.d(), max_n, Some(job.resolved.seed))?;
        for &k in n_values {
            let sub = basis.phi.columns(0, k).into_owned();
            let recon = spectral::reconstruct(&sub, ctx.d(), &coords);
            rows.push(("mhb".into(), k, spectral::rel_error_d(&coords, &recon, ctx.d())));
            if write_geometry {
                let path = job.out(&format!("_recon_mhb_N{k}.{}", fmt.extension()));
                write_reconstruction(&path, &mesh, &recon, fmt, &mut manifest)?;
            }
        }
    }
    if basis_kind == "lpcm" || basis_kind == "both" {
        for &k in n_values {
            let modes = match job.resolved.mu {
                Some(mu) => {
                    let mut cfg = job.resolved.solver();
                    cfg.mu = mu;
                    solve(&ctx, k, &cfg)?.0
                }
                None => build_grow_mu(&ctx, k, &job.resolved.solver(), &job.resolved.grow_mu)?.modes,
            };
            let recon = spectral::reconstruct(&modes.psi, ctx.d(), &coords);
            rows.push(("lpcm".into(), k, spectral::rel_error_d(&coords, &recon, ctx.d())));
            if write_geometry {
                let path = job.out(&format!("_recon_lpcm_N{k}.{}", fmt.extension()));
                write_reconstruction(&path, &mesh, &recon, fmt, &mut manifest)?;
            }
        }
    }
    manifest.record_timing("reconstruct", t0.elapsed().as_secs_f64());

    let csv_path = job.out("_recon_errors.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
    spectral::write_error_table(&rows, &mut w)?;
    manifest.record_output(&csv_path);
    println!("error table: {}", csv_path.display());
    finish(job, manifest, t_total)
}

fn write_reconstruction(
    path: &Path,
    mesh: &TriMesh,
    recon: &DMatrix<f64>,
    fmt: OutputFormat,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let verts: Vec<[f64; 3]> = (0..mesh.n_vertices())
        .map(|i| [recon[(i, 0)], recon[(i, 1)], recon[(i, 2)]])
        .collect();
    // reconstructed geometry can be degenerate at tiny N; write raw data
    // without re-validating as a mesh
    match TriMesh::new(verts, mesh.triangles().to_vec()) {
        Ok(m) => write_mesh_payload(path, &m, &Attributes::default(), fmt, manifest),
        Err(err) => {
            log::warn!(
                "reconstruction for {} is not a valid mesh ({err}); skipping geometry output",
                path.display()
            );
            Ok(())
        }
    }
}

pub fn cmd_eigs(job: &Job) -> Result<(), CliError> {
    let t_total = Instant::now();
    let mut manifest = RunManifest::new("eigs", job.input, job.resolved.clone())?;
    let mesh = load(job, &mut manifest)?;
    let count = job.resolved.num_modes.ok_or_else(|| {
        CliError::usage("--num-modes is required for the eigs subcommand")
    })?;
    let ctx = build_context(&mesh, job, &mut manifest)?;
    let t0 = Instant::now();
    let basis = spectral::mhb(ctx.l_pd(), ctx.d(), count, Some(job.resolved.seed))?;
    manifest.record_timing("eigensolve", t0.elapsed().as_secs_f64());

    let fmt = job.resolved.format;
    let eigs_path = job.out(&format!("_eigs.{}", fmt.extension()));
    let attrs = Attributes {
        vertex_scalars: (0..count)
            .map(|k| {
                let col: Vec<f64> = (0..mesh.n_vertices()).map(|i| basis.phi[(i, k)]).collect();
                (format!("eig_{k}"), col)
            })
            .collect(),
        face_labels: None,
    };
    write_mesh_payload(&eigs_path, &mesh, &attrs, fmt, &mut manifest)?;

    let csv_path = job.out("_eigenvalues.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
    use std::io::Write;
    writeln!(w, "k,lambda")?;
    for (k, l) in basis.lambdas.iter().enumerate() {
        writeln!(w, "{k},{l}")?;
    }
    drop(w);
    manifest.record_output(&csv_path);
    finish(job, manifest, t_total)
}
