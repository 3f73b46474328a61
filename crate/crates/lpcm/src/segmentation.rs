//! Mesh partitioning from a covering mode set: seed selection, round-robin
//! region growing over triangles with the overlap-band acceptance rule, and
//! recursive refinement until every part is genus-0 with at most two
//! boundary loops.

use crate::basis::{build_grow_mu, coverage, GrowMuConfig};
use crate::mesh::TriMesh;
use crate::solver::{ModeSet, SolveContext, SolverConfig};
use crate::{Error, Result};
use std::collections::VecDeque;

pub const UNASSIGNED: u32 = u32::MAX;

/// A full-cover triangle labeling.
#[derive(Debug, Clone)]
pub struct Partition {
    /// Per-triangle label in `[0, num_parts)`.
    pub labels: Vec<u32>,
    /// Seed vertex per part (in mesh indexing).
    pub seeds: Vec<usize>,
    pub epsilon: f64,
    pub num_parts: usize,
}

impl Partition {
    pub fn part_triangles(&self, label: u32) -> Vec<usize> {
        (0..self.labels.len()).filter(|&t| self.labels[t] == label).collect()
    }

    pub fn part_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.num_parts];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }
}

/// Topology summary of one part.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PartSummary {
    pub label: u32,
    pub seed_vertex: usize,
    pub triangle_count: usize,
    pub genus: usize,
    pub boundary_loops: usize,
    pub passes_genus0: bool,
    pub passes_boundary_count: bool,
}

/// Per-part pass/fail report for the patch conditions (genus 0, at most two
/// boundary loops).
#[derive(Debug, Clone, serde::Serialize)]
pub struct PatchReport {
    pub parts: Vec<PartSummary>,
    pub all_pass: bool,
}

/// Seed of each mode: the vertex where its magnitude is maximal, ties broken
/// by the lowest vertex index. An identically-zero column is an error.
pub fn select_seeds(modes: &ModeSet) -> Result<Vec<usize>> {
    let mut seeds = Vec::with_capacity(modes.num_modes());
    for k in 0..modes.num_modes() {
        let col = modes.column(k);
        let mut best = 0usize;
        let mut best_val = 0f64;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_val {
                best_val = v.abs();
                best = i;
            }
        }
        if best_val == 0.0 {
            return Err(Error::DegenerateMode(k));
        }
        seeds.push(best);
    }
    Ok(seeds)
}

/// Mode value on a triangle: the arithmetic mean of its three vertex values.
pub fn mode_on_triangle(mesh: &TriMesh, modes: &ModeSet, k: usize, t: usize) -> f64 {
    let col = modes.column(k);
    let tri = mesh.triangle(t);
    (col[tri[0]] + col[tri[1]] + col[tri[2]]) / 3.0
}

/// Region growing (Step 2). Requires a covering mode set on a connected
/// mesh; returns a partition with every triangle labeled.
///
/// Each part grows a FIFO buffer from the triangles around its seed; a
/// popped unassigned triangle joins the part when its mode magnitude is
/// within `epsilon` of the winning magnitude on that triangle, pushing its
/// edge neighbors, and is dropped otherwise. Parts are scheduled round-robin
/// so growth stays balanced. Triangles the buffers drop everywhere are swept
/// to the adjacent part with the longest shared boundary.
pub fn region_grow(mesh: &TriMesh, modes: &ModeSet, epsilon: f64) -> Result<Partition> {
    if epsilon < 0.0 {
        return Err(Error::InvalidParameter("epsilon must be non-negative".into()));
    }
    let report = coverage(modes);
    if !report.is_full() {
        return Err(Error::IncompleteCoverage { uncovered: report.uncovered_vertices.len() });
    }
    let (_, components) = mesh.vertex_components();
    if components != 1 {
        return Err(Error::NotConnected(components));
    }

    let m = mesh.n_triangles();
    let num_modes = modes.num_modes();
    // per-triangle mode magnitudes and the winning magnitude
    let mut tri_abs = vec![0f64; m * num_modes];
    let mut tri_max = vec![0f64; m];
    for t in 0..m {
        for k in 0..num_modes {
            let v = mode_on_triangle(mesh, modes, k, t).abs();
            tri_abs[t * num_modes + k] = v;
            if v > tri_max[t] {
                tri_max[t] = v;
            }
        }
    }

    let seeds = select_seeds(modes)?;
    let mut labels = vec![UNASSIGNED; m];
    let mut buffers: Vec<VecDeque<usize>> = seeds
        .iter()
        .map(|&s| mesh.vertex_triangles(s).iter().copied().collect())
        .collect();

    let mut active = true;
    while active {
        active = false;
        for (k, buffer) in buffers.iter_mut().enumerate() {
            let Some(t) = buffer.pop_front() else { continue };
            active = true;
            if labels[t] != UNASSIGNED {
                continue;
            }
            let accept = (tri_abs[t * num_modes + k] - tri_max[t]).abs() <= epsilon;
            if accept {
                labels[t] = k as u32;
                for s in mesh.triangle_neighbors(t) {
                    if labels[s] == UNASSIGNED {
                        buffer.push_back(s);
                    }
                }
            }
        }
    }

    sweep_orphans(mesh, &mut labels)?;
    compact(mesh, labels, seeds, epsilon)
}

/// Assign leftover triangles wave by wave to the adjacent labeled part
/// sharing the longest boundary.
fn sweep_orphans(mesh: &TriMesh, labels: &mut [u32]) -> Result<()> {
    loop {
        let orphans: Vec<usize> =
            (0..labels.len()).filter(|&t| labels[t] == UNASSIGNED).collect();
        if orphans.is_empty() {
            return Ok(());
        }
        let mut wave = Vec::new();
        for &t in &orphans {
            let tri = mesh.triangle(t);
            let mut best: Option<(f64, u32)> = None;
            for s in mesh.triangle_neighbors(t) {
                if labels[s] == UNASSIGNED {
                    continue;
                }
                // shared edge = the two vertices common to t and s
                let stri = mesh.triangle(s);
                let shared: Vec<usize> =
                    tri.iter().filter(|v| stri.contains(v)).copied().collect();
                let len = mesh.edge_length(shared[0], shared[1]);
                let cand = (len, labels[s]);
                best = Some(match best {
                    None => cand,
                    Some(b) => {
                        if cand.0 > b.0 || (cand.0 == b.0 && cand.1 < b.1) {
                            cand
                        } else {
                            b
                        }
                    }
                });
            }
            if let Some((_, label)) = best {
                wave.push((t, label));
            }
        }
        if wave.is_empty() {
            return Err(Error::Invalid(format!(
                "{} unassigned triangles unreachable from any part",
                orphans.len()
            )));
        }
        for (t, label) in wave {
            labels[t] = label;
        }
    }
}

/// Drop empty labels and renumber the rest consecutively, preserving order.
fn compact(
    mesh: &TriMesh,
    labels: Vec<u32>,
    seeds: Vec<usize>,
    epsilon: f64,
) -> Result<Partition> {
    let _ = mesh;
    let num_in = seeds.len();
    let mut sizes = vec![0usize; num_in];
    for &l in &labels {
        sizes[l as usize] += 1;
    }
    let mut remap = vec![UNASSIGNED; num_in];
    let mut kept_seeds = Vec::new();
    let mut next = 0u32;
    for k in 0..num_in {
        if sizes[k] > 0 {
            remap[k] = next;
            kept_seeds.push(seeds[k]);
            next += 1;
        }
    }
    let labels: Vec<u32> = labels.into_iter().map(|l| remap[l as usize]).collect();
    Ok(Partition { labels, seeds: kept_seeds, epsilon, num_parts: next as usize })
}

/// Topology of every part.
pub fn patch_report(mesh: &TriMesh, partition: &Partition) -> Result<PatchReport> {
    let mut parts = Vec::with_capacity(partition.num_parts);
    let mut all_pass = true;
    for label in 0..partition.num_parts as u32 {
        let tris = partition.part_triangles(label);
        let (sub, _) = mesh.submesh(&tris)?;
        let topo = sub.topology()?;
        let passes_genus0 = topo.genus == 0;
        let passes_boundary_count = topo.boundary_loop_count <= 2;
        all_pass &= passes_genus0 && passes_boundary_count;
        parts.push(PartSummary {
            label,
            seed_vertex: partition.seeds[label as usize],
            triangle_count: tris.len(),
            genus: topo.genus,
            boundary_loops: topo.boundary_loop_count,
            passes_genus0,
            passes_boundary_count,
        });
    }
    Ok(PatchReport { parts, all_pass })
}

/// How Step 3 re-runs the pipeline on failing parts.
#[derive(Debug, Clone)]
pub struct RefineConfig {
    pub solver: SolverConfig,
    pub grow_mu: GrowMuConfig,
    pub epsilon: f64,
    pub max_depth: usize,
    pub lumping: crate::operators::MassLumping,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            solver: SolverConfig::default(),
            grow_mu: GrowMuConfig::default(),
            epsilon: 0.01,
            max_depth: 8,
            lumping: crate::operators::MassLumping::default(),
        }
    }
}

/// Step 3: refine every part that fails the patch conditions by re-running
/// the mu-growing basis and region growing on its submesh with N = 2,
/// splicing the children back (child labels are appended after existing
/// labels, then empties are compacted away). Returns the refined partition,
/// its report, and whether every part passed within the recursion cap.
pub fn refine_patches(
    mesh: &TriMesh,
    partition: &Partition,
    cfg: &RefineConfig,
) -> Result<(Partition, PatchReport, bool)> {
    let mut labels = partition.labels.clone();
    let mut seeds = partition.seeds.clone();
    let mut depth = vec![0usize; partition.num_parts];
    let mut epsilon = partition.epsilon;
    if epsilon == 0.0 {
        epsilon = cfg.epsilon;
    }

    loop {
        let current = Partition {
            labels: labels.clone(),
            seeds: seeds.clone(),
            epsilon,
            num_parts: seeds.len(),
        };
        let report = patch_report(mesh, &current)?;
        let failing: Vec<u32> = report
            .parts
            .iter()
            .filter(|p| !(p.passes_genus0 && p.passes_boundary_count))
            .map(|p| p.label)
            .collect();
        if failing.is_empty() {
            return Ok((current, report, true));
        }
        let workable: Vec<u32> = failing
            .iter()
            .copied()
            .filter(|&l| depth[l as usize] < cfg.max_depth)
            .collect();
        if workable.is_empty() {
            log::warn!("recursion cap reached with {} unresolved parts", failing.len());
            return Ok((current, report, false));
        }

        for label in workable {
            let tris = current.part_triangles(label);
            let (sub, map) = mesh.submesh(&tris)?;
            let ctx = SolveContext::for_mesh(&sub, cfg.lumping, cfg.solver.rho)?;
            let grown = build_grow_mu(&ctx, 2, &cfg.solver, &cfg.grow_mu)?;
            if !grown.covered {
                log::warn!("part {label}: coverage not reached while refining; leaving as is");
                depth[label as usize] = cfg.max_depth;
                continue;
            }
            let child = region_grow(&sub, &grown.modes, epsilon)?;
            if child.num_parts < 2 {
                log::warn!("part {label}: refinement produced a single part; leaving as is");
                depth[label as usize] = cfg.max_depth;
                continue;
            }
            let child_depth = depth[label as usize] + 1;
            let base = seeds.len() as u32;
            for c in 0..child.num_parts {
                seeds.push(map.vertex_map[child.seeds[c]]);
                depth.push(child_depth);
            }
            for (sub_t, &parent_t) in map.triangle_map.iter().enumerate() {
                labels[parent_t] = base + child.labels[sub_t];
            }
            // the parent label is now empty
        }

        let compacted = compact_refined(labels, seeds, depth);
        labels = compacted.0;
        seeds = compacted.1;
        depth = compacted.2;
    }
}

fn compact_refined(
    labels: Vec<u32>,
    seeds: Vec<usize>,
    depth: Vec<usize>,
) -> (Vec<u32>, Vec<usize>, Vec<usize>) {
    let mut sizes = vec![0usize; seeds.len()];
    for &l in &labels {
        sizes[l as usize] += 1;
    }
    let mut remap = vec![UNASSIGNED; seeds.len()];
    let mut new_seeds = Vec::new();
    let mut new_depth = Vec::new();
    let mut next = 0u32;
    for k in 0..seeds.len() {
        if sizes[k] > 0 {
            remap[k] = next;
            new_seeds.push(seeds[k]);
            new_depth.push(depth[k]);
            next += 1;
        }
    }
    (
        labels.into_iter().map(|l| remap[l as usize]).collect(),
        new_seeds,
        new_depth,
    )
}

/// Check that every part is edge-connected (flood fill covers it).
pub fn parts_edge_connected(mesh: &TriMesh, partition: &Partition) -> bool {
    for label in 0..partition.num_parts as u32 {
        let tris = partition.part_triangles(label);
        if tris.is_empty() {
            return false;
        }
        let inside: std::collections::HashSet<usize> = tris.iter().copied().collect();
        let mut seen = std::collections::HashSet::from([tris[0]]);
        let mut stack = vec![tris[0]];
        while let Some(t) = stack.pop() {
            for s in mesh.triangle_neighbors(t) {
                if inside.contains(&s) && seen.insert(s) {
                    stack.push(s);
                }
            }
        }
        if seen.len() != tris.len() {
            return false;
        }
    }
    true
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
    fn seed_is_magnitude_argmax() {
        let mut psi = DMatrix::zeros(10, 1);
        psi[(7, 0)] = -3.0;
        psi[(2, 0)] = 2.5;
        assert_eq!(select_seeds(&fake_modes(psi)).unwrap(), vec![7]);
    }

    #[test]
    fn seed_ties_break_to_lowest_index() {
        let mut psi = DMatrix::zeros(12, 1);
        psi[(3, 0)] = 2.0;
        psi[(9, 0)] = -2.0;
        assert_eq!(select_seeds(&fake_modes(psi)).unwrap(), vec![3]);
    }

    #[test]
    fn zero_mode_is_degenerate() {
        let psi = DMatrix::zeros(5, 1);
        assert!(matches!(
            select_seeds(&fake_modes(psi)),
            Err(Error::DegenerateMode(0))
        ));
    }

    #[test]
    fn triangle_value_is_vertex_mean() {
        let mesh = synth::octahedron();
        let tri = mesh.triangle(0);
        let mut psi = DMatrix::zeros(6, 1);
        psi[(tri[0], 0)] = 0.0;
        psi[(tri[1], 0)] = 0.0;
        psi[(tri[2], 0)] = 3.0;
        let modes = fake_modes(psi);
        assert!((mode_on_triangle(&mesh, &modes, 0, 0) - 1.0).abs() < 1e-15);

        let mut psi2 = DMatrix::zeros(6, 1);
        psi2[(tri[0], 0)] = -1.0;
        psi2[(tri[1], 0)] = 2.0;
        psi2[(tri[2], 0)] = 5.0;
        let modes2 = fake_modes(psi2);
        assert!((mode_on_triangle(&mesh, &modes2, 0, 0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_covering_mode_labels_everything_zero() {
        let mesh = synth::icosphere(1);
        let psi = DMatrix::from_fn(mesh.n_vertices(), 1, |i, _| 1.0 + i as f64 * 1e-3);
        let part = region_grow(&mesh, &fake_modes(psi), 0.01).unwrap();
        assert_eq!(part.num_parts, 1);
        assert!(part.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn incomplete_coverage_is_a_precondition_error() {
        let mesh = synth::icosphere(1);
        let psi = DMatrix::from_fn(mesh.n_vertices(), 1, |i, _| if i == 0 { 0.0 } else { 1.0 });
        assert!(matches!(
            region_grow(&mesh, &fake_modes(psi), 0.01),
            Err(Error::IncompleteCoverage { uncovered: 1 })
        ));
    }

    #[test]
    fn disjoint_supports_split_a_cylinder_at_the_seam() {
        // two modes supported on the top/bottom halves of an open tube;
        // a small overlap band keeps coverage total
        let nv = 8;
        let mesh = synth::cylinder(16, nv, 1.0, 4.0);
        let n = mesh.n_vertices();
        let mid = 2.0;
        let mut psi = DMatrix::zeros(n, 2);
        for i in 0..n {
            let z = mesh.vertex(i)[2];
            if z <= mid {
                psi[(i, 0)] = 1.0 + (mid - z);
            }
            if z >= mid {
                psi[(i, 1)] = 1.0 + (z - mid);
            }
        }
        let part = region_grow(&mesh, &fake_modes(psi), 0.01).unwrap();
        assert_eq!(part.num_parts, 2);
        assert!(parts_edge_connected(&mesh, &part));
        // every triangle strictly below the seam has label 0, above 1
        for t in 0..mesh.n_triangles() {
            let tri = mesh.triangle(t);
            let zmax = tri.iter().map(|&v| mesh.vertex(v)[2]).fold(f64::MIN, f64::max);
            let zmin = tri.iter().map(|&v| mesh.vertex(v)[2]).fold(f64::MAX, f64::min);
            if zmax < mid - 1e-9 {
                assert_eq!(part.labels[t], 0);
            }
            if zmin > mid + 1e-9 {
                assert_eq!(part.labels[t], 1);
            }
        }
    }

    #[test]
    fn label_conservation_and_determinism() {
        let mesh = synth::icosphere(2);
        let ctx = SolveContext::for_mesh(&mesh, MassLumping::Full, 1.0).unwrap();
        let cfg = SolverConfig { mu: 30.0, ..SolverConfig::default() };
        let result = build_grow_mu(&ctx, 3, &cfg, &GrowMuConfig::default()).unwrap();
        let a = region_grow(&mesh, &result.modes, 0.01).unwrap();
        let b = region_grow(&mesh, &result.modes, 0.01).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.part_sizes().iter().sum::<usize>(), mesh.n_triangles());
        assert!(parts_edge_connected(&mesh, &a));
    }

    #[test]
    fn epsilon_zero_matches_argmax_on_overlap_free_fixture() {
        // modes with disjoint supports and no overlap band: epsilon 0 must
        // reproduce the per-triangle argmax labeling with the same seeds
        let mesh = synth::cylinder(12, 6, 1.0, 3.0);
        let n = mesh.n_vertices();
        let mut psi = DMatrix::zeros(n, 2);
        for i in 0..n {
            let z = mesh.vertex(i)[2];
            if z < 1.49 {
                psi[(i, 0)] = 2.0;
            } else {
                psi[(i, 1)] = 2.0 + z;
            }
        }
        let modes = fake_modes(psi);
        let part = region_grow(&mesh, &modes, 0.0).unwrap();
        for t in 0..mesh.n_triangles() {
            let v0 = mode_on_triangle(&mesh, &modes, 0, t).abs();
            let v1 = mode_on_triangle(&mesh, &modes, 1, t).abs();
            let argmax = if v0 >= v1 { 0 } else { 1 };
            assert_eq!(part.labels[t], argmax, "triangle {t}");
        }
    }

    #[test]
    fn compliant_partition_is_left_unchanged() {
        let mesh = synth::icosphere(1);
        let psi = DMatrix::from_element(mesh.n_vertices(), 1, 1.0);
        let part = region_grow(&mesh, &fake_modes(psi), 0.01).unwrap();
        // single closed genus-0 part passes both patch conditions
        let cfg = RefineConfig::default();
        let (refined, report, resolved) = refine_patches(&mesh, &part, &cfg).unwrap();
        assert!(resolved);
        assert!(report.all_pass);
        assert_eq!(refined.labels, part.labels);
    }

    #[test]
    fn torus_as_single_part_gets_split_to_genus_zero() {
        let mesh = synth::torus(18, 10, 2.0, 0.7);
        let psi = DMatrix::from_element(mesh.n_vertices(), 1, 1.0);
        let part = region_grow(&mesh, &fake_modes(psi), 0.01).unwrap();
        let report = patch_report(&mesh, &part).unwrap();
        assert!(!report.all_pass);
        assert_eq!(report.parts[0].genus, 1);

        let cfg = RefineConfig {
            solver: SolverConfig { max_iter: 800, ..SolverConfig::default() },
            ..RefineConfig::default()
        };
        let (refined, report, resolved) = refine_patches(&mesh, &part, &cfg).unwrap();
        assert!(resolved, "refinement did not resolve: {report:?}");
        assert!(report.all_pass);
        assert!(refined.num_parts >= 2);
        assert_eq!(refined.part_sizes().iter().sum::<usize>(), mesh.n_triangles());
        assert!(parts_edge_connected(&mesh, &refined));
    }

    #[test]
    fn interface_curves_are_simple_paths() {
        // P3: between any two parts, non-junction vertices carry at most two
        // interface edges
        let mesh = synth::icosphere(2);
        let ctx = SolveContext::for_mesh(&mesh, MassLumping::Full, 1.0).unwrap();
        let cfg = SolverConfig { mu: 30.0, ..SolverConfig::default() };
        let result = build_grow_mu(&ctx, 3, &cfg, &GrowMuConfig::default()).unwrap();
        let part = region_grow(&mesh, &result.modes, 0.01).unwrap();

        let mut vertex_parts: Vec<std::collections::HashSet<u32>> =
            vec![std::collections::HashSet::new(); mesh.n_vertices()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            for &v in tri {
                vertex_parts[v].insert(part.labels[t]);
            }
        }
        let mut per_pair: std::collections::HashMap<(usize, (u32, u32)), usize> =
            std::collections::HashMap::new();
        for e in mesh.edges() {
            if e.is_boundary() {
                continue;
            }
            let (a, b) = (part.labels[e.tris[0]], part.labels[e.tris[1]]);
            if a == b {
                continue;
            }
            let pair = (a.min(b), a.max(b));
            for v in [e.v.0, e.v.1] {
                *per_pair.entry((v, pair)).or_insert(0) += 1;
            }
        }
        for ((v, _), count) in per_pair {
            if vertex_parts[v].len() >= 3 {
                continue; // junction vertex
            }
            assert!(count <= 2, "vertex {v} has {count} interface edges for one pair");
        }
    }
}
