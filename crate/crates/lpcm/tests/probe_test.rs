use lpcm::operators::MassLumping;
use lpcm::solver::{SolveContext, SolverConfig};
use lpcm::basis::{build_grow_mu, GrowMuConfig};
use lpcm::segmentation::{region_grow, parts_edge_connected};
use lpcm::synth;

#[test]
fn probe_c12() {
    let m = synth::quadruped(48, 170);
    println!("quadruped(48,170): n={} m={}", m.n_vertices(), m.n_triangles());
    let t0 = std::time::Instant::now();
    let ctx = SolveContext::for_mesh(&m, MassLumping::Full, 1.0).unwrap();
    println!("ctx in {:?}", t0.elapsed());
    let cfg = SolverConfig { max_iter: 800, seed: 1, newton_iters: 2, ..SolverConfig::default() };
    let t1 = std::time::Instant::now();
    let result = build_grow_mu(&ctx, 6, &cfg, &GrowMuConfig::default()).unwrap();
    let step1 = t1.elapsed();
    println!("STEP 1b: {:?} covered={} rounds={:?}", step1, result.covered,
        result.rounds.iter().map(|r| (r.mu, r.solve_iters, format!("{:.3}", r.covered_fraction))).collect::<Vec<_>>());
    let t2 = std::time::Instant::now();
    let part = region_grow(&m, &result.modes, 0.01).unwrap();
    let step2 = t2.elapsed();
    println!("STEP 2: {:?} parts={} sizes={:?} connected={}", step2, part.num_parts, part.part_sizes(), parts_edge_connected(&m, &part));
    println!("budget: step1 {:.1}s < 95.9s: {} | step2 {:.1}s < 38.1s: {}", step1.as_secs_f64(), step1.as_secs_f64() < 95.9, step2.as_secs_f64(), step2.as_secs_f64() < 38.1);
}
