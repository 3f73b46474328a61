//! Procedural meshes for tests, benches and demos.
//!
//! Everything here is deterministic: the same arguments always produce the
//! same vertex and triangle order.

use crate::mesh::TriMesh;

/// Regular octahedron with unit circumradius: 6 vertices, 8 triangles.
pub fn octahedron() -> TriMesh {
    let vertices = vec![
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    let triangles = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    TriMesh::new(vertices, triangles).expect("octahedron is valid")
}

/// Unit icosphere with `subdiv` midpoint subdivisions of an icosahedron:
/// 12, 42, 162, 642, 2562, ... vertices.
pub fn icosphere(subdiv: usize) -> TriMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<[f64; 3]> = vec![
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdiv {
        let mut midpoint = std::collections::HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for tri in &triangles {
            let mut mids = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = if a < b { (a, b) } else { (b, a) };
                mids[k] = *midpoint.entry(key).or_insert_with(|| {
                    let pa = vertices[a];
                    let pb = vertices[b];
                    vertices.push([
                        0.5 * (pa[0] + pb[0]),
                        0.5 * (pa[1] + pb[1]),
                        0.5 * (pa[2] + pb[2]),
                    ]);
                    vertices.len() - 1
                });
            }
            next.push([tri[0], mids[0], mids[2]]);
            next.push([tri[1], mids[1], mids[0]]);
            next.push([tri[2], mids[2], mids[1]]);
            next.push(mids);
        }
        triangles = next;
    }
    for v in &mut vertices {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        *v = [v[0] / r, v[1] / r, v[2] / r];
    }
    TriMesh::new(vertices, triangles).expect("icosphere is valid")
}

/// Closed torus with `nu` segments around the main ring and `nv` around the
/// tube; major radius `big_r`, tube radius `small_r`.
pub fn torus(nu: usize, nv: usize, big_r: f64, small_r: f64) -> TriMesh {
    assert!(nu >= 3 && nv >= 3);
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * std::f64::consts::PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * std::f64::consts::PI * j as f64 / nv as f64;
            let w = big_r + small_r * v.cos();
            vertices.push([w * u.cos(), w * u.sin(), small_r * v.sin()]);
        }
    }
    let idx = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let a = idx(i, j);
            let b = idx(i + 1, j);
            let c = idx(i + 1, j + 1);
            let d = idx(i, j + 1);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriMesh::new(vertices, triangles).expect("torus is valid")
}

/// Flat grid of `nx` by `ny` vertices with spacing `h` in the xy-plane, each
/// cell split along the same diagonal (a disk, chi = 1).
pub fn flat_grid(nx: usize, ny: usize, h: f64) -> TriMesh {
    assert!(nx >= 2 && ny >= 2);
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push([i as f64 * h, j as f64 * h, 0.0]);
        }
    }
    let idx = |i: usize, j: usize| j * nx + i;
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let a = idx(i, j);
            let b = idx(i + 1, j);
            let c = idx(i + 1, j + 1);
            let d = idx(i, j + 1);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriMesh::new(vertices, triangles).expect("grid is valid")
}

/// Closed planar fan: a center vertex surrounded by `k` ring vertices at
/// radius `r`, triangulated into `k` triangles. With `k = 6`, `r = 1` every
/// triangle is unit equilateral.
pub fn disk_fan(k: usize, r: f64) -> TriMesh {
    assert!(k >= 3);
    let mut vertices = vec![[0.0, 0.0, 0.0]];
    for i in 0..k {
        let a = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
        vertices.push([r * a.cos(), r * a.sin(), 0.0]);
    }
    let mut triangles = Vec::with_capacity(k);
    for i in 0..k {
        triangles.push([0, 1 + i, 1 + (i + 1) % k]);
    }
    TriMesh::new(vertices, triangles).expect("fan is valid")
}

/// Open cylinder tube (no caps): genus 0 with two boundary loops.
pub fn cylinder(nu: usize, nv: usize, r: f64, height: f64) -> TriMesh {
    assert!(nu >= 3 && nv >= 1);
    let mut vertices = Vec::with_capacity(nu * (nv + 1));
    for j in 0..=nv {
        let z = height * j as f64 / nv as f64;
        for i in 0..nu {
            let a = 2.0 * std::f64::consts::PI * i as f64 / nu as f64;
            vertices.push([r * a.cos(), r * a.sin(), z]);
        }
    }
    let idx = |i: usize, j: usize| j * nu + (i % nu);
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            let a = idx(i, j);
            let b = idx(i + 1, j);
            let c = idx(i + 1, j + 1);
            let d = idx(i, j + 1);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriMesh::new(vertices, triangles).expect("cylinder is valid")
}

/// Closed uv-sphere with `nu` longitudinal segments and `nv` latitudinal
/// bands: `nu * (nv - 1) + 2` vertices. Useful when a specific vertex count
/// is needed.
pub fn uv_sphere(nu: usize, nv: usize) -> TriMesh {
    let (vertices, triangles) = uv_sphere_raw(nu, nv);
    TriMesh::new(vertices, triangles).expect("uv sphere is valid")
}

fn uv_sphere_raw(nu: usize, nv: usize) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    assert!(nu >= 3 && nv >= 2);
    let mut vertices = vec![[0.0, 0.0, 1.0]];
    for j in 1..nv {
        let theta = std::f64::consts::PI * j as f64 / nv as f64;
        for i in 0..nu {
            let phi = 2.0 * std::f64::consts::PI * i as f64 / nu as f64;
            vertices.push([
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ]);
        }
    }
    vertices.push([0.0, 0.0, -1.0]);
    let south = vertices.len() - 1;
    let ring = |j: usize, i: usize| 1 + (j - 1) * nu + (i % nu);

    let mut triangles = Vec::new();
    for i in 0..nu {
        triangles.push([0, ring(1, i), ring(1, i + 1)]);
    }
    for j in 1..nv - 1 {
        for i in 0..nu {
            let a = ring(j, i);
            let b = ring(j, i + 1);
            let c = ring(j + 1, i + 1);
            let d = ring(j + 1, i);
            triangles.push([a, d, c]);
            triangles.push([a, c, b]);
        }
    }
    for i in 0..nu {
        triangles.push([south, ring(nv - 1, i + 1), ring(nv - 1, i)]);
    }
    (vertices, triangles)
}

/// A radial "arm" for [`star`]: a lobe of amplitude `amp` and angular width
/// `width` pointing along `dir`.
#[derive(Debug, Clone, Copy)]
pub struct Arm {
    pub dir: [f64; 3],
    pub amp: f64,
    pub width: f64,
}

/// Star-shaped closed surface: a uv-sphere whose radius is modulated by
/// exponential lobes along the arm directions.
pub fn star(nu: usize, nv: usize, arms: &[Arm]) -> TriMesh {
    let (mut vertices, triangles) = uv_sphere_raw(nu, nv);
    let arms: Vec<Arm> = arms
        .iter()
        .map(|a| {
            let n = (a.dir[0] * a.dir[0] + a.dir[1] * a.dir[1] + a.dir[2] * a.dir[2]).sqrt();
            Arm { dir: [a.dir[0] / n, a.dir[1] / n, a.dir[2] / n], ..*a }
        })
        .collect();
    for v in &mut vertices {
        let mut f = 1.0;
        for a in &arms {
            let dot = v[0] * a.dir[0] + v[1] * a.dir[1] + v[2] * a.dir[2];
            f += a.amp * ((dot - 1.0) / a.width).exp();
        }
        *v = [v[0] * f, v[1] * f, v[2] * f];
    }
    TriMesh::new(vertices, triangles).expect("star is valid")
}

/// Five-armed star in the xy-plane, used for support-growth experiments.
pub fn star5(nu: usize, nv: usize) -> TriMesh {
    let mut arms = Vec::new();
    for k in 0..5 {
        let a = 2.0 * std::f64::consts::PI * k as f64 / 5.0;
        arms.push(Arm { dir: [a.cos(), a.sin(), 0.0], amp: 1.3, width: 0.10 });
    }
    star(nu, nv, &arms)
}

/// Quadruped-like blob: four leg lobes, a head lobe and a tail lobe,
/// stretched along x. `nu`, `nv` control resolution as in [`uv_sphere`].
pub fn quadruped(nu: usize, nv: usize) -> TriMesh {
    let legs = [
        [0.55, 0.45, -1.0],
        [0.55, -0.45, -1.0],
        [-0.55, 0.45, -1.0],
        [-0.55, -0.45, -1.0],
    ];
    let mut arms: Vec<Arm> = legs
        .iter()
        .map(|&dir| Arm { dir, amp: 1.5, width: 0.055 })
        .collect();
    arms.push(Arm { dir: [1.0, 0.0, 0.55], amp: 1.35, width: 0.07 }); // head
    arms.push(Arm { dir: [-1.0, 0.0, 0.25], amp: 1.1, width: 0.05 }); // tail
    let m = star(nu, nv, &arms);
    let stretched: Vec<[f64; 3]> = m
        .vertices()
        .iter()
        .map(|p| [1.45 * p[0], p[1], p[2]])
        .collect();
    TriMesh::new(stretched, m.triangles().to_vec()).expect("quadruped is valid")
}

/// Ellipsoid with the given semi-axes and a raised bump. Returns the mesh and
/// the ids of the vertices inside the bump region.
///
/// The bump is a radial displacement of relative height `height` applied with
/// a smooth cosine falloff to vertices within angular distance `angle` of
/// `dir` (measured on the unit sphere before scaling).
pub fn ellipsoid_with_bump(
    nu: usize,
    nv: usize,
    semi_axes: [f64; 3],
    dir: [f64; 3],
    angle: f64,
    height: f64,
) -> (TriMesh, Vec<usize>) {
    let (unit, triangles) = uv_sphere_raw(nu, nv);
    let dn = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    let dir = [dir[0] / dn, dir[1] / dn, dir[2] / dn];
    let mut vertices = Vec::with_capacity(unit.len());
    let mut bump_ids = Vec::new();
    for (i, u) in unit.iter().enumerate() {
        let mut p = [
            semi_axes[0] * u[0],
            semi_axes[1] * u[1],
            semi_axes[2] * u[2],
        ];
        let dot = (u[0] * dir[0] + u[1] * dir[1] + u[2] * dir[2]).clamp(-1.0, 1.0);
        let alpha = dot.acos();
        if alpha < angle {
            let t = (std::f64::consts::FRAC_PI_2 * alpha / angle).cos();
            let f = 1.0 + height * t * t;
            p = [p[0] * f, p[1] * f, p[2] * f];
            bump_ids.push(i);
        }
        vertices.push(p);
    }
    let mesh = TriMesh::new(vertices, triangles).expect("ellipsoid is valid");
    (mesh, bump_ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_vertex_counts() {
        assert_eq!(icosphere(0).n_vertices(), 12);
        assert_eq!(icosphere(1).n_vertices(), 42);
        assert_eq!(icosphere(2).n_vertices(), 162);
        assert_eq!(icosphere(3).n_vertices(), 642);
    }

    #[test]
    fn uv_sphere_counts_and_topology() {
        let m = uv_sphere(12, 8);
        assert_eq!(m.n_vertices(), 12 * 7 + 2);
        let t = m.topology().unwrap();
        assert_eq!(t.euler_characteristic, 2);
        assert_eq!(t.genus, 0);
    }

    #[test]
    fn cylinder_has_two_boundaries() {
        let m = cylinder(12, 6, 1.0, 3.0);
        let t = m.topology().unwrap();
        assert_eq!(t.boundary_loop_count, 2);
        assert_eq!(t.genus, 0);
        assert_eq!(t.euler_characteristic, 0);
    }

    #[test]
    fn star_and_quadruped_are_spheres() {
        assert_eq!(star5(40, 40).topology().unwrap().genus, 0);
        assert_eq!(quadruped(24, 24).topology().unwrap().genus, 0);
    }

    #[test]
    fn ellipsoid_bump_marks_vertices() {
        let (m, bump) = ellipsoid_with_bump(
            24,
            24,
            [2.5, 1.5, 1.5],
            [0.0, 1.0, 0.0],
            0.45,
            0.4,
        );
        assert!(!bump.is_empty());
        assert!(bump.len() < m.n_vertices() / 4);
        assert_eq!(m.topology().unwrap().genus, 0);
    }
}
