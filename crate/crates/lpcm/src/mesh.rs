//! Triangle mesh storage, validation and topology queries.
//!
//! A [`TriMesh`] is immutable after construction: all connectivity (edges,
//! vertex/triangle adjacency, triangle neighbors) is derived and validated
//! once in [`TriMesh::new`]. Validation enforces index bounds, non-degenerate
//! triangles, the manifold edge condition (an edge is shared by at most two
//! triangles) and a consistent orientation, repairing the latter by flipping
//! triangles where possible.

use crate::{Error, Result};

/// Sentinel for "no triangle" in edge incidence and neighbor tables.
const NO_TRI: usize = usize::MAX;

/// Relative area floor below which a triangle is rejected as degenerate.
const AREA_REL_TOL: f64 = 1e-14;

/// An undirected mesh edge with its incident triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    /// Endpoints with `v.0 < v.1`.
    pub v: (usize, usize),
    /// Incident triangles; `tris[1] == usize::MAX` on boundary edges.
    pub tris: [usize; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.tris[1] == NO_TRI
    }
}

/// A validated, consistently oriented triangle mesh with derived connectivity.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// Per-triangle edge-adjacent neighbors, aligned with the edge opposite
    /// each corner; `usize::MAX` where the edge is on the boundary.
    tri_neighbors: Vec<[usize; 3]>,
    neighbor_offsets: Vec<usize>,
    neighbors: Vec<usize>,
    vertex_tri_offsets: Vec<usize>,
    vertex_tris: Vec<usize>,
}

/// Global topology summary; genus is summed over surface components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopologySummary {
    pub euler_characteristic: i64,
    pub boundary_loop_count: usize,
    pub genus: usize,
    pub connected_component_count: usize,
}

/// Index maps from a submesh back into its parent mesh.
#[derive(Debug, Clone)]
pub struct SubmeshMap {
    /// `vertex_map[new] == old`
    pub vertex_map: Vec<usize>,
    /// `triangle_map[new] == old`
    pub triangle_map: Vec<usize>,
}

impl TriMesh {
    /// Build and validate a mesh from raw vertex and triangle lists.
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(Error::IndexOutOfRange { tri: t, vertex: v, n });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::DegenerateTriangle { tri: t, area: 0.0 });
            }
        }
        for (t, tri) in triangles.iter().enumerate() {
            let area = raw_area(&vertices, tri);
            let lmax = max_edge_len(&vertices, tri);
            if !(area.is_finite()) || area <= AREA_REL_TOL * lmax * lmax {
                return Err(Error::DegenerateTriangle { tri: t, area });
            }
        }

        let mut mesh = TriMesh {
            vertices,
            triangles,
            edges: Vec::new(),
            tri_neighbors: Vec::new(),
            neighbor_offsets: Vec::new(),
            neighbors: Vec::new(),
            vertex_tri_offsets: Vec::new(),
            vertex_tris: Vec::new(),
        };
        mesh.build_edges()?;
        mesh.orient()?;
        mesh.build_adjacency();
        Ok(mesh)
    }

    fn build_edges(&mut self) -> Result<()> {
        let mut map = std::collections::HashMap::with_capacity(self.triangles.len() * 3 / 2);
        let mut edges: Vec<Edge> = Vec::with_capacity(self.triangles.len() * 3 / 2);
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = if a < b { (a, b) } else { (b, a) };
                match map.entry(key) {
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(edges.len());
                        edges.push(Edge { v: key, tris: [t, NO_TRI] });
                    }
                    std::collections::hash_map::Entry::Occupied(e) => {
                        let edge = &mut edges[*e.get()];
                        if edge.tris[1] != NO_TRI {
                            return Err(Error::NonManifoldEdge { a: key.0, b: key.1, count: 3 });
                        }
                        edge.tris[1] = t;
                    }
                }
            }
        }
        // tri_neighbors[t][k] is the triangle across the edge (tri[k], tri[k+1])
        let mut tri_neighbors = vec![[NO_TRI; 3]; self.triangles.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = if a < b { (a, b) } else { (b, a) };
                let e = &edges[map[&key]];
                let other = if e.tris[0] == t { e.tris[1] } else { e.tris[0] };
                tri_neighbors[t][k] = other;
            }
        }
        self.edges = edges;
        self.tri_neighbors = tri_neighbors;
        Ok(())
    }

    /// Make triangle orientation consistent by BFS over edge-adjacency,
    /// flipping triangles as needed. Fails for non-orientable inputs.
    fn orient(&mut self) -> Result<()> {
        let m = self.triangles.len();
        let mut state = vec![0u8; m]; // 0 unvisited, 1 keep, 2 flipped
        let mut queue = std::collections::VecDeque::new();
        let mut flipped = false;
        for start in 0..m {
            if state[start] != 0 {
                continue;
            }
            state[start] = 1;
            queue.push_back(start);
            while let Some(t) = queue.pop_front() {
                let tri_t = self.oriented(t, state[t]);
                for k in 0..3 {
                    let s = self.tri_neighbors[t][k];
                    if s == NO_TRI {
                        continue;
                    }
                    let (a, b) = (tri_t[k], tri_t[(k + 1) % 3]);
                    // consistent orientation: neighbor must traverse b -> a
                    let tri_s = self.oriented(s, if state[s] == 0 { 1 } else { state[s] });
                    let same_dir = (0..3).any(|j| tri_s[j] == a && tri_s[(j + 1) % 3] == b);
                    if state[s] == 0 {
                        state[s] = if same_dir { 2 } else { 1 };
                        flipped |= same_dir;
                        queue.push_back(s);
                    } else if same_dir {
                        return Err(Error::NonOrientable { tri: s });
                    }
                }
            }
        }
        if flipped {
            for t in 0..m {
                if state[t] == 2 {
                    self.triangles[t].swap(1, 2);
                }
            }
            // flips change directed edges; incidence tables are direction-free
            // but rebuild keeps tri_neighbors corner-aligned
            self.build_edges()?;
        }
        Ok(())
    }

    fn oriented(&self, t: usize, state: u8) -> [usize; 3] {
        let tri = self.triangles[t];
        if state == 2 {
            [tri[0], tri[2], tri[1]]
        } else {
            tri
        }
    }

    fn build_adjacency(&mut self) {
        let n = self.vertices.len();
        let mut deg = vec![0usize; n];
        for e in &self.edges {
            deg[e.v.0] += 1;
            deg[e.v.1] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + deg[i];
        }
        let mut neighbors = vec![0usize; offsets[n]];
        let mut fill = offsets.clone();
        for e in &self.edges {
            neighbors[fill[e.v.0]] = e.v.1;
            fill[e.v.0] += 1;
            neighbors[fill[e.v.1]] = e.v.0;
            fill[e.v.1] += 1;
        }
        for i in 0..n {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }

        let mut tdeg = vec![0usize; n];
        for tri in &self.triangles {
            for &v in tri {
                tdeg[v] += 1;
            }
        }
        let mut toffsets = vec![0usize; n + 1];
        for i in 0..n {
            toffsets[i + 1] = toffsets[i] + tdeg[i];
        }
        let mut tris = vec![0usize; toffsets[n]];
        let mut tfill = toffsets.clone();
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                tris[tfill[v]] = t;
                tfill[v] += 1;
            }
        }

        self.neighbor_offsets = offsets;
        self.neighbors = neighbors;
        self.vertex_tri_offsets = toffsets;
        self.vertex_tris = tris;
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex(&self, i: usize) -> [f64; 3] {
        self.vertices[i]
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    /// Vertices adjacent to `i` by an edge, sorted.
    pub fn vertex_neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.neighbor_offsets[i]..self.neighbor_offsets[i + 1]]
    }

    /// Triangles incident to vertex `i` (the star of `i`).
    pub fn vertex_triangles(&self, i: usize) -> &[usize] {
        &self.vertex_tris[self.vertex_tri_offsets[i]..self.vertex_tri_offsets[i + 1]]
    }

    /// Edge-adjacent triangles of `t` (up to three).
    pub fn triangle_neighbors(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.tri_neighbors[t].iter().copied().filter(|&s| s != NO_TRI)
    }

    /// One-half cross-product magnitude; strictly positive after validation.
    pub fn triangle_area(&self, t: usize) -> f64 {
        raw_area(&self.vertices, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Edge length between adjacent vertices `a` and `b`.
    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        dist(self.vertices[a], self.vertices[b])
    }

    /// Connected component id per vertex (via the edge graph) and the
    /// component count. Isolated vertices form their own components.
    pub fn vertex_components(&self) -> (Vec<usize>, usize) {
        let n = self.vertices.len();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = count;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &w in self.vertex_neighbors(v) {
                    if comp[w] == usize::MAX {
                        comp[w] = count;
                        stack.push(w);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    /// Boundary loops as vertex cycles, traced along directed boundary edges.
    pub fn boundary_loops(&self) -> Result<Vec<Vec<usize>>> {
        // a boundary edge (a, b) is directed as it appears in its only triangle
        let mut next: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
        for e in &self.edges {
            if !e.is_boundary() {
                continue;
            }
            let tri = self.triangles[e.tris[0]];
            let (mut a, mut b) = e.v;
            let forward = (0..3).any(|k| tri[k] == a && tri[(k + 1) % 3] == b);
            if !forward {
                std::mem::swap(&mut a, &mut b);
            }
            if next.insert(a, b).is_some() {
                return Err(Error::BrokenBoundary { vertex: a });
            }
        }
        let mut loops = Vec::new();
        let mut visited = std::collections::HashSet::new();
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        for start in starts {
            if visited.contains(&start) {
                continue;
            }
            let mut cycle = vec![start];
            visited.insert(start);
            let mut v = next[&start];
            while v != start {
                if !visited.insert(v) {
                    return Err(Error::BrokenBoundary { vertex: v });
                }
                cycle.push(v);
                v = *next.get(&v).ok_or(Error::BrokenBoundary { vertex: v })?;
            }
            loops.push(cycle);
        }
        Ok(loops)
    }

    /// Euler characteristic, boundary loops, genus and component count.
    ///
    /// Genus is computed per connected surface component as
    /// g = (2 - chi - b) / 2 and summed; a non-integer or negative value is
    /// an explicit error, never silently rounded.
    pub fn topology(&self) -> Result<TopologySummary> {
        let (comp, count) = self.vertex_components();
        let loops = self.boundary_loops()?;

        let mut v_count = vec![0i64; count];
        let mut e_count = vec![0i64; count];
        let mut f_count = vec![0i64; count];
        let mut b_count = vec![0usize; count];
        for c in comp.iter() {
            v_count[*c] += 1;
        }
        for e in &self.edges {
            e_count[comp[e.v.0]] += 1;
        }
        for tri in &self.triangles {
            f_count[comp[tri[0]]] += 1;
        }
        for l in &loops {
            b_count[comp[l[0]]] += 1;
        }

        let mut genus_total = 0usize;
        for c in 0..count {
            if f_count[c] == 0 {
                // isolated vertex or wire component; no surface genus
                continue;
            }
            let chi = v_count[c] - e_count[c] + f_count[c];
            let num = 2 - chi - b_count[c] as i64;
            if num % 2 != 0 {
                return Err(Error::NonIntegerGenus {
                    component: c,
                    chi,
                    boundaries: b_count[c],
                });
            }
            if num < 0 {
                return Err(Error::Invalid(format!(
                    "negative genus on component {c} (chi = {chi}, boundaries = {})",
                    b_count[c]
                )));
            }
            genus_total += (num / 2) as usize;
        }

        Ok(TopologySummary {
            euler_characteristic: self.vertices.len() as i64 - self.edges.len() as i64
                + self.triangles.len() as i64,
            boundary_loop_count: loops.len(),
            genus: genus_total,
            connected_component_count: count,
        })
    }

    /// Extract the induced mesh of a triangle subset, with index maps back
    /// to the parent. Vertices are reindexed in order of first appearance.
    pub fn submesh(&self, triangle_ids: &[usize]) -> Result<(TriMesh, SubmeshMap)> {
        if triangle_ids.is_empty() {
            return Err(Error::EmptySelection);
        }
        let mut old_to_new = std::collections::HashMap::new();
        let mut vertex_map = Vec::new();
        let mut triangles = Vec::with_capacity(triangle_ids.len());
        let mut triangle_map = Vec::with_capacity(triangle_ids.len());
        for &t in triangle_ids {
            if t >= self.triangles.len() {
                return Err(Error::Invalid(format!("triangle id {t} out of range")));
            }
            let tri = self.triangles[t];
            let mut new_tri = [0usize; 3];
            for k in 0..3 {
                let nv = *old_to_new.entry(tri[k]).or_insert_with(|| {
                    vertex_map.push(tri[k]);
                    vertex_map.len() - 1
                });
                new_tri[k] = nv;
            }
            triangles.push(new_tri);
            triangle_map.push(t);
        }
        let vertices = vertex_map.iter().map(|&v| self.vertices[v]).collect();
        let mesh = TriMesh::new(vertices, triangles)?;
        Ok((mesh, SubmeshMap { vertex_map, triangle_map }))
    }
}

fn raw_area(vertices: &[[f64; 3]], tri: &[usize; 3]) -> f64 {
    let a = vertices[tri[0]];
    let b = vertices[tri[1]];
    let c = vertices[tri[2]];
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let cx = u[1] * v[2] - u[2] * v[1];
    let cy = u[2] * v[0] - u[0] * v[2];
    let cz = u[0] * v[1] - u[1] * v[0];
    0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
}

fn max_edge_len(vertices: &[[f64; 3]], tri: &[usize; 3]) -> f64 {
    let d0 = dist(vertices[tri[0]], vertices[tri[1]]);
    let d1 = dist(vertices[tri[1]], vertices[tri[2]]);
    let d2 = dist(vertices[tri[2]], vertices[tri[0]]);
    d0.max(d1).max(d2)
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}
