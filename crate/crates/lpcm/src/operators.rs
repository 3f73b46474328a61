//! Discrete Laplace-Beltrami operator on a triangle mesh: cotangent
//! stiffness matrix, lumped mass matrix, and the mass-weighted Lp norm.
//!
//! Sign convention: [`cotan_stiffness`] assembles the weight matrix with
//! positive cotangent weights off the diagonal and negative row sums on it,
//! so the constant vector is in its kernel and the matrix itself is negative
//! semidefinite. [`Stiffness::l_pd`] is its negation, the positive
//! semidefinite form used by every energy and linear solve in this crate.

use crate::mesh::TriMesh;
use crate::sparse::SparseSymMatrix;
use crate::{Error, Result};
use nalgebra::DMatrix;

/// Cotangents beyond this magnitude indicate a numerically degenerate angle.
const COT_MAX: f64 = 1e12;

/// How per-vertex masses relate to one-ring triangle areas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassLumping {
    /// Full one-ring area per vertex.
    #[default]
    Full,
    /// One third of the one-ring area (the common barycentric choice).
    Third,
}

impl std::str::FromStr for MassLumping {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(MassLumping::Full),
            "third" => Ok(MassLumping::Third),
            other => Err(format!("unknown mass lumping '{other}' (expected full|third)")),
        }
    }
}

impl std::fmt::Display for MassLumping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MassLumping::Full => "full",
            MassLumping::Third => "third",
        })
    }
}

/// Diagonal lumped mass matrix; entries are strictly positive areas.
#[derive(Debug, Clone)]
pub struct MassDiag {
    d: Vec<f64>,
}

impl MassDiag {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if let Some(i) = d.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::IsolatedVertex(i));
        }
        Ok(MassDiag { d })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.d
    }

    pub fn get(&self, i: usize) -> f64 {
        self.d[i]
    }

    pub fn total(&self) -> f64 {
        self.d.iter().sum()
    }
}

/// The assembled cotangent weight matrix in the paper's sign convention,
/// together with its positive semidefinite negation.
#[derive(Debug, Clone)]
pub struct Stiffness {
    l_paper: SparseSymMatrix,
}

impl Stiffness {
    /// The matrix exactly as assembled: positive off-diagonal weights,
    /// diagonal equal to the negative row sum. Negative semidefinite.
    pub fn l_paper(&self) -> &SparseSymMatrix {
        &self.l_paper
    }

    /// The positive semidefinite form `-L_paper` used in energies and solves.
    pub fn l_pd(&self) -> SparseSymMatrix {
        self.l_paper.scaled(-1.0)
    }
}

/// Assemble the cotangent stiffness matrix.
///
/// The weight of edge (i, j) is half the sum of the cotangents of the angles
/// opposite the edge, one term per incident triangle (so a single term on
/// boundary edges).
pub fn cotan_stiffness(mesh: &TriMesh) -> Result<Stiffness> {
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(mesh.n_triangles() * 12);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for k in 0..3 {
            let opp = tri[k];
            let i = tri[(k + 1) % 3];
            let j = tri[(k + 2) % 3];
            let cot = cotangent(mesh.vertex(opp), mesh.vertex(i), mesh.vertex(j));
            if !cot.is_finite() || cot.abs() > COT_MAX {
                return Err(Error::CotangentOverflow(t));
            }
            let w = 0.5 * cot;
            triplets.push((i, j, w));
            triplets.push((j, i, w));
            triplets.push((i, i, -w));
            triplets.push((j, j, -w));
        }
    }
    let l_paper = SparseSymMatrix::from_triplets(mesh.n_vertices(), &triplets)?;
    Ok(Stiffness { l_paper })
}

/// Cotangent of the angle at `apex` in the triangle (`apex`, `a`, `b`).
fn cotangent(apex: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let u = [a[0] - apex[0], a[1] - apex[1], a[2] - apex[2]];
    let v = [b[0] - apex[0], b[1] - apex[1], b[2] - apex[2]];
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let cx = u[1] * v[2] - u[2] * v[1];
    let cy = u[2] * v[0] - u[0] * v[2];
    let cz = u[0] * v[1] - u[1] * v[0];
    let cross = (cx * cx + cy * cy + cz * cz).sqrt();
    dot / cross
}

/// Lumped mass matrix: per-vertex one-ring triangle area (optionally the
/// conventional one-third of it). Errors on isolated vertices.
pub fn lumped_mass(mesh: &TriMesh, lumping: MassLumping) -> Result<MassDiag> {
    let scale = match lumping {
        MassLumping::Full => 1.0,
        MassLumping::Third => 1.0 / 3.0,
    };
    let mut d = vec![0f64; mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        let area = mesh.triangle_area(t);
        for &v in &mesh.triangle(t) {
            d[v] += scale * area;
        }
    }
    MassDiag::new(d)
}

/// Mass-weighted Lp norm to the p-th power: sum over entries of
/// `d_i * |S_ij|^p`, for `p` in (0, 1].
pub fn weighted_lp_norm_p(s: &DMatrix<f64>, d: &MassDiag, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must be in (0, 1]")));
    }
    if s.nrows() != d.len() {
        return Err(Error::InvalidParameter(format!(
            "matrix has {} rows but mass has {} entries",
            s.nrows(),
            d.len()
        )));
    }
    let dv = d.as_slice();
    let mut acc = 0.0;
    if p == 1.0 {
        for col in s.column_iter() {
            for (i, v) in col.iter().enumerate() {
                acc += dv[i] * v.abs();
            }
        }
    } else {
        for col in s.column_iter() {
            for (i, v) in col.iter().enumerate() {
                if *v != 0.0 {
                    acc += dv[i] * v.abs().powf(p);
                }
            }
        }
    }
    Ok(acc)
}
