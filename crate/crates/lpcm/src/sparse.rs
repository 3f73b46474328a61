//! Symmetric sparse matrices and a direct LDL^T solver.
//!
//! [`SparseSymMatrix`] stores the full (both triangles) pattern in CSR for
//! cheap row access and matrix-vector products. [`Ldlt`] is an up-looking
//! LDL^T factorization over the elimination tree, with a reverse Cuthill-McKee
//! fill-reducing ordering computed from the matrix graph. The factorization
//! of a given matrix is computed once and reused for many right-hand sides.

use crate::{Error, Result};

const NONE: usize = usize::MAX;

/// Symmetric sparse matrix in CSR form (full pattern, sorted columns).
#[derive(Debug, Clone)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Assemble from (row, col, value) triplets, summing duplicates.
    /// The triplet list must describe a symmetric matrix; symmetry is
    /// verified to 1e-12 relative.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n + 1];
        for &(i, j, _) in triplets {
            if i >= n || j >= n {
                return Err(Error::Invalid(format!("triplet ({i}, {j}) out of range")));
            }
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0f64; triplets.len()];
        let mut fill = counts.clone();
        for &(i, j, v) in triplets {
            cols[fill[i]] = j;
            vals[fill[i]] = v;
            fill[i] += 1;
        }
        // sort each row and merge duplicates
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            scratch.clear();
            for p in counts[i]..counts[i + 1] {
                scratch.push((cols[p], vals[p]));
            }
            scratch.sort_unstable_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < scratch.len() {
                let c = scratch[k].0;
                let mut v = 0.0;
                while k < scratch.len() && scratch[k].0 == c {
                    v += scratch[k].1;
                    k += 1;
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr[i + 1] = col_idx.len();
        }
        let m = SparseSymMatrix { n, row_ptr, col_idx, values };
        m.check_symmetry()?;
        Ok(m)
    }

    fn check_symmetry(&self) -> Result<()> {
        let scale = self
            .values
            .iter()
            .fold(0f64, |acc, v| acc.max(v.abs()));
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                if j < i {
                    continue;
                }
                let vt = self.get(j, i);
                let v = self.values[p];
                if (v - vt).abs() > 1e-12 * scale.max(1e-300) {
                    return Err(Error::Invalid(format!(
                        "matrix not symmetric at ({i}, {j}): {v} vs {vt}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[p] * x[self.col_idx[p]];
            }
            y[i] = acc;
        }
    }

    /// x^T A x
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let mut row = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.values[p] * x[self.col_idx[p]];
            }
            acc += x[i] * row;
        }
        acc
    }

    /// c * A, same pattern.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= c;
        }
        out
    }

    /// A + diag(d); inserts missing diagonal entries.
    pub fn plus_diag(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.n);
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz() + self.n);
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                triplets.push((i, self.col_idx[p], self.values[p]));
            }
            triplets.push((i, i, d[i]));
        }
        SparseSymMatrix::from_triplets(self.n, &triplets).expect("pattern stays symmetric")
    }

    /// Dense copy, for small oracles and tests.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[p])] = self.values[p];
            }
        }
        m
    }

    /// MatrixMarket coordinate format (symmetric, lower triangle, 1-based).
    pub fn write_matrix_market<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        let lower: Vec<(usize, usize, f64)> = (0..self.n)
            .flat_map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter()
                    .zip(vals)
                    .filter(move |(&j, _)| j <= i)
                    .map(move |(&j, &v)| (i, j, v))
                    .collect::<Vec<_>>()
            })
            .collect();
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "{} {} {}", self.n, self.n, lower.len())?;
        for (i, j, v) in lower {
            writeln!(w, "{} {} {v:e}", i + 1, j + 1)?;
        }
        Ok(())
    }
}

/// Reverse Cuthill-McKee ordering of the matrix graph.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseSymMatrix) -> Vec<usize> {
    let n = a.n();
    let degree = |v: usize| a.row(v).0.iter().filter(|&&j| j != v).count();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();
    let mut nbrs = Vec::new();

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start: run BFS twice from the component's
        // min-degree vertex and restart from the farthest min-degree vertex
        let mut comp = vec![seed];
        let mut seen = std::collections::HashSet::from([seed]);
        let mut qi = 0;
        while qi < comp.len() {
            let v = comp[qi];
            qi += 1;
            for &w in a.row(v).0 {
                if w != v && seen.insert(w) {
                    comp.push(w);
                }
            }
        }
        let mut start = *comp.iter().min_by_key(|&&v| (degree(v), v)).unwrap();
        for _ in 0..2 {
            let far = bfs_last_level(a, start);
            let cand = *far.iter().min_by_key(|&&v| (degree(v), v)).unwrap();
            if cand == start {
                break;
            }
            start = cand;
        }

        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            for &w in a.row(v).0 {
                if w != v && !visited[w] {
                    visited[w] = true;
                    nbrs.push(w);
                }
            }
            nbrs.sort_unstable_by_key(|&w| (degree(w), w));
            for &w in &nbrs {
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_last_level(a: &SparseSymMatrix, start: usize) -> Vec<usize> {
    let mut dist = std::collections::HashMap::from([(start, 0usize)]);
    let mut frontier = vec![start];
    let mut last = frontier.clone();
    while !frontier.is_empty() {
        last = frontier.clone();
        let mut next = Vec::new();
        for &v in &frontier {
            let dv = dist[&v];
            for &w in a.row(v).0 {
                if w != v && !dist.contains_key(&w) {
                    dist.insert(w, dv + 1);
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    last
}

/// LDL^T factorization of a symmetric positive definite matrix under a
/// fill-reducing permutation. `L` is unit lower triangular, stored by
/// columns; `d` holds the pivots.
#[derive(Debug, Clone)]
pub struct Ldlt {
    n: usize,
    /// perm[new] = old
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl Ldlt {
    pub fn factor(a: &SparseSymMatrix) -> Result<Self> {
        let perm = reverse_cuthill_mckee(a);
        Self::factor_with_perm(a, perm)
    }

    pub fn factor_with_perm(a: &SparseSymMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.n();
        let mut iperm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // upper triangle of P A P^T in CSC
        let mut counts = vec![0usize; n + 1];
        for i_old in 0..n {
            for &j_old in a.row(i_old).0 {
                if j_old < i_old {
                    continue;
                }
                let (r, c) = sorted(iperm[i_old], iperm[j_old]);
                let _ = r;
                counts[c + 1] += 1;
            }
        }
        for k in 0..n {
            counts[k + 1] += counts[k];
        }
        let nnz_upper = counts[n];
        let mut ri = vec![0usize; nnz_upper];
        let mut vx = vec![0f64; nnz_upper];
        let mut fill = counts.clone();
        for i_old in 0..n {
            let (cols, vals) = a.row(i_old);
            for (&j_old, &v) in cols.iter().zip(vals) {
                if j_old < i_old {
                    continue;
                }
                let (r, c) = sorted(iperm[i_old], iperm[j_old]);
                ri[fill[c]] = r;
                vx[fill[c]] = v;
                fill[c] += 1;
            }
        }
        let cp = counts;

        // symbolic: elimination tree and column counts of L
        let mut parent = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut flag = vec![NONE; n];
        for k in 0..n {
            flag[k] = k;
            for p in cp[k]..cp[k + 1] {
                let mut i = ri[p];
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }

        // numeric, up-looking over the etree
        let mut li = vec![0usize; lp[n]];
        let mut lx = vec![0f64; lp[n]];
        let mut d = vec![0f64; n];
        let mut y = vec![0f64; n];
        let mut pattern = vec![0usize; n];
        let mut walk = vec![0usize; n];
        let mut used = vec![0usize; n];
        let mut flag = vec![NONE; n];
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for p in cp[k]..cp[k + 1] {
                let i = ri[p];
                y[i] += vx[p];
                let mut len = 0;
                let mut ii = i;
                while flag[ii] != k {
                    walk[len] = ii;
                    len += 1;
                    flag[ii] = k;
                    ii = parent[ii];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    pattern[top] = walk[len];
                }
            }
            let mut dk = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let p2 = lp[i] + used[i];
                for p in lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                dk -= l_ki * yi;
                li[p2] = k;
                lx[p2] = l_ki;
                used[i] += 1;
            }
            if !(dk > 0.0) || !dk.is_finite() {
                return Err(Error::FactorizationFailed { pivot: k, value: dk });
            }
            d[k] = dk;
        }

        Ok(Ldlt { n, perm, lp, li, lx, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nonzeros in the L factor (excluding the unit diagonal).
    pub fn l_nnz(&self) -> usize {
        self.lx.len()
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0f64; self.n];
        self.solve_into(b, &mut x);
        x
    }

    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        let mut z = vec![0f64; self.n];
        for k in 0..self.n {
            z[k] = b[self.perm[k]];
        }
        for j in 0..self.n {
            let zj = z[j];
            for p in self.lp[j]..self.lp[j + 1] {
                z[self.li[p]] -= self.lx[p] * zj;
            }
        }
        for j in 0..self.n {
            z[j] /= self.d[j];
        }
        for j in (0..self.n).rev() {
            let mut zj = z[j];
            for p in self.lp[j]..self.lp[j + 1] {
                zj -= self.lx[p] * z[self.li[p]];
            }
            z[j] = zj;
        }
        for k in 0..self.n {
            x[self.perm[k]] = z[k];
        }
    }

    /// Solve with iterative refinement until the relative residual
    /// ||Ax - b|| / ||b|| is at most `tol` (at most `max_rounds` corrections).
    /// Returns the achieved relative residual.
    pub fn solve_refined_into(
        &self,
        a: &SparseSymMatrix,
        b: &[f64],
        x: &mut [f64],
        tol: f64,
        max_rounds: usize,
    ) -> f64 {
        self.solve_into(b, x);
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            for v in x.iter_mut() {
                *v = 0.0;
            }
            return 0.0;
        }
        let mut r = vec![0f64; self.n];
        let mut rel = f64::INFINITY;
        for round in 0..=max_rounds {
            a.mul_vec(x, &mut r);
            for i in 0..self.n {
                r[i] = b[i] - r[i];
            }
            rel = norm2(&r) / bnorm;
            if rel <= tol || round == max_rounds {
                break;
            }
            let dx = self.solve(&r);
            for i in 0..self.n {
                x[i] += dx[i];
            }
        }
        rel
    }
}

fn sorted(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn random_spd(n: usize, seed: u64) -> SparseSymMatrix {
        // diagonally dominant banded matrix
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut triplets = Vec::new();
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in (i.saturating_sub(3))..i {
                let v: f64 = rng.random_range(-1.0..1.0);
                triplets.push((i, j, v));
                triplets.push((j, i, v));
                row_sum += v.abs();
            }
            triplets.push((i, i, row_sum + 3.0 + rng.random_range(0.0..1.0)));
        }
        SparseSymMatrix::from_triplets(n, &triplets).unwrap()
    }

    #[test]
    fn triplet_assembly_sums_duplicates() {
        let a = SparseSymMatrix::from_triplets(
            2,
            &[(0, 0, 1.0), (0, 1, 0.5), (0, 1, 0.5), (1, 0, 1.0), (1, 1, 2.0)],
        )
        .unwrap();
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), 1.0);
        assert_eq!(a.nnz(), 4);
    }

    #[test]
    fn asymmetric_rejected() {
        let err = SparseSymMatrix::from_triplets(2, &[(0, 1, 1.0), (1, 0, 2.0)]).unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
    }

    #[test]
    fn rcm_is_permutation() {
        let a = random_spd(50, 1);
        let perm = reverse_cuthill_mckee(&a);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn ldlt_matches_dense_solve() {
        for seed in 0..5 {
            let n = 40 + 10 * seed as usize;
            let a = random_spd(n, seed);
            let f = Ldlt::factor(&a).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 99);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = f.solve(&b);

            let dense = a.to_dense();
            let xd = dense
                .lu()
                .solve(&nalgebra::DVector::from_column_slice(&b))
                .unwrap();
            for i in 0..n {
                assert!((x[i] - xd[i]).abs() < 1e-9, "component {i}: {} vs {}", x[i], xd[i]);
            }
        }
    }

    #[test]
    fn refined_solve_meets_tolerance() {
        let a = random_spd(120, 7);
        let f = Ldlt::factor(&a).unwrap();
        let b: Vec<f64> = (0..120).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut x = vec![0.0; 120];
        let rel = f.solve_refined_into(&a, &b, &mut x, 1e-12, 3);
        assert!(rel <= 1e-12, "rel residual {rel}");
    }

    #[test]
    fn not_positive_definite_detected() {
        let a = SparseSymMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        assert!(matches!(
            Ldlt::factor(&a),
            Err(Error::FactorizationFailed { .. })
        ));
    }

    #[test]
    fn matrix_market_output() {
        let a =
            SparseSymMatrix::from_triplets(2, &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)])
                .unwrap();
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n"));
        assert!(s.contains("2 1 -1e0"));
    }

    #[test]
    fn quadratic_form_matches_dense() {
        let a = random_spd(30, 3);
        let x: Vec<f64> = (0..30).map(|i| (i as f64).cos()).collect();
        let dense = a.to_dense();
        let xv = nalgebra::DVector::from_column_slice(&x);
        let expect = (xv.transpose() * &dense * &xv)[(0, 0)];
        assert!((a.quadratic_form(&x) - expect).abs() < 1e-10 * expect.abs());
    }
}
