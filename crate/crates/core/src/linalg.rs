//! Small dense least squares.
//!
//! [`lstsq`] factors `A P = Q R` with Householder reflections and column
//! pivoting. When the numerical rank `r` is below the column count, the
//! leading `r` rows of `R` are factored again from the right (a complete
//! orthogonal decomposition) so the returned solution is the minimum-norm
//! minimiser. Rank is decided on the pivoted diagonal with a relative
//! threshold of [`RANK_TOLERANCE`].

use crate::error::{Error, Result};

pub const RANK_TOLERANCE: f64 = 1e-12;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn mul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(l, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Copy without the listed columns.
    pub fn drop_columns(&self, drop: &[usize]) -> DenseMatrix {
        let keep: Vec<usize> = (0..self.cols).filter(|c| !drop.contains(c)).collect();
        let mut out = DenseMatrix::zeros(self.rows, keep.len());
        for i in 0..self.rows {
            for (jj, &j) in keep.iter().enumerate() {
                out[(i, jj)] = self[(i, j)];
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Householder reflector `I - beta v v^T` acting on indices `start..`.
struct Reflector {
    start: usize,
    v: Vec<f64>,
    beta: f64,
}

impl Reflector {
    /// Reflector mapping `x` onto a multiple of the first unit vector.
    /// Returns the reflector and the resulting leading entry.
    fn annihilating(start: usize, x: &[f64]) -> (Option<Self>, f64) {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return (None, 0.0);
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|e| e * e).sum();
        if vtv == 0.0 {
            return (None, x[0]);
        }
        (
            Some(Self {
                start,
                v,
                beta: 2.0 / vtv,
            }),
            alpha,
        )
    }

    fn apply(&self, y: &mut [f64]) {
        let tail = &mut y[self.start..self.start + self.v.len()];
        let dot: f64 = self.v.iter().zip(tail.iter()).map(|(a, b)| a * b).sum();
        let s = self.beta * dot;
        for (t, v) in tail.iter_mut().zip(&self.v) {
            *t -= s * v;
        }
    }
}

/// Applies a reflector to columns `from..` of a row-major matrix (rows = reflected index).
fn reflect_columns(w: &mut DenseMatrix, h: &Reflector, from: usize) {
    let cols = w.cols();
    for j in from..cols {
        let mut dot = 0.0;
        for (l, v) in h.v.iter().enumerate() {
            dot += v * w[(h.start + l, j)];
        }
        let s = h.beta * dot;
        if s == 0.0 {
            continue;
        }
        for (l, v) in h.v.iter().enumerate() {
            w[(h.start + l, j)] -= s * v;
        }
    }
}

/// Least-squares solution of `a x ~= b`; minimum norm when `a` is rank deficient.
pub fn lstsq(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (a.rows(), a.cols());
    if b.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "{m}x{n} system with right-hand side of length {}",
            b.len()
        )));
    }
    if m == 0 || n == 0 {
        return Ok(vec![0.0; n]);
    }

    let mut w = a.clone();
    let mut c = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let steps = m.min(n);
    let mut diag = Vec::with_capacity(steps);

    for j in 0..steps {
        // Pivot on the largest remaining column norm.
        let mut best = j;
        let mut best_norm = -1.0;
        for col in j..n {
            let norm: f64 = (j..m).map(|i| w[(i, col)] * w[(i, col)]).sum();
            if norm > best_norm {
                best_norm = norm;
                best = col;
            }
        }
        if best != j {
            for i in 0..m {
                let tmp = w[(i, j)];
                w[(i, j)] = w[(i, best)];
                w[(i, best)] = tmp;
            }
            perm.swap(j, best);
        }
        let x: Vec<f64> = (j..m).map(|i| w[(i, j)]).collect();
        let (h, lead) = Reflector::annihilating(j, &x);
        if let Some(h) = h {
            reflect_columns(&mut w, &h, j);
            h.apply(&mut c);
        }
        w[(j, j)] = lead;
        for i in j + 1..m {
            w[(i, j)] = 0.0;
        }
        diag.push(lead);
    }

    let scale = diag[0].abs();
    let rank = if scale == 0.0 {
        0
    } else {
        diag.iter().take_while(|d| d.abs() > RANK_TOLERANCE * scale).count()
    };
    let mut y = vec![0.0; n];
    if rank == 0 {
        return Ok(y);
    }

    if rank == n {
        for i in (0..n).rev() {
            let mut s = c[i];
            for l in i + 1..n {
                s -= w[(i, l)] * y[l];
            }
            y[i] = s / w[(i, i)];
        }
    } else {
        // Factor the leading rows from the right: R_top^T = H_0 .. H_{r-1} [S; 0].
        let mut rt = DenseMatrix::zeros(n, rank);
        for i in 0..rank {
            for l in i..n {
                rt[(l, i)] = w[(i, l)];
            }
        }
        let mut reflectors = Vec::with_capacity(rank);
        for i in 0..rank {
            let x: Vec<f64> = (i..n).map(|l| rt[(l, i)]).collect();
            let (h, lead) = Reflector::annihilating(i, &x);
            if let Some(h) = h {
                reflect_columns(&mut rt, &h, i);
                reflectors.push(h);
            }
            rt[(i, i)] = lead;
            for l in i + 1..n {
                rt[(l, i)] = 0.0;
            }
        }
        // S^T is lower triangular: forward substitution.
        for i in 0..rank {
            let mut s = c[i];
            for l in 0..i {
                s -= rt[(l, i)] * y[l];
            }
            y[i] = s / rt[(i, i)];
        }
        for h in reflectors.iter().rev() {
            h.apply(&mut y);
        }
    }

    let mut x = vec![0.0; n];
    for (j, &p) in perm.iter().enumerate() {
        x[p] = y[j];
    }
    Ok(x)
}

/// Solve-then-overwrite: [`lstsq`], then every negative entry at a clamp index becomes zero.
pub fn modified_lstsq(a: &DenseMatrix, b: &[f64], clamp_indices: &[usize]) -> Result<Vec<f64>> {
    if let Some(&bad) = clamp_indices.iter().find(|&&i| i >= a.cols()) {
        return Err(Error::ShapeMismatch(format!(
            "clamp index {bad} outside solution of length {}",
            a.cols()
        )));
    }
    let mut x = lstsq(a, b)?;
    for &i in clamp_indices {
        if x[i] < 0.0 {
            x[i] = 0.0;
        }
    }
    Ok(x)
}

/// Euclidean norm of `a x - b`.
pub fn residual(a: &DenseMatrix, x: &[f64], b: &[f64]) -> Result<f64> {
    if b.len() != a.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} rows against right-hand side of length {}",
            a.rows(),
            b.len()
        )));
    }
    let ax = a.mul_vec(x)?;
    Ok(ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
}
