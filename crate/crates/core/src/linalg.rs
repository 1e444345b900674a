//! Small dense linear algebra on row-major `Vec<Vec<f64>>`.

pub type Matrix = Vec<Vec<f64>>;

pub fn zeros(rows: usize, cols: usize) -> Matrix {
    vec![vec![0.0; cols]; rows]
}

pub fn identity(n: usize) -> Matrix {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn mat_vec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols).map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum()).collect()
        })
        .collect()
}

pub fn transpose(a: &Matrix) -> Matrix {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

/// Sub-matrix picking `rows` and `cols`.
pub fn select(a: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    rows.iter().map(|&i| cols.iter().map(|&j| a[i][j]).collect()).collect()
}

/// LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    /// Factors `a`; `None` when a pivot is exactly zero or not finite.
    pub fn new(a: &Matrix) -> Option<Lu> {
        let n = a.len();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| lu[i][k].abs().total_cmp(&lu[j][k].abs()))?;
            if lu[p][k] == 0.0 || !lu[p][k].is_finite() {
                return None;
            }
            lu.swap(k, p);
            perm.swap(k, p);
            for i in k + 1..n {
                let f = lu[i][k] / lu[k][k];
                lu[i][k] = f;
                for j in k + 1..n {
                    lu[i][j] -= f * lu[k][j];
                }
            }
        }
        Some(Lu { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i][j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i][j] * x[j];
            }
            x[i] /= self.lu[i][i];
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.lu.len();
        let cols: Vec<Vec<f64>> = identity(n).iter().map(|e| self.solve(e)).collect();
        transpose(&cols)
    }

    /// Smallest pivot magnitude.
    pub fn min_pivot(&self) -> f64 {
        (0..self.lu.len()).map(|i| self.lu[i][i].abs()).fold(f64::INFINITY, f64::min)
    }

    /// Ratio of smallest to largest pivot magnitude; a cheap conditioning hint.
    pub fn pivot_ratio(&self) -> f64 {
        let d: Vec<f64> = (0..self.lu.len()).map(|i| self.lu[i][i].abs()).collect();
        let max = d.iter().cloned().fold(0.0, f64::max);
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            0.0
        } else {
            min / max
        }
    }
}

pub fn solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    Lu::new(a).map(|lu| lu.solve(b))
}

pub fn inverse(a: &Matrix) -> Option<Matrix> {
    Lu::new(a).map(|lu| lu.inverse())
}

/// Result of complete-pivoting elimination.
#[derive(Clone, Debug, PartialEq)]
pub struct RankInfo {
    pub rank: usize,
    /// Pivot columns in the order they were chosen.
    pub pivot_cols: Vec<usize>,
    pub pivot_rows: Vec<usize>,
    pub threshold: f64,
}

/// Numeric rank by Gaussian elimination with complete pivoting.
///
/// A pivot counts when it exceeds `rel_tol * max|a|` and `abs_floor`. For
/// symmetric or skew-symmetric input the pivot columns index a nonsingular
/// principal minor, even when the diagonal vanishes.
pub fn pivoted_rank(a: &Matrix, rel_tol: f64, abs_floor: f64) -> RankInfo {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let threshold = (rel_tol * max_abs(a)).max(abs_floor);
    let mut m = a.clone();
    let mut row_ids: Vec<usize> = (0..rows).collect();
    let mut col_ids: Vec<usize> = (0..cols).collect();
    let mut info = RankInfo { rank: 0, pivot_cols: vec![], pivot_rows: vec![], threshold };
    for k in 0..rows.min(cols) {
        let mut best = (k, k, -1.0);
        for i in k..rows {
            for j in k..cols {
                if m[i][j].abs() > best.2 {
                    best = (i, j, m[i][j].abs());
                }
            }
        }
        let (pi, pj, mag) = best;
        if !(mag > threshold) {
            break;
        }
        m.swap(k, pi);
        row_ids.swap(k, pi);
        for row in m.iter_mut() {
            row.swap(k, pj);
        }
        col_ids.swap(k, pj);
        for i in k + 1..rows {
            let f = m[i][k] / m[k][k];
            for j in k..cols {
                m[i][j] -= f * m[k][j];
            }
        }
        info.rank += 1;
        info.pivot_cols.push(col_ids[k]);
        info.pivot_rows.push(row_ids[k]);
    }
    info
}
