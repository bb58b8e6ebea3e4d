//! Dense linear algebra for small matrices (d <= 8).
//!
//! Everything here is self-contained: Gaussian elimination with partial
//! pivoting, cyclic Jacobi for symmetric eigenvalues, and a shifted QR
//! iteration on the Hessenberg form (complex arithmetic) for general
//! eigenvalues. At these sizes the O(d^3)–O(d^6) costs are negligible and
//! a dependency would buy nothing.

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    NotSquare { rows: usize, cols: usize },
    Singular,
    TooLarge { dim: usize, max: usize },
    NoConvergence(&'static str),
    Shape(String),
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotSquare { rows, cols } => write!(f, "matrix is {rows}x{cols}, need square"),
            Self::Singular => write!(f, "singular system"),
            Self::TooLarge { dim, max } => write!(f, "dimension {dim} exceeds supported max {max}"),
            Self::NoConvergence(which) => write!(f, "{which} did not converge"),
            Self::Shape(msg) => write!(f, "shape: {msg}"),
        }
    }
}

impl std::error::Error for LinalgError {}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::Shape("ragged rows".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Ok(Mat {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn add_scaled(&self, other: &Mat, s: f64) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + s * b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Solve `A x = b` in place by Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &Mat, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    if b.len() != n {
        return Err(LinalgError::Shape(format!(
            "rhs length {} for n = {n}",
            b.len()
        )));
    }
    let mut m = a.data.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].abs();
        for r in col + 1..n {
            let v = m[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best < 1e-300 {
            return Err(LinalgError::Singular);
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let factor = m[r * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            m[r * n + col] = 0.0;
            for j in col + 1..n {
                m[r * n + j] -= factor * m[col * n + j];
            }
            x[r] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for j in col + 1..n {
            acc -= m[col * n + j] * x[j];
        }
        x[col] = acc / m[col * n + col];
    }
    Ok(x)
}

/// Solve `B X = A` column by column, i.e. compute `B^{-1} A`.
pub fn solve_matrix(b: &Mat, a: &Mat) -> Result<Mat, LinalgError> {
    if !b.is_square() || b.rows != a.rows {
        return Err(LinalgError::Shape(
            "B must be square with A's row count".into(),
        ));
    }
    let n = b.rows;
    let mut out = Mat::zeros(n, a.cols);
    for j in 0..a.cols {
        let col: Vec<f64> = (0..n).map(|i| a[(i, j)]).collect();
        let x = solve_dense(b, &col)?;
        for i in 0..n {
            out[(i, j)] = x[i];
        }
    }
    Ok(out)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps, ascending.
pub fn symmetric_eigenvalues(a: &Mat) -> Result<Vec<f64>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    let mut m = a.data.clone();
    let idx = |i: usize, j: usize| i * n + j;
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[idx(i, j)] * m[idx(i, j)];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + a.frobenius()) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[idx(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[idx(p, p)];
                let aqq = m[idx(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[idx(k, p)];
                    let akq = m[idx(k, q)];
                    m[idx(k, p)] = c * akp - s * akq;
                    m[idx(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[idx(p, k)];
                    let aqk = m[idx(q, k)];
                    m[idx(p, k)] = c * apk - s * aqk;
                    m[idx(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[idx(i, i)]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eig)
}

/// Spectral norm via power iteration on `M^T M` (deterministic start).
pub fn spectral_norm(m: &Mat) -> f64 {
    let s = m.transpose().matmul(m);
    let n = s.rows;
    if n == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    let mut w = vec![0.0; n];
    for _ in 0..500 {
        s.matvec(&v, &mut w);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return 0.0;
        }
        for x in w.iter_mut() {
            *x /= norm;
        }
        std::mem::swap(&mut v, &mut w);
        let new_lambda = norm;
        if (new_lambda - lambda).abs() <= 1e-15 * new_lambda.max(1.0) {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    lambda.max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C64 {
    pub re: f64,
    pub im: f64,
}

impl C64 {
    pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        C64 { re, im }
    }

    pub fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn conj(self) -> Self {
        C64::new(self.re, -self.im)
    }

    pub fn sqrt(self) -> Self {
        let r = self.abs();
        if r == 0.0 {
            return C64::ZERO;
        }
        let re = ((r + self.re) / 2.0).max(0.0).sqrt();
        let im_mag = ((r - self.re) / 2.0).max(0.0).sqrt();
        C64::new(re, if self.im >= 0.0 { im_mag } else { -im_mag })
    }
}

impl Add for C64 {
    type Output = C64;
    fn add(self, o: C64) -> C64 {
        C64::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for C64 {
    type Output = C64;
    fn sub(self, o: C64) -> C64 {
        C64::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for C64 {
    type Output = C64;
    fn mul(self, o: C64) -> C64 {
        C64::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

impl Div for C64 {
    type Output = C64;
    fn div(self, o: C64) -> C64 {
        let d = o.re * o.re + o.im * o.im;
        C64::new(
            (self.re * o.re + self.im * o.im) / d,
            (self.im * o.re - self.re * o.im) / d,
        )
    }
}

/// Eigenvalues of a general real matrix: Householder reduction to upper
/// Hessenberg, then complex shifted QR with deflation.
pub fn eigenvalues(a: &Mat) -> Result<Vec<C64>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![C64::new(a[(0, 0)], 0.0)]);
    }

    // Householder reduction to Hessenberg form (real arithmetic).
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        let mut norm = 0.0;
        for i in k + 1..n {
            norm += h[(i, k)] * h[(i, k)];
        }
        let norm = norm.sqrt();
        if norm < 1e-300 {
            continue;
        }
        let alpha = if h[(k + 1, k)] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n];
        v[k + 1] = h[(k + 1, k)] - alpha;
        for i in k + 2..n {
            v[i] = h[(i, k)];
        }
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv < 1e-300 {
            continue;
        }
        // H <- P H P with P = I - 2 v v^T / v^T v
        for j in 0..n {
            let mut dot = 0.0;
            for i in k + 1..n {
                dot += v[i] * h[(i, j)];
            }
            let f = 2.0 * dot / vtv;
            for i in k + 1..n {
                h[(i, j)] -= f * v[i];
            }
        }
        for i in 0..n {
            let mut dot = 0.0;
            for j in k + 1..n {
                dot += h[(i, j)] * v[j];
            }
            let f = 2.0 * dot / vtv;
            for j in k + 1..n {
                h[(i, j)] -= f * v[j];
            }
        }
    }

    // Complex shifted QR on the Hessenberg matrix.
    let mut hc: Vec<C64> = h.data.iter().map(|&x| C64::new(x, 0.0)).collect();
    let idx = |i: usize, j: usize| i * n + j;
    let mut eigs = Vec::with_capacity(n);
    let mut m = n; // active block is 0..m
    let scale = a.max_abs().max(1.0);
    let tol = 1e-14 * scale;
    let mut iterations = 0usize;
    while m > 0 {
        if m == 1 {
            eigs.push(hc[idx(0, 0)]);
            m = 0;
            continue;
        }
        // Deflate when the last subdiagonal of the active block vanishes.
        let sub = hc[idx(m - 1, m - 2)].abs();
        let local = hc[idx(m - 1, m - 1)].abs() + hc[idx(m - 2, m - 2)].abs();
        if sub <= tol.max(1e-16 * local) {
            eigs.push(hc[idx(m - 1, m - 1)]);
            m -= 1;
            continue;
        }
        iterations += 1;
        if iterations > 200 * n {
            return Err(LinalgError::NoConvergence("QR eigenvalue iteration"));
        }
        // Wilkinson shift from the trailing 2x2 block.
        let a11 = hc[idx(m - 2, m - 2)];
        let a12 = hc[idx(m - 2, m - 1)];
        let a21 = hc[idx(m - 1, m - 2)];
        let a22 = hc[idx(m - 1, m - 1)];
        let tr = a11 + a22;
        let half = C64::new(0.5, 0.0);
        let diff = a11 - a22;
        let disc = (diff * diff + C64::new(4.0, 0.0) * a12 * a21).sqrt();
        let l1 = (tr + disc) * half;
        let l2 = (tr - disc) * half;
        let mu = if (l1 - a22).abs() < (l2 - a22).abs() {
            l1
        } else {
            l2
        };
        // QR step via Givens rotations on (H - mu I).
        for i in 0..m {
            hc[idx(i, i)] = hc[idx(i, i)] - mu;
        }
        let mut rot = Vec::with_capacity(m - 1);
        for k in 0..m - 1 {
            let x = hc[idx(k, k)];
            let y = hc[idx(k + 1, k)];
            let r = (x.abs().powi(2) + y.abs().powi(2)).sqrt();
            let (c, s) = if r < 1e-300 {
                (C64::new(1.0, 0.0), C64::ZERO)
            } else {
                let rinv = C64::new(1.0 / r, 0.0);
                (x.conj() * rinv, y.conj() * rinv)
            };
            for j in k..m {
                let hkj = hc[idx(k, j)];
                let hk1j = hc[idx(k + 1, j)];
                hc[idx(k, j)] = c * hkj + s * hk1j;
                hc[idx(k + 1, j)] = (s.conj() * hkj * C64::new(-1.0, 0.0)) + c.conj() * hk1j;
            }
            rot.push((c, s));
        }
        for (k, (c, s)) in rot.iter().enumerate() {
            for i in 0..(k + 2).min(m) {
                let hik = hc[idx(i, k)];
                let hik1 = hc[idx(i, k + 1)];
                hc[idx(i, k)] = hik * c.conj() + hik1 * s.conj();
                hc[idx(i, k + 1)] = hik * *s * C64::new(-1.0, 0.0) + hik1 * *c;
            }
        }
        for i in 0..m {
            hc[idx(i, i)] = hc[idx(i, i)] + mu;
        }
    }
    Ok(eigs)
}

/// Spectral radius: max eigenvalue modulus.
pub fn spectral_radius(a: &Mat) -> Result<f64, LinalgError> {
    Ok(eigenvalues(a)?
        .into_iter()
        .map(C64::abs)
        .fold(0.0, f64::max))
}
