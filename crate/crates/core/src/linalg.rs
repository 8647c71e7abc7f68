//! Small dense linear algebra over any [`Scalar`].
//!
//! The matrices involved here are at most 6×6, so a row-major `Vec` with
//! straightforward loops is all that is needed. Staying generic keeps the
//! observer design usable in extended precision, which matters for the
//! dead-beat gains: the non-sticking observability matrix has a condition
//! number near 6e7 with the nominal parameters.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Panics if the rows are ragged.
    pub fn from_rows<const C: usize>(rows: &[[T; C]]) -> Self {
        Self::from_fn(rows.len(), C, |i, j| rows[i][j])
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn column(values: &[T]) -> Self {
        Self::from_fn(values.len(), 1, |i, _| values[i])
    }

    pub fn row(values: &[T]) -> Self {
        Self::from_fn(1, values.len(), |_, j| values[j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: T) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| v * s).collect() }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in matrix-vector product");
        (0..self.rows)
            .map(|i| (0..self.cols).fold(T::zero(), |acc, j| acc + self[(i, j)] * v[j]))
            .collect()
    }

    pub fn col_vec(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row_vec(&self, i: usize) -> Vec<T> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    /// Copy of the `rows × cols` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Mat<T>) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| (0..self.cols).fold(T::zero(), |acc, j| acc + self[(i, j)].abs()))
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn symmetrized(&self) -> Self {
        (self + &self.transpose()).scale(T::of(0.5))
    }

    /// `‖A − Aᵀ‖∞`.
    pub fn asymmetry(&self) -> T {
        (self - &self.transpose()).norm_inf()
    }

    pub fn powi(&self, n: u32) -> Self {
        assert!(self.is_square());
        (0..n).fold(Self::identity(self.rows), |acc, _| &acc * self)
    }

    /// Gauss-Jordan inverse with partial pivoting; `None` when a pivot is
    /// exactly zero or the result is not finite.
    pub fn inverse(&self) -> Option<Self> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let pivot = (col..n).max_by(|&i, &j| {
                a[(i, col)].abs().partial_cmp(&a[(j, col)].abs()).unwrap_or(std::cmp::Ordering::Equal)
            })?;
            if a[(pivot, col)] == T::zero() {
                return None;
            }
            a.swap_rows(pivot, col);
            inv.swap_rows(pivot, col);
            let p = a[(col, col)];
            for j in 0..n {
                a[(col, j)] = a[(col, j)] / p;
                inv[(col, j)] = inv[(col, j)] / p;
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = a[(i, col)];
                if f == T::zero() {
                    continue;
                }
                for j in 0..n {
                    a[(i, j)] = a[(i, j)] - f * a[(col, j)];
                    inv[(i, j)] = inv[(i, j)] - f * inv[(col, j)];
                }
            }
        }
        inv.is_finite().then_some(inv)
    }

    /// Solves `A x = b` for a single right-hand side.
    pub fn solve(&self, b: &[T]) -> Option<Vec<T>> {
        self.inverse().map(|inv| inv.mul_vec(b))
    }

    /// Numerical rank by row-echelon reduction. Each row is scaled to unit
    /// infinity norm first, so `tol` is relative.
    pub fn rank(&self, tol: T) -> usize {
        let mut a = self.clone();
        for i in 0..a.rows {
            let m = (0..a.cols).fold(T::zero(), |m, j| m.max(a[(i, j)].abs()));
            if m > T::zero() {
                for j in 0..a.cols {
                    a[(i, j)] = a[(i, j)] / m;
                }
            }
        }
        let mut rank = 0;
        for col in 0..a.cols {
            if rank == a.rows {
                break;
            }
            let pivot = (rank..a.rows)
                .max_by(|&i, &j| {
                    a[(i, col)].abs().partial_cmp(&a[(j, col)].abs()).unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("non-empty pivot range");
            if a[(pivot, col)].abs() <= tol {
                continue;
            }
            a.swap_rows(pivot, rank);
            for i in rank + 1..a.rows {
                let f = a[(i, col)] / a[(rank, col)];
                for j in col..a.cols {
                    a[(i, j)] = a[(i, j)] - f * a[(rank, j)];
                }
            }
            rank += 1;
        }
        rank
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(i * self.cols + c, j * self.cols + c);
        }
    }

    pub fn map_to<U: Scalar>(&self, f: impl Fn(T) -> U) -> Mat<U> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<'a, T: Scalar> Mul<&'a Mat<T>> for &'a Mat<T> {
    type Output = Mat<T>;
    fn mul(self, rhs: &'a Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matrix product");
        Mat::from_fn(self.rows, rhs.cols, |i, j| {
            (0..self.cols).fold(T::zero(), |acc, k| acc + self[(i, k)] * rhs[(k, j)])
        })
    }
}

impl<'a, T: Scalar> Add<&'a Mat<T>> for &'a Mat<T> {
    type Output = Mat<T>;
    fn add(self, rhs: &'a Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + rhs[(i, j)])
    }
}

impl<'a, T: Scalar> Sub<&'a Mat<T>> for &'a Mat<T> {
    type Output = Mat<T>;
    fn sub(self, rhs: &'a Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - rhs[(i, j)])
    }
}

impl<T: Scalar> Neg for &Mat<T> {
    type Output = Mat<T>;
    fn neg(self) -> Mat<T> {
        self.scale(-T::one())
    }
}

/// Matrix exponential by scaling and squaring around a Taylor series.
///
/// The argument is scaled until its infinity norm is at most 1/2 and the
/// series is summed until the next term drops below machine epsilon of `T`,
/// so the result is accurate to the working precision of the scalar type.
pub fn expm<T: Scalar>(a: &Mat<T>) -> Mat<T> {
    assert!(a.is_square());
    let n = a.rows();
    let norm = a.norm_inf();
    let half = T::of(0.5);
    let mut squarings = 0u32;
    let mut scaled_norm = norm;
    while scaled_norm > half {
        scaled_norm = scaled_norm * half;
        squarings += 1;
    }
    let scaled = a.scale(T::of(0.5).powi(squarings as i32));

    let mut sum = Mat::identity(n);
    let mut term = Mat::identity(n);
    for k in 1..200 {
        term = (&term * &scaled).scale(T::one() / T::of(k as f64));
        sum = &sum + &term;
        if term.max_abs() <= T::precision() * sum.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Zero-order-hold discretization `(e^{A dt}, ∫₀^dt e^{Aτ} dτ)`.
///
/// Both blocks come out of one exponential of the augmented matrix
/// `[[A, I], [0, 0]]·dt`, which does not need `A` to be invertible.
pub fn zoh_discretize<T: Scalar>(a: &Mat<T>, dt: T) -> (Mat<T>, Mat<T>) {
    assert!(a.is_square());
    let n = a.rows();
    let mut aug = Mat::zeros(2 * n, 2 * n);
    aug.set_block(0, 0, &a.scale(dt));
    aug.set_block(0, n, &Mat::identity(n).scale(dt));
    let e = expm(&aug);
    (e.block(0, 0, n, n), e.block(0, n, n, n))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Scalar>(m: &Mat<T>) -> Vec<T> {
    assert!(m.is_square());
    let n = m.rows();
    let mut a = m.symmetrized();
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                off = off + a[(i, j)] * a[(i, j)];
            }
        }
        let diag = (0..n).fold(T::zero(), |s, i| s + a[(i, i)] * a[(i, i)]);
        if off <= T::precision() * T::precision() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)] == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::of(2.0) * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    eig
}

/// Monic characteristic polynomial `λⁿ + c₁λⁿ⁻¹ + … + cₙ`, returned as
/// `[1, c₁, …, cₙ]` (Faddeev-LeVerrier).
pub fn char_poly<T: Scalar>(a: &Mat<T>) -> Vec<T> {
    assert!(a.is_square());
    let n = a.rows();
    let mut coeffs = vec![T::one()];
    let mut m = Mat::zeros(n, n);
    for k in 1..=n {
        let prev = *coeffs.last().expect("non-empty");
        m = &(a * &m) + &Mat::identity(n).scale(prev);
        let am = a * &m;
        let trace = (0..n).fold(T::zero(), |s, i| s + am[(i, i)]);
        coeffs.push(-trace / T::of(k as f64));
    }
    coeffs
}

/// Monic polynomial with the given real roots, highest power first.
pub fn poly_from_roots<T: Scalar>(roots: &[T]) -> Vec<T> {
    let mut p = vec![T::one()];
    for &r in roots {
        let mut next = vec![T::zero(); p.len() + 1];
        for (i, &c) in p.iter().enumerate() {
            next[i] = next[i] + c;
            next[i + 1] = next[i + 1] - r * c;
        }
        p = next;
    }
    p
}

/// Evaluates a polynomial (highest power first) at a square matrix.
pub fn poly_at_matrix<T: Scalar>(poly: &[T], a: &Mat<T>) -> Mat<T> {
    let n = a.rows();
    poly.iter()
        .fold(Mat::zeros(n, n), |acc, &c| &(&acc * a) + &Mat::identity(n).scale(c))
}

/// `true` iff every root of the polynomial (highest power first) lies strictly
/// inside the unit circle (Schur-Cohn reduction).
pub fn is_schur_stable<T: Scalar>(poly: &[T]) -> bool {
    // work with ascending coefficients a_0 … a_n
    let mut a: Vec<T> = poly.iter().rev().copied().collect();
    while a.len() > 1 {
        let n = a.len() - 1;
        let (a0, an) = (a[0], a[n]);
        if !(a0.abs() < an.abs()) {
            return false;
        }
        a = (0..n).map(|k| an * a[k + 1] - a0 * a[n - k - 1]).collect();
    }
    true
}

/// `true` iff every root of the polynomial (highest power first) has strictly
/// negative real part (Routh array, no sign changes, no zeros).
pub fn is_hurwitz_stable<T: Scalar>(poly: &[T]) -> bool {
    let n = poly.len();
    if n == 0 || poly[0] == T::zero() {
        return false;
    }
    let lead_sign = poly[0].signum();
    let width = n.div_ceil(2);
    let mut prev: Vec<T> = (0..width).map(|i| poly.get(2 * i).copied().unwrap_or(T::zero())).collect();
    let mut cur: Vec<T> = (0..width).map(|i| poly.get(2 * i + 1).copied().unwrap_or(T::zero())).collect();
    for _ in 1..n {
        if !(cur[0] * lead_sign > T::zero()) {
            return false;
        }
        let next: Vec<T> = (0..width)
            .map(|i| {
                let p1 = prev.get(i + 1).copied().unwrap_or(T::zero());
                let c1 = cur.get(i + 1).copied().unwrap_or(T::zero());
                (cur[0] * p1 - prev[0] * c1) / cur[0]
            })
            .collect();
        prev = cur;
        cur = next;
    }
    true
}

/// Stabilizing solution of the filter-form discrete algebraic Riccati equation
/// `P = A P Aᵀ − A P Cᵀ (C P Cᵀ + R)⁻¹ C P Aᵀ + Q` for a scalar output, by the
/// structure-preserving doubling algorithm. `r` must be positive.
pub fn solve_filter_dare<T: Scalar>(a: &Mat<T>, c: &[T], q: &Mat<T>, r: T) -> Option<Mat<T>> {
    let n = a.rows();
    if !(r > T::zero()) {
        return None;
    }
    let ct = Mat::column(c);
    // filter DARE is the control DARE of (Aᵀ, Cᵀ)
    let mut ak = a.transpose();
    let mut gk = (&ct * &ct.transpose()).scale(T::one() / r);
    let mut hk = q.clone();
    let eye = Mat::identity(n);
    for _ in 0..200 {
        let w = (&eye + &(&gk * &hk)).inverse()?;
        let aw = &ak * &w;
        let a_next = &aw * &ak;
        let g_next = &gk + &(&(&aw * &gk) * &ak.transpose());
        let h_next = &hk + &(&(&ak.transpose() * &hk) * &(&w * &ak));
        let delta = (&h_next - &hk).max_abs();
        let scale = h_next.max_abs().max(T::one());
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if !hk.is_finite() {
            return None;
        }
        if delta <= T::precision() * T::of(16.0) * scale {
            return Some(hk.symmetrized());
        }
    }
    None
}
