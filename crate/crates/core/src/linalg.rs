//! Dense Householder QR least squares.

use crate::scalar::Real;

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r + self.rows * c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r + self.rows * c] = v;
    }

    pub fn column(&self, c: usize) -> &[T] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    fn column_mut(&mut self, c: usize) -> &mut [T] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        for (c, &xc) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.column(c)) {
                *o += a * xc;
            }
        }
        out
    }

    /// `A^T v`.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.cols)
            .map(|c| self.column(c).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankDeficient {
    pub column: usize,
}

/// Minimizes `||A x - b||` by Householder QR. Fails when a diagonal entry of
/// `R` is negligible relative to the largest column norm.
pub fn lstsq_qr<T: Real>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>, RankDeficient> {
    let (m, n) = (a.rows, a.cols);
    assert!(m >= n, "least squares needs rows >= cols");
    assert_eq!(b.len(), m);
    let mut qr = a.clone();
    let mut rhs = b.to_vec();
    let scale = (0..n)
        .map(|c| norm(qr.column(c)))
        .fold(T::zero(), T::max);
    let tol = T::epsilon() * T::from_usize_lossy(m.max(n)) * T::lit(100.0) * scale;
    let mut diag = vec![T::zero(); n];

    for k in 0..n {
        let col = &qr.column(k)[k..];
        let alpha = norm(col);
        if alpha <= tol {
            return Err(RankDeficient { column: k });
        }
        let x0 = col[0];
        let alpha = if x0 > T::zero() { -alpha } else { alpha };
        // v = x - alpha e1, stored in place of the column below the diagonal
        let mut v: Vec<T> = col.to_vec();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        diag[k] = alpha;
        if vnorm2 > T::zero() {
            for j in k + 1..n {
                let cj = &mut qr.column_mut(j)[k..];
                let dot: T = v.iter().zip(cj.iter()).map(|(&p, &q)| p * q).sum();
                let f = T::lit(2.0) * dot / vnorm2;
                for (c, &vi) in cj.iter_mut().zip(&v) {
                    *c -= f * vi;
                }
            }
            let r = &mut rhs[k..];
            let dot: T = v.iter().zip(r.iter()).map(|(&p, &q)| p * q).sum();
            let f = T::lit(2.0) * dot / vnorm2;
            for (c, &vi) in r.iter_mut().zip(&v) {
                *c -= f * vi;
            }
        }
    }

    let mut x = vec![T::zero(); n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in k + 1..n {
            s -= qr.get(k, j) * x[j];
        }
        x[k] = s / diag[k];
    }
    Ok(x)
}

fn norm<T: Real>(v: &[T]) -> T {
    let big = v.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    if big == T::zero() {
        return T::zero();
    }
    (v.iter().map(|&x| (x / big) * (x / big)).sum::<T>()).sqrt() * big
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_fit() {
        let mut a = Matrix::zeros(4, 2);
        for i in 0..4 {
            a.set(i, 0, 1.0);
            a.set(i, 1, i as f64);
        }
        let b = [1.0, 3.0, 5.0, 7.0];
        let x = lstsq_qr(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn overdetermined_mean() {
        let mut a = Matrix::<f64>::zeros(3, 1);
        for i in 0..3 {
            a.set(i, 0, 1.0);
        }
        let x = lstsq_qr(&a, &[1.0, 2.0, 6.0]).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn detects_rank_deficiency() {
        let mut a = Matrix::zeros(5, 2);
        for i in 0..5 {
            a.set(i, 0, i as f64);
            a.set(i, 1, 2.0 * i as f64);
        }
        assert_eq!(lstsq_qr(&a, &[0.0; 5]), Err(RankDeficient { column: 1 }));
    }
}
