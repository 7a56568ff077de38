//! Banded Cholesky factorization for symmetric positive definite systems.
//!
//! Storage is row-oriented: entry `L(i, j)` with `i - bw <= j <= i` lives at
//! `data[i * (bw + 1) + (j - i + bw)]`, so the diagonal sits at offset `bw`.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    pub n: usize,
    pub bw: usize,
    pub data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> BandMatrix {
        BandMatrix {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.bw);
        self.data[i * (self.bw + 1) + (j + self.bw - i)] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.bw);
        self.data[i * (self.bw + 1) + (j + self.bw - i)] += v;
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    /// Factor a band matrix in place. Fails when the matrix is not positive
    /// definite.
    pub fn factor(a: BandMatrix) -> Result<BandCholesky> {
        let BandMatrix { n, bw, mut data } = a;
        let stride = bw + 1;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                // dot of rows i and j over columns k in [max(lo, j-bw), j)
                let klo = lo.max(j.saturating_sub(bw));
                let mut sum = data[i * stride + (j + bw - i)];
                if klo < j {
                    let oi = i * stride + (klo + bw - i);
                    let oj = j * stride + (klo + bw - j);
                    let len = j - klo;
                    let (ri, rj) = (&data[oi..oi + len], &data[oj..oj + len]);
                    let mut acc = 0.0;
                    for k in 0..len {
                        acc += ri[k] * rj[k];
                    }
                    sum -= acc;
                }
                if j < i {
                    let d = data[j * stride + bw];
                    data[i * stride + (j + bw - i)] = sum / d;
                } else {
                    if sum <= 0.0 {
                        return Err(Error::Singular(format!(
                            "band Cholesky pivot {sum:.3e} at row {i}"
                        )));
                    }
                    data[i * stride + bw] = sum.sqrt();
                }
            }
        }
        Ok(BandCholesky { n, bw, l: data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solve `L y = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        let stride = self.bw + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let off = i * stride + (lo + self.bw - i);
            let mut sum = b[i];
            for (k, &lv) in self.l[off..off + (i - lo)].iter().enumerate() {
                sum -= lv * b[lo + k];
            }
            b[i] = sum / self.l[i * stride + self.bw];
        }
    }

    /// Solve `L^T x = y` in place.
    pub fn backward(&self, y: &mut [f64]) {
        let stride = self.bw + 1;
        for i in (0..self.n).rev() {
            let hi = (i + self.bw).min(self.n - 1);
            let mut sum = y[i];
            for m in (i + 1)..=hi {
                sum -= self.l[m * stride + (i + self.bw - m)] * y[m];
            }
            y[i] = sum / self.l[i * stride + self.bw];
        }
    }

    /// Solve `L L^T x = b`.
    pub fn solve(&self, b: &mut [f64]) {
        self.forward(b);
        self.backward(b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn matches_dense_cholesky_solve() {
        // SPD band matrix: discrete Laplacian-ish with bandwidth 3.
        let n = 24;
        let bw = 3;
        let mut band = BandMatrix::zeros(n, bw);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            band.set(i, i, 5.0);
            dense[(i, i)] = 5.0;
            for d in 1..=bw.min(i) {
                let v = -1.0 / d as f64;
                band.set(i, i - d, v);
                dense[(i, i - d)] = v;
                dense[(i - d, i)] = v;
            }
        }
        let chol = BandCholesky::factor(band).unwrap();
        let b: Vec<f64> = (0..n).map(|k| (k as f64 * 0.37).sin()).collect();
        let mut x = b.clone();
        chol.solve(&mut x);
        let expect = dense
            .clone()
            .cholesky()
            .unwrap()
            .solve(&nalgebra::DVector::from_vec(b));
        for i in 0..n {
            assert!((x[i] - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut band = BandMatrix::zeros(3, 1);
        band.set(0, 0, 1.0);
        band.set(1, 1, -1.0);
        band.set(2, 2, 1.0);
        assert!(BandCholesky::factor(band).is_err());
    }
}
