//! General (non-symmetric) banded operators built from difference
//! stencils with zero extension, with the compositions needed to
//! assemble symmetric discretizations from bilinear forms.

use crate::banded::BandedMatrix;

/// Banded matrix storing diagonals for offsets `-lo..=hi`:
/// `diag(k)[i] = A[i][i + k]` wherever the column index is in range.
#[derive(Debug, Clone)]
pub struct BandOp {
    pub n: usize,
    pub lo: usize,
    pub hi: usize,
    diags: Vec<Vec<f64>>,
}

impl BandOp {
    pub fn zeros(n: usize, lo: usize, hi: usize) -> BandOp {
        let diags = (0..=lo + hi).map(|_| vec![0.0; n]).collect();
        BandOp { n, lo, hi, diags }
    }

    fn slot(&self, k: i64) -> Option<usize> {
        if k < -(self.lo as i64) || k > self.hi as i64 {
            None
        } else {
            Some((k + self.lo as i64) as usize)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let k = j as i64 - i as i64;
        match self.slot(k) {
            Some(s) => self.diags[s][i],
            None => 0.0,
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = j as i64 - i as i64;
        let s = self.slot(k).expect("entry outside band");
        self.diags[s][i] = v;
    }

    /// Toeplitz operator with zero extension: offset/value stencil pairs.
    pub fn from_stencil(n: usize, stencil: &[(i64, f64)]) -> BandOp {
        let lo = stencil.iter().map(|&(k, _)| (-k).max(0)).max().unwrap_or(0) as usize;
        let hi = stencil.iter().map(|&(k, _)| k.max(0)).max().unwrap_or(0) as usize;
        let mut op = BandOp::zeros(n, lo, hi);
        for &(k, v) in stencil {
            for i in 0..n {
                let j = i as i64 + k;
                if j >= 0 && (j as usize) < n {
                    op.set(i, j as usize, v);
                }
            }
        }
        op
    }

    pub fn identity(n: usize) -> BandOp {
        BandOp::from_stencil(n, &[(0, 1.0)])
    }

    pub fn transpose(&self) -> BandOp {
        let mut t = BandOp::zeros(self.n, self.hi, self.lo);
        for i in 0..self.n {
            for j in self.cols(i) {
                let v = self.get(i, j);
                if v != 0.0 {
                    t.set(j, i, v);
                }
            }
        }
        t
    }

    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        let a = i.saturating_sub(self.lo);
        let b = (i + self.hi + 1).min(self.n);
        a..b
    }

    /// C = self * other.
    pub fn mul(&self, other: &BandOp) -> BandOp {
        assert_eq!(self.n, other.n);
        let mut c = BandOp::zeros(self.n, self.lo + other.lo, self.hi + other.hi);
        for i in 0..self.n {
            for m in self.cols(i) {
                let a = self.get(i, m);
                if a == 0.0 {
                    continue;
                }
                for j in other.cols(m) {
                    let b = other.get(m, j);
                    if b != 0.0 {
                        let v = c.get(i, j) + a * b;
                        c.set(i, j, v);
                    }
                }
            }
        }
        c
    }

    /// C = self^T * diag(w) * other; the workhorse for bilinear-form
    /// assembly with pointwise coefficient weights.
    pub fn weighted_gram(&self, w: &[f64], other: &BandOp) -> BandOp {
        assert_eq!(self.n, other.n);
        assert_eq!(w.len(), self.n);
        let mut c = BandOp::zeros(self.n, self.hi + other.lo, self.lo + other.hi);
        for m in 0..self.n {
            let wm = w[m];
            if wm == 0.0 {
                continue;
            }
            for i in self.cols(m) {
                let a = self.get(m, i);
                if a == 0.0 {
                    continue;
                }
                for j in other.cols(m) {
                    let b = other.get(m, j);
                    if b != 0.0 {
                        // grouping keeps the product bitwise symmetric
                        // under (i, j) exchange when self == other
                        let v = c.get(i, j) + wm * (a * b);
                        c.set(i, j, v);
                    }
                }
            }
        }
        c
    }

    pub fn scale(&mut self, s: f64) {
        for d in self.diags.iter_mut() {
            for v in d.iter_mut() {
                *v *= s;
            }
        }
    }

    pub fn add_assign(&mut self, other: &BandOp, s: f64) {
        assert!(other.lo <= self.lo && other.hi <= self.hi, "band too narrow");
        for i in 0..self.n {
            for j in other.cols(i) {
                let v = other.get(i, j);
                if v != 0.0 {
                    let cur = self.get(i, j);
                    self.set(i, j, cur + s * v);
                }
            }
        }
    }

    /// Kronecker product on the flattened index `i * other.n + j`.
    pub fn kron(&self, other: &BandOp) -> BandOp {
        let n = self.n * other.n;
        let m = other.n;
        let lo = self.lo * m + other.lo;
        let hi = self.hi * m + other.hi;
        let mut c = BandOp::zeros(n, lo, hi);
        for i1 in 0..self.n {
            for j1 in self.cols(i1) {
                let a = self.get(i1, j1);
                if a == 0.0 {
                    continue;
                }
                for i2 in 0..other.n {
                    for j2 in other.cols(i2) {
                        let b = other.get(i2, j2);
                        if b != 0.0 {
                            c.set(i1 * m + i2, j1 * m + j2, a * b);
                        }
                    }
                }
            }
        }
        c
    }

    /// Largest |A - A^T| entry.
    pub fn asymmetry(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.n {
            for j in self.cols(i) {
                if j > i {
                    dev = dev.max((self.get(i, j) - self.get(j, i)).abs());
                }
            }
        }
        dev
    }

    /// Symmetric part as a `BandedMatrix`; the caller asserts the
    /// asymmetry budget beforehand.
    pub fn into_symmetric(self) -> BandedMatrix {
        let bw = self.lo.max(self.hi);
        let mut m = BandedMatrix::zeros(self.n, bw);
        for i in 0..self.n {
            for j in self.cols(i) {
                if j >= i {
                    let v = 0.5 * (self.get(i, j) + self.get(j, i));
                    if v != 0.0 {
                        m.add(j, i, v);
                    }
                }
            }
        }
        m
    }
}

/// Second-derivative stencil with zero extension; `order` is the
/// formal accuracy (2 or 4).
pub fn second_derivative(n: usize, h: f64, order: usize) -> BandOp {
    let h2 = h * h;
    match order {
        2 => BandOp::from_stencil(n, &[(-1, 1.0 / h2), (0, -2.0 / h2), (1, 1.0 / h2)]),
        4 => BandOp::from_stencil(
            n,
            &[
                (-2, -1.0 / (12.0 * h2)),
                (-1, 16.0 / (12.0 * h2)),
                (0, -30.0 / (12.0 * h2)),
                (1, 16.0 / (12.0 * h2)),
                (2, -1.0 / (12.0 * h2)),
            ],
        ),
        _ => panic!("unsupported stencil order {order}"),
    }
}

/// Centered first-derivative stencil (exactly antisymmetric).
pub fn first_derivative(n: usize, h: f64, order: usize) -> BandOp {
    match order {
        2 => BandOp::from_stencil(n, &[(-1, -0.5 / h), (1, 0.5 / h)]),
        4 => BandOp::from_stencil(
            n,
            &[
                (-2, 1.0 / (12.0 * h)),
                (-1, -8.0 / (12.0 * h)),
                (1, 8.0 / (12.0 * h)),
                (2, -1.0 / (12.0 * h)),
            ],
        ),
        _ => panic!("unsupported stencil order {order}"),
    }
}
