//! Exact linear algebra over Gaussian rationals.
//!
//! Used where floating point would obscure a structural fact: nullspace
//! dimensions of equivariance systems must be *exactly* one, and the resulting
//! projection coefficients are ratios of integers.  Entries are a + b i with
//! a, b in Q (arbitrary precision).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::{C, CMat};

/// Gaussian rational a + b i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QC {
    pub re: BigRational,
    pub im: BigRational,
}

impl QC {
    pub fn zero() -> Self {
        Self { re: BigRational::zero(), im: BigRational::zero() }
    }

    pub fn one() -> Self {
        Self { re: BigRational::one(), im: BigRational::zero() }
    }

    pub fn from_int(n: i64) -> Self {
        Self { re: BigRational::from_integer(BigInt::from(n)), im: BigRational::zero() }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { re: &self.re + &o.re, im: &self.im + &o.im }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { re: &self.re - &o.re, im: &self.im - &o.im }
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }

    pub fn inv(&self) -> Self {
        let d = &self.re * &self.re + &self.im * &self.im;
        Self { re: &self.re / &d, im: -&self.im / &d }
    }

    pub fn div(&self, o: &Self) -> Self {
        self.mul(&o.inv())
    }

    pub fn neg(&self) -> Self {
        Self { re: -&self.re, im: -&self.im }
    }

    /// |a + bi|^2 as a rational.
    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn to_c(&self) -> C {
        fn f(r: &BigRational) -> f64 {
            let n = r.numer();
            let d = r.denom();
            // Convert via string only when the parts exceed f64-exact integers.
            let nf = bigint_to_f64(n);
            let df = bigint_to_f64(d);
            nf / df
        }
        C::new(f(&self.re), f(&self.im))
    }
}

fn bigint_to_f64(n: &BigInt) -> f64 {
    // BigInt -> f64 with correct sign; fine for the magnitudes produced here.
    let s = n.to_string();
    s.parse::<f64>().unwrap_or(if n.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// Dense matrix over QC, row-major.
#[derive(Debug, Clone)]
pub struct QMat {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<QC>,
}

impl QMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, data: vec![QC::zero(); nrows * ncols] }
    }

    pub fn get(&self, r: usize, c: usize) -> &QC {
        &self.data[r * self.ncols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: QC) {
        self.data[r * self.ncols + c] = v;
    }

    /// Builds from integer entries (a_re + a_im i).
    pub fn from_int_fn(nrows: usize, ncols: usize, f: impl Fn(usize, usize) -> (i64, i64)) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for r in 0..nrows {
            for c in 0..ncols {
                let (a, b) = f(r, c);
                m.set(
                    r,
                    c,
                    QC {
                        re: BigRational::from_integer(BigInt::from(a)),
                        im: BigRational::from_integer(BigInt::from(b)),
                    },
                );
            }
        }
        m
    }

    pub fn to_cmat(&self) -> CMat {
        CMat::from_fn(self.nrows, self.ncols, |r, c| self.get(r, c).to_c())
    }

    /// Reduced row echelon form in place; returns pivot column indices.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.ncols {
            if row == self.nrows {
                break;
            }
            // Prefer the largest |entry|^2 for mild growth control (still exact).
            let mut best: Option<(usize, BigRational)> = None;
            for r in row..self.nrows {
                let v = self.get(r, col);
                if !v.is_zero() {
                    let mag = v.norm_sqr();
                    if best.as_ref().map(|(_, m)| &mag > m).unwrap_or(true) {
                        best = Some((r, mag));
                    }
                }
            }
            let Some((pr, _)) = best else { continue };
            if pr != row {
                for c in 0..self.ncols {
                    self.data.swap(row * self.ncols + c, pr * self.ncols + c);
                }
            }
            let inv = self.get(row, col).inv();
            for c in col..self.ncols {
                let v = self.get(row, c).mul(&inv);
                self.set(row, c, v);
            }
            for r in 0..self.nrows {
                if r != row && !self.get(r, col).is_zero() {
                    let factor = self.get(r, col).clone();
                    for c in col..self.ncols {
                        let v = self.get(r, c).sub(&factor.mul(self.get(row, c)));
                        self.set(r, c, v);
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    /// Basis of the right nullspace, one QMat column vector per basis element.
    pub fn nullspace(&self) -> Vec<Vec<QC>> {
        let mut m = self.clone();
        let pivots = m.rref();
        let pivot_set: std::collections::BTreeSet<usize> = pivots.iter().cloned().collect();
        let free: Vec<usize> = (0..self.ncols).filter(|c| !pivot_set.contains(c)).collect();
        let mut basis = Vec::new();
        for &fc in &free {
            let mut v = vec![QC::zero(); self.ncols];
            v[fc] = QC::one();
            for (ri, &pc) in pivots.iter().enumerate() {
                v[pc] = m.get(ri, fc).neg();
            }
            basis.push(v);
        }
        basis
    }

    pub fn rank(&self) -> usize {
        self.clone().rref().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn gaussian_rational_field_ops() {
        let a = QC { re: q(1, 2), im: q(1, 3) };
        let b = QC { re: q(-2, 5), im: q(7, 4) };
        let prod = a.mul(&b);
        let back = prod.div(&b);
        assert_eq!(back, a);
        let inv = a.inv();
        assert_eq!(a.mul(&inv), QC::one());
    }

    #[test]
    fn rref_identifies_rank_and_pivots() {
        // [[1, 2, 3], [2, 4, 6], [0, 1, 1]] has rank 2.
        let m = QMat::from_int_fn(3, 3, |r, c| {
            let vals = [[1, 2, 3], [2, 4, 6], [0, 1, 1]];
            (vals[r][c], 0)
        });
        assert_eq!(m.rank(), 2);
        let ns = m.nullspace();
        assert_eq!(ns.len(), 1);
        // Nullspace vector should satisfy Mv = 0 exactly.
        for r in 0..3 {
            let mut acc = QC::zero();
            for c in 0..3 {
                acc = acc.add(&m.get(r, c).mul(&ns[0][c]));
            }
            assert!(acc.is_zero());
        }
    }

    #[test]
    fn nullspace_handles_complex_entries() {
        // [1, i] has nullspace spanned by (-i, 1) ~ (1, i) direction.
        let mut m = QMat::zeros(1, 2);
        m.set(0, 0, QC::one());
        m.set(0, 1, QC { re: q(0, 1), im: q(1, 1) });
        let ns = m.nullspace();
        assert_eq!(ns.len(), 1);
        let mut acc = QC::zero();
        for c in 0..2 {
            acc = acc.add(&m.get(0, c).mul(&ns[0][c]));
        }
        assert!(acc.is_zero());
    }

    #[test]
    fn conversion_to_float_is_faithful_for_small_values() {
        let a = QC { re: q(3, 8), im: q(-7, 16) };
        let c = a.to_c();
        assert_eq!(c, C::new(0.375, -0.4375));
    }
}
