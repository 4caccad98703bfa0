//! Truncated spaces of vector-valued polynomial sections on C^n and the
//! operator matrices acting on them.
//!
//! Basis index order (also the order used in exported matrices): degree
//! block ascending, then multi-indices of that degree in ascending
//! lexicographic order, then the fiber coordinate.  The fiber itself is laid
//! out level-major by the realization that owns it.
//!
//! Truncation at `max_degree` is exact for all identities checked here: the
//! verified operators raise degree by at most a known shift, and callers
//! restrict comparisons to input degrees with enough headroom.

use std::collections::BTreeMap;

use crate::{re, C, CMat, CVec, Error, Result};

/// A truncated section space: polynomials of total degree <= max_degree with
/// values in a fiber of dimension fiber_dim.
#[derive(Debug, Clone)]
pub struct SectionSpace {
    pub n: usize,
    pub max_degree: usize,
    pub fiber_dim: usize,
    monos: Vec<Vec<usize>>,
    pos: BTreeMap<Vec<usize>, usize>,
    degree_starts: Vec<usize>,
}

fn monomials_of_degree(n: usize, d: usize) -> Vec<Vec<usize>> {
    match n {
        1 => vec![vec![d]],
        2 => (0..=d).map(|a1| vec![a1, d - a1]).collect(),
        _ => unreachable!(),
    }
}

impl SectionSpace {
    pub fn new(n: usize, max_degree: usize, fiber_dim: usize) -> Self {
        assert!(n == 1 || n == 2);
        let mut monos = Vec::new();
        let mut degree_starts = Vec::new();
        for d in 0..=max_degree {
            degree_starts.push(monos.len());
            monos.extend(monomials_of_degree(n, d));
        }
        degree_starts.push(monos.len());
        let pos = monos.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        Self { n, max_degree, fiber_dim, monos, pos, degree_starts }
    }

    pub fn num_monomials(&self) -> usize {
        self.monos.len()
    }

    pub fn dim(&self) -> usize {
        self.num_monomials() * self.fiber_dim
    }

    pub fn monomial(&self, i: usize) -> &[usize] {
        &self.monos[i]
    }

    pub fn monomial_position(&self, alpha: &[usize]) -> Option<usize> {
        self.pos.get(alpha).copied()
    }

    /// Flat index of coefficient (alpha, fiber coordinate).
    pub fn index(&self, alpha: &[usize], fiber: usize) -> Option<usize> {
        self.monomial_position(alpha).map(|p| p * self.fiber_dim + fiber)
    }

    pub fn degree_of_monomial(&self, i: usize) -> usize {
        self.monos[i].iter().sum()
    }

    pub fn degree_of_index(&self, idx: usize) -> usize {
        self.degree_of_monomial(idx / self.fiber_dim)
    }

    /// Flat indices of all coefficients of total degree <= d.
    pub fn indices_up_to_degree(&self, d: usize) -> Vec<usize> {
        let end = self.degree_starts[(d + 1).min(self.max_degree + 1)] * self.fiber_dim;
        (0..end).collect()
    }

    /// Matrix of the partial derivative with respect to z_{i+1}; lowers
    /// degree by one, exactly.
    pub fn derivative_matrix(&self, i: usize) -> CMat {
        let mut m = CMat::zeros(self.dim(), self.dim());
        for (p, alpha) in self.monos.iter().enumerate() {
            if alpha[i] == 0 {
                continue;
            }
            let mut down = alpha.clone();
            down[i] -= 1;
            let q = self.monomial_position(&down).unwrap();
            for v in 0..self.fiber_dim {
                m[(q * self.fiber_dim + v, p * self.fiber_dim + v)] = re(alpha[i] as f64);
            }
        }
        m
    }

    /// Sparse form of the derivative on bare monomials: triplets
    /// (target position, source position, factor) with z^alpha ->
    /// alpha_i z^(alpha - e_i).
    pub fn mono_derivative_triplets(&self, i: usize) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (p, alpha) in self.monos.iter().enumerate() {
            if alpha[i] == 0 {
                continue;
            }
            let mut down = alpha.clone();
            down[i] -= 1;
            let q = self.monomial_position(&down).unwrap();
            out.push((q, p, alpha[i] as f64));
        }
        out
    }

    /// Matrix of multiplication by the monomial z^gamma; products exceeding
    /// the truncation are dropped (the operator is the compression to the
    /// truncated space).
    pub fn mul_monomial_matrix(&self, gamma: &[usize]) -> CMat {
        let mut m = CMat::zeros(self.dim(), self.dim());
        for (p, alpha) in self.monos.iter().enumerate() {
            let up: Vec<usize> = alpha.iter().zip(gamma).map(|(a, g)| a + g).collect();
            if let Some(q) = self.monomial_position(&up) {
                for v in 0..self.fiber_dim {
                    m[(q * self.fiber_dim + v, p * self.fiber_dim + v)] = re(1.0);
                }
            }
        }
        m
    }

    /// Matrix of multiplication by the coordinate z_{i+1}.
    pub fn mul_z_matrix(&self, i: usize) -> CMat {
        let mut gamma = vec![0usize; self.n];
        gamma[i] = 1;
        self.mul_monomial_matrix(&gamma)
    }

    /// Block-diagonal action of a fiber map (possibly between different
    /// fiber dimensions) applied coefficientwise: target space must share
    /// (n, max_degree).
    pub fn fiber_map_matrix(&self, target: &SectionSpace, b: &CMat) -> Result<CMat> {
        if target.n != self.n || target.max_degree != self.max_degree {
            return Err(Error::Precondition("incompatible section spaces".into()));
        }
        if b.nrows() != target.fiber_dim || b.ncols() != self.fiber_dim {
            return Err(Error::DimensionMismatch { expected: target.fiber_dim, got: b.nrows() });
        }
        let mut m = CMat::zeros(target.dim(), self.dim());
        for p in 0..self.num_monomials() {
            for r in 0..b.nrows() {
                for c in 0..b.ncols() {
                    m[(p * target.fiber_dim + r, p * self.fiber_dim + c)] = b[(r, c)];
                }
            }
        }
        Ok(m)
    }
}

/// A finitely supported section (coefficient vector over a SectionSpace).
#[derive(Debug, Clone)]
pub struct PolySection {
    pub coeffs: CVec,
}

impl PolySection {
    pub fn zeros(space: &SectionSpace) -> Self {
        Self { coeffs: CVec::zeros(space.dim()) }
    }

    /// The section z^alpha e_fiber.
    pub fn monomial(space: &SectionSpace, alpha: &[usize], fiber: usize, coeff: C) -> Result<Self> {
        let idx = space
            .index(alpha, fiber)
            .ok_or_else(|| Error::Precondition(format!("monomial {alpha:?} outside truncation")))?;
        let mut s = Self::zeros(space);
        s.coeffs[idx] = coeff;
        Ok(s)
    }

    /// Pointwise value at z (a fiber vector).
    pub fn eval(&self, space: &SectionSpace, z: &[C]) -> CVec {
        let mut out = CVec::zeros(space.fiber_dim);
        for (p, alpha) in (0..space.num_monomials()).map(|p| (p, space.monomial(p))) {
            let mut zp = C::new(1.0, 0.0);
            for (i, &a) in alpha.iter().enumerate() {
                zp *= z[i].powu(a as u32);
            }
            for v in 0..space.fiber_dim {
                out[v] += self.coeffs[p * space.fiber_dim + v] * zp;
            }
        }
        out
    }

    pub fn max_total_degree(&self, space: &SectionSpace) -> usize {
        let mut d = 0;
        for idx in 0..space.dim() {
            if self.coeffs[idx].norm() > 0.0 {
                d = d.max(space.degree_of_index(idx));
            }
        }
        d
    }
}

/// Operator on a truncated section space with declared degree behaviour.
#[derive(Debug, Clone)]
pub struct SectionOperator {
    pub mat: CMat,
    /// Upper bound on how much the operator can raise total degree.
    pub degree_shift: i64,
}

impl SectionOperator {
    /// Wraps a matrix, verifying the degree support claim.
    pub fn new(space: &SectionSpace, mat: CMat, degree_shift: i64) -> Result<Self> {
        if mat.nrows() != space.dim() || mat.ncols() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: mat.nrows() });
        }
        for c in 0..mat.ncols() {
            let dc = space.degree_of_index(c) as i64;
            for r in 0..mat.nrows() {
                if mat[(r, c)].norm() > 0.0 && space.degree_of_index(r) as i64 > dc + degree_shift {
                    return Err(Error::Precondition(format!(
                        "matrix raises degree beyond declared shift {degree_shift}"
                    )));
                }
            }
        }
        Ok(Self { mat, degree_shift })
    }

    pub fn identity(space: &SectionSpace) -> Self {
        Self { mat: CMat::identity(space.dim(), space.dim()), degree_shift: 0 }
    }

    /// self after other (matrix product), summing degree shifts.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.mat.ncols() != other.mat.nrows() {
            return Err(Error::DimensionMismatch { expected: self.mat.ncols(), got: other.mat.nrows() });
        }
        Ok(Self { mat: &self.mat * &other.mat, degree_shift: self.degree_shift + other.degree_shift })
    }

    pub fn apply(&self, f: &PolySection) -> PolySection {
        PolySection { coeffs: &self.mat * &f.coeffs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_ordering_is_degree_then_lex_then_fiber() {
        let s = SectionSpace::new(2, 2, 2);
        let expected: Vec<Vec<usize>> = vec![
            vec![0, 0],
            vec![0, 1],
            vec![1, 0],
            vec![0, 2],
            vec![1, 1],
            vec![2, 0],
        ];
        for (i, m) in expected.iter().enumerate() {
            assert_eq!(s.monomial(i), m.as_slice());
        }
        assert_eq!(s.dim(), 12);
        assert_eq!(s.index(&[1, 1], 1), Some(4 * 2 + 1));
        assert_eq!(s.index(&[3, 0], 0), None);
    }

    #[test]
    fn derivative_matches_calculus() {
        let s = SectionSpace::new(2, 3, 1);
        let f = PolySection::monomial(&s, &[2, 0], 0, re(1.0)).unwrap();
        let d1 = s.derivative_matrix(0);
        let d2 = s.derivative_matrix(1);
        let g1 = PolySection { coeffs: &d1 * &f.coeffs };
        let g2 = PolySection { coeffs: &d2 * &f.coeffs };
        // d/dz1 z1^2 = 2 z1; d/dz2 z1^2 = 0.
        let idx = s.index(&[1, 0], 0).unwrap();
        assert_eq!(g1.coeffs[idx], re(2.0));
        assert_eq!(g1.coeffs.iter().filter(|v| v.norm() > 0.0).count(), 1);
        assert!(g2.coeffs.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn derivative_and_multiplication_satisfy_heisenberg_relation() {
        // [d_i, z_j] = delta_ij exactly, on columns with one degree of
        // headroom (the top-degree block feels the truncation).
        let s = SectionSpace::new(2, 4, 3);
        for i in 0..2 {
            for j in 0..2 {
                let d = s.derivative_matrix(i);
                let z = s.mul_z_matrix(j);
                let comm = &d * &z - &z * &d;
                let want = if i == j { 1.0 } else { 0.0 };
                for c in s.indices_up_to_degree(3) {
                    for r in 0..s.dim() {
                        let expect = if r == c { want } else { 0.0 };
                        assert_eq!(comm[(r, c)], re(expect), "i={i} j={j} r={r} c={c}");
                    }
                }
            }
        }
    }

    #[test]
    fn evaluation_expands_monomials() {
        let s = SectionSpace::new(2, 3, 2);
        let mut f = PolySection::zeros(&s);
        f.coeffs[s.index(&[1, 2], 1).unwrap()] = C::new(2.0, -1.0);
        f.coeffs[s.index(&[0, 0], 0).unwrap()] = re(3.0);
        let z = [C::new(0.5, 0.25), C::new(-0.3, 0.6)];
        let v = f.eval(&s, &z);
        let zp = z[0].powu(1) * z[1].powu(2);
        assert!((v[1] - C::new(2.0, -1.0) * zp).norm() < 1e-15);
        assert!((v[0] - re(3.0)).norm() < 1e-15);
    }

    #[test]
    fn operator_wrapper_enforces_degree_claim() {
        let s = SectionSpace::new(1, 3, 1);
        let z = s.mul_z_matrix(0);
        assert!(SectionOperator::new(&s, z.clone(), 1).is_ok());
        assert!(SectionOperator::new(&s, z, 0).is_err());
        let d = s.derivative_matrix(0);
        assert!(SectionOperator::new(&s, d, -1).is_ok());
    }

    #[test]
    fn fiber_map_acts_coefficientwise() {
        let src = SectionSpace::new(2, 2, 2);
        let tgt = SectionSpace::new(2, 2, 3);
        let b = CMat::from_fn(3, 2, |r, c| C::new((r + c) as f64, r as f64 - c as f64));
        let m = src.fiber_map_matrix(&tgt, &b).unwrap();
        let f = PolySection::monomial(&src, &[1, 1], 1, C::new(0.5, 0.5)).unwrap();
        let g = &m * &f.coeffs;
        let p = tgt.monomial_position(&[1, 1]).unwrap();
        for r in 0..3 {
            assert_eq!(g[p * 3 + r], b[(r, 1)] * C::new(0.5, 0.5));
        }
    }
}
