//! Small dense complex linear-algebra helpers shared across the crate.

use crate::{C, CMat, CVec};
use nalgebra::SymmetricEigen;

/// Frobenius norm.
pub fn fro(m: &CMat) -> f64 {
    m.norm()
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Hermitian adjoint.
pub fn adj(m: &CMat) -> CMat {
    m.adjoint()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    assert_eq!(m.nrows(), m.ncols(), "hermitian_eigenvalues: square matrix required");
    if m.nrows() == 0 {
        return Vec::new();
    }
    // Symmetrize first so that O(eps) asymmetry from upstream arithmetic
    // cannot push the decomposition off the Hermitian manifold.
    let h = (m + m.adjoint()).scale(0.5);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Hermitian square root and inverse square root of a positive definite
/// matrix.
pub fn hermitian_sqrt_pair(m: &CMat) -> crate::Result<(CMat, CMat)> {
    let h = (m + m.adjoint()).scale(0.5);
    let se = SymmetricEigen::new(h);
    let n = m.nrows();
    let mut d = CMat::zeros(n, n);
    let mut di = CMat::zeros(n, n);
    for i in 0..n {
        let ev = se.eigenvalues[i];
        if ev <= 0.0 {
            return Err(crate::Error::NumericBreakdown(format!(
                "matrix not positive definite (eigenvalue {ev:.3e})"
            )));
        }
        d[(i, i)] = crate::re(ev.sqrt());
        di[(i, i)] = crate::re(1.0 / ev.sqrt());
    }
    let q = &se.eigenvectors;
    Ok((q * &d * q.adjoint(), q * &di * q.adjoint()))
}

/// Singular values, descending.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let svd = m.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Minimal-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &CMat, b: &CVec) -> CVec {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-13 * svd.singular_values.max().max(1.0))
        .expect("svd solve")
}

/// Matrix inverse; panics on singular input (caller guards).
pub fn inv(m: &CMat) -> CMat {
    m.clone().try_inverse().expect("matrix inverse")
}

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Frobenius inner product `sum_ij conj(a_ij) b_ij` (= trace of a^* b).
pub fn fro_inner(a: &CMat, b: &CMat) -> C {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Matrix product that exploits structural sparsity of either factor.
///
/// Operators on truncated section spaces (derivative contractions, actions
/// assembled monomial-by-monomial) carry mostly exact zeros; skipping them
/// turns the dominant products from cubic to nnz-proportional.  Dense inputs
/// fall through to the ordinary product.
pub fn smul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "smul: inner dimensions must agree");
    let nz = |z: &C| z.re != 0.0 || z.im != 0.0;
    let fill_a = a.iter().filter(|z| nz(z)).count() as f64 / (a.len().max(1)) as f64;
    let fill_b = b.iter().filter(|z| nz(z)).count() as f64 / (b.len().max(1)) as f64;
    if fill_a > 0.25 && fill_b > 0.25 {
        return a * b;
    }
    let one = C::new(1.0, 0.0);
    if fill_b <= fill_a {
        // Accumulate columns of the result: c_j += b[k,j] * a_k.
        let mut c = CMat::zeros(a.nrows(), b.ncols());
        for j in 0..b.ncols() {
            for k in 0..b.nrows() {
                let v = b[(k, j)];
                if nz(&v) {
                    c.column_mut(j).axpy(v, &a.column(k), one);
                }
            }
        }
        c
    } else {
        // Sparse left factor: compute (b^T a^T)^T with the column kernel.
        let at = a.transpose();
        let bt = b.transpose();
        let mut ct = CMat::zeros(b.ncols(), a.nrows());
        for j in 0..at.ncols() {
            for k in 0..at.nrows() {
                let v = at[(k, j)];
                if nz(&v) {
                    ct.column_mut(j).axpy(v, &bt.column(k), one);
                }
            }
        }
        ct.transpose()
    }
}

/// Principal logarithm of a 1x1 or 2x2 complex matrix.
///
/// Eigenvalues must avoid the closed negative real axis.  The defective case
/// falls back to the spectral-shift series, which is exact for 2x2.
pub fn principal_log_small(m: &CMat) -> crate::Result<CMat> {
    let n = m.nrows();
    assert!(n == m.ncols() && (n == 1 || n == 2), "principal_log_small: 1x1 or 2x2 only");
    let bad = |z: C| z.re <= 0.0 && z.im.abs() < 1e-14 * (1.0 + z.re.abs());
    if n == 1 {
        let z = m[(0, 0)];
        if bad(z) {
            return Err(crate::Error::BranchCut);
        }
        return Ok(CMat::from_element(1, 1, z.ln()));
    }
    let a = m[(0, 0)];
    let b = m[(0, 1)];
    let c = m[(1, 0)];
    let d = m[(1, 1)];
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr - det.scale(4.0)).sqrt();
    let l1 = (tr + disc).scale(0.5);
    let l2 = (tr - disc).scale(0.5);
    if bad(l1) || bad(l2) {
        return Err(crate::Error::BranchCut);
    }
    let id = CMat::identity(2, 2);
    if (l1 - l2).norm() > 1e-8 * (l1.norm() + l2.norm()).max(1e-300) {
        // log(M) = log(l1) (M - l2)/(l1 - l2) + log(l2) (M - l1)/(l2 - l1)
        let p1 = (m - id.scale_c(l2)) / (l1 - l2);
        let p2 = (m - id.scale_c(l1)) / (l2 - l1);
        Ok(p1 * l1.ln() + p2 * l2.ln())
    } else {
        // Near-defective: M = mu (I + N), N small or nilpotent; series in N.
        let mu = tr.scale(0.5);
        if bad(mu) {
            return Err(crate::Error::BranchCut);
        }
        let nmat = m / mu - &id;
        let mut term = nmat.clone();
        let mut acc = CMat::zeros(2, 2);
        for k in 1..40 {
            acc += term.scale(if k % 2 == 1 { 1.0 / k as f64 } else { -1.0 / k as f64 });
            term = &term * &nmat;
            if term.norm() < 1e-18 {
                break;
            }
        }
        Ok(acc + id.scale_c(mu.ln()))
    }
}

/// exp(M) by scaled Taylor series; intended for small well-scaled matrices.
pub fn expm(m: &CMat) -> CMat {
    let n = m.nrows();
    let norm = max_abs(m);
    let s = norm.log2().ceil().max(0.0) as usize;
    let msc = m.scale(1.0 / (1u64 << s) as f64);
    let mut term = CMat::identity(n, n);
    let mut acc = CMat::identity(n, n);
    for k in 1..30 {
        term = (&term * &msc).scale(1.0 / k as f64);
        acc += &term;
        if term.norm() < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        acc = &acc * &acc;
    }
    acc
}

/// exp(N) for nilpotent N with N^(steps) = 0: finite series, exact.
pub fn exp_nilpotent(m: &CMat, steps: usize) -> CMat {
    let n = m.nrows();
    let mut term = CMat::identity(n, n);
    let mut acc = CMat::identity(n, n);
    for k in 1..=steps {
        term = (&term * m).scale(1.0 / k as f64);
        acc += &term;
    }
    acc
}

/// Helper trait: scale a matrix by a complex scalar (nalgebra's `scale` is real-only).
pub trait ScaleC {
    fn scale_c(&self, z: C) -> Self;
}

impl ScaleC for CMat {
    fn scale_c(&self, z: C) -> Self {
        self.map(|w| w * z)
    }
}

impl ScaleC for CVec {
    fn scale_c(&self, z: C) -> Self {
        self.map(|w| w * z)
    }
}
