//! Symmetric powers of C^2 and Clebsch-Gordan projections for
//! C^2 (x) Sym^k = Sym^(k+1) (+) Sym^(k-1).
//!
//! Two bases are used throughout:
//! * monomial basis m_j = x^(k-j) y^j, j = 0..k, in which the sl2 generators
//!   have small-integer matrices (E m_j = j m_(j-1), F m_j = (k-j) m_(j+1),
//!   H m_j = (k-2j) m_j) — used for exact equivariance solves;
//! * orthonormal basis e_j = sqrt(binom(k,j)) m_j, in which su(2) acts
//!   unitarily with the familiar sqrt(j(k-j+1)) raising/lowering entries.
//!
//! Tensor factors are ordered C^2 slot first: index (a, j) -> a*(k+1) + j.

use serde::{Deserialize, Serialize};

use crate::exact::{QMat, QC};
use crate::linalg::{self, ScaleC};
use crate::{re, C, CMat, Error, Result};

/// Which neighbouring symmetric power a projection targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
}

pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0f64;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Raising generator on Sym^k, monomial basis (integer entries).
pub fn sym_e_mono(k: usize) -> CMat {
    CMat::from_fn(k + 1, k + 1, |r, c| if c >= 1 && r == c - 1 { re(c as f64) } else { re(0.0) })
}

/// Lowering generator on Sym^k, monomial basis.
pub fn sym_f_mono(k: usize) -> CMat {
    CMat::from_fn(k + 1, k + 1, |r, c| if r == c + 1 { re((k - c) as f64) } else { re(0.0) })
}

/// Cartan generator on Sym^k (same in both bases).
pub fn sym_h(k: usize) -> CMat {
    CMat::from_fn(k + 1, k + 1, |r, c| if r == c { re(k as f64 - 2.0 * r as f64) } else { re(0.0) })
}

/// Diagonal rescaling from monomial to orthonormal coordinates.
fn ortho_scale(k: usize) -> Vec<f64> {
    (0..=k).map(|j| binom(k, j).sqrt()).collect()
}

/// Converts an operator matrix from monomial to orthonormal bases:
/// T_e = D_tgt^-1 T_m D_src.
pub fn to_orthonormal(k_tgt: usize, k_src: usize, t_mono: &CMat) -> CMat {
    let dt = ortho_scale(k_tgt);
    let ds = ortho_scale(k_src);
    CMat::from_fn(t_mono.nrows(), t_mono.ncols(), |r, c| t_mono[(r, c)].scale(ds[c] / dt[r]))
}

/// Derivation action of a gl(2) element on Sym^k, orthonormal basis.
///
/// Decomposes m2 = alpha e + beta f + gamma h + delta I; the scalar part acts
/// as k * delta.
pub fn sym_power_action(k: usize, m2: &CMat) -> CMat {
    let alpha = m2[(0, 1)];
    let beta = m2[(1, 0)];
    let gamma = (m2[(0, 0)] - m2[(1, 1)]).scale(0.5);
    let delta = (m2[(0, 0)] + m2[(1, 1)]).scale(0.5);
    let mut out = CMat::zeros(k + 1, k + 1);
    for j in 0..=k {
        out[(j, j)] = gamma.scale(k as f64 - 2.0 * j as f64) + delta.scale(k as f64);
        if j >= 1 {
            let s = ((j * (k - j + 1)) as f64).sqrt();
            out[(j - 1, j)] += alpha.scale(s);
            out[(j, j - 1)] += beta.scale(s);
        }
    }
    out
}

/// Multiplicative symmetric power of a 2x2 matrix, orthonormal basis:
/// Sym^k(N) e_j expanded over the e_i.
pub fn sym_power_matrix(k: usize, n2: &CMat) -> CMat {
    let (a, b) = (n2[(0, 0)], n2[(1, 0)]);
    let (c, d) = (n2[(0, 1)], n2[(1, 1)]);
    // Monomial action: m_j = x^(k-j) y^j -> (a x + b y)^(k-j) (c x + d y)^j.
    let mut mono = CMat::zeros(k + 1, k + 1);
    for j in 0..=k {
        // Coefficient of x^(k-i) y^i: sum over s + t = k - i of
        // C(k-j, s) a^s b^(k-j-s) * C(j, t) c^t d^(j-t).
        for i in 0..=k {
            let mut acc = C::new(0.0, 0.0);
            for s in 0..=(k - j) {
                let t_pow = (k - i) as i64 - s as i64;
                if t_pow < 0 || t_pow as usize > j {
                    continue;
                }
                let t = t_pow as usize;
                let term = binom(k - j, s) * binom(j, t);
                acc += a.powu(s as u32)
                    * b.powu((k - j - s) as u32)
                    * c.powu(t as u32)
                    * d.powu((j - t) as u32)
                    * re(term);
            }
            mono[(i, j)] = acc;
        }
    }
    to_orthonormal(k, k, &mono)
}

/// Exact integer monomial matrices of e, f on Sym^k as QMat.
fn sym_e_q(k: usize) -> QMat {
    QMat::from_int_fn(k + 1, k + 1, |r, c| if c >= 1 && r == c - 1 { (c as i64, 0) } else { (0, 0) })
}

fn sym_f_q(k: usize) -> QMat {
    QMat::from_int_fn(k + 1, k + 1, |r, c| if r == c + 1 { ((k - c) as i64, 0) } else { (0, 0) })
}

/// Exact tensor action of e or f on C^2 (x) Sym^k (monomial bases,
/// C^2 slot first): kron(g_1, I) + kron(I, g_k).
fn tensor_gen_q(k: usize, raising: bool) -> QMat {
    let g1 = if raising { sym_e_q(1) } else { sym_f_q(1) };
    let gk = if raising { sym_e_q(k) } else { sym_f_q(k) };
    let dim = 2 * (k + 1);
    let mut m = QMat::zeros(dim, dim);
    for a in 0..2 {
        for ap in 0..2 {
            for j in 0..=k {
                for jp in 0..=k {
                    let r = a * (k + 1) + j;
                    let c = ap * (k + 1) + jp;
                    let mut v = QC::zero();
                    if j == jp {
                        v = v.add(g1.get(a, ap));
                    }
                    if a == ap {
                        v = v.add(gk.get(j, jp));
                    }
                    m.set(r, c, v);
                }
            }
        }
    }
    m
}

/// H-weight of source basis vector (a, j) of C^2 (x) Sym^k.
fn src_weight(k: usize, a: usize, j: usize) -> i64 {
    (1 - 2 * a as i64) + (k as i64 - 2 * j as i64)
}

/// Exact equivariant maps C^2 (x) Sym^k -> Sym^(k_tgt): returns a basis of
/// the solution space as monomial-basis matrices.
///
/// H-equivariance is imposed structurally (an equivariant map can only
/// connect equal weights, since H is diagonal with integer spectrum); the
/// e and f equivariance equations are then solved exactly.
fn equivariant_maps(k: usize, k_tgt: usize) -> Vec<QMat> {
    let rows = k_tgt + 1;
    let cols = 2 * (k + 1);
    // Support set: weight-matched (r, c) pairs.
    let mut support = Vec::new();
    let mut index = std::collections::BTreeMap::new();
    for r in 0..rows {
        let wt = k_tgt as i64 - 2 * r as i64;
        for a in 0..2 {
            for j in 0..=k {
                if src_weight(k, a, j) == wt {
                    let c = a * (k + 1) + j;
                    index.insert((r, c), support.len());
                    support.push((r, c));
                }
            }
        }
    }
    if support.is_empty() {
        return Vec::new();
    }
    // Equations: for X in {e, f}, all (r, c): (P S - T P)_{r,c} = 0,
    // restricted to rows that touch the support.
    let mut eqs: Vec<Vec<QC>> = Vec::new();
    for raising in [true, false] {
        let s = tensor_gen_q(k, raising);
        let t = if raising { sym_e_q(k_tgt) } else { sym_f_q(k_tgt) };
        for r in 0..rows {
            for c in 0..cols {
                let mut row = vec![QC::zero(); support.len()];
                let mut touched = false;
                for m in 0..cols {
                    if !s.get(m, c).is_zero() {
                        if let Some(&u) = index.get(&(r, m)) {
                            row[u] = row[u].add(s.get(m, c));
                            touched = true;
                        }
                    }
                }
                for m in 0..rows {
                    if !t.get(r, m).is_zero() {
                        if let Some(&u) = index.get(&(m, c)) {
                            row[u] = row[u].sub(t.get(r, m));
                            touched = true;
                        }
                    }
                }
                if touched {
                    eqs.push(row);
                }
            }
        }
    }
    let mut sys = QMat::zeros(eqs.len(), support.len());
    for (r, row) in eqs.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            sys.set(r, c, v.clone());
        }
    }
    sys.nullspace()
        .into_iter()
        .map(|v| {
            let mut p = QMat::zeros(rows, cols);
            for (u, &(r, c)) in support.iter().enumerate() {
                p.set(r, c, v[u].clone());
            }
            p
        })
        .collect()
}

/// Dimension of the space of equivariant maps C^2 (x) Sym^k -> Sym^(k_tgt).
pub fn tensor_multiplicity(k: usize, k_tgt: usize) -> usize {
    equivariant_maps(k, k_tgt).len()
}

/// Full decomposition report: multiplicity of each Sym^(k_tgt) for
/// k_tgt = 0 ..= k+2.
pub fn decompose_tensor(k: usize) -> Vec<(usize, usize)> {
    (0..=k + 2).map(|kt| (kt, tensor_multiplicity(k, kt))).collect()
}

/// Clebsch-Gordan projection C^2 (x) Sym^k -> Sym^(k +/- 1) in orthonormal
/// bases, normalized as a co-isometry (P P* = I) with the first nonzero
/// entry of row 0 real positive.
pub fn cg_projection(k: usize, dir: Direction) -> Result<CMat> {
    let k_tgt = match dir {
        Direction::Up => k + 1,
        Direction::Down => {
            if k == 0 {
                return Err(Error::Precondition("no downward projection from Sym^0".into()));
            }
            k - 1
        }
    };
    let sols = equivariant_maps(k, k_tgt);
    if sols.len() != 1 {
        return Err(Error::NoSolution { residual: sols.len() as f64 });
    }
    let p_mono = sols[0].to_cmat();
    // Source orthonormal scale: sqrt(binom(1,a) * binom(k,j)) = sqrt(binom(k,j)).
    let dt = ortho_scale(k_tgt);
    let ds_k = ortho_scale(k);
    let p_e = CMat::from_fn(k_tgt + 1, 2 * (k + 1), |r, c| {
        let j = c % (k + 1);
        p_mono[(r, c)].scale(ds_k[j] / dt[r])
    });
    // Schur: P P* is a positive scalar.
    let pp = &p_e * p_e.adjoint();
    let c0 = pp[(0, 0)].re;
    let off = linalg::max_abs(&(&pp - CMat::identity(k_tgt + 1, k_tgt + 1).scale(c0)));
    if c0 <= 0.0 || off > 1e-10 * c0 {
        return Err(Error::NumericBreakdown(format!(
            "projection Gram not scalar: deviation {off:.3e} at scale {c0:.3e}"
        )));
    }
    let mut p = p_e.scale(1.0 / c0.sqrt());
    // Phase: first nonzero entry of row 0 made real positive.
    for c in 0..p.ncols() {
        let v = p[(0, c)];
        if v.norm() > 1e-12 {
            let phase = v / re(v.norm());
            p = p.scale_c(phase.conj());
            break;
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::im;

    #[test]
    fn monomial_generators_satisfy_sl2_relations() {
        for k in 0..=8 {
            let e = sym_e_mono(k);
            let f = sym_f_mono(k);
            let h = sym_h(k);
            assert!(linalg::fro(&(&e * &f - &f * &e - &h)) < 1e-13);
            assert!(linalg::fro(&(&h * &e - &e * &h - e.scale(2.0))) < 1e-13);
            assert!(linalg::fro(&(&h * &f - &f * &h + f.scale(2.0))) < 1e-13);
        }
    }

    #[test]
    fn orthonormal_action_matches_symmetric_square_of_tensor_action() {
        // Oracle: embed Sym^2 into C^2 (x) C^2 as symmetric tensors with the
        // orthonormal basis {x@x, (x@y + y@x)/sqrt2, y@y} and push the
        // derivation action through.
        let m2 = CMat::from_row_slice(2, 2, &[C::new(0.3, 0.1), C::new(-1.2, 0.7), C::new(0.5, -0.4), C::new(-0.3, -0.1)]);
        let i2 = CMat::identity(2, 2);
        let tensor = m2.kronecker(&i2) + i2.kronecker(&m2);
        let s = 0.5f64.sqrt();
        // Columns: symmetric basis vectors in tensor coordinates (xx, xy, yx, yy).
        let emb = CMat::from_row_slice(
            4,
            3,
            &[
                re(1.0), re(0.0), re(0.0),
                re(0.0), re(s), re(0.0),
                re(0.0), re(s), re(0.0),
                re(0.0), re(0.0), re(1.0),
            ],
        );
        let oracle = emb.adjoint() * tensor * &emb;
        let got = sym_power_action(2, &m2);
        assert!(linalg::fro(&(oracle - got)) < 1e-13);
    }

    #[test]
    fn gl2_trace_part_acts_as_k_times_scalar() {
        let m2 = CMat::identity(2, 2).scale_c(C::new(0.0, 2.0));
        let act = sym_power_action(5, &m2);
        let expected = CMat::identity(6, 6).scale_c(C::new(0.0, 10.0));
        assert!(linalg::fro(&(act - expected)) < 1e-14);
    }

    #[test]
    fn sym_power_matrix_is_multiplicative_and_exponential_compatible() {
        let a = CMat::from_row_slice(2, 2, &[C::new(0.9, 0.2), C::new(-0.3, 0.4), C::new(0.1, -0.5), C::new(1.1, 0.0)]);
        let b = CMat::from_row_slice(2, 2, &[C::new(-0.2, 0.6), C::new(0.8, 0.1), C::new(0.4, 0.3), C::new(0.7, -0.2)]);
        for k in [1usize, 3, 5] {
            let lhs = sym_power_matrix(k, &(&a * &b));
            let rhs = sym_power_matrix(k, &a) * sym_power_matrix(k, &b);
            assert!(linalg::fro(&(lhs - rhs)) < 1e-11);
            // Sym^k(exp X) = exp(d Sym^k(X)).
            let ea = linalg::expm(&a);
            let lhs2 = sym_power_matrix(k, &ea);
            let rhs2 = linalg::expm(&sym_power_action(k, &a));
            assert!(linalg::fro(&(lhs2 - rhs2)) < 1e-10);
        }
        // Identity and determinant sanity.
        let idk = sym_power_matrix(4, &CMat::identity(2, 2));
        assert!(linalg::fro(&(idk - CMat::identity(5, 5))) < 1e-14);
    }

    #[test]
    fn sym_power_matrix_of_unitary_is_unitary() {
        let t = 0.7f64;
        let u = CMat::from_row_slice(
            2,
            2,
            &[re(t.cos()), re(-t.sin()), re(t.sin()), re(t.cos())],
        );
        let u = u * CMat::from_diagonal(&crate::CVec::from_vec(vec![(im().scale(0.3)).exp(), (im().scale(-0.3)).exp()]));
        for k in [2usize, 6] {
            let s = sym_power_matrix(k, &u);
            let g = s.adjoint() * &s;
            assert!(linalg::fro(&(g - CMat::identity(k + 1, k + 1))) < 1e-12);
        }
    }

    #[test]
    fn multiplicity_one_for_adjacent_powers() {
        for k in 0..=8 {
            assert_eq!(tensor_multiplicity(k, k + 1), 1, "Up from k={k}");
            if k >= 1 {
                assert_eq!(tensor_multiplicity(k, k - 1), 1, "Down from k={k}");
            }
            assert_eq!(tensor_multiplicity(k, k), 0, "parity forbids k={k}");
            assert_eq!(tensor_multiplicity(k, k + 3), 0);
        }
        // Down from Sym^0 is inadmissible.
        assert!(cg_projection(0, Direction::Down).is_err());
    }

    #[test]
    fn projections_are_equivariant_co_isometric_and_phase_fixed() {
        for k in 0..=8 {
            let dirs: &[Direction] =
                if k == 0 { &[Direction::Up] } else { &[Direction::Up, Direction::Down] };
            for &dir in dirs {
                let p = cg_projection(k, dir).unwrap();
                let k_tgt = match dir {
                    Direction::Up => k + 1,
                    Direction::Down => k - 1,
                };
                // Co-isometry.
                let pp = &p * p.adjoint();
                assert!(
                    linalg::fro(&(pp - CMat::identity(k_tgt + 1, k_tgt + 1))) < 1e-13,
                    "k={k} {dir:?}"
                );
                // Equivariance against orthonormal-basis generators.
                let i2 = CMat::identity(2, 2);
                for g2 in [
                    CMat::from_row_slice(2, 2, &[re(0.0), re(1.0), re(0.0), re(0.0)]),
                    CMat::from_row_slice(2, 2, &[re(0.0), re(0.0), re(1.0), re(0.0)]),
                    CMat::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(-1.0)]),
                ] {
                    let src = g2.kronecker(&CMat::identity(k + 1, k + 1))
                        + i2.kronecker(&sym_power_action(k, &g2));
                    let tgt = sym_power_action(k_tgt, &g2);
                    let resid = &p * src - tgt * &p;
                    assert!(linalg::fro(&resid) < 1e-12, "k={k} {dir:?}: {}", linalg::fro(&resid));
                }
                // Phase convention.
                let first = (0..p.ncols()).find(|&c| p[(0, c)].norm() > 1e-12).unwrap();
                let v = p[(0, first)];
                assert!(v.im.abs() < 1e-13 && v.re > 0.0, "k={k} {dir:?}: {v}");
            }
        }
    }

    #[test]
    fn complementary_projections_have_orthogonal_ranges() {
        for k in 1..=8 {
            let up = cg_projection(k, Direction::Up).unwrap();
            let down = cg_projection(k, Direction::Down).unwrap();
            let cross = &up * down.adjoint();
            assert!(linalg::max_abs(&cross) < 1e-13);
            // Together they resolve the identity on the tensor product.
            let res = up.adjoint() * &up + down.adjoint() * &down;
            assert!(linalg::fro(&(res - CMat::identity(2 * (k + 1), 2 * (k + 1)))) < 1e-12);
        }
    }

    #[test]
    fn known_small_projections() {
        // k = 0 Up is the identity on C^2.
        let p = cg_projection(0, Direction::Up).unwrap();
        assert!(linalg::fro(&(p - CMat::identity(2, 2))) < 1e-14);
        // k = 1 Down is the normalized antisymmetric pairing
        // (x@y - y@x)/sqrt2 in basis (u0 m0, u0 m1, u1 m0, u1 m1).
        let p = cg_projection(1, Direction::Down).unwrap();
        let s = 0.5f64.sqrt();
        let expected = CMat::from_row_slice(1, 4, &[re(0.0), re(s), re(-s), re(0.0)]);
        assert!(linalg::fro(&(p - expected)) < 1e-14);
        // Up projections fix the highest-weight line with coefficient one.
        for k in 1..=6 {
            let p = cg_projection(k, Direction::Up).unwrap();
            assert!((p[(0, 0)] - re(1.0)).norm() < 1e-13);
        }
    }
}
