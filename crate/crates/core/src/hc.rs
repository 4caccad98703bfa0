//! Group elements of SL(n+1, C), the triangular factorization through
//! P^+ K^C P^- on the open big cell, the Mobius action on the ball, the
//! section multiplier, and the infinitesimal action on truncated sections,
//! together with finite-difference verifiers for the derivative identities
//! tying them together.
//!
//! Conventions: the action on sections is the left action
//! (pi(g) f)(z) = rho(b(g^{-1}, z))^{-1} f(g^{-1} z), where b(g, z) is the
//! K^C P^- part of g exp(z); its derivative is
//! pi(X) f = drho(kappa(z, X)) f - Df(tau(z, X)), with
//! Ad(exp(-z)) X = tau + kappa split by the grading.  The sign is pinned by
//! the homomorphism property pi([X, Y]) = [pi(X), pi(Y)], which is tested.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gamma::{fiber_insertion, p_iota_d, GammaOperator};
use crate::lie::{bracket, LieElement, StructureContext};
use crate::linalg::{self, ScaleC};
use crate::poly::{PolySection, SectionOperator, SectionSpace};
use crate::rep::{u_coords_of_pminus, RepRealization};
use crate::{re, C, CMat, CVec, Error, Result};

/// Element of SL(n+1, C).
#[derive(Debug, Clone)]
pub struct GroupElement {
    pub mat: CMat,
}

impl GroupElement {
    /// Wraps a matrix, checking squareness and unit determinant.
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch { expected: mat.nrows(), got: mat.ncols() });
        }
        let det = mat.clone().determinant();
        if (det - re(1.0)).norm() >= 1e-12 {
            return Err(Error::Precondition(format!("determinant {det}, expected 1")));
        }
        Ok(Self { mat })
    }

    pub fn identity(size: usize) -> Self {
        Self { mat: CMat::identity(size, size) }
    }

    /// exp of a Lie algebra element (traceless, so the result has det 1).
    pub fn exp(x: &LieElement) -> Self {
        Self { mat: linalg::expm(&x.mat) }
    }

    pub fn inverse(&self) -> Self {
        Self { mat: linalg::inv(&self.mat) }
    }

    pub fn compose(&self, other: &GroupElement) -> Self {
        Self { mat: &self.mat * &other.mat }
    }
}

/// exp(z . E): identity plus the p^+ corner column.
pub fn exp_pplus(n: usize, z: &[C]) -> GroupElement {
    let mut m = CMat::identity(n + 1, n + 1);
    for (i, v) in z.iter().enumerate() {
        m[(i, n)] = *v;
    }
    GroupElement { mat: m }
}

/// exp(y . F): identity plus the p^- corner row.
pub fn exp_pminus(n: usize, y: &[C]) -> GroupElement {
    let mut m = CMat::identity(n + 1, n + 1);
    for (i, v) in y.iter().enumerate() {
        m[(n, i)] = *v;
    }
    GroupElement { mat: m }
}

/// Factorization g = exp(zplus) . diag(kpart_a, kpart_d) . exp(yminus),
/// unique on the big cell.
#[derive(Debug, Clone)]
pub struct HCFactorization {
    pub zplus: Vec<C>,
    /// Upper-left n x n block of the K^C part.
    pub kpart_a: CMat,
    /// Lower-right scalar of the K^C part; det(kpart_a) * kpart_d = 1.
    pub kpart_d: C,
    pub yminus: Vec<C>,
}

impl HCFactorization {
    /// The K^C part as a full (n+1) x (n+1) matrix.
    pub fn kpart(&self) -> CMat {
        let n = self.kpart_a.nrows();
        let mut m = CMat::zeros(n + 1, n + 1);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] = self.kpart_a[(r, c)];
            }
        }
        m[(n, n)] = self.kpart_d;
        m
    }

    /// Inverse of the K^C part, as (block, scalar).
    pub fn kpart_inverse(&self) -> (CMat, C) {
        (linalg::inv(&self.kpart_a), re(1.0) / self.kpart_d)
    }

    /// Multiplies the three factors back together.
    pub fn reassemble(&self) -> CMat {
        let n = self.kpart_a.nrows();
        &(&exp_pplus(n, &self.zplus).mat * self.kpart()) * exp_pminus(n, &self.yminus).mat
    }
}

/// Triangular factorization of g through P^+ K^C P^-.  The big cell is the
/// open set where the lower-right corner pivot is nonzero.
pub fn hc_factorize(g: &GroupElement) -> Result<HCFactorization> {
    let size = g.mat.nrows();
    let n = size - 1;
    let d = g.mat[(n, n)];
    if d.norm() < 1e-12 {
        return Err(Error::NotInBigCell);
    }
    let zplus: Vec<C> = (0..n).map(|i| g.mat[(i, n)] / d).collect();
    let yminus: Vec<C> = (0..n).map(|i| g.mat[(n, i)] / d).collect();
    let mut a = CMat::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            a[(r, c)] = g.mat[(r, c)] - g.mat[(r, n)] * g.mat[(n, c)] / d;
        }
    }
    Ok(HCFactorization { zplus, kpart_a: a, kpart_d: d, yminus })
}

/// The fractional-linear action of g on the ball: the p^+ coordinate of the
/// factorization of g exp(z).
pub fn mobius(g: &GroupElement, z: &[C]) -> Result<Vec<C>> {
    let f = hc_factorize(&GroupElement { mat: &g.mat * exp_pplus(z.len(), z).mat })?;
    Ok(f.zplus)
}

/// The multiplier rho(b(g, z)) = rho0(k(g, z)) exp(rho^-(Y(g, z))) on the
/// fiber of the realization.
pub fn multiplier(
    r: &RepRealization,
    ctx: &StructureContext,
    g: &GroupElement,
    z: &[C],
) -> Result<CMat> {
    let f = hc_factorize(&GroupElement { mat: &g.mat * exp_pplus(r.n, z).mat })?;
    let k = r.rho0_group(ctx, &f.kpart_a, f.kpart_d)?;
    let ym = r.rho_minus_coords(&f.yminus);
    Ok(&k * linalg::exp_nilpotent(&ym, r.num_levels().saturating_sub(1)))
}

/// Pointwise evaluation of the group action on a polynomial section:
/// (pi(g) f)(z) = rho(b(g^{-1}, z))^{-1} f(g^{-1} z).
pub fn group_action_eval(
    r: &RepRealization,
    ctx: &StructureContext,
    space: &SectionSpace,
    g: &GroupElement,
    f: &PolySection,
    z: &[C],
) -> Result<CVec> {
    let gi = g.inverse();
    let m = multiplier(r, ctx, &gi, z)?;
    let w = mobius(&gi, z)?;
    Ok(linalg::inv(&m) * f.eval(space, &w))
}

fn neg(x: &LieElement) -> LieElement {
    LieElement { mat: -x.mat.clone() }
}

/// Matrix of the infinitesimal action pi(X) on the truncated section space:
/// pi(X) f = drho(kappa_0(z, X)) f + rho^-(X_-) f - Df(tau(z, X)), where
/// Ad(exp(-z)) X = tau(z, X) + kappa_0(z, X) + X_- with
///   tau     = X_+ - [z, X_0] + (1/2)[z, [z, X_-]]   (p^+ part, degree <= 2),
///   kappa_0 = X_0 - [z, X_-]                        (k^C part, degree <= 1).
/// Products above the truncation degree are compressed away; callers compare
/// only on columns with one degree of headroom.
pub fn infinitesimal_action(
    r: &RepRealization,
    ctx: &StructureContext,
    space: &SectionSpace,
    x: &LieElement,
) -> Result<SectionOperator> {
    if space.fiber_dim != r.dim() {
        return Err(Error::DimensionMismatch { expected: r.dim(), got: space.fiber_dim });
    }
    let comp = ctx.cartan_components(x)?;
    let dim = space.dim();
    let mut mat = CMat::zeros(dim, dim);

    // Constant fiber term: drho0(X_0) + rho^-(X_-).
    let mut fib0 = r.rho0(ctx, &comp.xzero)?;
    fib0 += r.rho_minus_coords(&ctx.pminus_coords(&comp.xminus));
    mat += space.fiber_map_matrix(space, &fib0)?;

    let derivs: Vec<CMat> = (0..ctx.n).map(|a| space.derivative_matrix(a)).collect();

    // Linear fiber term: coefficient of z_b in kappa_0 is -[E_b, X_-].
    for b in 0..ctx.n {
        let k1 = neg(&bracket(&ctx.eplus[b], &comp.xminus)?);
        if linalg::max_abs(&k1.mat) == 0.0 {
            continue;
        }
        let fib = r.rho0(ctx, &k1)?;
        mat += linalg::smul(&space.mul_z_matrix(b), &space.fiber_map_matrix(space, &fib)?);
    }

    // Vector-field term -Df(tau): constant part X_+ ...
    let t0 = ctx.pplus_coords(&comp.xplus);
    for (a, c) in t0.iter().enumerate() {
        if c.norm() > 0.0 {
            mat -= derivs[a].scale_c(*c);
        }
    }
    // ... linear part -[E_b, X_0] ...
    for b in 0..ctx.n {
        let lin = bracket(&ctx.eplus[b], &comp.xzero)?;
        let lc = ctx.pplus_coords(&lin);
        let mz = space.mul_z_matrix(b);
        for (a, c) in lc.iter().enumerate() {
            if c.norm() > 0.0 {
                // tau coefficient is -lc, the operator term is -(-lc) mz d_a.
                mat += linalg::smul(&mz, &derivs[a]).scale_c(*c);
            }
        }
    }
    // ... quadratic part (1/2)[z, [z, X_-]]: coefficient of z_b z_c.
    for b in 0..ctx.n {
        for c in b..ctx.n {
            let w = bracket(&ctx.eplus[b], &bracket(&ctx.eplus[c], &comp.xminus)?)?;
            let scale = if b == c { 0.5 } else { 1.0 };
            let wc = ctx.pplus_coords(&w);
            if wc.iter().all(|v| v.norm() == 0.0) {
                continue;
            }
            let mut gamma_idx = vec![0usize; ctx.n];
            gamma_idx[b] += 1;
            gamma_idx[c] += 1;
            let mm = space.mul_monomial_matrix(&gamma_idx);
            for (a, v) in wc.iter().enumerate() {
                if v.norm() > 0.0 {
                    mat -= linalg::smul(&mm, &derivs[a]).scale_c(v.scale(scale));
                }
            }
        }
    }
    SectionOperator::new(space, mat, 1)
}

/// The actions of a whole basis on one section space.
#[derive(Debug)]
pub struct InfinitesimalAction {
    pub basis: Vec<LieElement>,
    pub ops: Vec<SectionOperator>,
}

/// Ambient basis used by the verifiers: p^+ first, then k^C (center, then
/// semisimple part), then p^- last — so the p^- block is the tail.
pub fn ambient_basis(ctx: &StructureContext) -> Vec<LieElement> {
    let mut out: Vec<LieElement> = ctx.eplus.clone();
    out.push(ctx.zhat.clone());
    out.extend(ctx.kss.iter().cloned());
    out.extend(ctx.eminus.iter().cloned());
    out
}

/// Indices of the p^- elements within `ambient_basis`.
pub fn pminus_indices(ctx: &StructureContext) -> Vec<usize> {
    let len = 2 * ctx.n + 1 + ctx.kss.len();
    (len - ctx.n..len).collect()
}

pub fn infinitesimal_action_basis(
    r: &RepRealization,
    ctx: &StructureContext,
    space: &SectionSpace,
    basis: &[LieElement],
) -> Result<InfinitesimalAction> {
    let ops = basis
        .iter()
        .map(|x| infinitesimal_action(r, ctx, space, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(InfinitesimalAction { basis: basis.to_vec(), ops })
}

/// Same realization with every transition coefficient set to zero (the
/// associated direct sum of irreducible bundles).
pub fn zero_coupling(r: &RepRealization) -> RepRealization {
    let mut out = r.clone();
    for step in &mut out.steps {
        for entry in step {
            entry.y = CMat::zeros(entry.y.nrows(), entry.y.ncols());
        }
    }
    out
}

/// Max residual of pi([X,Y]) = [pi(X), pi(Y)] over all pairs from `act`,
/// on columns of total degree <= compare_degree (the commutator needs two
/// degrees of headroom).
pub fn homomorphism_residual(
    r: &RepRealization,
    ctx: &StructureContext,
    space: &SectionSpace,
    act: &InfinitesimalAction,
    compare_degree: usize,
) -> Result<f64> {
    if compare_degree + 2 > space.max_degree {
        return Err(Error::Precondition(
            "commutator comparison needs two degrees of headroom".into(),
        ));
    }
    let cols = space.indices_up_to_degree(compare_degree);
    let mut worst = 0.0f64;
    for (i, xi) in act.basis.iter().enumerate() {
        for (j, xj) in act.basis.iter().enumerate() {
            if j <= i {
                continue;
            }
            let br = bracket(xi, xj)?;
            let pb = infinitesimal_action(r, ctx, space, &br)?;
            let comm = linalg::smul(&act.ops[i].mat, &act.ops[j].mat)
                - linalg::smul(&act.ops[j].mat, &act.ops[i].mat);
            let d = comm - pb.mat;
            for &c in &cols {
                for rr in 0..space.dim() {
                    worst = worst.max(d[(rr, c)].norm());
                }
            }
        }
    }
    Ok(worst)
}

/// Max over the basis of the intertwining residual
/// Gamma pi_0(X) - pi_y(X) Gamma, on columns with one degree of headroom.
pub fn verify_intertwining(
    g: &GammaOperator,
    act0: &InfinitesimalAction,
    acty: &InfinitesimalAction,
    space: &SectionSpace,
) -> f64 {
    let cols = space.indices_up_to_degree(space.max_degree.saturating_sub(1));
    let mut worst = 0.0f64;
    for (op0, opy) in act0.ops.iter().zip(&acty.ops) {
        let d = linalg::smul(&g.mat, &op0.mat) - linalg::smul(&opy.mat, &g.mat);
        for &c in &cols {
            for rr in 0..space.dim() {
                worst = worst.max(d[(rr, c)].norm());
            }
        }
    }
    worst
}

/// Both derivative identities of the big-cell factorization at (g, z), for a
/// p^+ direction X, by central differences with step h:
///   D_X rho0(k(g,z)^{-1}) = -rho0([Y(g,z), X]) rho0(k(g,z)^{-1})
///   D_X Y(g,z) = (1/2) [Y(g,z), [Y(g,z), X]].
/// Returns the two absolute residual norms.
pub fn verify_factor_derivatives(
    r: &RepRealization,
    ctx: &StructureContext,
    g: &GroupElement,
    z: &[C],
    x: &LieElement,
    h: f64,
) -> Result<(f64, f64)> {
    let dx = ctx.pplus_coords(x);
    let shift = |t: f64| -> Vec<C> {
        z.iter().zip(&dx).map(|(zi, di)| zi + di.scale(t)).collect()
    };
    let fact_at = |zt: &[C]| hc_factorize(&GroupElement { mat: &g.mat * exp_pplus(r.n, zt).mat });
    let rho_kinv = |f: &HCFactorization| -> Result<CMat> {
        let (ai, di) = f.kpart_inverse();
        r.rho0_group(ctx, &ai, di)
    };

    let fp = fact_at(&shift(h))?;
    let fm = fact_at(&shift(-h))?;
    let f0 = fact_at(z)?;
    let phi_p = rho_kinv(&fp)?;
    let phi_m = rho_kinv(&fm)?;
    let phi_0 = rho_kinv(&f0)?;

    let lhs_a = (&phi_p - &phi_m).scale(0.5 / h);
    let y_el = ctx.pminus_from_coords(&f0.yminus);
    let yx = bracket(&y_el, x)?;
    let rhs_a = -(r.rho0(ctx, &yx)? * &phi_0);
    let res_a = linalg::fro(&(lhs_a - rhs_a));

    let lhs_b = (ctx.pminus_from_coords(&fp.yminus).mat - ctx.pminus_from_coords(&fm.yminus).mat)
        .scale(0.5 / h);
    let rhs_b = bracket(&y_el, &yx)?.mat.scale(0.5);
    let res_b = linalg::fro(&(lhs_b - rhs_b));
    Ok((res_a, res_b))
}

/// Level of the (embedded) fiber index within the realization's grading.
fn level_of_fiber(r: &RepRealization, idx: usize) -> usize {
    let mut lvl = 0;
    while lvl + 1 < r.num_levels() && idx >= r.level_offset(lvl + 1) {
        lvl += 1;
    }
    lvl
}

/// The unique level on which the section is supported.
pub fn support_level(r: &RepRealization, space: &SectionSpace, f: &PolySection) -> Result<usize> {
    let mut level: Option<usize> = None;
    for idx in 0..space.dim() {
        if f.coeffs[idx].norm() > 0.0 {
            let l = level_of_fiber(r, idx % space.fiber_dim);
            match level {
                None => level = Some(l),
                Some(prev) if prev != l => {
                    return Err(Error::Precondition("section supported on multiple levels".into()))
                }
                _ => {}
            }
        }
    }
    level.ok_or_else(|| Error::Precondition("zero section".into()))
}

/// The contraction P_{step+1} iota applied to a p^+-indexed family of fiber
/// vectors (the derivative of a V-valued map): sum_{a,b} G^{-1}[b,a]
/// insertion(u(F_b)) dphi_a.
fn contract_p_iota(
    r: &RepRealization,
    ctx: &StructureContext,
    step: usize,
    dphi: &[CVec],
) -> CVec {
    let ginv = linalg::inv(&ctx.pairing_gram());
    let mut out = CVec::zeros(r.dim());
    for a in 0..ctx.n {
        for b in 0..ctx.n {
            let coef = ginv[(b, a)];
            if coef.norm() == 0.0 {
                continue;
            }
            let mut fb = vec![re(0.0); ctx.n];
            fb[b] = re(1.0);
            let u = u_coords_of_pminus(r.n, &fb);
            out += (fiber_insertion(r, step, &u, true) * &dphi[a]).scale_c(coef);
        }
    }
    out
}

/// Matrix version of `contract_p_iota` for Hom-valued maps.
fn contract_p_iota_mat(
    r: &RepRealization,
    ctx: &StructureContext,
    step: usize,
    dpsi: &[CMat],
) -> CMat {
    let ginv = linalg::inv(&ctx.pairing_gram());
    let mut out = CMat::zeros(r.dim(), r.dim());
    for a in 0..ctx.n {
        for b in 0..ctx.n {
            let coef = ginv[(b, a)];
            if coef.norm() == 0.0 {
                continue;
            }
            let mut fb = vec![re(0.0); ctx.n];
            fb[b] = re(1.0);
            let u = u_coords_of_pminus(r.n, &fb);
            out += (fiber_insertion(r, step, &u, true) * &dpsi[a]).scale_c(coef);
        }
    }
    out
}

/// The two derivative identities for the canonical one-step operators along
/// the cocycle, verified at (g, z) with central differences of step h.
///
/// First, for a section F supported on level j:
///   P_{j+1} iota D (rho0_j(k^{-1}) F(gz))
///     = -(c_{j+1} - (lambda - j)/(2n)) rt_{j+1}(Y) rho0_j(k^{-1}) F(gz)
///       + rho0_{j+1}(k^{-1}) (P_{j+1} iota D F)(gz),
/// second, for j >= 1, with rt the canonical insertion,
///   P_{j+1} iota D rt_j(Y(g,z))
///     = (1/2)(c_j - c_{j+1} - 1/(2n)) rt_{j+1}(Y(g,z)) rt_j(Y(g,z)).
/// `c_all[i]` holds the extracted chain constant c_{i+1}.  Returns the two
/// absolute residuals (the second is 0 when j = 0).
pub fn verify_transport_derivatives(
    r: &RepRealization,
    ctx: &StructureContext,
    space: &SectionSpace,
    c_all: &[C],
    g: &GroupElement,
    z: &[C],
    f: &PolySection,
    h: f64,
) -> Result<(f64, f64)> {
    let j = support_level(r, space, f)?;
    if j + 1 >= r.num_levels() {
        return Err(Error::Precondition("section must live below the last level".into()));
    }
    let n = r.n;
    let two_n = 2.0 * n as f64;

    let fact_at = |zt: &[C]| hc_factorize(&GroupElement { mat: &g.mat * exp_pplus(n, zt).mat });
    let rho_kinv = |fc: &HCFactorization| -> Result<CMat> {
        let (ai, di) = fc.kpart_inverse();
        r.rho0_group(ctx, &ai, di)
    };
    // phi(z) = rho0(k(g,z)^{-1}) F(g z).
    let phi = |zt: &[C]| -> Result<CVec> {
        let fc = fact_at(zt)?;
        Ok(rho_kinv(&fc)? * f.eval(space, &fc.zplus))
    };

    let shift = |a: usize, t: f64| -> Vec<C> {
        let mut out = z.to_vec();
        out[a] += re(t);
        out
    };
    let mut dphi = Vec::new();
    for a in 0..n {
        dphi.push((phi(&shift(a, h))? - phi(&shift(a, -h))?).scale(0.5 / h));
    }
    let lhs_first = contract_p_iota(r, ctx, j, &dphi);

    let f0 = fact_at(z)?;
    let u_y = u_coords_of_pminus(n, &f0.yminus);
    let ins_y_next = fiber_insertion(r, j, &u_y, true);
    let s1 = -(c_all[j] - re((r.lambda0 - j as f64) / two_n));
    let term1 = (&ins_y_next * phi(z)?).scale_c(s1);
    let pid = p_iota_d(r, ctx, space, j)?;
    let psi = PolySection { coeffs: &pid * &f.coeffs };
    let term2 = rho_kinv(&f0)? * psi.eval(space, &f0.zplus);
    let res_first = (lhs_first - term1 - term2).norm();

    if j == 0 {
        return Ok((res_first, 0.0));
    }

    // psi(z) = rt_j(Y(g,z)) as an embedded fiber map (level j-1 -> j).
    let ins_at = |zt: &[C]| -> Result<CMat> {
        let fc = fact_at(zt)?;
        Ok(fiber_insertion(r, j - 1, &u_coords_of_pminus(n, &fc.yminus), true))
    };
    let mut dpsi = Vec::new();
    for a in 0..n {
        dpsi.push((ins_at(&shift(a, h))? - ins_at(&shift(a, -h))?).scale(0.5 / h));
    }
    // dpsi takes values in level j, so the insertion happens at step j.
    let lhs_second = contract_p_iota_mat(r, ctx, j, &dpsi);
    let scale2 = (c_all[j - 1] - c_all[j] - re(1.0 / two_n)).scale(0.5);
    let ins_y_j = fiber_insertion(r, j - 1, &u_y, true);
    let rhs_second = (&ins_y_next * &ins_y_j).scale_c(scale2);
    let res_second = linalg::fro(&(lhs_second - rhs_second));
    Ok((res_first, res_second))
}

/// Least-squares slope of log(residual) against log(h); residuals are
/// clamped away from zero so exact cases do not poison the fit.
pub fn convergence_order(hs: &[f64], residuals: &[f64]) -> f64 {
    assert_eq!(hs.len(), residuals.len());
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.max(1e-300).ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Seeded random elements exp(X), X in the real form with Frobenius norm
/// `radius` (stays inside the big cell and the principal-branch domain).
pub fn seeded_group_samples(
    ctx: &StructureContext,
    seed: u64,
    count: usize,
    radius: f64,
) -> Vec<GroupElement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = ctx.real_form_basis();
    let size = ctx.n + 1;
    (0..count)
        .map(|_| {
            let mut m = CMat::zeros(size, size);
            for b in &basis {
                m += b.mat.scale(rng.gen_range(-1.0..1.0));
            }
            let norm = m.norm();
            let target = radius * rng.gen_range(0.2..1.0);
            GroupElement::exp(&LieElement { mat: m.scale(target / norm.max(1e-300)) })
        })
        .collect()
}

/// Seeded points in the ball of the given radius.
pub fn seeded_ball_samples(n: usize, seed: u64, count: usize, radius: f64) -> Vec<Vec<C>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let z: Vec<C> = (0..n).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let norm2: f64 = z.iter().map(|v| v.norm_sqr()).sum();
        if norm2 <= 1.0 {
            out.push(z.iter().map(|v| v.scale(radius)).collect());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::im;
    use crate::rep::{realize, Direction, FiliformSpec, RepSpec};

    fn ctx2() -> StructureContext {
        StructureContext::new(2).unwrap()
    }

    fn up_rep(lambda0: f64, k0: usize, m: usize, y: Vec<C>) -> RepRealization {
        realize(&RepSpec::Filiform(FiliformSpec { n: 2, lambda0, k0, m, direction: Direction::Up, y }))
            .unwrap()
    }

    #[test]
    fn factorization_roundtrips_and_handles_the_trivial_cells() {
        let ctx = ctx2();
        for (i, g) in seeded_group_samples(&ctx, 11, 20, 0.3).iter().enumerate() {
            let f = hc_factorize(g).unwrap();
            assert!(linalg::fro(&(f.reassemble() - &g.mat)) < 1e-12, "sample {i}");
            assert!((f.kpart_a.clone().determinant() * f.kpart_d - re(1.0)).norm() < 1e-12);
        }
        // Pure p^+ exponential.
        let z = [C::new(0.2, 0.1), C::new(-0.1, 0.3)];
        let f = hc_factorize(&exp_pplus(2, &z)).unwrap();
        assert!(f.zplus.iter().zip(&z).all(|(a, b)| (a - b).norm() < 1e-15));
        assert!(linalg::fro(&(&f.kpart_a - CMat::identity(2, 2))) < 1e-15);
        assert!(f.yminus.iter().all(|v| v.norm() < 1e-15));
        // Block-diagonal K^C element.
        let mut k = CMat::zeros(3, 3);
        k[(0, 0)] = C::new(1.1, 0.2);
        k[(0, 1)] = re(0.1);
        k[(1, 0)] = re(-0.05);
        k[(1, 1)] = C::new(0.9, -0.1);
        let det2 = k[(0, 0)] * k[(1, 1)] - k[(0, 1)] * k[(1, 0)];
        k[(2, 2)] = re(1.0) / det2;
        let f = hc_factorize(&GroupElement::new(k.clone()).unwrap()).unwrap();
        assert!(f.zplus.iter().all(|v| v.norm() < 1e-15));
        assert!(f.yminus.iter().all(|v| v.norm() < 1e-15));
        assert!(linalg::fro(&(f.kpart() - k)) < 1e-14);
    }

    #[test]
    fn factorization_rejects_the_cell_boundary() {
        // Corner pivot zero: swap-like element of SL(2, C).
        let w = CMat::from_row_slice(2, 2, &[re(0.0), re(1.0), re(-1.0), re(0.0)]);
        assert!(matches!(hc_factorize(&GroupElement::new(w).unwrap()), Err(Error::NotInBigCell)));
    }

    #[test]
    fn mobius_is_a_ball_action() {
        let ctx = ctx2();
        let gs = seeded_group_samples(&ctx, 5, 10, 0.3);
        let zs = seeded_ball_samples(2, 7, 10, 0.8);
        let e = GroupElement::identity(3);
        for z in &zs {
            let id = mobius(&e, z).unwrap();
            assert!(id.iter().zip(z).all(|(a, b)| (a - b).norm() < 1e-15));
        }
        // Composition law and ball preservation.
        for g1 in gs.iter().take(4) {
            for g2 in gs.iter().skip(4).take(4) {
                for z in zs.iter().take(6) {
                    let lhs = mobius(&g1.compose(g2), z).unwrap();
                    let rhs = mobius(g1, &mobius(g2, z).unwrap()).unwrap();
                    let d: f64 = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).sum();
                    assert!(d < 1e-12);
                }
            }
        }
        for g in &gs {
            for z in &zs {
                let w = mobius(g, z).unwrap();
                let norm2: f64 = w.iter().map(|v| v.norm_sqr()).sum();
                assert!(norm2 < 1.0, "image left the ball: {norm2}");
            }
        }
    }

    #[test]
    fn multiplier_satisfies_the_cocycle_identity() {
        let ctx = ctx2();
        let r = up_rep(0.4, 1, 2, vec![re(1.0), C::new(0.3, 0.4)]);
        let e = GroupElement::identity(3);
        let z0 = [re(0.1), C::new(0.0, -0.2)];
        let m = multiplier(&r, &ctx, &e, &z0).unwrap();
        assert!(linalg::fro(&(&m - CMat::identity(r.dim(), r.dim()))) < 1e-12);
        let gs = seeded_group_samples(&ctx, 23, 8, 0.25);
        let zs = seeded_ball_samples(2, 29, 5, 0.5);
        for g1 in gs.iter().take(4) {
            for g2 in gs.iter().skip(4) {
                for z in &zs {
                    let lhs = multiplier(&r, &ctx, &g1.compose(g2), z).unwrap();
                    let gz = mobius(g2, z).unwrap();
                    let rhs = multiplier(&r, &ctx, g1, &gz).unwrap() * multiplier(&r, &ctx, g2, z).unwrap();
                    assert!(linalg::fro(&(lhs - rhs)) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn multiplier_of_pminus_exponential_at_origin_is_the_fiber_exponential() {
        let ctx = ctx2();
        let r = up_rep(-0.7, 0, 2, vec![C::new(0.5, 0.1), re(2.0)]);
        let y = [C::new(0.3, -0.2), C::new(-0.1, 0.4)];
        let g = exp_pminus(2, &y);
        let m = multiplier(&r, &ctx, &g, &[re(0.0), re(0.0)]).unwrap();
        let want = linalg::exp_nilpotent(&r.rho_minus_coords(&y.to_vec()), r.num_levels() - 1);
        assert!(linalg::fro(&(m - want)) < 1e-13);
    }

    #[test]
    fn infinitesimal_action_has_the_expected_diagonal_and_pplus_form() {
        let ctx = ctx2();
        let r = up_rep(0.8, 1, 2, vec![re(1.0), re(1.0)]);
        let space = SectionSpace::new(2, 4, r.dim());
        // z_hat acts diagonally with eigenvalue i(lambda - j - |alpha|).
        let pz = infinitesimal_action(&r, &ctx, &space, &ctx.zhat).unwrap();
        for p in 0..space.num_monomials() {
            let alpha_deg = space.degree_of_monomial(p);
            for v in 0..space.fiber_dim {
                let j = level_of_fiber(&r, v);
                let idx = p * space.fiber_dim + v;
                let want = im().scale(r.lambda0 - j as f64 - alpha_deg as f64);
                assert!((pz.mat[(idx, idx)] - want).norm() < 1e-13);
                for rr in 0..space.dim() {
                    if rr != idx {
                        assert!(pz.mat[(rr, idx)].norm() < 1e-14);
                    }
                }
            }
        }
        // E_a acts as minus the coordinate derivative.
        for a in 0..2 {
            let pe = infinitesimal_action(&r, &ctx, &space, &ctx.eplus[a]).unwrap();
            assert!(linalg::fro(&(&pe.mat + space.derivative_matrix(a))) < 1e-14);
        }
    }

    #[test]
    fn infinitesimal_action_is_a_lie_algebra_homomorphism() {
        let ctx = ctx2();
        let r = up_rep(0.6, 1, 2, vec![C::new(1.0, 0.5), re(-0.7)]);
        let space = SectionSpace::new(2, 4, r.dim());
        let act = infinitesimal_action_basis(&r, &ctx, &space, &ambient_basis(&ctx)).unwrap();
        let res = homomorphism_residual(&r, &ctx, &space, &act, 2).unwrap();
        assert!(res < 1e-10, "homomorphism residual {res}");
    }

    #[test]
    fn infinitesimal_action_matches_the_group_action_derivative() {
        let ctx = ctx2();
        let r = up_rep(0.5, 0, 2, vec![re(1.0), C::new(0.2, -0.6)]);
        let space = SectionSpace::new(2, 3, r.dim());
        let mut f = PolySection::zeros(&space);
        f.coeffs[space.index(&[1, 1], 0).unwrap()] = C::new(0.7, -0.3);
        f.coeffs[space.index(&[0, 1], 2).unwrap()] = re(1.2);
        f.coeffs[space.index(&[0, 0], 1).unwrap()] = C::new(0.0, 0.9);
        let z = [C::new(0.15, -0.1), C::new(-0.2, 0.05)];
        let h = 1e-5;
        // One element from each graded piece plus a mixed one.
        let mixed = LieElement::new(
            &ctx.eplus[0].mat + &ctx.eminus[1].mat + ctx.kss[0].mat.scale(0.3) + ctx.zhat.mat.scale(0.5),
        )
        .unwrap();
        for x in [&ctx.eplus[1], &ctx.eminus[0], &ctx.kss[1], &ctx.zhat, &mixed] {
            let op = infinitesimal_action(&r, &ctx, &space, x).unwrap();
            let alg = PolySection { coeffs: &op.mat * &f.coeffs };
            let gp = GroupElement::exp(&LieElement { mat: x.mat.scale(h) });
            let gm = GroupElement::exp(&LieElement { mat: x.mat.scale(-h) });
            let fd = (group_action_eval(&r, &ctx, &space, &gp, &f, &z).unwrap()
                - group_action_eval(&r, &ctx, &space, &gm, &f, &z).unwrap())
            .scale(0.5 / h);
            let res = (fd - alg.eval(&space, &z)).norm();
            assert!(res < 1e-6, "residual {res}");
        }
    }

    #[test]
    fn factor_derivative_identities_hold_with_second_order_convergence() {
        let ctx = ctx2();
        let r = up_rep(0.9, 1, 2, vec![re(1.0), re(1.0)]);
        let e = GroupElement::identity(3);
        let z = [re(0.2), C::new(-0.1, 0.15)];
        let (ra, rb) = verify_factor_derivatives(&r, &ctx, &e, &z, &ctx.eplus[0], 1e-5).unwrap();
        assert!(ra < 1e-12 && rb < 1e-12, "identity element: {ra} {rb}");

        let g = GroupElement::exp(&LieElement { mat: (&ctx.eplus[0].mat + &ctx.eminus[0].mat).scale(0.1) });
        // Order measured above the roundoff floor (residuals at h=1e-5 sit
        // at ~1e-11, where FD noise dominates the h^2 term).
        let hs = [1e-2, 1e-3, 1e-4];
        let mut res_a = Vec::new();
        let mut res_b = Vec::new();
        for h in hs {
            let (ra, rb) = verify_factor_derivatives(&r, &ctx, &g, &z, &ctx.eplus[0], h).unwrap();
            res_a.push(ra);
            res_b.push(rb);
        }
        assert!(res_a[2] < 1e-6 && res_b[2] < 1e-6);
        assert!(convergence_order(&hs, &res_a) > 1.9);
        assert!(convergence_order(&hs, &res_b) > 1.9);
        let (ra, rb) = verify_factor_derivatives(&r, &ctx, &g, &z, &ctx.eplus[0], 1e-5).unwrap();
        assert!(ra < 1e-9 && rb < 1e-9);
    }

    #[test]
    fn transport_derivative_identities_hold_at_seeded_samples() {
        let ctx = ctx2();
        let r = up_rep(0.35, 1, 3, vec![re(1.0), C::new(0.5, 0.5), re(-0.8)]);
        let space = SectionSpace::new(2, 4, r.dim());
        let cs: Vec<C> = (1..=3).map(|j| crate::rep::extract_cj(&r, j, &ctx).unwrap()).collect();
        // Section on level 1: fiber offset of level 1 is 2 (Sym^1 on top).
        let mut f = PolySection::zeros(&space);
        f.coeffs[space.index(&[1, 0], r.level_offset(1)).unwrap()] = re(0.9);
        f.coeffs[space.index(&[0, 1], r.level_offset(1) + 1).unwrap()] = C::new(0.2, 0.7);

        let e = GroupElement::identity(3);
        let z0 = [re(0.1), C::new(0.0, 0.2)];
        let (r1, r2) = verify_transport_derivatives(&r, &ctx, &space, &cs, &e, &z0, &f, 1e-5).unwrap();
        assert!(r1 < 1e-9 && r2 < 1e-12, "identity element: {r1} {r2}");

        let gs = seeded_group_samples(&ctx, 41, 4, 0.25);
        let zs = seeded_ball_samples(2, 43, 3, 0.4);
        let hs = [1e-3, 1e-4];
        for g in &gs {
            for z in &zs {
                let mut first = Vec::new();
                let mut second = Vec::new();
                for h in hs {
                    let (r1, r2) = verify_transport_derivatives(&r, &ctx, &space, &cs, g, z, &f, h).unwrap();
                    first.push(r1);
                    second.push(r2);
                }
                assert!(first[1] < 1e-6 && second[1] < 1e-6, "{} {}", first[1], second[1]);
                // O(h^2): going from 1e-3 to 1e-4 should shrink ~100x.
                if first[0] > 1e-10 {
                    assert!(convergence_order(&hs, &first) > 1.9);
                }
                if second[0] > 1e-10 {
                    assert!(convergence_order(&hs, &second) > 1.9);
                }
            }
        }
    }

    #[test]
    fn gamma_intertwines_the_zero_coupling_and_realized_actions() {
        let ctx = ctx2();
        let r = up_rep(0.55, 0, 2, vec![C::new(1.0, 1.0), re(0.5)]);
        let space = SectionSpace::new(2, 4, r.dim());
        let basis = ambient_basis(&ctx);
        let act0 = infinitesimal_action_basis(&zero_coupling(&r), &ctx, &space, &basis).unwrap();
        let acty = infinitesimal_action_basis(&r, &ctx, &space, &basis).unwrap();
        let (u, v) = crate::rep::check_sharp(
            &(1..=2).map(|j| crate::rep::extract_cj(&r, j, &ctx).unwrap()).collect::<Vec<_>>(),
        )
        .unwrap();
        let table = crate::rep::cjk_table(u, v, r.lambda0, 2, 2);
        assert!(table.regular);
        let g = crate::gamma::build_gamma(&r, &ctx, &table, &space).unwrap();
        let res = verify_intertwining(&g, &act0, &acty, &space);
        assert!(res < 1e-10, "intertwining residual {res}");
        // Perturbing one constant breaks it.
        let mut bad = table.clone();
        bad.cjk[2][0] *= re(1.5);
        let gb = crate::gamma::build_gamma(&r, &ctx, &bad, &space).unwrap();
        let res_bad = verify_intertwining(&gb, &act0, &acty, &space);
        assert!(res_bad > 1e-2, "perturbed constant should fail: {res_bad}");
    }

    #[test]
    fn block_solver_recovers_the_closed_form_constants() {
        let ctx = ctx2();
        let r = up_rep(0.45, 1, 2, vec![re(1.0), re(1.0)]);
        let space = SectionSpace::new(2, 4, r.dim());
        let basis = ambient_basis(&ctx);
        let r0 = zero_coupling(&r);
        let act0 = infinitesimal_action_basis(&r0, &ctx, &space, &basis).unwrap();
        let acty = infinitesimal_action_basis(&r, &ctx, &space, &basis).unwrap();
        let ops0: Vec<CMat> = act0.ops.iter().map(|o| o.mat.clone()).collect();
        let opsy: Vec<CMat> = acty.ops.iter().map(|o| o.mat.clone()).collect();
        let sol = crate::gamma::solve_block_gamma(
            &r,
            &ctx,
            &space,
            &|i| Ok(ops0[i].clone()),
            &|i| Ok(opsy[i].clone()),
            basis.len(),
            &pminus_indices(&ctx),
        )
        .unwrap();
        assert_eq!(sol.nullity, 0);
        assert!(sol.full_basis_residual < 1e-9, "{}", sol.full_basis_residual);
        // Compare against the closed form.
        let (u, v) = crate::rep::check_sharp(
            &(1..=2).map(|j| crate::rep::extract_cj(&r, j, &ctx).unwrap()).collect::<Vec<_>>(),
        )
        .unwrap();
        let table = crate::rep::cjk_table(u, v, r.lambda0, 2, 2);
        let g = crate::gamma::build_gamma(&r, &ctx, &table, &space).unwrap();
        assert!(linalg::fro(&(&sol.gamma.mat - &g.mat)) < 1e-9);
    }
}
