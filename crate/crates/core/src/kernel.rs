//! Reproducing kernels of the homogeneous bundles, exact Taylor-coefficient
//! Gram matrices of monomial sections, positivity probes along the weight
//! line, and the pushforward inner product that makes the intertwining
//! operator unitary.
//!
//! Kernels are exposed in two orientations related by inverse-adjoint.
//! `Standard` is the Bergman-style normalization, positive definite for
//! weights on the positive side and carrying the clean Pochhammer norms;
//! `Action` is the orientation invariant under the realized group action
//! (positive on the *negative* side of the weight line), which is the one
//! every unitarity statement uses.  Both evaluate through closed forms that
//! are cross-checked against the group factorization.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gamma::{self, GammaOperator};
use crate::hc;
use crate::lie::StructureContext;
use crate::linalg::{self, ScaleC};
use crate::poly::{SectionOperator, SectionSpace};
use crate::rep::{self, Direction, FiliformSpec, RepRealization, RepSpec};
use crate::sl2;
use crate::{one, re, C, CMat, Error, Result};

/// The ball pairing `<z,w> = sum_i z_i conj(w_i)` (antiholomorphic in `w`).
pub fn ball_inner(z: &[C], w: &[C]) -> C {
    z.iter().zip(w).map(|(a, b)| a * b.conj()).sum()
}

/// Reductive part (A-block, d) of `exp(-wbar) exp(z)`, computed through the
/// general factorization.
pub fn ktilde(n: usize, z: &[C], w: &[C]) -> Result<(CMat, C)> {
    let wbar: Vec<C> = w.iter().map(|x| -x.conj()).collect();
    let g = hc::exp_pminus(n, &wbar).compose(&hc::exp_pplus(n, z));
    let f = hc::hc_factorize(&g)?;
    Ok((f.kpart_a, f.kpart_d))
}

/// Closed form of [`ktilde`]: `A = I + z w^* / (1 - <z,w>)`,
/// `d = 1 - <z,w>`.
pub fn ktilde_closed(n: usize, z: &[C], w: &[C]) -> Result<(CMat, C)> {
    let d = one() - ball_inner(z, w);
    if d.norm() < 1e-12 {
        return Err(Error::NotInBigCell);
    }
    let mut a = CMat::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] += z[i] * w[j].conj() / d;
        }
    }
    Ok((a, d))
}

/// Orientation of a reproducing kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelForm {
    /// `(1-<z,w>)^{-(nu + k/2)} Sym^k((1-<z,w>) I + z w^*)`: the fiber
    /// representation applied to the reductive part of `exp(-wbar) exp(z)`.
    /// Positive definite for weights above the threshold.
    Standard,
    /// `(1-<z,w>)^{nu - k/2} Sym^k(I - z w^*)`: inverse-adjoint of the
    /// standard form with arguments swapped.  Invariant under the realized
    /// left action; positive definite below the threshold.
    Action,
}

/// A `Hom(V,V)`-valued reproducing kernel on the ball, `V = Sym^k(C^2)`
/// (a scalar line for n = 1) with central weight `lambda`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelFunction {
    pub n: usize,
    pub sym_power: usize,
    pub lambda: f64,
    pub form: KernelForm,
}

impl KernelFunction {
    pub fn new(n: usize, sym_power: usize, lambda: f64, form: KernelForm) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(Error::Precondition(format!("unsupported rank {n}")));
        }
        if n == 1 && sym_power != 0 {
            return Err(Error::Precondition("disc fibers are scalar lines".into()));
        }
        Ok(Self { n, sym_power, lambda, form })
    }

    pub fn fiber_dim(&self) -> usize {
        if self.n == 1 {
            1
        } else {
            self.sym_power + 1
        }
    }

    /// Scalar-part exponent `nu = (n+1) lambda / n` of the determinant
    /// character.
    pub fn nu(&self) -> f64 {
        (self.n as f64 + 1.0) * self.lambda / self.n as f64
    }

    /// Total prefactor exponent: the kernel is `(1-<z,w>)^mu` times a
    /// polynomial matrix.
    pub fn mu(&self) -> f64 {
        let half_k = self.sym_power as f64 / 2.0;
        match self.form {
            KernelForm::Standard => -(self.nu() + half_k),
            KernelForm::Action => self.nu() - half_k,
        }
    }

    /// Closed-form evaluation.
    pub fn eval(&self, z: &[C], w: &[C]) -> Result<CMat> {
        let s = ball_inner(z, w);
        let d = one() - s;
        if d.norm() < 1e-12 {
            return Err(Error::NotInBigCell);
        }
        let block = if self.n == 1 {
            CMat::identity(1, 1)
        } else {
            let m = match self.form {
                KernelForm::Standard => CMat::from_fn(2, 2, |i, j| {
                    let diag = if i == j { d } else { re(0.0) };
                    diag + z[i] * w[j].conj()
                }),
                KernelForm::Action => CMat::from_fn(2, 2, |i, j| {
                    let diag = if i == j { one() } else { re(0.0) };
                    diag - z[i] * w[j].conj()
                }),
            };
            sl2::sym_power_matrix(self.sym_power, &m)
        };
        Ok(block.scale_c(d.powf(self.mu())))
    }

    /// The one-level realization carrying this kernel's fiber.
    pub fn one_level(&self) -> Result<RepRealization> {
        rep::realize(&RepSpec::Filiform(FiliformSpec {
            n: self.n,
            lambda0: self.lambda,
            k0: self.sym_power,
            m: 0,
            direction: Direction::Up,
            y: vec![],
        }))
    }

    /// Evaluation through the group factorization, bypassing the closed
    /// forms: `Standard` applies the fiber representation to the reductive
    /// part of `exp(-wbar) exp(z)`; `Action` takes the inverse-adjoint with
    /// the arguments swapped.
    pub fn eval_generic(&self, ctx: &StructureContext, z: &[C], w: &[C]) -> Result<CMat> {
        let r = self.one_level()?;
        match self.form {
            KernelForm::Standard => {
                let (a, d) = ktilde(self.n, z, w)?;
                r.rho0_group(ctx, &a, d)
            }
            KernelForm::Action => {
                let (a, d) = ktilde(self.n, w, z)?;
                Ok(linalg::inv(&r.rho0_group(ctx, &a, d)?).adjoint())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Exact bivariate series.

/// Polynomial in `(z_1..z_n, v_1..v_n)` with complex coefficients, where
/// `v_i` stands for `conj(w_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyZV {
    n: usize,
    terms: BTreeMap<(Vec<usize>, Vec<usize>), C>,
}

impl PolyZV {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: C) -> Self {
        let mut p = Self::zero(n);
        p.insert(vec![0; n], vec![0; n], c);
        p
    }

    pub fn var_z(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        let mut p = Self::zero(n);
        p.insert(e, vec![0; n], one());
        p
    }

    pub fn var_v(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        let mut p = Self::zero(n);
        p.insert(vec![0; n], e, one());
        p
    }

    /// `1 - <z,w> = 1 - sum_a z_a v_a`.
    pub fn one_minus_s(n: usize) -> Self {
        let mut p = Self::constant(n, one());
        for a in 0..n {
            let mut ez = vec![0; n];
            ez[a] = 1;
            p.insert(ez.clone(), ez, -one());
        }
        p
    }

    fn insert(&mut self, az: Vec<usize>, av: Vec<usize>, c: C) {
        if c.norm() == 0.0 {
            return;
        }
        let key = (az, av);
        let new = self.terms.get(&key).copied().unwrap_or_else(|| re(0.0)) + c;
        if new.norm() == 0.0 {
            self.terms.remove(&key);
        } else {
            self.terms.insert(key, new);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for ((az, av), c) in &other.terms {
            out.insert(az.clone(), av.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-one()))
    }

    pub fn scale(&self, c: C) -> Self {
        let mut out = Self::zero(self.n);
        for ((az, av), t) in &self.terms {
            out.insert(az.clone(), av.clone(), t * c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.n);
        for ((az, av), c1) in &self.terms {
            for ((bz, bv), c2) in &other.terms {
                let sz = az.iter().zip(bz).map(|(a, b)| a + b).collect();
                let sv = av.iter().zip(bv).map(|(a, b)| a + b).collect();
                out.insert(sz, sv, c1 * c2);
            }
        }
        out
    }

    pub fn deriv_z(&self, i: usize) -> Self {
        let mut out = Self::zero(self.n);
        for ((az, av), c) in &self.terms {
            if az[i] == 0 {
                continue;
            }
            let mut d = az.clone();
            d[i] -= 1;
            out.insert(d, av.clone(), c.scale(az[i] as f64));
        }
        out
    }

    pub fn deriv_v(&self, i: usize) -> Self {
        let mut out = Self::zero(self.n);
        for ((az, av), c) in &self.terms {
            if av[i] == 0 {
                continue;
            }
            let mut d = av.clone();
            d[i] -= 1;
            out.insert(az.clone(), d, c.scale(av[i] as f64));
        }
        out
    }

    pub fn eval(&self, z: &[C], v: &[C]) -> C {
        let mut acc = re(0.0);
        for ((az, av), c) in &self.terms {
            let mut t = *c;
            for i in 0..self.n {
                t *= z[i].powu(az[i] as u32) * v[i].powu(av[i] as u32);
            }
            acc += t;
        }
        acc
    }
}

/// Exponent vectors of total degree `d` in `n` variables, ascending
/// lexicographic (matches the section-space monomial order).
fn expos_of_degree(n: usize, d: usize) -> Vec<Vec<usize>> {
    match n {
        1 => vec![vec![d]],
        2 => (0..=d).map(|a| vec![a, d - a]).collect(),
        _ => unreachable!(),
    }
}

/// A kernel in exact series form: `(1 - <z,w>)^mu` times a fiber matrix of
/// polynomials in `(z, v = conj w)`.  Closed under the holomorphic and
/// antiholomorphic derivatives used by the one-step operator.
#[derive(Debug, Clone)]
pub struct KernelSym {
    pub n: usize,
    pub mu: f64,
    p: Vec<Vec<PolyZV>>,
}

/// Symmetric power of a 2x2 matrix with polynomial entries, orthonormal
/// basis; mirrors the scalar [`sl2::sym_power_matrix`].
fn sym_power_poly(k: usize, m: &[Vec<PolyZV>]) -> Vec<Vec<PolyZV>> {
    let n = 2;
    let pows = |p: &PolyZV| -> Vec<PolyZV> {
        let mut out = vec![PolyZV::constant(n, one())];
        for e in 1..=k {
            out.push(out[e - 1].mul(p));
        }
        out
    };
    let (ap, bp) = (pows(&m[0][0]), pows(&m[1][0]));
    let (cp, dp) = (pows(&m[0][1]), pows(&m[1][1]));
    let mut out = vec![vec![PolyZV::zero(n); k + 1]; k + 1];
    for j in 0..=k {
        for i in 0..=k {
            let mut acc = PolyZV::zero(n);
            for s in 0..=(k - j) {
                let t_pow = (k - i) as i64 - s as i64;
                if t_pow < 0 || t_pow as usize > j {
                    continue;
                }
                let t = t_pow as usize;
                let coef = sl2::binom(k - j, s) * sl2::binom(j, t);
                let term = ap[s].mul(&bp[k - j - s]).mul(&cp[t]).mul(&dp[j - t]);
                acc = acc.add(&term.scale(re(coef)));
            }
            // Monomial to orthonormal rescale.
            let scale = (sl2::binom(k, j) / sl2::binom(k, i)).sqrt();
            out[i][j] = acc.scale(re(scale));
        }
    }
    out
}

impl KernelSym {
    pub fn from_kernel(k: &KernelFunction) -> Result<KernelSym> {
        if k.n == 1 {
            return Ok(KernelSym {
                n: 1,
                mu: k.mu(),
                p: vec![vec![PolyZV::constant(1, one())]],
            });
        }
        let n = 2;
        let mut m = vec![vec![PolyZV::zero(n); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let zv = PolyZV::var_z(n, i).mul(&PolyZV::var_v(n, j));
                m[i][j] = match k.form {
                    KernelForm::Standard => {
                        let diag = if i == j {
                            PolyZV::one_minus_s(n)
                        } else {
                            PolyZV::zero(n)
                        };
                        diag.add(&zv)
                    }
                    KernelForm::Action => {
                        let diag = if i == j {
                            PolyZV::constant(n, one())
                        } else {
                            PolyZV::zero(n)
                        };
                        diag.sub(&zv)
                    }
                };
            }
        }
        Ok(KernelSym { n, mu: k.mu(), p: sym_power_poly(k.sym_power, &m) })
    }

    pub fn fiber_dim(&self) -> usize {
        self.p.len()
    }

    pub fn eval(&self, z: &[C], w: &[C]) -> Result<CMat> {
        let d = one() - ball_inner(z, w);
        if d.norm() < 1e-12 {
            return Err(Error::NotInBigCell);
        }
        let v: Vec<C> = w.iter().map(|x| x.conj()).collect();
        let pref = d.powf(self.mu);
        let fd = self.fiber_dim();
        Ok(CMat::from_fn(fd, fd, |r, c| self.p[r][c].eval(z, &v) * pref))
    }

    /// Holomorphic derivative in `z_i`.
    pub fn deriv_z(&self, i: usize) -> KernelSym {
        let oms = PolyZV::one_minus_s(self.n);
        let vi = PolyZV::var_v(self.n, i);
        let p = self
            .p
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| oms.mul(&e.deriv_z(i)).sub(&vi.mul(e).scale(re(self.mu))))
                    .collect()
            })
            .collect();
        KernelSym { n: self.n, mu: self.mu - 1.0, p }
    }

    /// Antiholomorphic derivative in `w_i` (that is, in `v_i = conj w_i`).
    pub fn deriv_v(&self, i: usize) -> KernelSym {
        let oms = PolyZV::one_minus_s(self.n);
        let zi = PolyZV::var_z(self.n, i);
        let p = self
            .p
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| oms.mul(&e.deriv_v(i)).sub(&zi.mul(e).scale(re(self.mu))))
                    .collect()
            })
            .collect();
        KernelSym { n: self.n, mu: self.mu - 1.0, p }
    }

    /// Exact Taylor coefficient blocks `C_{alpha beta}` of the expansion
    /// `K = sum C_{alpha beta} z^alpha conj(w)^beta`, for
    /// `|alpha|, |beta| <= max_degree`.  Torus invariance makes every block
    /// with `|alpha| != |beta|` vanish.
    pub fn taylor_coeffs(&self, max_degree: usize) -> BTreeMap<(Vec<usize>, Vec<usize>), CMat> {
        // (1-s)^mu = sum_m binom(mu,m)(-s)^m; s^m spreads multinomially over
        // the diagonal exponents gamma with |gamma| = m.
        let mut pref: Vec<(Vec<usize>, f64)> = Vec::new();
        for m in 0..=max_degree {
            let mut cm = if m % 2 == 1 { -1.0 } else { 1.0 };
            for t in 0..m {
                cm *= (self.mu - t as f64) / (t as f64 + 1.0);
            }
            for g in expos_of_degree(self.n, m) {
                let mut mult = 1.0;
                for t in 1..=m {
                    mult *= t as f64;
                }
                for &gi in &g {
                    for t in 1..=gi {
                        mult /= t as f64;
                    }
                }
                pref.push((g, cm * mult));
            }
        }
        let fd = self.fiber_dim();
        let mut out: BTreeMap<(Vec<usize>, Vec<usize>), CMat> = BTreeMap::new();
        for r in 0..fd {
            for c in 0..fd {
                for ((az, av), coef) in &self.p[r][c].terms {
                    for (g, pc) in &pref {
                        let alpha: Vec<usize> = az.iter().zip(g).map(|(a, b)| a + b).collect();
                        let beta: Vec<usize> = av.iter().zip(g).map(|(a, b)| a + b).collect();
                        if alpha.iter().sum::<usize>() > max_degree
                            || beta.iter().sum::<usize>() > max_degree
                        {
                            continue;
                        }
                        let blk = out
                            .entry((alpha, beta))
                            .or_insert_with(|| CMat::zeros(fd, fd));
                        blk[(r, c)] += coef.scale(*pc);
                    }
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Gram matrices.

/// Where a Gram matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GramProvenance {
    Kernel,
    GradedSum,
    Pushforward,
}

/// Inner product of the monomial-section basis up to a degree truncation,
/// block-diagonal across total degree.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub mat: CMat,
    pub max_degree: usize,
    pub fiber_dim: usize,
    /// Minimum eigenvalue of the kernel coefficient block, per degree.
    pub block_min_eigs: Vec<f64>,
    /// First degree whose coefficient block fails positivity, if any.
    pub failing_degree: Option<usize>,
    pub provenance: GramProvenance,
}

impl GramMatrix {
    pub fn positive(&self) -> bool {
        self.failing_degree.is_none()
    }

    pub fn ensure_positive(&self) -> Result<()> {
        match self.failing_degree {
            None => Ok(()),
            Some(d) => Err(Error::IndefiniteGram { degree: d, min_eig: self.block_min_eigs[d] }),
        }
    }
}

/// Positivity verdict for a coefficient block: minimum eigenvalue must clear
/// a relative floor.
fn block_verdict(eigs: &[f64]) -> (f64, bool) {
    let min = eigs.first().copied().unwrap_or(0.0);
    let scale = eigs.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
    (min, min > 1e-12 * scale)
}

/// One source of coefficient blocks: a kernel over `copy_dim` fiber slots,
/// scattered at the fiber offsets in `targets`.
struct GramSource {
    coeffs: BTreeMap<(Vec<usize>, Vec<usize>), CMat>,
    copy_dim: usize,
    targets: Vec<usize>,
}

/// Shared Gram assembly: per degree, build each source's coefficient block
/// over (monomials of that degree) x (fiber slots), invert the positive ones
/// in place, and scatter into the full matrix.
fn assemble_gram(
    space: &SectionSpace,
    sources: &[GramSource],
    provenance: GramProvenance,
) -> Result<GramMatrix> {
    let fd = space.fiber_dim;
    let mut mat = CMat::zeros(space.dim(), space.dim());
    let mut mins = Vec::with_capacity(space.max_degree + 1);
    let mut failing = None;
    for d in 0..=space.max_degree {
        let ps: Vec<usize> = (0..space.num_monomials())
            .filter(|&p| space.degree_of_monomial(p) == d)
            .collect();
        let mut degree_min = f64::INFINITY;
        let mut degree_ok = true;
        for src in sources {
            let cd = src.copy_dim;
            let bs = ps.len() * cd;
            let mut m = CMat::zeros(bs, bs);
            for (pi, &p) in ps.iter().enumerate() {
                for (qi, &q) in ps.iter().enumerate() {
                    let key = (space.monomial(p).to_vec(), space.monomial(q).to_vec());
                    if let Some(blk) = src.coeffs.get(&key) {
                        for r in 0..cd {
                            for c in 0..cd {
                                m[(pi * cd + r, qi * cd + c)] = blk[(r, c)];
                            }
                        }
                    }
                }
            }
            let dev = linalg::max_abs(&(&m - m.adjoint()));
            if dev > 1e-10 * (1.0 + linalg::max_abs(&m)) {
                return Err(Error::NumericBreakdown(format!(
                    "coefficient block at degree {d} is not Hermitian (deviation {dev:.3e})"
                )));
            }
            let eigs = linalg::hermitian_eigenvalues(&m);
            let (min_eig, ok) = block_verdict(&eigs);
            degree_min = degree_min.min(min_eig);
            if !ok {
                degree_ok = false;
                continue;
            }
            let g = linalg::inv(&m);
            for t in &src.targets {
                for (pi, &p) in ps.iter().enumerate() {
                    for (qi, &q) in ps.iter().enumerate() {
                        for r in 0..cd {
                            for c in 0..cd {
                                mat[(p * fd + t + r, q * fd + t + c)] =
                                    g[(pi * cd + r, qi * cd + c)];
                            }
                        }
                    }
                }
            }
        }
        mins.push(degree_min);
        if !degree_ok && failing.is_none() {
            failing = Some(d);
        }
    }
    Ok(GramMatrix {
        mat,
        max_degree: space.max_degree,
        fiber_dim: fd,
        block_min_eigs: mins,
        failing_degree: failing,
        provenance,
    })
}

/// Gram matrix of the monomial sections under the reproducing-kernel inner
/// product: blockwise inverse of the Taylor coefficient matrix.
pub fn gram_from_kernel(kernel: &KernelFunction, space: &SectionSpace) -> Result<GramMatrix> {
    if space.n != kernel.n {
        return Err(Error::DimensionMismatch { expected: kernel.n, got: space.n });
    }
    if space.fiber_dim != kernel.fiber_dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.fiber_dim(),
            got: space.fiber_dim,
        });
    }
    let sym = KernelSym::from_kernel(kernel)?;
    let src = GramSource {
        coeffs: sym.taylor_coeffs(space.max_degree),
        copy_dim: kernel.fiber_dim(),
        targets: vec![0],
    };
    assemble_gram(space, &[src], GramProvenance::Kernel)
}

/// Closed-form squared norm of `z^alpha` in the scalar space with kernel
/// `(1 - <z,w>)^{-nu}`: `alpha! / (nu)_{|alpha|}`.
pub fn pochhammer_norm_sq(nu: f64, alpha: &[usize]) -> f64 {
    let total: usize = alpha.iter().sum();
    let mut num = 1.0;
    for &a in alpha {
        for t in 1..=a {
            num *= t as f64;
        }
    }
    let mut den = 1.0;
    for t in 0..total {
        den *= nu + t as f64;
    }
    num / den
}

/// Reference inner product on the full graded section space: every level
/// (and every multiplicity copy inside it) carries the kernel Gram of its
/// own irreducible bundle at weight `lambda0 - j`, with distinct copies and
/// levels mutually orthogonal.
pub fn graded_gram(
    r: &RepRealization,
    space: &SectionSpace,
    form: KernelForm,
) -> Result<GramMatrix> {
    if space.n != r.n {
        return Err(Error::DimensionMismatch { expected: r.n, got: space.n });
    }
    if space.fiber_dim != r.dim() {
        return Err(Error::DimensionMismatch { expected: r.dim(), got: space.fiber_dim });
    }
    let mut sources = Vec::new();
    for j in 0..r.num_levels() {
        for (ci, comp) in r.levels[j].iter().enumerate() {
            let sym_power = if r.n == 1 { 0 } else { comp.sym_power };
            let kf = KernelFunction::new(r.n, sym_power, r.lambda0 - j as f64, form)?;
            let sym = KernelSym::from_kernel(&kf)?;
            let cd = comp.sym_power + 1;
            let base = r.level_offset(j) + r.component_offset(j, ci);
            let targets = (0..comp.multiplicity).map(|cp| base + cp * cd).collect();
            sources.push(GramSource {
                coeffs: sym.taylor_coeffs(space.max_degree),
                copy_dim: cd,
                targets,
            });
        }
    }
    assemble_gram(space, &sources, GramProvenance::GradedSum)
}

/// The pushforward inner product `G_y = (Gamma^{-1})^* G_0 Gamma^{-1}`: the
/// unique one making the intertwining operator unitary from `(sections, G_0)`
/// onto `(sections, G_y)`.
pub fn pushforward_gram(g0: &GramMatrix, gamma: &GammaOperator) -> Result<GramMatrix> {
    if g0.mat.nrows() != gamma.mat.nrows() {
        return Err(Error::DimensionMismatch {
            expected: g0.mat.nrows(),
            got: gamma.mat.nrows(),
        });
    }
    let gi = gamma::invert_gamma(gamma);
    let m = linalg::smul(&linalg::smul(&gi.mat.adjoint(), &g0.mat), &gi.mat);
    Ok(GramMatrix {
        mat: m,
        max_degree: g0.max_degree,
        fiber_dim: g0.fiber_dim,
        block_min_eigs: g0.block_min_eigs.clone(),
        failing_degree: g0.failing_degree,
        provenance: GramProvenance::Pushforward,
    })
}

/// Largest entry of `pi(X)^* G + G pi(X)` over coefficient indices of degree
/// `<= max_degree - 1`, maximized over the given operators: zero exactly when
/// every operator is skew-adjoint for `G` on the truncation-safe window.
pub fn skew_adjoint_residual(
    g: &GramMatrix,
    ops: &[SectionOperator],
    space: &SectionSpace,
) -> f64 {
    let keep = space.indices_up_to_degree(space.max_degree.saturating_sub(1));
    let mut worst = 0.0f64;
    for op in ops {
        let m = linalg::smul(&op.mat.adjoint(), &g.mat) + linalg::smul(&g.mat, &op.mat);
        for &a in &keep {
            for &b in &keep {
                worst = worst.max(m[(a, b)].norm());
            }
        }
    }
    worst
}

/// Condition number of the identity map between the degree-`d` coefficient
/// blocks of two inner products: `sqrt(max/min)` over the generalized
/// eigenvalues of `(G_b, G_a)`.
pub fn grading_condition_number(
    ga: &GramMatrix,
    gb: &GramMatrix,
    space: &SectionSpace,
    d: usize,
) -> Result<f64> {
    let idx: Vec<usize> = (0..space.dim()).filter(|&i| space.degree_of_index(i) == d).collect();
    let sub = |g: &GramMatrix| {
        CMat::from_fn(idx.len(), idx.len(), |r, c| g.mat[(idx[r], idx[c])])
    };
    let a = sub(ga);
    let b = sub(gb);
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::NumericBreakdown(format!("degree {d} block not positive")))?;
    let li = linalg::inv(&chol.l());
    let m = &li * b * li.adjoint();
    let eigs = linalg::hermitian_eigenvalues(&m);
    let (lo, hi) = (eigs.first().copied().unwrap_or(1.0), eigs.last().copied().unwrap_or(1.0));
    if lo <= 0.0 {
        return Err(Error::NumericBreakdown(format!(
            "degree {d} comparison block not positive (min {lo:.3e})"
        )));
    }
    Ok((hi / lo).sqrt())
}

// ---------------------------------------------------------------------------
// Positivity probes.

/// Verdict at one weight of the threshold scan.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdPoint {
    pub lambda: f64,
    pub positive: bool,
    pub min_eig: f64,
    pub failing_degree: Option<usize>,
    pub degree_min_eigs: Vec<f64>,
}

/// Scan of Gram positivity along the weight line (action orientation:
/// positive below the threshold).
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub n: usize,
    pub sym_power: usize,
    pub max_degree: usize,
    pub points: Vec<ThresholdPoint>,
    /// True when the verdicts form a positive prefix followed by a failing
    /// suffix along the ascending grid.
    pub monotone: bool,
    /// Adjacent grid weights bracketing the first sign change.
    pub bracket: Option<(f64, f64)>,
}

pub fn probe_lambda_threshold(
    n: usize,
    sym_power: usize,
    lambda_grid: &[f64],
    max_degree: usize,
) -> Result<ThresholdReport> {
    let mut grid = lambda_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut points = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let kf = KernelFunction::new(n, sym_power, lambda, KernelForm::Action)?;
        let sym = KernelSym::from_kernel(&kf)?;
        let coeffs = sym.taylor_coeffs(max_degree);
        let fd = kf.fiber_dim();
        let mut degree_min_eigs = Vec::with_capacity(max_degree + 1);
        let mut failing = None;
        for d in 0..=max_degree {
            let expos = expos_of_degree(n, d);
            let bs = expos.len() * fd;
            let mut m = CMat::zeros(bs, bs);
            for (pi, a) in expos.iter().enumerate() {
                for (qi, b) in expos.iter().enumerate() {
                    if let Some(blk) = coeffs.get(&(a.clone(), b.clone())) {
                        for r in 0..fd {
                            for c in 0..fd {
                                m[(pi * fd + r, qi * fd + c)] = blk[(r, c)];
                            }
                        }
                    }
                }
            }
            let (min_eig, ok) = block_verdict(&linalg::hermitian_eigenvalues(&m));
            degree_min_eigs.push(min_eig);
            if !ok && failing.is_none() {
                failing = Some(d);
            }
        }
        let min_eig = degree_min_eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        points.push(ThresholdPoint {
            lambda,
            positive: failing.is_none(),
            min_eig,
            failing_degree: failing,
            degree_min_eigs,
        });
    }
    let first_fail = points.iter().position(|p| !p.positive);
    let monotone = match first_fail {
        None => true,
        Some(i) => points[i..].iter().all(|p| !p.positive),
    };
    let bracket = match first_fail {
        Some(i) if i > 0 && points[i - 1].positive => Some((points[i - 1].lambda, points[i].lambda)),
        _ => None,
    };
    Ok(ThresholdReport { n, sym_power, max_degree, points, monotone, bracket })
}

// ---------------------------------------------------------------------------
// Sample positivity of the stepped-down kernel difference.

/// Seeded sample points spread over radial shells inside the given radius.
pub fn radial_shell_samples(n: usize, seed: u64, count: usize, radius: f64) -> Vec<Vec<C>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shells = 4usize;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let r = radius * (i % shells + 1) as f64 / shells as f64;
        let mut dir: Vec<C> = (0..n)
            .map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm: f64 = dir.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-9 {
            dir[0] = one();
        }
        let norm: f64 = dir.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        out.push(dir.into_iter().map(|c| c.scale(r / norm)).collect());
    }
    out
}

/// Result of the sample positivity check for the kernel difference
/// `C K_{sigma1, lambda-1} - (one-step op applied on both arguments of
/// K_{sigma0, lambda})`.
#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    pub k0: usize,
    pub direction: Direction,
    pub lambda: f64,
    pub seed: u64,
    pub points: usize,
    /// Minimum eigenvalue of the stacked sample Gram per grid constant.
    pub min_eigs: Vec<(f64, f64)>,
    /// Smallest grid constant whose sample Gram clears the tolerance.
    pub minimal_c: Option<f64>,
    /// Minimum eigenvalue at zero coupling constant (must be negative:
    /// the subtracted term is a nonzero positive kernel).
    pub zero_c_min_eig: f64,
    pub tolerance: f64,
}

pub fn domination_check(
    ctx: &StructureContext,
    k0: usize,
    dir: Direction,
    lambda: f64,
    c_grid: &[f64],
    npoints: usize,
    seed: u64,
) -> Result<DominationReport> {
    if ctx.n != 2 {
        return Err(Error::Precondition(
            "sample positivity check is implemented on the two-ball".into(),
        ));
    }
    let k1 = match dir {
        Direction::Up => k0 + 1,
        Direction::Down => {
            if k0 == 0 {
                return Err(Error::Precondition("no downward neighbour of the scalar fiber".into()));
            }
            k0 - 1
        }
    };
    let f0 = KernelFunction::new(2, k0, lambda, KernelForm::Action)?;
    let f1 = KernelFunction::new(2, k1, lambda - 1.0, KernelForm::Action)?;
    let s0 = KernelSym::from_kernel(&f0)?;
    let s1 = KernelSym::from_kernel(&f1)?;
    // Contraction blocks T_a = sum_b Ginv[b,a] P(u(F_b) (x) .), matching the
    // one-step operator's fiber insertions.
    let p = sl2::cg_projection(k0, dir)?;
    let xs: Vec<CMat> = (0..2).map(|a| p.columns(a * (k0 + 1), k0 + 1).into_owned()).collect();
    let ginv = linalg::inv(&ctx.pairing_gram());
    let mut ts = vec![CMat::zeros(k1 + 1, k0 + 1); 2];
    for a in 0..2 {
        for b in 0..2 {
            let coef = ginv[(b, a)];
            if coef.norm() == 0.0 {
                continue;
            }
            let mut f_coords = vec![re(0.0); 2];
            f_coords[b] = one();
            let u = rep::u_coords_of_pminus(2, &f_coords);
            for (slot, us) in u.iter().enumerate() {
                if us.norm() == 0.0 {
                    continue;
                }
                ts[a] += xs[slot].scale_c(coef * us);
            }
        }
    }
    let dzv: Vec<Vec<KernelSym>> = (0..2)
        .map(|a| (0..2).map(|ap| s0.deriv_z(a).deriv_v(ap)).collect())
        .collect();
    let pts = radial_shell_samples(2, seed, npoints, 0.8);
    let dim1 = k1 + 1;
    let big = npoints * dim1;
    let mut kbig = CMat::zeros(big, big);
    let mut nbig = CMat::zeros(big, big);
    for i in 0..npoints {
        for j in 0..npoints {
            let kblk = s1.eval(&pts[i], &pts[j])?;
            let mut nblk = CMat::zeros(dim1, dim1);
            for a in 0..2 {
                for ap in 0..2 {
                    let bblk = dzv[a][ap].eval(&pts[i], &pts[j])?;
                    nblk += &ts[a] * bblk * ts[ap].adjoint();
                }
            }
            for r in 0..dim1 {
                for c in 0..dim1 {
                    kbig[(i * dim1 + r, j * dim1 + c)] = kblk[(r, c)];
                    nbig[(i * dim1 + r, j * dim1 + c)] = nblk[(r, c)];
                }
            }
        }
    }
    let tolerance = 1e-10;
    let mut grid = c_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let min_eig_at = |c: f64| -> f64 {
        let h = kbig.scale(c) - &nbig;
        linalg::hermitian_eigenvalues(&h).first().copied().unwrap_or(0.0)
    };
    let mut min_eigs = Vec::with_capacity(grid.len());
    let mut minimal_c = None;
    for &c in &grid {
        let me = min_eig_at(c);
        min_eigs.push((c, me));
        if minimal_c.is_none() && me >= -tolerance {
            minimal_c = Some(c);
        }
    }
    let zero_c_min_eig = min_eig_at(0.0);
    Ok(DominationReport {
        k0,
        direction: dir,
        lambda,
        seed,
        points: npoints,
        min_eigs,
        minimal_c,
        zero_c_min_eig,
        tolerance,
    })
}
