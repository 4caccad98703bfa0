//! Graded representations of k^C + p^- on finite chains of symmetric powers,
//! their admissibility classification, and the chain constants feeding the
//! intertwining operator.
//!
//! A realization carries, per level j, a k^C-module V_j (direct sum of
//! Sym^s(C^2) components with multiplicities; always C for n = 1) with
//! central weight lambda - j, and per step j -> j+1 the p^- transition maps
//! rho^-(Y)|_{V_j -> V_{j+1}} = y_{j+1} * P_{j+1}(Y (x) .), built from the
//! normalized Clebsch-Gordan co-isometries.  Only monotone chains give
//! commuting p^- actions; the brute-force classifier measures this.

use serde::{Deserialize, Serialize};

use crate::lie::{bracket, LieElement, StructureContext};
use crate::linalg::{self, ScaleC};
use crate::sl2;
pub use crate::sl2::Direction;
use crate::{im, re, C, CMat, Error, Result};

/// Single filiform chain: levels Sym^(k0), Sym^(k0 +/- 1), ..., with scalar
/// transition coefficients y_1..y_m.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiliformSpec {
    pub n: usize,
    /// Central character weight of the top level.
    pub lambda0: f64,
    /// Symmetric power of the top level (must be 0 for n = 1).
    pub k0: usize,
    /// Number of steps.
    pub m: usize,
    pub direction: Direction,
    /// Nonzero transition scalars, length m.
    pub y: Vec<C>,
}

/// One irreducible-isotype component of a level: multiplicity copies of
/// Sym^(sym_power).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelComponent {
    pub sym_power: usize,
    pub multiplicity: usize,
}

/// Transition block between component `src` of level j and component `tgt`
/// of level j+1; `y` is a multiplicity_tgt x multiplicity_src matrix
/// (row-major).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockEntry {
    pub src: usize,
    pub tgt: usize,
    pub y: Vec<Vec<C>>,
}

/// General graded spec: arbitrary components per level and block transition
/// matrices per step (n = 2 only).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockSpec {
    pub n: usize,
    pub lambda0: f64,
    pub levels: Vec<Vec<LevelComponent>>,
    /// steps[j] holds the entries for level j -> j+1; length levels.len()-1.
    pub steps: Vec<Vec<BlockEntry>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum RepSpec {
    Filiform(FiliformSpec),
    Block(BlockSpec),
}

/// Realized transition block with its Clebsch-Gordan co-isometry.
#[derive(Debug, Clone)]
pub struct RealizedEntry {
    pub src: usize,
    pub tgt: usize,
    /// multiplicity_tgt x multiplicity_src coefficient matrix.
    pub y: CMat,
    /// Canonical projection C^n (x) Sym^(s_src) -> Sym^(s_tgt), orthonormal
    /// bases, p^- slot first ((s_tgt+1) x (n (s_src+1))).
    pub proj: CMat,
}

/// Concrete matrices of a graded k^C + p^- representation.
#[derive(Debug, Clone)]
pub struct RepRealization {
    pub n: usize,
    pub lambda0: f64,
    pub levels: Vec<Vec<LevelComponent>>,
    pub steps: Vec<Vec<RealizedEntry>>,
    /// Central weight per level (z_hat acts as i * weight); lambda0 - j at
    /// level j.  Public so tests can corrupt a level deliberately.
    pub central_weights: Vec<f64>,
    pub spec: RepSpec,
}

/// Coordinates of a p^- element in the orthonormal weight basis
/// (u_0, u_1) = (F_2, -F_1) for n = 2, (u_0) = (F_1) for n = 1.
pub fn u_coords_of_pminus(n: usize, f_coords: &[C]) -> Vec<C> {
    match n {
        1 => vec![f_coords[0]],
        2 => vec![f_coords[1], -f_coords[0]],
        _ => unreachable!(),
    }
}

/// The orthonormal weight basis of p^- as Lie elements.
pub fn u_basis(ctx: &StructureContext) -> Vec<LieElement> {
    match ctx.n {
        1 => vec![ctx.eminus[0].clone()],
        2 => vec![ctx.eminus[1].clone(), LieElement { mat: -ctx.eminus[0].mat.clone() }],
        _ => unreachable!(),
    }
}

/// Central coefficient and 2x2 weight-basis matrix of the semisimple part of
/// a k^C element (the 2x2 matrix is zero-size for n = 1, returned as None).
fn split_kc(ctx: &StructureContext, z: &LieElement) -> Result<(C, Option<CMat>)> {
    let kc = ctx.kc_coords(z)?;
    if ctx.n == 1 {
        return Ok((kc[0], None));
    }
    let (h, e, f) = (kc[1], kc[2], kc[3]);
    let m2 = CMat::from_row_slice(2, 2, &[h, e, f, -h]);
    Ok((kc[0], Some(m2)))
}

impl RepRealization {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Fiber dimension of a single copy in a component.
    fn copy_dim(&self, comp: &LevelComponent) -> usize {
        comp.sym_power + 1
    }

    pub fn component_offset(&self, j: usize, comp: usize) -> usize {
        self.levels[j][..comp].iter().map(|c| c.multiplicity * self.copy_dim(c)).sum()
    }

    pub fn level_dim(&self, j: usize) -> usize {
        self.levels[j].iter().map(|c| c.multiplicity * self.copy_dim(c)).sum()
    }

    pub fn level_offset(&self, j: usize) -> usize {
        (0..j).map(|l| self.level_dim(l)).sum()
    }

    pub fn dim(&self) -> usize {
        (0..self.num_levels()).map(|l| self.level_dim(l)).sum()
    }

    /// k^C action on the full graded fiber space.
    pub fn rho0(&self, ctx: &StructureContext, z: &LieElement) -> Result<CMat> {
        let (zc, ss) = split_kc(ctx, z)?;
        let dim = self.dim();
        let mut out = CMat::zeros(dim, dim);
        for (j, comps) in self.levels.iter().enumerate() {
            let central = zc * im().scale(self.central_weights[j]);
            let base = self.level_offset(j);
            for (ci, comp) in comps.iter().enumerate() {
                let cd = self.copy_dim(comp);
                let off = base + self.component_offset(j, ci);
                let act = match &ss {
                    Some(m2) => sl2::sym_power_action(comp.sym_power, m2),
                    None => CMat::zeros(cd, cd),
                };
                for r_copy in 0..comp.multiplicity {
                    let o = off + r_copy * cd;
                    for r in 0..cd {
                        out[(o + r, o + r)] += central;
                        for c in 0..cd {
                            out[(o + r, o + c)] += act[(r, c)];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// p^- action of the basis element F_a on the full graded fiber space.
    pub fn rho_minus_basis(&self, a: usize) -> CMat {
        let mut f_coords = vec![re(0.0); self.n];
        f_coords[a] = re(1.0);
        self.rho_minus_coords(&f_coords)
    }

    /// p^- action of sum_a f_coords[a] F_a.
    pub fn rho_minus_coords(&self, f_coords: &[C]) -> CMat {
        let u = u_coords_of_pminus(self.n, f_coords);
        let dim = self.dim();
        let mut out = CMat::zeros(dim, dim);
        for (j, entries) in self.steps.iter().enumerate() {
            let src_base = self.level_offset(j);
            let tgt_base = self.level_offset(j + 1);
            for entry in entries {
                let s_src = self.levels[j][entry.src].sym_power;
                let s_tgt = self.levels[j + 1][entry.tgt].sym_power;
                let d_src = s_src + 1;
                let d_tgt = s_tgt + 1;
                // proj column blocks are indexed by the u-basis slot.
                let mut pu = CMat::zeros(d_tgt, d_src);
                for (b, ub) in u.iter().enumerate() {
                    for r in 0..d_tgt {
                        for c in 0..d_src {
                            pu[(r, c)] += entry.proj[(r, b * d_src + c)] * ub;
                        }
                    }
                }
                let block = entry.y.kronecker(&pu);
                let ro = tgt_base + self.component_offset(j + 1, entry.tgt);
                let co = src_base + self.component_offset(j, entry.src);
                for r in 0..block.nrows() {
                    for c in 0..block.ncols() {
                        out[(ro + r, co + c)] += block[(r, c)];
                    }
                }
            }
        }
        out
    }

    /// p^- action of an arbitrary p^- element.
    pub fn rho_minus(&self, ctx: &StructureContext, y: &LieElement) -> Result<CMat> {
        let comp = ctx.cartan_components(y)?;
        if linalg::fro(&comp.xplus.mat) + linalg::fro(&comp.xzero.mat) > 1e-11 * (1.0 + linalg::fro(&y.mat)) {
            return Err(Error::Precondition("element not in p^-".into()));
        }
        Ok(self.rho_minus_coords(&ctx.pminus_coords(y)))
    }

    /// Group-level k^C action: for k = diag(A, d) in K^C, computes
    /// exp(rho0(log k)) using principal logarithms, rejecting arguments whose
    /// principal branches do not multiply back to determinant one.
    pub fn rho0_group(&self, ctx: &StructureContext, a: &CMat, d: C) -> Result<CMat> {
        let la = linalg::principal_log_small(a)?;
        if d.re <= 0.0 && d.im.abs() < 1e-14 {
            return Err(Error::BranchCut);
        }
        let ld = d.ln();
        let tr: C = la.diagonal().iter().sum::<C>() + ld;
        if tr.norm() > 1e-8 {
            return Err(Error::BranchCut);
        }
        let size = self.n + 1;
        let mut k = CMat::zeros(size, size);
        for r in 0..self.n {
            for c in 0..self.n {
                k[(r, c)] = la[(r, c)];
            }
        }
        k[(self.n, self.n)] = ld;
        // Remove the tiny trace residual so the element is exactly in sl.
        let adj = tr / re(size as f64);
        for i in 0..size {
            k[(i, i)] -= adj;
        }
        let el = LieElement::new(k)?;
        Ok(linalg::expm(&self.rho0(ctx, &el)?))
    }
}

fn cg_or_identity(n: usize, s_src: usize, dir: Direction) -> Result<CMat> {
    if n == 1 {
        return Ok(CMat::identity(1, 1));
    }
    sl2::cg_projection(s_src, dir)
}

/// Builds a single chain with the given per-step directions (no
/// admissibility check beyond staying nonnegative).
fn chain_realize(
    n: usize,
    lambda0: f64,
    k0: usize,
    dirs: &[Direction],
    y: &[C],
    spec: RepSpec,
) -> Result<RepRealization> {
    let mut powers = vec![k0];
    for d in dirs {
        let prev = *powers.last().unwrap();
        // For n = 1 the isotropy has no semisimple part: every level is the
        // one-dimensional Sym^0 and the direction is immaterial.
        let next = if n == 1 {
            0
        } else {
            match d {
                Direction::Up => prev + 1,
                Direction::Down => {
                    if prev == 0 {
                        return Err(Error::InadmissibleChain("downward step from Sym^0".into()));
                    }
                    prev - 1
                }
            }
        };
        powers.push(next);
    }
    let levels: Vec<Vec<LevelComponent>> =
        powers.iter().map(|&s| vec![LevelComponent { sym_power: s, multiplicity: 1 }]).collect();
    let mut steps = Vec::new();
    for (j, d) in dirs.iter().enumerate() {
        let proj = cg_or_identity(n, powers[j], *d)?;
        steps.push(vec![RealizedEntry {
            src: 0,
            tgt: 0,
            y: CMat::from_element(1, 1, y[j]),
            proj,
        }]);
    }
    let central_weights = (0..powers.len()).map(|j| lambda0 - j as f64).collect();
    Ok(RepRealization { n, lambda0, levels, steps, central_weights, spec })
}

/// Normalized p^- commutativity residual of a realization (0 for n = 1).
pub fn commutativity_residual(r: &RepRealization) -> f64 {
    if r.n == 1 {
        return 0.0;
    }
    let f1 = r.rho_minus_basis(0);
    let f2 = r.rho_minus_basis(1);
    let comm = &f1 * &f2 - &f2 * &f1;
    let scale = linalg::fro(&f1) * linalg::fro(&f2);
    if scale == 0.0 {
        0.0
    } else {
        linalg::fro(&comm) / scale
    }
}

/// Realizes a spec without imposing the commutativity requirement (used by
/// the brute-force chain classifier and by negative-control tests).
pub fn realize_unchecked(spec: &RepSpec) -> Result<RepRealization> {
    match spec {
        RepSpec::Filiform(f) => {
            if f.n != 1 && f.n != 2 {
                return Err(Error::Precondition(format!("n must be 1 or 2, got {}", f.n)));
            }
            if f.n == 1 && f.k0 != 0 {
                return Err(Error::Precondition("n = 1 fibers are one-dimensional (k0 = 0)".into()));
            }
            if f.y.len() != f.m {
                return Err(Error::DimensionMismatch { expected: f.m, got: f.y.len() });
            }
            if f.y.iter().any(|v| v.norm() == 0.0) {
                return Err(Error::Precondition("transition scalars must be nonzero".into()));
            }
            if f.n == 2 && f.direction == Direction::Down && f.m > f.k0 {
                return Err(Error::InadmissibleChain(format!(
                    "downward chain of length {} exceeds top power {}",
                    f.m, f.k0
                )));
            }
            let dirs = vec![f.direction; f.m];
            chain_realize(f.n, f.lambda0, f.k0, &dirs, &f.y, spec.clone())
        }
        RepSpec::Block(b) => {
            if b.n != 2 {
                return Err(Error::Precondition("block specs are supported for n = 2 only".into()));
            }
            if b.steps.len() + 1 != b.levels.len() {
                return Err(Error::DimensionMismatch { expected: b.levels.len() - 1, got: b.steps.len() });
            }
            let mut steps = Vec::new();
            for (j, entries) in b.steps.iter().enumerate() {
                let mut realized = Vec::new();
                for e in entries {
                    let src_comp = b.levels[j].get(e.src).ok_or(Error::Precondition(
                        format!("step {j}: source component {} out of range", e.src),
                    ))?;
                    let tgt_comp = b.levels[j + 1].get(e.tgt).ok_or(Error::Precondition(
                        format!("step {j}: target component {} out of range", e.tgt),
                    ))?;
                    let (ss, st) = (src_comp.sym_power, tgt_comp.sym_power);
                    let dir = if st == ss + 1 {
                        Direction::Up
                    } else if ss >= 1 && st == ss - 1 {
                        Direction::Down
                    } else {
                        return Err(Error::InadmissibleChain(format!(
                            "step {j}: Sym^{st} does not occur in p^- (x) Sym^{ss}"
                        )));
                    };
                    if e.y.len() != tgt_comp.multiplicity
                        || e.y.iter().any(|row| row.len() != src_comp.multiplicity)
                    {
                        return Err(Error::DimensionMismatch {
                            expected: tgt_comp.multiplicity * src_comp.multiplicity,
                            got: e.y.len() * e.y.first().map_or(0, |r| r.len()),
                        });
                    }
                    let y = CMat::from_fn(tgt_comp.multiplicity, src_comp.multiplicity, |r, c| e.y[r][c]);
                    realized.push(RealizedEntry { src: e.src, tgt: e.tgt, y, proj: sl2::cg_projection(ss, dir)? });
                }
                steps.push(realized);
            }
            let central_weights = (0..b.levels.len()).map(|j| b.lambda0 - j as f64).collect();
            Ok(RepRealization {
                n: b.n,
                lambda0: b.lambda0,
                levels: b.levels.clone(),
                steps,
                central_weights,
                spec: spec.clone(),
            })
        }
    }
}

/// Realizes a spec and enforces that p^- acts by commuting operators.
pub fn realize(spec: &RepSpec) -> Result<RepRealization> {
    let r = realize_unchecked(spec)?;
    let resid = commutativity_residual(&r);
    if resid > 1e-11 {
        return Err(Error::InadmissibleChain(format!(
            "p^- actions do not commute (residual {resid:.3e}); chain mixes directions"
        )));
    }
    Ok(r)
}

/// Validation report for a realization.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// max residual of rho^-([Z,Y]) = [rho^0(Z), rho^-(Y)] over the k^C basis
    /// and Y in the F basis.
    pub equivariance_residual: f64,
    pub commutativity_residual: f64,
    pub grading_ok: bool,
    /// max anti-Hermitian defect of rho^0 over the compact real form of k.
    pub skew_residual: f64,
    pub pass: bool,
}

pub fn validate(r: &RepRealization, ctx: &StructureContext) -> Result<ValidationReport> {
    let mut kc_basis = vec![ctx.zhat.clone()];
    kc_basis.extend(ctx.kss.iter().cloned());
    let mut equi = 0.0f64;
    for z in &kc_basis {
        let rz = r.rho0(ctx, z)?;
        for a in 0..ctx.n {
            let y = &ctx.eminus[a];
            let ry = r.rho_minus(ctx, y)?;
            let zy = bracket(z, y)?;
            let lhs = r.rho_minus(ctx, &zy)?;
            let rhs = &rz * &ry - &ry * &rz;
            let scale = 1.0 + linalg::fro(&ry) * (1.0 + linalg::fro(&rz));
            equi = equi.max(linalg::fro(&(lhs - rhs)) / scale);
        }
    }
    let comm = commutativity_residual(r);
    // Grading: rho^-(F_a) may only populate (level j+1, level j) blocks.
    let mut grading_ok = true;
    for a in 0..ctx.n {
        let m = r.rho_minus_basis(a);
        for jr in 0..r.num_levels() {
            for jc in 0..r.num_levels() {
                if jr == jc + 1 {
                    continue;
                }
                let (ro, co) = (r.level_offset(jr), r.level_offset(jc));
                for rr in 0..r.level_dim(jr) {
                    for cc in 0..r.level_dim(jc) {
                        if m[(ro + rr, co + cc)].norm() > 1e-14 {
                            grading_ok = false;
                        }
                    }
                }
            }
        }
    }
    // Compact real form of k: z_hat together with the unitary span of kss.
    let mut compact = vec![ctx.zhat.clone()];
    if ctx.n == 2 {
        let h = &ctx.kss[0];
        let e = &ctx.kss[1];
        let f = &ctx.kss[2];
        compact.push(LieElement { mat: h.mat.scale_c(im()) });
        compact.push(LieElement { mat: &e.mat - &f.mat });
        compact.push(LieElement { mat: (&e.mat + &f.mat).scale_c(im()) });
    }
    let mut skew = 0.0f64;
    for x in &compact {
        let rx = r.rho0(ctx, x)?;
        skew = skew.max(linalg::fro(&(&rx + rx.adjoint())) / (1.0 + linalg::fro(&rx)));
    }
    let pass = equi < 1e-11 && comm < 1e-11 && grading_ok && skew < 1e-11;
    Ok(ValidationReport {
        equivariance_residual: equi,
        commutativity_residual: comm,
        grading_ok,
        skew_residual: skew,
        pass,
    })
}

/// Brute-force classification: all direction sequences of length m from
/// Sym^(k0) whose realized p^- actions commute.  Returns the surviving
/// chains and the residual of every candidate.
pub fn classify_chains(k0: usize, m: usize) -> (Vec<Vec<Direction>>, Vec<(Vec<Direction>, f64)>) {
    let mut valid = Vec::new();
    let mut all = Vec::new();
    for mask in 0..(1usize << m) {
        let dirs: Vec<Direction> = (0..m)
            .map(|j| if mask >> j & 1 == 0 { Direction::Up } else { Direction::Down })
            .collect();
        // Skip chains that would step below Sym^0.
        let mut p = k0 as i64;
        let mut defined = true;
        for d in &dirs {
            p += if *d == Direction::Up { 1 } else { -1 };
            if p < 0 {
                defined = false;
                break;
            }
        }
        if !defined {
            continue;
        }
        let y = vec![re(1.0); m];
        let spec = RepSpec::Filiform(FiliformSpec {
            n: 2,
            lambda0: 0.0,
            k0,
            m,
            direction: dirs[0],
            y: y.clone(),
        });
        let r = match chain_realize(2, 0.0, k0, &dirs, &y, spec) {
            Ok(r) => r,
            Err(_) => continue,
        };
        let resid = commutativity_residual(&r);
        all.push((dirs.clone(), resid));
        if resid < 1e-11 {
            valid.push(dirs);
        }
    }
    (valid, all)
}

/// Result of the step-constant extraction at one step.
#[derive(Debug, Clone, Serialize)]
pub struct CjFit {
    /// The lambda-independent structural constant c_j.
    pub c: C,
    /// The raw proportionality scalar (affine in lambda with slope -1/(2n)).
    pub s: C,
    /// Relative least-squares residual of the proportionality.
    pub residual: f64,
}

/// Extracts the step constant c_j (1-indexed step, V_{j-1} -> V_j) by fitting
/// the Killing-contracted curvature map against the canonical transition.
///
/// For Y in p^-, let M_Y v = P_j( iota( E_a -> rho0_{j-1}([Y, E_a]) v ) ) and
/// N_Y v = P_j(Y (x) v).  Multiplicity one forces M = s N; the central
/// character contributes exactly -(lambda - j + 1)/(2n) to s, so
/// c_j = s + (lambda - j + 1)/(2n) is lambda-independent.
pub fn extract_cj_detailed(r: &RepRealization, j: usize, ctx: &StructureContext) -> Result<CjFit> {
    if j == 0 || j >= r.num_levels() {
        return Err(Error::Precondition(format!("step {j} out of range")));
    }
    if r.levels[j - 1].len() != 1 || r.levels[j].len() != 1 || r.levels[j - 1][0].multiplicity != 1 {
        return Err(Error::Precondition("step constants are defined for single chains".into()));
    }
    let entry = r.steps[j - 1].iter().find(|e| e.src == 0 && e.tgt == 0).ok_or(
        Error::Precondition("missing transition entry".into()),
    )?;
    let s_src = r.levels[j - 1][0].sym_power;
    let d_src = s_src + 1;
    let d_tgt = r.levels[j][0].sym_power + 1;
    let proj = &entry.proj;
    // Column block of the projection for u-slot b.
    let proj_block = |b: usize| -> CMat {
        CMat::from_fn(d_tgt, d_src, |rr, cc| proj[(rr, b * d_src + cc)])
    };
    // P(Y (x) .) for a p^- element with given F-coordinates.
    let p_of = |f_coords: &[C]| -> CMat {
        let u = u_coords_of_pminus(r.n, f_coords);
        let mut acc = CMat::zeros(d_tgt, d_src);
        for (b, ub) in u.iter().enumerate() {
            acc += proj_block(b).scale_c(*ub);
        }
        acc
    };
    // rho0 on the source level only.
    let w_src = r.central_weights[j - 1];
    let rho0_src = |z: &LieElement| -> Result<CMat> {
        let (zc, ss) = split_kc(ctx, z)?;
        let central = zc * im().scale(w_src);
        let mut m = match ss {
            Some(m2) => sl2::sym_power_action(s_src, &m2),
            None => CMat::zeros(d_src, d_src),
        };
        for i in 0..d_src {
            m[(i, i)] += central;
        }
        Ok(m)
    };
    let mut num = C::new(0.0, 0.0);
    let mut den = 0.0f64;
    let mut pairs = Vec::new();
    for c_idx in 0..ctx.n {
        let y_el = &ctx.eminus[c_idx];
        // iota of L(E_a) = rho0([Y, E_a]) v: expand over F_a with the
        // Killing-pairing Gram (diagonal kappa).
        let gram = ctx.pairing_gram();
        let ginv = linalg::inv(&gram);
        let mut m_mat = CMat::zeros(d_tgt, d_src);
        for a in 0..ctx.n {
            let br = bracket(y_el, &ctx.eplus[a])?;
            let rz = rho0_src(&br)?;
            // iota coefficient: sum_b ginv[b][a] F_b; pairing is diagonal so
            // this is (1/kappa) F_a, but keep the general contraction.
            for b in 0..ctx.n {
                let coef = ginv[(b, a)];
                if coef.norm() == 0.0 {
                    continue;
                }
                let mut f_coords = vec![re(0.0); ctx.n];
                f_coords[b] = coef;
                m_mat += p_of(&f_coords) * &rz;
            }
        }
        let mut f_coords = vec![re(0.0); ctx.n];
        f_coords[c_idx] = re(1.0);
        let n_mat = p_of(&f_coords);
        num += (n_mat.adjoint() * &m_mat).diagonal().iter().sum::<C>();
        den += (n_mat.adjoint() * &n_mat).diagonal().iter().sum::<C>().re;
        pairs.push((m_mat, n_mat));
    }
    if den == 0.0 {
        return Err(Error::NumericBreakdown("vanishing transition map".into()));
    }
    let s = num / re(den);
    let mut resid2 = 0.0f64;
    let mut scale2 = 0.0f64;
    for (m_mat, n_mat) in &pairs {
        resid2 += linalg::fro(&(m_mat - n_mat.scale_c(s))).powi(2);
        scale2 += linalg::fro(n_mat).powi(2);
    }
    let residual = (resid2 / scale2).sqrt() / (1.0 + s.norm());
    if residual > 1e-10 {
        return Err(Error::NotProportional { residual });
    }
    let lambda = r.lambda0;
    let c = s + re((lambda - j as f64 + 1.0) / (2.0 * r.n as f64));
    Ok(CjFit { c, s, residual })
}

pub fn extract_cj(r: &RepRealization, j: usize, ctx: &StructureContext) -> Result<C> {
    Ok(extract_cj_detailed(r, j, ctx)?.c)
}

/// Affine fit c_j = u + (j-1) v; None when the residual exceeds 1e-9.
pub fn check_sharp(c: &[C]) -> Option<(C, C)> {
    if c.is_empty() {
        return None;
    }
    let u = c[0];
    let v = if c.len() >= 2 { c[1] - c[0] } else { C::new(0.0, 0.0) };
    for (idx, cj) in c.iter().enumerate() {
        let fit = u + v.scale(idx as f64);
        if (cj - fit).norm() > 1e-9 {
            return None;
        }
    }
    Some((u, v))
}

/// Table of the product constants and their regularity.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsTable {
    pub u: C,
    pub v: C,
    pub lambda: f64,
    pub n: usize,
    pub m: usize,
    /// Lower-triangular (m+1)x(m+1): cjk[j][k] for k <= j.
    pub cjk: Vec<Vec<C>>,
    pub regular: bool,
    /// Offending (j, k, i) factor triples when irregular.
    pub irregular_at: Vec<(usize, usize, usize)>,
}

/// One denominator factor of the product formula.
fn cjk_factor(u: C, v: C, lambda: f64, n: usize, k: usize, i: usize) -> C {
    let two_n = 2.0 * n as f64;
    u - re(lambda / two_n) + (v + re(1.0 / two_n)).scale((2 * k + i - 1) as f64 / 2.0)
}

/// Fills c_jk = 1/(j-k)! * prod_{i=1}^{j-k} factor(k,i)^{-1}; entries ride on
/// `regular` — an irregular table keeps NaN placeholders at the affected
/// entries.
pub fn cjk_table(u: C, v: C, lambda: f64, n: usize, m: usize) -> ConstantsTable {
    let mut cjk = vec![vec![C::new(0.0, 0.0); m + 1]; m + 1];
    let mut irregular_at = Vec::new();
    for k in 0..=m {
        cjk[k][k] = re(1.0);
        let mut acc = re(1.0);
        let mut bad = false;
        for i in 1..=(m - k) {
            let j = k + i;
            let f = cjk_factor(u, v, lambda, n, k, i);
            if f.norm() < 1e-12 {
                irregular_at.push((j, k, i));
                bad = true;
            }
            if bad {
                cjk[j][k] = C::new(f64::NAN, f64::NAN);
            } else {
                acc = acc / f / re(i as f64);
                cjk[j][k] = acc;
            }
        }
    }
    ConstantsTable { u, v, lambda, n, m, cjk, regular: irregular_at.is_empty(), irregular_at }
}

/// All-Up filiform spec (the Cartan-product chain).
pub fn cartan_chain(k0: usize, m: usize, lambda0: f64, y: Vec<C>) -> FiliformSpec {
    FiliformSpec { n: 2, lambda0, k0, m, direction: Direction::Up, y }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx2() -> StructureContext {
        StructureContext::new(2).unwrap()
    }

    fn up_spec(lambda0: f64, k0: usize, m: usize) -> RepSpec {
        RepSpec::Filiform(FiliformSpec {
            n: 2,
            lambda0,
            k0,
            m,
            direction: Direction::Up,
            y: vec![re(1.0); m],
        })
    }

    fn down_spec(lambda0: f64, k0: usize, m: usize) -> RepSpec {
        RepSpec::Filiform(FiliformSpec {
            n: 2,
            lambda0,
            k0,
            m,
            direction: Direction::Down,
            y: vec![re(1.0); m],
        })
    }

    #[test]
    fn up_chain_from_scalar_level_realizes_and_validates() {
        let ctx = ctx2();
        let r = realize(&up_spec(1.5, 0, 2)).unwrap();
        assert_eq!((0..3).map(|j| r.level_dim(j)).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(r.dim(), 6);
        let rep = validate(&r, &ctx).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.commutativity_residual < 1e-13);
        assert!(rep.equivariance_residual < 1e-12);
    }

    #[test]
    fn zero_step_realization_is_irreducible_level() {
        let ctx = ctx2();
        let r = realize(&up_spec(2.0, 3, 0)).unwrap();
        assert_eq!(r.dim(), 4);
        assert!(linalg::fro(&r.rho_minus_basis(0)) == 0.0);
        assert!(validate(&r, &ctx).unwrap().pass);
    }

    #[test]
    fn down_chain_needs_enough_room() {
        assert!(matches!(realize(&down_spec(0.0, 2, 3)), Err(Error::InadmissibleChain(_))));
        assert!(realize(&down_spec(0.0, 3, 3)).is_ok());
    }

    #[test]
    fn mixed_chain_fails_strict_realize_with_large_residual() {
        // Up then Down from Sym^1, as a block spec.
        let spec = RepSpec::Block(BlockSpec {
            n: 2,
            lambda0: 0.0,
            levels: vec![
                vec![LevelComponent { sym_power: 1, multiplicity: 1 }],
                vec![LevelComponent { sym_power: 2, multiplicity: 1 }],
                vec![LevelComponent { sym_power: 1, multiplicity: 1 }],
            ],
            steps: vec![
                vec![BlockEntry { src: 0, tgt: 0, y: vec![vec![re(1.0)]] }],
                vec![BlockEntry { src: 0, tgt: 0, y: vec![vec![re(1.0)]] }],
            ],
        });
        assert!(matches!(realize(&spec), Err(Error::InadmissibleChain(_))));
        let r = realize_unchecked(&spec).unwrap();
        assert!(commutativity_residual(&r) > 1e-3);
    }

    #[test]
    fn classifier_finds_exactly_the_monotone_chains() {
        for (k0, m) in [(2usize, 2usize), (2, 3), (3, 2), (3, 3), (4, 2), (4, 3)] {
            let (valid, all) = classify_chains(k0, m);
            let mut expected = vec![vec![Direction::Up; m]];
            if m <= k0 {
                expected.push(vec![Direction::Down; m]);
            }
            assert_eq!(valid.len(), expected.len(), "k0={k0} m={m}: {valid:?}");
            for e in &expected {
                assert!(valid.contains(e), "k0={k0} m={m} missing {e:?}");
            }
            for (dirs, resid) in &all {
                let monotone = dirs.iter().all(|d| *d == dirs[0]);
                if monotone {
                    assert!(*resid < 1e-13, "k0={k0} {dirs:?}: {resid}");
                } else {
                    assert!(*resid > 1e-3, "k0={k0} {dirs:?}: {resid}");
                }
            }
        }
        // Length-1 chains are all monotone.
        let (valid, _) = classify_chains(1, 1);
        assert_eq!(valid.len(), 2);
    }

    #[test]
    fn corrupted_central_weight_breaks_equivariance() {
        let ctx = ctx2();
        let mut r = realize(&up_spec(1.0, 1, 2)).unwrap();
        r.central_weights[1] += 0.5;
        let rep = validate(&r, &ctx).unwrap();
        assert!(!rep.pass);
        assert!(rep.equivariance_residual > 1e-3);
    }

    #[test]
    fn step_constants_match_closed_form_on_both_chain_types() {
        let ctx = ctx2();
        // Up chains: c_j = (k0 + j - 1) / 12.
        for k0 in [0usize, 1, 2] {
            let r = realize(&up_spec(0.7, k0, 3)).unwrap();
            for j in 1..=3 {
                let fit = extract_cj_detailed(&r, j, &ctx).unwrap();
                let expected = (k0 as f64 + j as f64 - 1.0) / 12.0;
                assert!(
                    (fit.c - re(expected)).norm() < 1e-10,
                    "Up k0={k0} j={j}: got {}, want {expected}",
                    fit.c
                );
                assert!(fit.residual < 1e-12);
            }
        }
        // Down chains: c_j = -(k0 - j + 3) / 12.
        for k0 in [3usize, 4] {
            let r = realize(&down_spec(-1.3, k0, 3)).unwrap();
            for j in 1..=3 {
                let fit = extract_cj_detailed(&r, j, &ctx).unwrap();
                let expected = -((k0 as f64) - j as f64 + 3.0) / 12.0;
                assert!(
                    (fit.c - re(expected)).norm() < 1e-10,
                    "Down k0={k0} j={j}: got {}, want {expected}",
                    fit.c
                );
            }
        }
    }

    #[test]
    fn disc_constants_vanish_identically() {
        let ctx1 = StructureContext::new(1).unwrap();
        for lambda in [-3.0, 0.0, 2.5] {
            let spec = RepSpec::Filiform(FiliformSpec {
                n: 1,
                lambda0: lambda,
                k0: 0,
                m: 3,
                direction: Direction::Up,
                y: vec![re(1.0); 3],
            });
            let r = realize(&spec).unwrap();
            for j in 1..=3 {
                let c = extract_cj(&r, j, &ctx1).unwrap();
                assert!(c.norm() < 1e-12, "lambda={lambda} j={j}: {c}");
            }
        }
    }

    #[test]
    fn raw_scalar_is_affine_in_lambda_with_slope_minus_half_over_n() {
        for n in [1usize, 2] {
            let ctx = StructureContext::new(n).unwrap();
            let lambdas = [-3.0, -1.0, 0.0, 2.0, 5.0];
            let mut s_vals = Vec::new();
            for &l in &lambdas {
                let spec = RepSpec::Filiform(FiliformSpec {
                    n,
                    lambda0: l,
                    k0: if n == 2 { 1 } else { 0 },
                    m: 2,
                    direction: Direction::Up,
                    y: vec![re(1.0); 2],
                });
                let r = realize(&spec).unwrap();
                s_vals.push(extract_cj_detailed(&r, 2, &ctx).unwrap().s);
            }
            let slope = -1.0 / (2.0 * n as f64);
            for w in 1..lambdas.len() {
                let ds = (s_vals[w] - s_vals[0]) / re(lambdas[w] - lambdas[0]);
                assert!((ds - re(slope)).norm() < 1e-9, "n={n}: slope {ds}");
            }
        }
    }

    #[test]
    fn constants_do_not_depend_on_transition_scalars() {
        let ctx = ctx2();
        let base = realize(&up_spec(0.3, 1, 3)).unwrap();
        let scaled = realize(&RepSpec::Filiform(FiliformSpec {
            n: 2,
            lambda0: 0.3,
            k0: 1,
            m: 3,
            direction: Direction::Up,
            y: vec![C::new(2.0, 1.0), C::new(-0.5, 0.25), C::new(0.0, 3.0)],
        }))
        .unwrap();
        for j in 1..=3 {
            let a = extract_cj(&base, j, &ctx).unwrap();
            let b = extract_cj(&scaled, j, &ctx).unwrap();
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn affine_fit_accepts_and_rejects_correctly() {
        assert_eq!(
            check_sharp(&[C::new(0.0, 0.0); 3]),
            Some((C::new(0.0, 0.0), C::new(0.0, 0.0)))
        );
        let c = [re(0.0), re(1.0), re(3.0)];
        assert_eq!(check_sharp(&c), None);
        let c = [re(0.5), re(0.75), re(1.0), re(1.25)];
        let (u, v) = check_sharp(&c).unwrap();
        assert!((u - re(0.5)).norm() < 1e-12 && (v - re(0.25)).norm() < 1e-12);
        // Single constants always fit.
        assert!(check_sharp(&[C::new(0.3, -0.2)]).is_some());
    }

    #[test]
    fn product_table_matches_term_by_term_oracle_and_recurrence() {
        let (u, v) = (C::new(0.1, 0.0), C::new(1.0 / 12.0, 0.0));
        let lambda = -2.3;
        let t = cjk_table(u, v, lambda, 2, 4);
        assert!(t.regular);
        for k in 0..=4 {
            assert!((t.cjk[k][k] - re(1.0)).norm() < 1e-15);
            for j in (k + 1)..=4 {
                // Independent evaluation: literal product loop.
                let mut prod = re(1.0);
                let mut fact = 1.0;
                for i in 1..=(j - k) {
                    prod *= cjk_factor(u, v, lambda, 2, k, i);
                    fact *= i as f64;
                }
                let expected = re(1.0) / prod / re(fact);
                assert!((t.cjk[j][k] - expected).norm() < 1e-13 * expected.norm().max(1.0));
                // Recurrence.
                if j > k + 1 {
                    let rec = t.cjk[j - 1][k] / re((j - k) as f64)
                        / cjk_factor(u, v, lambda, 2, k, j - k);
                    assert!((t.cjk[j][k] - rec).norm() < 1e-13 * rec.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn irregular_parameters_are_reported_with_offending_factor() {
        // n=1, u=v=0: factor = -lambda/2 + (2k+i-1)/4; lambda = 1/2 makes
        // (k,i) = (0,2) vanish: -1/4 + 1/4 = 0, reaching entries j >= 2.
        let t = cjk_table(re(0.0), re(0.0), 0.5, 1, 3);
        assert!(!t.regular);
        assert!(t.irregular_at.contains(&(2, 0, 2)), "{:?}", t.irregular_at);
        assert!(t.cjk[2][0].re.is_nan());
        // The unaffected column stays finite.
        assert!((t.cjk[1][0].norm()).is_finite());
    }

    #[test]
    fn grading_is_strictly_one_step_down() {
        let ctx = ctx2();
        let r = realize(&up_spec(0.0, 1, 3)).unwrap();
        let rep = validate(&r, &ctx).unwrap();
        assert!(rep.grading_ok);
        // Squared p^- action lands two levels down: cube vanishes on m=2.
        let r2 = realize(&up_spec(0.0, 0, 2)).unwrap();
        let f1 = r2.rho_minus_basis(0);
        assert!(linalg::fro(&(&f1 * &f1 * &f1)) < 1e-15);
    }

    #[test]
    fn group_level_action_matches_exponentiated_infinitesimal() {
        let ctx = ctx2();
        let r = realize(&up_spec(1.25, 1, 2)).unwrap();
        // k = exp(Z) for a small k^C element Z; rho0_group(exp Z) = exp(rho0 Z).
        let z_el = LieElement::new({
            let mut m = CMat::zeros(3, 3);
            m[(0, 0)] = C::new(0.05, 0.1);
            m[(0, 1)] = C::new(0.2, -0.05);
            m[(1, 0)] = C::new(-0.1, 0.15);
            m[(1, 1)] = C::new(-0.15, 0.2);
            m[(2, 2)] = C::new(0.1, -0.3);
            m
        })
        .unwrap();
        let g = linalg::expm(&z_el.mat);
        let a = CMat::from_fn(2, 2, |i, j| g[(i, j)]);
        let d = g[(2, 2)];
        let lhs = r.rho0_group(&ctx, &a, d).unwrap();
        let rhs = linalg::expm(&r.rho0(&ctx, &z_el).unwrap());
        assert!(linalg::fro(&(lhs - rhs)) < 1e-10);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = up_spec(0.25, 1, 2);
        let s = serde_json::to_string(&spec).unwrap();
        let back: RepSpec = serde_json::from_str(&s).unwrap();
        let r1 = realize(&spec).unwrap();
        let r2 = realize(&back).unwrap();
        assert_eq!(r1.dim(), r2.dim());
        assert!((r1.lambda0 - r2.lambda0).abs() == 0.0);
    }
}
