//! Graded structure of sl(n+1, C) for the rank-one Hermitian symmetric pairs
//! su(n,1) / u(n), n = 1, 2.
//!
//! Matrices are written in (n+1)-square block form with an n-square upper-left
//! block.  The abelian subalgebras p+ (last column) and p- (last row) are the
//! +i / -i eigenspaces of ad(z_hat), where z_hat is the central element of the
//! complexified isotropy algebra k^C (block-diagonal, trace zero).  The Killing
//! form is always *computed* as trace(ad X ad Y); its constant ratio to the
//! trace form is derived at context-construction time and re-verified, never
//! assumed.

use crate::linalg::{self, ScaleC};
use crate::{im, re, C, CMat, CVec, Error, Result};

/// Element of sl(n+1, C), stored as a dense (n+1)x(n+1) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LieElement {
    pub mat: CMat,
}

impl LieElement {
    /// Wraps a matrix, checking squareness and tracelessness.
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch { expected: mat.nrows(), got: mat.ncols() });
        }
        let tr: C = mat.diagonal().iter().sum();
        if tr.norm() > 1e-12 * (1.0 + linalg::max_abs(&mat)) {
            return Err(Error::Precondition(format!("matrix has trace {tr}, expected 0")));
        }
        Ok(Self { mat })
    }

    pub fn zeros(size: usize) -> Self {
        Self { mat: CMat::zeros(size, size) }
    }

    pub fn size(&self) -> usize {
        self.mat.nrows()
    }
}

/// Commutator [X, Y] = XY - YX.
pub fn bracket(x: &LieElement, y: &LieElement) -> Result<LieElement> {
    if x.size() != y.size() {
        return Err(Error::DimensionMismatch { expected: x.size(), got: y.size() });
    }
    Ok(LieElement { mat: &x.mat * &y.mat - &y.mat * &x.mat })
}

/// The three graded components of an sl(n+1, C) element.
#[derive(Debug, Clone)]
pub struct CartanComponents {
    /// p+ part: last column above the diagonal corner.
    pub xplus: LieElement,
    /// k^C part: block-diagonal (n-square block plus corner scalar).
    pub xzero: LieElement,
    /// p- part: last row left of the diagonal corner.
    pub xminus: LieElement,
}

/// Structure data for one choice of n.
#[derive(Debug, Clone)]
pub struct StructureContext {
    /// Complex dimension of the ball (1 or 2).
    pub n: usize,
    /// p+ basis E_i = e_{i, n}: `eplus[i]`.
    pub eplus: Vec<LieElement>,
    /// p- basis F_i = e_{n, i}: `eminus[i]`.
    pub eminus: Vec<LieElement>,
    /// Central element of k^C with ad(z_hat) = +i on p+, -i on p-.
    pub zhat: LieElement,
    /// Basis of the semisimple part of k^C (empty for n = 1): [H, E_ss, F_ss].
    pub kss: Vec<LieElement>,
    /// Full ambient basis of sl(n+1, C), in the order
    /// [E_1..E_n, F_1..F_n, z_hat, kss...].
    pub basis: Vec<LieElement>,
    /// Ratio killing(X, Y) / tr(XY), derived from trace(ad ad).
    pub killing_scale: f64,
    /// Pseudo-inverse used to expand elements over `basis`.
    coord_solver: CMat,
}

impl StructureContext {
    /// Builds the structure for n in {1, 2}.
    pub fn new(n: usize) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(Error::Precondition(format!("n must be 1 or 2, got {n}")));
        }
        let size = n + 1;
        let unit = |r: usize, c: usize| {
            let mut m = CMat::zeros(size, size);
            m[(r, c)] = re(1.0);
            LieElement { mat: m }
        };
        let eplus: Vec<_> = (0..n).map(|i| unit(i, n)).collect();
        let eminus: Vec<_> = (0..n).map(|i| unit(n, i)).collect();
        // z_hat = i * diag(1/(n+1), ..., 1/(n+1), -n/(n+1)).
        let mut zmat = CMat::zeros(size, size);
        for i in 0..n {
            zmat[(i, i)] = im().scale(1.0 / (n as f64 + 1.0));
        }
        zmat[(n, n)] = im().scale(-(n as f64) / (n as f64 + 1.0));
        let zhat = LieElement::new(zmat)?;
        let kss = if n == 2 {
            let mut h = CMat::zeros(3, 3);
            h[(0, 0)] = re(1.0);
            h[(1, 1)] = re(-1.0);
            vec![LieElement { mat: h }, unit(0, 1), unit(1, 0)]
        } else {
            Vec::new()
        };
        let mut basis = Vec::new();
        basis.extend(eplus.iter().cloned());
        basis.extend(eminus.iter().cloned());
        basis.push(zhat.clone());
        basis.extend(kss.iter().cloned());
        debug_assert_eq!(basis.len(), size * size - 1);

        // Coordinate solver: pseudo-inverse of the vectorized basis matrix.
        let dim = basis.len();
        let rows = size * size;
        let mut bm = CMat::zeros(rows, dim);
        for (j, b) in basis.iter().enumerate() {
            for (k, v) in b.mat.iter().enumerate() {
                bm[(k, j)] = *v;
            }
        }
        let svd = bm.clone().svd(true, true);
        let coord_solver = svd.pseudo_inverse(1e-12).map_err(|e| Error::NumericBreakdown(e.to_string()))?;

        let mut ctx = Self { n, eplus, eminus, zhat, kss, basis, killing_scale: 0.0, coord_solver };

        // Derive the Killing/trace ratio and verify it is constant.
        let mut scale: Option<f64> = None;
        for a in 0..dim {
            for b in 0..dim {
                let k = ctx.killing(&ctx.basis[a], &ctx.basis[b])?;
                let t = (&ctx.basis[a].mat * &ctx.basis[b].mat).diagonal().iter().sum::<C>();
                if t.norm() > 1e-9 {
                    let ratio = k / t;
                    if ratio.im.abs() > 1e-9 {
                        return Err(Error::NumericBreakdown("complex Killing/trace ratio".into()));
                    }
                    match scale {
                        None => scale = Some(ratio.re),
                        Some(s) => {
                            if (s - ratio.re).abs() > 1e-9 * s.abs() {
                                return Err(Error::NumericBreakdown("Killing/trace ratio not constant".into()));
                            }
                        }
                    }
                } else if k.norm() > 1e-9 {
                    return Err(Error::NumericBreakdown("Killing form does not vanish with trace form".into()));
                }
            }
        }
        ctx.killing_scale = scale.ok_or_else(|| Error::NumericBreakdown("degenerate trace form".into()))?;
        Ok(ctx)
    }

    /// Coordinates of `x` over `self.basis`.
    pub fn coords(&self, x: &LieElement) -> Result<CVec> {
        let size = self.n + 1;
        if x.size() != size {
            return Err(Error::DimensionMismatch { expected: size, got: x.size() });
        }
        let v = CVec::from_iterator(size * size, x.mat.iter().cloned());
        let c = &self.coord_solver * v;
        // Confirm x is in the span (always true for traceless input).
        let mut rec = CMat::zeros(size, size);
        for (j, b) in self.basis.iter().enumerate() {
            rec += b.mat.scale_c(c[j]);
        }
        if linalg::fro(&(rec - &x.mat)) > 1e-10 * (1.0 + linalg::fro(&x.mat)) {
            return Err(Error::Precondition("element outside sl(n+1)".into()));
        }
        Ok(c)
    }

    /// Matrix of ad(x) on `self.basis` coordinates.
    pub fn ad_matrix(&self, x: &LieElement) -> Result<CMat> {
        let dim = self.basis.len();
        let mut m = CMat::zeros(dim, dim);
        for (j, b) in self.basis.iter().enumerate() {
            let col = self.coords(&bracket(x, b)?)?;
            m.set_column(j, &col);
        }
        Ok(m)
    }

    /// Killing form B(x, y) = trace(ad x ad y), computed from ad matrices.
    pub fn killing(&self, x: &LieElement, y: &LieElement) -> Result<C> {
        let ax = self.ad_matrix(x)?;
        let ay = self.ad_matrix(y)?;
        Ok((ax * ay).diagonal().iter().sum())
    }

    /// Killing form via the derived trace-form ratio (fast path).
    pub fn killing_fast(&self, x: &LieElement, y: &LieElement) -> C {
        (&x.mat * &y.mat).diagonal().iter().sum::<C>().scale(self.killing_scale)
    }

    /// Splits an element into its p+, k^C, p- parts.
    pub fn cartan_components(&self, x: &LieElement) -> Result<CartanComponents> {
        let size = self.n + 1;
        if x.size() != size {
            return Err(Error::DimensionMismatch { expected: size, got: x.size() });
        }
        let mut plus = CMat::zeros(size, size);
        let mut zero = CMat::zeros(size, size);
        let mut minus = CMat::zeros(size, size);
        for r in 0..size {
            for c in 0..size {
                let v = x.mat[(r, c)];
                if c == self.n && r < self.n {
                    plus[(r, c)] = v;
                } else if r == self.n && c < self.n {
                    minus[(r, c)] = v;
                } else {
                    zero[(r, c)] = v;
                }
            }
        }
        Ok(CartanComponents {
            xplus: LieElement { mat: plus },
            xzero: LieElement { mat: zero },
            xminus: LieElement { mat: minus },
        })
    }

    /// Conjugation with respect to the real form su(n,1): X -> -J X* J,
    /// J = diag(1,..,1,-1).  Antilinear; swaps p+ and p-.
    pub fn conj(&self, x: &LieElement) -> LieElement {
        let size = self.n + 1;
        let mut j = CMat::identity(size, size);
        j[(self.n, self.n)] = re(-1.0);
        LieElement { mat: -(&j * x.mat.adjoint() * &j) }
    }

    /// p+ element with coordinate vector `z` over the E_i basis.
    pub fn pplus_from_coords(&self, z: &[C]) -> LieElement {
        let size = self.n + 1;
        let mut m = CMat::zeros(size, size);
        for (i, v) in z.iter().enumerate() {
            m[(i, self.n)] = *v;
        }
        LieElement { mat: m }
    }

    /// p- element with coordinate vector `y` over the F_i basis.
    pub fn pminus_from_coords(&self, y: &[C]) -> LieElement {
        let size = self.n + 1;
        let mut m = CMat::zeros(size, size);
        for (i, v) in y.iter().enumerate() {
            m[(self.n, i)] = *v;
        }
        LieElement { mat: m }
    }

    /// p+ coordinates of a p+ element.
    pub fn pplus_coords(&self, x: &LieElement) -> Vec<C> {
        (0..self.n).map(|i| x.mat[(i, self.n)]).collect()
    }

    /// p- coordinates of a p- element.
    pub fn pminus_coords(&self, x: &LieElement) -> Vec<C> {
        (0..self.n).map(|i| x.mat[(self.n, i)]).collect()
    }

    /// Coordinates of a k^C element over [z_hat, kss...].
    ///
    /// The z_hat coefficient is read off the corner entry; the semisimple
    /// remainder is expanded over the 2x2 block basis.
    pub fn kc_coords(&self, x: &LieElement) -> Result<Vec<C>> {
        let comp = self.cartan_components(x)?;
        if linalg::fro(&comp.xplus.mat) + linalg::fro(&comp.xminus.mat)
            > 1e-11 * (1.0 + linalg::fro(&x.mat))
        {
            return Err(Error::Precondition("element not in k^C".into()));
        }
        let corner = x.mat[(self.n, self.n)];
        let zc = corner / self.zhat.mat[(self.n, self.n)];
        let rest = &x.mat - self.zhat.mat.scale_c(zc);
        let mut out = vec![zc];
        if self.n == 2 {
            out.push(rest[(0, 0)]); // H coefficient
            out.push(rest[(0, 1)]); // E_ss
            out.push(rest[(1, 0)]); // F_ss
        } else if linalg::fro(&rest) > 1e-11 * (1.0 + linalg::fro(&x.mat)) {
            return Err(Error::Precondition("k^C remainder for n = 1".into()));
        }
        Ok(out)
    }

    /// Gram matrix B(E_i, F_j) of the Killing pairing between p+ and p-.
    pub fn pairing_gram(&self) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.killing_fast(&self.eplus[i], &self.eminus[j]))
    }

    /// Killing-duality identification of Hom(p+, W) with p- tensor W.
    ///
    /// Given the values `l[i] = L(E_i)` (each a W-vector) of a linear map
    /// L: p+ -> W, returns coefficients `w[a]` such that
    /// L = sum_a B(. , F_a) w_a, i.e. iota(L) = sum_a F_a (x) w_a.
    pub fn iota(&self, l: &[CVec]) -> Result<Vec<CVec>> {
        if l.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: l.len() });
        }
        let g = self.pairing_gram();
        let ginv = linalg::inv(&g);
        let dim_w = l[0].len();
        let mut out = vec![CVec::zeros(dim_w); self.n];
        for a in 0..self.n {
            for i in 0..self.n {
                out[a] += l[i].scale_c(ginv[(a, i)]);
            }
        }
        Ok(out)
    }

    /// Basis of the real form su(n,1), real-span.
    pub fn real_form_basis(&self) -> Vec<LieElement> {
        let mut out = vec![self.zhat.clone()];
        if self.n == 2 {
            let h = &self.kss[0];
            let e = &self.kss[1];
            let f = &self.kss[2];
            out.push(LieElement { mat: h.mat.scale_c(im()) });
            out.push(LieElement { mat: &e.mat - &f.mat });
            out.push(LieElement { mat: (&e.mat + &f.mat).scale_c(im()) });
        }
        for i in 0..self.n {
            let ep = &self.eplus[i];
            let fm = &self.eminus[i];
            out.push(LieElement { mat: &ep.mat + &fm.mat });
            out.push(LieElement { mat: (&ep.mat - &fm.mat).scale_c(im()) });
        }
        out
    }
}
