//! Local rigidity subspaces on a range `R` and the seminorms built from the
//! distance of local patches to them.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euclid::{skew_basis, SkewBlockPattern};
use crate::fields::{PeriodicDisplacement, PeriodicField};
use crate::group::{box_points, CanonicalElement, GroupSpec, RangeSet};

/// Largest `d·|C_N|` for which dense quadratic forms are assembled.
pub const DENSE_GUARD: usize = 20_000;
/// Relative singular-value cutoff for subspace bases.
pub const BASIS_CUTOFF: f64 = 1e-10;
/// Relative eigenvalue cutoff for kernels.
pub const KERNEL_CUTOFF: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubspaceKind {
    Trans,
    Rot,
    Rot0,
    Rot00,
    Iso,
    Iso0,
    Iso00,
}

impl SubspaceKind {
    fn parts(self) -> (bool, Option<SkewBlockPattern>) {
        use SkewBlockPattern::*;
        match self {
            SubspaceKind::Trans => (true, None),
            SubspaceKind::Rot => (false, Some(Full)),
            SubspaceKind::Rot0 => (false, Some(ZeroS3)),
            SubspaceKind::Rot00 => (false, Some(S1Only)),
            SubspaceKind::Iso => (true, Some(Full)),
            SubspaceKind::Iso0 => (true, Some(ZeroS3)),
            SubspaceKind::Iso00 => (true, Some(S1Only)),
        }
    }

    /// Closed-form dimension on a range with Property 1.
    pub fn formula_dim(self, d: usize, d1: usize, d2: usize, daff: usize) -> usize {
        let d3 = d - daff;
        let d4 = daff - d2;
        let rot = match self.parts().1 {
            None => 0,
            Some(SkewBlockPattern::Full) => daff * (2 * d - daff - 1) / 2,
            Some(SkewBlockPattern::ZeroS3) => d3 * daff + d4 * (daff + d2).saturating_sub(1) / 2,
            Some(SkewBlockPattern::S1Only) => d4 * (d3 + d1).saturating_sub(1) / 2,
        };
        if self.parts().0 { d + rot } else { rot }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeminormKind {
    PatchIso,
    PatchIso0,
    PatchIso00,
    GradRot,
    GradRot0,
    GradRot00,
    GradPlain,
}

impl SeminormKind {
    pub const ALL: [SeminormKind; 7] = [
        SeminormKind::PatchIso,
        SeminormKind::PatchIso0,
        SeminormKind::PatchIso00,
        SeminormKind::GradRot,
        SeminormKind::GradRot0,
        SeminormKind::GradRot00,
        SeminormKind::GradPlain,
    ];

    pub fn is_gradient(self) -> bool {
        matches!(
            self,
            SeminormKind::GradRot | SeminormKind::GradRot0 | SeminormKind::GradRot00 | SeminormKind::GradPlain
        )
    }

    /// Subspace projected out of each patch; `None` for the plain gradient.
    pub fn subspace(self) -> Option<SubspaceKind> {
        match self {
            SeminormKind::PatchIso => Some(SubspaceKind::Iso),
            SeminormKind::PatchIso0 => Some(SubspaceKind::Iso0),
            SeminormKind::PatchIso00 => Some(SubspaceKind::Iso00),
            SeminormKind::GradRot => Some(SubspaceKind::Rot),
            SeminormKind::GradRot0 => Some(SubspaceKind::Rot0),
            SeminormKind::GradRot00 => Some(SubspaceKind::Rot00),
            SeminormKind::GradPlain => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SeminormKind::PatchIso => "PatchIso",
            SeminormKind::PatchIso0 => "PatchIso0",
            SeminormKind::PatchIso00 => "PatchIso00",
            SeminormKind::GradRot => "GradRot",
            SeminormKind::GradRot0 => "GradRot0",
            SeminormKind::GradRot00 => "GradRot00",
            SeminormKind::GradPlain => "GradPlain",
        }
    }
}

impl std::str::FromStr for SeminormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SeminormKind::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown seminorm kind `{s}`")))
    }
}

impl std::fmt::Display for SeminormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Orthonormal basis of a subspace of `R^{d|R|}`; block `j` of a column is
/// the value at `R[j]`.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    pub range: RangeSet,
    pub kind: SubspaceKind,
    pub columns: DMatrix<f64>,
}

impl SubspaceBasis {
    pub fn rank(&self) -> usize {
        self.columns.ncols()
    }
}

/// Orthonormal basis of the column span, singular values below
/// `cutoff · σ_max` discarded.
pub(crate) fn orthonormal_span(m: &DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DMatrix::zeros(rows, 0);
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cutoff * smax)
        .collect();
    let cols: Vec<DVector<f64>> = keep.iter().map(|&i| u.column(i).into_owned()).collect();
    if cols.is_empty() {
        DMatrix::zeros(rows, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Spanning vectors (not orthonormalized) of the subspace on `R`.
pub fn subspace_generators(spec: &GroupSpec, r: &RangeSet, kind: SubspaceKind) -> Result<DMatrix<f64>> {
    let d = spec.d;
    let (trans, pattern) = kind.parts();
    let rots: Vec<DMatrix<f64>> = r.elements.iter().map(|h| spec.rot(h).transpose()).collect();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    if trans {
        for j in 0..d {
            let mut c = DVector::zeros(d * r.len());
            for (i, rt) in rots.iter().enumerate() {
                c.rows_mut(i * d, d).copy_from(&rt.column(j));
            }
            cols.push(c);
        }
    }
    if let Some(p) = pattern {
        let diffs: Vec<DVector<f64>> = r.elements.iter().map(|h| spec.point(h) - &spec.base_point).collect();
        for s in skew_basis(d, spec.d1, spec.d2, p)? {
            let mut c = DVector::zeros(d * r.len());
            for (i, rt) in rots.iter().enumerate() {
                c.rows_mut(i * d, d).copy_from(&(rt * (&s * &diffs[i])));
            }
            cols.push(c);
        }
    }
    Ok(if cols.is_empty() { DMatrix::zeros(d * r.len(), 0) } else { DMatrix::from_columns(&cols) })
}

pub fn build_subspace(spec: &GroupSpec, r: &RangeSet, kind: SubspaceKind) -> Result<SubspaceBasis> {
    if r.is_empty() {
        return Err(Error::InvalidRange("empty range".into()));
    }
    let gens = subspace_generators(spec, r, kind)?;
    Ok(SubspaceBasis { range: r.clone(), kind, columns: orthonormal_span(&gens, BASIS_CUTOFF) })
}

/// Per-patch linear map and projector of one seminorm on a fixed range.
#[derive(Debug, Clone)]
pub struct SeminormOperator {
    pub kind: SeminormKind,
    pub range: RangeSet,
    d: usize,
    rot_t: Vec<DMatrix<f64>>,
    projector: DMatrix<f64>,
}

impl SeminormOperator {
    pub fn new(spec: &GroupSpec, r: &RangeSet, kind: SeminormKind) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::InvalidRange("empty range".into()));
        }
        let n = spec.d * r.len();
        let projector = match kind.subspace() {
            Some(sk) => {
                let b = build_subspace(spec, r, sk)?.columns;
                DMatrix::identity(n, n) - &b * b.transpose()
            }
            None => DMatrix::identity(n, n),
        };
        let rot_t = r.elements.iter().map(|h| spec.rot(h).transpose()).collect();
        Ok(SeminormOperator { kind, range: r.clone(), d: spec.d, rot_t, projector })
    }

    /// Patch `(u(gh))_h` or derivative `(u(gh) − rot(h)ᵀ u(g))_h`.
    pub fn patch(&self, u: &PeriodicDisplacement, g: &CanonicalElement) -> DVector<f64> {
        let d = self.d;
        let spec = u.spec();
        let mut p = DVector::zeros(d * self.range.len());
        let ug = u.at(g);
        for (i, h) in self.range.elements.iter().enumerate() {
            let mut x = u.at(&spec.multiply(g, h));
            if self.kind.is_gradient() {
                x -= &self.rot_t[i] * &ug;
            }
            p.rows_mut(i * d, d).copy_from(&x);
        }
        p
    }

    pub fn patch_distance_squared(&self, u: &PeriodicDisplacement, g: &CanonicalElement) -> f64 {
        (&self.projector * self.patch(u, g)).norm_squared()
    }

    /// Squared seminorm, averaged over `C_N`.
    pub fn value_squared(&self, u: &PeriodicDisplacement) -> f64 {
        let spec = u.spec();
        let k = u.k();
        let parts: Vec<f64> = (0..u.sites())
            .into_par_iter()
            .map(|i| self.patch_distance_squared(u, &spec.cn_element(i, k)))
            .collect();
        parts.iter().sum::<f64>() / u.sites() as f64
    }

    pub fn value(&self, u: &PeriodicDisplacement) -> f64 {
        self.value_squared(u).sqrt()
    }

    /// `Q` with `uᵀ Q u = value_squared(u)` on fields of period `n`.
    pub fn quadratic_form(&self, spec: &GroupSpec, n: usize) -> Result<DMatrix<f64>> {
        let k = spec.period_factor(n)?;
        let sites = spec.cn_size(k);
        let d = self.d;
        let size = d * sites;
        if size > DENSE_GUARD {
            return Err(Error::SizeOverflow(size));
        }
        let m = self.range.len();
        let mut q = DMatrix::zeros(size, size);
        let w = 1.0 / sites as f64;
        for i in 0..sites {
            let g = spec.cn_element(i, k);
            // E maps the local stack of sites [g, g h_1, ..., g h_m] to the patch
            let mut idx = vec![i];
            idx.extend(self.range.elements.iter().map(|h| spec.cn_index(&spec.multiply(&g, h), k)));
            let mut e = DMatrix::zeros(d * m, d * (m + 1));
            for j in 0..m {
                for a in 0..d {
                    e[(j * d + a, (j + 1) * d + a)] = 1.0;
                }
                if self.kind.is_gradient() {
                    e.view_mut((j * d, 0), (d, d)).sub_assign(&self.rot_t[j]);
                }
            }
            let local = e.transpose() * &self.projector * &e * w;
            for (bi, &si) in idx.iter().enumerate() {
                for (bj, &sj) in idx.iter().enumerate() {
                    let blk = local.view((bi * d, bj * d), (d, d));
                    let mut tgt = q.view_mut((si * d, sj * d), (d, d));
                    tgt += blk;
                }
            }
        }
        // symmetrize round-off
        let qt = q.transpose();
        Ok((q + qt) * 0.5)
    }
}

trait SubAssign {
    fn sub_assign(&mut self, m: &DMatrix<f64>);
}

impl SubAssign for nalgebra::DMatrixViewMut<'_, f64> {
    fn sub_assign(&mut self, m: &DMatrix<f64>) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                self[(i, j)] -= m[(i, j)];
            }
        }
    }
}

pub fn seminorm(u: &PeriodicDisplacement, r: &RangeSet, kind: SeminormKind) -> Result<f64> {
    Ok(SeminormOperator::new(u.spec(), r, kind)?.value(u))
}

pub fn quadratic_form(spec: &GroupSpec, r: &RangeSet, kind: SeminormKind, n: usize) -> Result<DMatrix<f64>> {
    SeminormOperator::new(spec, r, kind)?.quadratic_form(spec, n)
}

/// Eigenvectors of a PSD matrix below `KERNEL_CUTOFF · λ_max`.
pub fn null_space(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(q.clone());
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| eig.eigenvalues[i] <= KERNEL_CUTOFF * lmax || lmax == 0.0)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() { DMatrix::zeros(n, 0) } else { DMatrix::from_columns(&cols) }
}

#[derive(Debug, Clone)]
pub struct Kernel {
    pub dim: usize,
    pub basis: Vec<PeriodicDisplacement>,
}

pub fn kernel(spec: &Arc<GroupSpec>, r: &RangeSet, kind: SeminormKind, n: usize) -> Result<Kernel> {
    let q = quadratic_form(spec, r, kind, n)?;
    let ns = null_space(&q);
    let basis = ns
        .column_iter()
        .map(|c| PeriodicField::from_values(spec.clone(), n, c.iter().copied().collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Kernel { dim: ns.ncols(), basis })
}

/// Parameters `(b, S)` of the global fields `u(g) = rot(g)ᵀ(b + S(g·x0 − x0))`.
fn global_field_values(
    spec: &GroupSpec,
    kind: SubspaceKind,
    g: &CanonicalElement,
    skews: &[DMatrix<f64>],
) -> DMatrix<f64> {
    let d = spec.d;
    let (trans, _) = kind.parts();
    let rt = spec.rot(g).transpose();
    let diff = spec.point(g) - &spec.base_point;
    let mut cols: Vec<DVector<f64>> = Vec::new();
    if trans {
        for j in 0..d {
            cols.push(rt.column(j).into_owned());
        }
    }
    for s in skews {
        cols.push(&rt * (s * &diff));
    }
    if cols.is_empty() { DMatrix::zeros(d, 0) } else { DMatrix::from_columns(&cols) }
}

/// `dim(U(G) ∩ U_per)` for `U` one of the global subspaces, period `n`.
pub fn periodic_subspace_dim(spec: &GroupSpec, kind: SubspaceKind, n: usize) -> Result<usize> {
    let k = spec.period_factor(n)? as i64;
    let skews = match kind.parts().1 {
        Some(p) => skew_basis(spec.d, spec.d1, spec.d2, p)?,
        None => Vec::new(),
    };
    let mut sample: Vec<CanonicalElement> = spec.ball(spec.default_sample_radius());
    for c in 0..spec.coset_count() {
        for a in box_points(spec.d2, 2) {
            sample.push(CanonicalElement { coset: c, exponents: a });
        }
    }
    sample.sort();
    sample.dedup();
    let values: Vec<DMatrix<f64>> = sample.iter().map(|g| global_field_values(spec, kind, g, &skews)).collect();
    let p = values.first().map_or(0, |v| v.ncols());
    if p == 0 {
        return Ok(0);
    }
    let a = DMatrix::from_fn(values.len() * spec.d, p, |i, j| values[i / spec.d][(i % spec.d, j)]);
    let mut rows: Vec<DMatrix<f64>> = Vec::new();
    for (g, vg) in sample.iter().zip(&values) {
        for i in 0..spec.d2 {
            let mut shift = vec![0i64; spec.d2];
            shift[i] = k;
            let t = CanonicalElement { coset: 0, exponents: shift };
            let gt = spec.multiply(g, &t);
            rows.push(global_field_values(spec, kind, &gt, &skews) - vg);
        }
    }
    let nullc = if rows.is_empty() {
        DMatrix::identity(p, p)
    } else {
        let c = DMatrix::from_fn(rows.len() * spec.d, p, |i, j| rows[i / spec.d][(i % spec.d, j)]);
        let scale = a.norm().max(1.0);
        let svd = c.svd(false, true);
        let vt = svd.v_t.expect("requested V");
        let sv = &svd.singular_values;
        let mut cols: Vec<DVector<f64>> = Vec::new();
        for i in 0..p {
            let s = if i < sv.len() { sv[i] } else { 0.0 };
            if s <= 1e-9 * scale {
                cols.push(vt.row(i).transpose());
            }
        }
        if vt.nrows() < p {
            // fewer constraint rows than parameters: complete with the orthogonal complement
            let span = DMatrix::from_rows(&(0..vt.nrows()).map(|i| vt.row(i).into_owned()).collect::<Vec<_>>());
            let proj = DMatrix::<f64>::identity(p, p) - span.transpose() * span;
            let extra = orthonormal_span(&proj, 1e-8);
            for c in extra.column_iter() {
                cols.push(c.into_owned());
            }
        }
        if cols.is_empty() {
            return Ok(0);
        }
        DMatrix::from_columns(&cols)
    };
    Ok(orthonormal_span(&(a * nullc), 1e-9).ncols())
}

/// Closed-form kernel dimension `d + d4(d3 + d1 − 1)/2`.
pub fn kernel_formula_dim(spec: &GroupSpec, daff: usize) -> usize {
    SubspaceKind::Iso00.formula_dim(spec.d, spec.d1, spec.d2, daff)
}
