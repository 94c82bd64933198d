//! Euclidean isometries `(A|b)`, skew-matrix bases and a few small
//! linear-algebra utilities (simultaneous quasidiagonalization, a Turán-type
//! power-sum bound, the rank-one-plus-skew constant).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Frobenius tolerance for identifying group elements.
pub const MATRIX_TOL: f64 = 1e-10;

/// Constant of the rank-one-plus-skew norm inequality.
pub const RANK_ONE_SKEW_CONSTANT: f64 = 0.235_702_260_395_515_8; // 1/(3*sqrt(2))

/// A Euclidean isometry `x -> Ax + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Isometry {
    rotation: DMatrix<f64>,
    translation: DVector<f64>,
}

impl Isometry {
    pub fn new(rotation: DMatrix<f64>, translation: DVector<f64>) -> Result<Self> {
        let d = rotation.nrows();
        if rotation.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: rotation.ncols() });
        }
        if translation.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: translation.len() });
        }
        let dev = orthogonality_defect(&rotation);
        if dev > MATRIX_TOL {
            return Err(Error::NotOrthogonal(dev));
        }
        Ok(Isometry { rotation, translation })
    }

    pub fn identity(d: usize) -> Self {
        Isometry { rotation: DMatrix::identity(d, d), translation: DVector::zeros(d) }
    }

    pub fn pure_translation(b: DVector<f64>) -> Self {
        let d = b.len();
        Isometry { rotation: DMatrix::identity(d, d), translation: b }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &DVector<f64> {
        &self.translation
    }

    /// `self ∘ other`, i.e. `(A1 A2, b1 + A1 b2)`.
    pub fn compose(&self, other: &Isometry) -> Result<Isometry> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(Isometry {
            rotation: &self.rotation * &other.rotation,
            translation: &self.translation + &self.rotation * &other.translation,
        })
    }

    pub fn act(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(&self.rotation * x + &self.translation)
    }

    pub fn inverse(&self) -> Isometry {
        let at = self.rotation.transpose();
        let b = -(&at * &self.translation);
        Isometry { rotation: at, translation: b }
    }

    /// Integer power; negative exponents use the inverse.
    pub fn pow(&self, n: i64) -> Isometry {
        let mut base = if n < 0 { self.inverse() } else { self.clone() };
        let mut acc = Isometry::identity(self.dim());
        let mut e = n.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.compose(&base).expect("same dimension");
            }
            e >>= 1;
            if e > 0 {
                base = base.compose(&base).expect("same dimension");
            }
        }
        acc
    }

    pub fn approx_eq(&self, other: &Isometry, tol: f64) -> bool {
        self.dim() == other.dim()
            && (&self.rotation - &other.rotation).norm() <= tol
            && (&self.translation - &other.translation).norm() <= tol
    }

    /// Block form `O(d1) ⊕ O(d2)` with translation in `{0} × R^{d2}`.
    pub fn is_canonical(&self, d1: usize, tol: f64) -> bool {
        let d = self.dim();
        if d1 > d {
            return false;
        }
        let mut off = 0.0;
        for i in 0..d {
            for j in 0..d {
                if (i < d1) != (j < d1) {
                    off += self.rotation[(i, j)].powi(2);
                }
            }
        }
        let t1: f64 = self.translation.rows(0, d1).norm_squared();
        off.sqrt() <= tol && t1.sqrt() <= tol
    }
}

/// `‖AᵀA − I‖_F`.
pub fn orthogonality_defect(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    (a.transpose() * a - DMatrix::<f64>::identity(n, n)).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SkewBlockPattern {
    /// All of `Skew(d)`.
    Full,
    /// Skew matrices whose lower-right `d2 × d2` block vanishes.
    ZeroS3,
    /// Only the upper-left `d1 × d1` block.
    S1Only,
}

impl SkewBlockPattern {
    pub fn dimension(self, d1: usize, d2: usize) -> usize {
        let d = d1 + d2;
        match self {
            SkewBlockPattern::Full => d * d.saturating_sub(1) / 2,
            SkewBlockPattern::ZeroS3 => d1 * d1.saturating_sub(1) / 2 + d1 * d2,
            SkewBlockPattern::S1Only => d1 * d1.saturating_sub(1) / 2,
        }
    }
}

/// Frobenius-orthonormal basis `(e_i e_jᵀ − e_j e_iᵀ)/√2`, pairs `i < j` in
/// lexicographic order, filtered by the block pattern.
pub fn skew_basis(d: usize, d1: usize, d2: usize, pattern: SkewBlockPattern) -> Result<Vec<DMatrix<f64>>> {
    if d1 + d2 != d {
        return Err(Error::InvalidSplit { d, d1, d2 });
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            let keep = match pattern {
                SkewBlockPattern::Full => true,
                SkewBlockPattern::ZeroS3 => i < d1,
                SkewBlockPattern::S1Only => j < d1,
            };
            if keep {
                let mut m = DMatrix::zeros(d, d);
                m[(i, j)] = -s;
                m[(j, i)] = s;
                out.push(m);
            }
        }
    }
    Ok(out)
}

/// `Λ(A) ⊕ R(θ_1) ⊕ … ⊕ R(θ_q)` for one member of the family.
#[derive(Debug, Clone)]
pub struct QuasiBlocks {
    pub signs: Vec<f64>,
    pub angles: Vec<f64>,
}

impl QuasiBlocks {
    pub fn assemble(&self) -> DMatrix<f64> {
        let p = self.signs.len();
        let n = p + 2 * self.angles.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, s) in self.signs.iter().enumerate() {
            m[(i, i)] = *s;
        }
        for (j, th) in self.angles.iter().enumerate() {
            let r = p + 2 * j;
            let (s, c) = th.sin_cos();
            m[(r, r)] = c;
            m[(r, r + 1)] = -s;
            m[(r + 1, r)] = s;
            m[(r + 1, r + 1)] = c;
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct Quasidiagonal {
    pub q: DMatrix<f64>,
    /// Number of 2×2 rotation blocks.
    pub blocks: usize,
    pub members: Vec<QuasiBlocks>,
    /// Largest `‖QᵀAQ − blocks‖_F` over the family.
    pub residual: f64,
}

const QD_TOL: f64 = 1e-8;
const QD_ATTEMPTS: usize = 12;

/// Shared orthogonal reduction of a commuting family of orthogonal matrices.
///
/// A random combination of the symmetric parts separates the joint
/// eigenspaces up to complex conjugation; inside each such space a random
/// combination of the skew parts is `σ J` with `J² = −1` (or zero on the
/// `±1` part), which yields the rotation planes.
pub fn simultaneous_quasidiagonalize(family: &[DMatrix<f64>]) -> Result<Quasidiagonal> {
    let first = family
        .first()
        .ok_or_else(|| Error::InvalidInput("empty matrix family".into()))?;
    let n = first.nrows();
    for a in family {
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: a.nrows().max(a.ncols()) });
        }
        let dev = orthogonality_defect(a);
        if dev > QD_TOL {
            return Err(Error::NotOrthogonal(dev));
        }
    }
    for (i, a) in family.iter().enumerate() {
        for b in &family[i + 1..] {
            let dev = (a * b - b * a).norm();
            if dev > QD_TOL {
                return Err(Error::NotCommuting(dev));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0a11);
    let mut best: Option<Quasidiagonal> = None;
    for _ in 0..QD_ATTEMPTS {
        let c: Vec<f64> = family.iter().map(|_| rng.gen_range(0.5..1.5)).collect();
        let c2: Vec<f64> = family.iter().map(|_| rng.gen_range(0.5..1.5)).collect();
        if let Some(r) = quasidiag_attempt(family, &c, &c2) {
            if r.residual < QD_TOL {
                return Ok(r);
            }
            if best.as_ref().is_none_or(|b| r.residual < b.residual) {
                best = Some(r);
            }
        }
    }
    Err(Error::Numerical(format!(
        "quasidiagonalization did not converge (best residual {:.3e})",
        best.map_or(f64::INFINITY, |b| b.residual)
    )))
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_columns(&idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    (vals, vecs)
}

fn clusters(vals: &[f64], gap: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=vals.len() {
        if i == vals.len() || vals[i] - vals[i - 1] > gap {
            out.push((start, i));
            start = i;
        }
    }
    out
}

fn quasidiag_attempt(family: &[DMatrix<f64>], c: &[f64], c2: &[f64]) -> Option<Quasidiagonal> {
    let n = family[0].nrows();
    let mut h = DMatrix::zeros(n, n);
    for (a, w) in family.iter().zip(c) {
        h += (a + a.transpose()) * (0.5 * w);
    }
    let (hv, hvec) = sorted_eigen(h);

    let mut fixed: Vec<DVector<f64>> = Vec::new();
    let mut planes: Vec<DVector<f64>> = Vec::new();
    for (s, e) in clusters(&hv, 1e-7) {
        let v = hvec.columns(s, e - s).into_owned();
        let mut k = DMatrix::zeros(e - s, e - s);
        for (a, w) in family.iter().zip(c2) {
            k += v.transpose() * (a - a.transpose()) * &v * (0.5 * w);
        }
        let (pv, pvec) = sorted_eigen(k.transpose() * &k);
        for (ps, pe) in clusters(&pv, 1e-7) {
            let w = pvec.columns(ps, pe - ps).into_owned();
            let sigma2 = pv[ps..pe].iter().sum::<f64>() / (pe - ps) as f64;
            if sigma2 < 1e-12 {
                for j in 0..w.ncols() {
                    fixed.push(&v * w.column(j));
                }
                continue;
            }
            if (pe - ps) % 2 != 0 {
                return None;
            }
            // J restricted to this eigenspace, in the coordinates of w.
            let j = w.transpose() * &k * &w / sigma2.sqrt();
            let m = pe - ps;
            let mut chosen: Vec<DVector<f64>> = Vec::new();
            for col in 0..m {
                if chosen.len() == m {
                    break;
                }
                let mut x = DVector::zeros(m);
                x[col] = 1.0;
                for y in &chosen {
                    let p = y.dot(&x);
                    x -= y * p;
                }
                if x.norm() < 1e-3 {
                    continue;
                }
                x.normalize_mut();
                let mut y = &j * &x;
                for z in chosen.iter().chain(std::iter::once(&x)) {
                    let p = z.dot(&y);
                    y -= z * p;
                }
                if y.norm() < 1e-6 {
                    return None;
                }
                y.normalize_mut();
                chosen.push(x);
                chosen.push(y);
            }
            if chosen.len() != m {
                return None;
            }
            for x in chosen {
                planes.push(&v * (&w * x));
            }
        }
    }
    if fixed.len() + planes.len() != n {
        return None;
    }
    let cols: Vec<DVector<f64>> = fixed.iter().chain(planes.iter()).cloned().collect();
    let q = if n == 0 { DMatrix::zeros(0, 0) } else { DMatrix::from_columns(&cols) };
    let p = fixed.len();
    let nb = planes.len() / 2;
    let mut members = Vec::with_capacity(family.len());
    let mut residual: f64 = 0.0;
    for a in family {
        let b = q.transpose() * a * &q;
        let signs = (0..p).map(|i| if b[(i, i)] >= 0.0 { 1.0 } else { -1.0 }).collect();
        let angles = (0..nb)
            .map(|j| {
                let r = p + 2 * j;
                b[(r + 1, r)].atan2(b[(r, r)]).rem_euclid(std::f64::consts::TAU)
            })
            .collect();
        let blocks = QuasiBlocks { signs, angles };
        residual = residual.max((&b - blocks.assemble()).norm());
        members.push(blocks);
    }
    Some(Quasidiagonal { q, blocks: nb, members, residual })
}

/// Checks `max_{m<ν≤m+n} |Σ b_j z_j^ν| / Σ |b_j| |z_j|^ν ≥ (1/n)(δ/2)^{n−1}`
/// where `δ` is the minimal pairwise distance of the `z_j` relative to their
/// largest modulus.
pub fn turan_lower_bound_check(b: &[Complex64], z: &[Complex64], m: u32) -> Result<bool> {
    let n = z.len();
    if n == 0 || b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    if z.iter().any(|w| w.norm() == 0.0) {
        return Err(Error::InvalidInput("zero entry in z".into()));
    }
    if b.iter().all(|w| w.norm() == 0.0) {
        return Err(Error::InvalidInput("all coefficients vanish".into()));
    }
    let zmax = z.iter().map(|w| w.norm()).fold(0.0, f64::max);
    let mut delta = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            delta = delta.min((z[i] - z[j]).norm() / zmax);
        }
    }
    if delta == 0.0 {
        return Err(Error::InvalidInput("coincident entries in z".into()));
    }
    let bound = if n == 1 { 1.0 } else { (delta / 2.0).powi(n as i32 - 1) / n as f64 };
    let mut best: f64 = 0.0;
    for nu in (m as i32 + 1)..=(m as i32 + n as i32) {
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for (bj, zj) in b.iter().zip(z) {
            let p = zj.powi(nu);
            num += bj * p;
            den += bj.norm() * p.norm();
        }
        best = best.max(num.norm() / den);
    }
    Ok(best >= bound * (1.0 - 1e-12))
}

/// `dist(k, Z)`.
pub fn distance_to_nearest_integer(k: f64) -> f64 {
    (k - k.round()).abs()
}

/// `‖x⊗yᵀ + A‖ / (‖x⊗yᵀ‖ + ‖A‖)` in the Frobenius norm.
pub fn rank_one_skew_ratio(x: &[Complex64], y: &[Complex64], a: &DMatrix<Complex64>) -> Result<f64> {
    let n = x.len();
    if y.len() != n || a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    let xy = DMatrix::from_fn(n, n, |i, j| x[i] * y[j]);
    let sum = (&xy + a).norm();
    let den = xy.norm() + a.norm();
    if den == 0.0 {
        return Err(Error::InvalidInput("both terms vanish".into()));
    }
    Ok(sum / den)
}

/// 2×2 rotation by `theta`.
pub fn rotation_2d(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}
