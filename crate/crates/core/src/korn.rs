//! Equivalence constants between pairs of seminorms, period sweeps, and the
//! spectral characterizations of the two closed-form chains.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::euclid::distance_to_nearest_integer;
use crate::fields::PeriodicDisplacement;
use crate::fourier::{transform, Character, LatticeField};
use crate::group::{CanonicalElement, GroupSpec, RangeSet};
use crate::seminorms::{null_space, orthonormal_span, SeminormKind, SeminormOperator};

/// Principal-angle tolerance for declaring two kernels equal.
pub const KERNEL_ANGLE_TOL: f64 = 1e-6;
pub const BOUNDED_EXPONENT: f64 = 0.2;
pub const GROWING_EXPONENT: f64 = 0.5;

/// One side of a comparison: a range and a seminorm kind.
#[derive(Debug, Clone)]
pub struct Side {
    pub range: RangeSet,
    pub kind: SeminormKind,
}

impl Side {
    pub fn new(range: RangeSet, kind: SeminormKind) -> Self {
        Side { range, kind }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub kind_a: SeminormKind,
    pub kind_b: SeminormKind,
    pub c_min: f64,
    pub c_max: f64,
    pub dim_ker_a: usize,
    pub dim_ker_b: usize,
    pub kernels_equal: bool,
}

/// `sin` of the largest principal angle from `span(a)` to `span(b)`.
fn max_angle_sin(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 {
        return 0.0;
    }
    let resid = a - b * (b.transpose() * a);
    resid.svd(false, false).singular_values.max()
}

/// Extremal Rayleigh quotients `uᵀQ_b u / uᵀQ_a u` off the joint kernel.
pub fn compare(spec: &GroupSpec, a: &Side, b: &Side, n: usize) -> Result<EquivalenceReport> {
    let qa = SeminormOperator::new(spec, &a.range, a.kind)?.quadratic_form(spec, n)?;
    let qb = SeminormOperator::new(spec, &b.range, b.kind)?.quadratic_form(spec, n)?;
    let (ka, kb) = (null_space(&qa), null_space(&qb));
    let kernels_equal = ka.ncols() == kb.ncols()
        && max_angle_sin(&ka, &kb) < KERNEL_ANGLE_TOL
        && max_angle_sin(&kb, &ka) < KERNEL_ANGLE_TOL;

    let size = qa.nrows();
    let mut joint = ka.clone();
    if kb.ncols() > 0 {
        joint = DMatrix::from_columns(&ka.column_iter().chain(kb.column_iter()).map(|c| c.into_owned()).collect::<Vec<_>>());
    }
    let j = orthonormal_span(&joint, 1e-8);
    let w = orthonormal_span(&(DMatrix::<f64>::identity(size, size) - &j * j.transpose()), 1e-8);
    let (c_min, c_max) = if w.ncols() == 0 {
        (1.0, 1.0)
    } else {
        let ar = w.transpose() * &qa * &w;
        let br = w.transpose() * &qb * &w;
        let ar = (&ar + ar.transpose()) * 0.5;
        let chol = ar
            .cholesky()
            .ok_or_else(|| Error::Numerical("first form is not definite off its kernel".into()))?;
        let l = chol.l();
        let linv = l
            .solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let c = &linv * br * linv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let ev = SymmetricEigen::new(c).eigenvalues;
        (ev.min(), ev.max())
    };
    Ok(EquivalenceReport {
        n,
        kind_a: a.kind,
        kind_b: b.kind,
        c_min: if kernels_equal { c_min } else { 0.0 },
        c_max,
        dim_ker_a: ka.ncols(),
        dim_ker_b: kb.ncols(),
        kernels_equal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Diagnosis {
    Bounded,
    Growing,
    Inconclusive,
}

impl Diagnosis {
    pub fn from_exponent(e: f64) -> Self {
        if e < BOUNDED_EXPONENT {
            Diagnosis::Bounded
        } else if e > GROWING_EXPONENT {
            Diagnosis::Growing
        } else {
            Diagnosis::Inconclusive
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Diagnosis::Bounded => "BOUNDED",
            Diagnosis::Growing => "GROWING",
            Diagnosis::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub reports: Vec<EquivalenceReport>,
    pub exponent: f64,
    pub diagnosis: Diagnosis,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 { 0.0 } else { sxy / sxx }
}

pub fn sweep(spec: &GroupSpec, a: &Side, b: &Side, periods: &[usize]) -> Result<SweepResult> {
    if periods.is_empty() {
        return Err(Error::InvalidInput("no periods given".into()));
    }
    for w in periods.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidInput("periods must be strictly ascending".into()));
        }
    }
    for &n in periods {
        spec.period_factor(n)?;
    }
    let reports = periods
        .par_iter()
        .map(|&n| compare(spec, a, b, n))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = reports.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = reports.iter().map(|r| r.c_max).collect();
    let exponent = loglog_slope(&xs, &ys);
    Ok(SweepResult { reports, exponent, diagnosis: Diagnosis::from_exponent(exponent) })
}

impl SweepResult {
    /// `N,c_min,c_max,dim_ker_a,dim_ker_b,kernels_equal` rows followed by a
    /// `#`-prefixed JSON summary line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().from_writer(w);
        out.write_record(["N", "c_min", "c_max", "dim_ker_a", "dim_ker_b", "kernels_equal"])?;
        for r in &self.reports {
            out.write_record([
                r.n.to_string(),
                format!("{:.16e}", r.c_min),
                format!("{:.16e}", r.c_max),
                r.dim_ker_a.to_string(),
                r.dim_ker_b.to_string(),
                r.kernels_equal.to_string(),
            ])?;
        }
        out.flush()?;
        let mut w = out.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        let summary = serde_json::json!({
            "diagnosis": self.diagnosis.label(),
            "exponent": self.exponent,
        });
        writeln!(w, "# {summary}")?;
        Ok(())
    }
}

/// `value_b(u)² / value_a(u)²` for one field.
pub fn rayleigh_ratio(spec: &GroupSpec, a: &Side, b: &Side, u: &PeriodicDisplacement) -> Result<f64> {
    let va = SeminormOperator::new(spec, &a.range, a.kind)?.value_squared(u);
    let vb = SeminormOperator::new(spec, &b.range, b.kind)?.value_squared(u);
    Ok(vb / va)
}

/// Min and max of the Rayleigh ratio over random fields; used where the
/// dense eigen-solve is too large and as a cross-check otherwise.
pub fn sampled_ratios(
    spec: &Arc<GroupSpec>,
    a: &Side,
    b: &Side,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let oa = SeminormOperator::new(spec, &a.range, a.kind)?;
    let ob = SeminormOperator::new(spec, &b.range, b.kind)?;
    let ratios = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let u = PeriodicDisplacement::random(spec.clone(), n, seed.wrapping_add(t))?;
            Ok(ob.value_squared(&u) / oa.value_squared(&u))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(extremes(&ratios))
}

fn extremes(xs: &[f64]) -> (f64, f64) {
    xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// `u_1(t^n) = sin(2πn/N)`, `u_2 = 0` on a chain-like structure.
pub fn buckling_mode(spec: &Arc<GroupSpec>, n: usize) -> Result<PeriodicDisplacement> {
    let t = spec
        .generator_elements()
        .first()
        .cloned()
        .ok_or_else(|| Error::Unsupported("no generator".into()))?;
    if spec.d2 != 1 || spec.coset_count() != 1 || t.exponents != vec![1] {
        return Err(Error::Unsupported(format!("{} is not a single-generator chain", spec.name)));
    }
    PeriodicDisplacement::from_fn(spec.clone(), n, |g| {
        let mut x = DVector::zeros(spec.d);
        x[0] = (std::f64::consts::TAU * g.exponents[0] as f64 / n as f64).sin();
        x
    })
}

/// The two structures with closed-form spectral characterizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedForm {
    Chain,
    Zigzag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightVariant {
    Grad,
    Seminorm,
}

impl ClosedForm {
    /// Recognizes the structures by their generator rather than by name.
    pub fn detect(spec: &GroupSpec) -> Result<Self> {
        let unsupported = || Error::Unsupported(format!("{} has no closed-form spectral sum", spec.name));
        if spec.d != 2 || spec.d1 != 1 || spec.d2 != 1 || spec.generators.len() != 1 {
            return Err(unsupported());
        }
        let t = &spec.generators[0].element;
        let shift = DVector::from_vec(vec![0.0, 1.0]);
        if (t.translation() - shift).norm() > 1e-12 {
            return Err(unsupported());
        }
        let r = t.rotation();
        let x0 = &spec.base_point;
        if (r - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12 && x0.norm() < 1e-12 {
            Ok(ClosedForm::Chain)
        } else if (r - DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0])).norm() < 1e-12
            && (x0 - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-12
        {
            Ok(ClosedForm::Zigzag)
        } else {
            Err(unsupported())
        }
    }

    /// Reference Property-2 range used alongside the spectral sums.
    pub fn reference_range(self) -> &'static str {
        match self {
            ClosedForm::Chain => "id,t,t^2",
            ClosedForm::Zigzag => "id,t,t^2,t^3",
        }
    }
}

/// `n ↦ u(t^n)` over one period.
fn generator_samples(u: &PeriodicDisplacement, t: &CanonicalElement) -> Result<LatticeField> {
    let spec = u.spec();
    let n = u.period();
    let mut g = spec.identity();
    let mut vals = Vec::with_capacity(n);
    for _ in 0..n {
        vals.push(u.at(&g).map(Complex64::from));
        g = spec.multiply(&g, t);
    }
    LatticeField::from_fn(1, n, spec.d, |a| vals[a[0] as usize].clone())
}

/// Weighted spectral sum over the characters `χ_k(t^n) = e^{2πi nk}`.
pub fn fourier_weighted_sum(u: &PeriodicDisplacement, variant: WeightVariant) -> Result<f64> {
    let spec = u.spec();
    let form = ClosedForm::detect(spec)?;
    let t = spec.generator_elements()[0].clone();
    let f = generator_samples(u, &t)?;
    let n = u.period() as i64;
    let mut total = 0.0;
    for j in 0..n {
        let k = j as f64 / n as f64;
        let hat = transform(&f, &Character::new(vec![num_rational::Ratio::new(j, n)]))?;
        let (u1, u2) = (hat[0], hat[1]);
        let kk = distance_to_nearest_integer(k);
        let kh = distance_to_nearest_integer(k - 0.5);
        total += match (form, variant) {
            (ClosedForm::Chain, WeightVariant::Grad) => kk.powi(2) * (u1.norm_sqr() + u2.norm_sqr()),
            (ClosedForm::Chain, WeightVariant::Seminorm) => kk.powi(4) * u1.norm_sqr() + kk.powi(2) * u2.norm_sqr(),
            (ClosedForm::Zigzag, WeightVariant::Grad) => kh.powi(2) * u1.norm_sqr() + kk.powi(2) * u2.norm_sqr(),
            (ClosedForm::Zigzag, WeightVariant::Seminorm) => {
                let cross = Complex64::new(0.0, std::f64::consts::TAU * (k - 0.5)) * u1 - u2;
                kh.powi(4) * u1.norm_sqr() + kk.powi(2) * cross.norm_sqr()
            }
        };
    }
    Ok(total)
}

/// The seminorm a spectral sum is compared against.
pub fn matching_seminorm(variant: WeightVariant) -> SeminormKind {
    match variant {
        WeightVariant::Grad => SeminormKind::GradPlain,
        WeightVariant::Seminorm => SeminormKind::PatchIso,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FourierAssertion {
    pub variant: WeightVariant,
    pub seminorm: SeminormKind,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl FourierAssertion {
    pub fn spread(&self) -> f64 {
        self.max_ratio / self.min_ratio
    }
}

/// Extremes of `spectral sum / seminorm²` over random fields of period `n`.
pub fn fourier_check(spec: &Arc<GroupSpec>, n: usize, trials: usize, seed: u64) -> Result<Vec<FourierAssertion>> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be positive".into()));
    }
    let form = ClosedForm::detect(spec)?;
    let r = RangeSet::parse(spec, form.reference_range())?;
    let mut out = Vec::new();
    for variant in [WeightVariant::Grad, WeightVariant::Seminorm] {
        let kind = matching_seminorm(variant);
        let op = SeminormOperator::new(spec, &r, kind)?;
        let ratios = (0..trials as u64)
            .into_par_iter()
            .map(|i| {
                let u = PeriodicDisplacement::random(spec.clone(), n, seed.wrapping_add(i))?;
                Ok(fourier_weighted_sum(&u, variant)? / op.value_squared(&u))
            })
            .collect::<Result<Vec<f64>>>()?;
        let (min_ratio, max_ratio) = extremes(&ratios);
        out.push(FourierAssertion { variant, seminorm: kind, min_ratio, max_ratio });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn spec(name: &str) -> Arc<GroupSpec> {
        Arc::new(catalog::load_spec(name).unwrap())
    }

    fn side(s: &GroupSpec, r: &str, k: SeminormKind) -> Side {
        Side::new(RangeSet::parse(s, r).unwrap(), k)
    }

    #[test]
    fn identical_sides() {
        let s = spec("zigzag");
        let a = side(&s, "id,t,t^2,t^3", SeminormKind::PatchIso);
        let r = compare(&s, &a, &a, 8).unwrap();
        assert!((r.c_min - 1.0).abs() < 1e-9 && (r.c_max - 1.0).abs() < 1e-9);
        assert!(r.kernels_equal);
    }

    #[test]
    fn gradient_bounds_chain() {
        let s = spec("chain");
        let a = side(&s, "id,t,t^2", SeminormKind::PatchIso);
        let b = side(&s, "id,t,t^2", SeminormKind::GradRot);
        for n in [4, 8, 16] {
            let r = compare(&s, &a, &b, n).unwrap();
            assert!(r.kernels_equal);
            assert!(r.c_min >= 1.0 - 1e-9, "{}", r.c_min);
            assert!(r.c_max <= 4.0 + 1e-9, "{}", r.c_max);
        }
    }

    #[test]
    fn kernel_counterexample() {
        let s = spec("chain");
        let a = side(&s, "id,t", SeminormKind::PatchIso);
        let b = side(&s, "id,t,t^2", SeminormKind::PatchIso);
        for n in [2, 4, 8] {
            let r = compare(&s, &a, &b, n).unwrap();
            assert_eq!((r.dim_ker_a, r.dim_ker_b), (n + 1, 2));
            assert!(!r.kernels_equal);
            assert_eq!(r.c_min, 0.0);
        }
    }

    #[test]
    fn sampled_inside_eigen_bounds() {
        let s = spec("zigzag");
        let a = side(&s, "id,t,t^2,t^3", SeminormKind::PatchIso);
        let b = side(&s, "id,t,t^2,t^3", SeminormKind::PatchIso00);
        let r = compare(&s, &a, &b, 8).unwrap();
        let (lo, hi) = sampled_ratios(&s, &a, &b, 8, 50, 1).unwrap();
        assert!(lo >= r.c_min - 1e-9 && hi <= r.c_max + 1e-9);
    }

    #[test]
    fn slope_fit() {
        let xs = [4.0, 8.0, 16.0, 32.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        assert!((loglog_slope(&xs, &ys) - 2.0).abs() < 1e-12);
        assert_eq!(Diagnosis::from_exponent(0.1), Diagnosis::Bounded);
        assert_eq!(Diagnosis::from_exponent(0.3), Diagnosis::Inconclusive);
        assert_eq!(Diagnosis::from_exponent(1.9), Diagnosis::Growing);
    }

    #[test]
    fn spot_values_alternating_chain() {
        let s = spec("chain");
        let u = PeriodicDisplacement::from_fn(s.clone(), 2, |g| {
            DVector::from_vec(vec![if g.exponents[0] % 2 == 0 { 1.0 } else { -1.0 }, 0.0])
        })
        .unwrap();
        assert!((fourier_weighted_sum(&u, WeightVariant::Grad).unwrap() - 0.25).abs() < 1e-12);
        assert!((fourier_weighted_sum(&u, WeightVariant::Seminorm).unwrap() - 0.0625).abs() < 1e-12);
        let c = PeriodicDisplacement::from_fn(s, 8, |_| DVector::from_vec(vec![0.3, -2.0])).unwrap();
        assert!(fourier_weighted_sum(&c, WeightVariant::Seminorm).unwrap().abs() < 1e-28);
    }

    #[test]
    fn unsupported_structure() {
        let h = spec("helix");
        let u = PeriodicDisplacement::random(h.clone(), 4, 0).unwrap();
        assert!(matches!(fourier_weighted_sum(&u, WeightVariant::Grad), Err(Error::Unsupported(_))));
        assert!(fourier_check(&h, 4, 3, 0).is_err());
        assert!(fourier_check(&spec("chain"), 4, 0, 0).is_err());
    }

    #[test]
    fn zigzag_ratios_positive() {
        let z = spec("zigzag");
        for a in fourier_check(&z, 8, 20, 3).unwrap() {
            assert!(a.min_ratio > 0.0 && a.max_ratio.is_finite());
        }
    }

    #[test]
    fn sweep_csv_format() {
        let s = spec("chain");
        let a = side(&s, "id,t,t^2", SeminormKind::PatchIso);
        let b = side(&s, "id,t,t^2", SeminormKind::PatchIso0);
        let res = sweep(&s, &a, &b, &[4, 8]).unwrap();
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "N,c_min,c_max,dim_ker_a,dim_ker_b,kernels_equal");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("# {\"diagnosis\":\"BOUNDED\""));
        assert!(sweep(&s, &a, &b, &[8, 4]).is_err());
    }
}
