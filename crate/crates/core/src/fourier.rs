//! Characters of the lattice `T^{m0} ≅ Z^{d2}` and the periodic Fourier
//! transform `f̂(χ) = avg_a χ(t^a) f(t^a)`.
//!
//! The transform is evaluated by direct summation; no FFT.

use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::fields::{lcm, FieldScalar, PeriodicField};
use crate::group::GroupSpec;

/// `χ_k(t^a) = exp(2πi k·a)` with `k ∈ [0,1)^{d2} ∩ Q^{d2}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Character {
    pub k: Vec<Ratio<i64>>,
}

fn frac(r: Ratio<i64>) -> Ratio<i64> {
    r - r.floor()
}

impl Character {
    pub fn new(k: Vec<Ratio<i64>>) -> Self {
        Character { k: k.into_iter().map(frac).collect() }
    }

    pub fn trivial(d2: usize) -> Self {
        Character { k: vec![Ratio::from_integer(0); d2] }
    }

    pub fn eval(&self, a: &[i64]) -> Complex64 {
        let mut phase = Ratio::from_integer(0);
        for (k, &ai) in self.k.iter().zip(a) {
            phase = frac(phase + k * ai);
        }
        Complex64::from_polar(1.0, TAU * (*phase.numer() as f64) / (*phase.denom() as f64))
    }

    /// Least common denominator of the wave vector.
    pub fn denominator(&self) -> usize {
        self.k.iter().fold(1usize, |acc, k| lcm(acc, *k.denom() as usize))
    }

    /// Trivial on `⟨t_i^p⟩`.
    pub fn is_periodic(&self, p: usize) -> bool {
        p.is_multiple_of(self.denominator())
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.k.iter().map(|k| *k.numer() as f64 / *k.denom() as f64).collect()
    }
}

/// All characters of `Z^{d2}` trivial on `(pZ)^{d2}`, first component slowest.
pub fn lattice_characters(d2: usize, p: usize) -> Vec<Character> {
    let mut out = vec![Vec::new()];
    for _ in 0..d2 {
        let mut next = Vec::with_capacity(out.len() * p);
        for k in &out {
            for j in 0..p {
                let mut k2: Vec<Ratio<i64>> = k.clone();
                k2.push(Ratio::new(j as i64, p as i64));
                next.push(k2);
            }
        }
        out = next;
    }
    out.into_iter().map(|k| Character { k }).collect()
}

/// Characters of `T^{m0}` that are `T^N`-periodic.
pub fn periodic_characters(spec: &GroupSpec, n: usize) -> Result<Vec<Character>> {
    let k = spec.period_factor(n)?;
    Ok(lattice_characters(spec.d2, k))
}

/// A `(pZ)^{d2}`-periodic function `Z^{d2} -> C^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    pub dim: usize,
    pub period: usize,
    pub components: usize,
    pub values: Vec<Complex64>,
}

fn lattice_index(a: &[i64], p: usize) -> usize {
    a.iter().fold(0usize, |idx, &x| idx * p + x.rem_euclid(p as i64) as usize)
}

fn lattice_point(mut idx: usize, dim: usize, p: usize) -> Vec<i64> {
    let mut a = vec![0i64; dim];
    for r in (0..dim).rev() {
        a[r] = (idx % p) as i64;
        idx /= p;
    }
    a
}

impl LatticeField {
    pub fn from_fn<F>(dim: usize, period: usize, components: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[i64]) -> DVector<Complex64>,
    {
        if period == 0 {
            return Err(Error::InvalidInput("lattice period must be positive".into()));
        }
        let n = period.pow(dim as u32);
        let mut values = Vec::with_capacity(n * components);
        for i in 0..n {
            let x = f(&lattice_point(i, dim, period));
            if x.len() != components {
                return Err(Error::DimensionMismatch { expected: components, found: x.len() });
            }
            values.extend(x.iter());
        }
        Ok(LatticeField { dim, period, components, values })
    }

    pub fn points(&self) -> usize {
        self.period.pow(self.dim as u32)
    }

    pub fn at(&self, a: &[i64]) -> &[Complex64] {
        let i = lattice_index(a, self.period);
        &self.values[i * self.components..(i + 1) * self.components]
    }

    pub fn lift(&self, period: usize) -> Result<Self> {
        if !period.is_multiple_of(self.period) {
            return Err(Error::InvalidPeriod { period, m0: self.period });
        }
        Self::from_fn(self.dim, period, self.components, |a| DVector::from_column_slice(self.at(a)))
    }

    /// `a ↦ f(a + b)`.
    pub fn translate(&self, b: &[i64]) -> Self {
        Self::from_fn(self.dim, self.period, self.components, |a| {
            let ab: Vec<i64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
            DVector::from_column_slice(self.at(&ab))
        })
        .expect("same shape")
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        if self.components != other.components {
            return Err(Error::DimensionMismatch { expected: self.components, found: other.components });
        }
        Ok(())
    }

    /// Average of `⟨f(a), g(a)⟩` over one common period.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        self.check_shape(other)?;
        if self.period != other.period {
            let p = lcm(self.period, other.period);
            return self.lift(p)?.inner_product(&other.lift(p)?);
        }
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        Ok(s / self.points() as f64)
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|x| x.norm_sqr()).sum::<f64>() / self.points() as f64
    }
}

/// Restriction `a ↦ u(c · t^a)` of a periodic field to one coset.
pub fn coset_slice<T: FieldScalar>(u: &PeriodicField<T>, coset: usize) -> Result<LatticeField>
where
    Complex64: From<T>,
{
    let spec = u.spec();
    if coset >= spec.coset_count() {
        return Err(Error::InvalidInput(format!("coset {coset} out of range")));
    }
    LatticeField::from_fn(spec.d2, u.k(), spec.d, |a| {
        let g = crate::group::CanonicalElement { coset, exponents: a.to_vec() };
        u.at(&g).map(Complex64::from)
    })
}

/// `f̂(χ)`. When the character is not trivial on the field's period both are
/// viewed on the least common period.
pub fn transform(f: &LatticeField, chi: &Character) -> Result<DVector<Complex64>> {
    if chi.k.len() != f.dim {
        return Err(Error::DimensionMismatch { expected: f.dim, found: chi.k.len() });
    }
    let p = lcm(f.period, chi.denominator());
    let n = p.pow(f.dim as u32);
    let mut acc = DVector::zeros(f.components);
    for i in 0..n {
        let a = lattice_point(i, f.dim, p);
        let w = chi.eval(&a);
        for (j, x) in f.at(&a).iter().enumerate() {
            acc[j] += w * x;
        }
    }
    Ok(acc / Complex64::from(n as f64))
}

/// All `(χ, f̂(χ))` over the characters of the field's period.
pub fn spectrum(f: &LatticeField) -> Vec<(Character, DVector<Complex64>)> {
    lattice_characters(f.dim, f.period)
        .into_iter()
        .map(|c| {
            let v = transform(f, &c).expect("matching dimension");
            (c, v)
        })
        .collect()
}

/// `f(a) = Σ_χ conj(χ(a)) f̂(χ)`.
pub fn inverse_transform(
    spectrum: &[(Character, DVector<Complex64>)],
    dim: usize,
    period: usize,
) -> Result<LatticeField> {
    let components = spectrum.first().map_or(0, |(_, v)| v.len());
    for (c, v) in spectrum {
        if c.k.len() != dim || v.len() != components {
            return Err(Error::DimensionMismatch { expected: dim, found: c.k.len() });
        }
        if !c.is_periodic(period) {
            return Err(Error::InvalidPeriod { period, m0: c.denominator() });
        }
    }
    LatticeField::from_fn(dim, period, components, |a| {
        let mut x = DVector::zeros(components);
        for (c, v) in spectrum {
            x += v * c.eval(a).conj();
        }
        x
    })
}

/// `|⟨f, g⟩ − Σ_χ ⟨f̂(χ), ĝ(χ)⟩|` on the common period.
pub fn plancherel_residual(f: &LatticeField, g: &LatticeField) -> Result<f64> {
    f.check_shape(g)?;
    let p = lcm(f.period, g.period);
    let lhs = f.inner_product(g)?;
    let mut rhs = Complex64::new(0.0, 0.0);
    for chi in lattice_characters(f.dim, p) {
        let a = transform(f, &chi)?;
        let b = transform(g, &chi)?;
        rhs += a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<Complex64>();
    }
    Ok((lhs - rhs).norm())
}

/// `‖(f(· + b))^(χ) − χ(−b) f̂(χ)‖`.
pub fn translation_property_residual(f: &LatticeField, b: &[i64], chi: &Character) -> Result<f64> {
    if b.len() != f.dim {
        return Err(Error::DimensionMismatch { expected: f.dim, found: b.len() });
    }
    let p = lcm(f.period, chi.denominator());
    let lifted = f.lift(p)?;
    let lhs = transform(&lifted.translate(b), chi)?;
    let neg: Vec<i64> = b.iter().map(|x| -x).collect();
    let rhs = transform(f, chi)? * chi.eval(&neg);
    Ok((lhs - rhs).norm())
}

/// Spectrum CSV: `k_1..k_d2` then `re_u_j,im_u_j` for each component.
pub fn write_spectrum_csv<W: Write>(f: &LatticeField, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..=f.dim).map(|i| format!("k_{i}")).collect();
    for j in 1..=f.components {
        header.push(format!("re_u_{j}"));
        header.push(format!("im_u_{j}"));
    }
    out.write_record(&header)?;
    for (chi, v) in spectrum(f) {
        let mut rec: Vec<String> = chi.as_f64().iter().map(|k| format!("{k:.16e}")).collect();
        for x in v.iter() {
            rec.push(format!("{:.16e}", x.re));
            rec.push(format!("{:.16e}", x.im));
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
