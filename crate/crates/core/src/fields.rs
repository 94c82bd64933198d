//! `T^N`-periodic fields `u: G -> K^d`, stored densely over `C_N`.

use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::{ComplexField, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::group::{CanonicalElement, GroupSpec, RangeSet};

/// Scalars a periodic field may carry.
pub trait FieldScalar: ComplexField<RealField = f64> + Copy {}
impl<T: ComplexField<RealField = f64> + Copy> FieldScalar for T {}

#[derive(Debug, Clone)]
pub struct PeriodicField<T: FieldScalar> {
    spec: Arc<GroupSpec>,
    period: usize,
    k: usize,
    values: Vec<T>,
}

pub type PeriodicDisplacement = PeriodicField<f64>;

pub(crate) fn same_spec(a: &GroupSpec, b: &GroupSpec) -> bool {
    std::ptr::eq(a, b) || (a.name == b.name && a.d == b.d && a.d2 == b.d2 && a.m0 == b.m0)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

pub fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

impl<T: FieldScalar> PeriodicField<T> {
    pub fn zeros(spec: Arc<GroupSpec>, period: usize) -> Result<Self> {
        let k = spec.period_factor(period)?;
        let len = spec.cn_size(k) * spec.d;
        Ok(PeriodicField { spec, period, k, values: vec![T::zero(); len] })
    }

    pub fn from_values(spec: Arc<GroupSpec>, period: usize, values: Vec<T>) -> Result<Self> {
        let k = spec.period_factor(period)?;
        let len = spec.cn_size(k) * spec.d;
        if values.len() != len {
            return Err(Error::DimensionMismatch { expected: len, found: values.len() });
        }
        Ok(PeriodicField { spec, period, k, values })
    }

    pub fn from_fn<F>(spec: Arc<GroupSpec>, period: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&CanonicalElement) -> DVector<T>,
    {
        let mut u = Self::zeros(spec, period)?;
        let d = u.spec.d;
        for i in 0..u.sites() {
            let g = u.spec.cn_element(i, u.k);
            let x = f(&g);
            if x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: x.len() });
            }
            u.values[i * d..(i + 1) * d].copy_from_slice(x.as_slice());
        }
        Ok(u)
    }

    pub fn spec(&self) -> &Arc<GroupSpec> {
        &self.spec
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// `N / m0`.
    pub fn k(&self) -> usize {
        self.k
    }

    /// `|C_N|`.
    pub fn sites(&self) -> usize {
        self.values.len() / self.spec.d.max(1)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn site(&self, idx: usize) -> &[T] {
        let d = self.spec.d;
        &self.values[idx * d..(idx + 1) * d]
    }

    pub fn at(&self, g: &CanonicalElement) -> DVector<T> {
        DVector::from_column_slice(self.site(self.spec.cn_index(g, self.k)))
    }

    /// The same field viewed as `T^{N'}`-periodic, `N'` a multiple of `N`.
    pub fn lift(&self, period: usize) -> Result<Self> {
        if !period.is_multiple_of(self.period) {
            return Err(Error::InvalidPeriod { period, m0: self.period });
        }
        let src = self;
        Self::from_fn(self.spec.clone(), period, |g| src.at(g))
    }

    /// `(1/|C_N|) Σ_{g ∈ C_N} ⟨u(g), v(g)⟩`, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &Self) -> Result<T> {
        if !same_spec(&self.spec, &other.spec) {
            return Err(Error::SpecMismatch);
        }
        if self.period != other.period {
            let n = lcm(self.period, other.period);
            return self.lift(n)?.inner_product(&other.lift(n)?);
        }
        let mut s = T::zero();
        for (a, b) in self.values.iter().zip(&other.values) {
            s += a.conjugate() * *b;
        }
        Ok(s / T::from_real(self.sites() as f64))
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|x| x.modulus_squared()).sum::<f64>() / self.sites() as f64
    }

    /// `a·self + b·other` on a common period.
    pub fn linear_combination(&self, a: T, other: &Self, b: T) -> Result<Self> {
        if !same_spec(&self.spec, &other.spec) {
            return Err(Error::SpecMismatch);
        }
        if self.period != other.period {
            let n = lcm(self.period, other.period);
            return self.lift(n)?.linear_combination(a, &other.lift(n)?, b);
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * *x + b * *y).collect();
        Ok(PeriodicField { spec: self.spec.clone(), period: self.period, k: self.k, values })
    }

    /// `(u(g h) − rot(h)ᵀ u(g))_{h ∈ R}`.
    pub fn discrete_derivative(&self, r: &RangeSet, g: &CanonicalElement) -> Vec<DVector<T>> {
        let ug = self.at(g);
        r.elements
            .iter()
            .map(|h| {
                let gh = self.spec.multiply(g, h);
                let rt = self.spec.rot(h).transpose().map(T::from_real);
                self.at(&gh) - rt * &ug
            })
            .collect()
    }
}

impl PeriodicField<f64> {
    /// Entries i.i.d. uniform on `[-1, 1]`.
    pub fn random(spec: Arc<GroupSpec>, period: usize, seed: u64) -> Result<Self> {
        let mut u = Self::zeros(spec, period)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in u.values.iter_mut() {
            *x = rng.gen_range(-1.0..=1.0);
        }
        Ok(u)
    }

    /// The deformed position `g · (x0 + u(g))`.
    pub fn displacement_to_deformation(&self, g: &CanonicalElement) -> DVector<f64> {
        let x = &self.spec.base_point + self.at(g);
        self.spec.element(g).act(&x).expect("same dimension")
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let spec = &self.spec;
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["coset_index".to_string()];
        header.extend((1..=spec.d2).map(|i| format!("a_{i}")));
        header.extend((1..=spec.d).map(|i| format!("u_{i}")));
        out.write_record(&header)?;
        for i in 0..self.sites() {
            let g = spec.cn_element(i, self.k);
            let mut rec = vec![g.coset.to_string()];
            rec.extend(g.exponents.iter().map(|a| a.to_string()));
            rec.extend(self.site(i).iter().map(|x| format!("{x:.16e}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a field written by [`write_csv`](Self::write_csv); the period is
    /// inferred from the number of rows.
    pub fn read_csv<R: Read>(spec: Arc<GroupSpec>, r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let (d, d2) = (spec.d, spec.d2);
        let width = 1 + d2 + d;
        let header = rdr.headers()?.clone();
        if header.len() != width || &header[0] != "coset_index" {
            return Err(Error::Parse(format!("expected {width} columns starting with coset_index")));
        }
        let mut rows: Vec<(CanonicalElement, Vec<f64>)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<&str> {
                rec.get(i).ok_or_else(|| Error::Parse("short row".into()))
            };
            let coset: usize = num(0)?.parse().map_err(|_| Error::Parse("bad coset index".into()))?;
            let exponents = (0..d2)
                .map(|j| num(1 + j)?.trim().parse::<i64>().map_err(|_| Error::Parse("bad exponent".into())))
                .collect::<Result<Vec<_>>>()?;
            let vals = (0..d)
                .map(|j| num(1 + d2 + j)?.trim().parse::<f64>().map_err(|_| Error::Parse("bad value".into())))
                .collect::<Result<Vec<_>>>()?;
            rows.push((CanonicalElement { coset, exponents }, vals));
        }
        let nc = spec.coset_count();
        if rows.is_empty() || !rows.len().is_multiple_of(nc) {
            return Err(Error::Parse("row count is not a multiple of the coset count".into()));
        }
        let per = rows.len() / nc;
        let k = if d2 == 0 {
            1
        } else {
            let k = (per as f64).powf(1.0 / d2 as f64).round() as usize;
            if k.pow(d2 as u32) != per {
                return Err(Error::Parse("row count does not match a full period".into()));
            }
            k
        };
        let mut u = Self::zeros(spec.clone(), k * spec.m0)?;
        let mut filled = vec![false; u.sites()];
        for (g, vals) in rows {
            if g.coset >= nc {
                return Err(Error::Parse(format!("coset index {} out of range", g.coset)));
            }
            let i = spec.cn_index(&g, k);
            if std::mem::replace(&mut filled[i], true) {
                return Err(Error::Parse("duplicate row".into()));
            }
            u.values[i * d..(i + 1) * d].copy_from_slice(&vals);
        }
        Ok(u)
    }
}
