//! Discrete groups `G < O(d1) ⊕ S` with a chosen translation section.
//!
//! Elements are stored as `c · t_1^{a_1} ··· t_{d2}^{a_{d2}}` with `c` one of
//! the coset representatives of `G / T^{m0}`. All coset arithmetic happens on
//! these integer coordinates; isometries are only used for validation and for
//! geometry (`g · x0`).

use std::collections::{HashSet, VecDeque};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::euclid::{Isometry, MATRIX_TOL};

const ELEMENT_TOL: f64 = 1e-8;
const INJECTIVITY_SAMPLE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalElement {
    pub coset: usize,
    pub exponents: Vec<i64>,
}

impl CanonicalElement {
    pub fn identity(d2: usize) -> Self {
        CanonicalElement { coset: 0, exponents: vec![0; d2] }
    }

    pub fn is_identity(&self) -> bool {
        self.coset == 0 && self.exponents.iter().all(|&a| a == 0)
    }
}

#[derive(Debug, Clone)]
pub struct Generator {
    pub name: String,
    pub element: Isometry,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDimension {
    d: usize,
    d1: usize,
    d2: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIsometry {
    #[serde(default)]
    name: Option<String>,
    rotation: Vec<Vec<f64>>,
    translation: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawGroup {
    name: String,
    dimension: RawDimension,
    generators: Vec<RawIsometry>,
    #[serde(default)]
    translation_basis: Vec<RawIsometry>,
    m0: usize,
    coset_reps: Vec<RawIsometry>,
    base_point: Vec<f64>,
}

impl RawIsometry {
    fn build(&self, d: usize, what: &str) -> Result<Isometry> {
        if self.rotation.len() != d || self.rotation.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidSpec(format!("{what}: rotation must be {d}x{d}")));
        }
        if self.translation.len() != d {
            return Err(Error::InvalidSpec(format!("{what}: translation must have {d} entries")));
        }
        let flat: Vec<f64> = self.rotation.iter().flatten().copied().collect();
        Isometry::new(DMatrix::from_row_slice(d, d, &flat), DVector::from_column_slice(&self.translation))
            .map_err(|e| Error::InvalidSpec(format!("{what}: {e}")))
    }
}

/// A validated group description.
#[derive(Debug, Clone)]
pub struct GroupSpec {
    pub name: String,
    pub d: usize,
    pub d1: usize,
    pub d2: usize,
    pub generators: Vec<Generator>,
    pub translation_basis: Vec<Isometry>,
    pub m0: usize,
    pub coset_reps: Vec<Isometry>,
    pub base_point: DVector<f64>,
    // columns are the lattice vectors π(t_i)
    tau_inv: DMatrix<f64>,
    // c_i c_j = c_k t^b
    coset_table: Vec<Vec<CanonicalElement>>,
    // c^{-1} t^a c = t^{M_c a}
    conj: Vec<Vec<Vec<i64>>>,
    coset_inverse: Vec<CanonicalElement>,
    generator_elements: Vec<CanonicalElement>,
}

impl GroupSpec {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let raw: RawGroup = toml::from_str(src).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let src = std::fs::read_to_string(path)?;
        Self::from_toml_str(&src)
    }

    pub(crate) fn from_raw(raw: RawGroup) -> Result<Self> {
        let RawDimension { d, d1, d2 } = raw.dimension;
        if d1 + d2 != d {
            return Err(Error::InvalidSplit { d, d1, d2 });
        }
        let generators = raw
            .generators
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let name = g.name.clone().unwrap_or_else(|| format!("g{}", i + 1));
                Ok(Generator { name, element: g.build(d, "generator")? })
            })
            .collect::<Result<Vec<_>>>()?;
        let translation_basis = raw
            .translation_basis
            .iter()
            .map(|t| t.build(d, "translation basis"))
            .collect::<Result<Vec<_>>>()?;
        let coset_reps = raw
            .coset_reps
            .iter()
            .map(|c| c.build(d, "coset representative"))
            .collect::<Result<Vec<_>>>()?;
        if raw.base_point.len() != d {
            return Err(Error::InvalidSpec(format!("base point must have {d} entries")));
        }
        Self::new(
            raw.name,
            (d, d1, d2),
            generators,
            translation_basis,
            raw.m0,
            coset_reps,
            DVector::from_column_slice(&raw.base_point),
        )
    }

    pub fn new(
        name: String,
        (d, d1, d2): (usize, usize, usize),
        generators: Vec<Generator>,
        translation_basis: Vec<Isometry>,
        m0: usize,
        coset_reps: Vec<Isometry>,
        base_point: DVector<f64>,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if d1 + d2 != d {
            return Err(Error::InvalidSplit { d, d1, d2 });
        }
        if m0 == 0 {
            return bad("m0 must be positive".into());
        }
        if generators.is_empty() {
            return bad("at least one generator is required".into());
        }
        if translation_basis.len() != d2 {
            return bad(format!("translation basis needs {d2} elements, found {}", translation_basis.len()));
        }
        if coset_reps.is_empty() {
            return bad("coset representatives are missing".into());
        }
        if base_point.len() != d {
            return bad(format!("base point must have {d} entries"));
        }
        let names: HashSet<&str> = generators.iter().map(|g| g.name.as_str()).collect();
        if names.len() != generators.len() || names.contains("id") {
            return bad("generator names must be distinct and differ from `id`".into());
        }
        for g in generators.iter().map(|g| &g.element).chain(&translation_basis).chain(&coset_reps) {
            if g.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: g.dim() });
            }
            if !g.is_canonical(d1, MATRIX_TOL) {
                return bad("isometry is not in canonical O(d1) ⊕ S block form".into());
            }
        }
        if !coset_reps[0].approx_eq(&Isometry::identity(d), MATRIX_TOL) {
            return bad("first coset representative must be the identity".into());
        }

        let id_d2 = DMatrix::<f64>::identity(d2, d2);
        let mut tau = DMatrix::zeros(d2, d2);
        for (i, t) in translation_basis.iter().enumerate() {
            let a2 = t.rotation().view((d1, d1), (d2, d2));
            if (a2 - &id_d2).norm() > MATRIX_TOL {
                return bad(format!("translation basis element {} does not project to a translation", i + 1));
            }
            tau.set_column(i, &t.translation().rows(d1, d2));
        }
        for (i, s) in translation_basis.iter().enumerate() {
            for t in &translation_basis[i + 1..] {
                let st = s.compose(t)?;
                let ts = t.compose(s)?;
                if !st.approx_eq(&ts, MATRIX_TOL) {
                    return bad("translation basis elements do not commute".into());
                }
            }
        }
        let tau_inv = if d2 == 0 {
            DMatrix::zeros(0, 0)
        } else {
            let svd = tau.clone().svd(false, false);
            let smin = svd.singular_values.min();
            if smin < 1e-8 {
                return bad("translation basis is linearly dependent".into());
            }
            tau.clone().try_inverse().ok_or_else(|| Error::InvalidSpec("singular lattice".into()))?
        };

        let mut spec = GroupSpec {
            name,
            d,
            d1,
            d2,
            generators,
            translation_basis,
            m0,
            coset_reps,
            base_point,
            tau_inv,
            coset_table: Vec::new(),
            conj: Vec::new(),
            coset_inverse: Vec::new(),
            generator_elements: Vec::new(),
        };
        spec.build_tables()?;
        spec.check_injective()?;
        Ok(spec)
    }

    fn build_tables(&mut self) -> Result<()> {
        let nc = self.coset_reps.len();
        for (j, c) in self.coset_reps.iter().enumerate() {
            let e = self.canonicalize(c).map_err(|_| {
                Error::InvalidSpec(format!("coset representative {j} is not recognised"))
            })?;
            if e.coset != j {
                return Err(Error::InvalidSpec(format!(
                    "coset representatives {} and {j} lie in the same coset",
                    e.coset
                )));
            }
        }
        let mut table = vec![Vec::with_capacity(nc); nc];
        for (i, ci) in self.coset_reps.iter().enumerate() {
            for cj in &self.coset_reps {
                let p = ci.compose(cj)?;
                let e = self.canonicalize(&p).map_err(|_| {
                    Error::InvalidSpec("coset representatives are not closed under products".into())
                })?;
                table[i].push(e);
            }
        }
        let mut conj = Vec::with_capacity(nc);
        let mut inverse = Vec::with_capacity(nc);
        for c in &self.coset_reps {
            let ci = c.inverse();
            inverse.push(self.canonicalize(&ci).map_err(|_| {
                Error::InvalidSpec("inverse of a coset representative is not recognised".into())
            })?);
            let mut m = vec![vec![0i64; self.d2]; self.d2];
            for (i, t) in self.translation_basis.iter().enumerate() {
                for (x, sign) in [(ci.compose(t)?.compose(c)?, 1), (c.compose(t)?.compose(&ci)?, 0)] {
                    let e = self.canonicalize(&x).map_err(|_| {
                        Error::InvalidSpec("translation subgroup is not normal".into())
                    })?;
                    if e.coset != 0 {
                        return Err(Error::InvalidSpec("translation subgroup is not normal".into()));
                    }
                    if sign == 1 {
                        for r in 0..self.d2 {
                            m[r][i] = e.exponents[r];
                        }
                    }
                }
            }
            let det = integer_det(&m);
            if det.abs() != 1 {
                return Err(Error::InvalidSpec(format!("conjugation matrix has determinant {det}")));
            }
            conj.push(m);
        }
        self.coset_table = table;
        self.conj = conj;
        self.coset_inverse = inverse;
        let gens = self
            .generators
            .iter()
            .map(|g| {
                self.canonicalize(&g.element).map_err(|_| {
                    Error::InvalidSpec(format!("generator `{}` is not in C·T", g.name))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.generator_elements = gens;
        Ok(())
    }

    fn check_injective(&self) -> Result<()> {
        let nc = self.coset_reps.len();
        let mut radius = 0i64;
        if self.d2 > 0 {
            while nc * ((2 * radius + 1) as usize).pow(self.d2 as u32) < INJECTIVITY_SAMPLE {
                radius += 1;
            }
        }
        let mut pts: Vec<DVector<f64>> = Vec::new();
        for c in 0..nc {
            for a in box_points(self.d2, radius) {
                pts.push(self.point(&CanonicalElement { coset: c, exponents: a }));
            }
        }
        pts.sort_by(|p, q| p[0].total_cmp(&q[0]));
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                if pts[j][0] - pts[i][0] > ELEMENT_TOL {
                    break;
                }
                if (&pts[i] - &pts[j]).norm() < ELEMENT_TOL {
                    return Err(Error::InvalidSpec("g -> g·x0 is not injective".into()));
                }
            }
        }
        Ok(())
    }

    pub fn coset_count(&self) -> usize {
        self.coset_reps.len()
    }

    pub fn identity(&self) -> CanonicalElement {
        CanonicalElement::identity(self.d2)
    }

    pub fn generator_elements(&self) -> &[CanonicalElement] {
        &self.generator_elements
    }

    pub fn generator(&self, name: &str) -> Option<&CanonicalElement> {
        self.generators
            .iter()
            .position(|g| g.name == name)
            .map(|i| &self.generator_elements[i])
    }

    /// `c^{-1} t^a c = t^{M_c a}`.
    pub fn conjugation_matrix(&self, coset: usize) -> &[Vec<i64>] {
        &self.conj[coset]
    }

    /// `t_1^{a_1} ··· t_{d2}^{a_{d2}}`.
    pub fn lattice_element(&self, a: &[i64]) -> Isometry {
        let mut g = Isometry::identity(self.d);
        for (t, &ai) in self.translation_basis.iter().zip(a) {
            g = g.compose(&t.pow(ai)).expect("same dimension");
        }
        g
    }

    pub fn element(&self, g: &CanonicalElement) -> Isometry {
        self.coset_reps[g.coset]
            .compose(&self.lattice_element(&g.exponents))
            .expect("same dimension")
    }

    /// `g · x0`.
    pub fn point(&self, g: &CanonicalElement) -> DVector<f64> {
        self.element(g).act(&self.base_point).expect("same dimension")
    }

    pub fn rot(&self, g: &CanonicalElement) -> DMatrix<f64> {
        self.element(g).rotation().clone()
    }

    pub fn canonicalize(&self, g: &Isometry) -> Result<CanonicalElement> {
        if g.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: g.dim() });
        }
        let (d1, d2) = (self.d1, self.d2);
        let id_d2 = DMatrix::<f64>::identity(d2, d2);
        for (ci, c) in self.coset_reps.iter().enumerate() {
            let r = c.inverse().compose(g)?;
            if (r.rotation().view((d1, d1), (d2, d2)) - &id_d2).norm() > ELEMENT_TOL {
                continue;
            }
            let af = &self.tau_inv * r.translation().rows(d1, d2);
            let a: Vec<i64> = af.iter().map(|x| x.round() as i64).collect();
            if af.iter().zip(&a).any(|(x, &n)| (x - n as f64).abs() > 1e-6) {
                continue;
            }
            let e = CanonicalElement { coset: ci, exponents: a };
            if self.element(&e).approx_eq(g, ELEMENT_TOL) {
                return Ok(e);
            }
        }
        Err(Error::NotGroupElement(format!(
            "no coset matches rotation {:?}",
            g.rotation().as_slice()
        )))
    }

    pub fn multiply(&self, a: &CanonicalElement, b: &CanonicalElement) -> CanonicalElement {
        let m = &self.conj[b.coset];
        let cc = &self.coset_table[a.coset][b.coset];
        let exponents = (0..self.d2)
            .map(|r| {
                let ma: i64 = (0..self.d2).map(|s| m[r][s] * a.exponents[s]).sum();
                cc.exponents[r] + ma + b.exponents[r]
            })
            .collect();
        CanonicalElement { coset: cc.coset, exponents }
    }

    pub fn inverse(&self, g: &CanonicalElement) -> CanonicalElement {
        let neg = CanonicalElement { coset: 0, exponents: g.exponents.iter().map(|a| -a).collect() };
        self.multiply(&neg, &self.coset_inverse[g.coset])
    }

    pub fn pow(&self, g: &CanonicalElement, n: i64) -> CanonicalElement {
        let base = if n < 0 { self.inverse(g) } else { g.clone() };
        let mut acc = self.identity();
        for _ in 0..n.unsigned_abs() {
            acc = self.multiply(&acc, &base);
        }
        acc
    }

    /// Parses a word such as `t1^2*t2^-1` or `id`.
    pub fn parse_word(&self, word: &str) -> Result<CanonicalElement> {
        let word = word.trim();
        if word.is_empty() {
            return Err(Error::InvalidRange("empty word".into()));
        }
        let mut acc = self.identity();
        for factor in word.split('*') {
            let factor = factor.trim();
            let (name, exp) = match factor.split_once('^') {
                Some((n, e)) => {
                    let e: i64 = e
                        .trim()
                        .parse()
                        .map_err(|_| Error::InvalidRange(format!("bad exponent in `{factor}`")))?;
                    (n.trim(), e)
                }
                None => (factor, 1),
            };
            let g = if name == "id" {
                self.identity()
            } else {
                self.generator(name)
                    .cloned()
                    .ok_or_else(|| Error::InvalidRange(format!("unknown generator `{name}`")))?
            };
            acc = self.multiply(&acc, &self.pow(&g, exp));
        }
        Ok(acc)
    }

    /// Number of coset blocks per lattice direction, `N / m0`.
    pub fn period_factor(&self, n: usize) -> Result<usize> {
        if n == 0 || !n.is_multiple_of(self.m0) {
            return Err(Error::InvalidPeriod { period: n, m0: self.m0 });
        }
        Ok(n / self.m0)
    }

    pub fn cn_size(&self, k: usize) -> usize {
        self.coset_count() * k.pow(self.d2 as u32)
    }

    /// Flat index of `g` in `C_N`, `N = k m0`; the first lattice direction varies slowest.
    pub fn cn_index(&self, g: &CanonicalElement, k: usize) -> usize {
        let mut idx = g.coset;
        for &a in &g.exponents {
            idx = idx * k + a.rem_euclid(k as i64) as usize;
        }
        idx
    }

    pub fn cn_element(&self, mut idx: usize, k: usize) -> CanonicalElement {
        let mut exponents = vec![0i64; self.d2];
        for r in (0..self.d2).rev() {
            exponents[r] = (idx % k) as i64;
            idx /= k;
        }
        CanonicalElement { coset: idx, exponents }
    }

    /// Distinct orbit points reachable by words of length at most `radius`.
    pub fn orbit(&self, radius: usize) -> Vec<DVector<f64>> {
        let elems = self.ball(radius);
        let mut pts: Vec<DVector<f64>> = Vec::new();
        for g in &elems {
            let p = self.point(g);
            if !pts.iter().any(|q| (q - &p).norm() < ELEMENT_TOL) {
                pts.push(p);
            }
        }
        pts
    }

    /// Elements of word length at most `radius` in generators and inverses, BFS order.
    pub fn ball(&self, radius: usize) -> Vec<CanonicalElement> {
        let mut steps: Vec<CanonicalElement> = self.generator_elements.clone();
        steps.extend(self.generator_elements.iter().map(|g| self.inverse(g)));
        let mut seen = HashSet::new();
        let mut out = vec![self.identity()];
        seen.insert(self.identity());
        let mut queue = VecDeque::from([(self.identity(), 0usize)]);
        while let Some((g, r)) = queue.pop_front() {
            if r == radius {
                continue;
            }
            for s in &steps {
                let h = self.multiply(&g, s);
                if seen.insert(h.clone()) {
                    out.push(h.clone());
                    queue.push_back((h, r + 1));
                }
            }
        }
        out
    }

    /// Whether `rot(G)` is finite, decided by searching for a period of
    /// `rot(t_i)` up to `max_order` (the coset representatives are finite).
    pub fn rotation_group_finite(&self, max_order: usize) -> bool {
        let id = DMatrix::<f64>::identity(self.d, self.d);
        self.translation_basis.iter().all(|t| {
            let r = t.rotation();
            let mut p = r.clone();
            for _ in 0..max_order {
                if (&p - &id).norm() < ELEMENT_TOL {
                    return true;
                }
                p = &p * r;
            }
            false
        })
    }

    pub fn default_sample_radius(&self) -> usize {
        2 * self.d + 1
    }

    pub fn affine_dimension(&self, sample_radius: usize) -> usize {
        let pts = self.orbit(sample_radius);
        difference_rank(&pts, &self.base_point)
    }

    pub fn has_property_1(&self, r: &RangeSet) -> bool {
        if !r.elements.iter().any(|g| g.is_identity()) {
            return false;
        }
        let daff = self.affine_dimension(self.default_sample_radius());
        let pts: Vec<DVector<f64>> = r.elements.iter().map(|g| self.point(g)).collect();
        difference_rank(&pts, &self.base_point) == daff
    }

    /// Searches `R' ∈ {{id} ∪ gens, {id} ∪ gens⁻¹, {id} ∪ gens ∪ gens⁻¹}` and
    /// `R'' ⊆ R` with Property 1 and `R' R'' ⊆ R`. Property 1 is monotone in
    /// `R''`, so it suffices to test the largest admissible `R''`.
    pub fn has_property_2(&self, r: &RangeSet) -> bool {
        let gens = &self.generator_elements;
        let invs: Vec<CanonicalElement> = gens.iter().map(|g| self.inverse(g)).collect();
        let both: Vec<CanonicalElement> = gens.iter().chain(&invs).cloned().collect();
        let members: HashSet<&CanonicalElement> = r.elements.iter().collect();
        for rp in [gens.clone(), invs, both] {
            let admissible: Vec<CanonicalElement> = r
                .elements
                .iter()
                .filter(|h| rp.iter().all(|g| members.contains(&self.multiply(g, h))))
                .cloned()
                .collect();
            let sub = RangeSet { elements: admissible, labels: Vec::new() };
            if self.has_property_1(&sub) {
                return true;
            }
        }
        false
    }
}

fn difference_rank(pts: &[DVector<f64>], x0: &DVector<f64>) -> usize {
    if pts.is_empty() {
        return 0;
    }
    let cols: Vec<DVector<f64>> = pts.iter().map(|p| p - x0).collect();
    let m = DMatrix::from_columns(&cols);
    let sv = m.svd(false, false).singular_values;
    sv.iter().filter(|&&s| s > 1e-8).count()
}

fn integer_det(m: &[Vec<i64>]) -> i64 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let f = DMatrix::from_fn(n, n, |i, j| m[i][j] as f64);
    f.determinant().round() as i64
}

/// All integer vectors in `[-r, r]^dim`, lexicographic.
pub(crate) fn box_points(dim: usize, r: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        let mut next = Vec::new();
        for p in &out {
            for a in -r..=r {
                let mut q = p.clone();
                q.push(a);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// A finite interaction range `R ⊂ G`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeSet {
    pub elements: Vec<CanonicalElement>,
    pub labels: Vec<String>,
}

impl RangeSet {
    pub fn new(elements: Vec<CanonicalElement>) -> Result<Self> {
        let set: HashSet<&CanonicalElement> = elements.iter().collect();
        if set.len() != elements.len() {
            return Err(Error::InvalidRange("duplicate element".into()));
        }
        if elements.is_empty() {
            return Err(Error::InvalidRange("empty range".into()));
        }
        let labels = elements.iter().map(|e| format!("{e:?}")).collect();
        Ok(RangeSet { elements, labels })
    }

    /// Comma-separated list of words, e.g. `"id,t,t^2"`.
    pub fn parse(spec: &GroupSpec, expr: &str) -> Result<Self> {
        let mut elements = Vec::new();
        let mut labels = Vec::new();
        for w in expr.split(',') {
            let e = spec.parse_word(w)?;
            if elements.contains(&e) {
                return Err(Error::InvalidRange(format!("duplicate element `{}`", w.trim())));
            }
            elements.push(e);
            labels.push(w.trim().to_string());
        }
        Ok(RangeSet { elements, labels })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains_identity(&self) -> bool {
        self.elements.iter().any(|g| g.is_identity())
    }

    pub fn without_identity(&self) -> RangeSet {
        let (elements, labels) = self
            .elements
            .iter()
            .zip(&self.labels)
            .filter(|(g, _)| !g.is_identity())
            .map(|(g, l)| (g.clone(), l.clone()))
            .unzip();
        RangeSet { elements, labels }
    }
}
