//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use objective_korn::catalog::{self, builtin_names, CatalogEntry};
use objective_korn::euclid::{
    rank_one_skew_ratio, rotation_2d, simultaneous_quasidiagonalize, turan_lower_bound_check, QuasiBlocks,
    RANK_ONE_SKEW_CONSTANT,
};
use objective_korn::fields::PeriodicDisplacement;
use objective_korn::fourier::{coset_slice, periodic_characters, plancherel_residual, translation_property_residual};
use objective_korn::group::{GroupSpec, RangeSet};
use objective_korn::korn::{self, Diagnosis, Side, WeightVariant};
use objective_korn::seminorms::{
    build_subspace, kernel, periodic_subspace_dim, SeminormKind, SeminormOperator, SubspaceKind,
};

type Outcome = Result<String, String>;

const SUBSPACES: [SubspaceKind; 7] = [
    SubspaceKind::Trans,
    SubspaceKind::Rot,
    SubspaceKind::Rot0,
    SubspaceKind::Rot00,
    SubspaceKind::Iso,
    SubspaceKind::Iso0,
    SubspaceKind::Iso00,
];

fn entry(name: &str) -> CatalogEntry {
    catalog::load(name).expect("builtin entry")
}

fn range(e: &CatalogEntry, name: &str) -> RangeSet {
    e.range(name).expect("catalog range")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_p: f64 = 0.0;
    let mut worst_t: f64 = 0.0;
    for name in ["chain", "zigzag", "helix"] {
        let spec = entry(name).spec;
        let m0 = spec.m0;
        for trial in 0..100u64 {
            let n = m0 * rng.gen_range(1..=64 / m0);
            let u = PeriodicDisplacement::random(spec.clone(), n, 1000 + trial).map_err(err)?;
            let v = PeriodicDisplacement::random(spec.clone(), n, 5000 + trial).map_err(err)?;
            let c = rng.gen_range(0..spec.coset_count());
            let f = coset_slice(&u, c).map_err(err)?;
            let g = coset_slice(&v, c).map_err(err)?;
            worst_p = worst_p.max(plancherel_residual(&f, &g).map_err(err)?);
            let chars = periodic_characters(&spec, n).map_err(err)?;
            let chi = &chars[rng.gen_range(0..chars.len())];
            let b: Vec<i64> = (0..spec.d2).map(|_| rng.gen_range(-70..=70)).collect();
            worst_t = worst_t.max(translation_property_residual(&f, &b, chi).map_err(err)?);
        }
    }
    ensure(worst_p < 1e-10 && worst_t < 1e-10, || {
        format!("plancherel {worst_p:.2e}, translation {worst_t:.2e}")
    })?;
    Ok(format!("max plancherel residual {worst_p:.2e}, max translation residual {worst_t:.2e}"))
}

fn criterion_2() -> Outcome {
    let mut checked = 0;
    for name in builtin_names() {
        let e = entry(name);
        let spec = &e.spec;
        let daff = spec.affine_dimension(spec.default_sample_radius());
        for rname in e.ranges.keys() {
            let r = range(&e, rname);
            if !spec.has_property_1(&r) {
                continue;
            }
            for kind in SUBSPACES {
                let rank = build_subspace(spec, &r, kind).map_err(err)?.rank();
                let want = kind.formula_dim(spec.d, spec.d1, spec.d2, daff);
                ensure(rank == want, || format!("{name}/{rname} {kind:?}: rank {rank}, formula {want}"))?;
                checked += 1;
            }
        }
    }
    let mut kernels = Vec::new();
    for name in ["chain", "zigzag", "square-lattice"] {
        let e = entry(name);
        let r = range(&e, "property2");
        ensure(e.spec.has_property_2(&r), || format!("{name}: reference range lacks Property 2"))?;
        for n in [4, 8] {
            let dim = kernel(&e.spec, &r, SeminormKind::PatchIso, n).map_err(err)?.dim;
            ensure(dim == 2, || format!("{name} N={n}: kernel dim {dim}, want 2"))?;
        }
        kernels.push(format!("{name}=2"));
    }
    Ok(format!("{checked} subspace ranks match; kernel dims {}", kernels.join(", ")))
}

fn criterion_3() -> Outcome {
    let e = entry("helix");
    let spec = &e.spec;
    let r = range(&e, "property1");
    let rot0 = build_subspace(spec, &r, SubspaceKind::Rot0).map_err(err)?.rank();
    let rot00 = build_subspace(spec, &r, SubspaceKind::Rot00).map_err(err)?.rank();
    ensure(rot0 == 3 && rot00 == 1, || format!("Rot0 {rot0}, Rot00 {rot00}"))?;
    for n in [4, 8, 16] {
        let t = periodic_subspace_dim(spec, SubspaceKind::Trans, n).map_err(err)?;
        ensure(t == 1, || format!("N={n}: dim(Trans ∩ per) = {t}"))?;
    }
    Ok("dim Rot0 = 3, dim Rot00 = 1, dim(Trans ∩ per) = 1 at N = 4, 8, 16".into())
}

fn criterion_4() -> Outcome {
    let pairs = [
        (SeminormKind::PatchIso, SeminormKind::GradRot),
        (SeminormKind::PatchIso0, SeminormKind::GradRot0),
        (SeminormKind::PatchIso00, SeminormKind::GradRot00),
    ];
    let mut violations = 0;
    let mut fields = 0;
    for name in ["chain", "zigzag"] {
        let e = entry(name);
        let spec = &e.spec;
        let r = range(&e, "property2");
        let c = (2.0 * r.without_identity().len() as f64).sqrt();
        let ops: Vec<_> = pairs
            .iter()
            .map(|&(p, g)| Ok((SeminormOperator::new(spec, &r, p)?, SeminormOperator::new(spec, &r, g)?)))
            .collect::<objective_korn::Result<_>>()
            .map_err(err)?;
        for trial in 0..200u64 {
            let n = [4, 8, 16][trial as usize % 3];
            let u = PeriodicDisplacement::random(spec.clone(), n, 77 + trial).map_err(err)?;
            fields += 1;
            for (p, g) in &ops {
                let (a, b) = (p.value(&u), g.value(&u));
                if a > b + 1e-9 || b > c * a + 1e-9 {
                    violations += 1;
                }
            }
        }
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok(format!("{fields} fields, 3 seminorm pairs each, zero violations"))
}

fn criterion_5() -> Outcome {
    let periods = [4, 8, 16, 32, 64];
    let mut parts = Vec::new();
    for name in ["chain", "zigzag", "helix"] {
        let e = entry(name);
        let r = range(&e, "property2");
        let res = korn::sweep(
            &e.spec,
            &Side::new(r.clone(), SeminormKind::PatchIso),
            &Side::new(r, SeminormKind::PatchIso0),
            &periods,
        )
        .map_err(err)?;
        ensure(res.diagnosis == Diagnosis::Bounded && res.exponent < 0.2, || {
            format!("{name}: {} exponent {:.4}", res.diagnosis.label(), res.exponent)
        })?;
        parts.push(format!("{name} {:.1e}", res.exponent));
    }
    Ok(format!("BOUNDED, exponents: {}", parts.join(", ")))
}

fn criterion_6() -> Outcome {
    let e = entry("chain");
    let spec = &e.spec;
    let r = range(&e, "property2");
    let a = Side::new(r.clone(), SeminormKind::PatchIso);
    let b = Side::new(r, SeminormKind::PatchIso00);
    let ns = [8usize, 16, 32, 64, 128];
    let ratios = ns
        .iter()
        .map(|&n| korn::rayleigh_ratio(spec, &a, &b, &korn::buckling_mode(spec, n)?))
        .collect::<objective_korn::Result<Vec<f64>>>()
        .map_err(err)?;
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = korn::loglog_slope(&xs, &ratios);
    ensure((1.6..=2.4).contains(&slope), || format!("buckling exponent {slope:.4}"))?;
    let dense = korn::sweep(spec, &a, &b, &[8, 16, 32, 64]).map_err(err)?;
    ensure(dense.diagnosis == Diagnosis::Growing, || format!("dense sweep {}", dense.diagnosis.label()))?;
    Ok(format!("buckling exponent {slope:.3}, dense c_max exponent {:.3}", dense.exponent))
}

fn criterion_7() -> Outcome {
    let mut parts = Vec::new();
    for name in ["chain", "zigzag"] {
        let spec = entry(name).spec;
        let mut spreads: Vec<Vec<f64>> = Vec::new();
        for n in [8, 16, 32, 64] {
            let res = korn::fourier_check(&spec, n, 100, 2024).map_err(err)?;
            for a in &res {
                ensure(a.min_ratio > 0.0 && a.max_ratio.is_finite(), || format!("{name} N={n}: {a:?}"))?;
            }
            spreads.push(res.iter().map(|a| a.spread()).collect());
        }
        for (j, variant) in ["grad", "seminorm"].iter().enumerate() {
            let (s8, s64) = (spreads[0][j], spreads[3][j]);
            ensure(s64 <= 3.0 * s8, || format!("{name} {variant}: spread {s64:.3} at N=64 vs {s8:.3} at N=8"))?;
            parts.push(format!("{name}/{variant} {s8:.2}→{s64:.2}"));
        }
    }
    let chain = entry("chain").spec;
    let u = PeriodicDisplacement::from_fn(chain.clone(), 2, |g| {
        DVector::from_vec(vec![if g.exponents[0].rem_euclid(2) == 0 { 1.0 } else { -1.0 }, 0.0])
    })
    .map_err(err)?;
    let grad = korn::fourier_weighted_sum(&u, WeightVariant::Grad).map_err(err)?;
    let semi = korn::fourier_weighted_sum(&u, WeightVariant::Seminorm).map_err(err)?;
    ensure((grad - 0.25).abs() < 1e-12 && (semi - 0.0625).abs() < 1e-12, || {
        format!("spot values {grad}, {semi}")
    })?;
    Ok(format!("spreads N=8→64: {}; spot values 1/4, 1/16", parts.join(", ")))
}

fn criterion_8() -> Outcome {
    let e = entry("chain");
    let spec = &e.spec;
    let r1 = range(&e, "pair");
    let r2 = range(&e, "property2");
    for n in [2, 4, 8] {
        let rep = korn::compare(
            spec,
            &Side::new(r1.clone(), SeminormKind::PatchIso),
            &Side::new(r2.clone(), SeminormKind::PatchIso),
            n,
        )
        .map_err(err)?;
        ensure(rep.dim_ker_a == n + 1 && rep.dim_ker_b == 2 && !rep.kernels_equal, || {
            format!("N={n}: dims {} vs {}, equal {}", rep.dim_ker_a, rep.dim_ker_b, rep.kernels_equal)
        })?;
    }
    Ok("kernel dims N+1 vs 2 at N = 2, 4, 8; kernels differ".into())
}

fn complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)).qr().q()
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut lemma_min = f64::INFINITY;
    for i in 0..10_000 {
        let n = rng.gen_range(1..=4);
        let x: Vec<Complex64> = (0..n).map(|_| complex(&mut rng)).collect();
        let y: Vec<Complex64> = (0..n).map(|_| complex(&mut rng)).collect();
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let a = if i % 4 == 0 {
            // cancels the skew part of x yᵀ exactly
            DMatrix::from_fn(n, n, |p, q| -(x[p] * y[q] - x[q] * y[p]) / 2.0)
        } else {
            let m = DMatrix::from_fn(n, n, |_, _| complex(&mut rng));
            (&m - m.transpose()) * Complex64::from(scale)
        };
        if n == 1 && i % 4 == 0 && x[0] * y[0] == Complex64::new(0.0, 0.0) {
            continue;
        }
        lemma_min = lemma_min.min(rank_one_skew_ratio(&x, &y, &a).map_err(err)?);
    }
    ensure(lemma_min >= RANK_ONE_SKEW_CONSTANT - 1e-12, || format!("lemma ratio {lemma_min}"))?;

    let mut turan_fail = 0;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=4);
        let b: Vec<Complex64> = (0..n).map(|_| complex(&mut rng)).collect();
        let z: Vec<Complex64> = (0..n)
            .map(|_| Complex64::from_polar(rng.gen_range(0.2..2.0), rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect();
        let m = rng.gen_range(0..20);
        if !turan_lower_bound_check(&b, &z, m).map_err(err)? {
            turan_fail += 1;
        }
    }
    ensure(turan_fail == 0, || format!("{turan_fail} Turán violations"))?;

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = rng.gen_range(0..=2);
        let q = rng.gen_range(if p == 0 { 1 } else { 0 }..=2);
        let dim = p + 2 * q;
        let members = rng.gen_range(1..=3);
        let basis = random_orthogonal(&mut rng, dim);
        let family: Vec<DMatrix<f64>> = (0..members)
            .map(|_| {
                let mut m = DMatrix::zeros(dim, dim);
                for i in 0..p {
                    m[(i, i)] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                }
                for j in 0..q {
                    let r = p + 2 * j;
                    m.view_mut((r, r), (2, 2)).copy_from(&rotation_2d(rng.gen_range(0.1..3.0)));
                }
                &basis * m * basis.transpose()
            })
            .collect();
        let qd = simultaneous_quasidiagonalize(&family).map_err(err)?;
        for (a, blocks) in family.iter().zip(&qd.members) {
            let rebuilt = &qd.q * QuasiBlocks::assemble(blocks) * qd.q.transpose();
            worst = worst.max((a - rebuilt).norm());
        }
    }
    ensure(worst < 1e-8, || format!("quasidiagonal reconstruction error {worst:.2e}"))?;
    Ok(format!(
        "lemma min ratio {lemma_min:.4} ≥ {RANK_ONE_SKEW_CONSTANT:.4}; Turán 1e4 ok; quasidiagonal error {worst:.1e}"
    ))
}

/// Least-squares distance of each patch to `{rot(h)ᵀ(b + S(h·x0 − x0))}`,
/// solved through the normal equations in the parameters `(b, S)`.
fn oracle_value_squared(spec: &GroupSpec, u: &PeriodicDisplacement, r: &RangeSet, kind: SeminormKind) -> f64 {
    let d = spec.d;
    let d1 = spec.d1;
    let with_b = matches!(kind, SeminormKind::PatchIso | SeminormKind::PatchIso0 | SeminormKind::PatchIso00);
    let allowed = |i: usize, j: usize| match kind {
        SeminormKind::PatchIso | SeminormKind::GradRot => true,
        SeminormKind::PatchIso0 | SeminormKind::GradRot0 => i < d1,
        SeminormKind::PatchIso00 | SeminormKind::GradRot00 => i < d1 && j < d1,
        SeminormKind::GradPlain => false,
    };
    let mut params: Vec<DMatrix<f64>> = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            if allowed(i, j) {
                let mut s = DMatrix::zeros(d, d);
                s[(i, j)] = 1.0;
                s[(j, i)] = -1.0;
                params.push(s);
            }
        }
    }
    let rows = d * r.len();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    if with_b {
        for j in 0..d {
            cols.push(DVector::from_iterator(rows, r.elements.iter().flat_map(|h| spec.rot(h).row(j).iter().copied().collect::<Vec<_>>())));
        }
    }
    for s in &params {
        let mut c = DVector::zeros(rows);
        for (i, h) in r.elements.iter().enumerate() {
            let v = spec.rot(h).transpose() * (s * (spec.point(h) - &spec.base_point));
            c.rows_mut(i * d, d).copy_from(&v);
        }
        cols.push(c);
    }
    let a = if cols.is_empty() { DMatrix::zeros(rows, 0) } else { DMatrix::from_columns(&cols) };
    let normal = a.transpose() * &a;
    let eig = (normal.nrows() > 0).then(|| SymmetricEigen::new(normal.clone()));
    let lmax = eig.as_ref().map_or(0.0, |e| e.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    let k = u.k();
    let mut total = 0.0;
    for idx in 0..u.sites() {
        let g = spec.cn_element(idx, k);
        let ug = u.at(&g);
        let mut p = DVector::zeros(rows);
        for (i, h) in r.elements.iter().enumerate() {
            let mut x = u.at(&spec.multiply(&g, h));
            if kind != SeminormKind::PatchIso && kind != SeminormKind::PatchIso0 && kind != SeminormKind::PatchIso00 {
                x -= spec.rot(h).transpose() * &ug;
            }
            p.rows_mut(i * d, d).copy_from(&x);
        }
        let rhs = a.transpose() * &p;
        let mut theta = DVector::zeros(a.ncols());
        if let Some(eig) = &eig {
            for (j, lam) in eig.eigenvalues.iter().enumerate() {
                if *lam > 1e-12 * lmax {
                    let v = eig.eigenvectors.column(j);
                    theta += v * (v.dot(&rhs) / lam);
                }
            }
        }
        total += (&p - &a * theta).norm_squared();
    }
    total / u.sites() as f64
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let names: Vec<&str> = builtin_names().collect();
    let mut worst: f64 = 0.0;
    for trial in 0..50u64 {
        let e = entry(names[trial as usize % names.len()]);
        let spec = e.spec.clone();
        let rnames: Vec<&String> = e.ranges.keys().collect();
        let rname = rnames[rng.gen_range(0..rnames.len())];
        let r = range(&e, rname);
        let kind = SeminormKind::ALL[rng.gen_range(0..SeminormKind::ALL.len())];
        let choices: Vec<usize> = (1..=8).filter(|n| n % spec.m0 == 0).collect();
        let n = choices[rng.gen_range(0..choices.len())];
        let u = PeriodicDisplacement::random(Arc::clone(&spec), n, 300 + trial).map_err(err)?;
        let lib = SeminormOperator::new(&spec, &r, kind).map_err(err)?.value(&u);
        let oracle = oracle_value_squared(&spec, &u, &r, kind).max(0.0).sqrt();
        let diff = (lib - oracle).abs();
        worst = worst.max(diff);
        ensure(diff < 1e-10, || format!("{} {rname} {kind} N={n}: {lib} vs oracle {oracle}", spec.name))?;
    }
    Ok(format!("50 instances, max |difference| {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("plancherel and translation lemma", criterion_1),
        ("dimension formulas and kernel dims", criterion_2),
        ("helix ground truths", criterion_3),
        ("gradient seminorm bounds", criterion_4),
        ("korn equivalence sweep", criterion_5),
        ("non-equivalence under buckling", criterion_6),
        ("fourier characterizations", criterion_7),
        ("kernel counterexample", criterion_8),
        ("appendix inequalities", criterion_9),
        ("least-squares oracle", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg} [{secs:.2}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
