use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use objective_korn::catalog;
use objective_korn::euclid::{
    rank_one_skew_ratio, rotation_2d, turan_lower_bound_check, Isometry, RANK_ONE_SKEW_CONSTANT,
};
use objective_korn::fields::PeriodicDisplacement;
use objective_korn::group::{CanonicalElement, GroupSpec, RangeSet};
use objective_korn::seminorms::{kernel, SeminormKind, SeminormOperator};

const NAMES: [&str; 5] = ["chain", "zigzag", "helix", "square-lattice", "c4-vs-klein"];

fn spec(i: usize) -> Arc<GroupSpec> {
    catalog::load(NAMES[i % NAMES.len()]).unwrap().spec
}

fn reference_range(i: usize) -> (Arc<GroupSpec>, RangeSet) {
    let e = catalog::load(NAMES[i % NAMES.len()]).unwrap();
    let name = if e.ranges.contains_key("property2") { "property2" } else { "whole" };
    (e.spec.clone(), e.range(name).unwrap())
}

fn element(s: &GroupSpec, coset: usize, a: &[i64]) -> CanonicalElement {
    CanonicalElement { coset: coset % s.coset_count(), exponents: a[..s.d2].to_vec() }
}

fn isometry_2d(theta: f64, flip: bool, b: (f64, f64)) -> Isometry {
    let mut r = rotation_2d(theta);
    if flip {
        r *= DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    }
    Isometry::new(r, DVector::from_vec(vec![b.0, b.1])).unwrap()
}

fn iso_strategy() -> impl Strategy<Value = Isometry> {
    (0.0..std::f64::consts::TAU, any::<bool>(), -5.0..5.0f64, -5.0..5.0f64).prop_map(|(t, f, x, y)| isometry_2d(t, f, (x, y)))
}

fn cplx() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

/// Period for structure `i` drawn from small multiples of `m0`.
fn period(s: &GroupSpec, j: usize) -> usize {
    let max = if s.d2 == 2 { 4 } else { 8 };
    let choices: Vec<usize> = (1..=max).filter(|n| n % s.m0 == 0).collect();
    choices[j % choices.len()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compose_is_associative(a in iso_strategy(), b in iso_strategy(), c in iso_strategy()) {
        let l = a.compose(&b).unwrap().compose(&c).unwrap();
        let r = a.compose(&b.compose(&c).unwrap()).unwrap();
        prop_assert!(l.approx_eq(&r, 1e-9));
        let x = DVector::from_vec(vec![0.3, -1.2]);
        let lhs = a.compose(&b).unwrap().act(&x).unwrap();
        let rhs = a.act(&b.act(&x).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-9);
        prop_assert!(a.compose(&a.inverse()).unwrap().approx_eq(&Isometry::identity(2), 1e-9));
    }

    #[test]
    fn multiply_agrees_with_isometries(i in 0usize..5, c1 in 0usize..4, c2 in 0usize..4,
                                        a in prop::array::uniform2(-4i64..=4), b in prop::array::uniform2(-4i64..=4)) {
        let s = spec(i);
        let g = element(&s, c1, &a);
        let h = element(&s, c2, &b);
        let prod = s.multiply(&g, &h);
        let iso = s.element(&g).compose(&s.element(&h)).unwrap();
        prop_assert_eq!(s.canonicalize(&iso).unwrap(), prod);
        prop_assert!(s.multiply(&g, &s.inverse(&g)).is_identity());
        prop_assert_eq!(s.canonicalize(&s.element(&g)).unwrap(), g);
    }

    #[test]
    fn cn_index_roundtrip(i in 0usize..5, j in 0usize..8, idx in 0usize..10_000) {
        let s = spec(i);
        let k = s.period_factor(period(&s, j)).unwrap();
        let idx = idx % s.cn_size(k);
        prop_assert_eq!(s.cn_index(&s.cn_element(idx, k), k), idx);
    }

    #[test]
    fn seminorm_ordering(i in 0usize..5, j in 0usize..8, seed in any::<u64>()) {
        let (s, r) = reference_range(i);
        let u = PeriodicDisplacement::random(s.clone(), period(&s, j), seed).unwrap();
        let v = |k| SeminormOperator::new(&s, &r, k).unwrap().value(&u);
        let chain = [SeminormKind::PatchIso, SeminormKind::PatchIso0, SeminormKind::PatchIso00, SeminormKind::GradPlain];
        for w in chain.windows(2) {
            prop_assert!(v(w[0]) <= v(w[1]) + 1e-9, "{} > {}", w[0], w[1]);
        }
        prop_assert!(v(SeminormKind::GradRot) <= v(SeminormKind::GradRot0) + 1e-9);
        prop_assert!(v(SeminormKind::GradRot0) <= v(SeminormKind::GradRot00) + 1e-9);
        prop_assert!(v(SeminormKind::GradRot00) <= v(SeminormKind::GradPlain) + 1e-9);
    }

    #[test]
    fn gradient_kinds_ignore_identity(i in 0usize..5, j in 0usize..8, seed in any::<u64>()) {
        let (s, r) = reference_range(i);
        let r0 = r.without_identity();
        let u = PeriodicDisplacement::random(s.clone(), period(&s, j), seed).unwrap();
        for k in SeminormKind::ALL.into_iter().filter(|k| k.is_gradient()) {
            let a = SeminormOperator::new(&s, &r, k).unwrap().value(&u);
            let b = SeminormOperator::new(&s, &r0, k).unwrap().value(&u);
            prop_assert!((a - b).abs() < 1e-10, "{}: {} vs {}", k, a, b);
        }
    }

    #[test]
    fn seminorm_is_a_seminorm(i in 0usize..5, j in 0usize..8, seed in any::<u64>(), lam in -3.0..3.0f64, kind in 0usize..7) {
        let (s, r) = reference_range(i);
        let n = period(&s, j);
        let kind = SeminormKind::ALL[kind];
        let op = SeminormOperator::new(&s, &r, kind).unwrap();
        let u = PeriodicDisplacement::random(s.clone(), n, seed).unwrap();
        let v = PeriodicDisplacement::random(s.clone(), n, seed ^ 0xabcd).unwrap();
        let sum = u.linear_combination(1.0, &v, 1.0).unwrap();
        prop_assert!(op.value(&sum) <= op.value(&u) + op.value(&v) + 1e-9);
        let scaled = u.linear_combination(lam, &v, 0.0).unwrap();
        prop_assert!((op.value(&scaled) - lam.abs() * op.value(&u)).abs() < 1e-9);
        // lifting to a multiple of the period changes nothing
        prop_assert!((op.value(&u.lift(2 * n).unwrap()) - op.value(&u)).abs() < 1e-9);
    }

    #[test]
    fn kernel_vectors_are_invisible(i in 0usize..3, seed in any::<u64>()) {
        let (s, r) = reference_range(i);
        let n = 4;
        let ker = kernel(&s, &r, SeminormKind::PatchIso, n).unwrap();
        let op = SeminormOperator::new(&s, &r, SeminormKind::PatchIso).unwrap();
        let u = PeriodicDisplacement::random(s.clone(), n, seed).unwrap();
        for b in &ker.basis {
            prop_assert!(op.value(b) < 1e-6);
            let moved = u.linear_combination(1.0, b, 3.0).unwrap();
            prop_assert!((op.value(&moved) - op.value(&u)).abs() < 1e-6);
        }
    }

    #[test]
    fn rank_one_skew_lemma(n in 1usize..=4, xs in prop::collection::vec(cplx(), 4), ys in prop::collection::vec(cplx(), 4),
                           m in prop::collection::vec(cplx(), 16), scale in -3.0..3.0f64) {
        let a = DMatrix::from_fn(n, n, |i, j| (m[i * 4 + j] - m[j * 4 + i]) * 10f64.powf(scale));
        if let Ok(ratio) = rank_one_skew_ratio(&xs[..n], &ys[..n], &a) {
            prop_assert!(ratio >= RANK_ONE_SKEW_CONSTANT - 1e-12);
        }
    }

    #[test]
    fn turan_bound(n in 1usize..=4, b in prop::collection::vec(cplx(), 4), r in prop::collection::vec(0.1..3.0f64, 4),
                   phi in prop::collection::vec(0.0..std::f64::consts::TAU, 4), m in 0u32..30) {
        let z: Vec<Complex64> = (0..n).map(|j| Complex64::from_polar(r[j], phi[j])).collect();
        if let Ok(ok) = turan_lower_bound_check(&b[..n], &z, m) {
            prop_assert!(ok);
        }
    }
}
