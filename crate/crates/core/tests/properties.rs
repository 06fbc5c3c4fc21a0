use proptest::prelude::*;
use quasicorr::correlations::{npoint_correlation, GaussianTestFunction};
use quasicorr::cyclefunc::estimate_a;
use quasicorr::modelset::{generate_patch, HullPoint};
use quasicorr::numeric::dot;
use quasicorr::scheme::{preset, ModuleVector, PRESETS, TAU};
use quasicorr::spectrum::{bombieri_taylor, enumerate_spectrum, SpectrumParams};
use quasicorr::{Complex64, Cycle, Window};

fn coords(n: usize) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-50i64..=50, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_linear(name in prop::sample::select(PRESETS), seed in any::<u64>()) {
        let s = preset(name).unwrap();
        let n = s.rank();
        let mut rng = quasicorr::rng::SeededRng::new(seed);
        let mut draw = || (0..n).map(|_| rng.index(101) as i64 - 50).collect::<Vec<_>>();
        let (a, b) = (ModuleVector::physical(draw()), ModuleVector::physical(draw()));
        let sum = s.phys_coords(&(&a + &b)).unwrap();
        let pa = s.phys_coords(&a).unwrap();
        let pb = s.phys_coords(&b).unwrap();
        for i in 0..s.d() {
            prop_assert!((sum[i] - pa[i] - pb[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn dual_pairing_is_integral(m in coords(2), k in coords(2)) {
        let s = preset("fibonacci").unwrap();
        let dual = s.dual().unwrap();
        let x = s.full_coords(&ModuleVector::physical(m)).unwrap();
        let y = dual.full_coords(&ModuleVector::fourier(k)).unwrap();
        let p = dot(&x, &y);
        prop_assert!((p - p.round()).abs() < 1e-9);
    }

    #[test]
    fn dual_pairing_is_integral_in_four_dimensions(m in coords(4), k in coords(4)) {
        let s = preset("ammann-beenker").unwrap();
        let x = s.full_coords(&ModuleVector::physical(m)).unwrap();
        let y = s.dual().unwrap().full_coords(&ModuleVector::fourier(k)).unwrap();
        let p = dot(&x, &y);
        prop_assert!((p - p.round()).abs() < 1e-9);
    }

    #[test]
    fn bombieri_taylor_is_hermitian(k in -6.0f64..6.0, u in -0.5f64..0.5) {
        let s = preset("fibonacci").unwrap();
        let w = Window::for_preset("fibonacci").unwrap();
        let p = generate_patch(&s, &w, &HullPoint::new(vec![u], vec![0.123]), 300.0).unwrap();
        prop_assert_eq!(bombieri_taylor(&p, &[-k]).unwrap(), bombieri_taylor(&p, &[k]).unwrap().conj());
    }

    #[test]
    fn patches_are_nested(r in 20.0f64..200.0, grow in 1.0f64..100.0, v in 0.01f64..1.6) {
        let s = preset("fibonacci").unwrap();
        let w = Window::for_preset("fibonacci").unwrap();
        let hull = HullPoint::new(vec![0.0], vec![v]);
        let (Ok(small), Ok(big)) = (generate_patch(&s, &w, &hull, r), generate_patch(&s, &w, &hull, r + grow)) else {
            return Ok(());
        };
        let cut: Vec<_> = big.points.iter().filter(|p| p.x[0].abs() < r / 2.0).cloned().collect();
        prop_assert_eq!(small.points, cut);
    }

    #[test]
    fn translated_hull_translates_points(u in -3.0f64..3.0, v in 0.01f64..1.6) {
        let s = preset("fibonacci").unwrap();
        let w = Window::for_preset("fibonacci").unwrap();
        let r = 100.0;
        let (Ok(moved), Ok(base)) = (
            generate_patch(&s, &w, &HullPoint::new(vec![u], vec![v]), r),
            generate_patch(&s, &w, &HullPoint::new(vec![0.0], vec![v]), r),
        ) else {
            return Ok(());
        };
        let inside = |x: f64| x.abs() < r / 2.0 && (x - u).abs() < r / 2.0;
        let a: Vec<_> = moved.points.iter().filter(|p| inside(p.x[0])).map(|p| p.m.clone()).collect();
        let b: Vec<_> = base.points.iter().filter(|p| inside(p.x[0] + u)).map(|p| p.m.clone()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn correlation_is_linear(re in -3.0f64..3.0, im in -3.0f64..3.0, c in 0.3f64..3.0) {
        let s = preset("fibonacci").unwrap();
        let w = Window::for_preset("fibonacci").unwrap();
        let p = generate_patch(&s, &w, &HullPoint::new(vec![0.0], vec![0.3]), 200.0).unwrap();
        let g = GaussianTestFunction::unit(vec![c], 0.2).unwrap();
        let mut h = g.clone();
        h.amplitude = Complex64::new(re, im);
        let base = npoint_correlation(&p, &[g]).unwrap().value;
        let scaled = npoint_correlation(&p, &[h]).unwrap().value;
        prop_assert!((scaled - base * Complex64::new(re, im)).norm() <= 1e-12 * (1.0 + scaled.norm()));
    }

    #[test]
    fn cycle_group_laws(a in prop::collection::vec(-3i64..=3, 0..6), b in prop::collection::vec(-3i64..=3, 0..6), c in prop::collection::vec(-3i64..=3, 0..6)) {
        let close = |v: Vec<i64>| {
            let s: i64 = v.iter().sum();
            let mut e: Vec<Vec<i64>> = v.into_iter().map(|x| vec![x]).collect();
            e.push(vec![-s]);
            Cycle::from_coords(&e).unwrap()
        };
        let (x, y, z) = (close(a), close(b), close(c));
        let xy_z = x.concat(&y).unwrap().concat(&z).unwrap().reduce();
        let x_yz = x.concat(&y.concat(&z).unwrap()).unwrap().reduce();
        prop_assert_eq!(&xy_z, &x_yz);
        prop_assert_eq!(x.concat(&y).unwrap().reduce(), y.concat(&x).unwrap().reduce());
        prop_assert_eq!(Cycle::empty().concat(&x).unwrap().reduce(), x.reduce());
        prop_assert!(x.concat(&x.inverse()).unwrap().reduce().is_empty());
        prop_assert_eq!(x.concat(&y).unwrap().reduce(), x.reduce().concat(&y.reduce()).unwrap().reduce());
        prop_assert_eq!(x.reduce().reduce(), x.reduce());
    }
}

#[test]
fn dual_is_an_involution() {
    for name in PRESETS {
        let s = preset(name).unwrap();
        let back = s.dual().unwrap().dual().unwrap();
        assert!((back.basis() - s.basis()).amax() < 1e-12, "{name}");
        assert_eq!(back.side(), s.side());
    }
}

#[test]
fn minimal_gap_is_stable() {
    let s = preset("fibonacci").unwrap();
    let w = Window::for_preset("fibonacci").unwrap();
    let gaps: Vec<f64> = [100.0, 1000.0, 10_000.0]
        .iter()
        .map(|&r| generate_patch(&s, &w, &HullPoint::new(vec![0.0], vec![0.3]), r).unwrap().min_separation())
        .collect();
    for g in &gaps {
        assert!((g - 1.0).abs() < 1e-9, "{gaps:?}");
    }
}

#[test]
fn smaller_thresholds_give_supersets() {
    let s = preset("fibonacci").unwrap();
    let w = Window::for_preset("fibonacci").unwrap();
    let mut prev: Option<Vec<ModuleVector>> = None;
    for eps in [1e-2, 1e-3, 1e-4, 1e-5] {
        let params = SpectrumParams { k_max: 3.0, eps_bragg: eps, eps_ext: 1e-12, cap: 1 << 22 };
        let t = enumerate_spectrum(&s, &w, params).unwrap();
        let ks: Vec<ModuleVector> = t.records.iter().map(|r| r.k.clone()).collect();
        if let Some(p) = &prev {
            assert!(p.iter().all(|k| t.contains(k)));
            assert!(ks.len() > p.len());
        }
        prev = Some(ks);
    }
}

#[test]
fn shifting_the_origin_barely_moves_correlations() {
    let s = preset("fibonacci").unwrap();
    let w = Window::for_preset("fibonacci").unwrap();
    let r = 2000.0;
    let g = GaussianTestFunction::unit(vec![TAU], 0.1).unwrap();
    let base = generate_patch(&s, &w, &HullPoint::new(vec![0.0], vec![0.3]), r).unwrap();
    let v0 = npoint_correlation(&base, std::slice::from_ref(&g)).unwrap().value;
    for u in [0.25, 1.7, 13.0] {
        let moved = generate_patch(&s, &w, &HullPoint::new(vec![u], vec![0.3]), r).unwrap();
        let v = npoint_correlation(&moved, std::slice::from_ref(&g)).unwrap().value;
        assert!((v - v0).norm() <= 5.0 / r * v0.norm(), "u={u}");
    }
}

#[test]
fn doubling_r_stays_within_error_bars() {
    let s = preset("fibonacci").unwrap();
    let w = Window::for_preset("fibonacci").unwrap();
    let g = GaussianTestFunction::unit(vec![1.0], 0.1).unwrap();
    let est = |r: f64| {
        let p = generate_patch(&s, &w, &HullPoint::new(vec![0.0], vec![0.3]), r).unwrap();
        npoint_correlation(&p, std::slice::from_ref(&g)).unwrap()
    };
    let (a, b) = (est(5000.0), est(10_000.0));
    assert!((a.value - b.value).norm() <= 3.0 * a.stderr.max(b.stderr), "{a:?} {b:?}");
}

fn fib_table() -> quasicorr::SpectrumTable {
    let s = preset("fibonacci").unwrap();
    let w = Window::for_preset("fibonacci").unwrap();
    let mut params = SpectrumParams::with_defaults(5.0, TAU / 5f64.sqrt());
    params.eps_bragg = 1e-4;
    enumerate_spectrum(&s, &w, params).unwrap()
}

fn top_triangles(t: &quasicorr::SpectrumTable, n: usize) -> Vec<Cycle> {
    let top: Vec<ModuleVector> = t.strongest(n).iter().map(|r| r.k.clone()).filter(|k| !k.is_zero()).collect();
    let mut out = Vec::new();
    for (i, a) in top.iter().enumerate() {
        for b in &top[i..] {
            let c = -&(a + b);
            if t.is_bragg(&c) && !c.is_zero() {
                out.push(Cycle::new(vec![a.clone(), b.clone(), c]).unwrap());
            }
        }
    }
    out
}

#[test]
fn amplitudes_converge_with_r() {
    let s = preset("fibonacci").unwrap();
    let w = Window::for_preset("fibonacci").unwrap();
    let t = fib_table();
    let peaks: Vec<Vec<f64>> = t.strongest(8).iter().map(|r| r.k_phys.clone()).collect();
    let hull = HullPoint::new(vec![0.0], vec![0.3]);
    let mut inversions = 0;
    let mut prev = f64::INFINITY;
    for r in [1000.0, 10_000.0, 100_000.0] {
        let a = generate_patch(&s, &w, &hull, r).unwrap();
        let b = generate_patch(&s, &w, &hull, 2.0 * r).unwrap();
        let change: f64 = peaks
            .iter()
            .map(|k| (bombieri_taylor(&a, k).unwrap().norm() - bombieri_taylor(&b, k).unwrap().norm()).abs())
            .sum();
        if change > prev {
            inversions += 1;
        }
        prev = change;
    }
    assert!(inversions <= 1);
}

#[test]
fn raw_modulus_approaches_one() {
    let s = preset("fibonacci").unwrap();
    let w = Window::for_preset("fibonacci").unwrap();
    let t = fib_table();
    let cycles = top_triangles(&t, 10);
    assert!(cycles.len() >= 5);
    let mean_dev = |r: f64| {
        let p = generate_patch(&s, &w, &HullPoint::new(vec![0.2], vec![0.3]), r).unwrap();
        cycles.iter().map(|c| (estimate_a(&p, c, &t).unwrap().raw_modulus - 1.0).abs()).sum::<f64>() / cycles.len() as f64
    };
    assert!(mean_dev(10_000.0) < mean_dev(1000.0));
}

#[test]
fn cycle_function_is_hull_independent() {
    let s = preset("fibonacci").unwrap();
    let w = Window::for_preset("fibonacci").unwrap();
    let t = fib_table();
    let p = generate_patch(&s, &w, &HullPoint::new(vec![0.0], vec![0.3]), 10_000.0).unwrap();
    let q = generate_patch(&s, &w, &HullPoint::new(vec![7.31], vec![1.1]), 10_000.0).unwrap();
    for c in top_triangles(&t, 10) {
        let a = estimate_a(&p, &c, &t).unwrap();
        let b = estimate_a(&q, &c, &t).unwrap();
        assert!((a.value - b.value).norm() <= a.phase_error + b.phase_error, "{c}");
    }
}
