use mscale::bands::{
    fast_band_monotone, lp_band_convex, lp_band_monotone, superfast_band_convex, superfast_band_monotone, universal_band,
};
use mscale::grid::{estimate_sigma, generate_data, DesignSample, TestFunction};
use mscale::multires::{is_member, make_family, multiscale_stat, FamilyKind, IndexInterval, RegionSpec};
use mscale::polyhedron::{build_region_constraints, solve, Curvature, Direction, Sense};
use mscale::tautstring::{local_extremes, modality, taut_string, taut_string_multires, ExtremeKind, TubeSpec};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn values(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 2..=max_n)
}

fn sample(y: &[f64]) -> DesignSample {
    DesignSample::new(y.to_vec()).unwrap()
}

fn kinds() -> impl Strategy<Value = FamilyKind> {
    prop_oneof![Just(FamilyKind::All), (1.1f64..4.0).prop_map(FamilyKind::Dyadic)]
}

proptest! {
    #[test]
    fn sigma_scale_equivariant(y in values(60), a in -5.0f64..5.0) {
        let base = estimate_sigma(&sample(&y)).unwrap();
        let scaled: Vec<f64> = y.iter().map(|v| a * v).collect();
        let got = estimate_sigma(&sample(&scaled)).unwrap();
        prop_assert!((got - a.abs() * base).abs() <= 1e-12 * (1.0 + got.abs()));
    }

    #[test]
    fn sigma_shift_invariant(y in values(60), c in -100.0f64..100.0) {
        let base = estimate_sigma(&sample(&y)).unwrap();
        let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
        let got = estimate_sigma(&sample(&shifted)).unwrap();
        prop_assert!((got - base).abs() <= 1e-10 * (1.0 + base));
    }

    #[test]
    fn stat_matches_exhaustive_oracle(y in values(20), seed in any::<u64>()) {
        let n = y.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let fam = make_family(n, FamilyKind::All).unwrap();
        let got = multiscale_stat(&sample(&y), &g, &fam).unwrap().value;
        let mut want: f64 = 0.0;
        for lo in 0..n {
            for hi in lo..n {
                let s: f64 = (lo..=hi).map(|i| y[i] - g[i]).sum();
                want = want.max(s.abs() / ((hi - lo + 1) as f64).sqrt());
            }
        }
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want));
    }

    #[test]
    fn membership_antitone_in_residual_scale(y in values(30), seed in any::<u64>(), a in 1.0f64..5.0, kind in kinds()) {
        let n = y.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let spec = RegionSpec::new(1.0, 3.0, make_family(n, kind).unwrap()).unwrap();
        let s = sample(&y);
        let g1: Vec<f64> = y.iter().zip(&r).map(|(v, e)| v - e).collect();
        let ga: Vec<f64> = y.iter().zip(&r).map(|(v, e)| v - a * e).collect();
        // scaling the residuals scales the statistic exactly, up to rounding
        let s1 = multiscale_stat(&s, &g1, spec.family()).unwrap().value;
        let sa = multiscale_stat(&s, &ga, spec.family()).unwrap().value;
        prop_assert!(sa >= s1 * (1.0 - 1e-12));
        if !is_member(&s, &g1, &spec).unwrap() {
            prop_assert!(!is_member(&s, &ga, &spec).unwrap() || sa <= spec.threshold() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn every_family_has_all_singletons(n in 1usize..300, kind in kinds()) {
        let fam = make_family(n, kind).unwrap();
        for i in 1..=n {
            prop_assert!(fam.contains(&IndexInterval::singleton(i)));
        }
    }

    #[test]
    fn constraints_agree_with_membership(y in values(25), seed in any::<u64>(), kind in kinds(), spread in 0.1f64..4.0) {
        let n = y.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = RegionSpec::new(1.0, 3.0, make_family(n, kind).unwrap()).unwrap();
        let s = sample(&y);
        let cs = build_region_constraints(&s, &spec).unwrap();
        for _ in 0..20 {
            let g: Vec<f64> = y.iter().map(|v| v + rng.random_range(-spread..spread)).collect();
            let stat = multiscale_stat(&s, &g, spec.family()).unwrap().value;
            if (stat - spec.threshold()).abs() < 1e-9 {
                continue;
            }
            prop_assert_eq!(cs.max_violation(&g) <= 0.0, is_member(&s, &g, &spec).unwrap());
        }
    }

    #[test]
    fn tube_containment_and_minimal_length(y in values(16), width in 0.0f64..3.0, seed in any::<u64>()) {
        let n = y.len();
        let s = sample(&y);
        let fit = taut_string(&s, &TubeSpec::constant(n, width).unwrap()).unwrap();
        let mut cum = vec![0.0; n + 1];
        for i in 0..n {
            cum[i + 1] = cum[i] + y[i];
        }
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.0 } else { width };
            prop_assert!((fit.string[i] - cum[i]).abs() <= w + 1e-9);
        }
        let length = |f: &[f64]| -> f64 {
            f.windows(2).map(|w| (1.0 / (n * n) as f64 + (w[1] - w[0]).powi(2)).sqrt()).sum()
        };
        let best = length(&fit.string);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let mut f = fit.string.clone();
            for i in 1..n {
                let v = f[i] + rng.random_range(-0.5..0.5) * width.max(1e-3);
                f[i] = v.clamp(cum[i] - width, cum[i] + width);
            }
            prop_assert!(best <= length(&f) + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solve_is_deterministic_and_beats_hit_and_run(y in values(6), seed in any::<u64>()) {
        let n = y.len();
        let spec = RegionSpec::new(0.5, 3.0, make_family(n, FamilyKind::All).unwrap()).unwrap();
        let s = sample(&y);
        let cs = build_region_constraints(&s, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let obj: Vec<(usize, f64)> = c.iter().copied().enumerate().collect();
        let a = solve(&cs, &obj, Sense::Min).unwrap();
        let b = solve(&cs, &obj, Sense::Min).unwrap();
        prop_assert!(a.is_optimal());
        prop_assert_eq!(a.objective.to_bits(), b.objective.to_bits());

        // hit-and-run inside |sum_I (y - g)| <= T sqrt|I|, started at y
        let t = spec.threshold();
        let ivs: Vec<IndexInterval> = spec.family().iter().collect();
        let mut x = y.clone();
        for _ in 0..1000 {
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for iv in &ivs {
                let r: f64 = iv.range().map(|i| y[i] - x[i]).sum();
                let dd: f64 = iv.range().map(|i| d[i]).sum();
                let cap = t * (iv.len() as f64).sqrt();
                // |r - step dd| <= cap
                if dd.abs() > 1e-15 {
                    let (p, q) = ((r - cap) / dd, (r + cap) / dd);
                    lo = lo.max(p.min(q));
                    hi = hi.min(p.max(q));
                }
            }
            let step = rng.random_range(lo..=hi);
            for i in 0..n {
                x[i] += step * d[i];
            }
            let val: f64 = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
            prop_assert!(val >= a.objective - 1e-9);
        }
    }

    #[test]
    fn bands_are_ordered_when_feasible(seed in any::<u64>(), n in 8usize..40, sigma in 0.05f64..2.0) {
        let s = generate_data(&TestFunction::Exponential { rate: 3.0 }, n, sigma, seed).unwrap();
        let spec = RegionSpec::new(sigma, 3.0, make_family(n, FamilyKind::Dyadic(2.0)).unwrap()).unwrap();
        let bands = [
            universal_band(&s, &spec).unwrap(),
            fast_band_monotone(&s, &spec, Direction::Nondecreasing).unwrap(),
            superfast_band_monotone(&s, &spec, Direction::Nonincreasing, 2.0).unwrap(),
            superfast_band_convex(&s, &spec, Curvature::Convex, 1.5).unwrap(),
            lp_band_monotone(&s, &spec, Direction::Nondecreasing).unwrap(),
            lp_band_convex(&s, &spec, Curvature::Concave).unwrap(),
        ];
        for b in &bands {
            prop_assert_eq!(b.n(), n);
            if b.feasible {
                prop_assert!(b.lb.iter().zip(&b.ub).all(|(l, u)| l <= u));
                prop_assert!(b.reason.is_none());
            } else {
                prop_assert!(b.reason.is_some());
                prop_assert!(b.lb.iter().zip(&b.ub).any(|(l, u)| !(l <= u)));
            }
        }
    }

    #[test]
    fn monotone_bands_are_monotone(seed in any::<u64>(), n in 4usize..200, theta in 1.2f64..3.0) {
        let s = generate_data(&TestFunction::Exponential { rate: 5.0 }, n, 5.0, seed).unwrap();
        let spec = RegionSpec::new(5.0, 3.0, make_family(n, FamilyKind::Dyadic(2.0)).unwrap()).unwrap();
        let up = superfast_band_monotone(&s, &spec, Direction::Nondecreasing, theta).unwrap();
        prop_assert!(up.lb.windows(2).all(|w| w[0] <= w[1]) && up.ub.windows(2).all(|w| w[0] <= w[1]));
        let down = fast_band_monotone(&s, &spec, Direction::Nonincreasing).unwrap();
        prop_assert!(down.lb.windows(2).all(|w| w[0] >= w[1]) && down.ub.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn monotone_lp_band_reports_infeasibility() {
    let y: Vec<f64> = (0..20).map(|i| -(i as f64)).collect();
    let s = sample(&y);
    let spec = RegionSpec::new(0.01, 3.0, make_family(20, FamilyKind::All).unwrap()).unwrap();
    let b = lp_band_monotone(&s, &spec, Direction::Nondecreasing).unwrap();
    assert!(!b.feasible);
    assert!(b.reason.unwrap().contains("nondecreasing"));
    let f = fast_band_monotone(&s, &spec, Direction::Nondecreasing).unwrap();
    assert!(!f.feasible);
}

#[test]
fn noise_free_monotone_data_gives_monotone_fit() {
    for n in [50, 200, 1000] {
        let y: Vec<f64> = (1..=n).map(|i| (i as f64 / n as f64).powi(3)).collect();
        let fam = make_family(n, FamilyKind::Dyadic(2.0)).unwrap();
        let fit = taut_string_multires(&sample(&y), 0.1, 3.0, &fam, 100).unwrap().fit;
        assert!(fit.windows(2).all(|w| w[0] <= w[1] + 1e-12), "n = {n}");
    }
}

#[test]
fn noise_free_unimodal_data_gives_one_peak() {
    for n in [64, 500, 2000] {
        let y: Vec<f64> = (1..=n).map(|i| (-((i as f64 / n as f64 - 0.4) / 0.1).powi(2)).exp()).collect();
        let fam = make_family(n, FamilyKind::Dyadic(2.0)).unwrap();
        let fit = taut_string_multires(&sample(&y), 0.05, 3.0, &fam, 100).unwrap().fit;
        let maxima = local_extremes(&fit).iter().filter(|e| e.kind == ExtremeKind::Maximum).count();
        assert!(maxima <= 1, "n = {n}: {maxima} maxima");
        assert!(modality(&fit) <= 1);
    }
}
