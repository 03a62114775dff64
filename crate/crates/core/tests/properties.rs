mod common;

use cascade_core::cascade::{Budget, CascadeEnvironment};
use cascade_core::constants::{
    critical_constants, critical_exponents, height_constant, phi, SearchOptions, Threshold,
    ROOT_RESIDUAL,
};
use cascade_core::laws::LaplaceProfile;
use cascade_core::SplittingLaw;
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

fn closed_laws() -> Vec<SplittingLaw> {
    vec![
        SplittingLaw::UniformStick,
        SplittingLaw::Mix23 { alpha: 0.5 },
        SplittingLaw::Mix23 { alpha: 0.7 },
        SplittingLaw::Law075U,
    ]
}

fn law_strategy() -> impl Strategy<Value = SplittingLaw> {
    prop::sample::select(closed_laws())
}

/// A θ strictly inside the domain of `p`.
fn inside(p: &LaplaceProfile, u: f64) -> f64 {
    let lo = p.theta_lower().max(-6.0) + 0.05;
    lo + u * (12.0 - lo)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn structural_invariants(seed in any::<u64>()) {
        let inst = Instance::random(&mut Pcg64Mcg::seed_from_u64(seed), 300);
        let v = structural_violations(&inst);
        prop_assert!(v.is_empty(), "{inst:?}: {v:?}");
    }

    #[test]
    fn pruned_levels_match_full_tables(seed in any::<u64>()) {
        let inst = Instance::random(&mut Pcg64Mcg::seed_from_u64(seed), 64);
        let occ = inst.occupancy();
        let depth = table_depth(&inst.law, 16, 12);
        let table = nm_table(&full_generations(&occ, depth), inst.j);
        let (th, tg) = levels_from_table(&table);
        let mut b = Budget::new(ROOMY);
        let h = occ.heights(&[inst.j], &mut b).unwrap()[0];
        let g = occ.saturation_levels(&[inst.j], &mut b).unwrap()[0];
        match th {
            Some(x) => prop_assert_eq!(h, x),
            None => prop_assert!(h > depth),
        }
        match tg {
            Some(x) => prop_assert_eq!(g, x),
            None => prop_assert!(g > depth),
        }
    }

    #[test]
    fn laplace_is_decreasing_and_log_convex(law in law_strategy(), u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let p = law.closed_form().unwrap();
        let (a, b) = (inside(&p, u.min(v)), inside(&p, u.max(v)));
        prop_assume!(b - a > 1e-6);
        let la = p.eval(a).unwrap();
        let lb = p.eval(b).unwrap();
        prop_assert!(la.l > lb.l);
        prop_assert!(la.dl < 0.0 && lb.dl < 0.0);
        let mid = p.log_l(0.5 * (a + b)).unwrap();
        let chord = 0.5 * (p.log_l(a).unwrap() + p.log_l(b).unwrap());
        prop_assert!(mid <= chord + 1e-12 * chord.abs().max(1.0));
    }

    #[test]
    fn minus_l_over_dl_increases(law in law_strategy(), u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let p = law.closed_form().unwrap();
        let (a, b) = (inside(&p, u.min(v)), inside(&p, u.max(v)));
        prop_assume!(b - a > 1e-6);
        let c = |t: f64| -1.0 / p.log_slope(t).unwrap();
        prop_assert!(c(a) <= c(b) * (1.0 + 1e-12));
    }

    #[test]
    fn environment_is_pure_and_conserves_mass(seed in any::<u64>(), law in law_strategy(),
                                               path in prop::collection::vec(0u32..2, 0..20)) {
        let env = CascadeEnvironment::new(law, seed);
        let w = env.weight_of(&path);
        prop_assert_eq!(w.to_bits(), env.weight_of(&path).to_bits());
        prop_assert!((0.0..=1.0).contains(&w));
        let kids: f64 = (0..law.support_bound() as u32)
            .map(|i| {
                let mut p = path.clone();
                p.push(i);
                env.weight_of(&p)
            })
            .sum();
        prop_assert!((kids - w).abs() <= 1e-12);
    }

    #[test]
    fn power_thresholds_round_up(n in 1u64..(1 << 40), alpha in 0.05..0.95f64) {
        let j = Threshold::Power(alpha).for_balls(n);
        let x = (n as f64).powf(alpha);
        prop_assert!(j >= 1);
        prop_assert!((j as f64) >= x * (1.0 - 1e-9));
        prop_assert!((j as f64) < x + 1.0);
    }
}

#[test]
fn square_thresholds_are_exact() {
    for m in 1u64..3000 {
        assert_eq!(Threshold::Power(0.5).for_balls(m * m), m);
    }
}

#[test]
fn root_residuals_and_the_two_c_star_forms_agree() {
    for law in closed_laws() {
        let p = law.closed_form().unwrap();
        let e = critical_exponents(&p, &SearchOptions::default()).unwrap();
        let c = critical_constants(&p, &SearchOptions::default()).unwrap();
        for r in [e.lower.residual(), e.upper.residual()].into_iter().flatten() {
            assert!(r.abs() <= ROOT_RESIDUAL, "{law}: residual {r}");
        }
        if c.theta_star_upper.is_finite() {
            let t = c.theta_star_upper;
            assert!(phi(&p, t).unwrap().abs() <= ROOT_RESIDUAL);
            let gap = (-1.0 / p.log_slope(t).unwrap() + t / p.log_l(t).unwrap()).abs();
            assert!(gap <= 1e-9 * c.c_upper, "{law}: {gap}");
        }
    }
}

#[test]
fn phi_at_one_is_minus_dl() {
    for law in closed_laws() {
        let p = law.closed_form().unwrap();
        let v = p.eval(1.0).unwrap();
        let f = phi(&p, 1.0).unwrap();
        assert!(f > 0.0);
        assert!((f + v.dl).abs() < 1e-12, "{law}");
    }
}

#[test]
fn height_constants_decrease_then_saturate() {
    for law in closed_laws() {
        let p = law.closed_form().unwrap();
        let c = critical_constants(&p, &SearchOptions::default()).unwrap();
        let cj: Vec<f64> = (2..=10)
            .map(|j| height_constant(&c, &p, Threshold::Fixed(j)).unwrap())
            .collect();
        assert!(cj.windows(2).all(|w| w[1] <= w[0]), "{law}: {cj:?}");
        for (i, &v) in cj.iter().enumerate() {
            let j = (i + 2) as f64;
            if j >= c.theta_star_upper.ceil() {
                assert_eq!(v, c.c_upper, "{law}: C_{j}");
            } else {
                // the minimum over θ in (1, j] of -θ/ln L(θ) sits at θ = j
                let h = |t: f64| -t / p.log_l(t).unwrap();
                let grid_min = (1..=4000)
                    .map(|s| 1.0 + (j - 1.0) * f64::from(s) / 4000.0)
                    .map(h)
                    .fold(f64::INFINITY, f64::min);
                assert!((grid_min - v).abs() <= 1e-9 * v, "{law}: C_{j} {v} vs grid {grid_min}");
            }
        }
    }
}

#[test]
fn monte_carlo_profiles_track_closed_forms() {
    for law in [SplittingLaw::UniformStick, SplittingLaw::Mix23 { alpha: 0.6 }, SplittingLaw::Law075U] {
        let exact = law.closed_form().unwrap();
        let mc = LaplaceProfile::monte_carlo(&law, 200_000, 17, exact.theta_lower()).unwrap();
        for t in [-0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let e = exact.eval(t).unwrap();
            let m = mc.eval(t).unwrap();
            let se = m.stderr.expect("monte-carlo values carry errors");
            for (c, (x, y)) in [(e.l, m.l), (e.dl, m.dl), (e.d2l, m.d2l)].into_iter().enumerate() {
                assert!(
                    (x - y).abs() <= 4.0 * se[c] + 1e-12,
                    "{law} θ = {t} component {c}: exact {x}, mc {y} ± {}",
                    se[c]
                );
            }
        }
    }
}

#[test]
fn samples_respect_the_support_bound() {
    let mut rng = Pcg64Mcg::seed_from_u64(99);
    for law in all_laws() {
        let b = law.support_bound();
        for _ in 0..1_000_000 / all_laws().len() {
            let s = law.sample(&mut rng);
            assert!(s.len() <= b);
            assert!(s.masses().iter().all(|m| (0.0..=1.0).contains(m)));
            let total: f64 = s.masses().iter().sum();
            assert!((total - 1.0).abs() <= 1e-12, "{law}: {total}");
        }
    }
}
