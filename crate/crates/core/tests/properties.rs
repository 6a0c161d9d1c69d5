use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use phd_consistency::doctrine::{apply_doctrine, doctrine_mask, DoctrineSpec};
use phd_consistency::experiment::{run, ExperimentConfig, Preset};
use phd_consistency::filter::{predict, resample, update, BirthModel, MotionModel, SensorModel};
use phd_consistency::metrics::{distance, local_distance, localize_failure, NormOrder};
use phd_consistency::phd::{discretize, GridPhd, GridSpec, Particle, ParticlePhd, StateVector};

fn spec() -> GridSpec {
    GridSpec::new(0.0, 64.0, 128).unwrap()
}

fn particles_inside(max: usize) -> impl Strategy<Value = ParticlePhd> {
    prop::collection::vec((0.0..=64.0f64, -3.0..3.0f64, 0.0..1.0f64), 0..max).prop_map(|v| {
        ParticlePhd::new(
            v.into_iter()
                .map(|(x, v, w)| Particle {
                    state: StateVector::new(x, v),
                    weight: w,
                })
                .collect(),
        )
        .unwrap()
    })
}

fn grid_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..5.0f64], n)
}

fn interior(values: Vec<f64>, margin: usize) -> GridPhd {
    let n = values.len();
    let v = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| if i < margin || i + margin >= n { 0.0 } else { v })
        .collect();
    GridPhd::new(spec(), v).unwrap()
}

fn norm() -> impl Strategy<Value = NormOrder> {
    prop::sample::select(NormOrder::ALL.to_vec())
}

proptest! {
    #[test]
    fn discretize_conserves_mass_and_sign(phd in particles_inside(400)) {
        let d = discretize(&phd, &spec());
        prop_assert_eq!(d.dropped_mass, 0.0);
        prop_assert!(d.grid.values().iter().all(|v| *v >= 0.0));
        let m = phd.mass();
        prop_assert!((d.grid.mass() - m).abs() <= 1e-9 * m.max(1e-300));
    }

    #[test]
    fn mass_in_is_additive(values in grid_values(128), cuts in prop::collection::vec(0.0..=64.0f64, 3)) {
        let g = GridPhd::new(spec(), values).unwrap();
        let mut c = cuts;
        c.sort_by(f64::total_cmp);
        let whole = g.mass_in(c[0], c[2]).unwrap();
        let parts = g.mass_in(c[0], c[1]).unwrap() + g.mass_in(c[1], c[2]).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.max(1.0));
        prop_assert_eq!(g.mass_in(0.0, 64.0).unwrap(), g.mass());
    }

    #[test]
    fn doctrine_is_linear(
        f in grid_values(128),
        g in grid_values(128),
        alpha in 0.0..4.0f64,
        beta in 0.0..4.0f64,
        sigma in 0.0..2.0f64,
    ) {
        let mask = doctrine_mask(&DoctrineSpec::three_abreast(5.0, sigma).unwrap(), 0.5, 5.0).unwrap();
        let f = GridPhd::new(spec(), f).unwrap();
        let g = GridPhd::new(spec(), g).unwrap();
        let combined = f.scaled(alpha).unwrap().add(&g.scaled(beta).unwrap()).unwrap();
        let lhs = apply_doctrine(&combined, &mask).unwrap().grid;
        let tf = apply_doctrine(&f, &mask).unwrap().grid;
        let tg = apply_doctrine(&g, &mask).unwrap().grid;
        for i in 0..128 {
            let rhs = alpha * tf.values()[i] + beta * tg.values()[i];
            prop_assert!((lhs.values()[i] - rhs).abs() <= 1e-9);
            prop_assert!(lhs.values()[i] >= 0.0);
        }
    }

    #[test]
    fn doctrine_is_translation_equivariant(
        f in grid_values(128),
        shift in 0usize..10,
        sigma in 0.0..1.5f64,
    ) {
        let mask = doctrine_mask(&DoctrineSpec::three_abreast(4.0, sigma).unwrap(), 0.5, 5.0).unwrap();
        let margin = mask.half_bins() + 1;
        let f = interior(f, margin + 10);
        let mut shifted = vec![0.0; 128];
        shifted[shift..].copy_from_slice(&f.values()[..128 - shift]);
        let g = GridPhd::new(spec(), shifted).unwrap();
        let tf = apply_doctrine(&f, &mask).unwrap().grid;
        let tg = apply_doctrine(&g, &mask).unwrap().grid;
        for i in 0..128 - shift {
            prop_assert!((tg.values()[i + shift] - tf.values()[i]).abs() <= 1e-9);
        }
    }

    #[test]
    fn interior_mass_scales_by_subunit_count(f in grid_values(128), sigma in 0.0..1.5f64) {
        let mask = doctrine_mask(&DoctrineSpec::three_abreast(4.0, sigma).unwrap(), 0.5, 5.0).unwrap();
        let f = interior(f, mask.half_bins() + 1);
        let out = apply_doctrine(&f, &mask).unwrap();
        prop_assert_eq!(out.leaked_mass, 0.0);
        prop_assert!((out.grid.mass() - mask.mass() * f.mass()).abs() <= 1e-6 * f.mass().max(1e-300));
    }

    #[test]
    fn resample_preserves_mass_and_count(phd in particles_inside(300), target in 1usize..3000, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (out, diag) = resample(&phd, target, &mut rng);
        let m = phd.mass();
        if m > 0.0 {
            prop_assert!(!diag.zero_mass);
            prop_assert_eq!(out.len(), target);
            prop_assert!((out.mass() - m).abs() <= 1e-12 * m);
        } else {
            prop_assert!(out.is_empty());
        }
    }

    #[test]
    fn predict_without_death_or_birth_conserves_mass(phd in particles_inside(300), seed: u64) {
        let motion = MotionModel { survival_probability: 1.0, ..MotionModel::default() };
        let birth = BirthModel { birth_mass_per_step: 0.0, ..BirthModel::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = predict(&phd, &motion, &birth, 1.0, &mut rng);
        let m = phd.mass();
        prop_assert!((out.mass() - m).abs() <= 1e-12 * m.max(1e-300));
    }

    #[test]
    fn missed_detection_scales_mass(phd in particles_inside(300), p_d in 0.01..=1.0f64) {
        let sensor = SensorModel { detection_probability: p_d, ..SensorModel::default() };
        let (out, _) = update(&phd, &[], &sensor);
        let expected = (1.0 - p_d) * phd.mass();
        prop_assert!((out.mass() - expected).abs() <= 1e-12 * expected.max(1e-300));
    }

    // Each observation adds at most one object's worth of mass; with clutter
    // it adds strictly less.
    #[test]
    fn corrector_mass_bounds(
        phd in particles_inside(200),
        p_d in 0.05..=1.0f64,
        clutter in prop_oneof![Just(0.0), 1e-4..1.0f64],
        z in 0.0..64.0f64,
    ) {
        prop_assume!(phd.mass() > 0.0);
        let sensor = SensorModel { detection_probability: p_d, clutter_intensity: clutter, ..SensorModel::default() };
        let (out, _) = update(&phd, &[StateVector::new(z, 0.0)], &sensor);
        let missed = (1.0 - p_d) * phd.mass();
        prop_assert!(out.mass() >= missed - 1e-12);
        prop_assert!(out.mass() <= missed + 1.0 + 1e-12);
        if phd.mass() >= 1.0 {
            prop_assert!(out.mass() <= missed + phd.mass() + 1e-12);
        }
    }

    #[test]
    fn disjoint_supports_add_masses(f in grid_values(64), g in grid_values(64)) {
        let mut a = f.clone();
        a.extend(std::iter::repeat_n(0.0, 64));
        let mut b = vec![0.0; 64];
        b.extend(g);
        let a = GridPhd::new(spec(), a).unwrap();
        let b = GridPhd::new(spec(), b).unwrap();
        let d = distance(&a, &b, NormOrder::L1).unwrap();
        prop_assert!((d - (a.mass() + b.mass())).abs() <= 1e-9 * d.max(1.0));
    }

    #[test]
    fn l1_partition_additivity(
        f in grid_values(128),
        g in grid_values(128),
        cuts in prop::collection::btree_set(1usize..128, 0..8),
    ) {
        let s = spec();
        let f = GridPhd::new(s, f).unwrap();
        let g = GridPhd::new(s, g).unwrap();
        let mut edges = vec![0usize];
        edges.extend(cuts);
        edges.push(128);
        let total: f64 = edges
            .windows(2)
            .map(|w| local_distance(&f, &g, NormOrder::L1, s.edge(w[0]), s.edge(w[1])).unwrap().distance)
            .sum();
        let d = distance(&f, &g, NormOrder::L1).unwrap();
        prop_assert!((total - d).abs() <= 1e-9 * d.max(1.0));
    }

    #[test]
    fn localized_regions_exceed_threshold(
        f in grid_values(128),
        g in grid_values(128),
        p in norm(),
        frac in 0.01..1.5f64,
        min_width in 1.0..16.0f64,
    ) {
        let f = GridPhd::new(spec(), f).unwrap();
        let g = GridPhd::new(spec(), g).unwrap();
        let global = distance(&f, &g, p).unwrap();
        prop_assume!(global > 0.0);
        let threshold = global * frac;
        let regions = localize_failure(&f, &g, p, threshold, min_width).unwrap();
        if global <= threshold {
            prop_assert!(regions.is_empty());
        }
        for r in &regions {
            prop_assert!(r.a < r.b);
            prop_assert!(r.local_distance > threshold);
        }
        for w in regions.windows(2) {
            prop_assert!(w[0].b <= w[1].a);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn records_respect_l1_bound_and_are_deterministic(seed in 0u64..1000, preset in 0usize..3) {
        let mut config = ExperimentConfig::default()
            .with_preset(Preset::ALL[preset])
            .with_seed(seed);
        config.scenario.n_steps = 30;
        config.burn_in = 5;
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        prop_assert_eq!(&a, &b);
        for r in &a {
            let d1 = r.d_1.unwrap();
            prop_assert!(d1 >= 0.0 && r.d_2.unwrap() >= 0.0 && r.d_inf.unwrap() >= 0.0);
            prop_assert!(r.mass_u >= 0.0 && r.mass_su >= 0.0 && r.mass_su_star >= 0.0);
            prop_assert!(d1 <= r.mass_su + r.mass_su_star + 1e-9);
        }
    }
}
