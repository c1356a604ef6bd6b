//! Property tests for the data, factor, and swarm invariants.

use std::collections::HashSet;

use proptest::prelude::*;

use gmpl_core::data::{generate_synthetic, split_dataset};
use gmpl_core::lfa::{Hyperparams, LatentFactors};
use gmpl_core::swarm::{
    bound, fitness_contributions, gamma_schedule, gm_pso_step_with_draws, pso_step_with_draws,
    Particle, SearchBox, SwarmConsts,
};
use gmpl_core::Entry;

fn key(e: &Entry) -> (u32, u32) {
    (e.user, e.item)
}

proptest! {
    #[test]
    fn split_partitions_are_disjoint_and_exhaustive(
        seed in 0u64..1000,
        data_seed in 0u64..50,
        r_train in 0.3f64..0.8,
        r_val in 0.05f64..0.15,
    ) {
        let (data, _) = generate_synthetic(15, 12, 2, 0.6, 0.1, data_seed).unwrap();
        let r_test = 1.0 - r_train - r_val;
        let split = split_dataset(&data, (r_train, r_val, r_test), seed).unwrap();

        let k: HashSet<_> = split.train.entries().iter().map(key).collect();
        let o: HashSet<_> = split.validation.entries().iter().map(key).collect();
        let g: HashSet<_> = split.test.entries().iter().map(key).collect();
        prop_assert!(k.is_disjoint(&o));
        prop_assert!(k.is_disjoint(&g));
        prop_assert!(o.is_disjoint(&g));

        let all: HashSet<_> = data.entries().iter().map(key).collect();
        let union: HashSet<_> = k.union(&o).chain(g.iter()).copied().collect();
        prop_assert_eq!(union, all);
    }

    #[test]
    fn id_maps_round_trip(data_seed in 0u64..100) {
        let (data, _) = generate_synthetic(10, 10, 2, 0.4, 0.0, data_seed).unwrap();
        for u in 0..data.n_users() as u32 {
            let id = data.user_id(u).unwrap();
            prop_assert_eq!(data.user_index(id), Some(u));
        }
        for i in 0..data.n_items() as u32 {
            let id = data.item_id(i).unwrap();
            prop_assert_eq!(data.item_index(id), Some(i));
        }
    }

    #[test]
    fn rmse_is_permutation_invariant(seed in 0u64..100, perm_seed in 0u64..100) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let (data, _) = generate_synthetic(8, 8, 2, 0.7, 0.3, seed).unwrap();
        let lf = LatentFactors::init(8, 8, 3, seed).unwrap();
        let base = lf.rmse(data.entries()).unwrap();
        let mut shuffled = data.entries().to_vec();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed);
        shuffled.shuffle(&mut rng);
        let permuted = lf.rmse(&shuffled).unwrap();
        prop_assert!((base - permuted).abs() < 1e-12);
    }

    #[test]
    fn contributions_telescope_to_one(
        values in proptest::collection::vec(0.01f64..5.0, 3..12),
    ) {
        let ledger = values;
        let q = ledger.len() - 1;
        let denom = ledger[q] - ledger[0];
        prop_assume!(denom.abs() >= 1e-6);
        let f = fitness_contributions(&ledger).unwrap();
        let sum: f64 = f.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9, "sum {sum}");
    }

    #[test]
    fn gamma_schedule_monotone_and_bounded(m in 1usize..10) {
        let mut prev = f64::NEG_INFINITY;
        for t in 0..300 {
            let g = gamma_schedule(t, m, 0.4, 1.4);
            prop_assert!(g >= prev);
            prop_assert!((0.4..=1.4).contains(&g));
            prev = g;
        }
    }

    #[test]
    fn gm_step_with_zero_gamma_is_pso(
        h in proptest::collection::vec(-5.0f64..5.0, 2),
        s in proptest::collection::vec(-1.0f64..1.0, 2),
        hp in proptest::collection::vec(-5.0f64..5.0, 2),
        sp in proptest::collection::vec(-1.0f64..1.0, 2),
        pb in proptest::collection::vec(-5.0f64..5.0, 2),
        gb in proptest::collection::vec(-5.0f64..5.0, 2),
        r1 in 0.0f64..1.0,
        r2 in 0.0f64..1.0,
        t in 2usize..50,
    ) {
        let mut a = Particle::at(h);
        a.velocity = s;
        a.prev_position = Some(hp);
        a.prev_velocity = Some(sp);
        a.pbest = pb;
        let mut b = a.clone();
        let c = SwarmConsts::default();
        pso_step_with_draws(&mut a, &gb, c, &[r1, r1], &[r2, r2]);
        gm_pso_step_with_draws(&mut b, &gb, c, 0.0, t, &[r1, r1], &[r2, r2]);
        for d in 0..2 {
            prop_assert!((a.position[d] - b.position[d]).abs() < 1e-15);
            prop_assert!((a.velocity[d] - b.velocity[d]).abs() < 1e-15);
        }
    }

    #[test]
    fn bound_keeps_every_coordinate_in_box(
        h in proptest::collection::vec(-10.0f64..10.0, 2),
        s in proptest::collection::vec(-10.0f64..10.0, 2),
    ) {
        let bbox = SearchBox::new(
            vec![2f64.powi(-13), 2f64.powi(-7)],
            vec![2f64.powi(-7), 2f64.powi(-1)],
        )
        .unwrap();
        let limits = bbox.velocity_limits(0.2);
        let mut p = Particle::at(h);
        p.velocity = s;
        bound(&mut p, &bbox, &limits);
        prop_assert!(bbox.contains(&p.position));
        for (v, limit) in p.velocity.iter().zip(&limits) {
            prop_assert!(v.abs() <= *limit);
        }
        let (pos, vel) = (p.position.clone(), p.velocity.clone());
        bound(&mut p, &bbox, &limits);
        prop_assert_eq!(p.position, pos);
        prop_assert_eq!(p.velocity, vel);
    }

    // With no regularization and a small step, the just-visited entry's
    // instant loss cannot rise across its own update.
    #[test]
    fn small_step_does_not_increase_instant_loss(seed in 0u64..200) {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let f = rng.random_range(1..=5);
        let lf_vals: Vec<f64> = (0..2 * f).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut it = lf_vals.into_iter();
        let mut lf = LatentFactors::from_fn(1, 1, f, |_, _| it.next().unwrap());
        let entry = Entry { user: 0, item: 0, rating: rng.random_range(-1.0..1.0) };
        let hp = Hyperparams::new(1e-3, 0.0).unwrap();
        let before = lf.instant_loss(&entry, hp).unwrap();
        lf.sgd_epoch(&[entry], hp, 0).unwrap();
        let after = lf.instant_loss(&entry, hp).unwrap();
        prop_assert!(after <= before + 1e-12, "loss rose from {before} to {after}");
    }

    // Under the update rule pbest_fitness never decreases, whatever the
    // contribution sequence looks like.
    #[test]
    fn pbest_fitness_is_monotone(
        seed in 0u64..100,
        fits in proptest::collection::vec(proptest::collection::vec(-1.0f64..2.0, 3), 1..15),
    ) {
        use gmpl_core::swarm::{BestPolicy, SwarmState};
        let bbox = SearchBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mut state =
            SwarmState::new(3, bbox, SwarmConsts::default(), 0.2, 0.4, seed, false, false).unwrap();
        let mut last = vec![f64::NEG_INFINITY; 3];
        for contributions in fits {
            state.evolve_and_bound(true);
            state.absorb_fitness(&contributions, BestPolicy::ImprovementRate);
            for (p, l) in state.particles.iter().zip(&mut last) {
                prop_assert!(p.pbest_fitness >= *l);
                *l = p.pbest_fitness;
            }
        }
    }
}
