use pulab_core::dist::draw;
use pulab_core::harness::{
    cell_trials, read_csv, run_trial, success_probability, sweep_sample_complexity,
    wilson_interval, with_jobs, write_csv, ExperimentConfig, InstanceSpec, LearnerSpec,
    Prepared, Z95,
};
use pulab_core::instances::{
    left_right_to_pu, left_right_triple, no_alpha_pair, two_point_instance, Side,
};
use pulab_core::learners::perm_finite;
use pulab_core::rng::{derive_seed, stream_seed, Stream};

fn config(instance: InstanceSpec, grid: Vec<usize>, eps: f64, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        instance,
        learner: LearnerSpec::Perm,
        b_grid: grid.clone(),
        a_grid: grid,
        paired: true,
        eps,
        delta: 0.1,
        trials,
        seed: 20_240_601,
        pi: None,
    }
}

#[test]
fn wilson_covers_two_point_failure_rate() {
    // PERM fails iff x1 never shows up among b positives: probability 0.9^b.
    let truth = 0.9f64.powi(20);
    let prep = Prepared::new(two_point_instance(0.1, 1).unwrap()).unwrap();
    let mut covered = 0;
    for rep in 0..100u64 {
        let mut cfg = config(InstanceSpec::TwoPoint { eps: 0.1, z: 1 }, vec![20], 0.1, 200);
        cfg.seed = derive_seed(7, 0, rep);
        let cell = success_probability(&prep, &cfg, 20, 20).unwrap();
        if cell.wilson_lo <= truth && truth <= cell.wilson_hi {
            covered += 1;
        }
    }
    assert!(covered >= 90, "Wilson covered the truth {covered}/100 times");
}

#[test]
fn two_point_zero_never_samples_the_empty_side() {
    let prep = Prepared::new(two_point_instance(0.1, 0).unwrap()).unwrap();
    for i in 0..200 {
        let s = draw(&prep.instance.p, 50, stream_seed(i, Stream::Positive));
        // x1 is index 0 and carries label 0, so P = δ at index 1.
        assert!(s.items.iter().all(|&x| x == 1));
    }
}

#[test]
fn realizable_perm_is_accurate_at_500() {
    let spec = InstanceSpec::ScarPos { d: 5, rho: 0.2, o: vec![0, 1, 2, 3] };
    let prep = Prepared::new(spec.build().unwrap()).unwrap();
    let recs = cell_trials(&prep, LearnerSpec::Perm, 500, 500, 100, 20_240_601).unwrap();
    let good = recs.iter().filter(|r| r.excess <= 0.05).count();
    assert!(good >= 95, "{good}/100");
    assert!(recs.iter().all(|r| !r.infeasible));
}

#[test]
fn csv_round_trip_and_golden() {
    let cfg = config(
        InstanceSpec::ScarPos { d: 5, rho: 0.2, o: vec![0, 1, 2, 3] },
        vec![10, 30, 100],
        0.1,
        100,
    );
    let rows = sweep_sample_complexity(&cfg).unwrap();
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).unwrap();
    assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/scar_d5.csv");
    if std::env::var_os("PULAB_BLESS").is_some() {
        std::fs::write(&path, &buf).unwrap();
    }
    assert_eq!(std::fs::read(&path).unwrap(), buf, "golden sweep changed");
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let cfg = config(
        InstanceSpec::Sar { d: 6, rho: 0.3, r: 0.5, o: vec![0, 1, 2] },
        vec![20, 60],
        0.1,
        150,
    );
    let one = with_jobs(Some(1), || sweep_sample_complexity(&cfg)).unwrap().unwrap();
    let many = with_jobs(Some(6), || sweep_sample_complexity(&cfg)).unwrap().unwrap();
    assert_eq!(one, many);
}

#[test]
fn cells_do_not_depend_on_the_grid() {
    let small = config(InstanceSpec::TwoPoint { eps: 0.2, z: 1 }, vec![8], 0.2, 80);
    let large = config(InstanceSpec::TwoPoint { eps: 0.2, z: 1 }, vec![4, 8, 16], 0.2, 80);
    let a = sweep_sample_complexity(&small).unwrap();
    let b = sweep_sample_complexity(&large).unwrap();
    assert_eq!(a[0], b[1]);
}

#[test]
fn learner_without_prior_fails_every_trial_on_one_side() {
    // Both distributions produce identical samples, so PERM answers the same
    // on each and is off by 1 - 2η = 0.4 on one of them in every trial.
    let (d0, d1) = no_alpha_pair(0.3).unwrap();
    let rates: Vec<f64> = [d0, d1]
        .into_iter()
        .map(|inst| {
            let prep = Prepared::new(inst).unwrap();
            let cfg = config(InstanceSpec::TwoPoint { eps: 0.1, z: 1 }, vec![50], 0.1, 50);
            success_probability(&prep, &cfg, 50, 50).unwrap().failure_rate
        })
        .collect();
    assert_eq!(rates.iter().copied().fold(0.0, f64::max), 1.0);
    assert_eq!(rates.iter().copied().fold(1.0, f64::min), 0.0);
}

#[test]
fn wrong_learner_family_is_a_usage_error() {
    let prep = Prepared::new(two_point_instance(0.1, 1).unwrap()).unwrap();
    let err = run_trial(&prep, LearnerSpec::Algorithm1 { gamma: 0.5 }, 5, 5, 0).unwrap_err();
    assert!(err.to_string().contains("does not apply"));
}

#[test]
fn wilson_edges() {
    let (lo, hi) = wilson_interval(0, 50, Z95);
    assert_eq!(lo, 0.0);
    assert!(hi > 0.0 && hi < 0.1);
    let (lo, hi) = wilson_interval(50, 50, Z95);
    assert_eq!(hi, 1.0);
    assert!(lo > 0.9);
}

#[test]
fn left_right_reduction_shapes() {
    let n = 10;
    let shift = n / 2;
    let mut rights = 0;
    for seed in 0..200u64 {
        let triple = left_right_triple(n, seed).unwrap();
        let (l, r, m) = triple.samples(40, 6, seed ^ 0xABCD);
        let red = left_right_to_pu(&l, &r, &m, n, seed).unwrap();
        assert_eq!(red.domain_size, 3 * n / 2);
        assert_eq!(red.s_p.len(), r.len() + red.tails_p);
        assert_eq!(red.s_u.len(), m.len() - 1 + red.tails_u);
        // Original points are shifted past the fresh block; padding stays in it.
        assert!(red.s_p[..r.len()].iter().all(|&x| x >= shift));
        assert!(red.s_p[r.len()..].iter().all(|&x| x < shift));
        assert!(m.iter().any(|&x| x + shift == red.held_out));

        // Positives outside Y leave X as the only consistent concept, so
        // PERM on {Y, X} cannot tell the sides apart.
        let inst = triple.pu_instance().unwrap();
        let class = inst.class.as_ref().unwrap();
        let h = perm_finite(class, &red.s_p, &red.s_u).unwrap();
        let set = &class.concepts()[h.concept_index().unwrap()];
        assert_eq!(set.len(), red.domain_size);
        assert_eq!(red.decide(set.contains(red.held_out)), Side::Right);
        rights += usize::from(!triple.m_from_a);
    }
    assert!((60..=140).contains(&rights), "{rights}/200 triples draw M from B");
}
