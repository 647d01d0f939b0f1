use proptest::prelude::*;
use soa_drive::harness::{plant_cases, ExperimentConfig, PlantSelection};
use soa_drive::optim::{
    aco_build_graph, aco_run_observed, ga_run, ga_run_observed, in_convergence_region, pso_run, pso_run_observed, shell,
    ACOConfig, FitnessContext, GAConfig, PSOConfig, CONVERGENCE_MARGIN,
};
use soa_drive::signals::{self, V_MAX};

fn canonical() -> FitnessContext {
    let cfg = ExperimentConfig { plant: PlantSelection::Canonical, ..ExperimentConfig::default() };
    plant_cases(&cfg).unwrap().remove(0).ctx
}

fn small_pso(seed: u64) -> PSOConfig {
    PSOConfig { iter_max: 8, n_particles: 10, seed, ..PSOConfig::default() }
}

fn small_aco(seed: u64) -> ACOConfig {
    ACOConfig { n_ants: 8, n_generations: 6, seed, ..ACOConfig::default() }
}

fn small_ga(seed: u64) -> GAConfig {
    GAConfig { pop_size: 10, n_generations: 8, tournsize: 3, seed, ..GAConfig::default() }
}

fn non_increasing(curve: &[f64]) -> bool {
    curve.windows(2).all(|w| w[1] <= w[0])
}

#[test]
fn canonical_step_cost_golden() {
    // 8-bit quantised step on the canonical plant
    assert_eq!(canonical().step_cost().unwrap(), 0.04020938423553247);
}

#[test]
fn single_particle_without_iterations_returns_the_step() {
    let ctx = canonical();
    let cfg = PSOConfig { n_particles: 1, iter_max: 0, ..PSOConfig::default() };
    let record = pso_run(&ctx, &cfg).unwrap();
    let step = ctx.quantized(signals::step(ctx.layout()).unwrap().samples());
    assert_eq!(record.best_waveform.samples(), step.as_slice());
    assert_eq!(record.best_cost, ctx.step_cost().unwrap());
    assert_eq!(record.learning_curve, vec![record.best_cost]);
}

#[test]
fn embedded_step_bounds_the_result() {
    let ctx = canonical();
    let step_cost = ctx.step_cost().unwrap();
    for seed in 0..3 {
        let record = pso_run(&ctx, &small_pso(seed)).unwrap();
        assert!(record.best_cost <= step_cost);
        assert!(record.learning_curve[0] <= step_cost);
    }
}

#[test]
fn ga_without_variation_keeps_the_initial_best() {
    let ctx = canonical();
    let cfg = GAConfig { cxpb: 0.0, mutpb: 0.0, ..small_ga(4) };
    let record = ga_run(&ctx, &cfg).unwrap();
    assert!(record.learning_curve.iter().all(|&c| c == record.learning_curve[0]));
    assert_eq!(record.evaluations, cfg.pop_size, "selection alone never creates a new genome");
}

#[test]
fn coefficient_clamp_every_iteration() {
    let ctx = canonical();
    let mut seen = 0;
    pso_run_observed(&ctx, &small_pso(9), |_, swarm| {
        for p in swarm {
            assert!(in_convergence_region(p.w, p.c1, p.c2), "w={} c={}", p.w, p.c1);
            assert!(p.w >= 2.0 * CONVERGENCE_MARGIN && p.w <= 1.0 - CONVERGENCE_MARGIN);
            assert_eq!(p.c1, p.c2);
        }
        seen += 1;
    })
    .unwrap();
    assert_eq!(seen, 9);
}

#[test]
fn learning_curves_are_non_increasing() {
    let ctx = canonical();
    let pso = pso_run(&ctx, &small_pso(1)).unwrap();
    let aco = soa_drive::optim::aco_run(&ctx, &small_aco(1)).unwrap();
    let ga = ga_run(&ctx, &small_ga(1)).unwrap();
    assert_eq!(pso.learning_curve.len(), 9);
    assert_eq!(aco.learning_curve.len(), 6);
    assert_eq!(ga.learning_curve.len(), 9);
    for r in [&pso, &aco, &ga] {
        assert!(non_increasing(&r.learning_curve), "{}: {:?}", r.algorithm, r.learning_curve);
        assert_eq!(*r.learning_curve.last().unwrap(), r.best_cost);
    }
}

#[test]
fn best_waveform_reproduces_best_cost() {
    let ctx = canonical();
    let record = ga_run(&ctx, &small_ga(2)).unwrap();
    assert_eq!(ctx.evaluate_waveform(&record.best_waveform).unwrap(), record.best_cost);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn pso_stays_in_the_shell(seed in any::<u64>()) {
        let ctx = canonical();
        let cfg = small_pso(seed);
        let hull = shell(&ctx, &cfg).unwrap();
        let max_v = cfg.max_velocity();
        let mut ok = true;
        pso_run_observed(&ctx, &cfg, |_, swarm| {
            for p in swarm {
                ok &= hull.contains(&p.position) && hull.contains(&p.pbest_position);
                ok &= p.velocity.iter().all(|v| v.abs() <= max_v);
            }
        }).unwrap();
        prop_assert!(ok);
    }

    #[test]
    fn aco_paths_decode_inside_the_level_range(seed in any::<u64>()) {
        let ctx = canonical();
        let cfg = small_aco(seed);
        let bounds = aco_build_graph(&cfg, ctx.layout()).unwrap().bounds(ctx.layout()).unwrap();
        let mut ok = true;
        aco_run_observed(&ctx, &cfg, |_, graph, drives| {
            ok &= drives.len() == cfg.n_ants && drives.iter().all(|d| bounds.contains(d));
            ok &= graph.all_weights().all(|w| w > 0.0 && w.is_finite());
        }).unwrap();
        prop_assert!(ok);
    }

    #[test]
    fn ga_genes_stay_in_range(seed in any::<u64>()) {
        let ctx = canonical();
        let cfg = GAConfig { mut_sigma: 0.6, indpb: 0.5, ..small_ga(seed) };
        let mut ok = true;
        ga_run_observed(&ctx, &cfg, |_, pop| {
            ok &= pop.len() == cfg.pop_size;
            ok &= pop.iter().all(|g| g.iter().all(|v| (0.0..=V_MAX).contains(v)));
        }).unwrap();
        prop_assert!(ok);
    }
}
