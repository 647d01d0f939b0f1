use std::fs;
use std::path::Path;

use soa_drive::harness::{run_campaign, write_campaign, ExperimentConfig, PlantSelection};
use soa_drive::optim::{self, ACOConfig, AlgoConfig, Algorithm, GAConfig, PSOConfig};

fn tiny(plant: PlantSelection) -> ExperimentConfig {
    ExperimentConfig {
        plant,
        n_repeats: 2,
        pso: PSOConfig { iter_max: 4, n_particles: 8, ..PSOConfig::default() },
        aco: ACOConfig { n_ants: 6, n_generations: 4, ..ACOConfig::default() },
        ga: GAConfig { pop_size: 8, n_generations: 4, tournsize: 2, ..GAConfig::default() },
        ..ExperimentConfig::default()
    }
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((path.strip_prefix(dir).unwrap().display().to_string(), fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn records_are_byte_identical_across_reruns() {
    let cfg = tiny(PlantSelection::Canonical);
    let ctx = soa_drive::harness::plant_cases(&cfg).unwrap().remove(0).ctx;
    for algorithm in Algorithm::ALL {
        let algo = cfg.algo_config(algorithm).with_seed(11);
        let a = optim::run(&ctx, &algo).unwrap().to_json().unwrap();
        let b = optim::run(&ctx, &algo).unwrap().to_json().unwrap();
        assert_eq!(a, b, "{algorithm}");
    }
}

#[test]
fn different_seeds_give_different_runs() {
    let cfg = tiny(PlantSelection::Canonical);
    let ctx = soa_drive::harness::plant_cases(&cfg).unwrap().remove(0).ctx;
    let run = |seed| optim::run(&ctx, &AlgoConfig::Ga(cfg.ga.clone()).with_seed(seed)).unwrap();
    assert_ne!(run(1).best_waveform, run(2).best_waveform);
}

#[test]
fn campaign_outputs_are_byte_identical() {
    let cfg = tiny(PlantSelection::AllVariants);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_campaign(&run_campaign(&cfg).unwrap(), a.path()).unwrap();
    write_campaign(&run_campaign(&cfg).unwrap(), b.path()).unwrap();
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    // records + errors + spreads + step reference + curves + 2 summaries
    assert_eq!(sa.len(), 3 * 10 * 2 + 3 + 3 * 10 + 2);
    assert_eq!(sa, sb);
}

#[test]
fn campaign_matrix_is_complete() {
    let cfg = ExperimentConfig { n_repeats: 3, ..tiny(PlantSelection::AllVariants) };
    let result = run_campaign(&cfg).unwrap();
    assert_eq!(result.cells.len(), 3 * 10 * 3);
    for algorithm in Algorithm::ALL {
        for v in 0..10 {
            for r in 0..3 {
                assert!(result.cell(algorithm, v, r).is_some_and(|c| c.record().is_some()));
            }
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let curves = soa_drive::harness::emit_learning_curves(&result, dir.path()).unwrap();
    assert_eq!(curves.len(), 30);
    let text = fs::read_to_string(&curves[0]).unwrap();
    assert_eq!(text.lines().next().unwrap(), "iteration,repeat_0,repeat_1,repeat_2");
    for col in 1..=3 {
        let values: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] <= w[0]));
    }
}
