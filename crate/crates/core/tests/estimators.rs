use rayon::prelude::*;

use trapwalk::estimators::{batch_means_speed, estimate_speed, estimate_speed_regenerative};
use trapwalk::experiment::{GridPoint, Model};
use trapwalk::walk_engine::RunOptions;

fn point(model: Model) -> GridPoint {
    GridPoint {
        model,
        lambda: 0.5,
        alpha: 2.0,
        q: (model != Model::Bouchaud).then_some(0.5),
        lambda_crit: None,
    }
}

#[test]
fn interval_coverage_over_200_experiments() {
    let p = point(Model::Bouchaud);
    let v = p.v_theory();
    let (steps, replicas) = (20_000, 16);
    let covered = (0..200u64)
        .into_par_iter()
        .filter(|&e| {
            let runs = p.replicas(steps, replicas, 1000 + e, &RunOptions::steps(steps)).unwrap();
            estimate_speed(&runs).unwrap().covers(v)
        })
        .count();
    assert!(covered >= 180, "covered {covered}/200");
}

#[test]
fn regenerative_speed_agrees_per_trace() {
    let models = [
        Model::Bouchaud,
        Model::CombReduced,
        Model::CombGraph,
        Model::LadderReduced,
        Model::LadderGraph,
    ];
    for model in models {
        let p = point(model);
        let steps = 1_000_000;
        let runs = p.replicas(steps, 3, 5, &RunOptions::steps(steps)).unwrap();
        for (r, run) in runs.iter().enumerate() {
            let direct = run.speed();
            let regen = estimate_speed_regenerative(run).unwrap();
            let rel = (regen - direct).abs() / direct;
            assert!(rel < 0.01, "{model} replica {r}: {direct} vs {regen}");
        }
    }
}

#[test]
fn batch_means_agree_with_replicas() {
    let p = point(Model::CombReduced);
    let steps = 1_000_000;
    let runs = p
        .replicas(steps, 8, 3, &RunOptions::steps(steps).with_batches(32))
        .unwrap();
    let across = estimate_speed(&runs).unwrap();
    for run in &runs {
        let within = batch_means_speed(run).unwrap();
        assert_eq!(within.replicas, 32);
        assert!(
            (within.v_hat - across.v_hat).abs() < 0.05 * across.v_hat,
            "{} vs {}",
            within.v_hat,
            across.v_hat
        );
    }
    assert!((across.v_hat - p.v_theory()).abs() / p.v_theory() < 0.03);
}
