use gamilt::exec::with_threads;
use gamilt::scenario::{self, Scenario};
use gamilt::{gami, io, metrics, purify, GamiConfig, GamiModel, ResponseKind, SplitTag, StageConfig};
use proptest::prelude::*;

fn quick_config(s: &Scenario) -> GamiConfig {
    let stage = StageConfig {
        max_iterations: 60,
        patience: 10,
        ..StageConfig::default()
    };
    GamiConfig {
        rounds: 2,
        main: stage,
        interaction: stage,
        ..s.fit_config()
    }
}

fn quick_run(model_id: u8, response: ResponseKind, seed: u64) -> scenario::ScenarioRun {
    let s = Scenario::new(model_id, 4000, 0.5, response, seed);
    scenario::run_with(&s, &quick_config(&s)).unwrap()
}

fn train_rows(run: &scenario::ScenarioRun) -> Vec<usize> {
    run.sim.data.rows(SplitTag::Train)
}

#[test]
fn thread_count_does_not_change_the_fit() {
    let s = Scenario::new(2, 3000, 0.5, ResponseKind::Continuous, 11);
    let (sim, bins) = scenario::simulate(&s).unwrap();
    let config = quick_config(&s);
    let one = with_threads(1, || gami::fit(&sim.data, &bins, &config).unwrap());
    let four = with_threads(4, || gami::fit(&sim.data, &bins, &config).unwrap());
    assert_eq!(one, four);
    assert_eq!(io::model_to_string(&one).unwrap(), io::model_to_string(&four).unwrap());
}

#[test]
fn save_load_save_is_byte_identical() {
    let run = quick_run(3, ResponseKind::Continuous, 5);
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    io::save_model(&run.model, &a).unwrap();
    let loaded = io::load_model(&a).unwrap();
    io::save_model(&loaded, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let cols = run.sim.data.columns();
    assert_eq!(run.model.predict(cols).unwrap(), loaded.predict(cols).unwrap());
    let store = loaded.effects.as_ref().unwrap();
    assert_eq!(store.predict(&loaded.trees, cols), run.model.effects.as_ref().unwrap().predict(&run.model.trees, cols));
}

#[test]
fn empty_model_round_trips() {
    let run = quick_run(3, ResponseKind::Continuous, 6);
    let mut model: GamiModel = run.model.clone();
    model.trees.clear();
    model.rounds.clear();
    model.effects = None;
    let text = io::model_to_string(&model).unwrap();
    let back = io::model_from_str(&text).unwrap();
    assert_eq!(back, model);
    let pred = back.predict(run.sim.data.columns()).unwrap();
    assert!(pred.iter().all(|&g| g == model.intercept));

    let store = purify::purify(&back, run.sim.data.columns(), &train_rows(&run)).unwrap();
    assert!(store.mains.is_empty() && store.interactions.is_empty());
}

#[test]
fn purification_keeps_predictions_and_is_idempotent() {
    let run = quick_run(2, ResponseKind::Continuous, 7);
    let cols = run.sim.data.columns();
    let rows = train_rows(&run);
    let raw = run.model.predict(cols).unwrap();
    let store = run.model.effects.clone().unwrap();
    let purified = store.predict(&run.model.trees, cols);
    let scale = raw.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (a, b) in raw.iter().zip(&purified) {
        assert!((a - b).abs() <= 1e-8 * scale, "{a} vs {b}");
    }
    assert!(store.verify_orthogonality(&run.model.trees, cols, &rows).passes(1e-6));

    let mut again = store.clone();
    again.purify_pass(&run.model.trees, cols, &rows).unwrap();
    for (a, b) in store.interactions.iter().zip(&again.interactions) {
        for (x, y) in a.h_j.iter().zip(&b.h_j).chain(a.h_k.iter().zip(&b.h_k)) {
            assert!((x - y).abs() <= 1e-8 * scale, "{x} vs {y}");
        }
    }
    assert!((store.intercept - again.intercept).abs() <= 1e-8 * scale);
}

#[test]
fn importance_is_sorted_and_covers_every_term() {
    let run = quick_run(2, ResponseKind::Continuous, 8);
    let store = run.model.effects.as_ref().unwrap();
    let imp = &store.importance;
    assert_eq!(imp.len(), store.terms().len());
    assert!(imp.windows(2).all(|w| w[0].importance >= w[1].importance));
    assert!(imp.iter().all(|t| t.importance >= 0.0));
}

#[test]
fn binary_response_fits_with_logloss() {
    let run = quick_run(2, ResponseKind::Binary, 9);
    let auc = run.metrics.auc.unwrap();
    assert!(auc > 0.7, "auc {auc}");
    let p = run.model.predict_response(run.sim.data.columns()).unwrap();
    assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn fit_beats_the_intercept_only_model() {
    let run = quick_run(3, ResponseKind::Continuous, 10);
    let test = run.sim.data.rows(SplitTag::Test);
    let y: Vec<f64> = test.iter().map(|&i| run.sim.data.response()[i]).collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let baseline = metrics::mse(&y, &vec![mean; y.len()]).unwrap();
    assert!(run.metrics.mse < 0.5 * baseline, "{} vs {baseline}", run.metrics.mse);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auc_ignores_monotone_rescaling(
        pairs in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 4..60),
        a in 0.1f64..10.0,
        b in -3.0f64..3.0,
    ) {
        let y: Vec<f64> = pairs.iter().map(|&(_, c)| if c { 1.0 } else { 0.0 }).collect();
        prop_assume!(y.contains(&1.0) && y.contains(&0.0));
        let s: Vec<f64> = pairs.iter().map(|&(v, _)| v).collect();
        let t: Vec<f64> = s.iter().map(|v| a * v + b).collect();
        let flipped: Vec<f64> = s.iter().map(|v| -v).collect();
        let auc = metrics::auc(&y, &s).unwrap();
        prop_assert!((auc - metrics::auc(&y, &t).unwrap()).abs() < 1e-12);
        prop_assert!((auc + metrics::auc(&y, &flipped).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simulation_is_reproducible_and_bounded(seed in 0u64..1000, model_id in 1u8..=4, rho in 0.0f64..0.9) {
        let config = gamilt::SimConfig::new(model_id, 200, rho, ResponseKind::Continuous, seed);
        let a = gamilt::simgen::generate(&config).unwrap();
        let b = gamilt::simgen::generate(&config).unwrap();
        prop_assert_eq!(a.data.columns(), b.data.columns());
        prop_assert_eq!(a.data.response(), b.data.response());
        prop_assert!(a.data.columns().iter().flatten().all(|v| v.abs() <= 2.5));
    }
}
