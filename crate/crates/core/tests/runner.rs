use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use labelind::domain::{ImputationMethod, ModelKind};
use labelind::runner::artifacts::RunLayout;
use labelind::runner::{load_report, report_case, run_experiment, DataSource, ExperimentConfig, RunError};
use labelind::synthgen::GeneratorConfig;

fn small_config(seed: u64) -> ExperimentConfig {
    let mut config = ExperimentConfig::new(DataSource::Synthetic(GeneratorConfig {
        n_cases: 3_000,
        detention_rate: 0.05,
        seed,
        ..GeneratorConfig::default()
    }));
    config.seed = seed;
    config.n_subsets = 3;
    config.methods = vec![ImputationMethod::Corr, ImputationMethod::Nn];
    config.models = vec![ModelKind::Logistic, ModelKind::Xgboost];
    config.hyperparameters.xgboost.n_trees = 50;
    config
}

fn prediction_bytes(dir: &Path, config: &ExperimentConfig) -> Vec<Vec<u8>> {
    let layout = RunLayout::new(dir);
    let mut out = Vec::new();
    for &m in &config.methods {
        for &k in &config.models {
            for s in 0..config.n_subsets {
                out.push(fs::read(layout.predictions(m, k, s)).unwrap());
            }
        }
    }
    out
}

#[test]
fn default_grid_has_every_cell() {
    let config = ExperimentConfig::new(DataSource::Synthetic(GeneratorConfig::default()));
    assert_eq!(config.grid_size(), 375);
    let out = run_experiment(&config).unwrap();
    assert_eq!(out.trained, 375);
    assert_eq!(out.predictions.len(), 375);
    assert_eq!(out.report.mcc.cells.len(), 15);
    for cell in &out.report.mcc.cells {
        assert_eq!(cell.determinate_values.len(), 25);
        assert_eq!(cell.indeterminate_values.len(), 25);
    }
    assert_eq!(out.report.effect.method_pairs.len(), 10);
    assert_eq!(out.report.effect.model_pairs.len(), 3);
}

#[test]
fn reduced_grid_finishes_within_a_minute() {
    let mut config = ExperimentConfig::new(DataSource::Synthetic(GeneratorConfig::default()));
    config.methods = vec![ImputationMethod::Corr, ImputationMethod::ObsIp];
    config.models = vec![ModelKind::Xgboost];
    config.n_subsets = 3;
    let start = Instant::now();
    let out = run_experiment(&config).unwrap();
    assert_eq!(out.trained, 6);
    assert!(start.elapsed() < Duration::from_secs(60), "{:?}", start.elapsed());
}

#[test]
fn reruns_write_identical_predictions() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut config = small_config(3);
    config.output_dir = Some(a.path().to_path_buf());
    run_experiment(&config).unwrap();
    config.output_dir = Some(b.path().to_path_buf());
    run_experiment(&config).unwrap();
    assert_eq!(prediction_bytes(a.path(), &config), prediction_bytes(b.path(), &config));
    assert_eq!(
        fs::read(RunLayout::new(a.path()).report("report.json")).unwrap(),
        fs::read(RunLayout::new(b.path()).report("report.json")).unwrap()
    );
}

#[test]
fn completed_runs_resume_without_training() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(4);
    config.output_dir = Some(dir.path().to_path_buf());
    let first = run_experiment(&config).unwrap();
    assert_eq!((first.trained, first.reused), (config.grid_size(), 0));

    // Lose one cell; only that cell is retrained.
    let layout = RunLayout::new(dir.path());
    fs::remove_file(layout.predictions(ImputationMethod::Nn, ModelKind::Xgboost, 1)).unwrap();
    let second = run_experiment(&config).unwrap();
    assert_eq!((second.trained, second.reused), (1, config.grid_size() - 1));
    assert_eq!(second.predictions, first.predictions);

    let third = run_experiment(&config).unwrap();
    assert_eq!((third.trained, third.reused), (0, config.grid_size()));
    assert_eq!(load_report(dir.path()).unwrap(), first.report);
}

#[test]
fn changed_config_in_an_existing_run_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(5);
    config.output_dir = Some(dir.path().to_path_buf());
    run_experiment(&config).unwrap();
    config.seed += 1;
    assert!(matches!(run_experiment(&config), Err(RunError::ConfigMismatch { .. })));
}

#[test]
fn adding_a_method_leaves_other_cells_unchanged() {
    let mut one = small_config(6);
    one.methods = vec![ImputationMethod::Corr];
    let mut two = small_config(6);
    two.methods = vec![ImputationMethod::Daf, ImputationMethod::Corr];
    let a = run_experiment(&one).unwrap();
    let b = run_experiment(&two).unwrap();
    for p in &a.predictions {
        let q = b
            .predictions
            .iter()
            .find(|q| (q.method, q.model, q.subset_index) == (p.method, p.model, p.subset_index))
            .unwrap();
        assert_eq!(p, q);
    }
}

#[test]
fn case_report_matches_the_stored_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(7);
    config.output_dir = Some(dir.path().to_path_buf());
    let out = run_experiment(&config).unwrap();
    let ids: Vec<String> = out.test.case_ids.iter().take(3).cloned().collect();
    let summaries = report_case(&ids, dir.path()).unwrap();
    let layout = RunLayout::new(dir.path());
    for summary in &summaries {
        assert_eq!(summary.means.len(), 4);
        for mean in &summary.means {
            let mut total = 0.0;
            for s in 0..config.n_subsets {
                let text = fs::read_to_string(layout.predictions(mean.method, mean.model, s)).unwrap();
                let line = text.lines().find(|l| l.split(',').next() == Some(&summary.case_id)).unwrap();
                total += line.split(',').nth(1).unwrap().parse::<f64>().unwrap();
            }
            assert_eq!(mean.n_subsets, config.n_subsets);
            assert!((mean.mean - total / config.n_subsets as f64).abs() <= 1e-15);
        }
    }
    let missing = report_case(&["not-a-case".to_string()], dir.path());
    assert!(matches!(missing, Err(RunError::UnknownCase(id)) if id == "not-a-case"));
}
