use dml_core::autodiff::{Checkpoint, Tape};
use dml_core::laser::LaserParams;
use dml_core::models::{Model, ModelConfig, ModelKind};
use dml_core::signal::{build_dataset, Dataset, DatasetConfig, Role, Sequence};
use dml_core::train::*;
use dml_core::Error;
use ndarray::Array2;

fn small_data(role: Role, n: usize, fraction: f64, seed: u64) -> Dataset {
    let mut cfg = DatasetConfig::new(role, n, fraction, seed);
    cfg.generation.blocks = 1;
    build_dataset(&cfg, &LaserParams::default()).unwrap()
}

fn small_tdnn() -> ModelConfig {
    ModelConfig::Tdnn {
        window: 8,
        hidden_nodes: 16,
        hidden_layers: 1,
    }
}

fn quick(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 4,
        seed,
        ..Default::default()
    }
}

#[test]
fn best_checkpoint_is_taken_at_the_minimum_test_loss() {
    let mut best = BestTracker::new();
    for (i, loss) in [0.5, 0.2, 0.3].into_iter().enumerate() {
        best.offer(i + 1, loss, || format!("weights after epoch {}", i + 1));
    }
    assert_eq!(best.epoch(), Some(2));
    assert_eq!(best.get().map(String::as_str), Some("weights after epoch 2"));
}

#[test]
fn best_tracker_keeps_earlier_ties_and_ignores_nan() {
    let mut best = BestTracker::new();
    assert!(best.offer(1, 0.4, || 1));
    assert!(!best.offer(2, 0.4, || 2));
    assert!(!best.offer(3, f64::NAN, || 3));
    assert_eq!(best.into_inner(), Some(1));
}

#[test]
fn cosine_schedule_runs_from_initial_to_final_rate() {
    let cfg = TrainConfig::default();
    assert_eq!(cfg.learning_rate_at(0, 100), 1e-3);
    assert!((cfg.learning_rate_at(99, 100) - 1e-4).abs() < 1e-18);
    let mid = cfg.learning_rate_at(50, 101);
    assert!((mid - 5.5e-4).abs() < 1e-15);
}

#[test]
fn seeded_training_is_bit_identical() {
    let tr = small_data(Role::Train, 6, 0.5, 3);
    let te = small_data(Role::Validation, 2, 0.5, 3);
    let a = train::<f32>(small_tdnn(), &tr, &te, &quick(3, 9)).unwrap();
    let b = train::<f32>(small_tdnn(), &tr, &te, &quick(3, 9)).unwrap();
    let losses = |r: &TrainRun<f32>| -> Vec<(u64, u64)> {
        r.report
            .epochs
            .iter()
            .map(|e| (e.train_nmse.to_bits(), e.test_nmse.to_bits()))
            .collect()
    };
    assert_eq!(losses(&a), losses(&b));
    assert_eq!(a.best.params, b.best.params);
    let c = train::<f32>(small_tdnn(), &tr, &te, &quick(3, 10)).unwrap();
    assert_ne!(losses(&a), losses(&c));
}

#[test]
fn report_invariants_hold() {
    let tr = small_data(Role::Train, 6, 0.5, 4);
    let te = small_data(Role::Validation, 2, 0.5, 4);
    let run = train::<f32>(small_tdnn(), &tr, &te, &quick(4, 1)).unwrap();
    let r = &run.report;
    assert_eq!(r.epochs.len(), 4);
    let min = r
        .epochs
        .iter()
        .map(|e| e.test_nmse.sqrt())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(r.best_test_nrmse, min);
    assert_eq!(r.epochs[r.best_epoch - 1].test_nmse.sqrt(), min);
    assert!(r.epochs.iter().all(|e| e.train_seconds > 0.0 && e.test_seconds > 0.0));
    let text = r.to_text();
    assert!(text.contains(&format!("best_epoch = {}", r.best_epoch)));
    assert!(text.contains("init_seed = "));
    // The returned parameters are those of the best epoch.
    let (nmse, _) = evaluate(&run.best, &te, NmseMode::Variance).unwrap();
    assert_eq!(nmse, r.best_test_nmse);
}

#[test]
fn reported_test_loss_is_the_training_objective() {
    let te = small_data(Role::Validation, 3, 0.5, 5);
    let model = Model::<f64>::init(small_tdnn(), 2).unwrap();
    let (reported, _) = evaluate(&model, &te, NmseMode::Variance).unwrap();
    let mut tape = Tape::new();
    let bound = model.params.bind(&mut tape, false);
    let len = te.sequence_len;
    let x = Array2::from_shape_fn((te.len(), len), |(r, t)| te.sequences[r].input[t] as f64);
    let xv = tape.constant(x);
    let y = model.forward(&mut tape, &bound, xv).unwrap();
    let targets: Vec<&[f32]> = te.sequences.iter().map(|s| s.target.as_slice()).collect();
    let loss = nmse_loss(&mut tape, y, &targets, NmseMode::Variance, 1.0 / te.len() as f64).unwrap();
    let objective = tape.scalar(loss);
    assert!(
        (reported - objective).abs() <= 1e-12 * objective,
        "{reported} vs {objective}"
    );
}

#[test]
fn checkpoint_round_trip_preserves_test_nmse() {
    let tr = small_data(Role::Train, 4, 0.5, 6);
    let te = small_data(Role::Validation, 2, 0.5, 6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("best.dmlw");
    let cfg = TrainConfig {
        checkpoint: Some(path.clone()),
        ..quick(3, 2)
    };
    let run = train::<f32>(small_tdnn(), &tr, &te, &cfg).unwrap();
    let loaded = Model::<f32>::from_checkpoint(&Checkpoint::load(&path).unwrap()).unwrap();
    let (a, _) = evaluate(&run.best, &te, NmseMode::Variance).unwrap();
    let (b, _) = evaluate(&loaded, &te, NmseMode::Variance).unwrap();
    assert!((a - b).abs() <= 1e-6 * a, "{a} vs {b}");
}

#[test]
fn volterra_is_fitted_in_closed_form() {
    let tr = small_data(Role::Train, 4, 0.25, 7);
    let te = small_data(Role::Validation, 2, 0.25, 7);
    let run = train::<f32>(ModelConfig::desk(ModelKind::Volterra), &tr, &te, &quick(400, 0)).unwrap();
    assert!(run.report.closed_form);
    assert_eq!(run.report.epochs.len(), 1);
    assert!(run.report.best_test_nrmse < 0.05, "{}", run.report.best_test_nrmse);
}

#[test]
fn volterra_gradient_training_is_available() {
    let tr = small_data(Role::Train, 4, 0.25, 7);
    let te = small_data(Role::Validation, 2, 0.25, 7);
    let cfg = TrainConfig {
        volterra_gradient: true,
        ..quick(3, 0)
    };
    let run = train::<f32>(ModelConfig::desk(ModelKind::Volterra), &tr, &te, &cfg).unwrap();
    assert!(!run.report.closed_form);
    assert_eq!(run.report.epochs.len(), 3);
}

#[test]
fn non_finite_loss_aborts_with_the_report_so_far() {
    let mut tr = small_data(Role::Train, 4, 0.5, 8);
    let te = small_data(Role::Validation, 2, 0.5, 8);
    tr.sequences[2].input[10] = f32::NAN;
    match train::<f32>(small_tdnn(), &tr, &te, &quick(3, 0)) {
        Err(Error::Diverged { epoch, report }) => {
            assert_eq!(epoch, 1);
            let report = report.expect("partial report");
            assert!(report.epochs.is_empty());
            assert_eq!(report.model, small_tdnn());
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn patience_stops_early_and_flags_it() {
    let tr = small_data(Role::Train, 4, 0.5, 9);
    let te = small_data(Role::Validation, 2, 0.5, 9);
    // A vanishing learning rate cannot improve on the first epoch.
    let cfg = TrainConfig {
        learning_rate: 1e-30,
        final_learning_rate: 1e-30,
        patience: Some(2),
        ..quick(10, 0)
    };
    let run = train::<f64>(small_tdnn(), &tr, &te, &cfg).unwrap();
    assert!(run.report.early_stopped);
    assert_eq!(run.report.epochs.len(), 3);
    assert_eq!(run.report.best_epoch, 1);
}

#[test]
fn mismatched_symbol_rates_are_rejected() {
    let tr = small_data(Role::Train, 2, 0.5, 1);
    let te = small_data(Role::Validation, 2, 0.25, 1);
    let err = train::<f32>(small_tdnn(), &tr, &te, &quick(1, 0)).unwrap_err();
    assert!(err.is_validation(), "{err}");
}

fn relabel_with(teacher: &Model<f32>, mut d: Dataset) -> Dataset {
    let inputs: Vec<&[f32]> = d.sequences.iter().map(|s| s.input.as_slice()).collect();
    let outputs = teacher.predict(&inputs).unwrap();
    for (s, y) in d.sequences.iter_mut().zip(outputs) {
        s.target = y;
    }
    d
}

/// A wider student TDNN fits the outputs of a fixed random teacher on real
/// drive waveforms. Short sequences and a small student keep this quick;
/// at this budget Adam reaches about 2e-4.
#[test]
fn tdnn_fits_a_planted_teacher() {
    let teacher_config = ModelConfig::Tdnn {
        window: 25,
        hidden_nodes: 32,
        hidden_layers: 1,
    };
    let student = ModelConfig::Tdnn {
        window: 25,
        hidden_nodes: 256,
        hidden_layers: 1,
    };
    let teacher = Model::<f32>::init(teacher_config, 1234).unwrap();
    let tr = relabel_with(&teacher, small_data(Role::Train, 16, 0.5, 11));
    let te = relabel_with(&teacher, small_data(Role::Validation, 4, 0.5, 11));
    let cfg = TrainConfig {
        epochs: 400,
        batch_size: 1,
        final_learning_rate: 1e-5,
        seed: 5,
        ..Default::default()
    };
    let run = train::<f32>(student, &tr, &te, &cfg).unwrap();
    let first = run.report.epochs[0].train_nmse;
    let last = run.report.epochs.last().unwrap().train_nmse;
    assert!(last < 1e-3, "final train NMSE {last}");
    assert!(last < first * 1e-3, "from {first} to {last}");
}

/// The full planted-teacher check at desk scale: 512 sequences of 1024
/// samples, the desk TDNN as both teacher shape and student, 400 epochs.
/// Takes hours on one core.
#[test]
#[ignore]
fn desk_tdnn_recovers_a_planted_teacher() {
    let config = ModelConfig::desk(ModelKind::Tdnn);
    let teacher = Model::<f32>::init(config, 1234).unwrap();
    let params = LaserParams::default();
    let make = |role, n| build_dataset(&DatasetConfig::new(role, n, 0.5, 11), &params).unwrap();
    let tr = relabel_with(&teacher, make(Role::Train, 512));
    let te = relabel_with(&teacher, make(Role::Validation, 64));
    let cfg = TrainConfig {
        epochs: 400,
        seed: 5,
        ..Default::default()
    };
    let run = train::<f32>(config, &tr, &te, &cfg).unwrap();
    let last = run.report.epochs.last().unwrap().train_nmse;
    assert!(last < 1e-4, "final train NMSE {last}");
}

#[test]
fn sweep_table_has_one_row_per_model_and_rate_and_is_reproducible() {
    let models = [ModelConfig::desk(ModelKind::Volterra), small_tdnn()];
    let data = |f: f64| Ok((small_data(Role::Train, 2, f, 7), small_data(Role::Validation, 2, f, 7)));
    let a = sweep_symbol_rates::<f32, _>(&models, &SWEEP_FRACTIONS, &quick(1, 7), data).unwrap();
    let b = sweep_symbol_rates::<f32, _>(&models, &SWEEP_FRACTIONS, &quick(1, 7), data).unwrap();
    let csv = a.to_csv();
    assert_eq!(csv.lines().count(), models.len() * 6 + 1);
    assert_eq!(csv.lines().next(), Some("model,fraction,nrmse"));
    assert!(csv.contains("\nvolterra,0.1,"));
    assert!(csv.contains("\ntdnn,1.25,"));
    assert_eq!(csv, b.to_csv());
    assert_eq!(a.curve(ModelKind::Tdnn).len(), 6);
}

#[test]
fn monotone_check_allows_small_dips() {
    assert!(nondecreasing_within(&[0.1, 0.2, 0.19, 0.3], 0.2));
    assert!(!nondecreasing_within(&[0.1, 0.2, 0.15, 0.3], 0.2));
    assert!(nondecreasing_within(&[], 0.0));
}

#[test]
fn benchmark_reports_positive_times_without_warm_up() {
    let data = small_data(Role::Validation, 2, 0.5, 12);
    let models = vec![
        Model::<f32>::init(ModelConfig::desk(ModelKind::Volterra), 0).unwrap(),
        Model::<f32>::init(small_tdnn(), 0).unwrap(),
    ];
    let table = benchmark_epoch_time(&models, &data, &LaserParams::default(), &quick(1, 0), 5).unwrap();
    assert_eq!(table.samples, data.total_samples());
    assert_eq!(table.solver.runs.len(), 5);
    for m in &table.models {
        assert_eq!(m.train.runs.len(), 5);
        assert_eq!(m.test.runs.len(), 5);
        assert!(m.train.runs.iter().chain(&m.test.runs).all(|&t| t > 0.0));
        assert!(table.solver_over_inference(m) > 0.0);
    }
    let csv = table.to_csv();
    assert_eq!(csv.lines().count(), models.len() + 2);
    assert!(csv.lines().last().unwrap().starts_with("solver,"));
}

#[test]
fn warm_up_call_is_not_measured() {
    let mut calls = 0;
    let t = time_runs(3, || {
        calls += 1;
        if calls == 1 {
            std::thread::sleep(std::time::Duration::from_millis(50));
        }
        Ok(())
    })
    .unwrap();
    assert_eq!(calls, 4);
    assert!(t.runs.iter().all(|&r| r < 0.04));
}

#[test]
fn timing_statistics() {
    let t = Timing {
        runs: vec![1.0, 2.0, 3.0],
    };
    assert_eq!(t.mean(), 2.0);
    assert!((t.cv() - 0.5).abs() < 1e-15);
}

#[test]
fn eye_counts_are_conserved() {
    let w: Vec<f64> = (0..32 * 40).map(|t| ((t as f64) * 0.37).sin() * 0.7 + 0.4).collect();
    let eye = eye_diagram(&w, 32, DEFAULT_AMPLITUDE_BINS).unwrap();
    assert_eq!(eye.total(), w.len() as u64);
    assert_eq!(eye.samples, w.len() as u64);
    assert_eq!(eye.columns(), 64);
}

#[test]
fn ideal_pam4_shows_four_rails_at_symbol_centre() {
    let levels = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
    let symbols: Vec<f64> = (0..64).map(|i| levels[(i / 2) % 4]).collect();
    let eye = eye_diagram(&ideal_pam4(&symbols, 16), 16, 128).unwrap();
    for c in eye.center_columns() {
        assert_eq!(eye.occupied_bins(c), vec![0, 42, 85, 127]);
    }
}

#[test]
fn two_symbol_periodic_input_folds_to_one_trace() {
    let period: Vec<f64> = (0..16).map(|t| 0.5 + 0.45 * (t as f64 * 0.4).cos()).collect();
    let w: Vec<f64> = period.iter().cycle().take(16 * 50).copied().collect();
    let eye = eye_diagram(&w, 8, 128).unwrap();
    for c in 0..eye.columns() {
        assert_eq!(eye.occupied_bins(c).len(), 1, "column {c}");
    }
}

#[test]
fn eye_rejects_partial_symbols() {
    let err = eye_diagram(&[0.5; 33], 8, 128).unwrap_err();
    assert!(err.is_validation());
}

#[test]
fn eye_pgm_has_binary_header_and_grid_dimensions() {
    let w: Vec<f64> = (0..32 * 4).map(|t| (t % 7) as f64 / 7.0).collect();
    let eye = eye_diagram(&w, 32, 128).unwrap();
    let pgm = eye.to_pgm();
    let header = b"P5\n64 128\n255\n";
    assert_eq!(&pgm[..header.len()], header);
    assert_eq!(pgm.len(), header.len() + 64 * 128);
    assert_eq!(pgm[header.len()..].iter().copied().max(), Some(255));
    let csv = eye.to_csv();
    assert_eq!(csv.lines().count(), 129);
    assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 65);
}

#[test]
fn eye_study_windows_and_controls() {
    let generation = dml_core::signal::GenerationConfig {
        blocks: 1,
        ..Default::default()
    };
    let study = eye_study(&LaserParams::default(), 1.0, 64, 3, &generation).unwrap();
    assert_eq!(study.window, 256);
    assert_eq!(study.solver.len(), 64 * 32);
    assert_eq!(study.ideal.len(), study.input.len());
    for w in study.solver.chunks(study.window) {
        let max = w.iter().copied().fold(f64::MIN, f64::max);
        let min = w.iter().copied().fold(f64::MAX, f64::min);
        assert_eq!((min, max), (0.0, 1.0));
    }
    assert!(eye_study(&LaserParams::default(), 1.0, 63, 3, &generation).is_err());
    let model = Model::<f32>::init(small_tdnn(), 0).unwrap();
    let y = predict_windows(&model, &study.input, study.window).unwrap();
    assert_eq!(y.len(), study.input.len());
}

#[test]
fn sequences_read_from_disk_train_identically() {
    let tr = small_data(Role::Train, 3, 0.5, 13);
    let te = small_data(Role::Validation, 2, 0.5, 13);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("train.dmld");
    dml_core::signal::write_dataset(&p, &tr).unwrap();
    let back = dml_core::signal::read_dataset(&p).unwrap();
    let strip = |d: &Dataset| -> Vec<Sequence> {
        d.sequences
            .iter()
            .map(|s| Sequence {
                symbols: Vec::new(),
                ..s.clone()
            })
            .collect()
    };
    assert_eq!(strip(&back), strip(&tr));
    let a = train::<f32>(small_tdnn(), &tr, &te, &quick(2, 0)).unwrap();
    let b = train::<f32>(small_tdnn(), &back, &te, &quick(2, 0)).unwrap();
    assert_eq!(
        a.report.epochs[1].test_nmse.to_bits(),
        b.report.epochs[1].test_nmse.to_bits()
    );
}
