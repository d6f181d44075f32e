use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Result;
use dml_core::autodiff::{Checkpoint, Real};
use dml_core::config::KeyValues;
use dml_core::laser::{drive_from_normalized, solve, steady_state, DriveConfig, LaserParams, SolverTolerances};
use dml_core::models::{Model, ModelConfig, ModelKind};
use dml_core::signal::{
    build_dataset, minmax_normalize, read_dataset, write_dataset, DatasetConfig, GenerationConfig, Role,
};
use dml_core::train::{
    benchmark_epoch_time, eval_batch, eye_diagram, eye_study, nmse_with, predict_windows, sweep_symbol_rates,
    train_from, NmseMode, TrainConfig, TrainReport, DEFAULT_AMPLITUDE_BINS, SWEEP_FRACTIONS,
};
use dml_core::Error;

use crate::args::{
    BenchmarkArgs, Command, Common, EvaluateArgs, EyeArgs, GenerateArgs, SimulateArgs, SweepArgs, TrainArgs,
};
use crate::settings::{create_dir, require_file, write_atomic, Settings};

const COMMON: &[&str] = &["out", "profile", "seed", "deterministic", "laser-params"];
const TOLERANCE: &[&str] = &["rel-tol", "abs-tol"];
const OPTIM: &[&str] = &[
    "epochs",
    "batch-size",
    "micro-batch",
    "learning-rate",
    "final-learning-rate",
    "nmse-mode",
    "patience",
    "volterra-gradient",
    "precision",
];
const ARCH: &[&str] = &[
    "memory",
    "ridge",
    "window",
    "hidden-nodes",
    "hidden-layers",
    "layers",
    "embedding",
    "heads",
    "conv-window",
    "mlp-hidden",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Profile {
    Desk,
    Full,
}

impl Profile {
    fn train_sequences(self) -> usize {
        match self {
            Profile::Desk => 1 << 9,
            Profile::Full => 1 << 13,
        }
    }

    /// 2⁶ sequences at desk scale, 2¹⁷ samples at full scale.
    fn test_sequences(self) -> usize {
        match self {
            Profile::Desk => 1 << 6,
            Profile::Full => (1 << 17) / GenerationConfig::default().sequence_len(),
        }
    }

    fn epochs(self) -> usize {
        match self {
            Profile::Desk => 50,
            Profile::Full => 400,
        }
    }

    fn model(self, kind: ModelKind) -> ModelConfig {
        match self {
            Profile::Desk => ModelConfig::desk(kind),
            Profile::Full => ModelConfig::full(kind),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Desk => "desk",
            Profile::Full => "full",
        })
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            _ => Err(Error::validation(format!(
                "unknown profile {s:?}; expected desk or full"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Precision {
    F32,
    F64,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err(Error::validation(format!(
                "unknown precision {s:?}; expected f32 or f64"
            ))),
        }
    }
}

/// State shared by every command: resolved settings and the output directory.
struct Run {
    s: Settings,
    out: PathBuf,
    profile: Profile,
    seed: u64,
}

impl Run {
    fn start(common: &Common, flags: &KeyValues, groups: &[&[&str]]) -> Result<Self> {
        let mut allowed: Vec<&str> = COMMON.to_vec();
        for g in groups {
            allowed.extend_from_slice(g);
        }
        let mut s = Settings::new(common.config.as_deref(), flags, &allowed)?;
        let profile = s.value("profile", Profile::Desk)?;
        let seed = s.value("seed", 1u64)?;
        // Every computation is seeded and ordered, so this only documents intent.
        s.value("deterministic", false)?;
        let out = s.path("out", "dml-out")?;
        create_dir(&out)?;
        Ok(Self { s, out, profile, seed })
    }

    fn laser(&mut self) -> Result<LaserParams> {
        let params = match self.s.optional::<String>("laser-params")? {
            Some(p) => {
                let path = PathBuf::from(p);
                require_file(&path, "laser parameter file")?;
                LaserParams::load(&path)?
            }
            None => LaserParams::default(),
        };
        self.s.note(format!("laser fingerprint {}", params.fingerprint()));
        Ok(params)
    }

    fn tolerances(&mut self) -> Result<SolverTolerances> {
        let d = SolverTolerances::default();
        Ok(SolverTolerances {
            rel_tol: self.s.value("rel-tol", d.rel_tol)?,
            abs_tol: self.s.value("abs-tol", d.abs_tol)?,
        })
    }

    fn train_config(&mut self) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            epochs: self.s.value("epochs", self.profile.epochs())?,
            batch_size: self.s.value("batch-size", d.batch_size)?,
            micro_batch: self.s.value("micro-batch", d.micro_batch)?,
            learning_rate: self.s.value("learning-rate", d.learning_rate)?,
            final_learning_rate: self.s.value("final-learning-rate", d.final_learning_rate)?,
            nmse_mode: self.s.value("nmse-mode", d.nmse_mode)?,
            patience: self.s.optional("patience")?,
            volterra_gradient: self.s.value("volterra-gradient", false)?,
            seed: self.seed,
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Profile architectures with the given overrides applied.
    fn models(&mut self, kinds: &[ModelKind]) -> Result<Vec<ModelConfig>> {
        let mut used = BTreeSet::new();
        let mut out = Vec::with_capacity(kinds.len());
        for &kind in kinds {
            let mut c = self.profile.model(kind);
            let s = &mut self.s;
            let mut set = |key: &'static str, field: &mut usize| -> Result<()> {
                used.insert(key);
                if let Some(v) = s.optional(key)? {
                    *field = v;
                }
                Ok(())
            };
            match &mut c {
                ModelConfig::Volterra { memory, .. } => set("memory", memory)?,
                ModelConfig::Tdnn {
                    window,
                    hidden_nodes,
                    hidden_layers,
                } => {
                    set("window", window)?;
                    set("hidden-nodes", hidden_nodes)?;
                    set("hidden-layers", hidden_layers)?;
                }
                ModelConfig::Lstm { hidden_nodes, layers } => {
                    set("hidden-nodes", hidden_nodes)?;
                    set("layers", layers)?;
                }
                ModelConfig::Cat {
                    embedding,
                    heads,
                    conv_window,
                    mlp_hidden,
                    ..
                } => {
                    set("embedding", embedding)?;
                    set("heads", heads)?;
                    set("conv-window", conv_window)?;
                    set("mlp-hidden", mlp_hidden)?;
                }
            }
            if let ModelConfig::Volterra { ridge, .. } = &mut c {
                used.insert("ridge");
                if let Some(v) = self.s.optional("ridge")? {
                    *ridge = v;
                }
            }
            c.validate()?;
            self.s.note(format!("{kind}: {}", c.describe()));
            out.push(c);
        }
        for key in ARCH {
            if self.s.is_given(key) && !used.contains(key) {
                return Err(Error::validation(format!("setting `{key}` does not apply to the selected models")).into());
            }
        }
        Ok(out)
    }

    fn model_kinds(&mut self) -> Result<Vec<ModelKind>> {
        self.s.list("models", &ModelKind::ALL)
    }

    fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.out.join(name);
        write_atomic(&path, bytes.as_ref())?;
        Ok(path)
    }

    fn finish(self, command: &str) -> Result<()> {
        let path = self.write(&format!("{command}.manifest.txt"), self.s.manifest(command))?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }
}

pub fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::GenerateData(a) => generate_data(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Eye(a) => eye(a),
    }
}

fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::validation(format!("{} line {}: `{line}` is not a number", path.display(), i + 1)))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::validation(format!("{} holds no samples", path.display())).into());
    }
    Ok(out)
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut run = Run::start(
        &a.common,
        &a.flags(),
        &[&["input", "fraction", "samples-per-symbol"], TOLERANCE],
    )?;
    let params = run.laser()?;
    let input = run
        .s
        .optional::<String>("input")?
        .map(PathBuf::from)
        .ok_or_else(|| Error::validation("simulate needs --input"))?;
    require_file(&input, "drive file")?;
    let fraction = run.s.value("fraction", 0.5)?;
    let mut drive = DriveConfig::for_fraction(&params, fraction)?;
    drive.samples_per_symbol = run.s.value("samples-per-symbol", drive.samples_per_symbol)?;
    drive.validate()?;
    let tol = run.tolerances()?;
    let x = read_samples(&input)?;
    let current = drive_from_normalized(&x, &drive)?;
    let sim = solve(
        &current,
        drive.sample_interval(),
        steady_state(current[0], &params)?,
        &params,
        tol,
    )?;
    let normalized = minmax_normalize(sim.power())?;
    let dt = drive.sample_interval();
    let mut csv = String::from("time_s,current_a,carrier_density,photon_density,normalized_power\n");
    for i in 0..x.len() {
        let _ = writeln!(
            csv,
            "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            i as f64 * dt,
            current[i],
            sim.carrier_density[i],
            sim.photon_density[i],
            normalized[i]
        );
    }
    run.write("power.csv", csv)?;
    run.finish("simulate")
}

fn generate_data(a: &GenerateArgs) -> Result<()> {
    let mut run = Run::start(
        &a.common,
        &a.flags(),
        &[&["fraction", "train-sequences", "test-sequences"], TOLERANCE],
    )?;
    let params = run.laser()?;
    let fraction = run.s.value("fraction", 0.5)?;
    let train_n = run.s.value("train-sequences", run.profile.train_sequences())?;
    let test_n = run.s.value("test-sequences", run.profile.test_sequences())?;
    let tol = run.tolerances()?;
    for (role, n, name) in [
        (Role::Train, train_n, "train.dmld"),
        (Role::Validation, test_n, "test.dmld"),
    ] {
        let mut cfg = DatasetConfig::new(role, n, fraction, run.seed);
        cfg.tolerances = tol;
        let ds = build_dataset(&cfg, &params)?;
        let path = run.out.join(name);
        write_dataset(&path, &ds)?;
        eprintln!("wrote {} ({} sequences)", path.display(), ds.len());
    }
    run.finish("generate-data")
}

fn load_pair(data: &Path) -> Result<(dml_core::signal::Dataset, dml_core::signal::Dataset)> {
    let (tr, te) = (data.join("train.dmld"), data.join("test.dmld"));
    require_file(&tr, "training set")?;
    require_file(&te, "validation set")?;
    Ok((read_dataset(&tr)?, read_dataset(&te)?))
}

fn fit<T: Real>(
    config: ModelConfig,
    train_set: &dml_core::signal::Dataset,
    test_set: &dml_core::signal::Dataset,
    cfg: &TrainConfig,
) -> dml_core::Result<TrainReport> {
    let initial = Model::<T>::init(config, cfg.init_seed())?;
    let run = train_from(initial, train_set, test_set, cfg, |r| {
        eprintln!(
            "epoch {:>4}  train {:.4e}  test {:.4e}  ({:.1}s)",
            r.epoch, r.train_nmse, r.test_nmse, r.train_seconds
        );
    })?;
    Ok(run.report)
}

fn train(a: &TrainArgs) -> Result<()> {
    let mut run = Run::start(&a.common, &a.flags(), &[&["model", "data"], OPTIM, ARCH])?;
    let kind: ModelKind = run
        .s
        .optional("model")?
        .ok_or_else(|| Error::validation("train needs --model"))?;
    let data = run.s.path("data", run.out.clone())?;
    let precision = run.s.value("precision", Precision::F32)?;
    let model = run.models(&[kind])?[0];
    let mut cfg = run.train_config()?;
    let (train_set, test_set) = load_pair(&data)?;
    cfg.checkpoint = Some(run.out.join("model.dmlw"));
    let result = match precision {
        Precision::F32 => fit::<f32>(model, &train_set, &test_set, &cfg),
        Precision::F64 => fit::<f64>(model, &train_set, &test_set, &cfg),
    };
    let report = match result {
        Ok(r) => r,
        Err(Error::Diverged { epoch, report: Some(r) }) => {
            run.write("report.txt", r.to_text())?;
            return Err(Error::Diverged { epoch, report: None }.into());
        }
        Err(e) => return Err(e.into()),
    };
    run.write("report.txt", report.to_text())?;
    eprintln!(
        "best epoch {} of {}: test NRMSE {:.4e}",
        report.best_epoch,
        report.epochs.len(),
        report.best_test_nrmse
    );
    run.finish("train")
}

fn load_model(path: &Path) -> Result<Model<f32>> {
    require_file(path, "checkpoint")?;
    Ok(Model::from_checkpoint(&Checkpoint::load(path)?)?)
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let mut run = Run::start(&a.common, &a.flags(), &[&["checkpoint", "dataset", "nmse-mode"]])?;
    let ck = run.s.path("checkpoint", run.out.join("model.dmlw"))?;
    let ds = run.s.path("dataset", run.out.join("test.dmld"))?;
    let mode: NmseMode = run.s.value("nmse-mode", NmseMode::default())?;
    let model = load_model(&ck)?;
    require_file(&ds, "dataset")?;
    let data = read_dataset(&ds)?;
    if data.is_empty() {
        return Err(Error::validation("cannot evaluate on an empty dataset").into());
    }
    let mut csv = String::from("index,seed,nmse\n");
    let mut total = 0.0;
    for (c, chunk) in data.sequences.chunks(eval_batch(model.kind())).enumerate() {
        let inputs: Vec<&[f32]> = chunk.iter().map(|s| s.input.as_slice()).collect();
        for (k, (seq, pred)) in chunk.iter().zip(model.predict(&inputs)?).enumerate() {
            let v = nmse_with(&seq.target, &pred, mode)?;
            total += v;
            let _ = writeln!(csv, "{},{},{:.9e}", c * eval_batch(model.kind()) + k, seq.seed, v);
        }
    }
    let mean = total / data.len() as f64;
    let mut summary = KeyValues::new();
    summary.set("model", model.config.describe());
    summary.set("sequences", data.len());
    summary.set("symbol_rate_fraction", data.symbol_rate_fraction);
    summary.set("nmse_mode", mode);
    summary.set("nmse", format!("{mean:.9e}"));
    summary.set("nrmse", format!("{:.9e}", mean.sqrt()));
    run.write("evaluation.csv", csv)?;
    run.write("evaluation.txt", summary.to_text())?;
    eprintln!("NMSE {mean:.4e}, NRMSE {:.4e}", mean.sqrt());
    run.finish("evaluate")
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let mut run = Run::start(
        &a.common,
        &a.flags(),
        &[
            &["models", "fractions", "train-sequences", "test-sequences"],
            TOLERANCE,
            OPTIM,
            ARCH,
        ],
    )?;
    let params = run.laser()?;
    let kinds = run.model_kinds()?;
    let fractions = run.s.list("fractions", &SWEEP_FRACTIONS)?;
    let train_n = run.s.value("train-sequences", run.profile.train_sequences())?;
    let test_n = run.s.value("test-sequences", run.profile.test_sequences())?;
    let tol = run.tolerances()?;
    let precision = run.s.value("precision", Precision::F32)?;
    let models = run.models(&kinds)?;
    let cfg = run.train_config()?;
    let seed = run.seed;
    let datasets = |fraction: f64| {
        eprintln!("symbol rate {fraction}·f_R");
        let make = |role, n| {
            let mut c = DatasetConfig::new(role, n, fraction, seed);
            c.tolerances = tol;
            build_dataset(&c, &params)
        };
        Ok((make(Role::Train, train_n)?, make(Role::Validation, test_n)?))
    };
    let table = match precision {
        Precision::F32 => sweep_symbol_rates::<f32, _>(&models, &fractions, &cfg, datasets)?,
        Precision::F64 => sweep_symbol_rates::<f64, _>(&models, &fractions, &cfg, datasets)?,
    };
    run.write("sweep.csv", table.to_csv())?;
    run.finish("sweep")
}

fn benchmark(a: &BenchmarkArgs) -> Result<()> {
    let mut run = Run::start(
        &a.common,
        &a.flags(),
        &[&["models", "checkpoints", "dataset", "runs"], OPTIM, ARCH],
    )?;
    let params = run.laser()?;
    let ds = run.s.path("dataset", run.out.join("test.dmld"))?;
    let runs = run.s.value("runs", 5usize)?;
    let cfg = run.train_config()?;
    let models: Vec<Model<f32>> = if run.s.is_given("checkpoints") {
        let paths: Vec<String> = run.s.list("checkpoints", &[])?;
        paths.iter().map(|p| load_model(Path::new(p))).collect::<Result<_>>()?
    } else {
        let kinds = run.model_kinds()?;
        let configs = run.models(&kinds)?;
        configs
            .into_iter()
            .map(|c| Model::init(c, cfg.init_seed()))
            .collect::<dml_core::Result<_>>()?
    };
    require_file(&ds, "dataset")?;
    let data = read_dataset(&ds)?;
    let table = benchmark_epoch_time(&models, &data, &params, &cfg, runs)?;
    run.write("timing.csv", table.to_csv())?;
    run.finish("benchmark")
}

fn eye(a: &EyeArgs) -> Result<()> {
    let mut run = Run::start(
        &a.common,
        &a.flags(),
        &[&["fraction", "symbols", "bins", "checkpoints"]],
    )?;
    let params = run.laser()?;
    let fraction = run.s.value("fraction", 1.0)?;
    let symbols = run.s.value("symbols", 1usize << 10)?;
    let bins = run.s.value("bins", DEFAULT_AMPLITUDE_BINS)?;
    let checkpoints: Vec<String> = if run.s.is_given("checkpoints") {
        run.s.list("checkpoints", &[])?
    } else {
        Vec::new()
    };
    let generation = GenerationConfig::default();
    let sps = generation.samples_per_symbol;
    let study = eye_study(&params, fraction, symbols, run.seed, &generation)?;
    let emit = |run: &Run, name: &str, wave: &[f64]| -> Result<()> {
        let h = eye_diagram(wave, sps, bins)?;
        run.write(&format!("eye_{name}.csv"), h.to_csv())?;
        run.write(&format!("eye_{name}.pgm"), h.to_pgm())?;
        Ok(())
    };
    emit(&run, "ideal", &study.ideal)?;
    emit(&run, "input", &study.input)?;
    emit(&run, "solver", &study.solver)?;
    for ck in &checkpoints {
        let path = Path::new(ck);
        let model = load_model(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let pred = predict_windows(&model, &study.input, study.window)?;
        emit(&run, &format!("{}_{name}", model.kind()), &pred)?;
    }
    run.finish("eye")
}
