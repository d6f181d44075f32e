use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::filter::minmax_normalize;
use super::sequence::{build_sequence, derive_seed, GenerationConfig};
use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::laser::{drive_from_normalized, solve, steady_state, DriveConfig, LaserParams, SolverTolerances};

pub const DATASET_MAGIC: &[u8; 4] = b"DMLD";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Train,
    Validation,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Validation => "validation",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Role::Train => 1,
            Role::Validation => 2,
        }
    }
}

impl std::str::FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Role::Train),
            "validation" | "test" => Ok(Role::Validation),
            other => Err(Error::validation(format!("unknown dataset role `{other}`"))),
        }
    }
}

/// A paired input/target waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    /// Normalised drive waveform in [0, 1].
    pub input: Vec<f32>,
    /// Per-sequence min-max normalised optical power in [0, 1].
    pub target: Vec<f32>,
    pub seed: u64,
    /// PAM4 levels; empty when the sequence was read back from disk.
    pub symbols: Vec<f64>,
}

/// Everything needed to regenerate a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub role: Role,
    pub sequences: usize,
    pub symbol_rate_fraction: f64,
    pub master_seed: u64,
    pub generation: GenerationConfig,
    pub tolerances: SolverTolerances,
}

impl DatasetConfig {
    pub fn new(role: Role, sequences: usize, symbol_rate_fraction: f64, master_seed: u64) -> Self {
        Self {
            role,
            sequences,
            symbol_rate_fraction,
            master_seed,
            generation: GenerationConfig::default(),
            tolerances: SolverTolerances::default(),
        }
    }

    /// Seed of sequence `index`.
    pub fn sequence_seed(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, self.role.stream(), index as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub role: Role,
    pub sequences: Vec<Sequence>,
    pub sequence_len: usize,
    pub samples_per_symbol: usize,
    pub symbol_rate_fraction: f64,
    pub master_seed: u64,
    pub tolerances: SolverTolerances,
    pub params_fingerprint: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn total_samples(&self) -> usize {
        self.sequences.len() * self.sequence_len
    }
}

/// Ground-truth target for a normalised input under the given operating point.
pub fn simulate_target(
    input: &[f64],
    drive: &DriveConfig,
    params: &LaserParams,
    tol: SolverTolerances,
) -> Result<Vec<f64>> {
    let current = drive_from_normalized(input, drive)?;
    let start = steady_state(current[0], params)?;
    let sim = solve(&current, drive.sample_interval(), start, params, tol)?;
    if params.spontaneous_fraction > 0.0 && sim.stats.clamped > 0 {
        return Err(Error::Numeric {
            message: format!("{} negative densities clamped", sim.stats.clamped),
            residual: 0.0,
        });
    }
    minmax_normalize(sim.power())
}

fn build_one(index: usize, cfg: &DatasetConfig, drive: &DriveConfig, params: &LaserParams) -> Result<Sequence> {
    let seed = cfg.sequence_seed(index);
    let wrap = |e: Error| Error::Sequence {
        seed,
        source: Box::new(e),
    };
    let wave = build_sequence(seed, cfg.symbol_rate_fraction, &cfg.generation).map_err(wrap)?;
    let input: Vec<f32> = wave.samples.iter().map(|&v| v as f32).collect();
    let as_f64: Vec<f64> = input.iter().map(|&v| v as f64).collect();
    let target = simulate_target(&as_f64, drive, params, cfg.tolerances).map_err(wrap)?;
    Ok(Sequence {
        input,
        target: target.iter().map(|&v| v as f32).collect(),
        seed,
        symbols: wave.symbols,
    })
}

/// Generate a dataset; sequences are built in parallel from per-index seeds.
pub fn build_dataset(cfg: &DatasetConfig, params: &LaserParams) -> Result<Dataset> {
    cfg.generation.validate()?;
    if cfg.sequences == 0 {
        return Err(Error::validation("dataset needs at least one sequence"));
    }
    let mut drive = DriveConfig::for_fraction(params, cfg.symbol_rate_fraction)?;
    drive.samples_per_symbol = cfg.generation.samples_per_symbol;
    let built: Vec<Result<Sequence>> = (0..cfg.sequences)
        .into_par_iter()
        .map(|i| build_one(i, cfg, &drive, params))
        .collect();
    let sequences = built.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        role: cfg.role,
        sequences,
        sequence_len: cfg.generation.sequence_len(),
        samples_per_symbol: cfg.generation.samples_per_symbol,
        symbol_rate_fraction: cfg.symbol_rate_fraction,
        master_seed: cfg.master_seed,
        tolerances: cfg.tolerances,
        params_fingerprint: params.fingerprint(),
    })
}

pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

/// Write the binary dataset and its `.meta` sidecar.
pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let mut header = Vec::with_capacity(36);
    header.extend_from_slice(DATASET_MAGIC);
    header.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    header.extend_from_slice(&(ds.sequences.len() as u32).to_le_bytes());
    header.extend_from_slice(&(ds.sequence_len as u32).to_le_bytes());
    header.extend_from_slice(&(ds.samples_per_symbol as u32).to_le_bytes());
    header.extend_from_slice(&ds.symbol_rate_fraction.to_le_bytes());
    header.extend_from_slice(&ds.master_seed.to_le_bytes());
    w.write_all(&header).map_err(io)?;
    for s in &ds.sequences {
        if s.input.len() != ds.sequence_len || s.target.len() != ds.sequence_len {
            return Err(Error::validation(format!("sequence {} has the wrong length", s.seed)));
        }
        for v in s.input.iter().chain(&s.target) {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        w.write_all(&s.seed.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)?;

    let mut meta = KeyValues::new();
    meta.set("magic", "DMLD");
    meta.set("version", DATASET_VERSION);
    meta.set("role", ds.role.as_str());
    meta.set("sequences", ds.sequences.len());
    meta.set("sequence_len", ds.sequence_len);
    meta.set("samples_per_symbol", ds.samples_per_symbol);
    meta.set("symbol_rate_fraction", ds.symbol_rate_fraction);
    meta.set("master_seed", ds.master_seed);
    meta.set("rel_tol", format!("{:e}", ds.tolerances.rel_tol));
    meta.set("abs_tol", format!("{:e}", ds.tolerances.abs_tol));
    meta.set("laser_params_sha256", &ds.params_fingerprint);
    let mp = meta_path(path);
    fs::write(&mp, meta.to_text()).map_err(|e| Error::io(&mp, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Format("dataset file is truncated".into()))?;
        self.pos = end;
        Ok(slice.try_into().expect("length checked"))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take()?))
    }
}

/// Read a dataset; the sidecar, when present, supplies role and tolerances.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if &r.take::<4>()? != DATASET_MAGIC {
        return Err(Error::Format(format!("{}: not a DMLD dataset", path.display())));
    }
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let count = r.u32()? as usize;
    let len = r.u32()? as usize;
    let sps = r.u32()? as usize;
    let fraction = r.f64()?;
    let master_seed = r.u64()?;
    let expected = 36 + count * (len * 8 + 8);
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "dataset size {} does not match header ({expected} bytes)",
            bytes.len()
        )));
    }
    let mut sequences = Vec::with_capacity(count);
    for _ in 0..count {
        let input = (0..len).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        let target = (0..len).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        let seed = r.u64()?;
        sequences.push(Sequence {
            input,
            target,
            seed,
            symbols: vec![],
        });
    }

    let mut role = Role::Train;
    let mut tolerances = SolverTolerances::default();
    let mut fingerprint = String::new();
    let mp = meta_path(path);
    if mp.exists() {
        let meta = KeyValues::load(&mp)?;
        if let Some(r) = meta.get("role") {
            role = r.parse()?;
        }
        tolerances.rel_tol = meta.parse_value("rel_tol")?.unwrap_or(tolerances.rel_tol);
        tolerances.abs_tol = meta.parse_value("abs_tol")?.unwrap_or(tolerances.abs_tol);
        fingerprint = meta.get("laser_params_sha256").unwrap_or("").to_string();
    }
    Ok(Dataset {
        role,
        sequences,
        sequence_len: len,
        samples_per_symbol: sps,
        symbol_rate_fraction: fraction,
        master_seed,
        tolerances,
        params_fingerprint: fingerprint,
    })
}
