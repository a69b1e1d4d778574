//! Run orchestration: configuration, data loading, metrics streams,
//! per-generation checkpoints, resume, and reconstruction dumps.
//!
//! Output directory layout:
//!
//! ```text
//! config.json              resolved configuration (flat dotted keys)
//! metrics.jsonl            one JSON object per metrics record
//! metrics.csv              the same records as CSV
//! genomes/gen{g}/ind{id}.json
//! checkpoints/gen{g}/      state.json, metrics.jsonl, ind{id}.json
//! best/                    individual.json, genome.json
//! recon/                   sample_{k}_orig.pgm, sample_{k}_recon.pgm, sample_{k}_pair.pgm
//! report.json
//! ```

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::circuit::{serialize_genome_pretty, CircuitGenome};
use crate::data::{self, DatasetKind, ImageDataset, SplitSpec, IMAGE_COLS, IMAGE_ROWS};
use crate::error::{Error, Result};
use crate::evolve::{
    self, EvolutionConfig, EvolutionReport, EvolutionState, GenerationOutcome, Individual, MutationEvent, ProbeResult,
    TrainingData,
};
use crate::nn::{Activation, Adam, AdamConfig, DenseLayer, HybridAutoencoder};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_RECON_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub evolution: EvolutionConfig,
    pub split: SplitSpec,
    /// A directory holding the standard IDX file names, or a single image file.
    pub dataset_path: PathBuf,
    /// Explicit test image file; overrides the directory's t10k file.
    pub test_path: Option<PathBuf>,
    pub dataset_kind: DatasetKind,
    pub output_dir: PathBuf,
    pub recon_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            evolution: EvolutionConfig::default(),
            split: SplitSpec::default(),
            dataset_path: PathBuf::from("data/mnist"),
            test_path: None,
            dataset_kind: DatasetKind::Mnist,
            output_dir: PathBuf::from("out"),
            recon_samples: DEFAULT_RECON_SAMPLES,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub seed: Option<u64>,
    pub generations: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub dataset_path: Option<PathBuf>,
}

pub const CONFIG_KEYS: [&str; 25] = [
    "seed",
    "ga.population_size",
    "ga.elite_k",
    "ga.generations",
    "ga.epochs_per_generation",
    "ga.rot_mutation_rate",
    "ga.fixed_gate_mutation_rate",
    "ga.param_perturb_sigma",
    "ga.max_genes",
    "circuit.n_qubits",
    "circuit.depth",
    "model.hidden",
    "train.batch_size",
    "train.learning_rate",
    "train.beta1",
    "train.beta2",
    "train.epsilon",
    "split.fractions",
    "split.seed",
    "split.caps",
    "dataset.path",
    "dataset.test_path",
    "dataset.kind",
    "output.dir",
    "output.recon_samples",
];

fn invalid(key: &str, constraint: &str, v: &Value) -> Error {
    Error::Config(format!("{key} must be {constraint}, got {v}"))
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    v.as_u64().ok_or_else(|| invalid(key, "a non-negative integer", v))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    as_u64(key, v).map(|x| x as usize)
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| invalid(key, "a number", v))
}

fn as_path(key: &str, v: &Value, base: &Path) -> Result<PathBuf> {
    let s = v.as_str().ok_or_else(|| invalid(key, "a path string", v))?;
    let p = PathBuf::from(s);
    Ok(if p.is_absolute() { p } else { base.join(p) })
}

impl RunConfig {
    /// Build a config from a flat JSON object. Relative paths are resolved
    /// against `base_dir`; absent keys keep their defaults.
    pub fn from_json(value: &Value, base_dir: &Path) -> Result<RunConfig> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("config must be a JSON object with flat dotted keys".into()))?;
        let mut c = RunConfig::default();
        for (key, v) in obj {
            let k = key.as_str();
            let ga = &mut c.evolution.ga;
            match k {
                "seed" => ga.master_seed = as_u64(k, v)?,
                "ga.population_size" => ga.population_size = as_usize(k, v)?,
                "ga.elite_k" => ga.elite_k = as_usize(k, v)?,
                "ga.generations" => ga.generations = as_usize(k, v)?,
                "ga.epochs_per_generation" => ga.epochs_per_generation = as_usize(k, v)?,
                "ga.rot_mutation_rate" => ga.rot_mutation_rate = as_f64(k, v)?,
                "ga.fixed_gate_mutation_rate" => ga.fixed_gate_mutation_rate = as_f64(k, v)?,
                "ga.param_perturb_sigma" => ga.param_perturb_sigma = as_f64(k, v)?,
                "ga.max_genes" => ga.max_genes = as_usize(k, v)?,
                "circuit.n_qubits" => c.evolution.model.n_qubits = as_usize(k, v)?,
                "circuit.depth" => c.evolution.model.depth = as_usize(k, v)?,
                "model.hidden" => c.evolution.model.hidden = as_usize(k, v)?,
                "train.batch_size" => c.evolution.train.batch_size = as_usize(k, v)?,
                "train.learning_rate" => c.evolution.train.adam.learning_rate = as_f64(k, v)?,
                "train.beta1" => c.evolution.train.adam.beta1 = as_f64(k, v)?,
                "train.beta2" => c.evolution.train.adam.beta2 = as_f64(k, v)?,
                "train.epsilon" => c.evolution.train.adam.epsilon = as_f64(k, v)?,
                "split.fractions" => {
                    let arr = v
                        .as_array()
                        .filter(|a| a.len() == 3)
                        .ok_or_else(|| invalid(k, "an array of 3 numbers [train, val, test]", v))?;
                    for (slot, x) in c.split.fractions.iter_mut().zip(arr) {
                        *slot = as_f64(k, x)?;
                    }
                }
                "split.seed" => c.split.shuffle_seed = as_u64(k, v)?,
                "split.caps" => {
                    let arr = v
                        .as_array()
                        .filter(|a| a.len() == 3)
                        .ok_or_else(|| invalid(k, "an array of 3 integers or nulls", v))?;
                    for (slot, x) in c.split.caps.iter_mut().zip(arr) {
                        *slot = if x.is_null() { None } else { Some(as_usize(k, x)?) };
                    }
                }
                "dataset.path" => c.dataset_path = as_path(k, v, base_dir)?,
                "dataset.test_path" => {
                    c.test_path = if v.is_null() {
                        None
                    } else {
                        Some(as_path(k, v, base_dir)?)
                    }
                }
                "dataset.kind" => {
                    c.dataset_kind = serde_json::from_value(v.clone())
                        .map_err(|_| invalid(k, "\"MNIST\" or \"FASHION_MNIST\"", v))?
                }
                "output.dir" => c.output_dir = as_path(k, v, base_dir)?,
                "output.recon_samples" => c.recon_samples = as_usize(k, v)?,
                _ => {
                    return Err(Error::Config(format!(
                        "unknown config key {key:?}; valid keys: {}",
                        CONFIG_KEYS.join(", ")
                    )))
                }
            }
        }
        Ok(c)
    }

    /// The fully resolved config as flat dotted keys.
    pub fn to_json(&self) -> Value {
        let ga = &self.evolution.ga;
        let m = &self.evolution.model;
        let t = &self.evolution.train;
        json!({
            "seed": ga.master_seed,
            "ga.population_size": ga.population_size,
            "ga.elite_k": ga.elite_k,
            "ga.generations": ga.generations,
            "ga.epochs_per_generation": ga.epochs_per_generation,
            "ga.rot_mutation_rate": ga.rot_mutation_rate,
            "ga.fixed_gate_mutation_rate": ga.fixed_gate_mutation_rate,
            "ga.param_perturb_sigma": ga.param_perturb_sigma,
            "ga.max_genes": ga.max_genes,
            "circuit.n_qubits": m.n_qubits,
            "circuit.depth": m.depth,
            "model.hidden": m.hidden,
            "train.batch_size": t.batch_size,
            "train.learning_rate": t.adam.learning_rate,
            "train.beta1": t.adam.beta1,
            "train.beta2": t.adam.beta2,
            "train.epsilon": t.adam.epsilon,
            "split.fractions": self.split.fractions,
            "split.seed": self.split.shuffle_seed,
            "split.caps": self.split.caps,
            "dataset.path": self.dataset_path,
            "dataset.test_path": self.test_path,
            "dataset.kind": self.dataset_kind,
            "output.dir": self.output_dir,
            "output.recon_samples": self.recon_samples,
        })
    }

    pub fn apply_overrides(&mut self, o: &ConfigOverrides) {
        if let Some(s) = o.seed {
            self.evolution.ga.master_seed = s;
        }
        if let Some(g) = o.generations {
            self.evolution.ga.generations = g;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(p) = &o.dataset_path {
            self.dataset_path = p.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.evolution.validate()?;
        self.split.validate()?;
        let b = &self.evolution.train.adam;
        if !(0.0..1.0).contains(&b.beta1) || !(0.0..1.0).contains(&b.beta2) || b.epsilon.is_nan() || b.epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "train.beta1 and train.beta2 must be in [0, 1) and train.epsilon > 0, got {} / {} / {}",
                b.beta1, b.beta2, b.epsilon
            )));
        }
        if self.recon_samples == 0 {
            return Err(Error::Config("output.recon_samples must be >= 1".into()));
        }
        Ok(())
    }
}

/// Read a JSON config file (if any), apply flag overrides, validate.
pub fn parse_config(path: Option<&Path>, overrides: &ConfigOverrides) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let value: Value = if text.trim().is_empty() {
                Value::Object(Map::new())
            } else {
                serde_json::from_str(&text).map_err(|e| Error::Parse {
                    location: format!("{}:{}:{}", p.display(), e.line(), e.column()),
                    message: e.to_string(),
                })?
            };
            RunConfig::from_json(&value, p.parent().unwrap_or(Path::new("")))?
        }
        None => RunConfig::default(),
    };
    config.apply_overrides(overrides);
    config.validate()?;
    Ok(config)
}

/// Train / validation / test images for a run.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: ImageDataset,
    pub val: ImageDataset,
    pub test: ImageDataset,
}

impl Splits {
    pub fn training_data(&self) -> TrainingData<'_> {
        TrainingData {
            train: &self.train,
            val: &self.val,
            test: (!self.test.is_empty()).then_some(&self.test),
        }
    }
}

/// Load and split the configured dataset. The train/val splits come from the
/// training file; the test split is the (shuffled, capped) test file when one
/// exists and the test fraction of the training file otherwise.
pub fn load_splits(config: &RunConfig) -> Result<Splits> {
    let path = &config.dataset_path;
    let (train_file, dir_test) = if path.is_dir() {
        let (tr, te) = data::standard_files(path);
        let tr = tr.ok_or_else(|| Error::Format {
            path: path.clone(),
            message: "directory has no train-images-idx3-ubyte[.gz]".into(),
        })?;
        (tr, te)
    } else if path.is_file() {
        (path.clone(), None)
    } else {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset path does not exist"),
        ));
    };
    let kind = config.dataset_kind;
    let full = data::load_idx_images(&train_file, kind)?;
    let (train, val, split_test) = data::split(&full, &config.split)?;
    let test = match config.test_path.clone().or(dir_test) {
        Some(p) => {
            let t = data::load_idx_images(&p, kind)?;
            let spec = SplitSpec {
                fractions: [0.0, 0.0, 1.0],
                shuffle_seed: config.split.shuffle_seed,
                caps: [None, None, config.split.caps[2]],
            };
            let [_, _, idx] = data::split_indices(t.len(), &spec)?;
            t.subset(&idx)
        }
        None => split_test,
    };
    info!(
        "dataset {}: train {}, val {}, test {}",
        train_file.display(),
        train.len(),
        val.len(),
        test.len()
    );
    Ok(Splits { train, val, test })
}

/// One line of metrics.jsonl / metrics.csv. `kind` is `"train"` (one per
/// individual per epoch) or `"eval"` (one per individual per generation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub kind: String,
    pub generation: usize,
    pub individual: u64,
    pub parent_id: Option<u64>,
    pub genome_hash: String,
    pub n_genes: usize,
    pub n_rot_x: usize,
    pub n_rot_y: usize,
    pub n_rot_z: usize,
    pub n_hadamard: usize,
    pub n_cnot: usize,
    pub epoch: Option<usize>,
    pub train_loss: Option<f64>,
    pub val_loss: Option<f64>,
    pub test_loss: Option<f64>,
    pub diverged: bool,
    pub wall_time_s: f64,
}

impl MetricsRecord {
    fn for_individual(kind: &str, generation: usize, ind: &Individual) -> MetricsRecord {
        let g = ind.genome();
        let c = g.gate_counts();
        MetricsRecord {
            kind: kind.into(),
            generation,
            individual: ind.id,
            parent_id: ind.parent_id,
            genome_hash: g.hash_hex(),
            n_genes: g.genes().len(),
            n_rot_x: c.rot_x,
            n_rot_y: c.rot_y,
            n_rot_z: c.rot_z,
            n_hadamard: c.hadamard,
            n_cnot: c.cnot,
            epoch: None,
            train_loss: None,
            val_loss: None,
            test_loss: None,
            diverged: false,
            wall_time_s: 0.0,
        }
    }
}

/// Canonical records for one generation: per individual in id order, its
/// training epochs followed by its evaluation.
pub fn generation_records(outcome: &GenerationOutcome<'_>) -> Vec<MetricsRecord> {
    let mut individuals: Vec<&Individual> = outcome.population.iter().collect();
    individuals.sort_by_key(|i| i.id);
    let mut out = Vec::new();
    for ind in individuals {
        for e in outcome.epoch_records.iter().filter(|e| e.individual == ind.id) {
            let mut r = MetricsRecord::for_individual("train", outcome.generation, ind);
            r.epoch = Some(e.epoch);
            r.train_loss = e.train_loss;
            r.diverged = e.train_loss.is_none();
            r.wall_time_s = e.wall_time_s;
            out.push(r);
        }
        if let Some(e) = outcome.eval_records.iter().find(|e| e.individual == ind.id) {
            let mut r = MetricsRecord::for_individual("eval", outcome.generation, ind);
            r.val_loss = e.val_loss.is_finite().then_some(e.val_loss);
            r.test_loss = e.test_loss;
            r.diverged = !e.val_loss.is_finite();
            r.wall_time_s = e.wall_time_s;
            out.push(r);
        }
    }
    out
}

/// Serialized writer for both metrics streams.
pub struct MetricsWriter {
    jsonl: BufWriter<File>,
    csv: csv::Writer<File>,
    jsonl_path: PathBuf,
}

impl MetricsWriter {
    pub fn create(dir: &Path) -> Result<MetricsWriter> {
        let jsonl_path = dir.join("metrics.jsonl");
        let csv_path = dir.join("metrics.csv");
        let jsonl = BufWriter::new(File::create(&jsonl_path).map_err(|e| Error::io(&jsonl_path, e))?);
        let csv = csv::Writer::from_path(&csv_path).map_err(|e| csv_error(&csv_path, e))?;
        Ok(MetricsWriter { jsonl, csv, jsonl_path })
    }

    pub fn write(&mut self, records: &[MetricsRecord]) -> Result<()> {
        for r in records {
            let line = serde_json::to_string(r).map_err(|e| Error::Format {
                path: self.jsonl_path.clone(),
                message: e.to_string(),
            })?;
            writeln!(self.jsonl, "{line}").map_err(|e| Error::io(&self.jsonl_path, e))?;
            self.csv
                .serialize(r)
                .map_err(|e| csv_error(&self.jsonl_path.with_extension("csv"), e))?;
        }
        self.jsonl.flush().map_err(|e| Error::io(&self.jsonl_path, e))?;
        self.csv
            .flush()
            .map_err(|e| Error::io(self.jsonl_path.with_extension("csv"), e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn read_metrics_jsonl(path: &Path) -> Result<Vec<MetricsRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(f)
        .lines()
        .enumerate()
        .map(|(i, line)| {
            let line = line.map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                location: format!("{}:{}", path.display(), i + 1),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|rec| rec.map_err(|e| csv_error(path, e))).collect()
}

fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

fn decode_f64s(text: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let bytes = B64.decode(text).map_err(|e| Error::Parse {
        location: what.into(),
        message: e.to_string(),
    })?;
    if bytes.len() != expected * 8 {
        return Err(Error::Parse {
            location: what.into(),
            message: format!("expected {expected} f64 values, found {} bytes", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    name: String,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    /// `out_dim × in_dim`, row-major, little-endian f64, base64.
    weights: String,
    biases: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerDoc {
    config: AdamConfig,
    step: u64,
    /// One entry per tensor, in model tensor order.
    tensor_lens: Vec<usize>,
    first_moments: Vec<String>,
    second_moments: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndividualDoc {
    format_version: u32,
    id: u64,
    parent_id: Option<u64>,
    birth_generation: usize,
    #[serde(with = "crate::json_float::option")]
    fitness: Option<f64>,
    test_loss: Option<f64>,
    mutation_log: Vec<MutationEvent>,
    genome: CircuitGenome,
    angle_scale: f64,
    encoder: Vec<LayerDoc>,
    q_params: String,
    decoder: Vec<LayerDoc>,
    optimizer: OptimizerDoc,
}

fn layer_doc(name: &str, l: &DenseLayer) -> LayerDoc {
    LayerDoc {
        name: name.into(),
        in_dim: l.in_dim(),
        out_dim: l.out_dim(),
        activation: l.activation(),
        weights: encode_f64s(l.weights()),
        biases: encode_f64s(l.biases()),
    }
}

fn layer_from_doc(d: &LayerDoc) -> Result<DenseLayer> {
    let w = decode_f64s(&d.weights, d.in_dim * d.out_dim, &format!("{}.weights", d.name))?;
    let b = decode_f64s(&d.biases, d.out_dim, &format!("{}.biases", d.name))?;
    DenseLayer::from_parts(d.in_dim, d.out_dim, w, b, d.activation)
}

fn individual_doc(ind: &Individual) -> IndividualDoc {
    let m = &ind.model;
    let opt = &ind.optimizer;
    IndividualDoc {
        format_version: CHECKPOINT_FORMAT_VERSION,
        id: ind.id,
        parent_id: ind.parent_id,
        birth_generation: ind.birth_generation,
        fitness: ind.fitness,
        test_loss: ind.test_loss,
        mutation_log: ind.mutation_log.clone(),
        genome: m.genome().clone(),
        angle_scale: m.angle_scale(),
        encoder: vec![
            layer_doc("encoder.0", &m.encoder()[0]),
            layer_doc("encoder.1", &m.encoder()[1]),
        ],
        q_params: encode_f64s(m.q_params()),
        decoder: vec![
            layer_doc("decoder.0", &m.decoder()[0]),
            layer_doc("decoder.1", &m.decoder()[1]),
        ],
        optimizer: OptimizerDoc {
            config: *opt.config(),
            step: opt.steps(),
            tensor_lens: opt.first_moments().iter().map(Vec::len).collect(),
            first_moments: opt.first_moments().iter().map(|t| encode_f64s(t)).collect(),
            second_moments: opt.second_moments().iter().map(|t| encode_f64s(t)).collect(),
        },
    }
}

fn individual_from_doc(d: IndividualDoc) -> Result<Individual> {
    if d.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Parse {
            location: "format_version".into(),
            message: format!("unsupported checkpoint version {}", d.format_version),
        });
    }
    let two = |v: &[LayerDoc], what: &str| -> Result<[DenseLayer; 2]> {
        match v {
            [a, b] => Ok([layer_from_doc(a)?, layer_from_doc(b)?]),
            _ => Err(Error::Parse {
                location: what.into(),
                message: format!("expected 2 layers, found {}", v.len()),
            }),
        }
    };
    let q = decode_f64s(&d.q_params, d.genome.n_params(), "q_params")?;
    let model = HybridAutoencoder::from_parts(
        two(&d.encoder, "encoder")?,
        d.angle_scale,
        d.genome,
        q,
        two(&d.decoder, "decoder")?,
    )?;
    let o = &d.optimizer;
    let lens = model.tensor_lens();
    if o.tensor_lens != lens || o.first_moments.len() != lens.len() || o.second_moments.len() != lens.len() {
        return Err(Error::Parse {
            location: "optimizer".into(),
            message: "moment shapes do not match the model tensors".into(),
        });
    }
    let decode_all = |v: &[String], what: &str| -> Result<Vec<Vec<f64>>> {
        v.iter()
            .zip(lens)
            .enumerate()
            .map(|(i, (t, n))| decode_f64s(t, n, &format!("optimizer.{what}[{i}]")))
            .collect()
    };
    let optimizer = Adam::from_parts(
        o.config,
        o.step,
        decode_all(&o.first_moments, "first_moments")?,
        decode_all(&o.second_moments, "second_moments")?,
    )?;
    Ok(Individual {
        id: d.id,
        model,
        optimizer,
        fitness: d.fitness,
        test_loss: d.test_loss,
        parent_id: d.parent_id,
        birth_generation: d.birth_generation,
        mutation_log: d.mutation_log,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T, pretty: bool) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let text = if pretty {
        serde_json::to_string_pretty(value)
    } else {
        serde_json::to_string(value)
    }
    .map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })
}

pub fn save_individual(path: &Path, ind: &Individual) -> Result<()> {
    write_json(path, &individual_doc(ind), false)
}

pub fn load_individual(path: &Path) -> Result<Individual> {
    individual_from_doc(read_json(path)?)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    format_version: u32,
    completed_generation: usize,
    next_id: u64,
    training_sessions: usize,
    population: Vec<u64>,
    history: Vec<evolve::GenerationSummary>,
    config: Value,
}

/// Everything needed to continue a run after a completed generation.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub state: EvolutionState,
    pub metrics: Vec<MetricsRecord>,
    /// Resolved config of the run that wrote the checkpoint.
    pub config: Value,
}

pub fn save_checkpoint(
    dir: &Path,
    state: &EvolutionState,
    metrics: &[MetricsRecord],
    config: &RunConfig,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for ind in &state.population {
        save_individual(&dir.join(format!("ind{}.json", ind.id)), ind)?;
    }
    let mut w = MetricsWriterJsonl::create(&dir.join("metrics.jsonl"))?;
    w.write(metrics)?;
    let doc = StateDoc {
        format_version: CHECKPOINT_FORMAT_VERSION,
        completed_generation: state.completed_generation,
        next_id: state.next_id,
        training_sessions: state.training_sessions,
        population: state.population.iter().map(|i| i.id).collect(),
        history: state.history.clone(),
        config: config.to_json(),
    };
    // state.json last: its presence marks a complete checkpoint.
    write_json(&dir.join("state.json"), &doc, true)
}

struct MetricsWriterJsonl {
    out: BufWriter<File>,
    path: PathBuf,
}

impl MetricsWriterJsonl {
    fn create(path: &Path) -> Result<Self> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(MetricsWriterJsonl {
            out: BufWriter::new(f),
            path: path.to_path_buf(),
        })
    }

    fn write(&mut self, records: &[MetricsRecord]) -> Result<()> {
        for r in records {
            let line = serde_json::to_string(r).expect("metrics records serialize");
            writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))?;
        }
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Locate a checkpoint: `path` itself if it holds `state.json`, otherwise the
/// latest `checkpoints/gen{g}` under a run directory.
pub fn find_checkpoint(path: &Path) -> Result<PathBuf> {
    if path.join("state.json").is_file() {
        return Ok(path.to_path_buf());
    }
    let root = path.join("checkpoints");
    let entries = fs::read_dir(&root).map_err(|e| Error::io(&root, e))?;
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&root, e))?;
        let name = entry.file_name();
        let Some(g) = name
            .to_str()
            .and_then(|n| n.strip_prefix("gen"))
            .and_then(|n| n.parse::<usize>().ok())
        else {
            continue;
        };
        if entry.path().join("state.json").is_file() && best.as_ref().is_none_or(|(b, _)| g > *b) {
            best = Some((g, entry.path()));
        }
    }
    best.map(|(_, p)| p).ok_or_else(|| Error::Format {
        path: root,
        message: "no complete checkpoint found".into(),
    })
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let doc: StateDoc = read_json(&dir.join("state.json"))?;
    if doc.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Format {
            path: dir.join("state.json"),
            message: format!("unsupported checkpoint version {}", doc.format_version),
        });
    }
    let population = doc
        .population
        .iter()
        .map(|id| load_individual(&dir.join(format!("ind{id}.json"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Checkpoint {
        state: EvolutionState {
            completed_generation: doc.completed_generation,
            population,
            next_id: doc.next_id,
            history: doc.history,
            training_sessions: doc.training_sessions,
        },
        metrics: read_metrics_jsonl(&dir.join("metrics.jsonl"))?,
        config: doc.config,
    })
}

/// 8-bit quantisation used for image dumps: `round_half_even(clamp(v) · 255)`.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8
}

/// Binary greyscale PGM (P5, maxval 255).
pub fn encode_pgm(width: usize, height: usize, pixels: &[f64]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::contract(format!(
            "{width}x{height} image needs {} pixels, got {}",
            width * height,
            pixels.len()
        )));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels.iter().map(|&v| quantize(v)));
    Ok(out)
}

/// Original and reconstruction side by side, 56 × 28.
pub fn side_by_side(left: &[f64], right: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * IMAGE_ROWS * IMAGE_COLS);
    for r in 0..IMAGE_ROWS {
        out.extend_from_slice(&left[r * IMAGE_COLS..(r + 1) * IMAGE_COLS]);
        out.extend_from_slice(&right[r * IMAGE_COLS..(r + 1) * IMAGE_COLS]);
    }
    out
}

/// Write original, reconstruction and composite PGMs for each sample.
/// Returns the files written; individual failures are logged and skipped.
pub fn emit_reconstructions(model: &HybridAutoencoder, samples: &[&[f64]], dir: &Path) -> Vec<PathBuf> {
    let mut written = Vec::new();
    if let Err(e) = fs::create_dir_all(dir) {
        warn!("cannot create {}: {e}", dir.display());
        return written;
    }
    for (k, x) in samples.iter().enumerate() {
        let recon = match model.reconstruct(x) {
            Ok(r) => r,
            Err(e) => {
                warn!("reconstruction of sample {k} failed: {e}");
                continue;
            }
        };
        let images = [
            ("orig", IMAGE_COLS, x.to_vec()),
            ("recon", IMAGE_COLS, recon.clone()),
            ("pair", 2 * IMAGE_COLS, side_by_side(x, &recon)),
        ];
        for (tag, width, pixels) in images {
            let path = dir.join(format!("sample_{k}_{tag}.pgm"));
            let result = encode_pgm(width, IMAGE_ROWS, &pixels)
                .and_then(|bytes| fs::write(&path, bytes).map_err(|e| Error::io(&path, e)));
            match result {
                Ok(()) => written.push(path),
                Err(e) => warn!("{e}"),
            }
        }
    }
    written
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub evolution: EvolutionReport,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub metrics_records: usize,
    pub resumed_from_generation: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: RunReport,
    pub best: Individual,
    pub output_dir: PathBuf,
}

/// Execute a full run into `config.output_dir`.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    run_from(config, None)
}

/// Continue from a checkpoint directory (see [`find_checkpoint`]).
pub fn resume(config: &RunConfig, checkpoint_dir: &Path) -> Result<RunSummary> {
    let ckpt = load_checkpoint(checkpoint_dir)?;
    run_from(config, Some(ckpt))
}

/// Load a checkpoint's stored config, then apply flag overrides.
pub fn resume_config(checkpoint_dir: &Path, overrides: &ConfigOverrides) -> Result<RunConfig> {
    let doc: StateDoc = read_json(&checkpoint_dir.join("state.json"))?;
    let mut c = RunConfig::from_json(&doc.config, Path::new(""))?;
    c.apply_overrides(overrides);
    c.validate()?;
    Ok(c)
}

fn run_from(config: &RunConfig, checkpoint: Option<Checkpoint>) -> Result<RunSummary> {
    config.validate()?;
    let splits = load_splits(config)?;
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_json(&out.join("config.json"), &config.to_json(), true)?;

    let mut writer = MetricsWriter::create(out)?;
    let (resumed_from, mut all_records, state) = match checkpoint {
        Some(c) => {
            writer.write(&c.metrics)?;
            (Some(c.state.completed_generation), c.metrics, Some(c.state))
        }
        None => (None, Vec::new(), None),
    };

    let mut observer = |o: &GenerationOutcome<'_>| -> Result<()> {
        let records = generation_records(o);
        writer.write(&records)?;
        all_records.extend(records);
        for ind in o.population {
            let p = out.join(format!("genomes/gen{}/ind{}.json", o.generation, ind.id));
            write_text(&p, &serialize_genome_pretty(ind.genome()))?;
        }
        save_checkpoint(
            &out.join(format!("checkpoints/gen{}", o.generation)),
            o.state,
            &all_records,
            config,
        )
    };
    let data = splits.training_data();
    let outcome = match state {
        Some(s) => evolve::resume_evolution(&config.evolution, data, s, &mut observer)?,
        None => evolve::run_evolution(&config.evolution, data, &mut observer)?,
    };
    drop(writer);

    let best = outcome.best;
    save_individual(&out.join("best/individual.json"), &best)?;
    write_text(&out.join("best/genome.json"), &serialize_genome_pretty(best.genome()))?;

    let recon_source = if splits.test.is_empty() {
        &splits.val
    } else {
        &splits.test
    };
    let samples: Vec<&[f64]> = recon_source.images().take(config.recon_samples).collect();
    emit_reconstructions(&best.model, &samples, &out.join("recon"));

    let report = RunReport {
        evolution: outcome.report,
        train_size: splits.train.len(),
        val_size: splits.val.len(),
        test_size: splits.test.len(),
        metrics_records: all_records.len(),
        resumed_from_generation: resumed_from,
    };
    write_json(&out.join("report.json"), &report, true)?;
    info!(
        "best individual {} val loss {:.5}; outputs in {}",
        report.evolution.best_id,
        report.evolution.best_val_loss,
        out.display()
    );
    Ok(RunSummary {
        report,
        best,
        output_dir: out.clone(),
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, format!("{text}\n")).map_err(|e| Error::io(path, e))
}

/// Train the founder genome with and without extra random CNOTs and write
/// `probe.json` into the output directory.
pub fn run_probe(config: &RunConfig, extra_cnots: usize) -> Result<ProbeResult> {
    config.validate()?;
    let splits = load_splits(config)?;
    let result = evolve::entanglement_probe(&config.evolution, splits.training_data(), extra_cnots)?;
    let out = &config.output_dir;
    write_json(&out.join("probe.json"), &result, true)?;
    Ok(result)
}

/// Expected metrics line count for a completed schedule.
pub fn expected_metrics_records(config: &EvolutionConfig) -> usize {
    let ga = &config.ga;
    let sessions = ga.population_size + (ga.generations - 1) * (ga.population_size - ga.elite_k);
    sessions * ga.epochs_per_generation + ga.population_size * ga.generations
}

/// Records keyed for determinism comparisons: everything except wall time.
pub fn mask_wall_time(records: &[MetricsRecord]) -> Vec<MetricsRecord> {
    records
        .iter()
        .cloned()
        .map(|mut r| {
            r.wall_time_s = 0.0;
            r
        })
        .collect()
}

/// Human-readable listing of a genome file.
pub fn describe_genome(genome: &CircuitGenome) -> String {
    let c = genome.gate_counts();
    let mut s = format!(
        "genome {}: {} qubits, {} params, {} genes (RX {}, RY {}, RZ {}, H {}, CNOT {})\n",
        genome.hash_hex(),
        genome.n_qubits(),
        genome.n_params(),
        genome.genes().len(),
        c.rot_x,
        c.rot_y,
        c.rot_z,
        c.hadamard,
        c.cnot
    );
    for (i, g) in genome.genes().iter().enumerate() {
        s.push_str(&format!("{i:>4}  {g}\n"));
    }
    s
}
