//! Elitist genetic search over circuit genomes.
//!
//! Each generation trains the individuals that have no fitness yet (all
//! founders in generation 1, only fresh offspring afterwards), scores every
//! individual by validation loss, keeps the `elite_k` best unchanged, and
//! fills the remaining slots with mutated copies of uniformly chosen elites.

use std::time::Instant;

use log::{info, warn};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{self, build_initial_genome, fresh_param, Axis, CircuitGenome, Gene, DEFAULT_MAX_GENES};
use crate::data::{self, ImageDataset};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, HybridAutoencoder, ModelShape, DEFAULT_HIDDEN, IMAGE_DIM};
use crate::rng::{self, derive_seed, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub elite_k: usize,
    pub generations: usize,
    pub epochs_per_generation: usize,
    pub rot_mutation_rate: f64,
    pub fixed_gate_mutation_rate: f64,
    /// Standard deviation (radians) of parameter perturbations.
    pub param_perturb_sigma: f64,
    pub max_genes: usize,
    pub master_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 10,
            elite_k: 3,
            generations: 5,
            epochs_per_generation: 10,
            rot_mutation_rate: 0.2,
            fixed_gate_mutation_rate: 0.2,
            param_perturb_sigma: 0.1,
            max_genes: DEFAULT_MAX_GENES,
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_qubits: usize,
    pub depth: usize,
    pub hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_qubits: 4,
            depth: 2,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub ga: GaConfig,
    pub train: TrainConfig,
    pub model: ModelConfig,
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let ga = &self.ga;
        let bad = |m: String| Err(Error::Config(m));
        if !(0 < ga.elite_k && ga.elite_k < ga.population_size) {
            return bad(format!(
                "ga.elite_k must satisfy 0 < elite_k < population_size, got {} / {}",
                ga.elite_k, ga.population_size
            ));
        }
        for (name, rate) in [
            ("ga.rot_mutation_rate", ga.rot_mutation_rate),
            ("ga.fixed_gate_mutation_rate", ga.fixed_gate_mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return bad(format!("{name} must be in [0, 1], got {rate}"));
            }
        }
        if !(ga.param_perturb_sigma.is_finite() && ga.param_perturb_sigma >= 0.0) {
            return bad(format!(
                "ga.param_perturb_sigma must be >= 0, got {}",
                ga.param_perturb_sigma
            ));
        }
        if ga.generations == 0 || ga.epochs_per_generation == 0 {
            return bad("ga.generations and ga.epochs_per_generation must be >= 1".into());
        }
        if self.train.batch_size == 0 {
            return bad("train.batch_size must be >= 1".into());
        }
        let lr = self.train.adam.learning_rate;
        if !(lr.is_finite() && lr > 0.0) {
            return bad(format!("train.learning_rate must be > 0, got {lr}"));
        }
        let m = &self.model;
        if !(2..=crate::simulator::MAX_QUBITS).contains(&m.n_qubits) || m.depth == 0 || m.hidden == 0 {
            return bad(format!(
                "model needs 2 <= n_qubits <= 12, depth >= 1, hidden >= 1; got {m:?}"
            ));
        }
        let initial_len = m.depth * (2 * m.n_qubits - 1);
        if ga.max_genes < initial_len {
            return bad(format!(
                "ga.max_genes = {} is smaller than the initial genome ({initial_len} genes)",
                ga.max_genes
            ));
        }
        Ok(())
    }

    fn shape(&self) -> ModelShape {
        ModelShape {
            input_dim: IMAGE_DIM,
            hidden: self.model.hidden,
            n_qubits: self.model.n_qubits,
        }
    }
}

/// One applied mutation (or an explicit record that nothing changed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum MutationEvent {
    AxisChange {
        gene: usize,
        slot: usize,
        from: Axis,
        to: Axis,
    },
    QubitChange {
        gene: usize,
        slot: usize,
        from: usize,
        to: usize,
    },
    ParamPerturb {
        gene: usize,
        slot: usize,
        delta: f64,
    },
    Insert {
        position: usize,
        gate: String,
    },
    InsertSkipped {
        reason: String,
    },
    Delete {
        position: usize,
        gate: String,
    },
    DeleteSkipped {
        reason: String,
    },
    NoOp,
}

impl MutationEvent {
    /// Whether the event changed the gate structure or reset a parameter.
    pub fn replaces_gate(&self) -> bool {
        matches!(
            self,
            MutationEvent::AxisChange { .. } | MutationEvent::QubitChange { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub id: u64,
    pub model: HybridAutoencoder,
    pub optimizer: Adam,
    /// Validation loss; `+inf` marks a diverged individual.
    pub fitness: Option<f64>,
    pub test_loss: Option<f64>,
    pub parent_id: Option<u64>,
    pub birth_generation: usize,
    pub mutation_log: Vec<MutationEvent>,
}

impl Individual {
    pub fn genome(&self) -> &CircuitGenome {
        self.model.genome()
    }
}

fn fresh_optimizer(model: &HybridAutoencoder, cfg: &TrainConfig) -> Adam {
    Adam::new(cfg.adam, &model.tensor_lens())
}

/// Founders: identical initial genomes, independently initialised weights
/// drawn from per-slot streams of the master seed.
pub fn init_population(config: &EvolutionConfig) -> Result<Vec<Individual>> {
    config.validate()?;
    let genome = build_initial_genome(config.model.n_qubits, config.model.depth)?;
    (0..config.ga.population_size)
        .map(|slot| {
            let mut rng = rng::stream(config.ga.master_seed, Stream::InitIndividual, &[slot as u64]);
            let q = circuit::init_params(genome.n_params(), &mut rng);
            let model = HybridAutoencoder::new(config.shape(), genome.clone(), q, &mut rng)?;
            Ok(Individual {
                id: slot as u64,
                optimizer: fresh_optimizer(&model, &config.train),
                model,
                fitness: None,
                test_loss: None,
                parent_id: None,
                birth_generation: 1,
                mutation_log: Vec::new(),
            })
        })
        .collect()
}

/// Ids of the `k` individuals with the lowest fitness, ascending; ties go to
/// the smaller id.
pub fn select_elite(population: &[Individual], k: usize) -> Result<Vec<u64>> {
    let mut scored = population
        .iter()
        .map(|ind| {
            ind.fitness
                .filter(|f| !f.is_nan())
                .map(|f| (f, ind.id))
                .ok_or_else(|| Error::contract(format!("individual {} has not been evaluated", ind.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    if k > scored.len() {
        return Err(Error::contract(format!(
            "cannot select {k} elites from {} individuals",
            scored.len()
        )));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(k).map(|(_, id)| id).collect())
}

/// Apply the mutation operators to a genome and its parameters.
///
/// * per rotation gene, with `rot_mutation_rate`: change its axis or move it
///   to another qubit (fair coin), re-initialising its parameter;
/// * per rotation gene, with `rot_mutation_rate`: add `N(0, σ²)` to its parameter;
/// * with `fixed_gate_mutation_rate`: insert an H or CNOT (fair coin) at a
///   uniform position, CNOT endpoints being any ordered pair of distinct qubits;
/// * with `fixed_gate_mutation_rate`: delete a uniformly chosen H/CNOT gene.
///
/// Rotation genes are never added or removed, so the parameter count is fixed.
pub fn mutate<R: rand::Rng + ?Sized>(
    genome: &CircuitGenome,
    q_params: &[f64],
    rng: &mut R,
    config: &GaConfig,
) -> Result<(CircuitGenome, Vec<f64>, Vec<MutationEvent>)> {
    if q_params.len() != genome.n_params() {
        return Err(Error::contract("parameter vector does not match genome"));
    }
    let n = genome.n_qubits();
    let mut genes = genome.genes().to_vec();
    let mut params = q_params.to_vec();
    let mut log = Vec::new();
    let perturb =
        Normal::new(0.0, config.param_perturb_sigma).map_err(|e| Error::Config(format!("param_perturb_sigma: {e}")))?;

    for (i, gene) in genes.iter_mut().enumerate() {
        let Gene::Rot { axis, qubit, slot } = gene else {
            continue;
        };
        if rng.random_bool(config.rot_mutation_rate) {
            if rng.random_bool(0.5) {
                let others: Vec<Axis> = Axis::ALL.into_iter().filter(|a| a != axis).collect();
                let to = others[rng.random_range(0..others.len())];
                log.push(MutationEvent::AxisChange {
                    gene: i,
                    slot: *slot,
                    from: *axis,
                    to,
                });
                *axis = to;
            } else {
                let mut to = rng.random_range(0..n - 1);
                if to >= *qubit {
                    to += 1;
                }
                log.push(MutationEvent::QubitChange {
                    gene: i,
                    slot: *slot,
                    from: *qubit,
                    to,
                });
                *qubit = to;
            }
            params[*slot] = fresh_param(rng);
        }
        if rng.random_bool(config.rot_mutation_rate) {
            let delta = perturb.sample(rng);
            params[*slot] += delta;
            log.push(MutationEvent::ParamPerturb {
                gene: i,
                slot: *slot,
                delta,
            });
        }
    }

    if rng.random_bool(config.fixed_gate_mutation_rate) {
        if genes.len() >= config.max_genes {
            log.push(MutationEvent::InsertSkipped {
                reason: format!("genome already has max_genes = {} genes", config.max_genes),
            });
        } else {
            let position = rng.random_range(0..=genes.len());
            let gate = if rng.random_bool(0.5) {
                Gene::Hadamard {
                    qubit: rng.random_range(0..n),
                }
            } else {
                let control = rng.random_range(0..n);
                let mut target = rng.random_range(0..n - 1);
                if target >= control {
                    target += 1;
                }
                Gene::Cnot { control, target }
            };
            genes.insert(position, gate);
            log.push(MutationEvent::Insert {
                position,
                gate: gate.to_string(),
            });
        }
    }

    if rng.random_bool(config.fixed_gate_mutation_rate) {
        let fixed: Vec<usize> = genes
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.is_rotation())
            .map(|(i, _)| i)
            .collect();
        if fixed.is_empty() {
            log.push(MutationEvent::DeleteSkipped {
                reason: "no non-parameterized gates to delete".into(),
            });
        } else {
            let position = fixed[rng.random_range(0..fixed.len())];
            let gate = genes.remove(position);
            log.push(MutationEvent::Delete {
                position,
                gate: gate.to_string(),
            });
        }
    }

    Ok((genome.with_genes(genes)?, params, log))
}

/// Build generation `generation` from the evaluated previous population:
/// elites carried over unchanged, other slots filled with mutated copies of
/// uniformly drawn elites (which inherit the parent's trained weights).
pub fn next_generation(
    population: &[Individual],
    config: &EvolutionConfig,
    generation: usize,
    next_id: &mut u64,
) -> Result<Vec<Individual>> {
    let ga = &config.ga;
    let elite_ids = select_elite(population, ga.elite_k)?;
    let by_id = |id: u64| {
        population
            .iter()
            .find(|i| i.id == id)
            .expect("elite id from population")
    };
    let elites: Vec<&Individual> = elite_ids.iter().map(|&id| by_id(id)).collect();

    let mut next: Vec<Individual> = elites.iter().map(|e| (*e).clone()).collect();
    for slot in 0..population.len() - ga.elite_k {
        let mut rng = rng::stream(ga.master_seed, Stream::Mutation, &[generation as u64, slot as u64]);
        let parent = elites[rng.random_range(0..elites.len())];
        let (genome, q_params, mut log) = mutate(parent.genome(), parent.model.q_params(), &mut rng, ga)?;
        if log.is_empty() {
            log.push(MutationEvent::NoOp);
        }
        let mut model = parent.model.clone();
        model.set_circuit(genome, q_params)?;
        next.push(Individual {
            id: *next_id,
            optimizer: fresh_optimizer(&model, &config.train),
            model,
            fitness: None,
            test_loss: None,
            parent_id: Some(parent.id),
            birth_generation: generation,
            mutation_log: log,
        });
        *next_id += 1;
    }
    Ok(next)
}

/// Train/validation/test images seen by the search.
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    pub train: &'a ImageDataset,
    pub val: &'a ImageDataset,
    pub test: Option<&'a ImageDataset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub generation: usize,
    pub individual: u64,
    pub epoch: usize,
    /// Mean per-sample loss over the epoch's batches; `None` if training diverged.
    pub train_loss: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub generation: usize,
    pub individual: u64,
    #[serde(with = "crate::json_float")]
    pub val_loss: f64,
    pub test_loss: Option<f64>,
    pub wall_time_s: f64,
}

/// Train one model in place for `epochs` epochs. Batch order for each epoch
/// comes from a stream keyed by `(seed, generation, id, epoch)`.
#[allow(clippy::too_many_arguments)]
pub fn train_model(
    model: &mut HybridAutoencoder,
    optimizer: &mut Adam,
    train: &ImageDataset,
    cfg: &TrainConfig,
    epochs: usize,
    seed: u64,
    generation: usize,
    id: u64,
) -> (Vec<EpochRecord>, Option<Error>) {
    let mut records = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        let start = Instant::now();
        let mut run_epoch = || -> Result<f64> {
            let epoch_seed = derive_seed(seed, Stream::EpochShuffle, &[generation as u64, id, epoch as u64]);
            let mut total = 0.0;
            for batch in data::batches(train.len(), cfg.batch_size, epoch_seed)? {
                let images: Vec<&[f64]> = batch.iter().map(|&i| train.image(i)).collect();
                let (loss, grads) = model.batch_gradients(&images)?;
                total += loss * images.len() as f64;
                let grads = grads.tensors();
                optimizer.step(&mut model.tensors_mut(), &grads)?;
            }
            Ok(total / train.len() as f64)
        };
        let result = run_epoch();
        let wall_time_s = start.elapsed().as_secs_f64();
        match result {
            Ok(loss) => records.push(EpochRecord {
                generation,
                individual: id,
                epoch,
                train_loss: Some(loss),
                wall_time_s,
            }),
            Err(e) => {
                records.push(EpochRecord {
                    generation,
                    individual: id,
                    epoch,
                    train_loss: None,
                    wall_time_s,
                });
                return (
                    records,
                    Some(e.with_context(format!("generation {generation}, individual {id}"))),
                );
            }
        }
    }
    (records, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub generation: usize,
    pub trained: usize,
    pub best_id: u64,
    #[serde(with = "crate::json_float")]
    pub best_val_loss: f64,
    #[serde(with = "crate::json_float")]
    pub best_so_far: f64,
    pub mean_test_loss_all: Option<f64>,
    pub mean_test_loss_trained: Option<f64>,
}

/// Everything produced by one generation, handed to the observer.
#[derive(Debug)]
pub struct GenerationOutcome<'a> {
    pub generation: usize,
    pub population: &'a [Individual],
    pub epoch_records: &'a [EpochRecord],
    pub eval_records: &'a [EvalRecord],
    pub summary: &'a GenerationSummary,
    pub state: &'a EvolutionState,
}

/// Resumable search state after a completed generation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    pub completed_generation: usize,
    pub population: Vec<Individual>,
    pub next_id: u64,
    pub history: Vec<GenerationSummary>,
    pub training_sessions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    pub best_id: u64,
    #[serde(with = "crate::json_float")]
    pub best_val_loss: f64,
    pub best_test_loss: Option<f64>,
    pub best_genome: CircuitGenome,
    pub training_sessions: usize,
    pub history: Vec<GenerationSummary>,
}

#[derive(Debug, Clone)]
pub struct EvolutionOutcome {
    pub report: EvolutionReport,
    pub best: Individual,
    pub state: EvolutionState,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .filter(|v| v.is_finite())
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Run the full search from scratch.
pub fn run_evolution(
    config: &EvolutionConfig,
    data: TrainingData<'_>,
    observer: &mut dyn FnMut(&GenerationOutcome<'_>) -> Result<()>,
) -> Result<EvolutionOutcome> {
    let population = init_population(config)?;
    let state = EvolutionState {
        completed_generation: 0,
        next_id: population.len() as u64,
        population,
        history: Vec::new(),
        training_sessions: 0,
    };
    resume_evolution(config, data, state, observer)
}

/// Continue a search from the state saved after a completed generation.
pub fn resume_evolution(
    config: &EvolutionConfig,
    data: TrainingData<'_>,
    mut state: EvolutionState,
    observer: &mut dyn FnMut(&GenerationOutcome<'_>) -> Result<()>,
) -> Result<EvolutionOutcome> {
    config.validate()?;
    if state.population.len() != config.ga.population_size {
        return Err(Error::Config(format!(
            "saved population has {} individuals, config expects {}",
            state.population.len(),
            config.ga.population_size
        )));
    }
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::contract("training and validation splits must be non-empty"));
    }
    let seed = config.ga.master_seed;
    let epochs = config.ga.epochs_per_generation;

    for generation in state.completed_generation + 1..=config.ga.generations {
        if generation > 1 {
            state.population = next_generation(&state.population, config, generation, &mut state.next_id)?;
        }

        let pending: Vec<usize> = (0..state.population.len())
            .filter(|&i| state.population[i].fitness.is_none())
            .collect();
        let trained_ids: Vec<u64> = pending.iter().map(|&i| state.population[i].id).collect();

        let results: Vec<(Vec<EpochRecord>, Option<EvalRecord>)> = state
            .population
            .par_iter_mut()
            .filter(|ind| ind.fitness.is_none())
            .map(|ind| {
                let (records, err) = train_model(
                    &mut ind.model,
                    &mut ind.optimizer,
                    data.train,
                    &config.train,
                    epochs,
                    seed,
                    generation,
                    ind.id,
                );
                let start = Instant::now();
                let evaluated = match err {
                    Some(e) => Err(e),
                    None => ind
                        .model
                        .evaluate(&data.val.images().collect::<Vec<_>>())
                        .and_then(|v| {
                            let t = data
                                .test
                                .filter(|t| !t.is_empty())
                                .map(|t| ind.model.evaluate(&t.images().collect::<Vec<_>>()))
                                .transpose()?;
                            Ok((v, t))
                        }),
                };
                match evaluated {
                    Ok((val, test)) => {
                        ind.fitness = Some(val);
                        ind.test_loss = test;
                    }
                    Err(e) => {
                        warn!("{e}; marking individual {} with infinite fitness", ind.id);
                        ind.fitness = Some(f64::INFINITY);
                        ind.test_loss = None;
                    }
                }
                let eval = EvalRecord {
                    generation,
                    individual: ind.id,
                    val_loss: ind.fitness.unwrap_or(f64::INFINITY),
                    test_loss: ind.test_loss,
                    wall_time_s: start.elapsed().as_secs_f64(),
                };
                (records, Some(eval))
            })
            .collect();
        state.training_sessions += pending.len();

        let mut epoch_records: Vec<EpochRecord> = Vec::new();
        let mut fresh_evals: Vec<EvalRecord> = Vec::new();
        for (recs, eval) in results {
            epoch_records.extend(recs);
            fresh_evals.extend(eval);
        }
        epoch_records.sort_by_key(|r| (r.individual, r.epoch));

        // Retained individuals keep their previous evaluation.
        let mut eval_records: Vec<EvalRecord> = state
            .population
            .iter()
            .map(|ind| {
                fresh_evals
                    .iter()
                    .find(|e| e.individual == ind.id)
                    .cloned()
                    .unwrap_or(EvalRecord {
                        generation,
                        individual: ind.id,
                        val_loss: ind.fitness.expect("retained individuals are evaluated"),
                        test_loss: ind.test_loss,
                        wall_time_s: 0.0,
                    })
            })
            .collect();
        eval_records.sort_by_key(|r| r.individual);

        let best_id = select_elite(&state.population, 1)?[0];
        let best = state.population.iter().find(|i| i.id == best_id).expect("best id");
        let best_val = best.fitness.expect("evaluated");
        let best_so_far = state.history.last().map_or(best_val, |h| h.best_so_far.min(best_val));
        let summary = GenerationSummary {
            generation,
            trained: pending.len(),
            best_id,
            best_val_loss: best_val,
            best_so_far,
            mean_test_loss_all: mean(state.population.iter().filter_map(|i| i.test_loss)),
            mean_test_loss_trained: mean(
                state
                    .population
                    .iter()
                    .filter(|i| trained_ids.contains(&i.id))
                    .filter_map(|i| i.test_loss),
            ),
        };
        info!(
            "generation {generation}: trained {}, best individual {best_id} val {best_val:.5}, best so far {best_so_far:.5}",
            pending.len()
        );
        state.history.push(summary.clone());
        state.completed_generation = generation;
        observer(&GenerationOutcome {
            generation,
            population: &state.population,
            epoch_records: &epoch_records,
            eval_records: &eval_records,
            summary: &summary,
            state: &state,
        })?;
    }

    let best_id = select_elite(&state.population, 1)?[0];
    let best = state
        .population
        .iter()
        .find(|i| i.id == best_id)
        .expect("best id")
        .clone();
    let report = EvolutionReport {
        best_id,
        best_val_loss: best.fitness.expect("evaluated"),
        best_test_loss: best.test_loss,
        best_genome: best.genome().clone(),
        training_sessions: state.training_sessions,
        history: state.history.clone(),
    };
    Ok(EvolutionOutcome { report, best, state })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub baseline_genome: CircuitGenome,
    pub entangled_genome: CircuitGenome,
    pub extra_cnots: usize,
    #[serde(with = "crate::json_float")]
    pub baseline_val_loss: f64,
    #[serde(with = "crate::json_float")]
    pub entangled_val_loss: f64,
    /// `entangled / baseline − 1`, when both runs stayed finite.
    pub relative_change: Option<f64>,
}

/// Train the founder genome and the same genome with `extra_cnots` random
/// CNOTs appended, from identical initial weights and batch order, and report
/// both validation losses.
pub fn entanglement_probe(config: &EvolutionConfig, data: TrainingData<'_>, extra_cnots: usize) -> Result<ProbeResult> {
    config.validate()?;
    let seed = config.ga.master_seed;
    let n = config.model.n_qubits;
    let baseline = build_initial_genome(n, config.model.depth)?;
    let mut rng = rng::stream(seed, Stream::Probe, &[1]);
    let mut genes = baseline.genes().to_vec();
    for _ in 0..extra_cnots {
        let control = rng.random_range(0..n);
        let mut target = rng.random_range(0..n - 1);
        if target >= control {
            target += 1;
        }
        genes.push(Gene::Cnot { control, target });
    }
    let entangled = baseline.with_genes(genes)?;

    let mut init_rng = rng::stream(seed, Stream::Probe, &[0]);
    let q = circuit::init_params(baseline.n_params(), &mut init_rng);
    let base_model = HybridAutoencoder::new(config.shape(), baseline.clone(), q.clone(), &mut init_rng)?;
    let mut ent_model = base_model.clone();
    ent_model.set_circuit(entangled.clone(), q)?;

    let val: Vec<&[f64]> = data.val.images().collect();
    let losses = [base_model, ent_model]
        .into_par_iter()
        .map(|mut model| {
            let mut opt = fresh_optimizer(&model, &config.train);
            let (_, err) = train_model(
                &mut model,
                &mut opt,
                data.train,
                &config.train,
                config.ga.epochs_per_generation,
                seed,
                1,
                0,
            );
            match err {
                Some(_) => Ok(f64::INFINITY),
                None => model.evaluate(&val),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ProbeResult {
        baseline_genome: baseline,
        entangled_genome: entangled,
        extra_cnots,
        baseline_val_loss: losses[0],
        entangled_val_loss: losses[1],
        relative_change: (losses[0].is_finite() && losses[1].is_finite()).then(|| losses[1] / losses[0] - 1.0),
    })
}
