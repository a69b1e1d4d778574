//! Variational circuit genomes, their execution, and parameter-shift gradients.
//!
//! A circuit is a fixed feature map (Hadamard on every qubit, then `RY(angle_i)`
//! on qubit `i`) followed by the mutable ansatz described by a [`CircuitGenome`].
//! The output is the vector of per-qubit Pauli-Z expectations.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::simulator::{GateOp, StateVector};

pub const GENOME_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_MAX_GENES: usize = 64;
/// Half-width of the uniform range used for fresh rotation parameters.
pub const PARAM_INIT_RANGE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

/// One gate of the ansatz.
///
/// Rotation genes own exactly one parameter slot; fixed gates own none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gene {
    Rot { axis: Axis, qubit: usize, slot: usize },
    Hadamard { qubit: usize },
    Cnot { control: usize, target: usize },
}

impl Gene {
    pub fn is_rotation(&self) -> bool {
        matches!(self, Gene::Rot { .. })
    }

    pub fn slot(&self) -> Option<usize> {
        match *self {
            Gene::Rot { slot, .. } => Some(slot),
            _ => None,
        }
    }

    fn to_op(self, params: &[f64]) -> GateOp {
        match self {
            Gene::Rot { axis, qubit, slot } => {
                let a = params[slot];
                match axis {
                    Axis::X => GateOp::RotX(qubit, a),
                    Axis::Y => GateOp::RotY(qubit, a),
                    Axis::Z => GateOp::RotZ(qubit, a),
                }
            }
            Gene::Hadamard { qubit } => GateOp::Hadamard(qubit),
            Gene::Cnot { control, target } => GateOp::Cnot { control, target },
        }
    }
}

impl fmt::Display for Gene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gene::Rot { axis, qubit, slot } => write!(f, "R{axis:?}(q{qubit}, θ[{slot}])"),
            Gene::Hadamard { qubit } => write!(f, "H(q{qubit})"),
            Gene::Cnot { control, target } => write!(f, "CNOT(q{control} -> q{target})"),
        }
    }
}

/// Gate counts by kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub rot_x: usize,
    pub rot_y: usize,
    pub rot_z: usize,
    pub hadamard: usize,
    pub cnot: usize,
}

/// The mutable ansatz of one individual.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CircuitGenome {
    n_qubits: usize,
    n_params: usize,
    genes: Vec<Gene>,
}

impl CircuitGenome {
    /// Build a genome, checking every structural invariant.
    pub fn new(n_qubits: usize, n_params: usize, genes: Vec<Gene>) -> Result<Self> {
        validate(n_qubits, n_params, &genes).map_err(|(location, message)| Error::Parse { location, message })?;
        Ok(CircuitGenome {
            n_qubits,
            n_params,
            genes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn genes(&self) -> &[Gene] {
        &self.genes
    }

    pub fn rotation_count(&self) -> usize {
        self.genes.iter().filter(|g| g.is_rotation()).count()
    }

    /// Same qubit count and parameter count, different genes.
    pub fn with_genes(&self, genes: Vec<Gene>) -> Result<Self> {
        CircuitGenome::new(self.n_qubits, self.n_params, genes)
    }

    pub fn gate_counts(&self) -> GateCounts {
        let mut c = GateCounts::default();
        for g in &self.genes {
            match g {
                Gene::Rot { axis: Axis::X, .. } => c.rot_x += 1,
                Gene::Rot { axis: Axis::Y, .. } => c.rot_y += 1,
                Gene::Rot { axis: Axis::Z, .. } => c.rot_z += 1,
                Gene::Hadamard { .. } => c.hadamard += 1,
                Gene::Cnot { .. } => c.cnot += 1,
            }
        }
        c
    }

    /// Short content hash (first 16 hex chars of SHA-256 over the genome JSON).
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(serialize_genome(self).as_bytes());
        hex::encode(&digest[..8])
    }
}

fn validate(n_qubits: usize, n_params: usize, genes: &[Gene]) -> std::result::Result<(), (String, String)> {
    if !(1..=crate::simulator::MAX_QUBITS).contains(&n_qubits) {
        return Err(("n_qubits".into(), format!("{n_qubits} is outside 1..=12")));
    }
    let mut seen = vec![false; n_params];
    for (i, g) in genes.iter().enumerate() {
        let at = |field: &str| format!("genes[{i}].{field}");
        let check_q = |q: usize, field: &str| {
            if q >= n_qubits {
                Err((at(field), format!("qubit {q} >= n_qubits {n_qubits}")))
            } else {
                Ok(())
            }
        };
        match *g {
            Gene::Rot { qubit, slot, .. } => {
                check_q(qubit, "qubit")?;
                if slot >= n_params {
                    return Err((at("param_slot"), format!("slot {slot} >= n_params {n_params}")));
                }
                if std::mem::replace(&mut seen[slot], true) {
                    return Err((at("param_slot"), format!("duplicate param_slot {slot}")));
                }
            }
            Gene::Hadamard { qubit } => check_q(qubit, "qubit")?,
            Gene::Cnot { control, target } => {
                check_q(target, "qubit")?;
                check_q(control, "control")?;
                if control == target {
                    return Err((at("control"), format!("CNOT control equals target {target}")));
                }
            }
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err((
            "genes".into(),
            format!("param_slot {missing} is not used by any rotation gene"),
        ));
    }
    Ok(())
}

/// Initial ansatz: `depth` repetitions of one RY per qubit followed by a
/// linear CNOT chain `0→1, 1→2, …, n−2→n−1`.
pub fn build_initial_genome(n_qubits: usize, depth: usize) -> Result<CircuitGenome> {
    if n_qubits < 2 || depth < 1 {
        return Err(Error::Config(format!(
            "initial genome needs n_qubits >= 2 and depth >= 1, got ({n_qubits}, {depth})"
        )));
    }
    let mut genes = Vec::with_capacity(depth * (2 * n_qubits - 1));
    let mut slot = 0;
    for _ in 0..depth {
        for qubit in 0..n_qubits {
            genes.push(Gene::Rot {
                axis: Axis::Y,
                qubit,
                slot,
            });
            slot += 1;
        }
        for q in 0..n_qubits - 1 {
            genes.push(Gene::Cnot {
                control: q,
                target: q + 1,
            });
        }
    }
    CircuitGenome::new(n_qubits, slot, genes)
}

/// Fresh rotation parameter drawn uniformly from `[-0.1, 0.1]`.
pub fn fresh_param<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-PARAM_INIT_RANGE..=PARAM_INIT_RANGE)
}

pub fn init_params<R: Rng + ?Sized>(n_params: usize, rng: &mut R) -> Vec<f64> {
    (0..n_params).map(|_| fresh_param(rng)).collect()
}

/// Per-qubit Z expectations, each in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector(pub Vec<f64>);

impl LatentVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

fn check_dims(genome: &CircuitGenome, params: &[f64], angles: &[f64]) -> Result<()> {
    if params.len() != genome.n_params {
        return Err(Error::contract(format!(
            "expected {} circuit parameters, got {}",
            genome.n_params,
            params.len()
        )));
    }
    if angles.len() != genome.n_qubits {
        return Err(Error::contract(format!(
            "expected {} encoding angles, got {}",
            genome.n_qubits,
            angles.len()
        )));
    }
    Ok(())
}

/// The full gate list (feature map then ansatz) for the given inputs.
pub fn gate_sequence(genome: &CircuitGenome, params: &[f64], angles: &[f64]) -> Result<Vec<GateOp>> {
    check_dims(genome, params, angles)?;
    let n = genome.n_qubits;
    let mut ops = Vec::with_capacity(2 * n + genome.genes.len());
    ops.extend((0..n).map(GateOp::Hadamard));
    ops.extend(angles.iter().enumerate().map(|(q, &a)| GateOp::RotY(q, a)));
    ops.extend(genome.genes.iter().map(|g| g.to_op(params)));
    Ok(ops)
}

fn run(genome: &CircuitGenome, params: &[f64], angles: &[f64]) -> Result<Vec<f64>> {
    let mut state = StateVector::new(genome.n_qubits)?;
    state.apply_all(&gate_sequence(genome, params, angles)?)?;
    Ok(state.expectation_z_all())
}

/// Simulate the circuit and measure `⟨Z_i⟩` on every qubit.
pub fn execute(genome: &CircuitGenome, params: &[f64], angles: &[f64]) -> Result<LatentVector> {
    run(genome, params, angles).map(LatentVector)
}

/// Parameter-shift derivative of a vector-valued function of rotation angles
/// with respect to `args[index]`: `[f(θ + π/2) − f(θ − π/2)] / 2`.
///
/// Exact whenever `args[index]` enters through a single `exp(−iθσ/2)` gate.
pub fn parameter_shift<F>(f: F, args: &[f64], index: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if index >= args.len() {
        return Err(Error::contract(format!(
            "no parameter {index}; only {} available",
            args.len()
        )));
    }
    let mut shifted = args.to_vec();
    shifted[index] = args[index] + FRAC_PI_2;
    let plus = f(&shifted)?;
    shifted[index] = args[index] - FRAC_PI_2;
    let minus = f(&shifted)?;
    Ok(plus.iter().zip(&minus).map(|(p, m)| (p - m) / 2.0).collect())
}

/// `n_qubits × cols` row-major Jacobian of the latent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Jacobian {
    fn from_columns(rows: usize, columns: Vec<Vec<f64>>) -> Self {
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                data[i * cols + j] = *v;
            }
        }
        Jacobian { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `∂⟨Z_row⟩ / ∂arg_col`
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// `Jᵀ v`, i.e. pull a gradient on the latent vector back to the arguments.
    pub fn transpose_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, &vi) in self.data.chunks_exact(self.cols.max(1)).zip(v) {
            for (o, &j) in out.iter_mut().zip(row) {
                *o += j * vi;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitGradients {
    /// `∂⟨Z⟩/∂params`, `n_qubits × n_params`.
    pub params: Jacobian,
    /// `∂⟨Z⟩/∂angles`, `n_qubits × n_qubits`.
    pub angles: Jacobian,
}

/// Exact Jacobians via the parameter-shift rule, for both the ansatz parameters
/// and the feature-map angles. Costs `2 (n_params + n_qubits)` executions.
pub fn param_shift_grads(genome: &CircuitGenome, params: &[f64], angles: &[f64]) -> Result<CircuitGradients> {
    check_dims(genome, params, angles)?;
    let n = genome.n_qubits;
    let wrt_params = (0..params.len())
        .map(|i| parameter_shift(|p| run(genome, p, angles), params, i))
        .collect::<Result<Vec<_>>>()?;
    let wrt_angles = (0..n)
        .map(|i| parameter_shift(|a| run(genome, params, a), angles, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(CircuitGradients {
        params: Jacobian::from_columns(n, wrt_params),
        angles: Jacobian::from_columns(n, wrt_angles),
    })
}

/// Derivative of the latent vector with respect to one ansatz parameter slot.
pub fn param_shift_slot(genome: &CircuitGenome, params: &[f64], angles: &[f64], slot: usize) -> Result<Vec<f64>> {
    check_dims(genome, params, angles)?;
    if slot >= genome.n_params {
        return Err(Error::contract(format!(
            "genome has no parameter slot {slot} (n_params = {})",
            genome.n_params
        )));
    }
    parameter_shift(|p| run(genome, p, angles), params, slot)
}

// ---- JSON -------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenomeDoc {
    version: u32,
    n_qubits: usize,
    n_params: usize,
    genes: Vec<GeneDoc>,
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq, Debug)]
enum GeneKind {
    #[serde(rename = "ROT_X")]
    RotX,
    #[serde(rename = "ROT_Y")]
    RotY,
    #[serde(rename = "ROT_Z")]
    RotZ,
    #[serde(rename = "H")]
    Hadamard,
    #[serde(rename = "CNOT")]
    Cnot,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneDoc {
    kind: GeneKind,
    qubit: usize,
    control: Option<usize>,
    param_slot: Option<usize>,
}

impl From<&Gene> for GeneDoc {
    fn from(g: &Gene) -> Self {
        match *g {
            Gene::Rot { axis, qubit, slot } => GeneDoc {
                kind: match axis {
                    Axis::X => GeneKind::RotX,
                    Axis::Y => GeneKind::RotY,
                    Axis::Z => GeneKind::RotZ,
                },
                qubit,
                control: None,
                param_slot: Some(slot),
            },
            Gene::Hadamard { qubit } => GeneDoc {
                kind: GeneKind::Hadamard,
                qubit,
                control: None,
                param_slot: None,
            },
            Gene::Cnot { control, target } => GeneDoc {
                kind: GeneKind::Cnot,
                qubit: target,
                control: Some(control),
                param_slot: None,
            },
        }
    }
}

impl GeneDoc {
    fn into_gene(self, index: usize) -> Result<Gene> {
        let err = |field: &str, message: String| Error::Parse {
            location: format!("genes[{index}].{field}"),
            message,
        };
        let is_rot = matches!(self.kind, GeneKind::RotX | GeneKind::RotY | GeneKind::RotZ);
        match (is_rot, self.param_slot) {
            (true, None) => return Err(err("param_slot", "rotation gene needs a param_slot".into())),
            (false, Some(_)) => {
                return Err(err(
                    "param_slot",
                    format!("{:?} gene cannot carry a param_slot", self.kind),
                ))
            }
            _ => {}
        }
        match (self.kind, self.control) {
            (GeneKind::Cnot, None) => return Err(err("control", "CNOT gene needs a control".into())),
            (k, Some(_)) if k != GeneKind::Cnot => {
                return Err(err("control", format!("{k:?} gene cannot carry a control")))
            }
            _ => {}
        }
        let axis = |axis| Gene::Rot {
            axis,
            qubit: self.qubit,
            slot: self.param_slot.unwrap_or_default(),
        };
        Ok(match self.kind {
            GeneKind::RotX => axis(Axis::X),
            GeneKind::RotY => axis(Axis::Y),
            GeneKind::RotZ => axis(Axis::Z),
            GeneKind::Hadamard => Gene::Hadamard { qubit: self.qubit },
            GeneKind::Cnot => Gene::Cnot {
                control: self.control.unwrap_or_default(),
                target: self.qubit,
            },
        })
    }
}

pub fn serialize_genome(genome: &CircuitGenome) -> String {
    let doc = GenomeDoc {
        version: GENOME_FORMAT_VERSION,
        n_qubits: genome.n_qubits,
        n_params: genome.n_params,
        genes: genome.genes.iter().map(GeneDoc::from).collect(),
    };
    serde_json::to_string(&doc).expect("genome serialization cannot fail")
}

pub fn serialize_genome_pretty(genome: &CircuitGenome) -> String {
    let v: serde_json::Value = serde_json::from_str(&serialize_genome(genome)).expect("valid json");
    serde_json::to_string_pretty(&v).expect("valid json")
}

pub fn deserialize_genome(text: &str) -> Result<CircuitGenome> {
    let doc: GenomeDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    if doc.version != GENOME_FORMAT_VERSION {
        return Err(Error::Parse {
            location: "version".into(),
            message: format!("unsupported genome version {}", doc.version),
        });
    }
    let genes = doc
        .genes
        .into_iter()
        .enumerate()
        .map(|(i, g)| g.into_gene(i))
        .collect::<Result<Vec<_>>>()?;
    CircuitGenome::new(doc.n_qubits, doc.n_params, genes)
}

impl Serialize for CircuitGenome {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: serde_json::Value = serde_json::from_str(&serialize_genome(self)).map_err(serde::ser::Error::custom)?;
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CircuitGenome {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        deserialize_genome(&v.to_string()).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI};

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    use crate::simulator::{dense_unitary_oracle, init_state};

    /// ⟨Z_i⟩ computed from the explicit circuit unitary.
    fn oracle_latent(genome: &CircuitGenome, params: &[f64], angles: &[f64]) -> Vec<f64> {
        let n = genome.n_qubits();
        let ops = gate_sequence(genome, params, angles).unwrap();
        let u = dense_unitary_oracle(&ops, n).unwrap();
        let mut e0 = vec![num_complex::Complex64::new(0.0, 0.0); 1 << n];
        e0[0] = num_complex::Complex64::new(1.0, 0.0);
        let psi = u.apply_to(&e0);
        (0..n)
            .map(|q| {
                psi.iter()
                    .enumerate()
                    .map(|(i, a)| if i >> q & 1 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn initial_genome_layout() {
        let g = build_initial_genome(4, 2).unwrap();
        let c = g.gate_counts();
        assert_eq!((c.rot_y, c.cnot, c.rot_x + c.rot_z + c.hadamard), (8, 6, 0));
        assert_eq!(g.n_params(), 8);
        assert_eq!(g.genes().len(), 14);

        let g = build_initial_genome(2, 1).unwrap();
        assert_eq!(
            g.genes(),
            &[
                Gene::Rot {
                    axis: Axis::Y,
                    qubit: 0,
                    slot: 0
                },
                Gene::Rot {
                    axis: Axis::Y,
                    qubit: 1,
                    slot: 1
                },
                Gene::Cnot { control: 0, target: 1 },
            ]
        );
        assert_eq!(g.n_params(), 2);
        assert_eq!(build_initial_genome(4, 2).unwrap(), build_initial_genome(4, 2).unwrap());
        assert!(build_initial_genome(1, 2).is_err());
        assert!(build_initial_genome(4, 0).is_err());
    }

    #[test]
    fn init_params_deterministic_and_small() {
        let mut a = crate::rng::Rng::seed_from_u64(3);
        let mut b = crate::rng::Rng::seed_from_u64(3);
        let pa = init_params(8, &mut a);
        assert_eq!(pa, init_params(8, &mut b));
        assert!(pa.iter().all(|p| p.abs() <= PARAM_INIT_RANGE));
    }

    #[test]
    fn empty_genome_zero_angles_gives_zero_latent() {
        let g = CircuitGenome::new(4, 0, vec![]).unwrap();
        let z = execute(&g, &[], &[0.0; 4]).unwrap();
        assert_eq!(z.values().len(), 4);
        assert!(z.values().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn single_qubit_feature_map_matches_oracle() {
        let g = CircuitGenome::new(1, 0, vec![]).unwrap();
        let z = execute(&g, &[], &[FRAC_PI_2]).unwrap().0[0];
        let want = oracle_latent(&g, &[], &[FRAC_PI_2])[0];
        assert!((z - want).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&z));
        // H then RY(π/2) maps |0⟩ to |1⟩.
        assert!((z + 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_rotation_sweep_matches_oracle() {
        let g = CircuitGenome::new(
            1,
            1,
            vec![Gene::Rot {
                axis: Axis::Y,
                qubit: 0,
                slot: 0,
            }],
        )
        .unwrap();
        for theta in [0.0, FRAC_PI_4, PI] {
            let z = execute(&g, &[theta], &[0.0]).unwrap().0[0];
            let want = oracle_latent(&g, &[theta], &[0.0])[0];
            assert!((z - want).abs() < 1e-12, "θ = {theta}: {z} vs {want}");
            // H|0⟩ rotated about Y: ⟨Z⟩ = −sin θ.
            assert!((z + theta.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_contract_error() {
        let g = build_initial_genome(2, 1).unwrap();
        assert!(matches!(execute(&g, &[0.0], &[0.0, 0.0]), Err(Error::Contract(_))));
        assert!(matches!(execute(&g, &[0.0, 0.0], &[0.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn shift_rule_on_bare_ry() {
        // RY(θ)|0⟩ without the feature map: ⟨Z⟩ = cos θ.
        let f = |p: &[f64]| -> Result<Vec<f64>> {
            let mut s = init_state(1)?;
            s.apply(&GateOp::RotY(0, p[0]))?;
            Ok(vec![s.expectation_z(0)?])
        };
        let theta = FRAC_PI_3;
        let shift = parameter_shift(f, &[theta], 0).unwrap()[0];
        let h = 1e-5;
        let fd = (f(&[theta + h]).unwrap()[0] - f(&[theta - h]).unwrap()[0]) / (2.0 * h);
        assert!((fd - (-0.866_025_403_784_438_6)).abs() < 1e-9);
        assert!((shift - fd).abs() < 1e-9);
        assert!((shift + FRAC_PI_3.sin()).abs() < 1e-12);
    }

    #[test]
    fn gradient_wrt_missing_slot_is_error() {
        let g = CircuitGenome::new(2, 0, vec![]).unwrap();
        assert!(matches!(
            param_shift_slot(&g, &[], &[0.1, 0.2], 0),
            Err(Error::Contract(_))
        ));
        assert!(parameter_shift(|p: &[f64]| Ok(p.to_vec()), &[1.0], 1).is_err());
    }

    #[test]
    fn slot_gradient_matches_full_jacobian() {
        let g = build_initial_genome(3, 2).unwrap();
        let params: Vec<f64> = (0..6).map(|i| 0.3 * i as f64 - 0.7).collect();
        let angles = [0.4, -1.1, 2.0];
        let full = param_shift_grads(&g, &params, &angles).unwrap();
        let col = param_shift_slot(&g, &params, &angles, 4).unwrap();
        for (q, v) in col.iter().enumerate() {
            assert_eq!(*v, full.params.get(q, 4));
        }
    }

    #[test]
    fn json_schema_fields() {
        let g = build_initial_genome(2, 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&serialize_genome(&g)).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["n_qubits"], 2);
        assert_eq!(v["n_params"], 2);
        assert_eq!(v["genes"][0]["kind"], "ROT_Y");
        assert_eq!(v["genes"][0]["control"], serde_json::Value::Null);
        assert_eq!(v["genes"][2]["kind"], "CNOT");
        assert_eq!(v["genes"][2]["qubit"], 1);
        assert_eq!(v["genes"][2]["control"], 0);
        assert_eq!(v["genes"][2]["param_slot"], serde_json::Value::Null);
    }

    #[test]
    fn json_rejections() {
        let cases = [
            // control == target
            (
                r#"{"version":1,"n_qubits":2,"n_params":0,"genes":[{"kind":"CNOT","qubit":1,"control":1,"param_slot":null}]}"#,
                "genes[0].control",
            ),
            // duplicate slot
            (
                r#"{"version":1,"n_qubits":2,"n_params":1,"genes":[{"kind":"ROT_Y","qubit":0,"control":null,"param_slot":0},{"kind":"ROT_X","qubit":1,"control":null,"param_slot":0}]}"#,
                "genes[1].param_slot",
            ),
            // unknown kind
            (
                r#"{"version":1,"n_qubits":2,"n_params":0,"genes":[{"kind":"SWAP","qubit":1,"control":null,"param_slot":null}]}"#,
                "line 1",
            ),
            // missing slot
            (
                r#"{"version":1,"n_qubits":2,"n_params":2,"genes":[{"kind":"ROT_Y","qubit":0,"control":null,"param_slot":0}]}"#,
                "genes",
            ),
            // qubit out of range
            (
                r#"{"version":1,"n_qubits":2,"n_params":0,"genes":[{"kind":"H","qubit":2,"control":null,"param_slot":null}]}"#,
                "genes[0].qubit",
            ),
            // unknown field
            (
                r#"{"version":1,"n_qubits":2,"n_params":0,"genes":[],"extra":3}"#,
                "line 1",
            ),
            (r#"{"version":2,"n_qubits":2,"n_params":0,"genes":[]}"#, "version"),
        ];
        for (text, loc) in cases {
            match deserialize_genome(text) {
                Err(Error::Parse { location, .. }) => {
                    assert!(location.starts_with(loc), "{text}: location {location}")
                }
                other => panic!("{text}: expected parse error, got {other:?}"),
            }
        }
    }

    pub(crate) fn arb_genome() -> impl Strategy<Value = CircuitGenome> {
        (2usize..=4).prop_flat_map(|n| {
            let gene = prop_oneof![
                (0..3usize, 0..n).prop_map(|(a, q)| (Some(Axis::ALL[a]), q, 0)),
                (0..n).prop_map(|q| (None, q, usize::MAX)),
                (0..n, 1..n).prop_map(move |(c, off)| (None, (c + off) % n, c)),
            ];
            (Just(n), proptest::collection::vec(gene, 0..=16)).prop_map(|(n, raw)| {
                let mut slot = 0;
                let genes = raw
                    .into_iter()
                    .map(|(axis, q, c)| match axis {
                        Some(axis) => {
                            slot += 1;
                            Gene::Rot {
                                axis,
                                qubit: q,
                                slot: slot - 1,
                            }
                        }
                        None if c == usize::MAX => Gene::Hadamard { qubit: q },
                        None => Gene::Cnot { control: c, target: q },
                    })
                    .collect();
                CircuitGenome::new(n, slot, genes).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn execute_bounded_and_deterministic(
            (g, seed) in (arb_genome(), any::<u64>())
        ) {
            let mut rng = crate::rng::Rng::seed_from_u64(seed);
            let params: Vec<f64> = (0..g.n_params()).map(|_| rng.random_range(-PI..PI)).collect();
            let angles: Vec<f64> = (0..g.n_qubits()).map(|_| rng.random_range(-PI..PI)).collect();
            let a = execute(&g, &params, &angles).unwrap();
            let b = execute(&g, &params, &angles).unwrap();
            prop_assert_eq!(a.values().len(), g.n_qubits());
            prop_assert!(a.values().iter().all(|v| (-1.0..=1.0).contains(v)));
            prop_assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
            let oracle = oracle_latent(&g, &params, &angles);
            prop_assert!(a.values().iter().zip(&oracle).all(|(x, y)| (x - y).abs() < 1e-10));
        }

        #[test]
        fn genome_json_round_trip(g in arb_genome()) {
            let back = deserialize_genome(&serialize_genome(&g)).unwrap();
            prop_assert_eq!(back, g);
        }

        #[test]
        fn fuzzed_json_never_yields_invalid_genome(
            g in arb_genome(),
            edits in proptest::collection::vec((any::<prop::sample::Index>(), 0i64..6), 1..4)
        ) {
            // Perturb numeric fields of a valid document and re-parse.
            let mut v: serde_json::Value = serde_json::from_str(&serialize_genome(&g)).unwrap();
            let n_genes = g.genes().len();
            for (idx, val) in edits {
                let field = ["qubit", "control", "param_slot", "n_qubits", "n_params"][idx.index(5)];
                if field.starts_with("n_") {
                    v[field] = val.into();
                } else if n_genes > 0 {
                    v["genes"][idx.index(n_genes)][field] = val.into();
                }
            }
            if let Ok(parsed) = deserialize_genome(&v.to_string()) {
                prop_assert!(CircuitGenome::new(parsed.n_qubits(), parsed.n_params(), parsed.genes().to_vec()).is_ok());
                for gene in parsed.genes() {
                    match *gene {
                        Gene::Cnot { control, target } => prop_assert!(control != target),
                        Gene::Rot { qubit, slot, .. } => prop_assert!(qubit < parsed.n_qubits() && slot < parsed.n_params()),
                        Gene::Hadamard { qubit } => prop_assert!(qubit < parsed.n_qubits()),
                    }
                }
            }
        }
    }
}
