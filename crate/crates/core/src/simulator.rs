//! Exact complex statevector simulation.
//!
//! Qubit ordering is little-endian: qubit `q` corresponds to bit `q` of the
//! amplitude index. Rotations follow `R_k(θ) = exp(-iθσ_k/2)`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 12;
pub const MAX_ORACLE_QUBITS: usize = 6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Gate applied by the simulator. Angles are in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateOp {
    Hadamard(usize),
    RotX(usize, f64),
    RotY(usize, f64),
    RotZ(usize, f64),
    Cnot { control: usize, target: usize },
}

impl GateOp {
    fn check(&self, n_qubits: usize) -> Result<()> {
        let in_range = |q: usize| {
            if q < n_qubits {
                Ok(())
            } else {
                Err(Error::Simulation(format!(
                    "qubit index {q} out of range for {n_qubits} qubits in {self}"
                )))
            }
        };
        match *self {
            GateOp::Hadamard(q) => in_range(q),
            GateOp::RotX(q, a) | GateOp::RotY(q, a) | GateOp::RotZ(q, a) => {
                in_range(q)?;
                if a.is_nan() {
                    return Err(Error::Simulation(format!("NaN angle in {self}")));
                }
                Ok(())
            }
            GateOp::Cnot { control, target } => {
                in_range(control)?;
                in_range(target)?;
                if control == target {
                    return Err(Error::Simulation(format!(
                        "CNOT control and target are both qubit {control}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// 2x2 matrix `[[a, b], [c, d]]` of a single-qubit gate, `None` for CNOT.
    fn single_qubit_matrix(&self) -> Option<(usize, [Complex64; 4])> {
        let half = |a: f64| ((a / 2.0).cos(), (a / 2.0).sin());
        match *self {
            GateOp::Hadamard(q) => {
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                Some((q, [h, h, h, -h]))
            }
            GateOp::RotX(q, a) => {
                let (c, s) = half(a);
                let c = Complex64::new(c, 0.0);
                let mis = Complex64::new(0.0, -s);
                Some((q, [c, mis, mis, c]))
            }
            GateOp::RotY(q, a) => {
                let (c, s) = half(a);
                Some((
                    q,
                    [
                        Complex64::new(c, 0.0),
                        Complex64::new(-s, 0.0),
                        Complex64::new(s, 0.0),
                        Complex64::new(c, 0.0),
                    ],
                ))
            }
            GateOp::RotZ(q, a) => {
                let (c, s) = half(a);
                Some((q, [Complex64::new(c, -s), ZERO, ZERO, Complex64::new(c, s)]))
            }
            GateOp::Cnot { .. } => None,
        }
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateOp::Hadamard(q) => write!(f, "H({q})"),
            GateOp::RotX(q, a) => write!(f, "RX({q}, {a})"),
            GateOp::RotY(q, a) => write!(f, "RY({q}, {a})"),
            GateOp::RotZ(q, a) => write!(f, "RZ({q}, {a})"),
            GateOp::Cnot { control, target } => write!(f, "CNOT({control}->{target})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0⟩` on `n_qubits` qubits.
    pub fn new(n_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::Config(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Ok(StateVector { n_qubits, amps })
    }

    /// Wrap explicit amplitudes. The length must be a power of two; no
    /// normalisation is performed.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() || len > (1 << MAX_QUBITS) {
            return Err(Error::Config(format!(
                "amplitude count {len} is not 2^n for n in 1..={MAX_QUBITS}"
            )));
        }
        Ok(StateVector {
            n_qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Multiply the state in place by the gate's unitary.
    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.check(self.n_qubits)?;
        match gate.single_qubit_matrix() {
            Some((q, m)) => self.apply_single(q, &m),
            None => {
                let GateOp::Cnot { control, target } = *gate else {
                    unreachable!()
                };
                self.apply_cnot(control, target);
            }
        }
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a GateOp>) -> Result<()> {
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }

    fn apply_single(&mut self, q: usize, m: &[Complex64; 4]) {
        let stride = 1usize << q;
        // Iterate over blocks of 2*stride; within a block the first half has
        // bit q clear and pairs with the element `stride` further on.
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x0, x1) = (*a0, *a1);
                *a0 = m[0] * x0 + m[1] * x1;
                *a1 = m[2] * x0 + m[3] * x1;
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amps.swap(i, i | tmask);
            }
        }
    }

    /// `⟨Z_qubit⟩`, the Pauli-Z expectation on one qubit.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::Simulation(format!(
                "qubit {qubit} out of range for {} qubits",
                self.n_qubits
            )));
        }
        let mask = 1usize << qubit;
        let e: f64 = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum();
        Ok(e.clamp(-1.0, 1.0))
    }

    /// `⟨Z_i⟩` for every qubit, computed in a single sweep.
    pub fn expectation_z_all(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_qubits];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, o) in out.iter_mut().enumerate() {
                if i >> q & 1 == 0 {
                    *o += p;
                } else {
                    *o -= p;
                }
            }
        }
        for o in &mut out {
            *o = o.clamp(-1.0, 1.0);
        }
        out
    }
}

/// Convenience wrapper for `StateVector::new`.
pub fn init_state(n_qubits: usize) -> Result<StateVector> {
    StateVector::new(n_qubits)
}

/// Row-major dense complex matrix. Only used as an independent oracle for the
/// in-place simulator; its gates are built from Pauli matrices, not from the
/// simulator's gate table.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = ONE;
        }
        DenseMatrix { dim, data }
    }

    fn from_2x2(m: [Complex64; 4]) -> Self {
        DenseMatrix {
            dim: 2,
            data: m.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn mul(&self, rhs: &DenseMatrix) -> DenseMatrix {
        let n = self.dim;
        let mut data = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        DenseMatrix { dim: n, data }
    }

    pub fn scale(&self, factor: Complex64) -> DenseMatrix {
        DenseMatrix {
            dim: self.dim,
            data: self.data.iter().map(|a| a * factor).collect(),
        }
    }

    pub fn add(&self, rhs: &DenseMatrix) -> DenseMatrix {
        DenseMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &DenseMatrix) -> DenseMatrix {
        let (n, m) = (self.dim, rhs.dim);
        let dim = n * m;
        let mut data = vec![ZERO; dim * dim];
        for i in 0..n {
            for j in 0..n {
                let a = self.data[i * n + j];
                for k in 0..m {
                    for l in 0..m {
                        data[(i * m + k) * dim + (j * m + l)] = a * rhs.data[k * m + l];
                    }
                }
            }
        }
        DenseMatrix { dim, data }
    }

    pub fn adjoint(&self) -> DenseMatrix {
        let n = self.dim;
        let mut data = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        DenseMatrix { dim: n, data }
    }

    pub fn apply_to(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim;
        (0..n)
            .map(|i| (0..n).map(|j| self.data[i * n + j] * v[j]).sum())
            .collect()
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Embed a 2x2 operator on `qubit` of an `n`-qubit register:
/// `I_{high} ⊗ op ⊗ I_{low}` with qubit 0 the least significant factor.
fn embed(op: &DenseMatrix, qubit: usize, n: usize) -> DenseMatrix {
    let high = DenseMatrix::identity(1 << (n - qubit - 1));
    let low = DenseMatrix::identity(1 << qubit);
    high.kron(op).kron(&low)
}

fn pauli_x() -> DenseMatrix {
    DenseMatrix::from_2x2([ZERO, ONE, ONE, ZERO])
}

fn pauli_y() -> DenseMatrix {
    let i = Complex64::new(0.0, 1.0);
    DenseMatrix::from_2x2([ZERO, -i, i, ZERO])
}

fn pauli_z() -> DenseMatrix {
    DenseMatrix::from_2x2([ONE, ZERO, ZERO, -ONE])
}

/// `exp(−iθσ/2) = cos(θ/2) I − i sin(θ/2) σ` for a Pauli matrix `σ`.
fn pauli_rotation(sigma: &DenseMatrix, theta: f64) -> DenseMatrix {
    let c = Complex64::new((theta / 2.0).cos(), 0.0);
    let mis = Complex64::new(0.0, -(theta / 2.0).sin());
    DenseMatrix::identity(2).scale(c).add(&sigma.scale(mis))
}

/// Explicit `2^n × 2^n` unitary of a gate sequence (first gate applied first).
pub fn dense_unitary_oracle(gates: &[GateOp], n_qubits: usize) -> Result<DenseMatrix> {
    if n_qubits == 0 || n_qubits > MAX_ORACLE_QUBITS {
        return Err(Error::Config(format!(
            "dense oracle supports 1..={MAX_ORACLE_QUBITS} qubits, got {n_qubits}"
        )));
    }
    let mut u = DenseMatrix::identity(1 << n_qubits);
    for g in gates {
        g.check(n_qubits)?;
        let full = match *g {
            GateOp::Hadamard(q) => embed(&pauli_x().add(&pauli_z()).scale(ONE / 2f64.sqrt()), q, n_qubits),
            GateOp::RotX(q, a) => embed(&pauli_rotation(&pauli_x(), a), q, n_qubits),
            GateOp::RotY(q, a) => embed(&pauli_rotation(&pauli_y(), a), q, n_qubits),
            GateOp::RotZ(q, a) => embed(&pauli_rotation(&pauli_z(), a), q, n_qubits),
            GateOp::Cnot { control, target } => {
                // |0⟩⟨0|_c ⊗ I + |1⟩⟨1|_c ⊗ X_t
                let id = DenseMatrix::identity(2);
                let p0 = id.add(&pauli_z()).scale(Complex64::new(0.5, 0.0));
                let p1 = id.add(&pauli_z().scale(-ONE)).scale(Complex64::new(0.5, 0.0));
                let off = embed(&p1, control, n_qubits).mul(&embed(&pauli_x(), target, n_qubits));
                embed(&p0, control, n_qubits).add(&off)
            }
        };
        u = full.mul(&u);
    }
    Ok(u)
}
