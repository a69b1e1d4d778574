//! The hybrid autoencoder `decoder ∘ circuit ∘ encoder`.
//!
//! Encoder: `input → hidden (rectifier) → n_qubits (identity)`; the encoder
//! output `u` becomes encoding angles `angle_scale · tanh(u)`. The circuit's
//! Z-expectations form the latent vector, which the decoder maps back through
//! `n_qubits → hidden (rectifier) → input (sigmoid)`.

use std::f64::consts::PI;

use rand::Rng;

use super::dense::{Activation, DenseLayer, LayerGrads};
use crate::circuit::{self, CircuitGenome};
use crate::error::{Error, Result};

pub const IMAGE_DIM: usize = 784;
pub const DEFAULT_HIDDEN: usize = 64;
pub const N_TENSORS: usize = 9;

/// Parameter tensor names, in the order used by `tensors()` / `tensors_mut()`.
pub const TENSOR_NAMES: [&str; N_TENSORS] = [
    "encoder.0.weights",
    "encoder.0.biases",
    "encoder.1.weights",
    "encoder.1.biases",
    "q_params",
    "decoder.0.weights",
    "decoder.0.biases",
    "decoder.1.weights",
    "decoder.1.biases",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub input_dim: usize,
    pub hidden: usize,
    pub n_qubits: usize,
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape {
            input_dim: IMAGE_DIM,
            hidden: DEFAULT_HIDDEN,
            n_qubits: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridAutoencoder {
    encoder: [DenseLayer; 2],
    angle_scale: f64,
    genome: CircuitGenome,
    q_params: Vec<f64>,
    decoder: [DenseLayer; 2],
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    pub hidden_enc: Vec<f64>,
    pub pre_angles: Vec<f64>,
    pub angles: Vec<f64>,
    pub latent: Vec<f64>,
    pub hidden_dec: Vec<f64>,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub encoder: [LayerGrads; 2],
    pub q_params: Vec<f64>,
    pub decoder: [LayerGrads; 2],
}

impl ModelGrads {
    pub fn tensors(&self) -> [&[f64]; N_TENSORS] {
        [
            &self.encoder[0].weights,
            &self.encoder[0].biases,
            &self.encoder[1].weights,
            &self.encoder[1].biases,
            &self.q_params,
            &self.decoder[0].weights,
            &self.decoder[0].biases,
            &self.decoder[1].weights,
            &self.decoder[1].biases,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; N_TENSORS] {
        let [e0, e1] = &mut self.encoder;
        let [d0, d1] = &mut self.decoder;
        [
            &mut e0.weights,
            &mut e0.biases,
            &mut e1.weights,
            &mut e1.biases,
            &mut self.q_params,
            &mut d0.weights,
            &mut d0.biases,
            &mut d1.weights,
            &mut d1.biases,
        ]
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &ModelGrads) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

/// Squared L2 reconstruction error of one sample.
pub fn sample_loss(recon: &[f64], original: &[f64]) -> f64 {
    recon.iter().zip(original).map(|(r, x)| (r - x) * (r - x)).sum()
}

/// Mean over the batch of per-sample squared L2 reconstruction errors.
pub fn mse_loss<A: AsRef<[f64]>, B: AsRef<[f64]>>(recons: &[A], originals: &[B]) -> Result<f64> {
    if recons.is_empty() {
        return Err(Error::contract("mse_loss needs a non-empty batch"));
    }
    if recons.len() != originals.len() {
        return Err(Error::contract(format!(
            "batch sizes differ: {} reconstructions vs {} originals",
            recons.len(),
            originals.len()
        )));
    }
    let mut total = 0.0;
    for (r, x) in recons.iter().zip(originals) {
        let (r, x) = (r.as_ref(), x.as_ref());
        if r.len() != x.len() {
            return Err(Error::contract(format!(
                "sample lengths differ: {} vs {}",
                r.len(),
                x.len()
            )));
        }
        total += sample_loss(r, x);
    }
    Ok(total / recons.len() as f64)
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            context: String::new(),
            message: format!("non-finite {what}"),
        })
    }
}

impl HybridAutoencoder {
    /// Fresh model: Glorot-uniform classical weights, zero biases,
    /// angle scale π, the given circuit and its parameters.
    pub fn new<R: Rng + ?Sized>(
        shape: ModelShape,
        genome: CircuitGenome,
        q_params: Vec<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        let ModelShape {
            input_dim,
            hidden,
            n_qubits,
        } = shape;
        let encoder = [
            DenseLayer::glorot(input_dim, hidden, Activation::Rectifier, rng),
            DenseLayer::glorot(hidden, n_qubits, Activation::Identity, rng),
        ];
        let decoder = [
            DenseLayer::glorot(n_qubits, hidden, Activation::Rectifier, rng),
            DenseLayer::glorot(hidden, input_dim, Activation::Sigmoid, rng),
        ];
        HybridAutoencoder::from_parts(encoder, PI, genome, q_params, decoder)
    }

    pub fn from_parts(
        encoder: [DenseLayer; 2],
        angle_scale: f64,
        genome: CircuitGenome,
        q_params: Vec<f64>,
        decoder: [DenseLayer; 2],
    ) -> Result<Self> {
        let nq = genome.n_qubits();
        let chain_ok = encoder[0].out_dim() == encoder[1].in_dim()
            && encoder[1].out_dim() == nq
            && decoder[0].in_dim() == nq
            && decoder[0].out_dim() == decoder[1].in_dim()
            && decoder[1].out_dim() == encoder[0].in_dim();
        if !chain_ok {
            return Err(Error::contract(format!(
                "layer dimensions do not chain: {}->{}->{} | {nq} qubits | {}->{}->{}",
                encoder[0].in_dim(),
                encoder[0].out_dim(),
                encoder[1].out_dim(),
                decoder[0].in_dim(),
                decoder[0].out_dim(),
                decoder[1].out_dim()
            )));
        }
        if decoder[1].activation() != Activation::Sigmoid {
            return Err(Error::contract("decoder output layer must use the sigmoid activation"));
        }
        if q_params.len() != genome.n_params() {
            return Err(Error::contract(format!(
                "genome needs {} parameters, got {}",
                genome.n_params(),
                q_params.len()
            )));
        }
        if !angle_scale.is_finite() || q_params.iter().any(|p| !p.is_finite()) {
            return Err(Error::contract("circuit parameters must be finite"));
        }
        Ok(HybridAutoencoder {
            encoder,
            angle_scale,
            genome,
            q_params,
            decoder,
        })
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            input_dim: self.encoder[0].in_dim(),
            hidden: self.encoder[0].out_dim(),
            n_qubits: self.genome.n_qubits(),
        }
    }

    pub fn encoder(&self) -> &[DenseLayer; 2] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[DenseLayer; 2] {
        &self.decoder
    }

    pub fn angle_scale(&self) -> f64 {
        self.angle_scale
    }

    pub fn genome(&self) -> &CircuitGenome {
        &self.genome
    }

    pub fn q_params(&self) -> &[f64] {
        &self.q_params
    }

    /// Swap in a new circuit (same parameter count as its parameter vector).
    pub fn set_circuit(&mut self, genome: CircuitGenome, q_params: Vec<f64>) -> Result<()> {
        if genome.n_qubits() != self.genome.n_qubits() || q_params.len() != genome.n_params() {
            return Err(Error::contract("replacement circuit does not fit the model"));
        }
        self.genome = genome;
        self.q_params = q_params;
        Ok(())
    }

    pub fn tensor_lens(&self) -> [usize; N_TENSORS] {
        self.tensors().map(<[f64]>::len)
    }

    pub fn tensors(&self) -> [&[f64]; N_TENSORS] {
        let [e0, e1] = &self.encoder;
        let [d0, d1] = &self.decoder;
        [
            e0.weights(),
            e0.biases(),
            e1.weights(),
            e1.biases(),
            &self.q_params,
            d0.weights(),
            d0.biases(),
            d1.weights(),
            d1.biases(),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; N_TENSORS] {
        let [e0, e1] = &mut self.encoder;
        let [d0, d1] = &mut self.decoder;
        let (e0w, e0b) = e0.params_mut();
        let (e1w, e1b) = e1.params_mut();
        let (d0w, d0b) = d0.params_mut();
        let (d1w, d1b) = d1.params_mut();
        [e0w, e0b, e1w, e1b, &mut self.q_params, d0w, d0b, d1w, d1b]
    }

    pub fn zero_grads(&self) -> ModelGrads {
        ModelGrads {
            encoder: [
                LayerGrads::zeros_like(&self.encoder[0]),
                LayerGrads::zeros_like(&self.encoder[1]),
            ],
            q_params: vec![0.0; self.q_params.len()],
            decoder: [
                LayerGrads::zeros_like(&self.decoder[0]),
                LayerGrads::zeros_like(&self.decoder[1]),
            ],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if x.len() != self.encoder[0].in_dim() {
            return Err(Error::contract(format!(
                "input has {} values, model expects {}",
                x.len(),
                self.encoder[0].in_dim()
            )));
        }
        let hidden_enc = self.encoder[0].forward(x);
        let pre_angles = self.encoder[1].forward(&hidden_enc);
        check_finite(&pre_angles, "encoder output")?;
        let angles: Vec<f64> = pre_angles.iter().map(|u| self.angle_scale * u.tanh()).collect();
        let latent = circuit::execute(&self.genome, &self.q_params, &angles)?.0;
        let hidden_dec = self.decoder[0].forward(&latent);
        let output = self.decoder[1].forward(&hidden_dec);
        check_finite(&output, "reconstruction")?;
        let cache = ForwardCache {
            input: x.to_vec(),
            hidden_enc,
            pre_angles,
            angles,
            latent,
            hidden_dec,
            output: output.clone(),
        };
        Ok((output, cache))
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x).map(|(r, _)| r)
    }

    fn check_cache(&self, cache: &ForwardCache, target: &[f64]) -> Result<()> {
        let s = self.shape();
        let ok = cache.input.len() == s.input_dim
            && cache.hidden_enc.len() == s.hidden
            && cache.pre_angles.len() == s.n_qubits
            && cache.angles.len() == s.n_qubits
            && cache.latent.len() == s.n_qubits
            && cache.hidden_dec.len() == self.decoder[0].out_dim()
            && cache.output.len() == s.input_dim
            && target.len() == s.input_dim;
        if ok {
            Ok(())
        } else {
            Err(Error::contract("forward cache does not match this model"))
        }
    }

    /// Accumulate `weight · ∇ ‖output − target‖²` into `grads`.
    ///
    /// The quantum segment is differentiated with the parameter-shift rule,
    /// both for the ansatz parameters and for the encoding angles, so the
    /// gradient reaches the classical encoder.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        target: &[f64],
        weight: f64,
        grads: &mut ModelGrads,
    ) -> Result<()> {
        self.check_cache(cache, target)?;
        let d_out: Vec<f64> = cache
            .output
            .iter()
            .zip(target)
            .map(|(r, x)| 2.0 * weight * (r - x))
            .collect();
        let d_hidden_dec = self.decoder[1]
            .backward(&cache.hidden_dec, &cache.output, &d_out, &mut grads.decoder[1], true)
            .expect("input grad requested");
        let d_latent = self.decoder[0]
            .backward(
                &cache.latent,
                &cache.hidden_dec,
                &d_hidden_dec,
                &mut grads.decoder[0],
                true,
            )
            .expect("input grad requested");

        let jac = circuit::param_shift_grads(&self.genome, &self.q_params, &cache.angles)?;
        for (g, d) in grads.q_params.iter_mut().zip(jac.params.transpose_mul(&d_latent)) {
            *g += d;
        }
        let d_angles = jac.angles.transpose_mul(&d_latent);
        let d_pre: Vec<f64> = d_angles
            .iter()
            .zip(&cache.pre_angles)
            .map(|(d, u)| {
                let t = u.tanh();
                d * self.angle_scale * (1.0 - t * t)
            })
            .collect();

        let d_hidden_enc = self.encoder[1]
            .backward(
                &cache.hidden_enc,
                &cache.pre_angles,
                &d_pre,
                &mut grads.encoder[1],
                true,
            )
            .expect("input grad requested");
        self.encoder[0].backward(
            &cache.input,
            &cache.hidden_enc,
            &d_hidden_enc,
            &mut grads.encoder[0],
            false,
        );
        Ok(())
    }

    /// Gradient of the single-sample loss `‖output − target‖²`.
    pub fn backward(&self, cache: &ForwardCache, target: &[f64]) -> Result<ModelGrads> {
        let mut grads = self.zero_grads();
        self.backward_into(cache, target, 1.0, &mut grads)?;
        Ok(grads)
    }

    /// Mean loss over a batch of autoencoding samples and its gradient.
    pub fn batch_gradients<A: AsRef<[f64]>>(&self, batch: &[A]) -> Result<(f64, ModelGrads)> {
        if batch.is_empty() {
            return Err(Error::contract("empty batch"));
        }
        let w = 1.0 / batch.len() as f64;
        let mut grads = self.zero_grads();
        let mut loss = 0.0;
        for x in batch {
            let x = x.as_ref();
            let (out, cache) = self.forward(x)?;
            loss += sample_loss(&out, x);
            self.backward_into(&cache, x, w, &mut grads)?;
        }
        Ok((loss * w, grads))
    }

    /// Mean reconstruction loss over a set of samples.
    pub fn evaluate<A: AsRef<[f64]>>(&self, samples: &[A]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::contract("cannot evaluate on an empty set"));
        }
        let mut total = 0.0;
        for x in samples {
            let x = x.as_ref();
            total += sample_loss(&self.reconstruct(x)?, x);
        }
        Ok(total / samples.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    use crate::circuit::build_initial_genome;
    use crate::rng::Rng;

    fn zero_model(shape: ModelShape) -> HybridAutoencoder {
        let genome = build_initial_genome(shape.n_qubits, 1).unwrap();
        let n = genome.n_params();
        HybridAutoencoder::from_parts(
            [
                DenseLayer::zeros(shape.input_dim, shape.hidden, Activation::Rectifier),
                DenseLayer::zeros(shape.hidden, shape.n_qubits, Activation::Identity),
            ],
            PI,
            genome,
            vec![0.0; n],
            [
                DenseLayer::zeros(shape.n_qubits, shape.hidden, Activation::Rectifier),
                DenseLayer::zeros(shape.hidden, shape.input_dim, Activation::Sigmoid),
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_model_outputs_half() {
        let m = zero_model(ModelShape::default());
        let x: Vec<f64> = (0..IMAGE_DIM).map(|i| (i % 7) as f64 / 7.0).collect();
        let (out, cache) = m.forward(&x).unwrap();
        assert!(cache.angles.iter().all(|a| *a == 0.0));
        assert!(cache.latent.iter().all(|z| z.abs() < 1e-15));
        assert!(out.iter().all(|o| *o == 0.5));
    }

    #[test]
    fn forward_range_and_purity() {
        let mut rng = Rng::seed_from_u64(5);
        let genome = build_initial_genome(4, 2).unwrap();
        let q = crate::circuit::init_params(8, &mut rng);
        let m = HybridAutoencoder::new(ModelShape::default(), genome, q, &mut rng).unwrap();
        let x: Vec<f64> = (0..IMAGE_DIM).map(|i| ((i * 37) % 256) as f64 / 255.0).collect();
        let a = m.reconstruct(&x).unwrap();
        let b = m.reconstruct(&x).unwrap();
        assert_eq!(a.len(), IMAGE_DIM);
        assert!(a.iter().all(|v| *v > 0.0 && *v < 1.0));
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn mse_examples() {
        let x = vec![vec![1.0, 1.0, 0.0, 0.0]];
        let zero = vec![vec![0.0; 4]];
        assert_eq!(mse_loss(&x, &x).unwrap(), 0.0);
        assert_eq!(mse_loss(&zero, &x).unwrap(), 2.0);
        let r = vec![vec![0.5, 0.0], vec![1.0, 1.0]];
        let o = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let mean = (mse_loss(&r[..1], &o[..1]).unwrap() + mse_loss(&r[1..], &o[1..]).unwrap()) / 2.0;
        assert_eq!(mse_loss(&r, &o).unwrap(), mean);
        let empty: Vec<Vec<f64>> = vec![];
        assert!(matches!(mse_loss(&empty, &empty), Err(Error::Contract(_))));
        assert!(mse_loss(&r, &o[..1]).is_err());
    }

    #[test]
    fn perfect_reconstruction_has_zero_gradient() {
        let mut rng = Rng::seed_from_u64(9);
        let shape = ModelShape {
            input_dim: 8,
            hidden: 6,
            n_qubits: 2,
        };
        let genome = build_initial_genome(2, 1).unwrap();
        let q = crate::circuit::init_params(2, &mut rng);
        let m = HybridAutoencoder::new(shape, genome, q, &mut rng).unwrap();
        let x = [0.1, 0.9, 0.3, 0.0, 1.0, 0.5, 0.2, 0.7];
        let (out, cache) = m.forward(&x).unwrap();
        let g = m.backward(&cache, &out).unwrap();
        assert!(g.tensors().iter().all(|t| t.iter().all(|v| v.abs() < 1e-9)));
    }

    #[test]
    fn cache_mismatch_is_contract_error() {
        let m = zero_model(ModelShape {
            input_dim: 8,
            hidden: 6,
            n_qubits: 2,
        });
        let other = zero_model(ModelShape {
            input_dim: 8,
            hidden: 5,
            n_qubits: 2,
        });
        let (_, cache) = other.forward(&[0.0; 8]).unwrap();
        assert!(matches!(m.backward(&cache, &[0.0; 8]), Err(Error::Contract(_))));
        assert!(matches!(m.forward(&[0.0; 7]), Err(Error::Contract(_))));
    }

    #[test]
    fn tensor_order_matches_names() {
        let mut m = zero_model(ModelShape {
            input_dim: 8,
            hidden: 6,
            n_qubits: 2,
        });
        assert_eq!(m.tensor_lens(), [48, 6, 12, 2, 2, 12, 6, 48, 8]);
        m.tensors_mut()[4][1] = 0.25;
        assert_eq!(m.q_params(), &[0.0, 0.25]);
        assert_eq!(m.zero_grads().tensors().map(<[f64]>::len), m.tensor_lens());
    }
}
