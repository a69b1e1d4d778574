#![allow(dead_code)]

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use flate2::write::GzEncoder;
use flate2::Compression;
use rand::{Rng, SeedableRng};

use qnas::circuit::{Axis, CircuitGenome, Gene};
use qnas::data::encode_idx_images;
use qnas::nn::HybridAutoencoder;
use qnas::simulator::GateOp;

pub type TestRng = rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    TestRng::seed_from_u64(seed)
}

fn distinct_pair(rng: &mut TestRng, n: usize) -> (usize, usize) {
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

/// Uniformly mixed gate list over `n` qubits (CNOTs only when `n ≥ 2`).
pub fn random_gates(rng: &mut TestRng, n: usize, count: usize) -> Vec<GateOp> {
    (0..count)
        .map(|_| {
            let q = rng.random_range(0..n);
            let a = rng.random_range(-2.0 * PI..2.0 * PI);
            match rng.random_range(0..if n > 1 { 5 } else { 4 }) {
                0 => GateOp::Hadamard(q),
                1 => GateOp::RotX(q, a),
                2 => GateOp::RotY(q, a),
                3 => GateOp::RotZ(q, a),
                _ => {
                    let (control, target) = distinct_pair(rng, n);
                    GateOp::Cnot { control, target }
                }
            }
        })
        .collect()
}

/// Random genome with `n_rot` rotation genes (slots `0..n_rot`, shuffled
/// positions) mixed with `n_fixed` H/CNOT genes.
pub fn random_genome(rng: &mut TestRng, n: usize, n_rot: usize, n_fixed: usize) -> CircuitGenome {
    let mut genes: Vec<Gene> = (0..n_rot)
        .map(|slot| Gene::Rot {
            axis: Axis::ALL[rng.random_range(0..3)],
            qubit: rng.random_range(0..n),
            slot,
        })
        .collect();
    for _ in 0..n_fixed {
        let g = if n < 2 || rng.random_bool(0.5) {
            Gene::Hadamard {
                qubit: rng.random_range(0..n),
            }
        } else {
            let (control, target) = distinct_pair(rng, n);
            Gene::Cnot { control, target }
        };
        let pos = rng.random_range(0..=genes.len());
        genes.insert(pos, g);
    }
    CircuitGenome::new(n, n_rot, genes).expect("valid random genome")
}

/// `|a − b| ≤ rel · max(|a|, |b|, floor)`
pub fn rel_close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(floor)
}

/// Central finite differences of the mean batch loss w.r.t. every model
/// parameter, compared against the analytic batch gradient. Returns the
/// worst relative error and the number of parameters checked.
pub fn model_gradient_check(model: &HybridAutoencoder, batch: &[Vec<f64>], h: f64, floor: f64) -> (f64, usize) {
    let (_, grads) = model.batch_gradients(batch).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (t, g_t) in analytic.iter().enumerate() {
        for (i, &g) in g_t.iter().enumerate() {
            let mut m = model.clone();
            let base = m.tensors()[t][i];
            m.tensors_mut()[t][i] = base + h;
            let plus = m.evaluate(batch).unwrap();
            m.tensors_mut()[t][i] = base - h;
            let minus = m.evaluate(batch).unwrap();
            let fd = (plus - minus) / (2.0 * h);
            let err = (g - fd).abs() / g.abs().max(fd.abs()).max(floor);
            worst = worst.max(err);
            count += 1;
        }
    }
    (worst, count)
}

/// Simple structured 28×28 images: one of four bright quadrants plus noise.
pub fn synthetic_images(n: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let k = r.random_range(0..4);
            (0..784)
                .map(|p| {
                    let (row, col) = (p / 28, p % 28);
                    let quadrant = (row / 14) * 2 + col / 14;
                    if quadrant == k {
                        r.random_range(180..=255)
                    } else {
                        r.random_range(0..30)
                    }
                })
                .collect()
        })
        .collect()
}

pub fn write_idx_gz(path: &Path, images: &[Vec<u8>]) {
    let mut enc = GzEncoder::new(Vec::new(), Compression::fast());
    enc.write_all(&encode_idx_images(images)).unwrap();
    std::fs::write(path, enc.finish().unwrap()).unwrap();
}

/// A dataset directory with standard file names.
pub fn write_dataset_dir(dir: &Path, n_train: usize, n_test: usize, seed: u64) {
    std::fs::create_dir_all(dir).unwrap();
    write_idx_gz(
        &dir.join("train-images-idx3-ubyte.gz"),
        &synthetic_images(n_train, seed),
    );
    write_idx_gz(
        &dir.join("t10k-images-idx3-ubyte.gz"),
        &synthetic_images(n_test, seed + 1),
    );
}

/// Synthesized IDX files and their required outcomes; each entry is
/// `(case name, Ok or a description of the mismatch)`.
pub fn idx_golden_cases(dir: &Path) -> Vec<(&'static str, Result<(), String>)> {
    use qnas::data::{load_idx_images, DatasetKind};
    use qnas::Error;

    let header = |magic: u32, n: u32| -> Vec<u8> { [magic, n, 28, 28].iter().flat_map(|w| w.to_be_bytes()).collect() };
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        std::fs::write(&p, bytes).unwrap();
        p
    };
    let mut cases = Vec::new();

    let mut valid = header(0x0000_0803, 2);
    valid.extend((0..1568).map(|i| (i % 256) as u8));
    let p = write("valid.idx", &valid);
    cases.push((
        "valid header N=2 + 1568 bytes -> 2 images",
        match load_idx_images(&p, DatasetKind::Mnist) {
            Ok(d) if d.len() == 2 && d.image(1)[0] == f64::from((784 % 256) as u8) / 255.0 => Ok(()),
            Ok(d) => Err(format!("loaded {} images with unexpected content", d.len())),
            Err(e) => Err(e.to_string()),
        },
    ));

    let mut gz = GzEncoder::new(Vec::new(), Compression::default());
    gz.write_all(&valid).unwrap();
    let p = write("valid.idx.gz", &gz.finish().unwrap());
    cases.push((
        "gzip-compressed valid file -> same 2 images",
        match load_idx_images(&p, DatasetKind::Mnist) {
            Ok(d) if d.len() == 2 => Ok(()),
            other => Err(format!("{other:?}")),
        },
    ));

    let mut zeros = header(0x0000_0803, 3);
    zeros.extend(std::iter::repeat_n(0u8, 3 * 784));
    let p = write("zeros.idx", &zeros);
    cases.push((
        "all-zero pixel bytes -> all-zero images",
        match load_idx_images(&p, DatasetKind::Mnist) {
            Ok(d) if d.len() == 3 && d.images().all(|im| im.iter().all(|&v| v == 0.0)) => Ok(()),
            other => Err(format!("{other:?}")),
        },
    ));

    let mut label = header(0x0000_0801, 2);
    label.extend(std::iter::repeat_n(0u8, 1568));
    let p = write("labels.idx", &label);
    cases.push((
        "magic 0x00000801 -> format error naming expected/found",
        match load_idx_images(&p, DatasetKind::Mnist) {
            Err(Error::Format { message, .. })
                if message.contains("expected image magic") && message.contains("0x00000801") =>
            {
                Ok(())
            }
            other => Err(format!("{other:?}")),
        },
    ));

    let mut short = header(0x0000_0803, 2);
    short.extend(std::iter::repeat_n(0u8, 1000));
    let p = write("short.idx", &short);
    cases.push((
        "truncated payload -> format error with byte offsets",
        match load_idx_images(&p, DatasetKind::Mnist) {
            Err(Error::Format { message, .. })
                if message.contains("truncated") && message.contains("1584") && message.contains("1016") =>
            {
                Ok(())
            }
            other => Err(format!("{other:?}")),
        },
    ));

    let p = write("stub.idx", &[0, 0, 8]);
    cases.push((
        "truncated header -> format error",
        match load_idx_images(&p, DatasetKind::Mnist) {
            Err(Error::Format { message, .. }) if message.contains("truncated header") => Ok(()),
            other => Err(format!("{other:?}")),
        },
    ));
    cases
}
