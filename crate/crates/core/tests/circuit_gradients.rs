mod common;

use std::f64::consts::PI;

use rand::Rng;

use common::{random_gates, random_genome, rel_close, rng};
use qnas::circuit::{execute, param_shift_grads, parameter_shift};
use qnas::simulator::{dense_unitary_oracle, init_state};

const H: f64 = 1e-5;

fn central_difference(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], i: usize) -> Vec<f64> {
    let mut p = x.to_vec();
    p[i] = x[i] + H;
    let plus = f(&p);
    p[i] = x[i] - H;
    let minus = f(&p);
    plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * H)).collect()
}

#[test]
fn shift_rule_matches_finite_differences_on_random_genomes() {
    let mut r = rng(2024);
    for case in 0..50 {
        let n_rot = r.random_range(1..=10);
        let n_fixed = r.random_range(0..=10);
        let g = random_genome(&mut r, 4, n_rot, n_fixed);
        let params: Vec<f64> = (0..n_rot).map(|_| r.random_range(-PI..PI)).collect();
        let angles: Vec<f64> = (0..4).map(|_| r.random_range(-PI..PI)).collect();
        let jac = param_shift_grads(&g, &params, &angles).unwrap();

        let by_params = |p: &[f64]| execute(&g, p, &angles).unwrap().0;
        for j in 0..n_rot {
            let fd = central_difference(by_params, &params, j);
            for (q, &f) in fd.iter().enumerate() {
                let a = jac.params.get(q, j);
                assert!(
                    rel_close(a, f, 1e-4, 1e-6),
                    "case {case}: d<Z{q}>/dθ{j} shift {a} vs fd {f}"
                );
            }
        }
        let by_angles = |a: &[f64]| execute(&g, &params, a).unwrap().0;
        for j in 0..4 {
            let fd = central_difference(by_angles, &angles, j);
            for (q, &f) in fd.iter().enumerate() {
                let a = jac.angles.get(q, j);
                assert!(
                    rel_close(a, f, 1e-4, 1e-6),
                    "case {case}: d<Z{q}>/dx{j} shift {a} vs fd {f}"
                );
            }
        }
    }
}

#[test]
fn generic_shift_rule_on_single_rotation() {
    // <Z> after RY(θ)|0> is cos θ, so the derivative is −sin θ.
    let f = |a: &[f64]| {
        let mut s = init_state(1)?;
        s.apply(&qnas::simulator::GateOp::RotY(0, a[0]))?;
        Ok(vec![s.expectation_z(0)?])
    };
    for theta in [-2.0, -0.3, 0.0, 1.1, PI / 3.0] {
        let d = parameter_shift(f, &[theta], 0).unwrap()[0];
        assert!((d + f64::sin(theta)).abs() < 1e-12);
    }
}

#[test]
fn simulator_matches_dense_oracle_on_random_circuits() {
    let mut r = rng(99);
    for _ in 0..100 {
        let n = r.random_range(1..=4);
        let count = r.random_range(0..=20);
        let gates = random_gates(&mut r, n, count);
        let mut s = init_state(n).unwrap();
        s.apply_all(&gates).unwrap();
        let u = dense_unitary_oracle(&gates, n).unwrap();
        let mut basis = vec![num_complex::Complex64::new(0.0, 0.0); 1 << n];
        basis[0] = num_complex::Complex64::new(1.0, 0.0);
        let expected = u.apply_to(&basis);
        let err = s
            .amplitudes()
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "max component error {err}");
        assert!((s.norm() - 1.0).abs() <= 1e-10);
    }
}
