//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qsvmf::encoding::{qubit_pairs, Axis, CircuitSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type M = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pauli(axis: Axis) -> M {
    match axis {
        Axis::I => M::identity(2, 2),
        Axis::X => M::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
        Axis::Y => M::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
        Axis::Z => M::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
    }
}

fn hadamard() -> M {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    M::from_row_slice(2, 2, &[c(h, 0.), c(h, 0.), c(h, 0.), c(-h, 0.)])
}

/// Lift a one-qubit operator onto `n` qubits; qubit 0 is the rightmost factor.
fn lift(op: &M, q: usize, n: usize) -> M {
    let mut full = M::identity(1, 1);
    for k in (0..n).rev() {
        let f = if k == q { op.clone() } else { M::identity(2, 2) };
        full = full.kronecker(&f);
    }
    full
}

/// `exp(i a P)` for an involutory `P`.
fn exp_i(p: &M, a: f64) -> M {
    let dim = p.nrows();
    M::identity(dim, dim) * c(a.cos(), 0.) + p * c(0., a.sin())
}

pub fn oracle_state(spec: &CircuitSpec, x: &[f64]) -> DVector<Complex64> {
    let n = spec.n_qubits();
    let dim = 1 << n;
    let mut psi = DVector::from_element(dim, c(0., 0.));
    psi[0] = c(1., 0.);
    let ang: Vec<f64> = spec.qubit_feature.iter().map(|&f| x[f]).collect();
    for _ in 0..spec.repetitions {
        for q in 0..n {
            psi = lift(&hadamard(), q, n) * psi;
        }
        for q in 0..n {
            if spec.rotation_flags[q] {
                psi = lift(&exp_i(&pauli(spec.axis), ang[q]), q, n) * psi;
            }
        }
        for &(j, k) in &spec.entangler_pairs {
            let zz = lift(&pauli(Axis::Z), j, n) * lift(&pauli(Axis::Z), k, n);
            psi = exp_i(&zz, 2.0 * ang[j] * ang[k]) * psi;
        }
    }
    psi
}

pub fn oracle_kernel(spec: &CircuitSpec, x: &[f64], z: &[f64]) -> f64 {
    oracle_state(spec, x).dotc(&oracle_state(spec, z)).norm_sqr()
}

pub fn random_spec(rng: &mut ChaCha8Rng, n: usize, p: usize) -> CircuitSpec {
    let qubit_feature: Vec<usize> = (0..n).map(|_| rng.gen_range(0..p)).collect();
    let mut selected = qubit_feature.clone();
    selected.sort_unstable();
    selected.dedup();
    let axis = [Axis::I, Axis::X, Axis::Y, Axis::Z][rng.gen_range(0..4)];
    CircuitSpec {
        selected_features: selected,
        qubit_feature,
        rotation_flags: (0..n).map(|_| rng.gen()).collect(),
        axis,
        entangler_pairs: qubit_pairs(n).into_iter().filter(|_| rng.gen()).collect(),
        repetitions: rng.gen_range(1..=4),
    }
}

/// Peel fronts by repeatedly taking every point no remaining point dominates.
pub fn brute_force_fronts(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let dom = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y);
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !remaining.is_empty() {
        let front: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| !remaining.iter().any(|&j| dom(&points[j], &points[i])))
            .collect();
        remaining.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

pub fn sorted(mut fronts: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for f in &mut fronts {
        f.sort_unstable();
    }
    fronts
}
