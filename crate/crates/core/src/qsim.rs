//! Statevector simulation of feature-map circuits and the fidelity kernel
//! `K(x, z) = |<Phi(x)|Phi(z)>|^2`.
//!
//! Qubit 0 is the least significant bit of the amplitude index. Rotations use
//! `exp(i * phi * P)` with no half-angle factor.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::encoding::{Axis, CircuitSpec};
use crate::error::{Error, Result};

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 16;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Pure state of `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    n_qubits: usize,
}

/// `|0...0>` on `n_qubits` qubits.
pub fn zero_state(n_qubits: usize) -> Result<StateVector> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::invalid(format!("qubit count {n_qubits} outside [1, {MAX_QUBITS}]")));
    }
    let mut amplitudes = vec![ZERO; 1 << n_qubits];
    amplitudes[0] = ONE;
    Ok(StateVector { amplitudes, n_qubits })
}

/// 2x2 unitary `exp(i * angle * P)` for a Pauli axis, row-major.
pub fn rotation_matrix(axis: Axis, angle: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = angle.sin_cos();
    match axis {
        Axis::I => [[ONE, ZERO], [ZERO, ONE]],
        Axis::X => [
            [Complex64::new(c, 0.0), Complex64::new(0.0, s)],
            [Complex64::new(0.0, s), Complex64::new(c, 0.0)],
        ],
        Axis::Y => [
            [Complex64::new(c, 0.0), Complex64::new(s, 0.0)],
            [Complex64::new(-s, 0.0), Complex64::new(c, 0.0)],
        ],
        Axis::Z => [
            [Complex64::new(c, s), ZERO],
            [ZERO, Complex64::new(c, -s)],
        ],
    }
}

impl StateVector {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::invalid(format!("qubit {q} out of range for {} qubits", self.n_qubits)));
        }
        Ok(())
    }

    /// Apply a 2x2 matrix to qubit `q`.
    pub fn apply_single(&mut self, q: usize, m: &[[Complex64; 2]; 2]) -> Result<()> {
        self.check_qubit(q)?;
        let bit = 1usize << q;
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | bit];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        Ok(())
    }

    pub fn apply_h(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bit = 1usize << q;
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | bit];
                self.amplitudes[i] = (a0 + a1) * h;
                self.amplitudes[i | bit] = (a0 - a1) * h;
            }
        }
        Ok(())
    }

    /// `exp(i * angle * P)` on qubit `q`; the identity axis is a no-op.
    pub fn apply_rotation(&mut self, q: usize, axis: Axis, angle: f64) -> Result<()> {
        self.check_qubit(q)?;
        if !angle.is_finite() {
            return Err(Error::invalid(format!("rotation angle {angle} is not finite")));
        }
        match axis {
            Axis::I => Ok(()),
            Axis::Z => {
                let phase = Complex64::from_polar(1.0, angle);
                let bit = 1usize << q;
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    *a *= if i & bit == 0 { phase } else { phase.conj() };
                }
                Ok(())
            }
            _ => self.apply_single(q, &rotation_matrix(axis, angle)),
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::invalid("CNOT control and target coincide"));
        }
        let (cb, tb) = (1usize << control, 1usize << target);
        for i in 0..self.amplitudes.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amplitudes.swap(i, i | tb);
            }
        }
        Ok(())
    }

    /// `exp(i * angle * Z_j Z_k)`, realised as CNOT(j -> k), `exp(i * angle * Z)` on `k`, CNOT(j -> k).
    ///
    /// The composition is diagonal, so it is applied directly as a per-basis
    /// phase `e^{+i angle}` when bits `j` and `k` agree and `e^{-i angle}` otherwise.
    pub fn apply_entangler(&mut self, j: usize, k: usize, angle: f64) -> Result<()> {
        self.check_qubit(j)?;
        self.check_qubit(k)?;
        if j == k {
            return Err(Error::invalid(format!("entangler pair ({j}, {k}) uses one qubit")));
        }
        if !angle.is_finite() {
            return Err(Error::invalid(format!("entangler angle {angle} is not finite")));
        }
        let phase = Complex64::from_polar(1.0, angle);
        let (jb, kb) = (1usize << j, 1usize << k);
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            let parity = ((i & jb != 0) as u8) ^ ((i & kb != 0) as u8);
            *a *= if parity == 0 { phase } else { phase.conj() };
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Run the feature map on `|0...0>` for one data row.
///
/// Per repetition: Hadamard on every qubit, `exp(i x_f P)` on flagged qubits
/// with `f = qubit_feature[j]`, then `exp(i 2 x_a x_b Z Z)` on each entangled pair.
pub fn prepare_feature_state(spec: &CircuitSpec, x: ArrayView1<'_, f64>) -> Result<StateVector> {
    let n = spec.n_qubits();
    if let Some(&f) = spec.qubit_feature.iter().find(|&&f| f >= x.len()) {
        return Err(Error::invalid(format!("feature {f} out of range for row of width {}", x.len())));
    }
    let angles: Vec<f64> = spec.qubit_feature.iter().map(|&f| x[f]).collect();
    if angles.iter().any(|a| !a.is_finite()) {
        return Err(Error::invalid("feature row contains non-finite values"));
    }
    let mut state = zero_state(n)?;
    for _ in 0..spec.repetitions {
        for q in 0..n {
            state.apply_h(q)?;
        }
        if spec.axis != Axis::I {
            for (q, _) in spec.rotation_flags.iter().enumerate().filter(|(_, &on)| on) {
                state.apply_rotation(q, spec.axis, angles[q])?;
            }
        }
        for &(j, k) in &spec.entangler_pairs {
            state.apply_entangler(j, k, 2.0 * angles[j] * angles[k])?;
        }
    }
    Ok(state)
}

fn fidelity(a: &StateVector, b: &StateVector) -> f64 {
    a.inner(b).norm_sqr().clamp(0.0, 1.0)
}

/// `|<Phi(x)|Phi(z)>|^2`, clamped into `[0, 1]`.
pub fn kernel_entry(spec: &CircuitSpec, x: ArrayView1<'_, f64>, z: ArrayView1<'_, f64>) -> Result<f64> {
    let a = prepare_feature_state(spec, x)?;
    let b = prepare_feature_state(spec, z)?;
    Ok(fidelity(&a, &b))
}

/// Feature states for every row of `rows`.
pub fn prepare_states(spec: &CircuitSpec, rows: ArrayView2<'_, f64>) -> Result<Vec<StateVector>> {
    rows.outer_iter().map(|r| prepare_feature_state(spec, r)).collect()
}

/// Cross kernel between two lists of prepared states.
pub fn kernel_from_states(a: &[StateVector], b: &[StateVector]) -> Array2<f64> {
    let values: Vec<f64> = a
        .par_iter()
        .flat_map_iter(|sa| b.iter().map(move |sb| fidelity(sa, sb)))
        .collect();
    Array2::from_shape_vec((a.len(), b.len()), values).expect("shape matches state counts")
}

/// Gram matrix over one list of states, computing the upper triangle and mirroring it.
pub fn gram_from_states(states: &[StateVector]) -> Array2<f64> {
    let n = states.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| fidelity(&states[i], &states[j])).collect())
        .collect();
    let mut k = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            k[[i, i + off]] = v;
            k[[i + off, i]] = v;
        }
    }
    k
}

/// Kernel matrix with entry `(i, j) = K(X_a[i], X_b[j])`. Each row's state is prepared once.
pub fn kernel_matrix(spec: &CircuitSpec, xa: ArrayView2<'_, f64>, xb: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let sa = prepare_states(spec, xa)?;
    let sb = prepare_states(spec, xb)?;
    Ok(kernel_from_states(&sa, &sb))
}

/// Symmetry, diagonal and spectrum summary of a square kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramDiagnostics {
    pub max_asymmetry: f64,
    pub max_diagonal_deviation: f64,
    pub min_eigenvalue: f64,
}

pub fn gram_diagnostics(k: ArrayView2<'_, f64>) -> Result<GramDiagnostics> {
    let (n, m) = k.dim();
    if n != m {
        return Err(Error::shape("square matrix", format!("{n}x{m}")));
    }
    let mut max_asymmetry: f64 = 0.0;
    let mut max_diagonal_deviation: f64 = 0.0;
    for i in 0..n {
        max_diagonal_deviation = max_diagonal_deviation.max((k[[i, i]] - 1.0).abs());
        for j in 0..n {
            max_asymmetry = max_asymmetry.max((k[[i, j]] - k[[j, i]]).abs());
        }
    }
    let dense = DMatrix::from_fn(n, n, |i, j| 0.5 * (k[[i, j]] + k[[j, i]]));
    let min_eigenvalue = if n == 0 {
        0.0
    } else {
        SymmetricEigen::new(dense).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    };
    Ok(GramDiagnostics { max_asymmetry, max_diagonal_deviation, min_eigenvalue })
}

/// Row-major CSV dump with 12 significant digits per entry.
pub fn kernel_to_csv(k: ArrayView2<'_, f64>) -> String {
    let mut out = String::new();
    for row in k.outer_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.11e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
