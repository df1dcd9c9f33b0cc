//! Chromosome layout and decoding into executable feature-map circuits.
//!
//! A chromosome is a flat bit string split into five consecutive fields:
//!
//! ```text
//! [ feature mask (p) | rotation flags (N) | axis (2) | entanglers (N choose 2) | repetitions (2) ]
//! ```
//!
//! The axis field maps `00 -> I, 01 -> X, 10 -> Y, 11 -> Z` and the
//! repetition field gives `d = value + 1`. Entangler bits follow the
//! lexicographic pair order `(0,1), (0,2), ..., (N-2,N-1)`.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::{fnv1a, mix_seed};

/// Number of bits in a chromosome for `n_features` features on `n_qubits` qubits.
pub fn chromosome_length(n_features: usize, n_qubits: usize) -> usize {
    n_features + n_qubits + n_qubits * n_qubits.saturating_sub(1) / 2 + 4
}

/// Lexicographic list of qubit pairs `(j, k)` with `j < k`.
pub fn qubit_pairs(n_qubits: usize) -> Vec<(usize, usize)> {
    (0..n_qubits)
        .flat_map(|j| ((j + 1)..n_qubits).map(move |k| (j, k)))
        .collect()
}

/// Single-qubit rotation axis shared by every rotation in a circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    I,
    X,
    Y,
    Z,
}

impl Axis {
    fn from_bits(hi: bool, lo: bool) -> Self {
        match (hi, lo) {
            (false, false) => Axis::I,
            (false, true) => Axis::X,
            (true, false) => Axis::Y,
            (true, true) => Axis::Z,
        }
    }

    fn to_bits(self) -> (bool, bool) {
        match self {
            Axis::I => (false, false),
            Axis::X => (false, true),
            Axis::Y => (true, false),
            Axis::Z => (true, true),
        }
    }
}

/// Fixed-length bit string encoding a feature subset and a circuit structure.
///
/// Serializes as `{"bits": "0110...", "n_features": p, "n_qubits": N}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "ChromosomeRepr", try_from = "ChromosomeRepr")]
pub struct Chromosome {
    bits: Vec<bool>,
    n_features: usize,
    n_qubits: usize,
}

impl Chromosome {
    pub fn new(bits: Vec<bool>, n_features: usize, n_qubits: usize) -> Result<Self> {
        if n_features == 0 || n_qubits == 0 {
            return Err(Error::invalid("chromosome needs at least one feature and one qubit"));
        }
        let expected = chromosome_length(n_features, n_qubits);
        if bits.len() != expected {
            return Err(Error::invalid(format!(
                "chromosome has {} bits, expected {expected} for {n_features} features on {n_qubits} qubits",
                bits.len()
            )));
        }
        Ok(Self { bits, n_features, n_qubits })
    }

    /// Parse a `0`/`1` string.
    pub fn from_bit_string(s: &str, n_features: usize, n_qubits: usize) -> Result<Self> {
        let bits = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::invalid(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bits, n_features, n_qubits)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    /// Stable 64-bit hash of the bit string.
    pub fn stable_hash(&self) -> u64 {
        let bytes: Vec<u8> = self.bits.iter().map(|&b| b as u8).collect();
        fnv1a(&bytes)
    }

    /// Seed for the qubit assignment PRNG: run seed mixed with the bit hash.
    pub fn sub_seed(&self, run_seed: u64) -> u64 {
        mix_seed(run_seed, self.stable_hash())
    }

    fn layout(&self) -> Layout {
        Layout::new(self.n_features, self.n_qubits)
    }

    pub fn feature_mask(&self) -> &[bool] {
        &self.bits[..self.n_features]
    }
}

#[derive(Serialize, Deserialize)]
struct ChromosomeRepr {
    bits: String,
    n_features: usize,
    n_qubits: usize,
}

impl From<Chromosome> for ChromosomeRepr {
    fn from(c: Chromosome) -> Self {
        Self { bits: c.to_bit_string(), n_features: c.n_features, n_qubits: c.n_qubits }
    }
}

impl TryFrom<ChromosomeRepr> for Chromosome {
    type Error = Error;

    fn try_from(r: ChromosomeRepr) -> Result<Self> {
        Chromosome::from_bit_string(&r.bits, r.n_features, r.n_qubits)
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bit_string())
    }
}

/// Offsets of the chromosome fields.
#[derive(Debug, Clone, Copy)]
struct Layout {
    rotations: usize,
    axis: usize,
    entanglers: usize,
    repetitions: usize,
    n_pairs: usize,
}

impl Layout {
    fn new(n_features: usize, n_qubits: usize) -> Self {
        let n_pairs = n_qubits * n_qubits.saturating_sub(1) / 2;
        let rotations = n_features;
        let axis = rotations + n_qubits;
        let entanglers = axis + 2;
        let repetitions = entanglers + n_pairs;
        Self { rotations, axis, entanglers, repetitions, n_pairs }
    }
}

/// Decoded, executable description of a feature-map circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    /// Selected feature indices, ascending.
    pub selected_features: Vec<usize>,
    /// Feature feeding each qubit.
    pub qubit_feature: Vec<usize>,
    pub rotation_flags: Vec<bool>,
    pub axis: Axis,
    pub entangler_pairs: Vec<(usize, usize)>,
    pub repetitions: usize,
}

impl CircuitSpec {
    pub fn n_qubits(&self) -> usize {
        self.qubit_feature.len()
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        let n = self.n_qubits();
        if n == 0 {
            return Err(Error::invalid("circuit has no qubits"));
        }
        if self.rotation_flags.len() != n {
            return Err(Error::invalid("rotation flag count differs from qubit count"));
        }
        if !(1..=4).contains(&self.repetitions) {
            return Err(Error::invalid(format!("repetitions {} outside [1, 4]", self.repetitions)));
        }
        for &f in &self.qubit_feature {
            if f >= n_features {
                return Err(Error::invalid(format!("qubit feature {f} out of range")));
            }
            if !self.selected_features.contains(&f) {
                return Err(Error::invalid(format!("qubit feature {f} is not selected")));
            }
        }
        for &(j, k) in &self.entangler_pairs {
            if j >= k || k >= n {
                return Err(Error::invalid(format!("invalid entangler pair ({j}, {k})")));
            }
        }
        Ok(())
    }

    /// Bits of every field after the feature mask. The qubit assignment is
    /// not part of the bit string and is not recovered.
    pub fn structure_bits(&self) -> Vec<bool> {
        let n = self.n_qubits();
        let mut bits = self.rotation_flags.clone();
        let (hi, lo) = self.axis.to_bits();
        bits.extend([hi, lo]);
        let active: Vec<(usize, usize)> = self.entangler_pairs.clone();
        bits.extend(qubit_pairs(n).iter().map(|p| active.contains(p)));
        let r = self.repetitions - 1;
        bits.extend([r & 2 != 0, r & 1 != 0]);
        bits
    }
}

/// Decode a chromosome into a [`CircuitSpec`].
///
/// An all-zero feature mask selects feature 0. When more features are
/// selected than there are qubits, `n_qubits` of them are drawn without
/// replacement from a PRNG seeded with `sub_seed`; when fewer, the selection
/// is cycled to fill the register and the filled tail is shuffled with the
/// same PRNG.
pub fn decode(chromosome: &Chromosome, sub_seed: u64) -> CircuitSpec {
    let bits = chromosome.bits();
    let n = chromosome.n_qubits();
    let layout = chromosome.layout();

    let mut selected: Vec<usize> = chromosome
        .feature_mask()
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect();
    if selected.is_empty() {
        selected.push(0);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed);
    let qubit_feature = match selected.len().cmp(&n) {
        std::cmp::Ordering::Equal => selected.clone(),
        std::cmp::Ordering::Greater => {
            let mut pool = selected.clone();
            let (chosen, _) = pool.partial_shuffle(&mut rng, n);
            chosen.to_vec()
        }
        std::cmp::Ordering::Less => {
            let mut fill: Vec<usize> = selected.iter().copied().cycle().take(n - selected.len()).collect();
            fill.shuffle(&mut rng);
            selected.iter().copied().chain(fill).collect()
        }
    };

    let rotation_flags = bits[layout.rotations..layout.axis].to_vec();
    let axis = Axis::from_bits(bits[layout.axis], bits[layout.axis + 1]);
    let entangler_pairs = qubit_pairs(n)
        .into_iter()
        .zip(&bits[layout.entanglers..layout.entanglers + layout.n_pairs])
        .filter_map(|(pair, &on)| on.then_some(pair))
        .collect();
    let repetitions =
        1 + ((bits[layout.repetitions] as usize) << 1 | bits[layout.repetitions + 1] as usize);

    CircuitSpec { selected_features: selected, qubit_feature, rotation_flags, axis, entangler_pairs, repetitions }
}

/// Local (Hadamard + rotation) and CNOT gate totals of a circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub local: usize,
    pub cnot: usize,
}

/// Count gates per repetition block: `N` Hadamards, one rotation per flagged
/// qubit unless the axis is `I`, and per entangler two CNOTs plus one
/// rotation. Totals scale with `d`.
pub fn gate_counts(spec: &CircuitSpec) -> GateCounts {
    let n = spec.n_qubits();
    let rotations = if spec.axis == Axis::I {
        0
    } else {
        spec.rotation_flags.iter().filter(|&&f| f).count()
    };
    let pairs = spec.entangler_pairs.len();
    GateCounts {
        local: spec.repetitions * (n + rotations + pairs),
        cnot: spec.repetitions * 2 * pairs,
    }
}

/// Uniformly random chromosome.
pub fn random_chromosome<R: Rng + ?Sized>(n_features: usize, n_qubits: usize, rng: &mut R) -> Chromosome {
    let len = chromosome_length(n_features, n_qubits);
    let bits = (0..len).map(|_| rng.gen::<bool>()).collect();
    Chromosome::new(bits, n_features, n_qubits).expect("length computed from sizes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_feature_example() -> Chromosome {
        let bits = [1, 0, 1, 1, 1, 1, 1, 1, 0, 0, 1, 1, 1, 0].iter().map(|&b| b == 1).collect();
        Chromosome::new(bits, 4, 3).unwrap()
    }

    #[test]
    fn lengths() {
        assert_eq!(chromosome_length(4, 3), 14);
        assert_eq!(chromosome_length(30, 5), 49);
        assert_eq!(chromosome_length(30, 10), 89);
        assert_eq!(chromosome_length(30, 1), 35);
    }

    #[test]
    fn decodes_worked_example() {
        let spec = decode(&four_feature_example(), 99);
        assert_eq!(spec.selected_features, vec![0, 2, 3]);
        assert_eq!(spec.qubit_feature, vec![0, 2, 3]);
        assert_eq!(spec.rotation_flags, vec![true; 3]);
        assert_eq!(spec.axis, Axis::Y);
        assert_eq!(spec.entangler_pairs, vec![(0, 2), (1, 2)]);
        assert_eq!(spec.repetitions, 3);
        spec.validate(4).unwrap();
    }

    #[test]
    fn all_zero_forces_feature_zero() {
        let c = Chromosome::new(vec![false; 14], 4, 3).unwrap();
        let spec = decode(&c, 1);
        assert_eq!(spec.selected_features, vec![0]);
        assert_eq!(spec.qubit_feature, vec![0, 0, 0]);
        assert_eq!(spec.rotation_flags, vec![false; 3]);
        assert_eq!(spec.axis, Axis::I);
        assert!(spec.entangler_pairs.is_empty());
        assert_eq!(spec.repetitions, 1);
    }

    #[test]
    fn fill_is_deterministic_multiset() {
        let mut bits = vec![false; 14];
        bits[1] = true;
        bits[3] = true;
        let c = Chromosome::new(bits, 4, 3).unwrap();
        let a = decode(&c, 42);
        let b = decode(&c, 42);
        assert_eq!(a, b);
        assert_eq!(&a.qubit_feature[..2], &[1, 3]);
        assert!(a.qubit_feature.contains(&1) && a.qubit_feature.contains(&3));
        assert!(a.qubit_feature.iter().all(|f| [1, 3].contains(f)));
    }

    #[test]
    fn oversubscribed_mask_samples_distinct() {
        let mut bits = vec![true; 30];
        bits.extend(vec![false; chromosome_length(30, 4) - 30]);
        let c = Chromosome::new(bits, 30, 4).unwrap();
        let spec = decode(&c, 5);
        let mut q = spec.qubit_feature.clone();
        q.sort();
        q.dedup();
        assert_eq!(q.len(), 4);
        assert_eq!(spec.selected_features.len(), 30);
        spec.validate(30).unwrap();
    }

    #[test]
    fn gate_count_examples() {
        let mut spec = decode(&four_feature_example(), 0);
        spec.repetitions = 1;
        assert_eq!(gate_counts(&spec), GateCounts { local: 8, cnot: 4 });

        let bare = CircuitSpec {
            selected_features: vec![0, 1],
            qubit_feature: vec![0, 1],
            rotation_flags: vec![false, false],
            axis: Axis::Z,
            entangler_pairs: vec![],
            repetitions: 1,
        };
        assert_eq!(gate_counts(&bare), GateCounts { local: 2, cnot: 0 });

        let identity_axis = CircuitSpec {
            selected_features: vec![0],
            qubit_feature: vec![0, 0, 0],
            rotation_flags: vec![true; 3],
            axis: Axis::I,
            entangler_pairs: vec![(0, 1)],
            repetitions: 2,
        };
        assert_eq!(gate_counts(&identity_axis), GateCounts { local: 8, cnot: 4 });
    }

    #[test]
    fn bit_string_round_trip_and_errors() {
        let c = four_feature_example();
        assert_eq!(c.to_bit_string(), "10111111001110");
        assert_eq!(Chromosome::from_bit_string("10111111001110", 4, 3).unwrap(), c);
        let err = Chromosome::from_bit_string("1011", 4, 3).unwrap_err().to_string();
        assert!(err.contains("expected 14"), "{err}");
        assert!(Chromosome::from_bit_string("1011111100111x", 4, 3).is_err());
    }

    #[test]
    fn structure_bits_match_layout() {
        let c = four_feature_example();
        let spec = decode(&c, 0);
        assert_eq!(spec.structure_bits(), c.bits()[4..].to_vec());
    }

    #[test]
    fn random_chromosome_determinism_and_balance() {
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        let a = random_chromosome(30, 5, &mut r1);
        let b = random_chromosome(30, 5, &mut r2);
        assert_eq!(a, b);
        assert_eq!(a.len(), 49);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = vec![0usize; 49];
        let samples = 10_000;
        for _ in 0..samples {
            for (i, &bit) in random_chromosome(30, 5, &mut rng).bits().iter().enumerate() {
                counts[i] += bit as usize;
            }
        }
        for c in counts {
            let freq = c as f64 / samples as f64;
            assert!((0.45..=0.55).contains(&freq), "{freq}");
        }
    }
}
