//! Dense statevector simulation of small quantum circuits.
//!
//! Qubit `0` is the least-significant bit of the basis-state index; bitstrings
//! are printed most-significant-first, so qubit 0 is the rightmost character.
//! Global phase is never normalized away — downstream consumers work with
//! `|⟨a|b⟩|²`, which is phase-invariant.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense simulation is capped here; every dataset in this crate fits in 10.
pub const MAX_QUBITS: usize = 12;

/// Amplitudes of an n-qubit pure state, length exactly `2^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Builds a state from explicit amplitudes. The length must be a power of
    /// two within the qubit cap and the vector must already be normalized.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::invalid(format!(
                "amplitude count {dim} is not a power of two ≥ 2"
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::invalid(format!(
                "{n_qubits} qubits exceeds the cap of {MAX_QUBITS}"
            )));
        }
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > 1e-8 {
            return Err(Error::invalid(format!(
                "amplitudes are not normalized (|ψ|² = {norm_sqr})"
            )));
        }
        Ok(StateVector {
            n_qubits,
            amplitudes,
        })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn probability(&self, basis_index: usize) -> f64 {
        self.amplitudes[basis_index].norm_sqr()
    }
}

/// A single gate from the minimal set needed by the feature-map builders.
/// RZZ-style interactions are expressed as CX–P–CX sequences by the builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
    /// Phase gate: `diag(1, e^{iλ})`.
    Phase(usize, f64),
    Cx {
        control: usize,
        target: usize,
    },
    /// Controlled phase: multiplies the `|11⟩` component by `e^{iλ}`.
    Cp {
        control: usize,
        target: usize,
        angle: f64,
    },
}

impl Gate {
    /// The exact inverse: rotations and phases negate their angle, the rest
    /// are self-inverse.
    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::H(q) => Gate::H(q),
            Gate::X(q) => Gate::X(q),
            Gate::Rx(q, a) => Gate::Rx(q, -a),
            Gate::Ry(q, a) => Gate::Ry(q, -a),
            Gate::Rz(q, a) => Gate::Rz(q, -a),
            Gate::Phase(q, a) => Gate::Phase(q, -a),
            Gate::Cx { control, target } => Gate::Cx { control, target },
            Gate::Cp {
                control,
                target,
                angle,
            } => Gate::Cp {
                control,
                target,
                angle: -angle,
            },
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q)
            | Gate::X(q)
            | Gate::Rx(q, _)
            | Gate::Ry(q, _)
            | Gate::Rz(q, _)
            | Gate::Phase(q, _) => vec![q],
            Gate::Cx { control, target }
            | Gate::Cp {
                control, target, ..
            } => vec![control, target],
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let qs = self.qubits();
        for &q in &qs {
            if q >= n_qubits {
                return Err(Error::invalid(format!(
                    "gate target {q} out of range for {n_qubits} qubits"
                )));
            }
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::invalid(format!(
                "two-qubit gate targets must be distinct, got {}",
                qs[0]
            )));
        }
        Ok(())
    }
}

/// Ordered gate list; application order is list order, left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
}

impl CircuitSpec {
    pub fn new(n_qubits: usize) -> Self {
        CircuitSpec {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: Gate) {
        self.gates.push(gate);
    }

    /// The adjoint circuit: gate list reversed, each gate inverted.
    pub fn inverted(&self) -> CircuitSpec {
        CircuitSpec {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }
}

/// The all-zero computational basis state `|0…0⟩`.
pub fn zero_state(n_qubits: usize) -> Result<StateVector> {
    if !(1..=MAX_QUBITS).contains(&n_qubits) {
        return Err(Error::invalid(format!(
            "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
        )));
    }
    let mut amplitudes = vec![Complex64::ZERO; 1 << n_qubits];
    amplitudes[0] = Complex64::ONE;
    Ok(StateVector {
        n_qubits,
        amplitudes,
    })
}

fn apply_single(amps: &mut [Complex64], qubit: usize, m: [[Complex64; 2]; 2]) {
    let bit = 1usize << qubit;
    for i in 0..amps.len() {
        if i & bit == 0 {
            let a = amps[i];
            let b = amps[i | bit];
            amps[i] = m[0][0] * a + m[0][1] * b;
            amps[i | bit] = m[1][0] * a + m[1][1] * b;
        }
    }
}

fn apply_in_place(amps: &mut [Complex64], gate: &Gate) {
    match *gate {
        Gate::H(q) => {
            let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
            apply_single(amps, q, [[s, s], [s, -s]]);
        }
        Gate::X(q) => {
            let bit = 1usize << q;
            for i in 0..amps.len() {
                if i & bit == 0 {
                    amps.swap(i, i | bit);
                }
            }
        }
        Gate::Rx(q, theta) => {
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            let c = Complex64::new(c, 0.0);
            let ms = Complex64::new(0.0, -s);
            apply_single(amps, q, [[c, ms], [ms, c]]);
        }
        Gate::Ry(q, theta) => {
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            let c = Complex64::new(c, 0.0);
            let s = Complex64::new(s, 0.0);
            apply_single(amps, q, [[c, -s], [s, c]]);
        }
        Gate::Rz(q, theta) => {
            let bit = 1usize << q;
            let lo = Complex64::from_polar(1.0, -theta / 2.0);
            let hi = Complex64::from_polar(1.0, theta / 2.0);
            for (i, amp) in amps.iter_mut().enumerate() {
                *amp *= if i & bit == 0 { lo } else { hi };
            }
        }
        Gate::Phase(q, lambda) => {
            let bit = 1usize << q;
            let phase = Complex64::from_polar(1.0, lambda);
            for (i, amp) in amps.iter_mut().enumerate() {
                if i & bit != 0 {
                    *amp *= phase;
                }
            }
        }
        Gate::Cx { control, target } => {
            let cbit = 1usize << control;
            let tbit = 1usize << target;
            for i in 0..amps.len() {
                if i & cbit != 0 && i & tbit == 0 {
                    amps.swap(i, i | tbit);
                }
            }
        }
        Gate::Cp {
            control,
            target,
            angle,
        } => {
            let mask = (1usize << control) | (1usize << target);
            let phase = Complex64::from_polar(1.0, angle);
            for (i, amp) in amps.iter_mut().enumerate() {
                if i & mask == mask {
                    *amp *= phase;
                }
            }
        }
    }
}

/// Applies one gate, returning the transformed state. The input is untouched.
pub fn apply_gate(state: &StateVector, gate: &Gate) -> Result<StateVector> {
    gate.validate(state.n_qubits)?;
    let mut out = state.clone();
    apply_in_place(&mut out.amplitudes, gate);
    Ok(out)
}

/// Runs a circuit from `|0…0⟩`, folding gates in list order.
pub fn run_circuit(circuit: &CircuitSpec) -> Result<StateVector> {
    let mut state = zero_state(circuit.n_qubits)?;
    for gate in &circuit.gates {
        gate.validate(circuit.n_qubits)?;
        apply_in_place(&mut state.amplitudes, gate);
    }
    Ok(state)
}

/// `⟨a|b⟩ = Σ_k conj(a_k)·b_k`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: a.dimension(),
            actual: b.dimension(),
        });
    }
    Ok(a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Formats a basis index as a bitstring, qubit `n−1` first.
pub fn bitstring(index: usize, n_qubits: usize) -> String {
    format!("{index:0n_qubits$b}")
}

/// Samples `shots` full measurements in the computational basis. Counts sum
/// to `shots`; the draw sequence is fixed by `seed`.
pub fn sample_bitstrings(
    state: &StateVector,
    shots: u64,
    seed: u64,
) -> Result<BTreeMap<String, u64>> {
    if shots == 0 {
        return Err(Error::invalid("shots must be ≥ 1"));
    }
    let mut cumulative = Vec::with_capacity(state.dimension());
    let mut total = 0.0;
    for amp in &state.amplitudes {
        total += amp.norm_sqr();
        cumulative.push(total);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for _ in 0..shots {
        let r: f64 = rng.random::<f64>() * total;
        let idx = cumulative
            .partition_point(|&c| c <= r)
            .min(state.dimension() - 1);
        *counts.entry(idx).or_insert(0) += 1;
    }

    Ok(counts
        .into_iter()
        .map(|(idx, c)| (bitstring(idx, state.n_qubits), c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn assert_close(a: Complex64, b: Complex64, tol: f64) {
        assert!(
            (a - b).norm() <= tol,
            "expected {b} within {tol}, got {a} (diff {})",
            (a - b).norm()
        );
    }

    #[test]
    fn zero_state_examples() {
        let s = zero_state(1).unwrap();
        assert_eq!(s.amplitudes(), &[Complex64::ONE, Complex64::ZERO]);
        let s = zero_state(2).unwrap();
        assert_eq!(s.dimension(), 4);
        assert_eq!(s.amplitudes()[0], Complex64::ONE);
        assert!(s.amplitudes()[1..].iter().all(|a| *a == Complex64::ZERO));
        let s = zero_state(4).unwrap();
        assert_eq!(s.dimension(), 16);
        assert_eq!(s.amplitudes()[0], Complex64::ONE);
    }

    #[test]
    fn zero_state_rejects_out_of_range() {
        assert!(zero_state(0).is_err());
        assert!(zero_state(MAX_QUBITS + 1).is_err());
        assert!(zero_state(MAX_QUBITS).is_ok());
    }

    #[test]
    fn hadamard_on_zero() {
        let s = apply_gate(&zero_state(1).unwrap(), &Gate::H(0)).unwrap();
        assert_close(s.amplitudes()[0], Complex64::new(FRAC_1_SQRT_2, 0.0), 1e-12);
        assert_close(s.amplitudes()[1], Complex64::new(FRAC_1_SQRT_2, 0.0), 1e-12);
    }

    #[test]
    fn ry_pi_flips_to_one() {
        let s = apply_gate(&zero_state(1).unwrap(), &Gate::Ry(0, PI)).unwrap();
        assert!(s.amplitudes()[0].norm() < 1e-12);
        assert!((s.amplitudes()[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cx_truth_table() {
        // |q0=1⟩ on two qubits is basis index 1.
        let mut amps = vec![Complex64::ZERO; 4];
        amps[1] = Complex64::ONE;
        let s = StateVector::from_amplitudes(amps).unwrap();
        let s = apply_gate(
            &s,
            &Gate::Cx {
                control: 0,
                target: 1,
            },
        )
        .unwrap();
        assert_close(s.amplitudes()[3], Complex64::ONE, 1e-15);
        assert!(s.amplitudes()[0].norm() < 1e-15);
        assert!(s.amplitudes()[1].norm() < 1e-15);
    }

    #[test]
    fn gate_rejects_bad_targets() {
        let s = zero_state(2).unwrap();
        assert!(apply_gate(&s, &Gate::H(2)).is_err());
        assert!(
            apply_gate(
                &s,
                &Gate::Cx {
                    control: 1,
                    target: 1
                }
            )
            .is_err()
        );
    }

    #[test]
    fn run_circuit_examples() {
        let empty = CircuitSpec::new(2);
        let s = run_circuit(&empty).unwrap();
        assert_eq!(s.amplitudes()[0], Complex64::ONE);

        let mut c = CircuitSpec::new(2);
        c.push(Gate::H(0));
        c.push(Gate::H(1));
        let s = run_circuit(&c).unwrap();
        for amp in s.amplitudes() {
            assert_close(*amp, Complex64::new(0.5, 0.0), 1e-12);
        }

        let theta = 0.7;
        let mut c = CircuitSpec::new(1);
        c.push(Gate::Ry(0, theta));
        let s = run_circuit(&c).unwrap();
        assert_close(
            s.amplitudes()[0],
            Complex64::new((theta / 2.0).cos(), 0.0),
            1e-12,
        );
        assert_close(
            s.amplitudes()[1],
            Complex64::new((theta / 2.0).sin(), 0.0),
            1e-12,
        );
    }

    #[test]
    fn inner_product_examples() {
        let s = run_circuit(&CircuitSpec {
            n_qubits: 2,
            gates: vec![Gate::H(0), Gate::Ry(1, 1.1)],
        })
        .unwrap();
        assert_close(inner_product(&s, &s).unwrap(), Complex64::ONE, 1e-12);

        let zero = zero_state(1).unwrap();
        let one = apply_gate(&zero, &Gate::X(0)).unwrap();
        assert_close(inner_product(&zero, &one).unwrap(), Complex64::ZERO, 1e-15);

        assert!(inner_product(&zero, &zero_state(2).unwrap()).is_err());
    }

    // Oracle: ⟨RY(a)0|RY(b)0⟩ by direct 2-vector arithmetic.
    #[test]
    fn inner_product_matches_ry_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = rng.random::<f64>() * 2.0 * PI;
            let b = rng.random::<f64>() * 2.0 * PI;
            let va = [(a / 2.0).cos(), (a / 2.0).sin()];
            let vb = [(b / 2.0).cos(), (b / 2.0).sin()];
            let oracle = va[0] * vb[0] + va[1] * vb[1];
            assert!((oracle - ((a - b) / 2.0).cos()).abs() < 1e-12);

            let sa = run_circuit(&CircuitSpec {
                n_qubits: 1,
                gates: vec![Gate::Ry(0, a)],
            })
            .unwrap();
            let sb = run_circuit(&CircuitSpec {
                n_qubits: 1,
                gates: vec![Gate::Ry(0, b)],
            })
            .unwrap();
            let ip = inner_product(&sa, &sb).unwrap();
            assert_close(ip, Complex64::new(oracle, 0.0), 1e-12);
        }
    }

    #[test]
    fn sampling_deterministic_states() {
        let s = zero_state(1).unwrap();
        let counts = sample_bitstrings(&s, 100, 3).unwrap();
        assert_eq!(counts.get("0"), Some(&100));

        let one = apply_gate(&s, &Gate::X(0)).unwrap();
        let counts = sample_bitstrings(&one, 50, 3).unwrap();
        assert_eq!(counts.get("1"), Some(&50));
    }

    #[test]
    fn sampling_rejects_zero_shots() {
        let s = zero_state(1).unwrap();
        assert!(sample_bitstrings(&s, 0, 0).is_err());
    }

    // Binomial bound: p = 0.5, shots = 10000, 3σ ≈ 0.015, asserted band is wider.
    #[test]
    fn sampling_plus_state_frequency() {
        let s = apply_gate(&zero_state(1).unwrap(), &Gate::H(0)).unwrap();
        let counts = sample_bitstrings(&s, 10_000, 42).unwrap();
        let f = *counts.get("0").unwrap_or(&0) as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&f), "freq {f} outside [0.47, 0.53]");
    }

    #[test]
    fn sampling_matches_distribution_at_1e5_shots() {
        let c = CircuitSpec {
            n_qubits: 3,
            gates: vec![
                Gate::H(0),
                Gate::Ry(1, 0.9),
                Gate::Cx {
                    control: 0,
                    target: 2,
                },
                Gate::Phase(2, 0.4),
                Gate::Rx(2, 1.3),
            ],
        };
        let s = run_circuit(&c).unwrap();
        let shots = 100_000u64;
        let counts = sample_bitstrings(&s, shots, 7).unwrap();
        assert_eq!(counts.values().sum::<u64>(), shots);
        for idx in 0..s.dimension() {
            let p = s.probability(idx);
            let f = *counts.get(&bitstring(idx, 3)).unwrap_or(&0) as f64 / shots as f64;
            let bound = 5.0 * (p * (1.0 - p) / shots as f64).sqrt() + 10.0 / shots as f64;
            assert!((f - p).abs() <= bound, "basis {idx}: |{f} - {p}| > {bound}");
        }
    }

    #[test]
    fn bitstring_orders_qubit_zero_last() {
        // Basis index 1 means qubit 0 is set; it prints as the rightmost bit.
        assert_eq!(bitstring(1, 3), "001");
        assert_eq!(bitstring(4, 3), "100");
    }

    fn random_gate(rng: &mut ChaCha8Rng, n_qubits: usize) -> Gate {
        let a = rng.random_range(0..n_qubits);
        let mut b = rng.random_range(0..n_qubits);
        if a == b {
            b = (a + 1) % n_qubits;
        }
        let angle = rng.random::<f64>() * 12.0 - 6.0;
        match rng.random_range(0..8u8) {
            0 => Gate::H(a),
            1 => Gate::X(a),
            2 => Gate::Rx(a, angle),
            3 => Gate::Ry(a, angle),
            4 => Gate::Rz(a, angle),
            5 => Gate::Phase(a, angle),
            6 => Gate::Cx {
                control: a,
                target: b,
            },
            _ => Gate::Cp {
                control: a,
                target: b,
                angle,
            },
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn norm_preserved_by_random_circuits(
            n_qubits in 2usize..=6,
            seed in any::<u64>(),
            len in 0usize..=50,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gates = (0..len).map(|_| random_gate(&mut rng, n_qubits)).collect();
            let s = run_circuit(&CircuitSpec { n_qubits, gates }).unwrap();
            prop_assert!((s.norm() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn gate_then_inverse_is_identity(n_qubits in 2usize..=5, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // a random non-trivial starting state
            let prep: Vec<Gate> = (0..n_qubits)
                .flat_map(|q| vec![Gate::Ry(q, rng.random::<f64>() * 6.0), Gate::Phase(q, rng.random::<f64>() * 6.0)])
                .collect();
            let start = run_circuit(&CircuitSpec { n_qubits, gates: prep }).unwrap();
            for _ in 0..12 {
                let g = random_gate(&mut rng, n_qubits);
                let forward = apply_gate(&start, &g).unwrap();
                let back = apply_gate(&forward, &g.inverse()).unwrap();
                for (a, b) in back.amplitudes().iter().zip(start.amplitudes()) {
                    prop_assert!((a - b).norm() < 1e-10);
                }
            }
        }

        #[test]
        fn disjoint_gates_commute(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n_qubits = 4;
            let g1 = Gate::Ry(0, rng.random::<f64>() * 6.0);
            let g2 = Gate::Cp { control: 2, target: 3, angle: rng.random::<f64>() * 6.0 };
            let prep: Vec<Gate> = (0..n_qubits).map(Gate::H).collect();
            let start = run_circuit(&CircuitSpec { n_qubits, gates: prep }).unwrap();
            let ab = apply_gate(&apply_gate(&start, &g1).unwrap(), &g2).unwrap();
            let ba = apply_gate(&apply_gate(&start, &g2).unwrap(), &g1).unwrap();
            for (a, b) in ab.amplitudes().iter().zip(ba.amplitudes()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }

        #[test]
        fn inner_product_magnitude_is_phase_invariant(
            a in 0.0..6.3f64,
            b in 0.0..6.3f64,
            phase in 0.0..6.3f64,
        ) {
            let sa = run_circuit(&CircuitSpec { n_qubits: 1, gates: vec![Gate::Ry(0, a)] }).unwrap();
            let sb = run_circuit(&CircuitSpec { n_qubits: 1, gates: vec![Gate::Ry(0, b)] }).unwrap();
            let base = inner_product(&sa, &sb).unwrap().norm();
            let rot = Complex64::from_polar(1.0, phase);
            let sa2 = StateVector::from_amplitudes(sa.amplitudes().iter().map(|x| x * rot).collect()).unwrap();
            let sb2 = StateVector::from_amplitudes(sb.amplitudes().iter().map(|x| x * rot).collect()).unwrap();
            let shifted = inner_product(&sa2, &sb2).unwrap().norm();
            prop_assert!((base - shifted).abs() < 1e-12);
        }
    }
}
