//! Circuit builders that encode a scaled feature vector into a quantum state.
//!
//! Every builder is a pure function of its inputs: identical `(x, config,
//! theta)` always produce an identical `CircuitSpec`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector::{CircuitSpec, Gate};

/// Which qubit pairs receive two-qubit interaction blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntanglementPattern {
    #[default]
    Linear,
    Circular,
    Full,
}

impl EntanglementPattern {
    /// Ordered interaction pairs for `n` qubits. Circular appends the wrap
    /// pair after the linear chain; on 2 qubits the wrap duplicates `(0, 1)`
    /// and is omitted.
    pub fn pairs(&self, n_qubits: usize) -> Vec<(usize, usize)> {
        match self {
            EntanglementPattern::Linear => (0..n_qubits.saturating_sub(1))
                .map(|i| (i, i + 1))
                .collect(),
            EntanglementPattern::Circular => {
                let mut p = EntanglementPattern::Linear.pairs(n_qubits);
                if n_qubits > 2 {
                    p.push((n_qubits - 1, 0));
                }
                p
            }
            EntanglementPattern::Full => {
                let mut p = Vec::new();
                for i in 0..n_qubits {
                    for j in i + 1..n_qubits {
                        p.push((i, j));
                    }
                }
                p
            }
        }
    }

    pub fn pair_count(&self, n_qubits: usize) -> usize {
        self.pairs(n_qubits).len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Zz,
    Z,
    EfficientSu2,
    DenseAngle,
    Angle,
    Phase,
    Pauli,
}

impl MapKind {
    pub fn name(&self) -> &'static str {
        match self {
            MapKind::Zz => "zz",
            MapKind::Z => "z",
            MapKind::EfficientSu2 => "efficient_su2",
            MapKind::DenseAngle => "dense_angle",
            MapKind::Angle => "angle",
            MapKind::Phase => "phase",
            MapKind::Pauli => "pauli",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapConfig {
    pub map_kind: MapKind,
    pub n_qubits: usize,
    pub reps: usize,
    pub entanglement: EntanglementPattern,
    /// Pauli words over {X, Y, Z}; only read by the `pauli` kind.
    pub pauli_strings: Vec<String>,
    /// Seed for the fixed ansatz parameters; only read by `efficient_su2`.
    pub theta_seed: u64,
}

impl FeatureMapConfig {
    pub fn new(map_kind: MapKind, n_qubits: usize) -> Self {
        FeatureMapConfig {
            map_kind,
            n_qubits,
            reps: 1,
            entanglement: EntanglementPattern::Linear,
            pauli_strings: Vec::new(),
            theta_seed: 0,
        }
    }

    pub fn with_entanglement(mut self, entanglement: EntanglementPattern) -> Self {
        self.entanglement = entanglement;
        self
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    /// Feature dimension this map accepts for a `d`-dimensional input.
    pub fn expected_dimension(&self) -> Option<usize> {
        match self.map_kind {
            MapKind::DenseAngle => Some(2 * self.n_qubits),
            MapKind::EfficientSu2 => None, // any d ≤ slot count
            _ => Some(self.n_qubits),
        }
    }
}

/// Fixed ansatz parameters drawn once from a seeded generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaParameters {
    pub values: Vec<f64>,
    pub seed: u64,
}

impl ThetaParameters {
    pub fn empty() -> Self {
        ThetaParameters {
            values: Vec::new(),
            seed: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }
}

/// Draws `count` values uniformly from `[0, 2π)`, reproducible from `seed`.
pub fn generate_theta(seed: u64, count: usize) -> ThetaParameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..count).map(|_| rng.random::<f64>() * TAU).collect();
    ThetaParameters { values, seed }
}

/// Rotation-parameter slots of the hardware-efficient ansatz:
/// `reps` RY+RZ layers plus the final one, each with 2·n slots.
pub fn su2_slot_count(n_qubits: usize, reps: usize) -> usize {
    (reps + 1) * 2 * n_qubits
}

/// Theta values needed to fill the ansatz after `d` data features.
pub fn required_theta_count(config: &FeatureMapConfig, d: usize) -> Result<usize> {
    match config.map_kind {
        MapKind::EfficientSu2 => {
            let slots = su2_slot_count(config.n_qubits, config.reps);
            if d > slots {
                return Err(Error::invalid(format!(
                    "{d} features exceed the {slots} parameter slots of the ansatz"
                )));
            }
            Ok(slots - d)
        }
        _ => Ok(0),
    }
}

fn check_dimension(x: &[f64], expected: usize, map: &str) -> Result<()> {
    if x.len() != expected {
        return Err(Error::invalid(format!(
            "{map} expects {expected} features, got {}",
            x.len()
        )));
    }
    Ok(())
}

fn check_reps(config: &FeatureMapConfig) -> Result<()> {
    if config.reps < 1 {
        return Err(Error::invalid("reps must be ≥ 1"));
    }
    Ok(())
}

/// First-order Pauli-Z evolution: per rep, H on every qubit then a phase of
/// `2·x_i` on qubit i.
pub fn build_z_map(x: &[f64], config: &FeatureMapConfig) -> Result<CircuitSpec> {
    check_dimension(x, config.n_qubits, "z map")?;
    check_reps(config)?;
    let mut circuit = CircuitSpec::new(config.n_qubits);
    for _ in 0..config.reps {
        for q in 0..config.n_qubits {
            circuit.push(Gate::H(q));
        }
        for (q, &xi) in x.iter().enumerate() {
            circuit.push(Gate::Phase(q, 2.0 * xi));
        }
    }
    Ok(circuit)
}

/// Second-order Pauli-Z evolution: the Z layer plus, for each entanglement
/// pair `(i, j)`, a CX–P–CX block carrying the phase `2·(π−x_i)·(π−x_j)`.
pub fn build_zz_map(x: &[f64], config: &FeatureMapConfig) -> Result<CircuitSpec> {
    if config.n_qubits < 2 {
        return Err(Error::invalid("zz map needs at least 2 qubits"));
    }
    check_dimension(x, config.n_qubits, "zz map")?;
    check_reps(config)?;
    let pairs = config.entanglement.pairs(config.n_qubits);
    let mut circuit = CircuitSpec::new(config.n_qubits);
    for _ in 0..config.reps {
        for q in 0..config.n_qubits {
            circuit.push(Gate::H(q));
        }
        for (q, &xi) in x.iter().enumerate() {
            circuit.push(Gate::Phase(q, 2.0 * xi));
        }
        for &(i, j) in &pairs {
            circuit.push(Gate::Cx {
                control: i,
                target: j,
            });
            circuit.push(Gate::Phase(j, 2.0 * (PI - x[i]) * (PI - x[j])));
            circuit.push(Gate::Cx {
                control: i,
                target: j,
            });
        }
    }
    Ok(circuit)
}

/// Hardware-efficient ansatz: alternating RY+RZ rotation layers and CX
/// ladders, ending on a rotation layer. Parameter slots are filled in circuit
/// order, data first, then theta.
pub fn build_efficient_su2(
    x: &[f64],
    theta: &ThetaParameters,
    config: &FeatureMapConfig,
) -> Result<CircuitSpec> {
    check_reps(config)?;
    let slots = su2_slot_count(config.n_qubits, config.reps);
    let provided = x.len() + theta.values.len();
    if provided != slots {
        return Err(Error::invalid(format!(
            "ansatz has {slots} parameter slots, got {} ({} data + {} theta)",
            provided,
            x.len(),
            theta.values.len()
        )));
    }
    let pairs = config.entanglement.pairs(config.n_qubits);
    let mut params = x.iter().chain(theta.values.iter());
    let mut next = || *params.next().expect("slot count checked above");

    let mut circuit = CircuitSpec::new(config.n_qubits);
    let rotation_layer = |circuit: &mut CircuitSpec, next: &mut dyn FnMut() -> f64| {
        for q in 0..config.n_qubits {
            circuit.push(Gate::Ry(q, next()));
        }
        for q in 0..config.n_qubits {
            circuit.push(Gate::Rz(q, next()));
        }
    };
    for _ in 0..config.reps {
        rotation_layer(&mut circuit, &mut next);
        for &(i, j) in &pairs {
            circuit.push(Gate::Cx {
                control: i,
                target: j,
            });
        }
    }
    rotation_layer(&mut circuit, &mut next);
    Ok(circuit)
}

/// One RY rotation per qubit, no entanglement.
pub fn build_angle_encoding(x: &[f64], config: &FeatureMapConfig) -> Result<CircuitSpec> {
    check_dimension(x, config.n_qubits, "angle encoding")?;
    let mut circuit = CircuitSpec::new(config.n_qubits);
    for (q, &xi) in x.iter().enumerate() {
        circuit.push(Gate::Ry(q, xi));
    }
    Ok(circuit)
}

/// Two features per qubit: RY(x_{2i}) then a phase of x_{2i+1}.
pub fn build_dense_angle(x: &[f64], config: &FeatureMapConfig) -> Result<CircuitSpec> {
    if !x.len().is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "dense angle encoding needs an even feature count, got {}",
            x.len()
        )));
    }
    check_dimension(x, 2 * config.n_qubits, "dense angle encoding")?;
    let mut circuit = CircuitSpec::new(config.n_qubits);
    for q in 0..config.n_qubits {
        circuit.push(Gate::Ry(q, x[2 * q]));
        circuit.push(Gate::Phase(q, x[2 * q + 1]));
    }
    Ok(circuit)
}

/// H on each qubit then a phase of x_i.
pub fn build_phase_encoding(x: &[f64], config: &FeatureMapConfig) -> Result<CircuitSpec> {
    check_dimension(x, config.n_qubits, "phase encoding")?;
    let mut circuit = CircuitSpec::new(config.n_qubits);
    for q in 0..config.n_qubits {
        circuit.push(Gate::H(q));
    }
    for (q, &xi) in x.iter().enumerate() {
        circuit.push(Gate::Phase(q, xi));
    }
    Ok(circuit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PauliLetter {
    X,
    Y,
    Z,
}

fn parse_pauli_word(word: &str, n_qubits: usize) -> Result<Vec<PauliLetter>> {
    if word.is_empty() || word.len() > n_qubits {
        return Err(Error::invalid(format!(
            "pauli word '{word}' must have length 1..={n_qubits}"
        )));
    }
    word.chars()
        .map(|c| match c {
            'X' => Ok(PauliLetter::X),
            'Y' => Ok(PauliLetter::Y),
            'Z' => Ok(PauliLetter::Z),
            other => Err(Error::invalid(format!(
                "pauli word '{word}' contains invalid letter '{other}'"
            ))),
        })
        .collect()
}

/// Qubit subsets a word of length `m` acts on: singletons for m = 1, the
/// entanglement pattern's pairs for m = 2, and sliding windows (or all
/// ascending combinations for `full`) beyond that.
fn pauli_subsets(m: usize, n: usize, pattern: EntanglementPattern) -> Vec<Vec<usize>> {
    match m {
        1 => (0..n).map(|q| vec![q]).collect(),
        2 => pattern
            .pairs(n)
            .into_iter()
            .map(|(i, j)| vec![i, j])
            .collect(),
        _ => match pattern {
            EntanglementPattern::Full => {
                let mut out = Vec::new();
                let mut combo: Vec<usize> = (0..m).collect();
                loop {
                    out.push(combo.clone());
                    // next ascending m-combination of 0..n
                    let mut i = m;
                    loop {
                        if i == 0 {
                            return out;
                        }
                        i -= 1;
                        if combo[i] < n - (m - i) {
                            combo[i] += 1;
                            for j in i + 1..m {
                                combo[j] = combo[j - 1] + 1;
                            }
                            break;
                        }
                    }
                }
            }
            EntanglementPattern::Linear => (0..=n - m).map(|s| (s..s + m).collect()).collect(),
            EntanglementPattern::Circular => {
                if n == m {
                    vec![(0..n).collect()]
                } else {
                    (0..n)
                        .map(|s| (0..m).map(|o| (s + o) % n).collect())
                        .collect()
                }
            }
        },
    }
}

/// General Pauli evolution: per rep, H on all qubits, then for every word and
/// every matching qubit subset a basis-changed CX-chain phase block. The
/// phase is `2·x_q` for single-qubit words and `2·Π(π−x_q)` otherwise.
pub fn build_pauli_map(x: &[f64], config: &FeatureMapConfig) -> Result<CircuitSpec> {
    check_dimension(x, config.n_qubits, "pauli map")?;
    check_reps(config)?;
    if config.pauli_strings.is_empty() {
        return Err(Error::invalid("pauli map needs at least one pauli word"));
    }
    let words: Vec<Vec<PauliLetter>> = config
        .pauli_strings
        .iter()
        .map(|w| parse_pauli_word(w, config.n_qubits))
        .collect::<Result<_>>()?;

    let mut circuit = CircuitSpec::new(config.n_qubits);
    for _ in 0..config.reps {
        for q in 0..config.n_qubits {
            circuit.push(Gate::H(q));
        }
        for word in &words {
            for subset in pauli_subsets(word.len(), config.n_qubits, config.entanglement) {
                let angle = if subset.len() == 1 {
                    2.0 * x[subset[0]]
                } else {
                    2.0 * subset.iter().map(|&q| PI - x[q]).product::<f64>()
                };
                for (&letter, &q) in word.iter().zip(&subset) {
                    match letter {
                        PauliLetter::X => circuit.push(Gate::H(q)),
                        PauliLetter::Y => circuit.push(Gate::Rx(q, FRAC_PI_2)),
                        PauliLetter::Z => {}
                    }
                }
                for w in subset.windows(2) {
                    circuit.push(Gate::Cx {
                        control: w[0],
                        target: w[1],
                    });
                }
                circuit.push(Gate::Phase(*subset.last().unwrap(), angle));
                for w in subset.windows(2).rev() {
                    circuit.push(Gate::Cx {
                        control: w[0],
                        target: w[1],
                    });
                }
                for (&letter, &q) in word.iter().zip(&subset) {
                    match letter {
                        PauliLetter::X => circuit.push(Gate::H(q)),
                        PauliLetter::Y => circuit.push(Gate::Rx(q, -FRAC_PI_2)),
                        PauliLetter::Z => {}
                    }
                }
            }
        }
    }
    Ok(circuit)
}

/// Dispatches to the builder for `config.map_kind`.
pub fn build_circuit(
    x: &[f64],
    config: &FeatureMapConfig,
    theta: &ThetaParameters,
) -> Result<CircuitSpec> {
    match config.map_kind {
        MapKind::Z => build_z_map(x, config),
        MapKind::Zz => build_zz_map(x, config),
        MapKind::EfficientSu2 => build_efficient_su2(x, theta, config),
        MapKind::Angle => build_angle_encoding(x, config),
        MapKind::DenseAngle => build_dense_angle(x, config),
        MapKind::Phase => build_phase_encoding(x, config),
        MapKind::Pauli => build_pauli_map(x, config),
    }
}
