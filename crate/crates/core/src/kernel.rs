//! Pairwise fidelity kernels: exact statevector overlaps or shot-sampled
//! estimates from the inversion-test circuit, plus a binary on-disk cache.

use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_maps::{FeatureMapConfig, ThetaParameters, build_circuit};
use crate::fingerprint::Fingerprint;
use crate::statevector::{StateVector, inner_product, run_circuit, sample_bitstrings};

const CACHE_MAGIC: &[u8; 8] = b"QKMKRN01";

/// How pairwise fidelities are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    Exact,
    Shots { shots: u64, seed: u64 },
}

/// Symmetric matrix of pairwise fidelities with provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
    pub map_config: FeatureMapConfig,
    pub mode: KernelMode,
    pub dataset_fingerprint: Fingerprint,
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Minimum and mean over the off-diagonal entries.
    pub fn off_diagonal_stats(&self) -> (f64, f64) {
        let mut min = f64::INFINITY;
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    let v = self.get(i, j);
                    min = min.min(v);
                    sum += v;
                    count += 1;
                }
            }
        }
        if count == 0 {
            (0.0, 0.0)
        } else {
            (min, sum / count as f64)
        }
    }

    pub fn is_symmetric(&self) -> bool {
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.get(i, j).to_bits() != self.get(j, i).to_bits() {
                    return false;
                }
            }
        }
        true
    }
}

/// `1 − fidelity` entrywise.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::invalid(format!(
                "distance matrix needs {} values for n = {n}, got {}",
                n * n,
                values.len()
            )));
        }
        Ok(DistanceMatrix { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Encodes a feature vector through the configured map.
pub fn encode_state(
    x: &[f64],
    config: &FeatureMapConfig,
    theta: &ThetaParameters,
) -> Result<StateVector> {
    run_circuit(&build_circuit(x, config, theta)?)
}

/// `|⟨ψ(x)|ψ(y)⟩|²` from exact statevectors.
pub fn fidelity_exact(
    x: &[f64],
    y: &[f64],
    config: &FeatureMapConfig,
    theta: &ThetaParameters,
) -> Result<f64> {
    let a = encode_state(x, config, theta)?;
    let b = encode_state(y, config, theta)?;
    Ok(inner_product(&a, &b)?.norm_sqr())
}

/// The overlap circuit `U(y)† · U(x)` applied to `|0…0⟩`; the all-zeros
/// outcome probability equals the fidelity.
pub fn overlap_circuit(
    x: &[f64],
    y: &[f64],
    config: &FeatureMapConfig,
    theta: &ThetaParameters,
) -> Result<crate::statevector::CircuitSpec> {
    let mut circuit = build_circuit(x, config, theta)?;
    let adjoint = build_circuit(y, config, theta)?.inverted();
    circuit.gates.extend(adjoint.gates);
    Ok(circuit)
}

/// Shot-sampled fidelity estimate: runs the overlap circuit, measures all
/// qubits, and returns the all-zeros frequency.
pub fn fidelity_inversion_test(
    x: &[f64],
    y: &[f64],
    config: &FeatureMapConfig,
    theta: &ThetaParameters,
    shots: u64,
    seed: u64,
) -> Result<f64> {
    if shots == 0 {
        return Err(Error::invalid("shots must be ≥ 1"));
    }
    let circuit = overlap_circuit(x, y, config, theta)?;
    let state = run_circuit(&circuit)?;
    let counts = sample_bitstrings(&state, shots, seed)?;
    let zeros = "0".repeat(config.n_qubits);
    Ok(*counts.get(&zeros).unwrap_or(&0) as f64 / shots as f64)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-pair sampling seed; independent of evaluation order.
pub fn pair_seed(seed: u64, i: usize, j: usize) -> u64 {
    seed ^ splitmix64(((i as u64) << 32) | j as u64)
}

/// Computes the upper triangle with the selected mode, mirrors it, and sets
/// the diagonal to 1. Pair evaluations run in parallel; per-pair shot seeds
/// make the result independent of scheduling.
pub fn kernel_matrix(
    data: &[Vec<f64>],
    config: &FeatureMapConfig,
    theta: &ThetaParameters,
    mode: KernelMode,
    dataset_fingerprint: Fingerprint,
) -> Result<KernelMatrix> {
    let n = data.len();
    if n == 0 {
        return Err(Error::invalid("kernel matrix needs at least one data row"));
    }

    let pair_values: Vec<(usize, usize, f64)> = match mode {
        KernelMode::Exact => {
            let states: Vec<StateVector> = data
                .par_iter()
                .enumerate()
                .map(|(i, row)| {
                    encode_state(row, config, theta)
                        .map_err(|e| e.in_stage(&format!("encoding row {i}")))
                })
                .collect::<Result<_>>()?;
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect();
            pairs
                .par_iter()
                .map(|&(i, j)| {
                    let f = inner_product(&states[i], &states[j])?.norm_sqr();
                    Ok((i, j, f))
                })
                .collect::<Result<_>>()?
        }
        KernelMode::Shots { shots, seed } => {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect();
            pairs
                .par_iter()
                .map(|&(i, j)| {
                    let f = fidelity_inversion_test(
                        &data[i],
                        &data[j],
                        config,
                        theta,
                        shots,
                        pair_seed(seed, i, j),
                    )
                    .map_err(|e| e.in_stage(&format!("pair ({i}, {j})")))?;
                    Ok((i, j, f))
                })
                .collect::<Result<_>>()?
        }
    };

    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
    }
    for (i, j, f) in pair_values {
        values[i * n + j] = f;
        values[j * n + i] = f;
    }

    Ok(KernelMatrix {
        n,
        values,
        map_config: config.clone(),
        mode,
        dataset_fingerprint,
    })
}

/// `1 − kernel` entrywise.
pub fn to_distance(kernel: &KernelMatrix) -> DistanceMatrix {
    DistanceMatrix {
        n: kernel.n,
        values: kernel.values.iter().map(|v| 1.0 - v).collect(),
    }
}

/// Canonical digest of a feature-map configuration; part of the cache key.
pub fn config_digest(config: &FeatureMapConfig) -> Fingerprint {
    let json = serde_json::to_vec(config).expect("feature map config serializes");
    Fingerprint::of_bytes(&json)
}

fn mode_tag(mode: KernelMode) -> (u8, u64, u64) {
    match mode {
        KernelMode::Exact => (0, 0, 0),
        KernelMode::Shots { shots, seed } => (1, shots, seed),
    }
}

/// Writes the cache file: fixed header (magic, version, mode, n, config
/// digest, dataset fingerprint) followed by row-major little-endian f64 bits.
pub fn save_kernel(kernel: &KernelMatrix, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + 1 + 8 * 3 + 64 + kernel.values.len() * 8);
    bytes.extend_from_slice(CACHE_MAGIC);
    let (tag, shots, seed) = mode_tag(kernel.mode);
    bytes.push(tag);
    bytes.extend_from_slice(&shots.to_le_bytes());
    bytes.extend_from_slice(&seed.to_le_bytes());
    bytes.extend_from_slice(&(kernel.n as u64).to_le_bytes());
    bytes.extend_from_slice(&config_digest(&kernel.map_config).0);
    bytes.extend_from_slice(&kernel.dataset_fingerprint.0);
    for v in &kernel.values {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    if let Some(parent) = path.parent()
        && !parent.as_os_str().is_empty()
    {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Reloads a cached kernel, verifying mode, config digest, and dataset
/// fingerprint against the request. Any mismatch or corruption is a
/// stale-cache error so callers can recompute.
pub fn load_kernel(
    path: &Path,
    config: &FeatureMapConfig,
    mode: KernelMode,
    dataset_fingerprint: &Fingerprint,
) -> Result<KernelMatrix> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == ErrorKind::NotFound {
            Error::NotFound(path.to_path_buf())
        } else {
            Error::Io(e)
        }
    })?;

    let header_len = 8 + 1 + 8 + 8 + 8 + 32 + 32;
    if bytes.len() < header_len || &bytes[..8] != CACHE_MAGIC {
        return Err(Error::StaleCache(format!(
            "{} is not a kernel cache file",
            path.display()
        )));
    }
    let mut off = 8;
    let read_u64 =
        |bytes: &[u8], off: usize| u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let tag = bytes[off];
    off += 1;
    let shots = read_u64(&bytes, off);
    off += 8;
    let seed = read_u64(&bytes, off);
    off += 8;
    let n = read_u64(&bytes, off) as usize;
    off += 8;
    let mut digest = [0u8; 32];
    digest.copy_from_slice(&bytes[off..off + 32]);
    off += 32;
    let mut fp = [0u8; 32];
    fp.copy_from_slice(&bytes[off..off + 32]);
    off += 32;

    let stored_mode = match tag {
        0 => KernelMode::Exact,
        1 => KernelMode::Shots { shots, seed },
        other => {
            return Err(Error::StaleCache(format!(
                "unknown kernel mode tag {other}"
            )));
        }
    };
    if stored_mode != mode {
        return Err(Error::StaleCache(format!(
            "cached mode {stored_mode:?} does not match requested {mode:?}"
        )));
    }
    if Fingerprint(digest) != config_digest(config) {
        return Err(Error::StaleCache(
            "cached map configuration does not match the request".to_string(),
        ));
    }
    if Fingerprint(fp) != *dataset_fingerprint {
        return Err(Error::StaleCache(
            "cached dataset fingerprint does not match the request".to_string(),
        ));
    }
    if bytes.len() != off + n * n * 8 {
        return Err(Error::StaleCache(format!(
            "kernel cache payload is truncated (expected {} values)",
            n * n
        )));
    }

    let values = bytes[off..]
        .chunks_exact(8)
        .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Ok(KernelMatrix {
        n,
        values,
        map_config: config.clone(),
        mode,
        dataset_fingerprint: *dataset_fingerprint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_maps::{EntanglementPattern, MapKind, generate_theta, su2_slot_count};
    use crate::statevector::{CircuitSpec, Gate, zero_state};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn angle_config(n: usize) -> FeatureMapConfig {
        FeatureMapConfig::new(MapKind::Angle, n)
    }

    #[test]
    fn fidelity_exact_examples() {
        let config = angle_config(1);
        let theta = ThetaParameters::empty();
        let f = fidelity_exact(&[0.9], &[0.9], &config, &theta).unwrap();
        assert!((f - 1.0).abs() < 1e-12);

        let f = fidelity_exact(&[0.0], &[PI], &config, &theta).unwrap();
        assert!(f < 1e-12, "orthogonal states, got {f}");

        let f = fidelity_exact(&[0.0], &[PI / 2.0], &config, &theta).unwrap();
        assert!((f - 0.5).abs() < 1e-12);
    }

    #[test]
    fn inversion_test_examples() {
        let config = angle_config(1);
        let theta = ThetaParameters::empty();

        let f = fidelity_inversion_test(&[0.7], &[0.7], &config, &theta, 256, 1).unwrap();
        assert_eq!(f, 1.0);

        let f = fidelity_inversion_test(&[0.0], &[PI], &config, &theta, 1000, 1).unwrap();
        assert_eq!(f, 0.0);

        let f = fidelity_inversion_test(&[0.0], &[PI / 2.0], &config, &theta, 100_000, 5).unwrap();
        assert!((f - 0.5).abs() <= 3.0 * (0.25f64 / 100_000.0).sqrt());

        assert!(fidelity_inversion_test(&[0.0], &[1.0], &config, &theta, 0, 1).is_err());
    }

    // Estimator consistency on a lighter budget than the acceptance run.
    #[test]
    fn inversion_test_is_consistent_with_exact() {
        let config =
            FeatureMapConfig::new(MapKind::Zz, 2).with_entanglement(EntanglementPattern::Full);
        let theta = ThetaParameters::empty();
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..10 {
            let x: Vec<f64> = (0..2).map(|_| rng.random::<f64>() * 2.0).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.random::<f64>() * 2.0).collect();
            let exact = fidelity_exact(&x, &y, &config, &theta).unwrap();
            let shots = 4096u64;
            let seeds = 20u64;
            let mean: f64 = (0..seeds)
                .map(|s| fidelity_inversion_test(&x, &y, &config, &theta, shots, s).unwrap())
                .sum::<f64>()
                / seeds as f64;
            let bound = 4.0 * (exact * (1.0 - exact) / (seeds * shots) as f64).sqrt() + 1e-3;
            assert!(
                (mean - exact).abs() <= bound,
                "|{mean} - {exact}| > {bound}"
            );
        }
    }

    // Adjoint correctness: gates then reversed-inverted gates restore |0…0⟩.
    #[test]
    fn adjoint_restores_zero_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let n = 3;
            let gates: Vec<Gate> = (0..15)
                .map(|_| match rng.random_range(0..5u8) {
                    0 => Gate::H(rng.random_range(0..n)),
                    1 => Gate::Ry(rng.random_range(0..n), rng.random::<f64>() * 6.0),
                    2 => Gate::Phase(rng.random_range(0..n), rng.random::<f64>() * 6.0),
                    3 => {
                        let c = rng.random_range(0..n);
                        Gate::Cx {
                            control: c,
                            target: (c + 1) % n,
                        }
                    }
                    _ => {
                        let c = rng.random_range(0..n);
                        Gate::Cp {
                            control: c,
                            target: (c + 1) % n,
                            angle: rng.random::<f64>() * 6.0,
                        }
                    }
                })
                .collect();
            let mut circuit = CircuitSpec { n_qubits: n, gates };
            let adjoint = circuit.inverted();
            circuit.gates.extend(adjoint.gates);
            let state = run_circuit(&circuit).unwrap();
            let p0 = state.probability(0);
            assert!((p0 - 1.0).abs() < 1e-10, "p0 = {p0}");
        }
    }

    fn tiny_fingerprint() -> Fingerprint {
        Fingerprint::of_bytes(b"test-data")
    }

    #[test]
    fn kernel_matrix_examples() {
        let config = angle_config(1);
        let theta = ThetaParameters::empty();

        let k = kernel_matrix(
            &[vec![0.4]],
            &config,
            &theta,
            KernelMode::Exact,
            tiny_fingerprint(),
        )
        .unwrap();
        assert_eq!(k.n(), 1);
        assert_eq!(k.get(0, 0), 1.0);

        let k = kernel_matrix(
            &[vec![0.4], vec![0.4]],
            &config,
            &theta,
            KernelMode::Exact,
            tiny_fingerprint(),
        )
        .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((k.get(i, j) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_matrix_is_symmetric_and_bounded() {
        let config =
            FeatureMapConfig::new(MapKind::Zz, 3).with_entanglement(EntanglementPattern::Full);
        let theta = ThetaParameters::empty();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<Vec<f64>> = (0..25)
            .map(|_| (0..3).map(|_| rng.random::<f64>() * 3.0).collect())
            .collect();
        let k = kernel_matrix(
            &data,
            &config,
            &theta,
            KernelMode::Exact,
            tiny_fingerprint(),
        )
        .unwrap();
        assert!(k.is_symmetric());
        for i in 0..k.n() {
            assert!((k.get(i, i) - 1.0).abs() < 1e-12);
            for j in 0..k.n() {
                let v = k.get(i, j);
                assert!(
                    (-1e-12..=1.0 + 1e-12).contains(&v),
                    "entry {v} out of range"
                );
            }
        }
    }

    #[test]
    fn shot_kernel_is_order_independent_and_floored() {
        let config = angle_config(2);
        let theta = ThetaParameters::empty();
        let data: Vec<Vec<f64>> = vec![vec![0.1, 0.4], vec![2.0, 1.1], vec![0.9, 2.4]];
        let mode = KernelMode::Shots {
            shots: 512,
            seed: 3,
        };
        let a = kernel_matrix(&data, &config, &theta, mode, tiny_fingerprint()).unwrap();
        let b = kernel_matrix(&data, &config, &theta, mode, tiny_fingerprint()).unwrap();
        assert_eq!(a.values(), b.values());
        assert!(a.is_symmetric());
        for i in 0..3 {
            assert_eq!(a.get(i, i), 1.0);
            for j in 0..3 {
                assert!(a.get(i, j) >= 0.0);
            }
        }
    }

    #[test]
    fn to_distance_examples() {
        let config = angle_config(1);
        let theta = ThetaParameters::empty();
        let k = kernel_matrix(
            &[vec![0.0], vec![PI]],
            &config,
            &theta,
            KernelMode::Exact,
            tiny_fingerprint(),
        )
        .unwrap();
        let d = to_distance(&k);
        assert!(d.get(0, 0).abs() < 1e-12);
        assert!((d.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((d.get(1, 0) - 1.0).abs() < 1e-12);

        let k = kernel_matrix(
            &[vec![0.0], vec![PI / 2.0]],
            &config,
            &theta,
            KernelMode::Exact,
            tiny_fingerprint(),
        )
        .unwrap();
        let d = to_distance(&k);
        assert!((d.get(0, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cache_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kernel.bin");
        let config = angle_config(2);
        let theta = ThetaParameters::empty();
        let data: Vec<Vec<f64>> = vec![vec![0.3, 1.9], vec![1.4, 0.2], vec![2.2, 2.9]];
        let fp = tiny_fingerprint();
        let k = kernel_matrix(&data, &config, &theta, KernelMode::Exact, fp).unwrap();
        save_kernel(&k, &path).unwrap();
        let loaded = load_kernel(&path, &config, KernelMode::Exact, &fp).unwrap();
        assert_eq!(k.values(), loaded.values());
        assert_eq!(k.mode, loaded.mode);
        assert_eq!(k.dataset_fingerprint, loaded.dataset_fingerprint);
        assert_eq!(k.map_config, loaded.map_config);

        // shot-mode metadata (shots, seed) survives the file too
        let mode = KernelMode::Shots {
            shots: 4096,
            seed: 17,
        };
        let k = kernel_matrix(&data, &config, &theta, mode, fp).unwrap();
        save_kernel(&k, &path).unwrap();
        let loaded = load_kernel(&path, &config, mode, &fp).unwrap();
        assert_eq!(k.values(), loaded.values());
        assert_eq!(loaded.mode, mode);
    }

    #[test]
    fn cache_guards() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kernel.bin");
        let config = angle_config(1);
        let theta = ThetaParameters::empty();
        let fp = tiny_fingerprint();
        let k = kernel_matrix(
            &[vec![0.2], vec![1.0]],
            &config,
            &theta,
            KernelMode::Exact,
            fp,
        )
        .unwrap();
        save_kernel(&k, &path).unwrap();

        // wrong dataset fingerprint
        let wrong = Fingerprint::of_bytes(b"other-data");
        assert!(matches!(
            load_kernel(&path, &config, KernelMode::Exact, &wrong),
            Err(Error::StaleCache(_))
        ));

        // wrong mode
        assert!(matches!(
            load_kernel(
                &path,
                &config,
                KernelMode::Shots { shots: 64, seed: 0 },
                &fp
            ),
            Err(Error::StaleCache(_))
        ));

        // wrong map config
        let other = angle_config(1).with_reps(2);
        assert!(matches!(
            load_kernel(&path, &other, KernelMode::Exact, &fp),
            Err(Error::StaleCache(_))
        ));

        // missing file
        assert!(matches!(
            load_kernel(
                &dir.path().join("nope.bin"),
                &config,
                KernelMode::Exact,
                &fp
            ),
            Err(Error::NotFound(_))
        ));

        // corrupted payload
        std::fs::write(&path, b"garbage").unwrap();
        assert!(matches!(
            load_kernel(&path, &config, KernelMode::Exact, &fp),
            Err(Error::StaleCache(_))
        ));
    }

    #[test]
    fn su2_overlap_of_identical_inputs_is_identity() {
        let config = FeatureMapConfig::new(MapKind::EfficientSu2, 2);
        let theta = generate_theta(3, su2_slot_count(2, 1) - 4);
        let x = [0.5, 1.0, 1.5, 2.0];
        let c = overlap_circuit(&x, &x, &config, &theta).unwrap();
        let s = run_circuit(&c).unwrap();
        let zero = zero_state(2).unwrap();
        let f = inner_product(&zero, &s).unwrap().norm_sqr();
        assert!((f - 1.0).abs() < 1e-10);
    }
}
