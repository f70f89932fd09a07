//! K-means variants sharing initialization and convergence machinery: the
//! squared-Euclidean baseline, the fidelity-similarity loop (centroids stay
//! classical mean vectors and are re-encoded every iteration), and a
//! medoid-style loop over a precomputed distance matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_maps::{FeatureMapConfig, ThetaParameters};
use crate::kernel::{DistanceMatrix, KernelMode, encode_state, fidelity_inversion_test, pair_seed};
use crate::statevector::{StateVector, inner_product};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    #[default]
    RandomPoints,
    KmeansPp,
    FarthestFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    /// Cluster index in `0..k` per data point.
    pub labels: Vec<usize>,
    /// Final centroids in feature space; empty for the precomputed-matrix
    /// path, which reports `medoids` instead.
    pub centroids: Vec<Centroid>,
    /// Representative data indices when clustering ran on a precomputed
    /// distance matrix.
    pub medoids: Option<Vec<usize>>,
    pub iterations_run: usize,
    pub converged: bool,
    /// Per-iteration mean assigned similarity (fidelity loop) or mean
    /// squared / precomputed distance (other loops).
    pub similarity_trace: Vec<f64>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn validate_common(n: usize, k: usize, t_max: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be ≥ 1"));
    }
    if k > n {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the number of points ({n})"
        )));
    }
    if t_max == 0 {
        return Err(Error::invalid("t_max must be ≥ 1"));
    }
    Ok(())
}

/// Chooses `k` distinct data points as initial centroids, deterministic for
/// a given seed.
pub fn init_centroids(
    data: &[Vec<f64>],
    k: usize,
    strategy: InitStrategy,
    seed: u64,
) -> Result<Vec<Centroid>> {
    let n = data.len();
    validate_common(n, k, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let indices: Vec<usize> = match strategy {
        InitStrategy::RandomPoints => rand::seq::index::sample(&mut rng, n, k).into_vec(),
        InitStrategy::KmeansPp => {
            let mut chosen = vec![rng.random_range(0..n)];
            while chosen.len() < k {
                let weights: Vec<f64> = (0..n)
                    .map(|i| {
                        if chosen.contains(&i) {
                            0.0
                        } else {
                            chosen
                                .iter()
                                .map(|&c| squared_distance(&data[i], &data[c]))
                                .fold(f64::INFINITY, f64::min)
                        }
                    })
                    .collect();
                let total: f64 = weights.iter().sum();
                let next = if total > 0.0 {
                    let r = rng.random::<f64>() * total;
                    let mut acc = 0.0;
                    let mut pick = None;
                    for (i, &w) in weights.iter().enumerate() {
                        acc += w;
                        if w > 0.0 && r < acc {
                            pick = Some(i);
                            break;
                        }
                    }
                    pick.unwrap_or_else(|| (0..n).find(|i| !chosen.contains(i)).expect("k ≤ n"))
                } else {
                    // all remaining points coincide with chosen centroids
                    (0..n).find(|i| !chosen.contains(i)).expect("k ≤ n")
                };
                chosen.push(next);
            }
            chosen
        }
        InitStrategy::FarthestFirst => {
            // deterministic start at index 0, then greedy max-min distance
            let mut chosen = vec![0usize];
            while chosen.len() < k {
                let mut best = None;
                let mut best_d = -1.0;
                for i in 0..n {
                    if chosen.contains(&i) {
                        continue;
                    }
                    let d = chosen
                        .iter()
                        .map(|&c| squared_distance(&data[i], &data[c]))
                        .fold(f64::INFINITY, f64::min);
                    if d > best_d {
                        best_d = d;
                        best = Some(i);
                    }
                }
                chosen.push(best.expect("k ≤ n"));
            }
            chosen
        }
    };

    Ok(indices
        .into_iter()
        .map(|i| Centroid {
            vector: data[i].clone(),
        })
        .collect())
}

/// Argmax with ties broken toward the lower index.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (j, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = j;
        }
    }
    best
}

/// Reassigns, for each empty cluster in ascending order, the point with the
/// lowest assigned score (ties to the lower point index) as a new singleton
/// centroid. Points that are sole members of their cluster are not eligible.
/// Returns the reassigned point per repaired cluster.
fn repair_empty_clusters(
    labels: &mut [usize],
    assigned_score: &mut [f64],
    k: usize,
    self_score: f64,
) -> Vec<(usize, usize)> {
    let mut moved = Vec::new();
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = (0..k).find(|&j| sizes[j] == 0 && !moved.iter().any(|&(c, _)| c == j))
        else {
            break;
        };
        let mut pick = None;
        for (p, &l) in labels.iter().enumerate() {
            if sizes[l] < 2 {
                continue;
            }
            match pick {
                None => pick = Some(p),
                Some(q) if assigned_score[p] < assigned_score[q] => pick = Some(p),
                _ => {}
            }
        }
        match pick {
            Some(p) => {
                labels[p] = empty;
                assigned_score[p] = self_score;
                moved.push((empty, p));
            }
            None => break,
        }
    }
    moved
}

/// Alternates nearest-centroid assignment (squared Euclidean, ties to the
/// lower cluster index) and mean updates until labels stop changing or
/// `t_max` passes have run.
pub fn classical_kmeans_from(
    data: &[Vec<f64>],
    initial: Vec<Centroid>,
    t_max: usize,
) -> Result<ClusteringResult> {
    let n = data.len();
    let k = initial.len();
    validate_common(n, k, t_max)?;
    let mut centroids = initial;
    let mut previous: Option<Vec<usize>> = None;
    let mut trace = Vec::new();
    let mut iterations_run = 0;
    let mut converged = false;

    for _ in 1..=t_max {
        iterations_run += 1;
        let mut labels = vec![0usize; n];
        let mut assigned = vec![0.0f64; n];
        for (i, point) in data.iter().enumerate() {
            let scores: Vec<f64> = centroids
                .iter()
                .map(|c| -squared_distance(point, &c.vector))
                .collect();
            let j = argmax(&scores);
            labels[i] = j;
            assigned[i] = scores[j];
        }
        for (cluster, point) in repair_empty_clusters(&mut labels, &mut assigned, k, 0.0) {
            centroids[cluster].vector = data[point].clone();
        }
        trace.push(assigned.iter().map(|s| -s).sum::<f64>() / n as f64);

        if previous.as_deref() == Some(&labels) {
            converged = true;
            break;
        }
        // mean update; repaired singletons fall out naturally
        let mut sums = vec![vec![0.0; data[0].len()]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(&data[i]) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j].vector = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        previous = Some(labels);
    }

    Ok(ClusteringResult {
        labels: previous.unwrap_or_default(),
        centroids,
        medoids: None,
        iterations_run,
        converged,
        similarity_trace: trace,
    })
}

pub fn classical_kmeans(
    data: &[Vec<f64>],
    k: usize,
    t_max: usize,
    strategy: InitStrategy,
    seed: u64,
) -> Result<ClusteringResult> {
    let initial = init_centroids(data, k, strategy, seed)?;
    classical_kmeans_from(data, initial, t_max)
}

/// Per-point similarities to one centroid under the selected kernel mode.
struct FidelityEngine<'a> {
    data: &'a [Vec<f64>],
    config: &'a FeatureMapConfig,
    theta: &'a ThetaParameters,
    mode: KernelMode,
    /// Encoded data states, reused across iterations in exact mode.
    states: Option<Vec<StateVector>>,
}

impl<'a> FidelityEngine<'a> {
    fn new(
        data: &'a [Vec<f64>],
        config: &'a FeatureMapConfig,
        theta: &'a ThetaParameters,
        mode: KernelMode,
    ) -> Result<Self> {
        let states = match mode {
            KernelMode::Exact => Some(
                data.par_iter()
                    .map(|row| encode_state(row, config, theta))
                    .collect::<Result<Vec<_>>>()?,
            ),
            KernelMode::Shots { .. } => None,
        };
        Ok(FidelityEngine {
            data,
            config,
            theta,
            mode,
            states,
        })
    }

    fn similarities(&self, centroid: &[f64], iteration: usize, cluster: usize) -> Result<Vec<f64>> {
        match (self.mode, &self.states) {
            (KernelMode::Exact, Some(states)) => {
                let c_state = encode_state(centroid, self.config, self.theta)?;
                states
                    .par_iter()
                    .map(|s| Ok(inner_product(s, &c_state)?.norm_sqr()))
                    .collect()
            }
            (KernelMode::Shots { shots, seed }, _) => (0..self.data.len())
                .into_par_iter()
                .map(|i| {
                    let s = pair_seed(pair_seed(seed, iteration, cluster), i, 0);
                    fidelity_inversion_test(
                        &self.data[i],
                        centroid,
                        self.config,
                        self.theta,
                        shots,
                        s,
                    )
                })
                .collect(),
            _ => unreachable!("exact mode always caches states"),
        }
    }
}

/// The fidelity-similarity loop: assign each point to the centroid with the
/// highest `|⟨ψ(x)|ψ(c)⟩|²` (ties to the lower index), update centroids as
/// arithmetic means of the assigned scaled vectors, stop when labels stop
/// changing or after `t_max` passes.
pub fn quantum_kmeans_from(
    data: &[Vec<f64>],
    initial: Vec<Centroid>,
    config: &FeatureMapConfig,
    theta: &ThetaParameters,
    t_max: usize,
    mode: KernelMode,
) -> Result<ClusteringResult> {
    let n = data.len();
    let k = initial.len();
    validate_common(n, k, t_max)?;
    let engine = FidelityEngine::new(data, config, theta, mode)?;

    let mut centroids = initial;
    let mut previous: Option<Vec<usize>> = None;
    let mut trace = Vec::new();
    let mut iterations_run = 0;
    let mut converged = false;

    for t in 1..=t_max {
        iterations_run = t;
        let mut similarity = vec![vec![0.0f64; k]; n];
        for (j, centroid) in centroids.iter().enumerate() {
            let column = engine.similarities(&centroid.vector, t, j)?;
            for (i, s) in column.into_iter().enumerate() {
                similarity[i][j] = s;
            }
        }
        let mut labels = vec![0usize; n];
        let mut assigned = vec![0.0f64; n];
        for i in 0..n {
            let j = argmax(&similarity[i]);
            labels[i] = j;
            assigned[i] = similarity[i][j];
        }
        for (cluster, point) in repair_empty_clusters(&mut labels, &mut assigned, k, 1.0) {
            centroids[cluster].vector = data[point].clone();
        }
        trace.push(assigned.iter().sum::<f64>() / n as f64);

        if previous.as_deref() == Some(&labels) {
            converged = true;
            break;
        }
        let mut sums = vec![vec![0.0; data[0].len()]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(&data[i]) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j].vector = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        previous = Some(labels);
    }

    Ok(ClusteringResult {
        labels: previous.unwrap_or_default(),
        centroids,
        medoids: None,
        iterations_run,
        converged,
        similarity_trace: trace,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn quantum_kmeans(
    data: &[Vec<f64>],
    k: usize,
    config: &FeatureMapConfig,
    theta: &ThetaParameters,
    t_max: usize,
    mode: KernelMode,
    strategy: InitStrategy,
    seed: u64,
) -> Result<ClusteringResult> {
    let initial = init_centroids(data, k, strategy, seed)?;
    quantum_kmeans_from(data, initial, config, theta, t_max, mode)
}

/// Medoid-style loop on a precomputed distance matrix: cluster
/// representatives are the data indices minimizing mean distance to their
/// cluster members, assignment is argmin distance to the representative.
pub fn kernel_matrix_kmeans(
    distance: &DistanceMatrix,
    k: usize,
    t_max: usize,
    seed: u64,
) -> Result<ClusteringResult> {
    let n = distance.n();
    validate_common(n, k, t_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medoids: Vec<usize> = rand::seq::index::sample(&mut rng, n, k).into_vec();

    let mut previous: Option<Vec<usize>> = None;
    let mut trace = Vec::new();
    let mut iterations_run = 0;
    let mut converged = false;

    for _ in 1..=t_max {
        iterations_run += 1;
        let mut labels = vec![0usize; n];
        let mut assigned = vec![0.0f64; n];
        for i in 0..n {
            let scores: Vec<f64> = medoids.iter().map(|&m| -distance.get(i, m)).collect();
            let j = argmax(&scores);
            labels[i] = j;
            assigned[i] = scores[j];
        }
        for (cluster, point) in repair_empty_clusters(&mut labels, &mut assigned, k, 0.0) {
            medoids[cluster] = point;
        }
        trace.push(assigned.iter().map(|s| -s).sum::<f64>() / n as f64);

        if previous.as_deref() == Some(&labels) {
            converged = true;
            break;
        }
        for (j, medoid) in medoids.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == j).collect();
            if members.is_empty() {
                continue;
            }
            let mut best = members[0];
            let mut best_total = f64::INFINITY;
            for &m in &members {
                let total: f64 = members.iter().map(|&i| distance.get(m, i)).sum();
                if total < best_total {
                    best_total = total;
                    best = m;
                }
            }
            *medoid = best;
        }
        previous = Some(labels);
    }

    Ok(ClusteringResult {
        labels: previous.unwrap_or_default(),
        centroids: Vec::new(),
        medoids: Some(medoids),
        iterations_run,
        converged,
        similarity_trace: trace,
    })
}
