//! Scoring of unsupervised output against ground truth: majority-vote label
//! alignment, accuracy, confusion matrix, and the chance-adjusted agreement
//! indices ARI and AMI.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Majority-vote mapping from cluster indices to ground-truth classes.
/// Several clusters may map to the same class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAlignment {
    pub cluster_to_class: BTreeMap<usize, usize>,
    /// Per-cluster histogram over truth classes.
    pub vote_counts: BTreeMap<usize, Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    /// Rows are truth classes, columns are aligned predictions.
    pub confusion: Vec<Vec<usize>>,
    pub ari: f64,
    pub ami: f64,
}

fn check_lengths(labels: &[usize], truth: &[usize]) -> Result<()> {
    if labels.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::invalid("label vectors must be non-empty"));
    }
    Ok(())
}

/// Assigns each nonempty cluster the truth class most frequent among its
/// members, ties broken toward the lower class index.
pub fn majority_vote(labels: &[usize], truth: &[usize]) -> Result<LabelAlignment> {
    check_lengths(labels, truth)?;
    let n_classes = truth.iter().max().unwrap() + 1;
    let mut vote_counts: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&cluster, &class) in labels.iter().zip(truth) {
        vote_counts
            .entry(cluster)
            .or_insert_with(|| vec![0; n_classes])[class] += 1;
    }
    let cluster_to_class = vote_counts
        .iter()
        .map(|(&cluster, histogram)| {
            let mut best = 0;
            for (class, &count) in histogram.iter().enumerate().skip(1) {
                if count > histogram[best] {
                    best = class;
                }
            }
            (cluster, best)
        })
        .collect();
    Ok(LabelAlignment {
        cluster_to_class,
        vote_counts,
    })
}

/// Fraction of points whose aligned cluster class matches the truth.
pub fn accuracy(labels: &[usize], truth: &[usize], alignment: &LabelAlignment) -> f64 {
    let hits = labels
        .iter()
        .zip(truth)
        .filter(|(l, t)| alignment.cluster_to_class.get(l) == Some(t))
        .count();
    hits as f64 / labels.len() as f64
}

/// Entry `(t, p)` counts points with truth class `t` and aligned prediction
/// `p`; rows therefore sum to the per-class truth counts.
pub fn confusion_matrix(
    labels: &[usize],
    truth: &[usize],
    alignment: &LabelAlignment,
    n_classes: usize,
) -> Vec<Vec<usize>> {
    let mut matrix = vec![vec![0usize; n_classes]; n_classes];
    for (l, &t) in labels.iter().zip(truth) {
        if let Some(&p) = alignment.cluster_to_class.get(l) {
            matrix[t][p] += 1;
        }
    }
    matrix
}

fn contingency(a: &[usize], b: &[usize]) -> (Vec<Vec<usize>>, Vec<usize>, Vec<usize>) {
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut table = vec![vec![0usize; kb]; ka];
    let mut row = vec![0usize; ka];
    let mut col = vec![0usize; kb];
    for (&i, &j) in a.iter().zip(b) {
        table[i][j] += 1;
        row[i] += 1;
        col[j] += 1;
    }
    (table, row, col)
}

/// Whether the two labelings induce the same partition into groups,
/// ignoring label names.
pub fn same_set_partition(a: &[usize], b: &[usize]) -> bool {
    let (table, ..) = contingency(a, b);
    let rows_ok = table
        .iter()
        .all(|r| r.iter().filter(|&&c| c > 0).count() <= 1);
    let mut col_nonzero = vec![0usize; table.first().map_or(0, Vec::len)];
    for r in &table {
        for (j, &c) in r.iter().enumerate() {
            if c > 0 {
                col_nonzero[j] += 1;
            }
        }
    }
    rows_ok && col_nonzero.iter().all(|&c| c <= 1)
}

fn comb2(n: usize) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Pair-counting agreement adjusted for chance, from the contingency table.
/// Returns 1 exactly when the partitions coincide; the degenerate case where
/// expected equals maximum index resolves to 1 for identical partitions and
/// 0 otherwise.
pub fn adjusted_rand_index(labels: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(labels, truth)?;
    let n = labels.len();
    if n < 2 {
        return Err(Error::invalid("adjusted rand index needs n ≥ 2"));
    }
    let (table, row, col) = contingency(labels, truth);
    let sum_cells: f64 = table.iter().flat_map(|r| r.iter()).map(|&c| comb2(c)).sum();
    let sum_rows: f64 = row.iter().map(|&c| comb2(c)).sum();
    let sum_cols: f64 = col.iter().map(|&c| comb2(c)).sum();
    let expected = sum_rows * sum_cols / comb2(n);
    let maximum = 0.5 * (sum_rows + sum_cols);
    if maximum == expected {
        return Ok(if same_set_partition(labels, truth) {
            1.0
        } else {
            0.0
        });
    }
    Ok((sum_cells - expected) / (maximum - expected))
}

fn entropy(sizes: &[usize], n: usize) -> f64 {
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

fn mutual_information(table: &[Vec<usize>], row: &[usize], col: &[usize], n: usize) -> f64 {
    let mut mi = 0.0;
    for (i, r) in table.iter().enumerate() {
        for (j, &c) in r.iter().enumerate() {
            if c > 0 {
                let nij = c as f64;
                mi += (nij / n as f64) * ((n as f64 * nij) / (row[i] as f64 * col[j] as f64)).ln();
            }
        }
    }
    mi
}

/// Exact expectation of the mutual information under the hypergeometric
/// model, accumulated with log-factorials.
fn expected_mutual_information(row: &[usize], col: &[usize], n: usize) -> f64 {
    // ln_fact[m] = ln(m!)
    let mut ln_fact = vec![0.0f64; n + 1];
    for m in 1..=n {
        ln_fact[m] = ln_fact[m - 1] + (m as f64).ln();
    }
    let nf = n as f64;
    let mut emi = 0.0;
    for &ai in row {
        if ai == 0 {
            continue;
        }
        for &bj in col {
            if bj == 0 {
                continue;
            }
            let lower = 1.max((ai + bj).saturating_sub(n));
            let upper = ai.min(bj);
            for nij in lower..=upper {
                let nij_f = nij as f64;
                let log_term = ((nf * nij_f) / (ai as f64 * bj as f64)).ln();
                let log_prob = ln_fact[ai] + ln_fact[bj] + ln_fact[n - ai] + ln_fact[n - bj]
                    - ln_fact[n]
                    - ln_fact[nij]
                    - ln_fact[ai - nij]
                    - ln_fact[bj - nij]
                    - ln_fact[n + nij - ai - bj];
                emi += (nij_f / nf) * log_term * log_prob.exp();
            }
        }
    }
    emi
}

/// `(MI − E[MI]) / (mean(H(a), H(b)) − E[MI])` with natural-log entropies
/// and the arithmetic mean. Identical partitions score exactly 1; when both
/// entropies vanish the result is 1 for identical partitions and 0 otherwise.
pub fn adjusted_mutual_information(labels: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(labels, truth)?;
    let n = labels.len();
    if n < 2 {
        return Err(Error::invalid("adjusted mutual information needs n ≥ 2"));
    }
    if same_set_partition(labels, truth) {
        return Ok(1.0);
    }
    let (table, row, col) = contingency(labels, truth);
    let h_labels = entropy(&row, n);
    let h_truth = entropy(&col, n);
    if h_labels == 0.0 && h_truth == 0.0 {
        return Ok(0.0);
    }
    let mi = mutual_information(&table, &row, &col, n);
    let emi = expected_mutual_information(&row, &col, n);
    let mean_entropy = 0.5 * (h_labels + h_truth);
    Ok((mi - emi) / (mean_entropy - emi))
}

/// Runs the full scoring pipeline for one clustering.
pub fn evaluate(labels: &[usize], truth: &[usize], n_classes: usize) -> Result<EvaluationReport> {
    let alignment = majority_vote(labels, truth)?;
    Ok(EvaluationReport {
        accuracy: accuracy(labels, truth, &alignment),
        confusion: confusion_matrix(labels, truth, &alignment, n_classes),
        ari: adjusted_rand_index(labels, truth)?,
        ami: adjusted_mutual_information(labels, truth)?,
    })
}
