//! Clustering evaluation: normalized mutual information, best-permutation
//! accuracy, and the k-means readout used for models without a cluster head.

use rand::Rng as _;

use crate::matrix::Matrix;
use crate::rng::Rng;

/// Joint label counts between two labelings.
#[derive(Debug, Clone)]
pub struct Contingency {
    /// counts[p][t] = number of points with predicted label p and true label t.
    pub counts: Vec<Vec<usize>>,
    pub pred_totals: Vec<usize>,
    pub truth_totals: Vec<usize>,
    pub n: usize,
}

impl Contingency {
    pub fn from_labels(pred: &[usize], truth: &[usize]) -> Self {
        assert_eq!(pred.len(), truth.len(), "labelings must have equal length");
        assert!(!pred.is_empty(), "labelings must be non-empty");
        let cp = pred.iter().max().unwrap() + 1;
        let ct = truth.iter().max().unwrap() + 1;
        let mut counts = vec![vec![0usize; ct]; cp];
        for (&p, &t) in pred.iter().zip(truth) {
            counts[p][t] += 1;
        }
        let pred_totals: Vec<usize> = counts.iter().map(|row| row.iter().sum()).collect();
        let mut truth_totals = vec![0usize; ct];
        for row in &counts {
            for (tt, &c) in truth_totals.iter_mut().zip(row) {
                *tt += c;
            }
        }
        Contingency { counts, pred_totals, truth_totals, n: pred.len() }
    }
}

/// How the mutual information is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NmiNormalizer {
    /// Arithmetic mean of the two entropies (the default).
    #[default]
    Arithmetic,
    /// Geometric mean, for sensitivity checks.
    Geometric,
}

fn entropy(totals: &[usize], n: usize) -> f64 {
    let nf = n as f64;
    totals
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / nf;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information in `[0, 1]`, natural logarithms.
///
/// Degenerate conventions: two constant labelings are identical up to
/// relabeling and score 1; if exactly one labeling is constant the score
/// is 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> f64 {
    nmi_with(pred, truth, NmiNormalizer::Arithmetic)
}

pub fn nmi_with(pred: &[usize], truth: &[usize], norm: NmiNormalizer) -> f64 {
    let table = Contingency::from_labels(pred, truth);
    let h_pred = entropy(&table.pred_totals, table.n);
    let h_truth = entropy(&table.truth_totals, table.n);
    if h_pred == 0.0 && h_truth == 0.0 {
        return 1.0;
    }
    if h_pred == 0.0 || h_truth == 0.0 {
        return 0.0;
    }
    let nf = table.n as f64;
    let mut mi = 0.0;
    for (p, row) in table.counts.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            if c > 0 {
                let pij = c as f64 / nf;
                let pi = table.pred_totals[p] as f64 / nf;
                let qj = table.truth_totals[t] as f64 / nf;
                mi += pij * (pij / (pi * qj)).ln();
            }
        }
    }
    let denom = match norm {
        NmiNormalizer::Arithmetic => 0.5 * (h_pred + h_truth),
        NmiNormalizer::Geometric => (h_pred * h_truth).sqrt(),
    };
    (mi / denom).clamp(0.0, 1.0)
}

/// Fraction of points matched under the best one-to-one relabeling of
/// predicted to true clusters (assignment via subset DP; both labelings may
/// use at most 10 distinct labels).
pub fn permutation_accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let table = Contingency::from_labels(pred, truth);
    let cp = table.counts.len();
    let ct = table.truth_totals.len();
    assert!(cp <= 10 && ct <= 10, "permutation_accuracy supports at most 10 labels");
    let k = cp.max(ct);
    let count = |p: usize, t: usize| -> i64 {
        if p < cp && t < ct {
            table.counts[p][t] as i64
        } else {
            0
        }
    };
    // best[mask] = max matches assigning pred labels 0..popcount(mask) to the
    // truth-label set in mask.
    let full = 1usize << k;
    let mut best = vec![i64::MIN; full];
    best[0] = 0;
    for mask in 0..full {
        if best[mask] == i64::MIN {
            continue;
        }
        let p = mask.count_ones() as usize;
        if p >= k {
            continue;
        }
        for t in 0..k {
            if mask & (1 << t) == 0 {
                let next = mask | (1 << t);
                let v = best[mask] + count(p, t);
                if v > best[next] {
                    best[next] = v;
                }
            }
        }
    }
    best[full - 1] as f64 / table.n as f64
}

/// Lloyd's k-means with random restarts; returns the labeling with the best
/// inertia. The readout for models that have no cluster head.
pub fn kmeans(points: &Matrix, k: usize, restarts: usize, iters: usize, rng: &mut Rng) -> Vec<usize> {
    let n = points.rows();
    let d = points.cols();
    assert!(k >= 1 && k <= n, "kmeans: need 1 <= k <= n");
    let mut best_labels = vec![0usize; n];
    let mut best_inertia = f64::INFINITY;
    for _ in 0..restarts {
        let mut centers = Matrix::zeros(k, d);
        for c in 0..k {
            let pick = rng.gen_range(0..n);
            centers.row_mut(c).copy_from_slice(points.row(pick));
        }
        let mut labels = vec![0usize; n];
        for _ in 0..iters {
            let mut moved = false;
            for i in 0..n {
                let mut arg = 0;
                let mut best_d = f64::INFINITY;
                for c in 0..k {
                    let dist: f64 = points
                        .row(i)
                        .iter()
                        .zip(centers.row(c))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    if dist < best_d {
                        best_d = dist;
                        arg = c;
                    }
                }
                if labels[i] != arg {
                    labels[i] = arg;
                    moved = true;
                }
            }
            let mut sums = Matrix::zeros(k, d);
            let mut counts = vec![0usize; k];
            for i in 0..n {
                counts[labels[i]] += 1;
                for c in 0..d {
                    let v = sums.get(labels[i], c) + points.get(i, c);
                    sums.set(labels[i], c, v);
                }
            }
            for c in 0..k {
                if counts[c] == 0 {
                    // Re-seed an empty cluster from a random point.
                    let pick = rng.gen_range(0..n);
                    centers.row_mut(c).copy_from_slice(points.row(pick));
                } else {
                    for j in 0..d {
                        centers.set(c, j, sums.get(c, j) / counts[c] as f64);
                    }
                }
            }
            if !moved {
                break;
            }
        }
        let inertia: f64 = (0..n)
            .map(|i| {
                points
                    .row(i)
                    .iter()
                    .zip(centers.row(labels[i]))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum();
        if inertia < best_inertia {
            best_inertia = inertia;
            best_labels = labels;
        }
    }
    best_labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    /// Independent brute-force NMI straight from label pair counts.
    fn nmi_oracle(pred: &[usize], truth: &[usize]) -> f64 {
        let n = pred.len() as f64;
        let cp = pred.iter().max().unwrap() + 1;
        let ct = truth.iter().max().unwrap() + 1;
        let mut joint = vec![0.0f64; cp * ct];
        for i in 0..pred.len() {
            joint[pred[i] * ct + truth[i]] += 1.0 / n;
        }
        let pi: Vec<f64> = (0..cp).map(|p| (0..ct).map(|t| joint[p * ct + t]).sum()).collect();
        let qj: Vec<f64> = (0..ct).map(|t| (0..cp).map(|p| joint[p * ct + t]).sum()).collect();
        let hp: f64 = pi.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
        let ht: f64 = qj.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
        if hp == 0.0 && ht == 0.0 {
            return 1.0;
        }
        if hp == 0.0 || ht == 0.0 {
            return 0.0;
        }
        let mut mi = 0.0;
        for p in 0..cp {
            for t in 0..ct {
                let v = joint[p * ct + t];
                if v > 0.0 {
                    mi += v * (v / (pi[p] * qj[t])).ln();
                }
            }
        }
        (mi / (0.5 * (hp + ht))).clamp(0.0, 1.0)
    }

    #[test]
    fn identical_partitions_score_one() {
        assert_eq!(nmi(&[0, 0, 1, 1], &[0, 0, 1, 1]), 1.0);
        assert_eq!(nmi(&[1, 1, 0, 0], &[0, 0, 1, 1]), 1.0);
    }

    #[test]
    fn constant_prediction_scores_zero() {
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 0, 1, 1]), 0.0);
    }

    #[test]
    fn both_constant_scores_one() {
        assert_eq!(nmi(&[0, 0], &[1, 1]), 1.0);
    }

    #[test]
    fn independent_partitions_score_zero() {
        assert_eq!(nmi(&[0, 1, 0, 1], &[0, 0, 1, 1]), 0.0);
    }

    #[test]
    fn three_by_two_table_hand_value() {
        // pred [0,0,1,2] vs truth [0,0,1,1]: MI = ln 2, H_pred = 1.5 ln 2,
        // H_truth = ln 2, so NMI = 1 / 1.25 = 0.8.
        let v = nmi(&[0, 0, 1, 2], &[0, 0, 1, 1]);
        assert!((v - 0.8).abs() < 1e-12, "{v}");
        assert!((v - nmi_oracle(&[0, 0, 1, 2], &[0, 0, 1, 1])).abs() < 1e-15);
    }

    #[test]
    fn nmi_matches_oracle_on_random_labelings() {
        let mut rng = seeded(42);
        for _ in 0..300 {
            let n = rng.gen_range(1..=12);
            let cp = rng.gen_range(1..=4);
            let ct = rng.gen_range(1..=4);
            let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..cp)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..ct)).collect();
            let a = nmi(&pred, &truth);
            let b = nmi_oracle(&pred, &truth);
            assert!((a - b).abs() < 1e-12, "{a} vs {b} for {pred:?} {truth:?}");
            // Symmetry and relabeling invariance.
            assert!((nmi(&truth, &pred) - a).abs() < 1e-12);
            let relabeled: Vec<usize> = pred.iter().map(|&p| (p + 1) % cp.max(2)).collect();
            let _ = nmi(&relabeled, &truth); // must not panic
        }
    }

    #[test]
    fn geometric_normalizer_differs_only_when_entropies_do() {
        let pred = [0, 0, 1, 2];
        let truth = [0, 0, 1, 1];
        let a = nmi_with(&pred, &truth, NmiNormalizer::Arithmetic);
        let g = nmi_with(&pred, &truth, NmiNormalizer::Geometric);
        assert!(g > a, "geometric mean <= arithmetic mean on the denominator");
        let same = [0, 0, 1, 1];
        assert_eq!(
            nmi_with(&same, &truth, NmiNormalizer::Arithmetic),
            nmi_with(&same, &truth, NmiNormalizer::Geometric)
        );
    }

    #[test]
    fn permutation_accuracy_examples() {
        assert_eq!(permutation_accuracy(&[0, 1, 0, 1], &[0, 1, 0, 1]), 1.0);
        assert_eq!(permutation_accuracy(&[1, 0, 1, 0], &[0, 1, 0, 1]), 1.0);
        // Enumerating both binary permutations by hand gives 3/4.
        assert_eq!(permutation_accuracy(&[0, 0, 0, 1], &[0, 0, 1, 1]), 0.75);
    }

    #[test]
    fn permutation_accuracy_matches_enumeration() {
        // DP vs explicit permutation enumeration on 3-label cases.
        let perms: [[usize; 3]; 6] =
            [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut rng = seeded(9);
        for _ in 0..100 {
            let n = rng.gen_range(3..=10);
            let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let brute = perms
                .iter()
                .map(|perm| {
                    pred.iter()
                        .zip(&truth)
                        .filter(|&(&p, &t)| perm[p] == t)
                        .count() as f64
                        / n as f64
                })
                .fold(0.0, f64::max);
            assert_eq!(permutation_accuracy(&pred, &truth), brute);
        }
    }

    #[test]
    fn permutation_accuracy_beats_chance_on_balanced_labels() {
        let mut rng = seeded(10);
        for _ in 0..50 {
            let n = 12;
            let truth: Vec<usize> = (0..n).map(|i| i % 3).collect();
            let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            assert!(permutation_accuracy(&pred, &truth) >= 1.0 / 3.0 - 1e-12);
        }
    }

    #[test]
    fn kmeans_separates_distant_blobs() {
        let mut rows = Vec::new();
        for i in 0..20 {
            let off = if i < 10 { 0.0 } else { 10.0 };
            rows.push(vec![off + 0.01 * i as f64, off]);
        }
        let points = Matrix::from_rows(&rows);
        let labels = kmeans(&points, 2, 5, 50, &mut seeded(3));
        let truth: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        assert_eq!(nmi(&labels, &truth), 1.0);
    }
}
