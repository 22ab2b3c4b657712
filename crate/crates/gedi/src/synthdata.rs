//! Moons and circles generators, the Gaussian augmentation channel, and
//! stratified splitting.
//!
//! Generators are pure functions of their RNG: the same seed always yields
//! the same dataset. Labels exist for evaluation only; no training code in
//! this crate ever receives them (trainers take bare point matrices).

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

/// A labeled 2-D point cloud.
#[derive(Debug, Clone)]
pub struct Dataset2D {
    pub points: Matrix,
    pub labels: Vec<usize>,
    /// Number of ground-truth classes.
    pub c_true: usize,
}

impl Dataset2D {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn new(points: Matrix, labels: Vec<usize>, c_true: usize) -> Self {
        assert_eq!(points.rows(), labels.len(), "points/labels length mismatch");
        debug_assert!(points.all_finite());
        Dataset2D { points, labels, c_true }
    }
}

/// Noise-free coordinates at parameter `t in [0, pi]` on one of the two
/// interleaving moons: the upper moon is the upper unit half-circle, the
/// lower moon its reflection shifted to interleave.
fn moon_point(moon: usize, t: f64) -> (f64, f64) {
    match moon {
        0 => (t.cos(), t.sin()),
        _ => (1.0 - t.cos(), 0.5 - t.sin()),
    }
}

/// Two interleaving half-circles with isotropic Gaussian noise, `n/2` points
/// per moon, labeled by moon index.
pub fn make_moons(n: usize, noise_std: f64, rng: &mut Rng) -> Result<Dataset2D> {
    if n % 2 != 0 {
        return Err(Error::OddDatasetSize(n));
    }
    assert!(noise_std >= 0.0, "noise_std must be non-negative");
    let mut points = Matrix::zeros(n, 2);
    let mut labels = vec![0usize; n];
    for moon in 0..2 {
        for i in 0..n / 2 {
            let t = rng.gen_range(0.0..=std::f64::consts::PI);
            let (x, y) = moon_point(moon, t);
            let row = moon * (n / 2) + i;
            let ex: f64 = rng.sample(StandardNormal);
            let ey: f64 = rng.sample(StandardNormal);
            points.set(row, 0, x + noise_std * ex);
            points.set(row, 1, y + noise_std * ey);
            labels[row] = moon;
        }
    }
    Ok(Dataset2D::new(points, labels, 2))
}

/// Two concentric circles: radius 1 (label 0) and radius `factor` (label 1),
/// `n/2` points each, with isotropic Gaussian noise.
pub fn make_circles(n: usize, noise_std: f64, factor: f64, rng: &mut Rng) -> Result<Dataset2D> {
    if n % 2 != 0 {
        return Err(Error::OddDatasetSize(n));
    }
    if !(factor > 0.0 && factor < 1.0) {
        return Err(Error::BadCirclesFactor(factor));
    }
    assert!(noise_std >= 0.0, "noise_std must be non-negative");
    let mut points = Matrix::zeros(n, 2);
    let mut labels = vec![0usize; n];
    for ring in 0..2 {
        let radius = if ring == 0 { 1.0 } else { factor };
        for i in 0..n / 2 {
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            let row = ring * (n / 2) + i;
            let ex: f64 = rng.sample(StandardNormal);
            let ey: f64 = rng.sample(StandardNormal);
            points.set(row, 0, radius * t.cos() + noise_std * ex);
            points.set(row, 1, radius * t.sin() + noise_std * ey);
            labels[row] = ring;
        }
    }
    Ok(Dataset2D::new(points, labels, 2))
}

/// The augmentation channel: `X' = X + eps`, `eps ~ N(0, sigma² I)`, fresh
/// noise on every call.
pub fn gaussian_augment(x: &Matrix, sigma: f64, rng: &mut Rng) -> Matrix {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    let mut out = x.clone();
    if sigma == 0.0 {
        return out;
    }
    for v in out.data_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *v += sigma * e;
    }
    out
}

/// Stratified shuffle split: per-class counts in the two halves differ from
/// the exact fractions by at most one point.
pub fn split(
    dataset: &Dataset2D,
    train_fraction: f64,
    rng: &mut Rng,
) -> Result<(Dataset2D, Dataset2D)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::BadTrainFraction(train_fraction));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.c_true];
    for (i, &l) in dataset.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (class, indices) in by_class.iter().enumerate() {
        let mut indices = indices.clone();
        let take = (train_fraction * indices.len() as f64).round() as usize;
        if take == 0 || take == indices.len() {
            return Err(Error::EmptyClassAfterSplit(class));
        }
        indices.shuffle(rng);
        train_idx.extend_from_slice(&indices[..take]);
        test_idx.extend_from_slice(&indices[take..]);
    }
    Ok((subset(dataset, &train_idx), subset(dataset, &test_idx)))
}

fn subset(dataset: &Dataset2D, indices: &[usize]) -> Dataset2D {
    let mut points = Matrix::zeros(indices.len(), 2);
    let mut labels = Vec::with_capacity(indices.len());
    for (k, &i) in indices.iter().enumerate() {
        points.row_mut(k).copy_from_slice(dataset.points.row(i));
        labels.push(dataset.labels[i]);
    }
    Dataset2D::new(points, labels, dataset.c_true)
}

/// Write a dataset as CSV: header `x0,x1,label`, one row per point, LF line
/// endings. Floats use the shortest round-trip representation.
pub fn write_csv(dataset: &Dataset2D, path: &Path) -> Result<()> {
    let mut body = String::from("x0,x1,label\n");
    for i in 0..dataset.len() {
        let r = dataset.points.row(i);
        body.push_str(&format!("{},{},{}\n", r[0], r[1], dataset.labels[i]));
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Read a dataset written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Dataset2D> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("x0,x1,label") => {}
        other => {
            return Err(Error::format(
                path,
                "dataset CSV",
                format!("expected header 'x0,x1,label', got {other:?}"),
            ))
        }
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>, what: &str| -> Result<f64> {
            s.and_then(|v| v.parse().ok()).ok_or_else(|| {
                Error::format(path, "dataset CSV", format!("line {}: bad {what}", lineno + 2))
            })
        };
        let x0 = parse(parts.next(), "x0")?;
        let x1 = parse(parts.next(), "x1")?;
        let label: usize = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| {
            Error::format(path, "dataset CSV", format!("line {}: bad label", lineno + 2))
        })?;
        rows.push(vec![x0, x1]);
        labels.push(label);
    }
    let c_true = labels.iter().max().map_or(0, |m| m + 1);
    Ok(Dataset2D::new(Matrix::from_rows(&rows), labels, c_true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn moons_are_balanced() {
        let mut rng = seeded(0);
        let d = make_moons(400, 0.05, &mut rng).unwrap();
        assert_eq!(d.labels.iter().filter(|&&l| l == 0).count(), 200);
        assert_eq!(d.labels.iter().filter(|&&l| l == 1).count(), 200);
    }

    #[test]
    fn moons_reject_odd_n() {
        let mut rng = seeded(0);
        assert!(matches!(make_moons(401, 0.0, &mut rng), Err(Error::OddDatasetSize(401))));
    }

    #[test]
    fn noiseless_upper_moon_lies_on_unit_circle() {
        let mut rng = seeded(3);
        let d = make_moons(200, 0.0, &mut rng).unwrap();
        for i in 0..d.len() {
            if d.labels[i] == 0 {
                let r = d.points.row(i);
                assert!((r[0] * r[0] + r[1] * r[1] - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn moon_parametrization_endpoints() {
        assert_eq!(moon_point(0, 0.0), (1.0, 0.0));
        let (x, y) = moon_point(1, 0.0);
        assert!((x - 0.0).abs() < 1e-15 && (y - 0.5).abs() < 1e-15);
    }

    #[test]
    fn noiseless_circles_have_exact_radii() {
        let mut rng = seeded(1);
        let d = make_circles(400, 0.0, 0.5, &mut rng).unwrap();
        for i in 0..d.len() {
            let r = d.points.row(i);
            let norm = (r[0] * r[0] + r[1] * r[1]).sqrt();
            let expect = if d.labels[i] == 0 { 1.0 } else { 0.5 };
            assert!((norm - expect).abs() < 1e-12);
        }
        assert_eq!(d.labels.iter().filter(|&&l| l == 0).count(), 200);
    }

    #[test]
    fn circles_inter_class_gap_matches_factor() {
        // Brute force the minimum inter-class distance; with factor 0.5 and
        // no noise it is the radial gap 0.5 up to the angular discretization.
        let mut rng = seeded(2);
        let d = make_circles(400, 0.0, 0.5, &mut rng).unwrap();
        let mut min_d2 = f64::INFINITY;
        for i in 0..d.len() {
            for j in 0..d.len() {
                if d.labels[i] != d.labels[j] {
                    let a = d.points.row(i);
                    let b = d.points.row(j);
                    let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
                    min_d2 = min_d2.min(d2);
                }
            }
        }
        assert!((min_d2.sqrt() - 0.5).abs() < 1e-3, "gap {}", min_d2.sqrt());
    }

    #[test]
    fn circles_reject_bad_factor() {
        let mut rng = seeded(0);
        assert!(make_circles(400, 0.0, 1.0, &mut rng).is_err());
        assert!(make_circles(400, 0.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn augment_zero_sigma_is_identity() {
        let mut rng = seeded(4);
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(gaussian_augment(&x, 0.0, &mut rng), x);
    }

    #[test]
    fn augment_noise_scale_is_correct() {
        // Monte-Carlo: per-coordinate std of X' - X should be close to sigma.
        let n = 10_000;
        let mut rng = seeded(5);
        let x = Matrix::zeros(n, 2);
        let xp = gaussian_augment(&x, 0.03, &mut rng);
        for c in 0..2 {
            let mut sum = 0.0;
            let mut sq = 0.0;
            for r in 0..n {
                let v = xp.get(r, c);
                sum += v;
                sq += v * v;
            }
            let std = (sq / n as f64 - (sum / n as f64).powi(2)).sqrt();
            assert!((0.028..=0.032).contains(&std), "std {std}");
        }
    }

    #[test]
    fn augment_draws_fresh_noise() {
        let mut rng = seeded(6);
        let x = Matrix::zeros(4, 2);
        let a = gaussian_augment(&x, 0.1, &mut rng);
        let b = gaussian_augment(&x, 0.1, &mut rng);
        assert_ne!(a, b);
    }

    #[test]
    fn split_is_stratified_and_partitions() {
        let d = make_moons(400, 0.05, &mut seeded(7)).unwrap();
        let (train, test) = split(&d, 0.5, &mut seeded(8)).unwrap();
        assert_eq!(train.len(), 200);
        assert_eq!(test.len(), 200);
        for ds in [&train, &test] {
            assert_eq!(ds.labels.iter().filter(|&&l| l == 0).count(), 100);
        }
        // Union reproduces the original multiset of points.
        let mut all: Vec<(u64, u64)> = Vec::new();
        for ds in [&train, &test] {
            for i in 0..ds.len() {
                let r = ds.points.row(i);
                all.push((r[0].to_bits(), r[1].to_bits()));
            }
        }
        let mut orig: Vec<(u64, u64)> = (0..d.len())
            .map(|i| {
                let r = d.points.row(i);
                (r[0].to_bits(), r[1].to_bits())
            })
            .collect();
        all.sort_unstable();
        orig.sort_unstable();
        assert_eq!(all, orig);
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let d = make_moons(100, 0.05, &mut seeded(9)).unwrap();
        let (a1, b1) = split(&d, 0.3, &mut seeded(10)).unwrap();
        let (a2, b2) = split(&d, 0.3, &mut seeded(10)).unwrap();
        assert_eq!(a1.points, a2.points);
        assert_eq!(b1.points, b2.points);
    }

    #[test]
    fn split_refuses_to_empty_a_class() {
        let d = Dataset2D::new(
            Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]),
            vec![0, 0, 0, 1],
            2,
        );
        assert!(split(&d, 0.1, &mut seeded(0)).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let d = make_circles(40, 0.05, 0.5, &mut seeded(11)).unwrap();
        write_csv(&d, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x0,x1,label\n"));
        assert!(!text.contains('\r'));
        let back = read_csv(&path).unwrap();
        assert_eq!(back.labels, d.labels);
        assert_eq!(back.points, d.points);
    }

    #[test]
    fn generators_are_deterministic() {
        let a = make_moons(60, 0.05, &mut seeded(12)).unwrap();
        let b = make_moons(60, 0.05, &mut seeded(12)).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.labels, b.labels);
    }
}
