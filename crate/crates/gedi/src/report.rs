//! Results persistence: metrics and prediction CSVs and SVG scatter plots.
//!
//! Floats are written in Rust's shortest round-trip form, so re-reading a
//! file reproduces the values exactly and equal runs produce byte-equal
//! files.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::trainer::MetricsRecord;

pub const METRICS_HEADER: &str =
    "iter,loss_gen,loss_nf,loss_di_aug,loss_di_dam,loss_total,nmi,acc,seconds";

/// Ten-color categorical palette; labels map through `label % 10`.
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub fn write_metrics_csv(records: &[MetricsRecord], path: &Path) -> Result<()> {
    let mut body = String::from(METRICS_HEADER);
    body.push('\n');
    for r in records {
        body.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.iteration,
            r.loss_gen,
            r.loss_nf,
            r.loss_di_aug,
            r.loss_di_dam,
            r.loss_total,
            r.nmi,
            r.acc,
            r.seconds
        ));
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn write_predictions_csv(
    points: &Matrix,
    pred: &[usize],
    truth: &[usize],
    path: &Path,
) -> Result<()> {
    assert_eq!(points.rows(), pred.len(), "points/pred length mismatch");
    assert_eq!(points.rows(), truth.len(), "points/truth length mismatch");
    let mut body = String::from("x0,x1,pred,truth\n");
    for i in 0..points.rows() {
        let row = points.row(i);
        body.push_str(&format!("{},{},{},{}\n", row[0], row[1], pred[i], truth[i]));
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Read back a predictions CSV: `(points, pred, truth)`.
pub fn read_predictions_csv(path: &Path) -> Result<(Matrix, Vec<usize>, Vec<usize>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("x0,x1,pred,truth") {
        return Err(Error::format(path, "predictions CSV", "bad header".to_string()));
    }
    let mut rows = Vec::new();
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::format(
                path,
                "predictions CSV",
                format!("line {}: expected 4 fields", lineno + 2),
            ));
        }
        let bad = |what: &str| {
            Error::format(path, "predictions CSV", format!("line {}: bad {what}", lineno + 2))
        };
        rows.push(vec![
            fields[0].parse::<f64>().map_err(|_| bad("x0"))?,
            fields[1].parse::<f64>().map_err(|_| bad("x1"))?,
        ]);
        pred.push(fields[2].parse::<usize>().map_err(|_| bad("pred"))?);
        truth.push(fields[3].parse::<usize>().map_err(|_| bad("truth"))?);
    }
    Ok((Matrix::from_rows(&rows), pred, truth))
}

/// Standalone SVG scatter plot: one circle per point, colored by label
/// through the fixed palette, axes scaled to the data bounding box plus a 5%
/// margin.
pub fn scatter_svg(points: &Matrix, labels: &[usize], path: &Path) -> Result<()> {
    assert_eq!(points.rows(), labels.len(), "points/labels length mismatch");
    const SIZE: f64 = 480.0;
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for i in 0..points.rows() {
        for c in 0..2 {
            lo[c] = lo[c].min(points.get(i, c));
            hi[c] = hi[c].max(points.get(i, c));
        }
    }
    if points.rows() == 0 {
        lo = [0.0, 0.0];
        hi = [1.0, 1.0];
    }
    let mut span = [hi[0] - lo[0], hi[1] - lo[1]];
    for s in &mut span {
        if *s <= 0.0 {
            *s = 1.0;
        }
    }
    // 5% margin on each side.
    let margin = [span[0] * 0.05, span[1] * 0.05];
    let full = [span[0] + 2.0 * margin[0], span[1] + 2.0 * margin[1]];

    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    ));
    svg.push_str(&format!("<rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>\n"));
    for i in 0..points.rows() {
        let x = (points.get(i, 0) - lo[0] + margin[0]) / full[0] * SIZE;
        let y = SIZE - (points.get(i, 1) - lo[1] + margin[1]) / full[1] * SIZE;
        let color = PALETTE[labels[i] % PALETTE.len()];
        svg.push_str(&format!(
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{color}\" fill-opacity=\"0.8\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_records_give_a_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        write_metrics_csv(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{METRICS_HEADER}\n"));
    }

    #[test]
    fn metrics_rows_match_the_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let rec = MetricsRecord {
            iteration: 100,
            loss_gen: -0.25,
            loss_nf: 1.5,
            loss_di_aug: 0.693,
            loss_di_dam: 0.7,
            loss_total: 99.5,
            nmi: 0.875,
            acc: 0.9,
            seconds: 12.25,
        };
        write_metrics_csv(&[rec], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(METRICS_HEADER));
        assert_eq!(lines.next(), Some("100,-0.25,1.5,0.693,0.7,99.5,0.875,0.9,12.25"));
    }

    #[test]
    fn predictions_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("predictions.csv");
        let points = Matrix::from_rows(&[vec![0.1, -2.5], vec![1.0 / 3.0, 7.25]]);
        let pred = vec![1usize, 0];
        let truth = vec![0usize, 0];
        write_predictions_csv(&points, &pred, &truth, &path).unwrap();
        let (p2, pr2, tr2) = read_predictions_csv(&path).unwrap();
        assert_eq!(p2, points);
        assert_eq!(pr2, pred);
        assert_eq!(tr2, truth);
    }

    #[test]
    fn svg_has_one_circle_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        let points = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![-1.0, 0.5]]);
        scatter_svg(&points, &[0, 1, 2], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("<circle").count(), 3);
        assert!(text.contains(PALETTE[0]));
        assert!(text.contains(PALETTE[2]));
        assert!(text.starts_with("<?xml"));
    }
}
