use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::dataset::DatasetRecord;
use crate::inference::model::ModelBundle;

pub const LOCATION_TOLERANCE_M: f64 = 5e-3;
pub const FORCE_TOLERANCE_N: f64 = 0.2;

/// Pearson correlation, or `(0, true)` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> (f64, bool) {
    let n = a.len().min(b.len());
    if n < 2 {
        return (0.0, true);
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return (0.0, true);
    }
    ((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0), false)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> (f64, bool) {
    pearson(&ranks(a), &ranks(b))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|i, j| v[*i].total_cmp(&v[*j]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0;
        for k in i..=j {
            out[idx[k]] = r;
        }
        i = j + 1;
    }
    out
}

/// Regression summary over contact-positive records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mae: f64,
    pub within_tolerance_pct: f64,
    pub pearson_r: f64,
    /// Set when `pearson_r` is undefined and reported as 0.
    pub degenerate: bool,
}

impl RegressionMetrics {
    pub fn compute(predicted: &[f64], truth: &[f64], tolerance: f64) -> Self {
        let n = predicted.len().max(1) as f64;
        let errors: Vec<f64> = predicted.iter().zip(truth).map(|(p, t)| (p - t).abs()).collect();
        let (r, degenerate) = pearson(predicted, truth);
        Self {
            mae: errors.iter().sum::<f64>() / n,
            within_tolerance_pct: 100.0 * errors.iter().filter(|e| **e <= tolerance).count() as f64 / n,
            pearson_r: r,
            degenerate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub records: usize,
    pub contact_positive: usize,
    /// Percent of all records with the contact decision right.
    pub contact_accuracy_pct: f64,
    /// Percent of contact-positive records with the slip decision right.
    pub slip_accuracy_pct: f64,
    /// Location metrics with MAE in millimetres.
    pub location_mm: RegressionMetrics,
    /// Force metrics in newtons.
    pub force_n: RegressionMetrics,
    /// Raised when the caller found train and test sources overlapping.
    pub disjointness_warning: bool,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "records,contact_positive,contact_accuracy_pct,slip_accuracy_pct,\
location_mae_mm,location_within_5mm_pct,location_pearson_r,location_r_degenerate,\
force_mae_n,force_within_0.2n_pct,force_pearson_r,force_r_degenerate,disjointness_warning";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.records,
            self.contact_positive,
            self.contact_accuracy_pct,
            self.slip_accuracy_pct,
            self.location_mm.mae,
            self.location_mm.within_tolerance_pct,
            self.location_mm.pearson_r,
            self.location_mm.degenerate,
            self.force_n.mae,
            self.force_n.within_tolerance_pct,
            self.force_n.pearson_r,
            self.force_n.degenerate,
            self.disjointness_warning
        )
    }
}

/// Scores `bundle` on `records`. Probabilities are thresholded at the bundle's
/// contact threshold and at 0.5 for slip.
pub fn evaluate<'a>(
    bundle: &ModelBundle,
    records: impl IntoIterator<Item = &'a DatasetRecord>,
) -> Result<MetricsReport> {
    let mut total = 0;
    let mut contact_hits = 0;
    let mut slip_hits = 0;
    let (mut x_hat, mut x_true, mut f_hat, mut f_true) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for r in records {
        let e = bundle.forward(&r.features)?;
        total += 1;
        contact_hits += usize::from(e.contact == r.labels.contact);
        if r.labels.contact {
            slip_hits += usize::from((e.p_slip >= 0.5) == r.labels.slipping);
            x_hat.push(e.location * 1e3);
            x_true.push(r.labels.location * 1e3);
            f_hat.push(e.force);
            f_true.push(r.labels.force);
        }
    }
    if total == 0 {
        return Err(Error::Evaluation("empty test set".into()));
    }
    let positives = x_true.len();
    Ok(MetricsReport {
        records: total,
        contact_positive: positives,
        contact_accuracy_pct: 100.0 * contact_hits as f64 / total as f64,
        slip_accuracy_pct: if positives > 0 {
            100.0 * slip_hits as f64 / positives as f64
        } else {
            100.0
        },
        location_mm: RegressionMetrics::compute(&x_hat, &x_true, LOCATION_TOLERANCE_M * 1e3),
        force_n: RegressionMetrics::compute(&f_hat, &f_true, FORCE_TOLERANCE_N),
        disjointness_warning: false,
    })
}
