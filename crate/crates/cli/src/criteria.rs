//! Pass/fail thresholds for the closed-loop evaluation of a trained bundle.

use std::fmt;

use string_tactile::inference::MetricsReport;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub location_mae_mm: f64,
    pub location_r: f64,
    pub force_mae_n: f64,
    pub force_r: f64,
    pub contact_accuracy_pct: f64,
    pub slip_accuracy_pct: f64,
    /// Largest allowed noisy/clean MAE ratio.
    pub noise_degradation: f64,
    /// Pearson r both regressions must keep under noise.
    pub noise_r: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            location_mae_mm: 2.0,
            location_r: 0.98,
            force_mae_n: 0.1,
            force_r: 0.95,
            contact_accuracy_pct: 100.0,
            slip_accuracy_pct: 99.0,
            noise_degradation: 2.0,
            noise_r: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    AtMost,
    AtLeast,
}

/// One measured quantity against its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    bound: Bound,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            bound: Bound::AtMost,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            bound: Bound::AtLeast,
        }
    }

    /// NaN never passes.
    pub fn pass(&self) -> bool {
        match self.bound {
            Bound::AtMost => self.value <= self.limit,
            Bound::AtLeast => self.value >= self.limit,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.bound {
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
        };
        write!(f, "{} = {:.4} ({op} {})", self.name, self.value, self.limit)
    }
}

/// Held-out location accuracy.
pub fn location_checks(clean: &MetricsReport, t: &Thresholds) -> Vec<Check> {
    vec![
        Check::at_most("location MAE [mm]", clean.location_mm.mae, t.location_mae_mm),
        Check::at_least("location r", clean.location_mm.pearson_r, t.location_r),
    ]
}

/// Held-out force accuracy and both classifiers.
pub fn force_and_class_checks(clean: &MetricsReport, t: &Thresholds) -> Vec<Check> {
    vec![
        Check::at_most("force MAE [N]", clean.force_n.mae, t.force_mae_n),
        Check::at_least("force r", clean.force_n.pearson_r, t.force_r),
        Check::at_least("contact accuracy [%]", clean.contact_accuracy_pct, t.contact_accuracy_pct),
        Check::at_least("slip accuracy [%]", clean.slip_accuracy_pct, t.slip_accuracy_pct),
    ]
}

/// Degradation of the noisy subset relative to the clean one.
pub fn robustness_checks(clean: &MetricsReport, noisy: &MetricsReport, t: &Thresholds) -> Vec<Check> {
    vec![
        Check::at_most(
            "noisy/clean location MAE",
            noisy.location_mm.mae / clean.location_mm.mae,
            t.noise_degradation,
        ),
        Check::at_most(
            "noisy/clean force MAE",
            noisy.force_n.mae / clean.force_n.mae,
            t.noise_degradation,
        ),
        Check::at_least("noisy location r", noisy.location_mm.pearson_r, t.noise_r),
        Check::at_least("noisy force r", noisy.force_n.pearson_r, t.noise_r),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use string_tactile::inference::RegressionMetrics;

    fn report(loc: f64, force: f64) -> MetricsReport {
        let m = |mae| RegressionMetrics {
            mae,
            within_tolerance_pct: 100.0,
            pearson_r: 0.99,
            degenerate: false,
        };
        MetricsReport {
            records: 10,
            contact_positive: 8,
            contact_accuracy_pct: 100.0,
            slip_accuracy_pct: 100.0,
            location_mm: m(loc),
            force_n: m(force),
            disjointness_warning: false,
        }
    }

    #[test]
    fn bounds_are_inclusive() {
        let t = Thresholds::default();
        assert!(location_checks(&report(2.0, 0.1), &t).iter().all(Check::pass));
        assert!(!location_checks(&report(2.0001, 0.1), &t)[0].pass());
        let r = robustness_checks(&report(1.0, 0.05), &report(2.0, 0.1), &t);
        assert!(r.iter().all(Check::pass));
        let r = robustness_checks(&report(1.0, 0.05), &report(2.0, 0.11), &t);
        assert!(!r[1].pass());
    }

    #[test]
    fn nan_fails() {
        assert!(!Check::at_least("r", f64::NAN, 0.9).pass());
        assert!(!Check::at_most("mae", f64::NAN, 2.0).pass());
    }
}
