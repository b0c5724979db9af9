//! `sweep`, `train` and `eval`.

use std::path::{Path, PathBuf};

use anyhow::Result;
use string_tactile::inference::{self, evaluate, test_records, Dataset, DatasetRecord, MetricsReport};
use string_tactile::io::{self, RunConfig};

use crate::criteria::{self, Check, Thresholds};
use crate::{EvalSplit, Outcome};

fn or_default(given: Option<&Path>, fallback: PathBuf) -> PathBuf {
    given.map_or(fallback, Path::to_path_buf)
}

pub fn sweep(config: &RunConfig, output: Option<&Path>) -> Result<Outcome> {
    let grid = &config.sweep.grid;
    log::info!("simulating {} cells", grid.cell_count());
    let dataset = inference::generate_sim_dataset(grid, &config.simulation, &config.sweep.dataset)?;
    let path = or_default(output, config.dataset_path());
    io::write_dataset(&dataset, &path)?;
    println!("wrote {} records from {} cells to {}", dataset.records.len(), grid.cell_count(), path.display());
    Ok(Outcome::Pass)
}

pub fn train(config: &RunConfig, dataset: Option<&Path>, model: Option<&Path>) -> Result<Outcome> {
    let data_path = or_default(dataset, config.dataset_path());
    let dataset = io::read_dataset(&data_path)?;
    let (bundle, report) = inference::train(&dataset, &config.training)?;
    let model_path = or_default(model, config.model_path());
    io::write_bundle(&bundle, &model_path)?;
    io::write_training_report_csv(&report, config.paths.out_dir.join("training_report.csv"))?;
    if let Some(last) = report.epochs.last() {
        println!("final loss {:.6} after {} epochs", last.loss.total, report.epochs.len());
    }
    println!("wrote {}", model_path.display());
    Ok(Outcome::Pass)
}

pub struct EvalArgs<'a> {
    pub dataset: Option<&'a Path>,
    pub model: Option<&'a Path>,
    pub split: EvalSplit,
    pub output: Option<&'a Path>,
    pub check: bool,
    pub noise_policy: &'a str,
}

/// Augmentation policies in order of first appearance.
fn policies(dataset: &Dataset) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for p in dataset.records.iter().filter_map(DatasetRecord::policy) {
        if !names.iter().any(|n| n == p) {
            names.push(p.to_string());
        }
    }
    names
}

fn subset<'a>(dataset: &'a Dataset, split: EvalSplit, train_fraction: f64, policy: Option<&str>) -> Vec<&'a DatasetRecord> {
    match split {
        EvalSplit::Test => test_records(dataset, train_fraction, policy),
        EvalSplit::All => dataset.records.iter().filter(|r| r.policy() == policy).collect(),
    }
}

pub fn eval(config: &RunConfig, args: &EvalArgs) -> Result<Outcome> {
    let dataset = io::read_dataset(or_default(args.dataset, config.dataset_path()))?;
    let bundle = io::read_bundle(or_default(args.model, config.model_path()))?;
    bundle.check_layout(&dataset.header.layout_hash)?;
    let train_fraction = bundle.metadata.train_fraction.unwrap_or(config.training.train_fraction);

    let seen_in_training = bundle.metadata.training_data.as_deref() == Some(dataset.fingerprint().as_str());
    let overlap = seen_in_training && args.split == EvalSplit::All;
    if overlap {
        log::warn!("the bundle was trained on this dataset and --split all includes its training windows");
    }

    let mut reports: Vec<(String, MetricsReport)> = Vec::new();
    let names = policies(&dataset);
    for policy in std::iter::once(None).chain(names.iter().map(|n| Some(n.as_str()))) {
        let records = subset(&dataset, args.split, train_fraction, policy);
        if records.is_empty() {
            continue;
        }
        let mut report = evaluate(&bundle, records)?;
        report.disjointness_warning = overlap;
        reports.push((policy.unwrap_or("clean").to_string(), report));
    }
    let path = or_default(args.output, config.paths.out_dir.join("metrics.csv"));
    io::write_metrics_csv(&reports, &path)?;

    println!(
        "{:<12} {:>8} {:>9} {:>7} {:>10} {:>8} {:>9} {:>8}",
        "subset", "records", "contact%", "slip%", "loc MAE mm", "loc r", "F MAE N", "F r"
    );
    for (name, r) in &reports {
        println!(
            "{name:<12} {:>8} {:>9.2} {:>7.2} {:>10.3} {:>8.4} {:>9.4} {:>8.4}",
            r.records,
            r.contact_accuracy_pct,
            r.slip_accuracy_pct,
            r.location_mm.mae,
            r.location_mm.pearson_r,
            r.force_n.mae,
            r.force_n.pearson_r
        );
    }
    if overlap {
        println!("WARNING: train and test windows overlap; metrics are not held-out");
    }
    if !args.check {
        return Ok(Outcome::Pass);
    }

    let t = Thresholds::default();
    let clean = &reports
        .iter()
        .find(|(n, _)| n == "clean")
        .ok_or_else(|| anyhow::anyhow!("no clean windows to check"))?
        .1;
    let mut checks: Vec<Check> = criteria::location_checks(clean, &t);
    checks.extend(criteria::force_and_class_checks(clean, &t));
    match reports.iter().find(|(n, _)| n == args.noise_policy) {
        Some((_, noisy)) => checks.extend(criteria::robustness_checks(clean, noisy, &t)),
        None => log::warn!("no `{}` windows in the dataset; robustness not checked", args.noise_policy),
    }
    for c in &checks {
        println!("{} {c}", if c.pass() { "PASS" } else { "FAIL" });
    }
    Ok(Outcome::from_pass(!overlap && checks.iter().all(Check::pass)))
}
