//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported, not raised, so the rest still run. Set
//! `STRTAC_ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use string_tactile::audio::StereoAudio;
use string_tactile::inference::model::TargetScale;
use string_tactile::inference::{
    evaluate, generate_sim_dataset, loss::loss_value, spearman, test_records, total_loss, train, Labels,
    LossWeights, ModelBundle, Normalization,
};
use string_tactile::io::{load_config, RunConfig};
use string_tactile::physics::{predicted_feature_pair, ContactCondition};
use string_tactile::simulator::{discrete_energy, simulate, DampingModel, SegmentState, StepCoefficients};
use string_tactile::spectral::{dominant_frequency, fft_magnitude, WindowFunction};
use strtac::criteria::{force_and_class_checks, location_checks, robustness_checks, Check, Thresholds};

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn config(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    load_config(path).expect("shipped config loads")
}

/// Dominant peak of each channel inside `[a, b]` seconds, searched in the drive bands.
fn steady_peaks(audio: &StereoAudio<f64>, [a, b]: [f64; 2], bands: [(f64, f64); 2]) -> [f64; 2] {
    let start = (a * audio.sample_rate).round() as usize;
    let end = (b * audio.sample_rate).round() as usize;
    let part = audio.slice(start, end - start);
    [0, 1].map(|k| {
        let s = fft_magnitude(part.channel(k), part.sample_rate, WindowFunction::Hann);
        dominant_frequency(&s, bands[k]).unwrap_or(f64::NAN)
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn a1() -> Line {
    let c = config("appendix_a.json");
    let t = Instant::now();
    let out = simulate(&c.simulation).expect("reference run");
    let secs = t.elapsed().as_secs_f64();
    let bands = [c.simulation.drives[0].feedback_band, c.simulation.drives[1].feedback_band];
    let got = steady_peaks(&out.audio, [0.30, 0.35], bands);
    let want = [695.0, 374.0];
    let errs = [rel(got[0], want[0]), rel(got[1], want[1])];
    Line {
        id: "A1",
        pass: errs.iter().all(|e| *e <= 0.02) && secs < 30.0,
        detail: format!(
            "peaks {:.2} / {:.2} Hz vs 695 / 374 (errors {:.3}% / {:.3}%, tol 2%), {:.1} s",
            got[0],
            got[1],
            errs[0] * 100.0,
            errs[1] * 100.0,
            secs
        ),
    }
}

fn a2() -> Line {
    let c = config("default_sweep.json");
    let mut sim = c.simulation.clone();
    sim.duration = 0.4;
    let xs = [0.2, 0.35, 0.5, 0.65, 0.8];
    let fs = [0.0, 0.5, 1.0, 1.5, 2.0];
    let bands = [sim.drives[0].feedback_band, sim.drives[1].feedback_band];
    let len = sim.string.total_length;
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    // peaks[i][j] = (f1, f2) at xs[i], fs[j]
    let mut peaks = vec![vec![(0.0, 0.0); fs.len()]; xs.len()];
    for (i, &x) in xs.iter().enumerate() {
        for (j, &f) in fs.iter().enumerate() {
            sim.contact = ContactCondition::pressed(x * len, f);
            let audio = simulate(&sim).expect("grid run").audio;
            let [g1, g2] = steady_peaks(&audio, [0.30, 0.35], bands);
            let (p1, p2) = predicted_feature_pair(x * len, f, &sim.string).expect("prediction");
            worst = worst.max(rel(g1, p1)).max(rel(g2, p2));
            peaks[i][j] = (g1, g2);
        }
    }
    let position: Vec<f64> = xs.to_vec();
    let force: Vec<f64> = fs.to_vec();
    let mut broken = Vec::new();
    for (j, f) in fs.iter().enumerate() {
        let f1: Vec<f64> = (0..xs.len()).map(|i| peaks[i][j].0).collect();
        let f2: Vec<f64> = (0..xs.len()).map(|i| peaks[i][j].1).collect();
        if spearman(&position, &f1).0 != -1.0 || spearman(&position, &f2).0 != 1.0 {
            broken.push(format!("F = {f} N"));
        }
    }
    for (i, row) in peaks.iter().enumerate() {
        let f1: Vec<f64> = row.iter().map(|p| p.0).collect();
        let f2: Vec<f64> = row.iter().map(|p| p.1).collect();
        if spearman(&force, &f1).0 != 1.0 || spearman(&force, &f2).0 != 1.0 {
            broken.push(format!("x/L = {}", xs[i]));
        }
    }
    Line {
        id: "A2",
        pass: worst <= 0.02 && broken.is_empty(),
        detail: format!(
            "25 cells, worst peak error {:.3}% (tol 2%), rank correlations {} ({:.1} s)",
            worst * 100.0,
            if broken.is_empty() { "all exactly +-1".to_string() } else { format!("not +-1 at {}", broken.join(", ")) },
            t.elapsed().as_secs_f64()
        ),
    }
}

fn verdict(checks: &[Check]) -> (bool, String) {
    let pass = checks.iter().all(Check::pass);
    let text = checks
        .iter()
        .map(|c| format!("{}{c}", if c.pass() { "" } else { "[x] " }))
        .collect::<Vec<_>>()
        .join("; ");
    (pass, text)
}

fn a3_to_a5() -> Vec<Line> {
    let c = config("default_sweep.json");
    let t = Instant::now();
    let dataset = generate_sim_dataset(&c.sweep.grid, &c.simulation, &c.sweep.dataset).expect("sweep");
    let (bundle, _) = train(&dataset, &c.training).expect("training");
    let clean = evaluate(&bundle, test_records(&dataset, c.training.train_fraction, None)).expect("clean eval");
    let noisy = evaluate(&bundle, test_records(&dataset, c.training.train_fraction, Some("eval15"))).expect("noisy eval");
    let secs = t.elapsed().as_secs_f64();
    let th = Thresholds::default();
    let (p3, d3) = verdict(&location_checks(&clean, &th));
    let (p4, d4) = verdict(&force_and_class_checks(&clean, &th));
    let (p5, d5) = verdict(&robustness_checks(&clean, &noisy, &th));
    vec![
        Line {
            id: "A3",
            pass: p3,
            detail: format!("{} held-out windows: {d3} ({secs:.0} s sweep+train)", clean.records),
        },
        Line {
            id: "A4",
            pass: p4,
            detail: d4,
        },
        Line {
            id: "A5",
            pass: p5,
            detail: format!(
                "15 dB mixed noise, {} windows: {d5} (noisy force MAE {:.4} N vs clean {:.4} N)",
                noisy.records, noisy.force_n.mae, clean.force_n.mae
            ),
        },
    ]
}

fn energy_checks() -> (f64, bool) {
    let (mu, tension, len) = (6.5e-4, 65.0, 0.2275);
    let forces = vec![0.0; 256];

    let mut s = SegmentState::at_rest(len, 256, 1.0e-6).unwrap();
    s.pluck(0.5 * len, 1e-4);
    let c = StepCoefficients::new(&s, tension, mu, 0.0, DampingModel::PerLength);
    let e0 = discrete_energy(&s, tension, mu);
    let mut drift: f64 = 0.0;
    for _ in 0..10_000 {
        s.step(&c, &forces).unwrap();
        drift = drift.max(rel(discrete_energy(&s, tension, mu), e0));
    }

    let mut s = SegmentState::at_rest(len, 256, 1.0e-6).unwrap();
    s.pluck(0.5 * len, 1e-4);
    let c = StepCoefficients::new(&s, tension, mu, 0.02, DampingModel::PerLength);
    let period = (1.0e6 * 2.0 * len / (tension / mu).sqrt()).ceil() as usize;
    let mut last = discrete_energy(&s, tension, mu);
    let mut decreasing = true;
    for _ in 0..30 {
        for _ in 0..period {
            s.step(&c, &forces).unwrap();
        }
        let e = discrete_energy(&s, tension, mu);
        decreasing &= e < last;
        last = e;
    }
    (drift, decreasing)
}

fn fft_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 256;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fast = fft_magnitude(&x, 1.0, WindowFunction::Rectangular);
    let mut worst: f64 = 0.0;
    for k in 0..=n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in x.iter().enumerate() {
            let phase = -std::f64::consts::TAU * (k * j) as f64 / n as f64;
            re += v * phase.cos();
            im += v * phase.sin();
        }
        let slow = re.hypot(im);
        worst = worst.max((fast.magnitudes[k] - slow).abs() / slow.max(1e-12));
    }
    worst
}

fn gradient_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (dim, rows) = (6, 12);
    let feats: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let labels: Vec<Labels> = (0..rows)
        .map(|i| {
            let contact = i % 3 != 0;
            Labels {
                contact,
                slipping: contact && rng.random_bool(0.5),
                location: if contact { rng.random_range(0.1..0.5) } else { 0.0 },
                force: if contact { rng.random_range(0.0..2.0) } else { 0.0 },
            }
        })
        .collect();
    let mut b = ModelBundle::initialise(
        Normalization::fit(feats.iter().map(Vec::as_slice)).unwrap(),
        &[7, 5],
        "acceptance".into(),
        &mut rng,
    );
    b.location_scale = TargetScale { mean: 0.3, std: 0.1 };
    b.force_scale = TargetScale { mean: 1.0, std: 0.6 };
    let mut p = b.parameters();
    p.iter_mut().for_each(|v| *v += rng.random_range(-0.05..0.05));
    b.set_parameters(&p).unwrap();

    let batch: Vec<(&[f64], Labels)> = feats.iter().map(Vec::as_slice).zip(labels).collect();
    let w = LossWeights::default();
    let analytic = total_loss(&b, &batch, &w).unwrap().1.parameters();
    let base = b.parameters();
    let h = 1e-5;
    let mut probe = b.clone();
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut q = base.clone();
        q[i] = base[i] + h;
        probe.set_parameters(&q).unwrap();
        let up = loss_value(&probe, &batch, &w).unwrap().total;
        q[i] = base[i] - h;
        probe.set_parameters(&q).unwrap();
        let down = loss_value(&probe, &batch, &w).unwrap().total;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max((numeric - analytic[i]).abs() / numeric.abs().max(analytic[i].abs()).max(1e-6));
    }
    worst
}

fn a6() -> Line {
    let (drift, decreasing) = energy_checks();
    let fft = fft_error();
    let grad = gradient_error();
    Line {
        id: "A6",
        pass: drift < 1e-3 && decreasing && fft < 1e-6 && grad < 1e-4,
        detail: format!(
            "energy drift {drift:.2e} (< 1e-3), damped energy decreasing per period: {decreasing}, \
             FFT vs DFT {fft:.1e} (< 1e-6), gradient vs central difference {grad:.1e} (< 1e-4)"
        ),
    }
}

const TINY: &str = r#"{
  "simulation": { "nodes": 64, "duration": 0.25, "seed": 77, "mixing": { "lambda1": 0.9, "lambda2": 0.9 } },
  "analysis": { "transient": [0.01, 0.05], "steady": [0.20, 0.25], "expected_peaks": null },
  "sweep": {
    "grid": { "locations": [0.35, 0.65], "forces": [0.0, 2.0], "slip_speeds": [0.0, 0.02], "no_contact_runs": 2 },
    "dataset": {
      "windows_per_cell": 3, "window": 0.05, "hop": 0.05, "transient": 0.1,
      "self_check_tolerance": null, "workers": 2,
      "augmentations": [ { "name": "n", "sampler": { "kinds": ["pink", "white"], "snr_db": [10.0, 20.0], "seed": 3 }, "copies": 1 } ]
    }
  },
  "training": { "epochs": 15, "hidden_layers": [8], "batch_size": 8, "train_augmentations": ["n"] }
}"#;

/// Runs every subcommand in `dir` and hashes what each one wrote.
fn pipeline_hashes(dir: &Path) -> Result<BTreeMap<String, String>, String> {
    std::fs::write(dir.join("tiny.json"), TINY).map_err(|e| e.to_string())?;
    let steps: [(&str, &[&str], &str); 7] = [
        ("simulate", &["simulate", "-o", "sim"], "sim"),
        ("convergence", &["convergence", "-o", "conv"], "conv"),
        ("sweep", &["sweep", "-o", "pipe"], "pipe/dataset.jsonl"),
        ("features", &["features", "-o", "pipe", "sim/audio.wav"], "pipe/features.jsonl"),
        ("train", &["train", "-o", "pipe"], "pipe/model.json"),
        ("infer", &["infer", "-o", "pipe", "sim/audio.wav"], ""),
        ("eval", &["eval", "-o", "pipe", "--split", "all"], "pipe/metrics.csv"),
    ];
    let mut hashes = BTreeMap::new();
    for (name, args, output) in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_strtac"))
            .current_dir(dir)
            .args(["-c", "tiny"])
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{name} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
        }
        let mut files: Vec<PathBuf> = if output.is_empty() {
            Vec::new()
        } else if dir.join(output).is_dir() {
            std::fs::read_dir(dir.join(output)).unwrap().map(|e| e.unwrap().path()).collect()
        } else {
            vec![dir.join(output)]
        };
        files.sort();
        let mut h = Sha256::new();
        h.update(&out.stdout);
        for f in &files {
            h.update(f.strip_prefix(dir).unwrap().to_string_lossy().as_bytes());
            h.update(std::fs::read(f).map_err(|e| e.to_string())?);
        }
        if name == "train" {
            h.update(std::fs::read(dir.join("pipe/training_report.csv")).map_err(|e| e.to_string())?);
        }
        hashes.insert(name.to_string(), hex::encode(h.finalize()));
    }
    Ok(hashes)
}

fn a7() -> Line {
    let runs: Result<Vec<_>, String> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            pipeline_hashes(dir.path())
        })
        .collect();
    match runs {
        Err(e) => Line {
            id: "A7",
            pass: false,
            detail: e,
        },
        Ok(r) => {
            let differing: Vec<&String> = r[0].keys().filter(|k| r[0][*k] != r[1][*k]).collect();
            Line {
                id: "A7",
                pass: differing.is_empty(),
                detail: if differing.is_empty() {
                    format!("{} subcommands byte-identical across two runs", r[0].len())
                } else {
                    format!("outputs differ for {differing:?}")
                },
            }
        }
    }
}

fn main() {
    let mut lines = vec![a1(), a2()];
    lines.extend(a3_to_a5());
    lines.push(a6());
    lines.push(a7());
    for l in &lines {
        println!("{} {}: {}", l.id, if l.pass { "PASS" } else { "FAIL" }, l.detail);
    }
    let failed = lines.iter().filter(|l| !l.pass).count();
    println!("acceptance: {} of {} criteria pass", lines.len() - failed, lines.len());
    if failed > 0 && std::env::var("STRTAC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
