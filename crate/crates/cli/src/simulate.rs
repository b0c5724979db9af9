//! `simulate` and `convergence`: one run, checked against the closed-form
//! segment fundamentals.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use string_tactile::audio::StereoAudio;
use string_tactile::io::{self, RunConfig, WavSpec};
use string_tactile::physics::ContactCondition;
use string_tactile::simulator::{simulate as run_simulation, SimulationConfig};
use string_tactile::spectral::{dominant_frequency, fft_magnitude, spectrogram, Spectrum, WindowFunction};
use string_tactile::Error;

use crate::Outcome;

#[derive(Debug, Clone, Serialize)]
struct ChannelPeak {
    channel: usize,
    dominant_hz: Option<f64>,
    predicted_hz: f64,
    relative_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected_relative_error: Option<f64>,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct WindowReport {
    window: [f64; 2],
    channels: Vec<ChannelPeak>,
}

#[derive(Debug, Serialize)]
struct Summary {
    contact: ContactCondition<f64>,
    tolerance: f64,
    steady: WindowReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    transient: Option<WindowReport>,
    pass: bool,
}

fn cut(audio: &StereoAudio<f64>, [a, b]: [f64; 2], key: &str) -> Result<StereoAudio<f64>> {
    let duration = audio.duration();
    if b > duration + 0.5 / audio.sample_rate {
        return Err(Error::Config {
            key: key.into(),
            reason: format!("window ends at {b} s but the run lasts {duration} s"),
        }
        .into());
    }
    let start = (a * audio.sample_rate).round() as usize;
    let end = ((b * audio.sample_rate).round() as usize).min(audio.frames());
    Ok(audio.slice(start, end - start))
}

fn spectra(audio: &StereoAudio<f64>) -> [Spectrum<f64>; 2] {
    [0, 1].map(|k| fft_magnitude(audio.channel(k), audio.sample_rate, WindowFunction::Hann))
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b
}

fn peaks(sim: &SimulationConfig<f64>, spectra: &[Spectrum<f64>; 2], expected: Option<&[f64]>, tolerance: f64) -> Result<Vec<ChannelPeak>> {
    let predicted = sim.predicted_fundamentals()?;
    if let Some(e) = expected {
        if e.len() != predicted.len() {
            return Err(Error::Config {
                key: "analysis.expected_peaks".into(),
                reason: format!("{} values given for {} vibrating segments", e.len(), predicted.len()),
            }
            .into());
        }
    }
    Ok(predicted
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            let dominant = dominant_frequency(&spectra[k], sim.drives[k].feedback_band);
            let relative_error = dominant.map(|d| relative(d, f));
            let expected_hz = expected.map(|e| e[k]);
            let expected_relative_error = dominant.zip(expected_hz).map(|(d, e)| relative(d, e));
            let pass = relative_error.is_some_and(|r| r <= tolerance)
                && expected_relative_error.is_none_or(|r| r <= tolerance);
            ChannelPeak {
                channel: k + 1,
                dominant_hz: dominant,
                predicted_hz: f,
                relative_error,
                expected_hz,
                expected_relative_error,
                pass,
            }
        })
        .collect())
}

fn print_rows(label: &str, rows: &[ChannelPeak]) {
    for p in rows {
        let hz = p.dominant_hz.map_or("none".to_string(), |d| format!("{d:.2}"));
        let err = p.relative_error.map_or("-".to_string(), |r| format!("{:.3}", r * 100.0));
        println!("{label:<10} ch{}  peak {hz:>9} Hz  predicted {:>9.2} Hz  error {err:>6} %", p.channel, p.predicted_hz);
    }
}

fn write_json(value: &impl Serialize, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn verdict(pass: bool, tolerance: f64) -> Outcome {
    let word = if pass { "PASS" } else { "FAIL" };
    println!("{word}: steady-state peaks within {:.1}% of prediction", tolerance * 100.0);
    Outcome::from_pass(pass)
}

pub fn simulate(config: &RunConfig) -> Result<Outcome> {
    let a = &config.analysis;
    let out = &config.paths.out_dir;
    let run = run_simulation(&config.simulation)?;
    let audio = run.audio;
    io::write_wav(&audio, &WavSpec::for_audio(&audio, a.wav_encoding)?, out.join("audio.wav"))?;

    let steady = spectra(&cut(&audio, a.steady, "analysis.steady")?);
    for (k, s) in steady.iter().enumerate() {
        io::write_spectrum_csv(s, out.join(format!("spectrum_ch{}.csv", k + 1)))?;
    }
    let channels = peaks(&config.simulation, &steady, a.expected_peaks.as_deref(), a.tolerance)?;
    let pass = channels.iter().all(|p| p.pass);
    print_rows("steady", &channels);
    write_json(
        &Summary {
            contact: config.simulation.contact,
            tolerance: a.tolerance,
            steady: WindowReport {
                window: a.steady,
                channels,
            },
            transient: None,
            pass,
        },
        &out.join("summary.json"),
    )?;
    Ok(verdict(pass, a.tolerance))
}

pub fn convergence(config: &RunConfig) -> Result<Outcome> {
    let a = &config.analysis;
    let out = &config.paths.out_dir;
    let audio = run_simulation(&config.simulation)?.audio;

    let mut reports = Vec::new();
    for (name, window, key) in [
        ("transient", a.transient, "analysis.transient"),
        ("steady", a.steady, "analysis.steady"),
    ] {
        let part = cut(&audio, window, key)?;
        let start = (window[0] * audio.sample_rate).round() as usize;
        io::write_trace_csv(&audio, start, part.frames(), out.join(format!("trace_{name}.csv")))?;
        let s = spectra(&part);
        for (k, spec) in s.iter().enumerate() {
            io::write_spectrum_csv(spec, out.join(format!("fft_{name}_ch{}.csv", k + 1)))?;
        }
        let expected = (name == "steady").then_some(a.expected_peaks.as_deref()).flatten();
        let rows = peaks(&config.simulation, &s, expected, a.tolerance)?;
        print_rows(name, &rows);
        reports.push(WindowReport { window, channels: rows });
    }
    let sg = spectrogram(&audio, a.frame, a.hop)?;
    for k in 0..2 {
        io::write_spectrogram_csv(&sg, k, out.join(format!("spectrogram_ch{}.csv", k + 1)))?;
    }

    let steady = reports.pop().expect("two windows");
    let transient = reports.pop();
    let pass = steady.channels.iter().all(|p| p.pass);
    write_json(
        &Summary {
            contact: config.simulation.contact,
            tolerance: a.tolerance,
            steady,
            transient,
            pass,
        },
        &out.join("convergence.json"),
    )?;
    Ok(verdict(pass, a.tolerance))
}
