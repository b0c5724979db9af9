//! Labelled feature records and simulator-driven sweeps that produce them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inference::loss::Labels;
use crate::physics::ContactCondition;
use crate::simulator::{simulate, SimulationConfig};
use crate::spectral::features::EXTRACTOR_VERSION;
use crate::spectral::{
    augment_noise, dominant_frequency, fft_magnitude, sliding_windows, FeatureConfig, FeatureExtractor, NoiseSampler,
    NoiseSpec, WindowFunction,
};

pub const DATASET_FORMAT: &str = "string-tactile-dataset";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Simulated,
    External,
}

/// Noise applied to a copy of a clean window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationTag {
    pub policy: String,
    pub noise: NoiseSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub features: Vec<f64>,
    pub labels: Labels,
    pub provenance: Provenance,
    /// Seed of the simulation (or zero for external audio).
    pub seed: u64,
    /// Grid cell, or source file index for external audio.
    pub cell: usize,
    /// Window position within its cell, in time order.
    pub window: usize,
    /// Window start within the analysed audio, s.
    pub start_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<AugmentationTag>,
    /// Audio the features were computed from, when it lives in a file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl DatasetRecord {
    pub fn is_clean(&self) -> bool {
        self.augmentation.is_none()
    }

    pub fn policy(&self) -> Option<&str> {
        self.augmentation.as_ref().map(|a| a.policy.as_str())
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let at = || format!("record (cell {}, window {})", self.cell, self.window);
        if self.features.len() != dim {
            return Err(Error::Dataset(format!("{} has {} features, expected {dim}", at(), self.features.len())));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dataset(format!("{} has non-finite features", at())));
        }
        let l = &self.labels;
        if !l.contact && (l.slipping || l.force != 0.0) {
            return Err(Error::Dataset(format!("{} is labelled no-contact but carries slip or force", at())));
        }
        if !(l.force >= 0.0 && l.force.is_finite() && l.location.is_finite()) {
            return Err(Error::Dataset(format!("{} has invalid force/location labels", at())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub extractor_version: u32,
    pub layout_hash: String,
    pub feature_dim: usize,
    /// Extractor settings; absent for externally computed embeddings, whose
    /// producer supplies its own layout hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureConfig>,
}

impl DatasetHeader {
    pub fn for_features(features: &FeatureConfig) -> Self {
        Self {
            format: DATASET_FORMAT.into(),
            extractor_version: EXTRACTOR_VERSION,
            layout_hash: features.layout_hash(),
            feature_dim: features.dimension(),
            features: Some(*features),
        }
    }

    /// Header for vectors produced outside this crate.
    pub fn external(layout_hash: impl Into<String>, feature_dim: usize) -> Self {
        Self {
            format: DATASET_FORMAT.into(),
            extractor_version: EXTRACTOR_VERSION,
            layout_hash: layout_hash.into(),
            feature_dim,
            features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    /// SHA-256 over the canonical JSON of the header and every record.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.header).expect("header serialises"));
        for r in &self.records {
            h.update(b"\n");
            h.update(serde_json::to_vec(r).expect("record serialises"));
        }
        hex::encode(h.finalize())
    }

    pub fn validate(&self) -> Result<()> {
        if self.header.format != DATASET_FORMAT {
            return Err(Error::Dataset(format!("unknown format `{}`", self.header.format)));
        }
        if let Some(f) = &self.header.features {
            if self.header.layout_hash != f.layout_hash() || self.header.feature_dim != f.dimension() {
                return Err(Error::Dataset("header layout does not match its feature settings".into()));
            }
        }
        self.records
            .iter()
            .try_for_each(|r| r.validate(self.header.feature_dim))
    }
}

/// Noise copies added for every clean window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationPolicy {
    pub name: String,
    pub sampler: NoiseSampler,
    pub copies: usize,
}

/// Contact conditions to simulate. Locations are fractions of the string length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub locations: Vec<f64>,
    pub forces: Vec<f64>,
    /// Zero means a stuck contact; positive values slide at that speed, m/s.
    pub slip_speeds: Vec<f64>,
    pub no_contact_runs: usize,
}

impl Default for SweepGrid {
    /// 5 x 5 locations and forces, stuck and sliding, plus 5 free-string runs.
    fn default() -> Self {
        Self {
            locations: vec![0.2, 0.35, 0.5, 0.65, 0.8],
            forces: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            slip_speeds: vec![0.0, 0.02],
            no_contact_runs: 5,
        }
    }
}

/// One simulation of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    pub contact: ContactCondition<f64>,
    pub seed: u64,
}

impl SweepCell {
    pub fn label(&self) -> String {
        let c = &self.contact;
        if !c.in_contact {
            format!("#{} (no contact)", self.index)
        } else {
            format!(
                "#{} (x = {:.4} m, F = {:.3} N, slip = {:.4} m/s)",
                self.index, c.location, c.force, c.slip_speed
            )
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.locations.is_empty() || self.forces.is_empty() || self.slip_speeds.is_empty() {
            return Err(Error::config("sweep.grid", "locations, forces and slip_speeds must be non-empty"));
        }
        if let Some(x) = self.locations.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
            return Err(Error::config("sweep.grid.locations", format!("fractions must lie in (0, 1), got {x}")));
        }
        if let Some(f) = self.forces.iter().find(|f| !(**f >= 0.0)) {
            return Err(Error::config("sweep.grid.forces", format!("must be >= 0, got {f}")));
        }
        if let Some(s) = self.slip_speeds.iter().find(|s| !(**s >= 0.0)) {
            return Err(Error::config("sweep.grid.slip_speeds", format!("must be >= 0, got {s}")));
        }
        Ok(())
    }

    /// Contact cells in `(location, force, slip)` order, then the no-contact runs.
    pub fn cells(&self, total_length: f64, base_seed: u64) -> Vec<SweepCell> {
        let mut cells = Vec::new();
        for &x in &self.locations {
            for &f in &self.forces {
                for &s in &self.slip_speeds {
                    let contact = if s > 0.0 {
                        ContactCondition::sliding(x * total_length, f, s)
                    } else {
                        ContactCondition::pressed(x * total_length, f)
                    };
                    cells.push(contact);
                }
            }
        }
        cells.extend((0..self.no_contact_runs).map(|_| ContactCondition::none()));
        cells
            .into_iter()
            .enumerate()
            .map(|(index, contact)| SweepCell {
                index,
                contact,
                seed: base_seed.wrapping_add(index as u64),
            })
            .collect()
    }

    pub fn cell_count(&self) -> usize {
        self.locations.len() * self.forces.len() * self.slip_speeds.len() + self.no_contact_runs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub windows_per_cell: usize,
    /// Window length, s.
    pub window: f64,
    /// Window spacing, s.
    pub hop: f64,
    /// Leading audio discarded before windowing, s. Long enough for the
    /// free ringing left by the pluck to fall below the driven lines.
    pub transient: f64,
    /// Relative tolerance of the per-cell peak check; `None` skips it.
    pub self_check_tolerance: Option<f64>,
    pub features: FeatureConfig,
    pub augmentations: Vec<AugmentationPolicy>,
    /// Worker threads for cell simulation; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            windows_per_cell: 6,
            window: 0.1,
            hop: 0.1,
            transient: 0.8,
            self_check_tolerance: Some(0.02),
            features: FeatureConfig::default(),
            augmentations: Vec::new(),
            workers: None,
        }
    }
}

impl DatasetSpec {
    /// Simulated duration needed for the transient plus all windows.
    pub fn required_duration(&self) -> f64 {
        self.transient + self.window + self.hop * (self.windows_per_cell.saturating_sub(1)) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.windows_per_cell == 0 {
            return Err(Error::config("sweep.windows_per_cell", "must be >= 1"));
        }
        if !(self.window > 0.0 && self.hop > 0.0 && self.transient >= 0.0) {
            return Err(Error::config("sweep", "window and hop must be > 0, transient >= 0"));
        }
        if let Some(t) = self.self_check_tolerance {
            if !(t > 0.0) {
                return Err(Error::config("sweep.self_check_tolerance", format!("must be > 0, got {t}")));
            }
        }
        self.features.validate()?;
        for (i, p) in self.augmentations.iter().enumerate() {
            p.sampler
                .validate()
                .map_err(|e| Error::config(format!("sweep.augmentations[{i}]"), e.to_string()))?;
        }
        Ok(())
    }
}

/// Compares each pickup's dominant steady-state peak with the segment's
/// predicted fundamental.
pub fn check_cell_peaks(
    config: &SimulationConfig<f64>,
    pickups: &crate::audio::StereoAudio<f64>,
    transient: f64,
    tolerance: f64,
) -> Result<()> {
    let start = ((transient * pickups.sample_rate).round() as usize).min(pickups.frames());
    let predicted = config.predicted_fundamentals()?;
    for (k, f) in predicted.iter().enumerate() {
        let x = &pickups.channel(k)[start..];
        let band = config.drives[k].feedback_band;
        let s = fft_magnitude(x, pickups.sample_rate, WindowFunction::Hann);
        let got = dominant_frequency(&s, band)
            .ok_or_else(|| Error::Dataset(format!("segment {} has no in-band peak", k + 1)))?;
        let rel = (got - f).abs() / f;
        if rel > tolerance {
            return Err(Error::Dataset(format!(
                "segment {} dominant peak {got:.2} Hz is {:.2}% from the predicted {f:.2} Hz",
                k + 1,
                rel * 100.0
            )));
        }
    }
    Ok(())
}

fn run_cell(cell: &SweepCell, template: &SimulationConfig<f64>, spec: &DatasetSpec) -> Result<Vec<DatasetRecord>> {
    let mut config = template.clone();
    config.contact = cell.contact;
    config.seed = cell.seed;
    config.duration = spec.required_duration();
    let out = simulate(&config)?;
    if let Some(tol) = spec.self_check_tolerance {
        check_cell_peaks(&config, &out.pickups, spec.transient, tol)?;
    }
    let skip = ((spec.transient * out.audio.sample_rate).round() as usize).min(out.audio.frames());
    let steady = out.audio.slice(skip, out.audio.frames() - skip);
    let windows = sliding_windows(&steady, spec.window, spec.hop)?;
    if windows.len() < spec.windows_per_cell {
        return Err(Error::Dataset(format!(
            "only {} windows available, {} requested",
            windows.len(),
            spec.windows_per_cell
        )));
    }
    let labels = Labels {
        contact: cell.contact.in_contact,
        slipping: cell.contact.slipping,
        location: cell.contact.location,
        force: cell.contact.force,
    };
    let mut extractor = FeatureExtractor::new(spec.features)?;
    let mut records = Vec::new();
    for w in windows.into_iter().take(spec.windows_per_cell) {
        let base = DatasetRecord {
            features: extractor.extract(&w.audio)?.values,
            labels,
            provenance: Provenance::Simulated,
            seed: cell.seed,
            cell: cell.index,
            window: w.index,
            start_time: spec.transient + w.start_time,
            augmentation: None,
            source: None,
        };
        records.push(base.clone());
        for policy in &spec.augmentations {
            for copy in 0..policy.copies {
                let key = ((cell.index as u64) << 32) | ((w.index as u64) << 16) | copy as u64;
                let noise = policy.sampler.spec(key);
                let noisy = augment_noise(&w.audio, &noise)?;
                records.push(DatasetRecord {
                    features: extractor.extract(&noisy)?.values,
                    augmentation: Some(AugmentationTag {
                        policy: policy.name.clone(),
                        noise,
                    }),
                    ..base.clone()
                });
            }
        }
    }
    Ok(records)
}

/// Simulates every grid cell (in parallel), windows the steady-state audio and
/// extracts features. Any failing cell aborts the whole sweep.
pub fn generate_sim_dataset(
    grid: &SweepGrid,
    template: &SimulationConfig<f64>,
    spec: &DatasetSpec,
) -> Result<Dataset> {
    grid.validate()?;
    spec.validate()?;
    let cells = grid.cells(template.string.total_length, template.seed);
    let work = || -> Result<Vec<Vec<DatasetRecord>>> {
        cells
            .par_iter()
            .map(|cell| {
                run_cell(cell, template, spec).map_err(|e| Error::Cell {
                    cell: cell.label(),
                    source: Box::new(e),
                })
            })
            .collect()
    };
    let per_cell = match spec.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::config("sweep.workers", e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    Ok(Dataset {
        header: DatasetHeader::for_features(&spec.features),
        records: per_cell.into_iter().flatten().collect(),
    })
}
