//! Task heads over normalized feature vectors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::FeatureConfig;

pub const BUNDLE_VERSION: u32 = 1;
/// Smallest standard deviation kept when fitting a normalization; flatter
/// dimensions are treated as constant and only centred.
const STD_FLOOR: f64 = 1e-12;

#[inline]
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Per-dimension affine standardisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Population mean and standard deviation of `rows`.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let Some(first) = rows.first() else {
            return Err(Error::Dataset("cannot fit a normalization to zero rows".into()));
        };
        let dim = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in &rows {
            if r.len() != dim {
                return Err(Error::Shape(format!("row of length {} among rows of length {dim}", r.len())));
            }
            mean.iter_mut().zip(r.iter()).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in &rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > STD_FLOOR * (1.0 + sd.abs()) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != self.std.len() {
            return Err(Error::Model("normalization mean and std differ in length".into()));
        }
        if let Some(i) = self.std.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Model(format!("normalization std[{i}] = {} is not positive", self.std[i])));
        }
        Ok(())
    }
}

/// Scalar affine map between standardised network outputs and physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetScale {
    pub mean: f64,
    pub std: f64,
}

impl TargetScale {
    pub fn identity() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }

    pub fn fit(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::identity();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        Self {
            mean,
            std: if sd > STD_FLOOR { sd } else { 1.0 },
        }
    }

    pub fn encode(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn decode(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

/// Fully connected layer `y = W x + b` with `W` stored row-major (`outputs x inputs`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Weights uniform in `+-sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| rng.random_range(-limit..=limit)).collect(),
            bias: vec![0.0; outputs],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn forward_into(&self, x: &[f64], y: &mut Vec<f64>) {
        y.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            y.push(self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.outputs);
        self.forward_into(x, &mut y);
        y
    }

    /// Accumulates `dL/dW`, `dL/db` into `grad` and, when asked, writes `dL/dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense, dx: Option<&mut Vec<f64>>) {
        for (o, &g) in dy.iter().enumerate().take(self.outputs) {
            if g == 0.0 {
                continue;
            }
            grad.bias[o] += g;
            let row = &mut grad.weights[o * self.inputs..(o + 1) * self.inputs];
            row.iter_mut().zip(x).for_each(|(w, v)| *w += g * v);
        }
        if let Some(dx) = dx {
            dx.clear();
            dx.resize(self.inputs, 0.0);
            for (o, &g) in dy.iter().enumerate().take(self.outputs) {
                if g == 0.0 {
                    continue;
                }
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                dx.iter_mut().zip(row).for_each(|(d, w)| *d += g * w);
            }
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.weights.len() != self.inputs * self.outputs || self.bias.len() != self.outputs {
            return Err(Error::Model(format!(
                "{name}: {}x{} layer holds {} weights and {} biases",
                self.outputs,
                self.inputs,
                self.weights.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }
}

/// ReLU hidden layers followed by a linear scalar output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations kept for backpropagation: `inputs[l]` feeds layer `l`.
#[derive(Debug, Clone, Default)]
pub struct MlpTrace {
    inputs: Vec<Vec<f64>>,
    output: f64,
}

impl MlpTrace {
    pub fn output(&self) -> f64 {
        self.output
    }
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut widths = vec![inputs];
        widths.extend_from_slice(hidden);
        widths.push(1);
        Self {
            layers: widths.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Dense::parameter_count).sum()
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.trace(x).output
    }

    pub fn trace(&self, x: &[f64]) -> MlpTrace {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward(&cur);
            if l < last {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            inputs.push(std::mem::replace(&mut cur, y));
        }
        MlpTrace {
            inputs,
            output: cur[0],
        }
    }

    /// Accumulates parameter gradients for `dL/d(output) = d_out`.
    pub fn backward(&self, trace: &MlpTrace, d_out: f64, grad: &mut Mlp) {
        if d_out == 0.0 {
            return;
        }
        let mut dy = vec![d_out];
        let mut dx = Vec::new();
        for l in (0..self.layers.len()).rev() {
            let x = &trace.inputs[l];
            self.layers[l].backward(x, &dy, &mut grad.layers[l], (l > 0).then_some(&mut dx));
            if l > 0 {
                // x is the ReLU output of the previous layer; its derivative is 1 where positive.
                dy.clear();
                dy.extend(dx.iter().zip(x).map(|(d, a)| if *a > 0.0 { *d } else { 0.0 }));
            }
        }
    }

    fn check(&self, name: &str, inputs: usize) -> Result<()> {
        let Some(first) = self.layers.first() else {
            return Err(Error::Model(format!("{name} has no layers")));
        };
        if first.inputs != inputs {
            return Err(Error::Model(format!("{name} expects {} inputs, features have {inputs}", first.inputs)));
        }
        for (l, pair) in self.layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::Model(format!(
                    "{name}: layer {l} emits {} values but layer {} takes {}",
                    pair[0].outputs,
                    l + 1,
                    pair[1].inputs
                )));
            }
        }
        if self.layers.last().map(|l| l.outputs) != Some(1) {
            return Err(Error::Model(format!("{name} must end in a single output")));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            layer.check(&format!("{name}.layers[{l}]"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleMetadata {
    pub version: u32,
    pub feature_layout_hash: String,
    pub training_config_hash: String,
    /// Fingerprint of the dataset the bundle was fitted on, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_data: Option<String>,
    /// Per-cell fraction of windows used for training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    /// Extractor settings behind `feature_layout_hash`, absent for external embeddings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureConfig>,
}

/// Everything needed to map a raw feature vector to a contact estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBundle {
    pub metadata: BundleMetadata,
    pub normalization: Normalization,
    pub contact: Dense,
    pub slip: Dense,
    pub location: Mlp,
    pub force: Mlp,
    /// Network output to metres.
    pub location_scale: TargetScale,
    /// Network output to newtons.
    pub force_scale: TargetScale,
    /// `p_contact` at or above which the regression outputs are reported as meaningful.
    pub contact_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactEstimate {
    /// Window start time, s.
    pub time: f64,
    pub p_contact: f64,
    pub p_slip: f64,
    /// Estimated contact location, m.
    pub location: f64,
    /// Estimated normal force, N.
    pub force: f64,
    /// Whether `p_contact` reached the bundle threshold.
    pub contact: bool,
}

/// Intermediate values of one forward pass, reused by the loss.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub z: Vec<f64>,
    pub contact_logit: f64,
    pub slip_logit: f64,
    pub location: MlpTrace,
    pub force: MlpTrace,
}

impl ModelBundle {
    /// Fresh bundle with Glorot-initialised heads.
    pub fn initialise<R: Rng + ?Sized>(
        normalization: Normalization,
        hidden: &[usize],
        feature_layout_hash: String,
        rng: &mut R,
    ) -> Self {
        let dim = normalization.dim();
        Self {
            metadata: BundleMetadata {
                version: BUNDLE_VERSION,
                feature_layout_hash,
                training_config_hash: String::new(),
                training_data: None,
                train_fraction: None,
                features: None,
            },
            normalization,
            contact: Dense::glorot(dim, 1, rng),
            slip: Dense::glorot(dim, 1, rng),
            location: Mlp::new(dim, hidden, rng),
            force: Mlp::new(dim, hidden, rng),
            location_scale: TargetScale::identity(),
            force_scale: TargetScale::identity(),
            contact_threshold: 0.5,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.normalization.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.metadata.version != BUNDLE_VERSION {
            return Err(Error::Model(format!(
                "bundle version {} is not supported (expected {BUNDLE_VERSION})",
                self.metadata.version
            )));
        }
        self.normalization.validate()?;
        let dim = self.feature_dim();
        for (name, head) in [("contact", &self.contact), ("slip", &self.slip)] {
            head.check(name)?;
            if head.inputs != dim || head.outputs != 1 {
                return Err(Error::Model(format!("{name} head is {}x{}, expected 1x{dim}", head.outputs, head.inputs)));
            }
        }
        self.location.check("location", dim)?;
        self.force.check("force", dim)?;
        for (name, s) in [("location_scale", self.location_scale), ("force_scale", self.force_scale)] {
            if !(s.std > 0.0 && s.std.is_finite() && s.mean.is_finite()) {
                return Err(Error::Model(format!("{name} is degenerate: {s:?}")));
            }
        }
        Ok(())
    }

    pub fn check_layout(&self, layout_hash: &str) -> Result<()> {
        if self.metadata.feature_layout_hash != layout_hash {
            return Err(Error::Model(format!(
                "feature layout {layout_hash} does not match the bundle's {}",
                self.metadata.feature_layout_hash
            )));
        }
        Ok(())
    }

    pub fn trace(&self, features: &[f64]) -> Result<ForwardTrace> {
        if features.len() != self.feature_dim() {
            return Err(Error::Model(format!(
                "bundle expects {} features, got {}",
                self.feature_dim(),
                features.len()
            )));
        }
        let z = self.normalization.apply(features);
        Ok(ForwardTrace {
            contact_logit: self.contact.forward(&z)[0],
            slip_logit: self.slip.forward(&z)[0],
            location: self.location.trace(&z),
            force: self.force.trace(&z),
            z,
        })
    }

    /// Estimate for one raw (unnormalised) feature vector.
    pub fn forward(&self, features: &[f64]) -> Result<ContactEstimate> {
        let t = self.trace(features)?;
        let p_contact = sigmoid(t.contact_logit);
        Ok(ContactEstimate {
            time: 0.0,
            p_contact,
            p_slip: sigmoid(t.slip_logit),
            location: self.location_scale.decode(t.location.output()),
            force: self.force_scale.decode(t.force.output()),
            contact: p_contact >= self.contact_threshold,
        })
    }

    /// [`forward`](Self::forward) after checking the extractor's layout hash.
    pub fn forward_checked(&self, features: &[f64], layout_hash: &str) -> Result<ContactEstimate> {
        self.check_layout(layout_hash)?;
        self.forward(features)
    }

    pub fn parameter_count(&self) -> usize {
        self.contact.parameter_count()
            + self.slip.parameter_count()
            + self.location.parameter_count()
            + self.force.parameter_count()
    }

    /// Same architecture with every trainable parameter zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.contact = Dense::zeros(self.contact.inputs, 1);
        z.slip = Dense::zeros(self.slip.inputs, 1);
        z.location = self.location.zeros_like();
        z.force = self.force.zeros_like();
        z
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.contact.weights, &self.contact.bias, &self.slip.weights, &self.slip.bias];
        for mlp in [&self.location, &self.force] {
            for l in &mlp.layers {
                out.push(&l.weights);
                out.push(&l.bias);
            }
        }
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            &mut self.contact.weights,
            &mut self.contact.bias,
            &mut self.slip.weights,
            &mut self.slip.bias,
        ];
        for mlp in [&mut self.location, &mut self.force] {
            for l in &mut mlp.layers {
                out.push(&mut l.weights);
                out.push(&mut l.bias);
            }
        }
        out
    }

    /// Trainable parameters in a fixed order: contact, slip, location layers, force layers.
    pub fn parameters(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::Model(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                values.len()
            )));
        }
        let mut at = 0;
        for s in self.slices_mut() {
            s.copy_from_slice(&values[at..at + s.len()]);
            at += s.len();
        }
        Ok(())
    }

    /// Range of the flat parameter vector owned by the location and force MLPs.
    pub fn regression_parameter_range(&self) -> std::ops::Range<usize> {
        let start = self.contact.parameter_count() + self.slip.parameter_count();
        start..self.parameter_count()
    }

    /// Range of the flat parameter vector owned by the slip head.
    pub fn slip_parameter_range(&self) -> std::ops::Range<usize> {
        let start = self.contact.parameter_count();
        start..start + self.slip.parameter_count()
    }
}
