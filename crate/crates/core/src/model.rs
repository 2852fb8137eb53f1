//! DNN descriptors, partition points and per-partition features.
//!
//! A descriptor is an ordered chain of units (layers, or residual blocks
//! treated atomically). Cutting after unit `p` gives partition point `p`:
//! units `1..=p` run on the device, units `p+1..=P` run on the edge server.
//! Partition `0` offloads the raw input and partition `P` keeps everything
//! on the device.
//!
//! Units used throughout: MACs in GMAC, tensor sizes in MB, delays in ms.

use std::ops::Index;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{from_json_str, Error, Result};

/// Number of contextual features per partition point.
pub const FEATURE_DIM: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Fc,
    Act,
    /// Pooling, normalization and similar. MACs are billed to the activation
    /// bucket; the unit does not count as an activation layer.
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    /// GMAC performed by this unit.
    pub gmacs: f64,
    /// MB transmitted if the network is cut right after this unit,
    /// including any framing overhead.
    pub output_mb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnnDescriptor {
    pub name: String,
    /// Size of the raw input in MB; this is what partition 0 transmits.
    pub input_size_mb: f64,
    pub units: Vec<LayerSpec>,
}

impl DnnDescriptor {
    /// Index of the pure on-device partition. Valid partitions are `0..=P`.
    pub fn on_device(&self) -> usize {
        self.units.len()
    }

    pub fn partition_count(&self) -> usize {
        self.units.len() + 1
    }

    pub fn total_gmacs(&self) -> f64 {
        self.units.iter().map(|u| u.gmacs).sum()
    }

    /// Name of the unit a partition cuts after, `"input"` for partition 0.
    pub fn cut_name(&self, p: usize) -> &str {
        match p {
            0 => "input",
            _ => self.units.get(p - 1).map_or("?", |u| u.name.as_str()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.units.is_empty() {
            return Err(Error::NoPartitionPoints(self.name.clone()));
        }
        check_non_negative("input_size_mb", self.input_size_mb)?;
        for (i, unit) in self.units.iter().enumerate() {
            check_non_negative(&format!("units[{i}] ({}).gmacs", unit.name), unit.gmacs)?;
            check_non_negative(&format!("units[{i}] ({}).output_mb", unit.name), unit.output_mb)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_descriptor(&text)
    }
}

fn check_non_negative(path: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::schema(path, format!("must be a finite value >= 0, got {value}")));
    }
    Ok(())
}

/// Parses and validates a descriptor document.
pub fn parse_descriptor(text: &str) -> Result<DnnDescriptor> {
    let desc: DnnDescriptor = from_json_str(text)?;
    desc.validate()?;
    Ok(desc)
}

/// Per-partition feature vector
/// `[m_conv, m_fc, m_act, n_conv, n_fc, n_act, psi]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContextVector(pub [f64; FEATURE_DIM]);

impl ContextVector {
    pub const ZERO: ContextVector = ContextVector([0.0; FEATURE_DIM]);

    pub fn as_array(&self) -> &[f64; FEATURE_DIM] {
        &self.0
    }

    pub fn m_conv(&self) -> f64 {
        self.0[0]
    }
    pub fn m_fc(&self) -> f64 {
        self.0[1]
    }
    pub fn m_act(&self) -> f64 {
        self.0[2]
    }
    pub fn n_conv(&self) -> f64 {
        self.0[3]
    }
    pub fn n_fc(&self) -> f64 {
        self.0[4]
    }
    pub fn n_act(&self) -> f64 {
        self.0[5]
    }
    /// Intermediate output size in MB.
    pub fn psi(&self) -> f64 {
        self.0[6]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn dot(&self, coef: &[f64; FEATURE_DIM]) -> f64 {
        self.0.iter().zip(coef).map(|(x, c)| x * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Index<usize> for ContextVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Builds the feature vector of partition `p`: aggregates over the back-end
/// units `p+1..=P`, plus the size of what has to be transmitted.
pub fn build_context(desc: &DnnDescriptor, p: usize) -> Result<ContextVector> {
    let max = desc.on_device();
    if p > max {
        return Err(Error::PartitionOutOfRange { p, max });
    }
    let mut x = [0.0; FEATURE_DIM];
    for unit in &desc.units[p..] {
        match unit.kind {
            LayerKind::Conv => {
                x[0] += unit.gmacs;
                x[3] += 1.0;
            }
            LayerKind::Fc => {
                x[1] += unit.gmacs;
                x[4] += 1.0;
            }
            LayerKind::Act => {
                x[2] += unit.gmacs;
                x[5] += 1.0;
            }
            LayerKind::Other => x[2] += unit.gmacs,
        }
    }
    x[6] = if p == 0 {
        desc.input_size_mb
    } else if p == max {
        0.0
    } else {
        desc.units[p - 1].output_mb
    };
    Ok(ContextVector(x))
}

/// Feature vectors for every partition, indexed by `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextTable {
    rows: Vec<ContextVector>,
}

impl ContextTable {
    pub fn from_rows(rows: Vec<ContextVector>) -> Self {
        ContextTable { rows }
    }

    pub fn rows(&self) -> &[ContextVector] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn on_device(&self) -> usize {
        self.rows.len() - 1
    }

    /// Component-wise maxima; columns that are identically zero get scale 1.
    pub fn feature_scale(&self) -> FeatureScale {
        let mut scale = [0.0f64; FEATURE_DIM];
        for row in &self.rows {
            for (s, v) in scale.iter_mut().zip(row.0) {
                *s = s.max(v.abs());
            }
        }
        for s in &mut scale {
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        FeatureScale(scale)
    }

    /// Table rescaled so every component lies in `[0, 1]`.
    pub fn normalized(&self) -> (ContextTable, FeatureScale) {
        let scale = self.feature_scale();
        let rows = self.rows.iter().map(|x| scale.normalize(x)).collect();
        (ContextTable { rows }, scale)
    }
}

impl Index<usize> for ContextTable {
    type Output = ContextVector;

    fn index(&self, p: usize) -> &ContextVector {
        &self.rows[p]
    }
}

/// Per-component divisors mapping raw features into the unit box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScale(pub [f64; FEATURE_DIM]);

impl FeatureScale {
    pub fn normalize(&self, x: &ContextVector) -> ContextVector {
        let mut out = x.0;
        for (o, s) in out.iter_mut().zip(self.0) {
            *o /= s;
        }
        ContextVector(out)
    }

    /// Maps coefficients learned on raw features into normalized space, so
    /// that `normalize(x) . to_normalized(theta) == x . theta`.
    pub fn theta_to_normalized(&self, theta: &[f64; FEATURE_DIM]) -> [f64; FEATURE_DIM] {
        std::array::from_fn(|i| theta[i] * self.0[i])
    }

    pub fn theta_to_raw(&self, theta: &[f64; FEATURE_DIM]) -> [f64; FEATURE_DIM] {
        std::array::from_fn(|i| theta[i] / self.0[i])
    }
}

pub fn context_table(desc: &DnnDescriptor) -> Result<ContextTable> {
    (0..=desc.on_device())
        .map(|p| build_context(desc, p))
        .collect::<Result<Vec<_>>>()
        .map(ContextTable::from_rows)
}

/// Mobile-device cost model used to produce the known front-end delays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub ms_per_gmac_conv: f64,
    pub ms_per_gmac_fc: f64,
    /// Also applied to `other` units.
    pub ms_per_gmac_act: f64,
    /// Paid once per inference whenever at least one unit runs on the device.
    pub fixed_overhead_ms: f64,
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<()> {
        check_non_negative("device.ms_per_gmac_conv", self.ms_per_gmac_conv)?;
        check_non_negative("device.ms_per_gmac_fc", self.ms_per_gmac_fc)?;
        check_non_negative("device.ms_per_gmac_act", self.ms_per_gmac_act)?;
        check_non_negative("device.fixed_overhead_ms", self.fixed_overhead_ms)
    }

    fn rate(&self, kind: LayerKind) -> f64 {
        match kind {
            LayerKind::Conv => self.ms_per_gmac_conv,
            LayerKind::Fc => self.ms_per_gmac_fc,
            LayerKind::Act | LayerKind::Other => self.ms_per_gmac_act,
        }
    }
}

/// Front-end delay `d_f(p)` in ms for every partition point.
pub fn frontend_profile(desc: &DnnDescriptor, device: &DeviceProfile) -> Vec<f64> {
    let mut out = Vec::with_capacity(desc.partition_count());
    out.push(0.0);
    let mut acc = device.fixed_overhead_ms;
    for unit in &desc.units {
        acc += unit.gmacs * device.rate(unit.kind);
        out.push(acc);
    }
    out
}
