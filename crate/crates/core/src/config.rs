//! Run configuration: a TOML file with one section per stage.
//!
//! ```toml
//! seed = 7
//!
//! [surface]
//! kind = "sphere"
//! radius = 1.0
//!
//! [rho]
//! kind = "constant"
//! value = 1.0
//!
//! [mesh]
//! nodes = 300
//!
//! [scan]
//! lambda_min = 15.0
//! lambda_max = 25.0
//! step = 0.25
//! ```
//!
//! Every key is optional except where noted; unknown keys are errors.

use crate::geometry::{injectivity_budget, JacobianKind, PerturbationField, PerturbedNode, SphereGrid, Surface};
use crate::kernels::PhaseRate;
use crate::layer::LayerOptions;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// Target node count N; the grid has `2(p + 1)²` nodes for the nearest p.
    pub nodes: i64,
    /// Extra polar-rule resolution; default `max(3, p/4)`.
    pub polar_extra: Option<usize>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { nodes: 300, polar_extra: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub step: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { lambda_min: 15.0, lambda_max: 25.0, step: 0.25 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    /// Explicit brackets; when empty, brackets come from the scan dips.
    #[serde(default)]
    pub brackets: Vec<[f64; 2]>,
    /// Eigenvalue whose cluster is perturbed; default the first found.
    pub target: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    /// δ values of the series-consistency fits.
    pub deltas: Vec<f64>,
    /// δ-step of the finite-difference oracles.
    pub fd_step: f64,
    /// δ at which the contour shift is compared with direct solves.
    pub contour_delta: f64,
    /// Evaluate eigenfunction and eigenpressure corrections.
    pub fields: bool,
    /// Number of interior probe points.
    pub probes: usize,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self { deltas: vec![0.02, 0.01, 0.005, 0.0025], fd_step: 1e-3, contour_delta: 1e-2, fields: true, probes: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourConfig {
    /// Radius override; default half the gap to the next dip, capped at 2.
    pub radius: Option<f64>,
    pub points: usize,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self { radius: None, points: crate::perturbation::CONTOUR_POINTS }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub phase_rate: PhaseRate,
    #[serde(default)]
    pub jacobian: JacobianKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Full run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub surface: Surface,
    pub rho: PerturbationField,
    pub mesh: MeshConfig,
    pub scan: ScanConfig,
    pub eigen: EigenConfig,
    pub perturbation: PerturbationConfig,
    pub contour: ContourConfig,
    pub kernel: KernelConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            surface: Surface::default(),
            rho: PerturbationField::default(),
            mesh: MeshConfig::default(),
            scan: ScanConfig::default(),
            eigen: EigenConfig::default(),
            perturbation: PerturbationConfig::default(),
            contour: ContourConfig::default(),
            kernel: KernelConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Line (1-based) of `key` inside `[section]`, or of the section header.
fn line_of(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, line) in source.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

/// Line of a parse error: the first line naming the offending key at or after the span start, else the span start.
fn parse_error_line(source: &str, span: std::ops::Range<usize>, msg: &str) -> usize {
    let start = span.start.min(source.len());
    let first = source[..start].matches('\n').count() + 1;
    let key = msg.strip_prefix("unknown field `").and_then(|r| r.split('`').next());
    key.and_then(|key| {
        source[start..].lines().position(|l| l.split_once('=').is_some_and(|(k, _)| k.trim() == key)).map(|i| first + i)
    })
    .unwrap_or(first)
}

fn anchored(source: &str, section: &str, key: &str, msg: String) -> Error {
    match line_of(source, section, key) {
        Some(l) => Error::Config(format!("line {l}: {msg}")),
        None => Error::Config(msg),
    }
}

impl RunConfig {
    /// Parses and validates a configuration document.
    pub fn parse(source: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(source).map_err(|e| {
            let msg = e.message().trim().to_string();
            let line = e.span().map(|s| parse_error_line(source, s, &msg));
            match line {
                Some(l) => Error::Config(format!("line {l}: {msg}")),
                None => Error::Config(msg),
            }
        })?;
        cfg.validate(source)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path)?;
        Self::parse(&source)
    }

    /// Canonical serialization used for hashing.
    pub fn canonical(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    /// Harmonic degree for the configured node count.
    pub fn degree(&self) -> usize {
        SphereGrid::degree_for_nodes(self.mesh.nodes.max(1) as usize)
    }

    pub fn layer_options(&self) -> LayerOptions {
        LayerOptions {
            degree: self.degree(),
            extra: self.mesh.polar_extra,
            jacobian: self.kernel.jacobian,
            rate: self.kernel.phase_rate,
        }
    }

    fn validate(&self, src: &str) -> Result<()> {
        if self.mesh.nodes < 18 {
            return Err(anchored(src, "mesh", "nodes", format!("mesh.nodes must be at least 18, got {}", self.mesh.nodes)));
        }
        self.surface.validate().map_err(|e| anchored(src, "surface", "kind", e.to_string()))?;
        self.rho.validate().map_err(|e| anchored(src, "rho", "kind", e.to_string()))?;
        let s = &self.scan;
        if !(s.lambda_min > 0.0 && s.lambda_max > s.lambda_min && s.step > 0.0) {
            return Err(anchored(src, "scan", "step", "scan range must satisfy 0 < lambda_min < lambda_max and step > 0".into()));
        }
        for b in &self.eigen.brackets {
            if !(b[0] > 0.0 && b[1] > b[0]) {
                return Err(anchored(src, "eigen", "brackets", format!("invalid bracket {b:?}")));
            }
        }
        let p = &self.perturbation;
        if !(p.fd_step > 0.0) || p.probes == 0 || p.deltas.iter().any(|d| !(*d > 0.0)) {
            return Err(anchored(src, "perturbation", "deltas", "deltas and fd_step must be positive, probes nonzero".into()));
        }
        if self.contour.points < 4 || self.contour.radius.is_some_and(|r| !(r > 0.0)) {
            return Err(anchored(src, "contour", "points", "contour needs a positive radius and at least 4 points".into()));
        }
        // Amplitude and δ-list admissibility on a coarse node set.
        let grid = SphereGrid::new(self.degree().min(12));
        let nodes: Vec<PerturbedNode> = grid.dirs.iter().map(|d| PerturbedNode::new(&self.surface, &self.rho, d)).collect();
        let proxy = crate::geometry::deform::c2_norm_proxy(&nodes);
        let scale = self.surface.inner_radius(&grid);
        let delta0 = injectivity_budget(&nodes);
        let largest = p.deltas.iter().copied().chain([p.contour_delta, 2.0 * p.fd_step]).fold(0.0, f64::max);
        if largest >= delta0 {
            return Err(anchored(
                src,
                "perturbation",
                "deltas",
                format!("largest delta {largest} exceeds the injectivity budget {delta0:.4}"),
            ));
        }
        if !(proxy.is_finite()) || proxy * largest >= scale {
            return Err(anchored(src, "rho", "kind", format!("perturbation C2 proxy {proxy:.3} too large for the delta list")));
        }
        Ok(())
    }
}
