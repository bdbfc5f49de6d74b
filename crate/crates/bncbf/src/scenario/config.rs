//! Scenario file schema and CLI override plumbing. Scenarios are JSON with
//! the structure mirrored one-to-one by these types, so a run's summary can
//! embed the exact configuration it executed.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::geometry::PolytopeTemplate;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    /// Control period in seconds.
    pub dt: f64,
    /// Total simulated time in seconds.
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    pub params: ConstraintParams,
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub fov: FovConfig,
    /// "auto" derives the barrier tree from agent roles; otherwise a nested
    /// expression like ["and", ["leaf", "ca:1:2"], ["or", ...]].
    #[serde(default)]
    pub tree: TreeConfig,
    /// Skip distance solves whose bounding-sphere bound proves them far from
    /// active this step.
    #[serde(default)]
    pub broad_phase: bool,
    /// Extra slack added to eps1 when deciding a solve may be skipped.
    #[serde(default = "default_broad_phase_margin")]
    pub broad_phase_margin: f64,
    /// Amplitude of uniform initial-position jitter (x, y), seeded.
    #[serde(default)]
    pub jitter: f64,
    /// Run the nominal controller unfiltered; violations are expected.
    #[serde(default)]
    pub filter_bypass: bool,
    /// Log the one-step barrier-decrease check (doubles distance solves).
    #[serde(default)]
    pub verify_decrease: bool,
}

fn default_broad_phase_margin() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintParams {
    pub r_min: f64,
    pub r_max: f64,
    pub r_ca: f64,
    #[serde(default)]
    pub r_los: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_eps")]
    pub eps1: f64,
    #[serde(default = "default_eps")]
    pub eps2: f64,
    #[serde(default = "default_alpha_slope")]
    pub alpha_slope: f64,
    #[serde(default = "default_u_max")]
    pub u_max: f64,
}

fn default_mu() -> f64 {
    100.0
}

fn default_eps() -> f64 {
    0.01
}

fn default_alpha_slope() -> f64 {
    0.2
}

fn default_u_max() -> f64 {
    0.2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Leader,
    Follower,
    Obstacle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentConfig {
    pub id: u32,
    pub role: Role,
    #[serde(default)]
    pub template: TemplateConfig,
    /// Pose [x, y, z, theta, psi] in meters and radians.
    pub pose: [f64; 5],
    #[serde(default)]
    pub goal: Option<[f64; 5]>,
    #[serde(default)]
    pub mask: MaskConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TemplateConfig {
    /// "tetrahedron"
    Named(String),
    /// {"tetrahedron": {"scale": 0.5}}
    Scaled {
        tetrahedron: ScaleSpec,
    },
    /// {"box": {"half_extents": [0.6, 0.6, 0.6]}}
    Box {
        #[serde(rename = "box")]
        half: BoxSpec,
    },
    /// {"halfspaces": {"a0": [[...]], "b0": [...]}}
    Explicit {
        halfspaces: HalfspaceSpec,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleSpec {
    pub scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxSpec {
    pub half_extents: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HalfspaceSpec {
    pub a0: Vec<[f64; 3]>,
    pub b0: Vec<f64>,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        TemplateConfig::Named("tetrahedron".to_string())
    }
}

impl TemplateConfig {
    pub fn build(&self) -> Result<PolytopeTemplate, ScenarioError> {
        match self {
            TemplateConfig::Named(name) => match name.as_str() {
                "tetrahedron" => Ok(PolytopeTemplate::tetrahedron()),
                other => Err(ScenarioError::Config(format!(
                    "unknown template name {other:?}"
                ))),
            },
            TemplateConfig::Scaled { tetrahedron } => Ok(PolytopeTemplate::tetrahedron()
                .scaled(tetrahedron.scale)
                .map_err(ScenarioError::Geometry)?),
            TemplateConfig::Box { half } => {
                let h = half.half_extents;
                Ok(PolytopeTemplate::cuboid(Vector3::new(h[0], h[1], h[2]))
                    .map_err(ScenarioError::Geometry)?)
            }
            TemplateConfig::Explicit { halfspaces } => {
                let rows = halfspaces.a0.len();
                if rows != halfspaces.b0.len() {
                    return Err(ScenarioError::Config(
                        "halfspace template: a0 and b0 lengths differ".to_string(),
                    ));
                }
                let mut flat = Vec::with_capacity(rows * 3);
                for r in &halfspaces.a0 {
                    flat.extend_from_slice(r);
                }
                let a0 = nalgebra::DMatrix::from_row_slice(rows, 3, &flat);
                let b0 = nalgebra::DVector::from_vec(halfspaces.b0.clone());
                Ok(PolytopeTemplate::new(a0, b0).map_err(ScenarioError::Geometry)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskConfig {
    Full,
    Usv,
    Uuv,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig::Full
    }
}

impl MaskConfig {
    pub fn build(&self) -> crate::dynamics::ActuationMask {
        match self {
            MaskConfig::Full => crate::dynamics::ActuationMask::full(),
            MaskConfig::Usv => crate::dynamics::ActuationMask::surface_vessel(),
            MaskConfig::Uuv => crate::dynamics::ActuationMask::submerged_vessel(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FovConfig {
    Ellipsoidal { half_angle_deg: f64 },
    Polyhedral { faces: PolyhedralFaces },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolyhedralFaces {
    /// "camera" selects the stock four-face camera cone.
    Named(String),
    Explicit(Vec<[f64; 3]>),
}

impl Default for FovConfig {
    fn default() -> Self {
        FovConfig::Ellipsoidal {
            half_angle_deg: 15.0,
        }
    }
}

impl FovConfig {
    /// Resolve to concrete face vectors (polyhedral) or a half angle in
    /// radians (ellipsoidal), validating the printed-face norm tolerance.
    pub fn resolve(&self) -> Result<ResolvedFov, ScenarioError> {
        match self {
            FovConfig::Ellipsoidal { half_angle_deg } => {
                if !(*half_angle_deg > 0.0 && *half_angle_deg < 90.0) {
                    return Err(ScenarioError::Config(format!(
                        "fov half angle must be in (0, 90) deg, got {half_angle_deg}"
                    )));
                }
                Ok(ResolvedFov::Ellipsoidal {
                    half_angle: half_angle_deg.to_radians(),
                })
            }
            FovConfig::Polyhedral { faces } => {
                let cols: Vec<Vector3<f64>> = match faces {
                    PolyhedralFaces::Named(name) if name == "camera" => {
                        crate::constraints::FovCone::camera_cone_faces().to_vec()
                    }
                    PolyhedralFaces::Named(other) => {
                        return Err(ScenarioError::Config(format!(
                            "unknown polyhedral fov preset {other:?}"
                        )))
                    }
                    PolyhedralFaces::Explicit(rows) => rows
                        .iter()
                        .map(|r| Vector3::new(r[0], r[1], r[2]))
                        .collect(),
                };
                if cols.is_empty() {
                    return Err(ScenarioError::Config("polyhedral fov has no faces".into()));
                }
                for c in &cols {
                    if (c.norm() - 1.0).abs() > 1e-2 {
                        return Err(ScenarioError::Config(format!(
                            "polyhedral fov face {c:?} is not unit within 1e-2"
                        )));
                    }
                }
                Ok(ResolvedFov::Polyhedral { faces: cols })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum ResolvedFov {
    Ellipsoidal { half_angle: f64 },
    Polyhedral { faces: Vec<Vector3<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeConfig {
    /// "auto"
    Named(String),
    /// Nested expression of arrays.
    Expression(serde_json::Value),
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig::Named("auto".to_string())
    }
}

/// CLI overrides; every field mirrors a scenario key.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub alpha_slope: Option<f64>,
    pub seed: Option<u64>,
    pub filter_bypass: bool,
    pub broad_phase: Option<bool>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ScenarioConfig) {
        if let Some(dt) = self.dt {
            config.dt = dt;
        }
        if let Some(duration) = self.duration {
            config.duration = duration;
        }
        if let Some(eps1) = self.eps1 {
            config.params.eps1 = eps1;
        }
        if let Some(eps2) = self.eps2 {
            config.params.eps2 = eps2;
        }
        if let Some(slope) = self.alpha_slope {
            config.params.alpha_slope = slope;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if self.filter_bypass {
            config.filter_bypass = true;
        }
        if let Some(bp) = self.broad_phase {
            config.broad_phase = bp;
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let config: ScenarioConfig = serde_json::from_str(text)?;
        config.validate_shape()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    fn validate_shape(&self) -> Result<(), ScenarioError> {
        if self.dt <= 0.0 {
            return Err(ScenarioError::Config("dt must be positive".into()));
        }
        if self.duration < 0.0 {
            return Err(ScenarioError::Config("duration must be nonnegative".into()));
        }
        if self.agents.is_empty() {
            return Err(ScenarioError::Config("no agents".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for a in &self.agents {
            if !ids.insert(a.id) {
                return Err(ScenarioError::Config(format!("duplicate agent id {}", a.id)));
            }
            if a.role != Role::Obstacle && a.goal.is_none() {
                return Err(ScenarioError::Config(format!(
                    "agent {} is controlled but has no goal",
                    a.id
                )));
            }
        }
        let p = &self.params;
        if !(p.r_min > 0.0 && p.r_max >= p.r_min) {
            return Err(ScenarioError::Config("invalid range band".into()));
        }
        if p.r_ca <= 0.0 {
            return Err(ScenarioError::Config("r_ca must be positive".into()));
        }
        if p.r_los < 0.0 {
            return Err(ScenarioError::Config("r_los must be nonnegative".into()));
        }
        if p.eps1 <= 0.0 || p.eps2 <= 0.0 {
            return Err(ScenarioError::Config("eps1 and eps2 must be positive".into()));
        }
        if p.alpha_slope <= 0.0 {
            return Err(ScenarioError::Config("alpha slope must be positive".into()));
        }
        if p.mu <= 0.0 {
            return Err(ScenarioError::Config("mu must be positive".into()));
        }
        self.fov.resolve()?;
        Ok(())
    }
}
