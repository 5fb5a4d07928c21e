//! Scenario files: the JSON schema and its translation into core objects.

use std::path::{Path, PathBuf};

use conestab::cone::SolidCone;
use conestab::density::{DerivativeMode, HomogeneousDensity, Profile};
use conestab::expr::Expression;
use conestab::linalg::Vec3;
use conestab::stability::SpectrumMode;
use conestab::surface::{DiscreteHypersurface, RoundChart, DEFAULT_TOL_BOUNDARY};
use conestab::{Cone, Density, Surface};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub ambient_dim: usize,
    pub cone: ConeSpec,
    pub density: DensitySpec,
    pub surface: SurfaceSpec,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConeSpec {
    Full,
    HalfSpace,
    Circular { axis: Vec<f64>, half_aperture: f64 },
    Sector { angle: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Radial {
        k: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Monomial {
        exponents: Vec<f64>,
    },
    LinearPower {
        xi: Vec<f64>,
        k: f64,
    },
    PerturbedRadial {
        k: f64,
        linear: Vec<f64>,
        quadratic: [[f64; 3]; 3],
        amplitude: f64,
    },
    Expression {
        k: f64,
        expression: String,
        /// Sphere step for the difference jets.
        #[serde(default)]
        step: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Parametric,
    Fem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub shape: Shape,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub backend: BackendKind,
}

fn default_grid() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Cap {
        radius: f64,
    },
    SphereThroughOrigin {
        center: Vec<f64>,
        #[serde(default)]
        puncture: Option<f64>,
    },
    Sphere {
        center: Vec<f64>,
        radius: f64,
    },
    Ellipsoid {
        center: Vec<f64>,
        semi_axes: Vec<f64>,
    },
    RadialGraph {
        rho: String,
    },
    /// OBJ triangle mesh or two-column CSV polyline, relative to the
    /// scenario file.
    Import {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Analysis {
    CertifyCd {
        #[serde(default)]
        expect: Option<bool>,
    },
    Geometry,
    Minkowski,
    Spectrum {
        #[serde(default)]
        mode: ModeSpec,
        #[serde(default)]
        expect_f_stable: Option<bool>,
        #[serde(default)]
        expect_strongly_f_stable: Option<bool>,
    },
    Variation {
        variation: VariationKind,
        /// Normal speed in `x, y, z, theta, phi`; a random mean-zero field
        /// from `seed` when absent.
        #[serde(default)]
        u: Option<String>,
        #[serde(default)]
        dt: Option<f64>,
    },
    CutoffDecay {
        eps: Vec<f64>,
    },
    Umbilicity,
    Sweep {
        parameter: SweepParameter,
        from: f64,
        to: f64,
        steps: usize,
    },
}

impl Analysis {
    pub fn name(&self) -> &'static str {
        match self {
            Analysis::CertifyCd { .. } => "certify_cd",
            Analysis::Geometry => "geometry",
            Analysis::Minkowski => "minkowski",
            Analysis::Spectrum { .. } => "spectrum",
            Analysis::Variation { .. } => "variation",
            Analysis::CutoffDecay { .. } => "cutoff_decay",
            Analysis::Umbilicity => "umbilicity",
            Analysis::Sweep { .. } => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    All,
    MeanZero,
    #[default]
    Both,
}

impl ModeSpec {
    pub fn modes(self) -> Vec<SpectrumMode> {
        match self {
            ModeSpec::All => vec![SpectrumMode::All],
            ModeSpec::MeanZero => vec![SpectrumMode::MeanZero],
            ModeSpec::Both => vec![SpectrumMode::All, SpectrumMode::MeanZero],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VariationKind {
    Normal,
    Dilation,
    Parallel,
    RescaledParallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    K,
    Radius,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// `H_f` spread and contact-angle tolerance; backend default when absent.
    #[serde(default)]
    pub stationary: Option<f64>,
    /// Relative Minkowski residual and identity gap.
    #[serde(default = "default_minkowski")]
    pub minkowski: f64,
    /// Relative agreement of variation stencils with the analytic rates.
    #[serde(default = "default_variation")]
    pub variation: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff_slope: f64,
    #[serde(default = "default_cd")]
    pub curvature: f64,
}

fn default_minkowski() -> f64 {
    1e-8
}
fn default_variation() -> f64 {
    1e-2
}
fn default_cutoff() -> f64 {
    0.1
}
fn default_cd() -> f64 {
    1e-8
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            stationary: None,
            minkowski: default_minkowski(),
            variation: default_variation(),
            cutoff_slope: default_cutoff(),
            curvature: default_cd(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_report")]
    pub report: String,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_report() -> String {
    "report.json".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            report: default_report(),
        }
    }
}

/// Config or IO failure, reported with exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<conestab::Error> for ConfigError {
    fn from(e: conestab::Error) -> Self {
        ConfigError(e.to_string())
    }
}

fn vec3(v: &[f64], dim: usize, what: &str) -> Result<Vec3<f64>, ConfigError> {
    if v.len() != dim {
        return Err(ConfigError(format!("{what} needs {dim} components, got {}", v.len())));
    }
    let mut out = [0.0; 3];
    out[..dim].copy_from_slice(v);
    Ok(out)
}

impl Scenario {
    /// Parses and validates; serde errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks everything that can be checked without building a surface.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(2..=3).contains(&self.ambient_dim) {
            return Err(ConfigError("ambient_dim must be 2 or 3".into()));
        }
        if self.surface.grid < 4 {
            return Err(ConfigError("surface.grid must be at least 4".into()));
        }
        let cone = self.cone()?;
        self.density()?;
        if let Shape::RadialGraph { rho } = &self.surface.shape {
            Expression::parse(rho).map_err(|e| ConfigError(format!("surface.shape.rho: {e}")))?;
        }
        if let Shape::Cap { radius } = self.surface.shape {
            if !(radius > 0.0) {
                return Err(ConfigError("cap radius must be positive".into()));
            }
        }
        for (i, a) in self.analyses.iter().enumerate() {
            match a {
                Analysis::Variation { u: Some(u), .. } => {
                    Expression::parse(u).map_err(|e| ConfigError(format!("analyses[{i}].u: {e}")))?;
                }
                Analysis::CutoffDecay { eps } if eps.len() < 2 || eps.iter().any(|e| !(*e > 0.0)) => {
                    return Err(ConfigError(format!("analyses[{i}].eps needs two or more positive values")));
                }
                Analysis::Sweep { steps, from, to, .. } if *steps < 2 || !from.is_finite() || !to.is_finite() => {
                    return Err(ConfigError(format!("analyses[{i}]: sweep needs finite bounds and steps >= 2")));
                }
                _ => {}
            }
        }
        let _ = cone;
        Ok(())
    }

    pub fn cone(&self) -> Result<Cone, ConfigError> {
        let d = self.ambient_dim;
        Ok(match &self.cone {
            ConeSpec::Full => SolidCone::full(d)?,
            ConeSpec::HalfSpace => SolidCone::half_space(d)?,
            ConeSpec::Circular { axis, half_aperture } => SolidCone::circular(d, vec3(axis, d, "cone.axis")?, *half_aperture)?,
            ConeSpec::Sector { angle } => {
                if d != 2 {
                    return Err(ConfigError("sector cones need ambient_dim 2".into()));
                }
                SolidCone::sector(*angle)?
            }
        })
    }

    pub fn degree(&self) -> Option<f64> {
        match &self.density {
            DensitySpec::Radial { k, .. }
            | DensitySpec::LinearPower { k, .. }
            | DensitySpec::PerturbedRadial { k, .. }
            | DensitySpec::Expression { k, .. } => Some(*k),
            DensitySpec::Monomial { exponents } => Some(exponents.iter().sum()),
        }
    }

    pub fn density(&self) -> Result<Density, ConfigError> {
        let d = self.ambient_dim;
        Ok(match &self.density {
            DensitySpec::Radial { k, scale } => HomogeneousDensity::new(*k, Profile::Radial { scale: *scale }, DerivativeMode::Analytic)?,
            DensitySpec::Monomial { exponents } => HomogeneousDensity::monomial(&vec3(exponents, d, "density.exponents")?[..d])?,
            DensitySpec::LinearPower { xi, k } => HomogeneousDensity::linear_power(vec3(xi, d, "density.xi")?, *k)?,
            DensitySpec::PerturbedRadial {
                k,
                linear,
                quadratic,
                amplitude,
            } => HomogeneousDensity::perturbed_radial(*k, vec3(linear, d, "density.linear")?, *quadratic, *amplitude)?,
            DensitySpec::Expression { k, expression, step } => {
                let dens = HomogeneousDensity::expression(*k, expression)
                    .map_err(|e| ConfigError(format!("density.expression: {e}")))?;
                match step {
                    Some(h) => dens.with_finite_differences(*h)?,
                    None => dens,
                }
            }
        })
    }

    /// Same scenario with the density degree replaced.
    pub fn with_degree(&self, k: f64) -> Result<Scenario, ConfigError> {
        let mut s = self.clone();
        match &mut s.density {
            DensitySpec::Radial { k: kk, .. }
            | DensitySpec::LinearPower { k: kk, .. }
            | DensitySpec::PerturbedRadial { k: kk, .. }
            | DensitySpec::Expression { k: kk, .. } => *kk = k,
            DensitySpec::Monomial { .. } => return Err(ConfigError("monomial degree is fixed by its exponents".into())),
        }
        Ok(s)
    }

    pub fn with_radius(&self, r: f64) -> Result<Scenario, ConfigError> {
        let mut s = self.clone();
        match &mut s.surface.shape {
            Shape::Cap { radius } => *radius = r,
            Shape::Sphere { radius, .. } => *radius = r,
            _ => return Err(ConfigError("radius sweeps need a cap or a sphere".into())),
        }
        Ok(s)
    }

    pub fn cap_radius(&self) -> Option<f64> {
        match self.surface.shape {
            Shape::Cap { radius } => Some(radius),
            _ => None,
        }
    }

    /// Builds the surface; `base` resolves relative import paths.
    pub fn surface(&self, cone: &Cone, base: &Path) -> Result<Surface, ConfigError> {
        let d = self.ambient_dim;
        let grid = self.surface.grid;
        let fem = self.surface.backend == BackendKind::Fem;
        let rings = (grid / 2).max(2);
        let s = match &self.surface.shape {
            Shape::Cap { radius } if fem => {
                if d == 2 {
                    DiscreteHypersurface::simplicial_cap(cone, *radius, grid, 1)?
                } else {
                    DiscreteHypersurface::simplicial_cap(cone, *radius, grid, rings)?
                }
            }
            Shape::Cap { radius } => DiscreteHypersurface::cap(cone, *radius, grid)?,
            Shape::SphereThroughOrigin { center, puncture } => {
                let c = vec3(center, d, "surface.shape.center")?;
                if fem {
                    let r = conestab::linalg::norm(&c);
                    let rho = puncture.unwrap_or(conestab::surface::DEFAULT_PUNCTURE * r);
                    let chart = RoundChart::through_origin(cone.n(), c, rho)?;
                    DiscreteHypersurface::simplicial_from_chart(std::sync::Arc::new(chart), cone, grid, rings)?
                } else {
                    DiscreteHypersurface::sphere_through_origin(cone, c, *puncture, grid)?
                }
            }
            Shape::Sphere { center, radius } => {
                let c = vec3(center, d, "surface.shape.center")?;
                if fem {
                    let chart = RoundChart::sphere(cone.n(), c, *radius);
                    DiscreteHypersurface::simplicial_from_chart(std::sync::Arc::new(chart), cone, grid, rings)?
                } else {
                    DiscreteHypersurface::sphere(cone, c, *radius, grid)?
                }
            }
            Shape::Ellipsoid { center, semi_axes } => {
                let c = vec3(center, d, "surface.shape.center")?;
                let a = vec3(semi_axes, d, "surface.shape.semi_axes")?;
                let para = DiscreteHypersurface::ellipsoid(cone, c, a, grid)?;
                if fem {
                    let chart = para.chart().expect("ellipsoids are parametric").clone();
                    DiscreteHypersurface::simplicial_from_chart(chart, cone, grid, rings)?
                } else {
                    para
                }
            }
            Shape::RadialGraph { rho } => {
                let e = Expression::parse(rho).map_err(|e| ConfigError(format!("surface.shape.rho: {e}")))?;
                let para = DiscreteHypersurface::radial_graph(cone, e, grid)?;
                if fem {
                    let chart = para.chart().expect("graphs are parametric").clone();
                    DiscreteHypersurface::simplicial_from_chart(chart, cone, grid, rings)?
                } else {
                    para
                }
            }
            Shape::Import { path } => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                let text = std::fs::read_to_string(&full).map_err(|e| ConfigError(format!("{}: {e}", full.display())))?;
                let is_obj = full.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj"));
                if is_obj {
                    DiscreteHypersurface::from_obj(&text, cone, DEFAULT_TOL_BOUNDARY)?
                } else {
                    DiscreteHypersurface::from_csv_polyline(&text, cone, DEFAULT_TOL_BOUNDARY)?
                }
            }
        };
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAP: &str = r#"{
        "ambient_dim": 2,
        "cone": {"type": "full"},
        "density": {"family": "radial", "k": 1.0},
        "surface": {"shape": {"kind": "cap", "radius": 1.0}, "grid": 32},
        "analyses": [{"kind": "minkowski"}, {"kind": "spectrum", "mode": "mean_zero"}]
    }"#;

    #[test]
    fn round_trip_is_idempotent() {
        let s = Scenario::from_json(CAP).unwrap();
        let once = s.to_json();
        let twice = Scenario::from_json(&once).unwrap().to_json();
        assert_eq!(once, twice);
        assert_eq!(s.tolerances, Tolerances::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = CAP.replace("\"grid\": 32", "\"grid\": 32, \"colour\": 1");
        let e = Scenario::from_json(&bad).unwrap_err();
        assert!(e.0.contains("colour") && e.0.contains("line"), "{e}");
    }

    #[test]
    fn expression_errors_carry_offsets() {
        let bad = CAP.replace(r#"{"family": "radial", "k": 1.0}"#, r#"{"family": "expression", "k": 1.0, "expression": "1 + cos(theta"}"#);
        let e = Scenario::from_json(&bad).unwrap_err();
        assert!(e.0.contains("offset"), "{e}");
    }

    #[test]
    fn builds_core_objects() {
        let s = Scenario::from_json(CAP).unwrap();
        let cone = s.cone().unwrap();
        let surf = s.surface(&cone, Path::new(".")).unwrap();
        assert!(surf.is_parametric());
        assert_eq!(s.with_degree(-2.0).unwrap().degree(), Some(-2.0));
        assert!(s.with_radius(2.0).unwrap().cap_radius() == Some(2.0));
    }
}
