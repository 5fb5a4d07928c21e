//! Reference values computed without the optimized code paths: closed
//! forms, direct polar quadrature, Fourier modes and plain difference
//! quotients on re-evaluated surfaces.

use std::sync::Arc;

use serde::Serialize;

use crate::cone::{Region, SolidCone};
use crate::density::HomogeneousDensity;
use crate::linalg::{self, Vec3};
use crate::measures;
use crate::scalar::Real;
use crate::surface::{chart, Backend, Chart, DiscreteHypersurface, ParamDomain, ScaledChart, DEFAULT_TOL_BOUNDARY};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    ClosedForm,
    PolarQuadrature,
    FourierModes,
    FiniteDifference,
}

/// One logged reference value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub name: String,
    pub expected: Vec<f64>,
    pub method: OracleMethod,
    /// Step sizes or node counts used, empty for closed forms.
    pub steps: Vec<f64>,
}

impl OracleResult {
    pub fn new(name: impl Into<String>, expected: Vec<f64>, method: OracleMethod) -> Self {
        Self {
            name: name.into(),
            expected,
            method,
            steps: Vec::new(),
        }
    }

    pub fn with_steps(mut self, steps: Vec<f64>) -> Self {
        self.steps = steps;
        self
    }
}

/// Every reference value consulted by a report, in order of use.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OracleLedger {
    pub entries: Vec<OracleResult>,
}

impl OracleLedger {
    /// Appends unless an identical entry is already present.
    pub fn record(&mut self, r: OracleResult) {
        if !self.entries.contains(&r) {
            self.entries.push(r);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn sphere_measure(n: usize) -> f64 {
    match n {
        1 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    }
}

/// Measure of the spherical region, from the region parameters alone.
pub fn region_measure<T: Real>(cone: &SolidCone<T>) -> f64 {
    use std::f64::consts::PI;
    let planar = cone.ambient_dim() == 2;
    match cone.region() {
        Region::FullSphere => sphere_measure(cone.n()),
        Region::HalfSpace { .. } => sphere_measure(cone.n()) / 2.0,
        Region::PlanarSector { angle } => angle.to_f64_lossy(),
        Region::Circular { half_aperture, .. } => {
            let a = half_aperture.to_f64_lossy();
            if planar {
                2.0 * a
            } else {
                2.0 * PI * (1.0 - a.cos())
            }
        }
    }
}

/// First nonzero Neumann eigenvalue of the spherical region, where the
/// region has separable harmonics.
pub fn neumann_first_eigenvalue<T: Real>(cone: &SolidCone<T>) -> Result<f64> {
    use std::f64::consts::{FRAC_PI_2, PI};
    if cone.ambient_dim() == 2 {
        // arcs of length β: cos(π s / β)
        let beta = region_measure(cone);
        return Ok(if (beta - 2.0 * PI).abs() < 1e-14 { 1.0 } else { (PI / beta).powi(2) });
    }
    match cone.region() {
        Region::FullSphere | Region::HalfSpace { .. } => Ok(2.0),
        Region::Circular { half_aperture, .. } if (half_aperture.to_f64_lossy() - FRAC_PI_2).abs() < 1e-14 => Ok(2.0),
        _ => Err(Error::NoSpectralReference),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CapReference {
    pub h_f: f64,
    /// `Ric_f(N,N) + |σ|²`.
    pub potential: f64,
    /// `|D| r^{n+k}` for the unit radial profile.
    pub radial_area: f64,
    pub min_eigen_all: f64,
    /// `None` where no separable reference exists.
    pub min_eigen_meanzero: Option<f64>,
}

/// Closed-form data of the cap `∂B_r ∩ M` for a degree-`k` density.
pub fn cap_reference<T: Real>(n: usize, k: f64, r: f64, cone: &SolidCone<T>) -> Result<CapReference> {
    if cone.n() != n {
        return Err(Error::InvalidInput("cone dimension does not match n".into()));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidInput("radius must be positive".into()));
    }
    let nk = n as f64 + k;
    let potential = nk / (r * r);
    // constants minimize the Rayleigh quotient: K 1 = 0, P = potential M, B = 0
    let min_all = -potential;
    let mz = neumann_first_eigenvalue(cone).ok().map(|l| l / (r * r) - potential);
    Ok(CapReference {
        h_f: nk / r,
        potential,
        radial_area: region_measure(cone) * r.powf(nk),
        min_eigen_all: min_all,
        min_eigen_meanzero: mz,
    })
}

/// The mean-zero reference alone, failing where none is available.
pub fn cap_spectral_reference<T: Real>(n: usize, k: f64, r: f64, cone: &SolidCone<T>) -> Result<f64> {
    cap_reference(n, k, r, cone)?.min_eigen_meanzero.ok_or(Error::NoSpectralReference)
}

/// Eigenvalues `m²/r² - (1+k)/r²` of the index form on the full circle, each
/// listed with multiplicity.
pub fn circle_fourier_spectrum(k: f64, r: f64, modes: usize) -> Vec<f64> {
    let mut out = vec![-(1.0 + k) / (r * r)];
    for m in 1..=modes {
        let v = ((m * m) as f64 - 1.0 - k) / (r * r);
        out.push(v);
        out.push(v);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialIntegrals {
    pub area: f64,
    pub oriented_volume: f64,
}

/// `A_f = |S^n| r^{n+k}`, `V_f = |S^n| r^{n+k+1} / (n+k+1)` for the unit
/// radial density on the full sphere.
pub fn radial_integrals(n: usize, k: f64, r: f64) -> Result<RadialIntegrals> {
    let d = n as f64 + k + 1.0;
    if d.abs() < 1e-12 {
        return Err(Error::CriticalDegree { degree: k });
    }
    let s = sphere_measure(n);
    Ok(RadialIntegrals {
        area: s * r.powf(n as f64 + k),
        oriented_volume: s * r.powf(d) / d,
    })
}

/// `∫ f da` over the cap by composite Simpson in polar coordinates around
/// the cone axis (`m` intervals per direction, rounded up to even).
pub fn cap_area_by_polar_quadrature(cone: &SolidCone<f64>, density: &HomogeneousDensity<f64>, r: f64, m: usize) -> Result<f64> {
    use std::f64::consts::PI;
    let m = m + m % 2;
    let simpson = |a: f64, b: f64, f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        let h = (b - a) / m as f64;
        let mut s = f(a)? + f(b)?;
        for i in 1..m {
            let c = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += c * f(a + h * i as f64)?;
        }
        Ok(s * h / 3.0)
    };
    let eval = |p: Vec3<f64>| -> Result<f64> {
        match density.evaluate(cone, &p) {
            Ok(v) => Ok(v),
            // points on ∂M where the profile vanishes
            Err(Error::NonPositiveDensity) => Ok(0.0),
            Err(e) => Err(e),
        }
    };
    if cone.ambient_dim() == 2 {
        let (start, span) = match cone.region() {
            Region::FullSphere => (0.0, 2.0 * PI),
            Region::HalfSpace { normal } => {
                let a = normal[1].atan2(normal[0]);
                (a - PI / 2.0, PI)
            }
            Region::PlanarSector { angle } => (0.0, *angle),
            Region::Circular { axis, half_aperture } => (axis[1].atan2(axis[0]) - half_aperture, 2.0 * half_aperture),
        };
        return simpson(start, start + span, &|t| Ok(eval([r * t.cos(), r * t.sin(), 0.0])? * r));
    }
    let (axis, extent) = match cone.region() {
        Region::FullSphere => ([0.0, 0.0, 1.0], PI),
        Region::HalfSpace { normal } => (*normal, PI / 2.0),
        Region::Circular { axis, half_aperture } => (*axis, *half_aperture),
        Region::PlanarSector { .. } => unreachable!("sectors are planar"),
    };
    let (e1, e2) = linalg::orthonormal_frame(&axis);
    simpson(0.0, extent, &|th| {
        simpson(0.0, 2.0 * PI, &|ph| {
            let q = [
                th.cos() * axis[0] + th.sin() * (ph.cos() * e1[0] + ph.sin() * e2[0]),
                th.cos() * axis[1] + th.sin() * (ph.cos() * e1[1] + ph.sin() * e2[1]),
                th.cos() * axis[2] + th.sin() * (ph.cos() * e1[2] + ph.sin() * e2[2]),
            ];
            Ok(eval(linalg::scale(r, &q))? * r * r * th.sin())
        })
    })
}

/// Normal speed `u(X)` of a brute-force variation.
pub type NormalSpeed = Arc<dyn Fn(&Vec3<f64>) -> f64 + Send + Sync>;

/// `X + t u(X) N` over a base chart, with finite-difference jets.
struct DisplacedChart {
    base: Arc<dyn Chart<f64>>,
    u: NormalSpeed,
    t: f64,
}

impl std::fmt::Debug for DisplacedChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DisplacedChart").field("t", &self.t).finish()
    }
}

impl Chart<f64> for DisplacedChart {
    fn param_dim(&self) -> usize {
        self.base.param_dim()
    }

    fn domain(&self) -> ParamDomain<f64> {
        self.base.domain()
    }

    fn orientation(&self) -> f64 {
        self.base.orientation()
    }

    fn position(&self, p: [f64; 2]) -> Vec3<f64> {
        let jet = self.base.jet(p);
        let nrm = chart::chart_normal(self.param_dim(), &jet.d, self.orientation()).unwrap_or([0.0; 3]);
        linalg::axpy(&jet.x, self.t * (self.u)(&jet.x), &nrm)
    }
}

/// A derivative estimated at several steps with Richardson extrapolation.
#[derive(Debug, Clone, Serialize)]
pub struct StencilEstimate {
    pub steps: Vec<f64>,
    pub estimates: Vec<f64>,
    pub extrapolated: f64,
    /// `|D(h) - D(h/2)| / |D(h/2) - D(h/4)|` for the last three steps.
    pub error_ratio: f64,
    pub reliable: bool,
}

fn richardson(steps: &[f64], est: Vec<f64>, noise: f64) -> StencilEstimate {
    let m = est.len();
    let extrapolated = if m >= 2 {
        (4.0 * est[m - 1] - est[m - 2]) / 3.0
    } else {
        est[0]
    };
    let (ratio, reliable) = if m >= 3 {
        let e1 = (est[m - 3] - est[m - 2]).abs();
        let e2 = (est[m - 2] - est[m - 1]).abs();
        if e1 <= noise && e2 <= noise {
            // already exact to the noise floor
            (f64::INFINITY, true)
        } else {
            let r = e1 / e2.max(f64::MIN_POSITIVE);
            (r, r >= 3.5)
        }
    } else {
        (f64::NAN, false)
    };
    StencilEstimate {
        steps: steps.to_vec(),
        estimates: est,
        extrapolated,
        error_ratio: ratio,
        reliable,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BruteVariation {
    pub area_rate: StencilEstimate,
    pub volume_rate: StencilEstimate,
    /// `(A_f - H V_f)''(0)` with `H` the mean `H_f` of the surface.
    pub functional_second: StencilEstimate,
}

/// Halving step lists must be strictly decreasing by a factor of two for the
/// error ratio to be meaningful.
fn check_steps(dt_list: &[f64]) -> Result<()> {
    if dt_list.len() < 3 || dt_list.windows(2).any(|w| ((w[0] / w[1]) - 2.0).abs() > 1e-12) {
        return Err(Error::InvalidInput("need at least three steps, each half the previous".into()));
    }
    Ok(())
}

/// Rates of `A_f`, `V_f` and `A_f - H V_f` along `X + t u N`, by three-point
/// quotients on re-discretized displaced surfaces.
pub fn brute_variation(
    surface: &DiscreteHypersurface<f64>,
    density: &HomogeneousDensity<f64>,
    cone: &SolidCone<f64>,
    u: NormalSpeed,
    dt_list: &[f64],
) -> Result<BruteVariation> {
    check_steps(dt_list)?;
    let grid = match surface.backend() {
        Backend::Parametric(g) => g,
        Backend::Simplicial(_) => return Err(Error::InvalidInput("brute variations need a parametric surface".into())),
    };
    let n1 = grid.first.len();
    let n2 = grid.second.as_ref().map_or(3, |s| s.len());
    let base = grid.chart.clone();
    let eval = |t: f64| -> Result<(f64, f64)> {
        let c: Arc<dyn Chart<f64>> = Arc::new(DisplacedChart {
            base: base.clone(),
            u: u.clone(),
            t,
        });
        let s = DiscreteHypersurface::parametric_with(c, cone, n1, n2, DEFAULT_TOL_BOUNDARY * 10.0)
            .map_err(|_| Error::StencilExitsCone { sample: 0 })?;
        Ok((
            measures::weighted_area(&s, density, cone)?,
            measures::oriented_volume(&s, density, cone)?,
        ))
    };
    let geo = crate::surface::GeometryCache::compute(surface, density, cone)?;
    let (h, _) = geo.h_f_stats();
    let (a0, v0) = eval(0.0)?;
    let mut da = Vec::new();
    let mut dv = Vec::new();
    let mut d2 = Vec::new();
    for dt in dt_list {
        let (ap, vp) = eval(*dt)?;
        let (am, vm) = eval(-*dt)?;
        da.push((ap - am) / (2.0 * dt));
        dv.push((vp - vm) / (2.0 * dt));
        let j = |a: f64, v: f64| a - h * v;
        d2.push((j(ap, vp) - 2.0 * j(a0, v0) + j(am, vm)) / (dt * dt));
    }
    let noise = 1e-9 * a0.abs().max(1.0);
    let noise2 = noise / dt_list[dt_list.len() - 1].powi(2) * 1e-6;
    Ok(BruteVariation {
        area_rate: richardson(dt_list, da, noise),
        volume_rate: richardson(dt_list, dv, noise),
        functional_second: richardson(dt_list, d2, noise2.max(noise)),
    })
}

/// Rates of `A_f` and `V_f` under `e^t X`, by three-point quotients on
/// rescaled copies of the chart.
pub fn brute_dilation(
    surface: &DiscreteHypersurface<f64>,
    density: &HomogeneousDensity<f64>,
    cone: &SolidCone<f64>,
    dt_list: &[f64],
) -> Result<(StencilEstimate, StencilEstimate)> {
    check_steps(dt_list)?;
    let grid = match surface.backend() {
        Backend::Parametric(g) => g,
        Backend::Simplicial(_) => return Err(Error::InvalidInput("brute variations need a parametric surface".into())),
    };
    let n1 = grid.first.len();
    let n2 = grid.second.as_ref().map_or(3, |s| s.len());
    let eval = |t: f64| -> Result<(f64, f64)> {
        let c: Arc<dyn Chart<f64>> = Arc::new(ScaledChart::new(grid.chart.clone(), t.exp()));
        let s = DiscreteHypersurface::parametric_with(c, cone, n1, n2, DEFAULT_TOL_BOUNDARY * 10.0)?;
        Ok((
            measures::weighted_area(&s, density, cone)?,
            measures::oriented_volume(&s, density, cone)?,
        ))
    };
    let mut da = Vec::new();
    let mut dv = Vec::new();
    let (a0, _) = eval(0.0)?;
    for dt in dt_list {
        let (ap, vp) = eval(*dt)?;
        let (am, vm) = eval(-*dt)?;
        da.push((ap - am) / (2.0 * dt));
        dv.push((vp - vm) / (2.0 * dt));
    }
    let noise = 1e-9 * a0.abs().max(1.0);
    Ok((richardson(dt_list, da, noise), richardson(dt_list, dv, noise)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cap_reference_values() {
        let full = SolidCone::<f64>::full(2).unwrap();
        let c = cap_reference(1, -3.0, 1.0, &full).unwrap();
        assert!((c.min_eigen_meanzero.unwrap() - 3.0).abs() < 1e-14);
        let cone = SolidCone::<f64>::circular(3, [0.0, 0.0, 1.0], 0.6).unwrap();
        let c = cap_reference(2, 1.0, 2.0, &cone).unwrap();
        assert_eq!(c.h_f, 1.5);
        assert!(c.min_eigen_meanzero.is_none());
        assert!(matches!(cap_spectral_reference(2, 1.0, 2.0, &cone), Err(Error::NoSpectralReference)));
        for k in [-2.0, 0.5, 3.0] {
            let c = cap_reference(1, k, 1.5, &SolidCone::<f64>::sector(1.0).unwrap()).unwrap();
            assert!((c.min_eigen_all + (1.0 + k) / 2.25).abs() < 1e-14);
        }
    }

    #[test]
    fn radial_closed_forms() {
        let r = radial_integrals(1, 1.0, 1.0).unwrap();
        assert!((r.area - 2.0 * PI).abs() < 1e-14 && (r.oriented_volume - 2.0 * PI / 3.0).abs() < 1e-14);
        assert!((radial_integrals(1, 0.0, 1.0).unwrap().oriented_volume - PI).abs() < 1e-14);
        assert!((radial_integrals(2, 0.0, 1.0).unwrap().area - 4.0 * PI).abs() < 1e-14);
        assert!(radial_integrals(2, -3.0, 1.0).is_err());
    }

    #[test]
    fn polar_quadrature_agrees_with_region_measure() {
        let cone = SolidCone::<f64>::circular(3, [1.0, 1.0, 0.0], 0.9).unwrap();
        let a = cap_area_by_polar_quadrature(&cone, &HomogeneousDensity::radial(1.0), 2.0, 64).unwrap();
        assert!((a - region_measure(&cone) * 8.0).abs() < 1e-8);
    }

    #[test]
    fn brute_normal_shift_on_cap() {
        let cone = SolidCone::<f64>::half_space(3).unwrap();
        let d = HomogeneousDensity::radial(0.0);
        let s = DiscreteHypersurface::cap(&cone, 1.5, 33).unwrap();
        let a = measures::weighted_area(&s, &d, &cone).unwrap();
        let b = brute_variation(&s, &d, &cone, Arc::new(|_: &Vec3<f64>| 1.0), &[4e-3, 2e-3, 1e-3]).unwrap();
        assert!(b.area_rate.reliable);
        let expect = -2.0 * a / 1.5;
        assert!((b.area_rate.extrapolated - expect).abs() < 1e-6 * a, "{:?}", b.area_rate);
        // V' = -A for unit inward speed
        assert!((b.volume_rate.extrapolated + a).abs() < 1e-6 * a);
    }

    #[test]
    fn brute_dilation_rates() {
        let cone = SolidCone::<f64>::circular(3, [0.0, 0.0, 1.0], 1.0).unwrap();
        let d = HomogeneousDensity::radial(1.5);
        let s = DiscreteHypersurface::cap(&cone, 1.0, 33).unwrap();
        let a = measures::weighted_area(&s, &d, &cone).unwrap();
        let v = measures::oriented_volume(&s, &d, &cone).unwrap();
        let (da, dv) = brute_dilation(&s, &d, &cone, &[1e-2, 5e-3, 2.5e-3]).unwrap();
        assert!((da.extrapolated - 3.5 * a).abs() < 1e-6 * a);
        assert!((dv.extrapolated - 4.5 * v).abs() < 1e-6 * v.abs());
        assert!(brute_dilation(&s, &d, &cone, &[1e-2, 4e-3]).is_err());
    }

    #[test]
    fn fourier_spectrum_is_sorted() {
        let s = circle_fourier_spectrum(2.0, 1.0, 3);
        assert_eq!(s, vec![-3.0, -2.0, -2.0, 1.0, 1.0, 6.0, 6.0]);
    }
}
