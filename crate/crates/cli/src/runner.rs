//! Executes the analyses of a scenario and assembles the report.

use std::path::{Path, PathBuf};

use conestab::density::CdSampling;
use conestab::expr::Expression;
use conestab::measures;
use conestab::oracles::{self, OracleLedger, OracleMethod, OracleResult};
use conestab::stability::{self, SpectrumMode, Variation, DENSE_LIMIT};
use conestab::{Cone, Density, Geometry, Surface};
use log::{debug, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::report::{config_hash, fmt_num, unix_time, write_atomic, AnalysisOutcome, Report, ToolInfo};
use crate::scenario::{Analysis, ConfigError, DensitySpec, Scenario, SweepParameter, VariationKind};

/// Everything built from the scenario before any analysis runs.
pub struct Context {
    pub scenario: Scenario,
    pub cone: Cone,
    pub density: Density,
    pub surface: Surface,
    pub base: PathBuf,
    pub out: PathBuf,
}

impl Context {
    pub fn build(scenario: Scenario, base: &Path, out: PathBuf) -> Result<Self, ConfigError> {
        scenario.validate()?;
        let cone = scenario.cone()?;
        let density = scenario.density()?;
        let surface = scenario.surface(&cone, base)?;
        Ok(Self {
            scenario,
            cone,
            density,
            surface,
            base: base.to_path_buf(),
            out,
        })
    }

    fn tol_stationary(&self) -> f64 {
        self.scenario
            .tolerances
            .stationary
            .unwrap_or_else(|| stability::default_tol_stationary(&self.surface))
    }

    fn is_radial(&self) -> bool {
        matches!(self.scenario.density, DensitySpec::Radial { .. })
    }
}

type Outcome = Result<(bool, Value, Vec<String>), conestab::Error>;

/// Runs every analysis (failures do not stop the rest) and writes the
/// report. Returns the report and the path it was written to.
pub fn execute(ctx: &Context, command: &str, analyses: &[Analysis]) -> Result<(Report, PathBuf), ConfigError> {
    let mut ledger = OracleLedger::default();
    let mut outcomes = Vec::new();
    for (i, a) in analyses.iter().enumerate() {
        info!("analysis {i}: {}", a.name());
        let res = match a {
            Analysis::CertifyCd { expect } => certify(ctx, *expect),
            Analysis::Geometry => geometry(ctx, &mut ledger),
            Analysis::Minkowski => minkowski(ctx, &mut ledger),
            Analysis::Spectrum {
                mode,
                expect_f_stable,
                expect_strongly_f_stable,
            } => spectrum(ctx, i, mode.modes(), *expect_f_stable, *expect_strongly_f_stable, &mut ledger),
            Analysis::Variation { variation, u, dt } => variation_analysis(ctx, i, *variation, u.as_deref(), *dt, &mut ledger),
            Analysis::CutoffDecay { eps } => cutoff(ctx, eps),
            Analysis::Umbilicity => umbilicity(ctx),
            Analysis::Sweep {
                parameter,
                from,
                to,
                steps,
            } => match sweep(ctx, i, *parameter, *from, *to, *steps) {
                Ok(v) => Ok(v),
                Err(SweepError::Config(e)) => return Err(e),
                Err(SweepError::Core(e)) => Err(e),
            },
        };
        let outcome = match res {
            Ok((passed, result, artifacts)) => AnalysisOutcome {
                index: i,
                kind: a.name().into(),
                passed,
                error: None,
                result,
                artifacts,
            },
            Err(e) => {
                warn!("analysis {i} ({}) failed: {e}", a.name());
                AnalysisOutcome {
                    index: i,
                    kind: a.name().into(),
                    passed: false,
                    error: Some(e.to_string()),
                    result: Value::Null,
                    artifacts: Vec::new(),
                }
            }
        };
        if !outcome.passed {
            warn!("analysis {i} ({}) did not pass", a.name());
        }
        outcomes.push(outcome);
    }
    let report = Report {
        tool: ToolInfo::default(),
        command: command.into(),
        config_hash: config_hash(&ctx.scenario),
        scenario: ctx.scenario.clone(),
        passed: outcomes.iter().all(|o| o.passed),
        analyses: outcomes,
        provenance: ledger,
        timestamp: unix_time(),
    };
    let path = ctx.out.join(&ctx.scenario.output.report);
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok((report, path))
}

fn to_value<S: serde::Serialize>(s: &S) -> Value {
    serde_json::to_value(s).expect("serializable")
}

fn certify(ctx: &Context, expect: Option<bool>) -> Outcome {
    let sampling = CdSampling {
        tol: ctx.scenario.tolerances.curvature,
        ..CdSampling::default()
    };
    let r = ctx.density.certify_cd(&ctx.cone, &sampling)?;
    let passed = expect.map_or(r.cd_certified, |e| e == r.cd_certified) && r.verdicts_agree();
    Ok((
        passed,
        json!({
            "sample_count": r.sample_count,
            "min_ric_f_k": r.min_ric_f_k,
            "min_ric_f": r.min_ric_f,
            "min_sphere_margin": r.min_sphere_margin,
            "cd_certified": r.cd_certified,
            "sphere_criterion_certified": r.sphere_criterion_certified,
            "verdicts_agree": r.verdicts_agree(),
            "witness_point": r.witness_point,
            "witness_direction": r.witness_direction,
            "tolerance": r.tolerance,
        }),
        Vec::new(),
    ))
}

/// Closed-form cap data, logged once per analysis that uses it.
fn cap_oracle(ctx: &Context, ledger: &mut OracleLedger) -> Option<oracles::CapReference> {
    let r = ctx.scenario.cap_radius()?;
    let k = ctx.density.degree();
    let reference = oracles::cap_reference(ctx.surface.n(), k, r, &ctx.cone).ok()?;
    ledger.record(OracleResult::new(
        format!("cap_h_f(n={}, k={k}, r={r})", ctx.surface.n()),
        vec![reference.h_f, reference.potential],
        OracleMethod::ClosedForm,
    ));
    Some(reference)
}

fn geometry(ctx: &Context, ledger: &mut OracleLedger) -> Outcome {
    let geo = Geometry::compute(&ctx.surface, &ctx.density, &ctx.cone)?;
    let tol = ctx.tol_stationary();
    let (mean, std) = geo.h_f_stats();
    let orth = geo.max_orthogonality_error();
    let volume = measures::oriented_volume(&ctx.surface, &ctx.density, &ctx.cone).ok();
    let mut passed = orth <= tol;
    let mut h_f_error = None;
    if let Some(reference) = cap_oracle(ctx, ledger) {
        let err = geo.samples.iter().fold(0.0f64, |a, s| a.max((s.h_f - reference.h_f).abs()));
        passed &= err <= tol * (1.0 + reference.h_f.abs());
        h_f_error = Some(err);
    }
    Ok((
        passed,
        json!({
            "dofs": ctx.surface.dofs(),
            "mesh_size": ctx.surface.mesh_size(),
            "diameter": ctx.surface.diameter(),
            "min_radius": ctx.surface.min_radius(),
            "area": geo.weighted_area(),
            "oriented_volume": volume,
            "h_f_mean": mean,
            "h_f_std": std,
            "h_f_reference_error": h_f_error,
            "orthogonality_error": orth,
            "tol_stationary": tol,
        }),
        Vec::new(),
    ))
}

fn minkowski(ctx: &Context, ledger: &mut OracleLedger) -> Outcome {
    let tol_st = ctx.tol_stationary();
    let m = measures::minkowski(&ctx.surface, &ctx.density, &ctx.cone, tol_st)?;
    let tol = if ctx.surface.is_parametric() {
        ctx.scenario.tolerances.minkowski
    } else {
        ctx.scenario.tolerances.minkowski.max(tol_st)
    };
    if ctx.is_radial() && matches!(ctx.scenario.cone, crate::scenario::ConeSpec::Full) {
        if let Some(r) = ctx.scenario.cap_radius() {
            if let Ok(ri) = oracles::radial_integrals(ctx.surface.n(), ctx.density.degree(), r) {
                ledger.record(OracleResult::new(
                    format!("radial_integrals(n={}, k={}, r={r})", ctx.surface.n(), ctx.density.degree()),
                    vec![ri.area, ri.oriented_volume],
                    OracleMethod::ClosedForm,
                ));
            }
        }
    }
    let passed = m.relative_residual.abs() <= tol && m.relative_gap.is_none_or(|g| g.abs() <= tol);
    let mut v = to_value(&m);
    v["tolerance"] = json!(tol);
    Ok((passed, v, Vec::new()))
}

fn spectrum(
    ctx: &Context,
    index: usize,
    modes: Vec<SpectrumMode>,
    expect_f: Option<bool>,
    expect_strong: Option<bool>,
    ledger: &mut OracleLedger,
) -> Outcome {
    let (report, all, mz) = stability::analyze_spectra(&ctx.surface, &ctx.density, &ctx.cone, ctx.tol_stationary())?;
    let mut artifacts = Vec::new();
    for mode in &modes {
        let (tag, spec) = match mode {
            SpectrumMode::All => ("all", &all),
            SpectrumMode::MeanZero => ("mean_zero", &mz),
        };
        let name = format!("spectrum_{index}_{tag}.csv");
        let mut csv = String::from("index,eigenvalue\n");
        for (i, e) in spec.eigenvalues.iter().enumerate() {
            csv.push_str(&format!("{i},{}\n", fmt_num(Some(*e))));
        }
        write_atomic(&ctx.out.join(&name), csv.as_bytes()).map_err(|e| conestab::Error::InvalidInput(e.0))?;
        artifacts.push(name);
    }
    let mut reference = Value::Null;
    if ctx.is_radial() {
        if let Some(c) = cap_oracle(ctx, ledger) {
            ledger.record(OracleResult::new("cap_min_eigen_all", vec![c.min_eigen_all], OracleMethod::FourierModes));
            if let Some(m) = c.min_eigen_meanzero {
                ledger.record(OracleResult::new("cap_min_eigen_meanzero", vec![m], OracleMethod::FourierModes));
            }
            reference = json!({
                "min_eigen_all": c.min_eigen_all,
                "min_eigen_meanzero": c.min_eigen_meanzero,
            });
        }
    }
    let passed = expect_f.is_none_or(|e| report.f_stable == Some(e))
        && expect_strong.is_none_or(|e| report.strongly_f_stable == Some(e));
    let mut v = to_value(&report);
    v["reference"] = reference;
    Ok((passed, v, artifacts))
}

/// Smooth field with zero weighted mean: random quadratic polynomial.
fn random_mean_zero(geo: &Geometry, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lin: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let quad: Vec<f64> = (0..dim * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let raw: Vec<f64> = geo
        .samples
        .iter()
        .map(|s| {
            let p = s.point;
            let mut v = 0.0;
            for i in 0..dim {
                v += lin[i] * p[i];
                for j in 0..dim {
                    v += quad[i * dim + j] * p[i] * p[j];
                }
            }
            v
        })
        .collect();
    let w: f64 = geo.samples.iter().map(|s| s.weight).sum();
    let mean = geo.samples.iter().zip(&raw).map(|(s, u)| s.weight * u).sum::<f64>() / w;
    raw.iter().map(|u| u - mean).collect()
}

fn variation_analysis(
    ctx: &Context,
    index: usize,
    kind: VariationKind,
    u: Option<&str>,
    dt: Option<f64>,
    ledger: &mut OracleLedger,
) -> Outcome {
    let dt = dt.unwrap_or_else(|| stability::default_dt(&ctx.surface));
    let tol = ctx.scenario.tolerances.variation;
    if kind == VariationKind::RescaledParallel {
        let d = stability::rescaled_parallel(&ctx.surface, &ctx.density, &ctx.cone, dt)?;
        let passed = d.reliable && d.volume_drift <= ctx.scenario.tolerances.minkowski.max(1e-8) && d.velocity_error <= tol;
        return Ok((passed, to_value(&d), Vec::new()));
    }
    let var = match kind {
        VariationKind::Dilation => Variation::Dilation,
        VariationKind::Parallel => Variation::Parallel,
        _ => {
            let geo = Geometry::compute(&ctx.surface, &ctx.density, &ctx.cone)?;
            let values = match u {
                Some(src) => {
                    let e = Expression::parse(src)?;
                    geo.samples
                        .iter()
                        .map(|s| {
                            let r = conestab::linalg::norm(&s.point);
                            let q = conestab::linalg::scale(1.0 / r, &s.point);
                            let mut b = conestab::density::spherical_bindings(&q);
                            (b.x, b.y, b.z) = (s.point[0], s.point[1], s.point[2]);
                            e.eval(&b)
                        })
                        .collect()
                }
                None => random_mean_zero(&geo, ctx.surface.ambient_dim(), ctx.scenario.seed.wrapping_add(index as u64)),
            };
            Variation::Normal(values)
        }
    };
    let d = stability::run_variation(&ctx.surface, &ctx.density, &ctx.cone, &var, dt)?;
    if kind == VariationKind::Dilation {
        ledger.record(
            OracleResult::new(
                "dilation_rates",
                vec![d.area_derivative_expected, d.volume_derivative_expected],
                OracleMethod::ClosedForm,
            )
            .with_steps(vec![dt]),
        );
    }
    let close = |a: f64, b: f64| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-6);
    let mut passed = d.reliable
        && close(d.area_derivative, d.area_derivative_expected)
        && close(d.volume_derivative, d.volume_derivative_expected);
    if let (Some(s), Some(i)) = (d.second_derivative, d.index_form) {
        passed &= close(s, i);
    }
    debug!("variation {index}: {d:?}");
    Ok((passed, to_value(&d), Vec::new()))
}

fn cutoff(ctx: &Context, eps: &[f64]) -> Outcome {
    let c = stability::cutoff_energy_decay(&ctx.surface, &ctx.density, &ctx.cone, eps)?;
    let passed = (c.slope - c.expected_slope).abs() <= ctx.scenario.tolerances.cutoff_slope;
    Ok((passed, to_value(&c), Vec::new()))
}

fn umbilicity(ctx: &Context) -> Outcome {
    let u = stability::umbilicity_gap(&ctx.surface, &ctx.density, &ctx.cone)?;
    let scale = 1.0 + u.max_gap.abs();
    let passed = u.min_slack >= -ctx.tol_stationary() * scale;
    // per-sample arrays are large and plot-ready only through the summary
    Ok((
        passed,
        json!({
            "max_gap": u.max_gap,
            "min_gap": u.min_gap,
            "min_slack": u.min_slack,
            "samples": u.gap.len(),
        }),
        Vec::new(),
    ))
}

enum SweepError {
    Config(ConfigError),
    Core(conestab::Error),
}

impl From<ConfigError> for SweepError {
    fn from(e: ConfigError) -> Self {
        SweepError::Config(e)
    }
}

impl From<conestab::Error> for SweepError {
    fn from(e: conestab::Error) -> Self {
        SweepError::Core(e)
    }
}

/// Parameter values where a column changes sign, by linear interpolation.
fn sign_changes(xs: &[f64], ys: &[Option<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..xs.len() {
        if let (Some(a), Some(b)) = (ys[i - 1], ys[i]) {
            if a == 0.0 {
                out.push(xs[i - 1]);
            } else if a * b < 0.0 {
                out.push(xs[i - 1] + (xs[i] - xs[i - 1]) * a / (a - b));
            }
        }
    }
    out
}

fn sweep(ctx: &Context, index: usize, parameter: SweepParameter, from: f64, to: f64, steps: usize) -> Result<(bool, Value, Vec<String>), SweepError> {
    let header = "parameter,area,volume,H_f_mean,H_f_std,minkowski_residual,identity_gap,lambda_min_all,lambda_min_meanzero";
    let mut csv = format!("{header}\n");
    let mut xs = Vec::new();
    let mut all = Vec::new();
    let mut mz = Vec::new();
    let mut failures = Vec::new();
    for i in 0..steps {
        let x = from + (to - from) * i as f64 / (steps - 1) as f64;
        let sc = match parameter {
            SweepParameter::K => ctx.scenario.with_degree(x)?,
            SweepParameter::Radius => ctx.scenario.with_radius(x)?,
        };
        let density = match sc.density() {
            Ok(d) => d,
            Err(e) => {
                failures.push(json!({"parameter": x, "error": e.0}));
                continue;
            }
        };
        let surface = match parameter {
            SweepParameter::K => None,
            SweepParameter::Radius => Some(sc.surface(&ctx.cone, &ctx.base)?),
        };
        let surface = surface.as_ref().unwrap_or(&ctx.surface);
        let tol = sc
            .tolerances
            .stationary
            .unwrap_or_else(|| stability::default_tol_stationary(surface));
        let m = match measures::minkowski(surface, &density, &ctx.cone, tol) {
            Ok(m) => m,
            Err(e) => {
                failures.push(json!({"parameter": x, "error": e.to_string()}));
                continue;
            }
        };
        let spec = if surface.dofs() <= DENSE_LIMIT {
            stability::analyze(surface, &density, &ctx.cone, tol).ok()
        } else {
            None
        };
        let (la, lm) = (spec.as_ref().and_then(|s| s.lambda_min_all), spec.as_ref().and_then(|s| s.lambda_min_meanzero));
        csv.push_str(
            &[
                fmt_num(Some(x)),
                fmt_num(Some(m.area)),
                fmt_num(m.oriented_volume),
                fmt_num(Some(m.h_f_mean)),
                fmt_num(Some(m.h_f_std)),
                fmt_num(Some(m.residual_integral)),
                fmt_num(m.identity_gap),
                fmt_num(la),
                fmt_num(lm),
            ]
            .join(","),
        );
        csv.push('\n');
        xs.push(x);
        all.push(la);
        mz.push(lm);
    }
    let name = format!("sweep_{index}.csv");
    write_atomic(&ctx.out.join(&name), csv.as_bytes())?;
    let result = json!({
        "parameter": parameter,
        "rows": xs.len(),
        "lambda_min_all_sign_changes": sign_changes(&xs, &all),
        "lambda_min_meanzero_sign_changes": sign_changes(&xs, &mz),
        "failures": failures,
    });
    Ok((!xs.is_empty(), result, vec![name]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_change_interpolation() {
        let xs = [-2.0, -1.5, -0.5, 0.5];
        let ys = [Some(1.0), Some(0.5), Some(-0.5), None];
        assert_eq!(sign_changes(&xs, &ys), vec![-1.0]);
    }
}
