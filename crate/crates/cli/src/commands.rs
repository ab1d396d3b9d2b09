//! The four batch commands. Each returns a report (serialised as JSON) plus
//! data files; verdicts, including failed ones, are data.

use crate::config::{Format, RunConfig};
use crate::CliError;
use chaoscert::flow::export::{trajectory_csv, trajectory_json};
use chaoscert::flow::{integrate_trajectory, IntegratorConfig, SystemDef};
use chaoscert::horseshoe::export::{certificate_json, strips_csv, strips_json};
use chaoscert::horseshoe::{
    build_strips_from_flow, certify, periodic_points, shadow, CertifyConfig, FlowStrips, HorseshoeCertificate,
    PlanarMap, SearchConfig, StripSystem,
};
use chaoscert::models::{model_by_name, Example1, Example2, Model};
use chaoscert::orbits::{build_frames, floquet, refine_orbit, saddle_focus_test, HalfPeriodFamily, OrbitClass};
use chaoscert::symbolic::{
    count_periodic, count_words, entropy, spectral_radius, word_growth_naive, word_growth_ratio, TransitionMatrix, Word,
};
use nalgebra::Vector3;
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::TAU;
use std::sync::Arc;

/// Report plus the data files to write next to it.
pub struct Outcome {
    pub report: Report,
    /// `(file name, contents)`; the first one is the primary table.
    pub files: Vec<(String, String)>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub config: RunConfig,
    pub result: Value,
    pub warnings: Vec<String>,
}

fn integrator(cfg: &RunConfig) -> IntegratorConfig {
    let d = IntegratorConfig::default();
    IntegratorConfig::with_tolerances(cfg.tol_abs.unwrap_or(d.abs_tol), cfg.tol_rel.unwrap_or(d.rel_tol))
}

/// The flow named in the config. With `allow_degenerate` the example flows
/// are built without their parameter range checks.
fn flow_system(cfg: &RunConfig) -> Result<SystemDef, CliError> {
    let name = cfg.system()?;
    if cfg.allow_degenerate && matches!(name, "example1" | "example2") {
        let p = chaoscert::models::default_parameters(name).map_err(CliError::model)?;
        let get = |k: &str| -> Result<f64, CliError> {
            for key in cfg.params.keys() {
                if !p.contains_key(key) {
                    return Err(CliError::Usage(format!("system '{name}' has no parameter '{key}'")));
                }
            }
            Ok(cfg.params.get(k).copied().unwrap_or(p[k]))
        };
        return Ok(match name {
            "example1" => Example1 { alpha: get("alpha")?, gamma: get("gamma")? }.system(),
            _ => Example2 { alpha: get("alpha")?, f3: get("f3")? }.system(),
        });
    }
    match model_by_name(name, &cfg.params).map_err(CliError::model)? {
        Model::Flow(sys) => Ok(sys),
        _ => Err(CliError::Usage(format!("'{name}' is not a flow"))),
    }
}

/// Default start point, integration time and period guess of each flow.
fn flow_defaults(name: &str) -> ([f64; 3], f64, [f64; 3], f64) {
    match name {
        "mobius" => ([0.0, 0.0, 1.25], 1.0, [0.0, 0.0, 1.25], 1.0),
        // the circle sits in a family of periodic orbits; start on it
        "example2" => ([1.0, 0.0, 0.0], TAU, [1.0, 0.0, 0.0], TAU),
        _ => ([1.0, 0.0, 0.0], TAU, [1.05, 0.0, 0.02], 6.3),
    }
}

fn frame_half_width(name: &str) -> f64 {
    if name == "mobius" {
        0.2
    } else {
        0.1
    }
}

fn vec3(v: &Vector3<f64>) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

pub fn integrate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sys = flow_system(cfg)?;
    let (x0, t, _, _) = flow_defaults(&sys.name);
    let x0 = cfg.x0.unwrap_or(x0);
    let t = cfg.t.unwrap_or(t);
    let tr = integrate_trajectory(&sys, &Vector3::from(x0), t, &integrator(cfg)).map_err(CliError::numerical)?;
    let end = tr.end();
    let result = json!({
        "system": sys.name,
        "x0": x0,
        "t": t,
        "x_end": vec3(&end),
        "samples": tr.samples.len(),
    });
    let file = match cfg.format {
        Format::Json => ("trajectory.json".to_string(), trajectory_json(&tr)),
        Format::Csv => ("trajectory.csv".to_string(), trajectory_csv(&tr)),
    };
    Ok(Outcome { report: Report { command: "integrate", config: cfg.clone(), result, warnings: vec![] }, files: vec![file] })
}

fn class_name(c: OrbitClass) -> &'static str {
    match c {
        OrbitClass::Saddle => "saddle",
        OrbitClass::OrientationReversingSaddle => "orientation_reversing_saddle",
        OrbitClass::MixedSaddle => "mixed_saddle",
        OrbitClass::Node => "node",
        OrbitClass::Focus => "focus",
        OrbitClass::NonHyperbolic => "non_hyperbolic",
    }
}

pub fn orbit(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sys = flow_system(cfg)?;
    let (_, _, guess, period) = flow_defaults(&sys.name);
    let guess = cfg.x0.unwrap_or(guess);
    let period = cfg.period.unwrap_or(period);
    let icfg = integrator(cfg);
    let orbit = refine_orbit(&sys, &Vector3::from(guess), period, &icfg).map_err(CliError::numerical)?;
    let fl = floquet(&sys, &orbit, &icfg).map_err(CliError::numerical)?;
    let mut warnings = Vec::new();
    if !fl.is_hyperbolic() {
        warnings.push("orbit is not hyperbolic: a transversal multiplier lies on the unit circle".to_string());
    }
    let saddle_focus = saddle_focus_test(&sys, &orbit.x0).ok();
    let result = json!({
        "system": sys.name,
        "x0": vec3(&orbit.x0),
        "period": orbit.period,
        "residual": orbit.residual,
        "newton_iterations": orbit.iterations,
        "verdict": if fl.is_hyperbolic() { "hyperbolic" } else { "non_hyperbolic" },
        "classification": class_name(fl.classification),
        "orientation_reversing": fl.orientation_flip(),
        "multipliers": fl.multipliers.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        "trivial_index": fl.trivial_index,
        "trivial_residual": fl.trivial_residual,
        "lambda_s": fl.lambda_s,
        "lambda_u": fl.lambda_u,
        "mu_s": fl.mu_s,
        "mu_u": fl.mu_u,
        "e_s": fl.e_s.as_ref().map(vec3),
        "e_u": fl.e_u.as_ref().map(vec3),
        "c_estimate": fl.c_estimate,
        "liouville": fl.liouville,
        "monodromy": (0..3).map(|i| [fl.monodromy[(i, 0)], fl.monodromy[(i, 1)], fl.monodromy[(i, 2)]]).collect::<Vec<_>>(),
        "saddle_focus": saddle_focus,
    });
    let file = match cfg.format {
        Format::Json => ("orbit.json".to_string(), serde_json::to_string_pretty(&orbit.samples).expect("samples serialise")),
        Format::Csv => {
            let mut s = String::from("t,x,y,z\n");
            for p in &orbit.samples {
                s.push_str(&format!("{},{},{},{}\n", p.t, p.x[0], p.x[1], p.x[2]));
            }
            ("orbit.csv".to_string(), s)
        }
    };
    Ok(Outcome { report: Report { command: "orbit", config: cfg.clone(), result, warnings }, files: vec![file] })
}

fn load_matrix(spec: Option<&str>) -> Result<TransitionMatrix, CliError> {
    let spec = spec.unwrap_or("A4");
    if let Ok(a) = TransitionMatrix::builtin(spec) {
        return Ok(a);
    }
    let text = std::fs::read_to_string(spec).map_err(|e| CliError::Usage(format!("cannot read matrix {spec}: {e}")))?;
    TransitionMatrix::parse(&text).map_err(|e| CliError::Usage(format!("matrix {spec}: {e}")))
}

pub fn entropy_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let a = load_matrix(cfg.matrix.as_deref())?;
    let n = cfg.m.unwrap_or(20);
    if n == 0 {
        return Err(CliError::Usage("--m must be at least 1".into()));
    }
    let sym = |e: chaoscert::symbolic::SymbolicError| CliError::Numerical(e.to_string());
    let h = entropy(&a).map_err(sym)?;
    let mut rows = Vec::new();
    let mut csv = String::from("n,words,periodic\n");
    for k in 1..=n {
        let w = count_words(&a, k).map_err(sym)?;
        let p = count_periodic(&a, k).map_err(sym)?;
        csv.push_str(&format!("{k},{w},{p}\n"));
        rows.push(json!({ "n": k, "words": w.to_string(), "periodic": p.to_string() }));
    }
    let word = match &cfg.word {
        Some(text) => {
            let w = Word::parse(text, a.m()).map_err(|e| CliError::Usage(e.to_string()))?;
            let ok = chaoscert::symbolic::admissible(&w, &a).map_err(sym)?;
            Some(json!({ "word": w.symbols(), "admissible": ok }))
        }
        None => None,
    };
    let result = json!({
        "matrix": a.rows(),
        "entropy": h,
        "spectral_radius": spectral_radius(&a).map_err(sym)?,
        "n": n,
        "word_growth_naive": word_growth_naive(&a, n).map_err(sym)?,
        "word_growth_ratio": word_growth_ratio(&a, n).map_err(sym)?,
        "counts": rows,
        "word": word,
    });
    let file = match cfg.format {
        Format::Json => ("counts.json".to_string(), serde_json::to_string_pretty(&result["counts"]).expect("json")),
        Format::Csv => ("counts.csv".to_string(), csv),
    };
    Ok(Outcome { report: Report { command: "entropy", config: cfg.clone(), result, warnings: vec![] }, files: vec![file] })
}

fn certify_config(cfg: &RunConfig) -> CertifyConfig {
    CertifyConfig { seed: cfg.seed, ..CertifyConfig::default() }
}

/// Shadow results and period-2 points of a certified system.
fn spot_checks(
    cfg: &RunConfig,
    cert: &HorseshoeCertificate,
    map: &dyn PlanarMap,
    sys: &StripSystem,
) -> Result<Value, CliError> {
    if !cert.is_certified() {
        return Ok(Value::Null);
    }
    let word = match &cfg.word {
        Some(text) => {
            let w = Word::parse(text, sys.symbols()).map_err(|e| CliError::Usage(e.to_string()))?;
            Some(match shadow(cert, map, sys, &w) {
                Ok(p) => json!({ "word": w.symbols(), "point": p }),
                Err(e) => json!({ "word": w.symbols(), "error": e.to_string() }),
            })
        }
        None => None,
    };
    let period2 = periodic_points(cert, map, sys, 2).map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(json!({ "shadow": word, "period2_points": period2 }))
}

fn strips_file(cfg: &RunConfig, sys: &StripSystem) -> (String, String) {
    match cfg.format {
        Format::Json => ("strips.json".to_string(), strips_json(sys)),
        Format::Csv => ("strips.csv".to_string(), strips_csv(sys)),
    }
}

pub fn certify_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let name = cfg.system()?.to_string();
    let mut search = SearchConfig { certify: certify_config(cfg), ..SearchConfig::default() };
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    let model = if cfg.allow_degenerate && matches!(name.as_str(), "example1" | "example2") {
        Model::Flow(flow_system(cfg)?)
    } else {
        model_by_name(&name, &cfg.params).map_err(CliError::model)?
    };
    let result = match model {
        Model::Planar { map, system } => {
            let cert = certify(&map, &system, &search.certify);
            let checks = spot_checks(cfg, &cert, &map, &system)?;
            files.push(strips_file(cfg, &system));
            files.push(("certificate.json".to_string(), certificate_json(&cert)));
            json!({
                "verdict": if cert.is_certified() { "certified" } else { "failed" },
                "certificate": cert,
                "checks": checks,
            })
        }
        Model::Family(fam) => {
            let fam = Arc::new(fam);
            let built = match cfg.m {
                Some(m) => FlowStrips::certify_at(fam, m, &search).map(|(s, map, c)| (s, map, c, None, m)),
                None => build_strips_from_flow(fam, &search).map(|r| (r.system, r.map, r.certificate, Some(r.report), r.m)),
            };
            flow_strips_result(cfg, built, &mut files)?
        }
        Model::Flow(sys) => {
            let icfg = integrator(cfg);
            let (_, _, guess, period) = flow_defaults(&sys.name);
            let guess = cfg.x0.unwrap_or(guess);
            let orbit = refine_orbit(&sys, &Vector3::from(guess), cfg.period.unwrap_or(period), &icfg)
                .map_err(CliError::numerical)?;
            let fl = floquet(&sys, &orbit, &icfg).map_err(CliError::numerical)?;
            if !fl.is_hyperbolic() {
                warnings.push("orbit is not hyperbolic; no frames to build".to_string());
                json!({ "verdict": "failed", "failure": { "step": "orbit", "reason": "non-hyperbolic periodic orbit" } })
            } else {
                let hw = frame_half_width(&sys.name);
                let frames = build_frames(&sys, &orbit, &fl, [hw, hw], &icfg).map_err(CliError::numerical)?;
                let fam = HalfPeriodFamily::new(sys, &orbit, frames, icfg).map_err(CliError::numerical)?;
                if let Some(m) = cfg.m {
                    search.k_max = m.max(1);
                }
                let built = build_strips_from_flow(Arc::new(fam), &search)
                    .map(|r| (r.system, r.map, r.certificate, Some(r.report), r.m));
                flow_strips_result(cfg, built, &mut files)?
            }
        }
    };
    Ok(Outcome { report: Report { command: "certify", config: cfg.clone(), result, warnings }, files })
}

type Built = (
    StripSystem,
    chaoscert::horseshoe::FamilyMap,
    HorseshoeCertificate,
    Option<chaoscert::horseshoe::SearchReport>,
    usize,
);

fn flow_strips_result(
    cfg: &RunConfig,
    built: Result<Built, chaoscert::horseshoe::BuildFailure>,
    files: &mut Vec<(String, String)>,
) -> Result<Value, CliError> {
    Ok(match built {
        Ok((system, map, cert, report, m)) => {
            let checks = spot_checks(cfg, &cert, &map, &system)?;
            files.push(strips_file(cfg, &system));
            files.push(("certificate.json".to_string(), certificate_json(&cert)));
            json!({
                "verdict": if cert.is_certified() { "certified" } else { "failed" },
                "m": m,
                "certificate": cert,
                "search": report,
                "checks": checks,
            })
        }
        Err(failure) => json!({ "verdict": "failed", "failure": failure }),
    })
}
