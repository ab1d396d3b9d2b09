//! Reference systems: the example flows, the Möbius quotient field, planar
//! horseshoe models and a synthetic half-period map family, plus a
//! by-name registry with parameter overrides.

mod flows;
mod maps;

pub use flows::{make_example1, make_example2, make_mobius, Example1, Example2, FTerms, Mobius};
pub use maps::{
    make_affine_model, make_synthetic_halfperiod, make_two_orbit_layout, AffinePiece, IdentityMap, PiecewiseAffine,
    SyntheticHalfPeriod,
};

use crate::flow::SystemDef;
use crate::horseshoe::{HorseshoeError, StripSystem};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("parameter {name} = {value} outside {range}")]
    Range { name: &'static str, value: f64, range: &'static str },
    #[error("unknown system '{0}'")]
    Unknown(String),
    #[error("system '{system}' has no parameter '{name}'")]
    UnknownParameter { system: String, name: String },
    #[error(transparent)]
    Strips(#[from] HorseshoeError),
}

/// A built-in system.
#[derive(Debug, Clone)]
pub enum Model {
    Flow(SystemDef),
    Planar { map: PiecewiseAffine, system: StripSystem },
    Family(SyntheticHalfPeriod),
}

pub const MODEL_NAMES: [&str; 6] = ["example1", "example2", "mobius", "affine_A", "two_orbit_B", "synthetic_halfperiod"];

/// Default parameters of a named system.
pub fn default_parameters(name: &str) -> Result<BTreeMap<String, f64>, ModelError> {
    let pairs: &[(&str, f64)] = match name {
        "example1" => &[("alpha", 0.5), ("gamma", 0.3)],
        "example2" => &[("alpha", 0.5), ("f3", 1.0)],
        "mobius" | "two_orbit_B" => &[],
        "affine_A" => &[("tilt", 0.0)],
        "synthetic_halfperiod" => {
            let d = SyntheticHalfPeriod::default();
            return Ok([
                ("lambda", d.lambda),
                ("kappa", d.kappa),
                ("u0", d.u0),
                ("sigma", d.sigma),
                ("c", d.c),
                ("knob", d.knob),
                ("local_limit", d.local_limit),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect());
        }
        other => return Err(ModelError::Unknown(other.to_string())),
    };
    Ok(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
}

/// Builds a named system with `overrides` applied to its defaults.
pub fn model_by_name(name: &str, overrides: &BTreeMap<String, f64>) -> Result<Model, ModelError> {
    let mut p = default_parameters(name)?;
    for (k, v) in overrides {
        match p.get_mut(k) {
            Some(slot) => *slot = *v,
            None => return Err(ModelError::UnknownParameter { system: name.to_string(), name: k.clone() }),
        }
    }
    Ok(match name {
        "example1" => Model::Flow(make_example1(p["alpha"], p["gamma"])?),
        "example2" => Model::Flow(make_example2(p["alpha"], p["f3"])?),
        "mobius" => Model::Flow(make_mobius()),
        "affine_A" => {
            let (map, system) = make_affine_model(p["tilt"])?;
            Model::Planar { map, system }
        }
        "two_orbit_B" => {
            let (map, system) = make_two_orbit_layout()?;
            Model::Planar { map, system }
        }
        _ => {
            let f = SyntheticHalfPeriod {
                lambda: p["lambda"],
                kappa: p["kappa"],
                u0: p["u0"],
                sigma: p["sigma"],
                c: p["c"],
                knob: p["knob"],
                local_limit: p["local_limit"],
            };
            f.validate()?;
            Model::Family(f)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_builds() {
        for n in MODEL_NAMES {
            model_by_name(n, &BTreeMap::new()).unwrap();
        }
    }

    #[test]
    fn overrides_are_checked() {
        let mut o = BTreeMap::new();
        o.insert("alpha".to_string(), 1.5);
        assert!(matches!(model_by_name("example1", &o), Err(ModelError::Range { .. })));
        o.clear();
        o.insert("beta".to_string(), 1.0);
        assert!(matches!(model_by_name("example1", &o), Err(ModelError::UnknownParameter { .. })));
        assert!(matches!(model_by_name("lorenz", &BTreeMap::new()), Err(ModelError::Unknown(_))));
    }
}
