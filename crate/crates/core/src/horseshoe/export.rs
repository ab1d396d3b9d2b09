//! Plot-ready exports of strip systems and certificates.

use super::{HorseshoeCertificate, Strip, StripSystem};
use std::fmt::Write;

fn push_strip(out: &mut String, sys: &StripSystem, s: &Strip, kind: &str) {
    let square = &sys.squares[s.square].name;
    for (name, c) in [("lower", &s.lower), ("upper", &s.upper)] {
        for (t, v) in c.params.iter().zip(&c.values) {
            let _ = writeln!(out, "{square},{kind},{},{name},{t},{v}", s.label);
        }
    }
}

/// One row per boundary sample:
/// `square,kind,label,boundary,param,value` in normalised coordinates.
pub fn strips_csv(sys: &StripSystem) -> String {
    let mut out = String::from("square,kind,label,boundary,param,value\n");
    for s in &sys.h_strips {
        push_strip(&mut out, sys, s, "h");
    }
    for s in &sys.v_strips {
        push_strip(&mut out, sys, s, "v");
    }
    out
}

pub fn strips_json(sys: &StripSystem) -> String {
    serde_json::to_string_pretty(sys).expect("strip system serialises")
}

pub fn certificate_json(cert: &HorseshoeCertificate) -> String {
    serde_json::to_string_pretty(cert).expect("certificate serialises")
}
