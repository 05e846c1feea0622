//! Case resolution: a built-in name or a flat `key = value` file that
//! starts from a built-in case and overrides its scalar data.

use std::path::Path;

use richards_core::{builtin_case, cases::case2_with, CaseSpec};

const KEYS: &[&str] = &[
    "base", "name", "nx", "nz", "tau", "steps", "theta_r", "theta_s", "k_s", "alpha", "n", "l1", "l2", "silt_loam",
];

pub fn resolve(id: &str) -> Result<CaseSpec, String> {
    if let Some(spec) = builtin_case(id) {
        return Ok(spec);
    }
    let path = Path::new(id);
    if !path.exists() {
        return Err(format!("unknown case '{id}' (expected case1, case2, case3 or a case file)"));
    }
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn entries(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", k + 1))?;
        let key = key.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(format!("line {}: unknown key '{key}'", k + 1));
        }
        if out.iter().any(|(seen, _)| *seen == key) {
            return Err(format!("line {}: duplicate key '{key}'", k + 1));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("{key}: cannot parse '{value}'"))
}

pub fn parse(text: &str) -> Result<CaseSpec, String> {
    let entries = entries(text)?;
    let get = |key: &str| entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let base = get("base").ok_or("missing key 'base'")?;
    let silt_loam = match get("silt_loam") {
        None => false,
        Some(v) => number::<bool>("silt_loam", v)?,
    };
    let mut spec = if base == "case2" || base == "2" {
        case2_with(silt_loam)
    } else {
        if silt_loam {
            return Err("silt_loam applies to base case2 only".into());
        }
        builtin_case(base).ok_or_else(|| format!("unknown base case '{base}'"))?
    };
    if let Some(v) = get("name") {
        spec.name = v.to_string();
    }
    if let Some(v) = get("nx") {
        spec.nx = number("nx", v)?;
    }
    if let Some(v) = get("nz") {
        spec.nz = number("nz", v)?;
    }
    if let Some(v) = get("tau") {
        spec.tau = number("tau", v)?;
    }
    if let Some(v) = get("steps") {
        spec.steps = number("steps", v)?;
    }
    let mut params = spec.params.ok_or("base case has no van Genuchten parameters")?;
    let mut touched = false;
    for (key, slot) in [
        ("theta_r", &mut params.theta_r),
        ("theta_s", &mut params.theta_s),
        ("k_s", &mut params.k_s),
        ("alpha", &mut params.alpha),
        ("n", &mut params.n_vg),
    ] {
        if let Some(v) = get(key) {
            *slot = number(key, v)?;
            touched = true;
        }
    }
    if touched {
        spec = spec.with_params(params).map_err(|e| e.to_string())?;
    }
    if let Some(v) = get("l1") {
        spec.l1 = number("l1", v)?;
    }
    if let Some(v) = get("l2") {
        spec.l2 = number("l2", v)?;
    }
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}
