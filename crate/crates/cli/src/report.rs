//! Indicator ratios and effectivity indices from an iteration log.

use crate::output::{opt, ITERATION_HEADER};

pub const REPORT_HEADER: &str = "step,iter,scheme,ratio_LN,ratio_NL,ratio_LL,eff_index";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub step: usize,
    pub iter: usize,
    pub scheme: String,
    pub eta_lin: f64,
    pub eta_ln: Option<f64>,
    pub eta_nl: Option<f64>,
    pub eta_ll: Option<f64>,
    pub eff_index: Option<f64>,
}

fn cell(v: &str, col: &str, line: usize) -> Result<Option<f64>, String> {
    if v.is_empty() {
        return Ok(None);
    }
    v.parse().map(Some).map_err(|_| format!("line {line}: bad {col} value '{v}'"))
}

pub fn parse(text: &str) -> Result<Vec<Row>, String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        None => return Ok(Vec::new()),
        Some((_, h)) if h.trim() == ITERATION_HEADER => {}
        Some((_, h)) => return Err(format!("unexpected header '{h}'")),
    }
    let mut rows = Vec::new();
    for (k, line) in lines {
        let n = k + 1;
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 10 {
            return Err(format!("line {n}: expected 10 columns, found {}", f.len()));
        }
        let int = |v: &str, col: &str| v.parse::<usize>().map_err(|_| format!("line {n}: bad {col} value '{v}'"));
        rows.push(Row {
            step: int(f[0], "step")?,
            iter: int(f[1], "iter")?,
            scheme: f[2].to_string(),
            eta_lin: cell(f[3], "eta_lin", n)?.ok_or(format!("line {n}: missing eta_lin"))?,
            eta_ln: cell(f[4], "eta_LN", n)?,
            eta_nl: cell(f[5], "eta_NL", n)?,
            eta_ll: cell(f[6], "eta_LL", n)?,
            eff_index: cell(f[8], "eff_index", n)?,
        });
    }
    Ok(rows)
}

/// Each estimate over the `η_lin` of its own row, plus the logged
/// effectivity index.
pub fn render(rows: &[Row]) -> String {
    let mut s = String::from(REPORT_HEADER);
    s.push('\n');
    for r in rows {
        let ratio = |e: Option<f64>| opt(e.map(|v| v / r.eta_lin));
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.step,
            r.iter,
            r.scheme,
            ratio(r.eta_ln),
            ratio(r.eta_nl),
            ratio(r.eta_ll),
            opt(r.eff_index)
        ));
    }
    s
}
