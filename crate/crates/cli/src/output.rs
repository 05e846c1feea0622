//! Text artifacts: the iteration log, legacy VTK fields and the run
//! manifest.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use richards_core::{CaseSpec, Constitutive, FeSpace, RunReport};
use serde_json::{json, Value};

pub const ITERATION_HEADER: &str = "step,iter,scheme,eta_lin,eta_LN,eta_NL,eta_LL,C_N,eff_index,wall_ms";

/// 17 significant digits, so that values round-trip.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn iterations_csv(report: &RunReport) -> String {
    let mut s = String::from(ITERATION_HEADER);
    s.push('\n');
    for r in report.records() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.step,
            r.iter,
            r.scheme.label(),
            num(r.eta_lin),
            opt(r.eta_ln),
            opt(r.eta_nl),
            opt(r.eta_ll),
            opt(r.c_n),
            opt(r.eff_index),
            num(r.wall_ms)
        );
    }
    s
}

/// Legacy ASCII unstructured grid with pressure head and water content at
/// the vertices.
pub fn vtk(space: &FeSpace, model: &dyn Constitutive, psi: &[f64], title: &str) -> String {
    let mesh = &space.mesh;
    let (nv, ne) = (mesh.num_vertices(), mesh.num_elements());
    let mut s = format!("# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS {nv} double\n");
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {} 0", num(v[0]), num(v[1]));
    }
    let _ = writeln!(s, "CELLS {ne} {}", 4 * ne);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {nv}");
    s.push_str("SCALARS pressure_head double 1\nLOOKUP_TABLE default\n");
    for &p in psi {
        let _ = writeln!(s, "{}", num(p));
    }
    s.push_str("SCALARS saturation double 1\nLOOKUP_TABLE default\n");
    for &p in psi {
        let _ = writeln!(s, "{}", num(model.water_content(p)));
    }
    s
}

pub fn case_json(spec: &CaseSpec) -> Value {
    json!({
        "name": spec.name,
        "domain": [spec.rect.x0, spec.rect.z0, spec.rect.x1, spec.rect.z1],
        "nx": spec.nx,
        "nz": spec.nz,
        "tau": spec.tau,
        "steps": spec.steps,
        "params": spec.params.map(|p| json!({
            "theta_r": p.theta_r, "theta_s": p.theta_s, "k_s": p.k_s, "alpha": p.alpha, "n": p.n_vg,
        })),
        "l1": spec.l1,
        "l2": spec.l2,
    })
}

/// Manifest that is written before a run and rewritten when it ends.
pub struct Manifest {
    path: PathBuf,
    body: Value,
}

impl Manifest {
    pub fn start(dir: &Path, command: &str, config: Value) -> io::Result<Self> {
        let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let body = json!({
            "command": command,
            "invocation": std::env::args().collect::<Vec<_>>(),
            "version": env!("CARGO_PKG_VERSION"),
            "started_unix": started,
            "config": config,
            "status": "running",
            "outputs": [],
        });
        let m = Manifest { path: dir.join("manifest.json"), body };
        m.write()?;
        Ok(m)
    }

    pub fn finish(mut self, status: &str, summary: &str, outputs: &[PathBuf]) -> io::Result<()> {
        let finished = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        self.body["status"] = json!(status);
        self.body["summary"] = json!(summary);
        self.body["finished_unix"] = json!(finished);
        let mut files: Vec<String> = outputs.iter().map(|p| p.display().to_string()).collect();
        files.push(self.path.display().to_string());
        self.body["outputs"] = json!(files);
        self.write()
    }

    fn write(&self) -> io::Result<()> {
        let text = serde_json::to_string_pretty(&self.body).map_err(io::Error::other)?;
        std::fs::write(&self.path, text + "\n")
    }
}
