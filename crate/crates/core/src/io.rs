//! CSV tables and run manifests.
//!
//! Numbers are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64`. Data files never contain timestamps, so identical
//! runs produce identical bytes; timing lives only in `manifest.json`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::boundary::{ScalarBc, TensorBc};
use crate::error::{invalid, Error, Result};
use crate::field::{ScalarField, TensorField};
use crate::flow::Diagnostics;
use crate::grid::{GridDomain, NodeClass};
use crate::stability::EigenResult;
use crate::sweep::{CriticalEstimate, SweepRecord};
use crate::tensor::biaxiality;

pub const MANIFEST: &str = "manifest.json";

pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn node_rows(grid: &GridDomain) -> impl Iterator<Item = usize> + '_ {
    (0..grid.len()).filter(|&k| !matches!(grid.class(k), NodeClass::Exterior))
}

/// `x,y,q` over interior and boundary nodes.
pub fn scalar_field_csv(q: &ScalarField) -> String {
    let g = q.grid();
    let mut s = String::from("x,y,q\n");
    for k in node_rows(g) {
        let (x, y) = g.xy(k);
        let _ = writeln!(s, "{},{},{}", fmt_f(x), fmt_f(y), fmt_f(q.value(k)));
    }
    s
}

/// `x,y,q1..q5,beta2` over interior and boundary nodes; `beta2` is `nan`
/// where `|Q|` is too small for it to be defined.
pub fn tensor_field_csv(q: &TensorField) -> String {
    let g = q.grid();
    let mut s = String::from("x,y,q1,q2,q3,q4,q5,beta2\n");
    for k in node_rows(g) {
        let (x, y) = g.xy(k);
        let v = q.value(k);
        let b = biaxiality(&v).unwrap_or(f64::NAN);
        let _ = write!(s, "{},{}", fmt_f(x), fmt_f(y));
        for c in v.0 {
            let _ = write!(s, ",{}", fmt_f(c));
        }
        let _ = writeln!(s, ",{}", fmt_f(b));
    }
    s
}

/// `step,t,energy,residual` plus one column per monitor.
pub fn diagnostics_csv(d: &Diagnostics, monitor_names: &[&str]) -> String {
    let mut s = String::from("step,t,energy,residual");
    for m in monitor_names {
        s.push(',');
        s.push_str(m);
    }
    s.push('\n');
    for r in &d.records {
        let _ = write!(s, "{},{},{},{}", r.step, fmt_f(r.t), fmt_f(r.energy), fmt_f(r.residual));
        for v in &r.extra {
            let _ = write!(s, ",{}", fmt_f(*v));
        }
        s.push('\n');
    }
    s
}

/// Boundary datum attached to a node table.
pub enum DomainData<'a> {
    Scalar(&'a ScalarBc),
    Tensor(&'a TensorBc),
}

/// Node table `x,y,class,edge_id,...` over all nodes, with `q_b` or
/// `q1..q5` filled on boundary nodes and left empty elsewhere.
pub fn domain_csv(grid: &GridDomain, data: DomainData<'_>) -> String {
    let mut s = String::from("x,y,class,edge_id");
    match data {
        DomainData::Scalar(_) => s.push_str(",q_b\n"),
        DomainData::Tensor(_) => s.push_str(",q1,q2,q3,q4,q5\n"),
    }
    for k in 0..grid.len() {
        let (x, y) = grid.xy(k);
        let class = grid.class(k);
        let edge = match class {
            NodeClass::Boundary(t) => t.label(),
            _ => String::new(),
        };
        let _ = write!(s, "{},{},{},{}", fmt_f(x), fmt_f(y), class.name(), edge);
        let on = matches!(class, NodeClass::Boundary(_));
        match &data {
            DomainData::Scalar(bc) => {
                let v = if on { fmt_f(bc.node(k)) } else { String::new() };
                let _ = writeln!(s, ",{v}");
            }
            DomainData::Tensor(bc) => {
                for c in 0..5 {
                    let v = if on { fmt_f(bc.node(k).0[c]) } else { String::new() };
                    let _ = write!(s, ",{v}");
                }
                s.push('\n');
            }
        }
    }
    s
}

/// Sweep table followed by a `# critical_lambda_bar_sq=` line (`none` when no
/// crossing was found).
pub fn sweep_csv(records: &[SweepRecord], critical: Option<&CriticalEstimate>) -> String {
    let mut s = String::from("lambda_bar_sq,probe1,probe2,probe3,residual,converged,steps\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            fmt_f(r.lambda_bar_sq),
            fmt_f(r.probes[0]),
            fmt_f(r.probes[1]),
            fmt_f(r.probes[2]),
            fmt_f(r.residual),
            r.converged,
            r.steps
        );
    }
    match critical {
        Some(c) => {
            let _ = writeln!(s, "# critical_lambda_bar_sq={}", fmt_f(c.lambda_bar_sq));
            if let (Some((lo, hi)), Some(root)) = (c.mu_interval, c.mu_root) {
                let _ = writeln!(s, "# mu_sign_change={},{}", fmt_f(lo), fmt_f(hi));
                let _ = writeln!(s, "# mu_root={}", fmt_f(root));
            }
            if let Some(ok) = c.consistent {
                let _ = writeln!(s, "# consistent={ok}");
            }
        }
        None => s.push_str("# critical_lambda_bar_sq=none\n"),
    }
    s
}

/// `lambda_bar_sq,mu,iterations,residual`.
pub fn eigen_csv(rows: &[(f64, &EigenResult)]) -> String {
    let mut s = String::from("lambda_bar_sq,mu,iterations,residual\n");
    for (l, e) in rows {
        let _ = writeln!(s, "{},{},{},{}", fmt_f(*l), fmt_f(e.mu), e.iterations, fmt_f(e.residual));
    }
    s
}

/// Parses the `# critical_lambda_bar_sq=` line of a sweep table.
pub fn read_critical(csv: &str) -> Option<f64> {
    csv.lines().find_map(|l| l.strip_prefix("# critical_lambda_bar_sq=")).and_then(|v| v.trim().parse().ok())
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a BTreeMap<String, String>,
    wall_time_s: f64,
    status: &'a str,
    summary: &'a BTreeMap<String, String>,
    files: Vec<FileEntry>,
}

/// Files written by one run. On failure [`OutputSet::discard`] removes them
/// again; on success [`OutputSet::finish`] writes the manifest last.
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl OutputSet {
    /// Creates `dir` if needed. An existing directory must be empty so that
    /// the manifest lists everything in it.
    pub fn create(dir: &Path) -> Result<Self> {
        if dir.exists() {
            let mut it = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
            if it.next().is_some() {
                return invalid(format!("output directory {} is not empty", dir.display()));
            }
        } else {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        Ok(OutputSet { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: String) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents.as_bytes()).map_err(|e| io_err(&path, e))?;
        let digest = hex::encode(Sha256::digest(contents.as_bytes()));
        self.files.retain(|(n, _)| n != name);
        self.files.push((name.to_string(), digest));
        Ok(())
    }

    pub fn discard(self) {
        for (name, _) in &self.files {
            let _ = fs::remove_file(self.dir.join(name));
        }
        let _ = fs::remove_file(self.dir.join(format!("{MANIFEST}.tmp")));
    }

    /// Writes `manifest.json` through a temporary file and a rename.
    pub fn finish(
        self,
        command: &str,
        config: &BTreeMap<String, String>,
        wall_time_s: f64,
        status: &str,
        summary: &BTreeMap<String, String>,
    ) -> Result<Vec<String>> {
        let mut files = Vec::new();
        for (name, sha) in &self.files {
            let bytes = fs::metadata(self.dir.join(name)).map_err(|e| io_err(&self.dir.join(name), e))?.len();
            files.push(FileEntry { name: name.clone(), bytes: bytes as usize, sha256: sha.clone() });
        }
        let m = Manifest { command, version: env!("CARGO_PKG_VERSION"), config, wall_time_s, status, summary, files };
        let text = serde_json::to_string_pretty(&m).map_err(|e| Error::InvalidInput(format!("manifest: {e}")))?;
        let tmp = self.dir.join(format!("{MANIFEST}.tmp"));
        let dst = self.dir.join(MANIFEST);
        if let Err(e) = fs::write(&tmp, text.as_bytes()).and_then(|_| fs::rename(&tmp, &dst)) {
            let err = io_err(&dst, e);
            self.discard();
            return Err(err);
        }
        Ok(self.files.into_iter().map(|(n, _)| n).collect())
    }
}
