//! File formats: loops as JSON lines, fields and results as CSV, run manifests as JSON.

use std::io::{BufRead, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{DiscreteDomain, Site, Step};
use crate::sampler::LatticeLoop;

#[derive(Serialize, Deserialize)]
struct LoopRecord {
    root: [i32; 2],
    steps: String,
}

/// One `{"root":[x,y],"steps":"ENWS"}` object per line.
pub fn write_loops_jsonl<W: Write>(mut w: W, loops: &[LatticeLoop]) -> Result<()> {
    for l in loops {
        let rec = LoopRecord {
            root: [l.root().x, l.root().y],
            steps: l.steps_string(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_loops_jsonl<R: BufRead>(r: R) -> Result<Vec<LatticeLoop>> {
    let mut loops = Vec::new();
    for (no, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LoopRecord = serde_json::from_str(&line)?;
        let steps = rec
            .steps
            .chars()
            .map(|c| Step::from_letter(c).ok_or_else(|| Error::param(format!("line {}: bad step `{c}`", no + 1))))
            .collect::<Result<Vec<_>>>()?;
        loops.push(LatticeLoop::new(Site::new(rec.root[0], rec.root[1]), steps)?);
    }
    Ok(loops)
}

/// Values of a field, one per face or vertex.
pub enum FieldValues<'a> {
    Real(&'a [f64]),
    Integer(&'a [i64]),
    Complex(&'a [Complex64]),
}

impl FieldValues<'_> {
    fn len(&self) -> usize {
        match self {
            FieldValues::Real(v) => v.len(),
            FieldValues::Integer(v) => v.len(),
            FieldValues::Complex(v) => v.len(),
        }
    }
}

fn write_field<W: Write>(w: W, points: Vec<(i32, i32, [f64; 2])>, values: &FieldValues) -> Result<()> {
    if points.len() != values.len() {
        return Err(Error::param(format!(
            "field has {} values for {} points",
            values.len(),
            points.len()
        )));
    }
    let mut out = csv::Writer::from_writer(w);
    match values {
        FieldValues::Complex(_) => out.write_record(["i", "j", "x", "y", "re", "im"])?,
        _ => out.write_record(["i", "j", "x", "y", "value"])?,
    }
    for (k, (i, j, p)) in points.into_iter().enumerate() {
        let mut rec = vec![i.to_string(), j.to_string(), p[0].to_string(), p[1].to_string()];
        match values {
            FieldValues::Real(v) => rec.push(v[k].to_string()),
            FieldValues::Integer(v) => rec.push(v[k].to_string()),
            FieldValues::Complex(v) => {
                rec.push(v[k].re.to_string());
                rec.push(v[k].im.to_string());
            }
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Face field with lattice indices `i, j` and the physical face center `x, y`.
pub fn write_face_field<W: Write>(w: W, domain: &DiscreteDomain, values: &FieldValues) -> Result<()> {
    let points = domain.faces().iter().map(|f| (f.x, f.y, f.center(domain.mesh()))).collect();
    write_field(w, points, values)
}

/// Vertex field with lattice indices `i, j` and physical position `x, y`.
pub fn write_vertex_field<W: Write>(w: W, domain: &DiscreteDomain, values: &FieldValues) -> Result<()> {
    let points = (0..domain.vertex_count())
        .map(|v| {
            let s = domain.vertices()[v];
            (s.x, s.y, domain.site_point(v))
        })
        .collect();
    write_field(w, points, values)
}

/// One line of experiment output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub quantity: String,
    /// `key=value` pairs joined by `;`.
    pub params: String,
    pub value: f64,
    /// Empty for exact values.
    pub stderr: Option<f64>,
    pub n: u64,
    pub seed: u64,
}

impl ResultRow {
    pub fn exact(experiment: &str, quantity: &str, params: String, value: f64) -> Self {
        ResultRow {
            experiment: experiment.into(),
            quantity: quantity.into(),
            params,
            value,
            stderr: None,
            n: 0,
            seed: 0,
        }
    }

    pub fn estimate(experiment: &str, quantity: &str, params: String, e: &crate::analysis::Estimate) -> Self {
        ResultRow {
            experiment: experiment.into(),
            quantity: quantity.into(),
            params,
            value: e.mean,
            stderr: Some(e.std_error),
            n: e.n,
            seed: e.seed,
        }
    }
}

/// Formats `key=value` pairs for [`ResultRow::params`].
pub fn params<I, K, V>(pairs: I) -> String
where
    I: IntoIterator<Item = (K, V)>,
    K: std::fmt::Display,
    V: std::fmt::Display,
{
    pairs.into_iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

pub fn write_results_csv<W: Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    if rows.is_empty() {
        out.write_record(["experiment", "quantity", "params", "value", "stderr", "n", "seed"])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_results_csv<R: std::io::Read>(r: R) -> Result<Vec<ResultRow>> {
    csv::Reader::from_reader(r).deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Everything needed to rerun and audit one run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Seconds since the Unix epoch when the run finished.
    pub timestamp: u64,
    pub command: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub checks: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            command: command.into(),
            config,
            outputs: Vec::new(),
            checks: serde_json::Value::Null,
        }
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}
