//! JSON clouds and graphs; CSV and JSON fields with `inf` as the `+inf`
//! sentinel.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Edge, Graph, PointCloud};
use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::manifold::{Manifold, ManifoldSpec, Point};

#[derive(Serialize, Deserialize)]
pub struct CloudFile {
    pub manifold: ManifoldSpec,
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
    pub method: String,
}

#[derive(Serialize, Deserialize)]
pub struct GraphFile {
    pub manifold: ManifoldSpec,
    pub points: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
    pub lengths: Vec<f64>,
    pub k: usize,
    pub h: f64,
}

pub fn cloud_to_file(c: &PointCloud) -> CloudFile {
    CloudFile { manifold: c.manifold.spec(), points: c.points.iter().map(Point::to_vec).collect(), seed: c.seed, method: c.method.clone() }
}

pub fn cloud_from_file(f: CloudFile) -> Result<PointCloud> {
    let m = Manifold::from_spec(&f.manifold)?;
    let points = f.points.iter().map(|p| Point::from_slice(p)).collect();
    let mut c = super::from_points(&m, points)?;
    c.seed = f.seed;
    c.method = f.method;
    Ok(c)
}

pub fn graph_to_file(g: &Graph) -> GraphFile {
    GraphFile {
        manifold: g.manifold.spec(),
        points: g.points.iter().map(Point::to_vec).collect(),
        edges: g.edges.iter().map(|e| [e.i, e.j]).collect(),
        lengths: g.edges.iter().map(|e| e.length).collect(),
        k: g.k,
        h: g.h,
    }
}

pub fn graph_from_file(f: GraphFile) -> Result<Graph> {
    if f.edges.len() != f.lengths.len() {
        return Err(Error::InvalidInput("edges and lengths differ in count".into()));
    }
    let m = Manifold::from_spec(&f.manifold)?;
    let points: Vec<Point> = f.points.iter().map(|p| Point::from_slice(p)).collect();
    if let Some(i) = points.iter().position(|p| !m.contains(p)) {
        return Err(Error::InvalidInput(format!("point {i} lies outside the coordinate domain")));
    }
    let edges = f.edges.iter().zip(&f.lengths).map(|(e, l)| Edge { i: e[0], j: e[1], length: *l }).collect();
    Graph::from_edges(&m, points, edges, f.k)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_graph(g: &Graph, path: &Path) -> Result<()> {
    write_json(&graph_to_file(g), path)
}

pub fn read_graph(path: &Path) -> Result<Graph> {
    graph_from_file(read_json(path)?)
}

fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v:?}")
    }
}

fn parse_value(s: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::InvalidInput(format!("bad field value '{s}'")))?;
    if v.is_nan() || v == f64::NEG_INFINITY {
        return Err(Error::InvalidInput(format!("field value '{s}' is not in (-inf, +inf]")));
    }
    Ok(v)
}

pub fn write_field_csv(f: &DiscreteField, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["vertex_index", "value"])?;
    for (i, v) in f.values.iter().enumerate() {
        w.write_record([i.to_string(), format_value(*v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_csv(path: &Path) -> Result<DiscreteField> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["vertex_index", "value"] {
        return Err(Error::InvalidInput("field CSV header must be vertex_index,value".into()));
    }
    let mut values = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let idx: usize = rec[0].trim().parse().map_err(|_| Error::InvalidInput(format!("bad vertex index '{}'", &rec[0])))?;
        if idx != row {
            return Err(Error::InvalidInput(format!("row {row} has vertex index {idx}")));
        }
        values.push(parse_value(&rec[1])?);
    }
    Ok(DiscreteField::new(values))
}

pub fn field_to_json(f: &DiscreteField) -> serde_json::Value {
    let values: Vec<serde_json::Value> =
        f.values.iter().map(|v| if v.is_finite() { serde_json::json!(v) } else { serde_json::json!(format_value(*v)) }).collect();
    serde_json::json!({ "values": values })
}

pub fn field_from_json(v: &serde_json::Value) -> Result<DiscreteField> {
    let arr = v.get("values").and_then(|a| a.as_array()).ok_or_else(|| Error::InvalidInput("field JSON needs a values array".into()))?;
    let values = arr
        .iter()
        .map(|x| match x {
            serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| Error::InvalidInput("bad number".into())),
            serde_json::Value::String(s) => parse_value(s),
            _ => Err(Error::InvalidInput("field values must be numbers or \"inf\"".into())),
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DiscreteField::new(values))
}
