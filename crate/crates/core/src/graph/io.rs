//! Snapshot stream files: newline-delimited JSON. Line 1 is the header
//! `{format_version, step_seconds, n_nodes, provenance?}`; every further line is one
//! snapshot `{t, nodes: [{id, x, y, vx, vy}], edges: [{src, dst, distance_m,
//! path_loss_db, prop_delay_s, timestamp_s}]}`. `timestamp_s` is the offset within
//! the step.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use super::{Dataset, DatasetHeader, EdgeRecord, GraphError, NodeState, Snapshot};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct HeaderWire<'a> {
    format_version: u32,
    step_seconds: f64,
    n_nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    provenance: Option<&'a str>,
}

#[derive(Serialize)]
struct NodeWire {
    id: usize,
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
}

#[derive(Serialize)]
struct EdgeWire {
    src: usize,
    dst: usize,
    distance_m: f64,
    path_loss_db: f64,
    prop_delay_s: f64,
    timestamp_s: f64,
}

#[derive(Serialize)]
struct SnapshotWire {
    t: usize,
    nodes: Vec<NodeWire>,
    edges: Vec<EdgeWire>,
}

pub fn write_snapshot<W: Write>(w: &mut W, s: &Snapshot) -> Result<(), GraphError> {
    let wire = SnapshotWire {
        t: s.t,
        nodes: s
            .nodes
            .iter()
            .map(|n| NodeWire {
                id: n.id,
                x: n.position[0],
                y: n.position[1],
                vx: n.velocity[0],
                vy: n.velocity[1],
            })
            .collect(),
        edges: s
            .edges
            .iter()
            .map(|e| EdgeWire {
                src: e.src,
                dst: e.dst,
                distance_m: e.distance,
                path_loss_db: e.path_loss,
                prop_delay_s: e.prop_delay,
                timestamp_s: e.timestamp,
            })
            .collect(),
    };
    serde_json::to_writer(&mut *w, &wire).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_dataset<W: Write>(mut w: W, dataset: &Dataset) -> Result<(), GraphError> {
    let h = &dataset.header;
    let header = HeaderWire {
        format_version: h.format_version,
        step_seconds: h.step_seconds,
        n_nodes: h.n_nodes,
        provenance: h.provenance.as_deref(),
    };
    serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    for s in &dataset.snapshots {
        write_snapshot(&mut w, s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<(), GraphError> {
    let f = File::create(path.as_ref())?;
    write_dataset(BufWriter::new(f), dataset)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, GraphError> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| GraphError::Open {
        path: path.display().to_string(),
        source: e,
    })?;
    read_dataset(BufReader::new(f))
}

/// Loader for the published CNTM/CNCM release. Its on-disk layout is undocumented,
/// so this always fails; convert such data to the snapshot stream format first.
pub fn load_published_dataset(path: impl AsRef<Path>) -> Result<Dataset, GraphError> {
    Err(GraphError::Unsupported(format!(
        "{}: the published CNTM/CNCM layout is not supported; convert it to the snapshot stream format",
        path.as_ref().display()
    )))
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
    line: usize,
    prefix: String,
}

impl<'a> Fields<'a> {
    fn new(v: &'a Value, line: usize, prefix: impl Into<String>) -> Result<Self, GraphError> {
        let prefix = prefix.into();
        let obj = v.as_object().ok_or_else(|| GraphError::Parse {
            line,
            field: if prefix.is_empty() { "<record>".into() } else { prefix.clone() },
            message: "expected an object".into(),
        })?;
        Ok(Self { obj, line, prefix })
    }

    fn path(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{}", self.prefix, key)
        }
    }

    fn err(&self, key: &str, message: impl Into<String>) -> GraphError {
        GraphError::Parse {
            line: self.line,
            field: self.path(key),
            message: message.into(),
        }
    }

    fn get(&self, key: &str) -> Result<&'a Value, GraphError> {
        self.obj.get(key).ok_or_else(|| self.err(key, "missing field"))
    }

    fn f64(&self, key: &str) -> Result<f64, GraphError> {
        self.get(key)?.as_f64().ok_or_else(|| self.err(key, "expected a number"))
    }

    fn usize(&self, key: &str) -> Result<usize, GraphError> {
        self.get(key)?
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| self.err(key, "expected a non-negative integer"))
    }

    fn array(&self, key: &str) -> Result<&'a Vec<Value>, GraphError> {
        self.get(key)?.as_array().ok_or_else(|| self.err(key, "expected an array"))
    }
}

fn parse_line(text: &str, line: usize) -> Result<Value, GraphError> {
    serde_json::from_str(text).map_err(|e| GraphError::Parse {
        line,
        field: "<record>".into(),
        message: e.to_string(),
    })
}

fn parse_header(v: &Value, line: usize) -> Result<DatasetHeader, GraphError> {
    let f = Fields::new(v, line, "")?;
    let format_version = f.usize("format_version")? as u32;
    if format_version != FORMAT_VERSION {
        return Err(f.err("format_version", format!("unsupported version {format_version}")));
    }
    let step_seconds = f.f64("step_seconds")?;
    if !(step_seconds > 0.0) {
        return Err(f.err("step_seconds", "must be positive"));
    }
    let provenance = match f.obj.get("provenance") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(f.err("provenance", "expected a string")),
    };
    Ok(DatasetHeader {
        format_version,
        step_seconds,
        n_nodes: f.usize("n_nodes")?,
        provenance,
    })
}

fn parse_snapshot(v: &Value, line: usize, header: &DatasetHeader) -> Result<Snapshot, GraphError> {
    let f = Fields::new(v, line, "")?;
    let t = f.usize("t")?;
    let mut nodes = Vec::new();
    for (k, nv) in f.array("nodes")?.iter().enumerate() {
        let nf = Fields::new(nv, line, format!("nodes[{k}]"))?;
        let id = nf.usize("id")?;
        if id != k {
            return Err(nf.err("id", format!("expected id {k}; ids must be contiguous from 0")));
        }
        nodes.push(NodeState {
            id,
            position: [nf.f64("x")?, nf.f64("y")?],
            velocity: [nf.f64("vx")?, nf.f64("vy")?],
        });
    }
    if nodes.len() != header.n_nodes {
        return Err(f.err(
            "nodes",
            format!("{} nodes, header declares {}", nodes.len(), header.n_nodes),
        ));
    }
    let mut edges = Vec::new();
    for (k, ev) in f.array("edges")?.iter().enumerate() {
        let ef = Fields::new(ev, line, format!("edges[{k}]"))?;
        let src = ef.usize("src")?;
        let dst = ef.usize("dst")?;
        if src >= nodes.len() {
            return Err(ef.err("src", format!("unknown node id {src}")));
        }
        if dst >= nodes.len() {
            return Err(ef.err("dst", format!("unknown node id {dst}")));
        }
        if src == dst {
            return Err(ef.err("dst", "self-loop"));
        }
        let e = EdgeRecord {
            src,
            dst,
            distance: ef.f64("distance_m")?,
            path_loss: ef.f64("path_loss_db")?,
            prop_delay: ef.f64("prop_delay_s")?,
            timestamp: ef.f64("timestamp_s")?,
        };
        if e.distance < 0.0 {
            return Err(ef.err("distance_m", "negative"));
        }
        if e.path_loss < 0.0 {
            return Err(ef.err("path_loss_db", "negative"));
        }
        if e.prop_delay < 0.0 {
            return Err(ef.err("prop_delay_s", "negative"));
        }
        if !(0.0..header.step_seconds).contains(&e.timestamp) {
            return Err(ef.err("timestamp_s", "outside [0, step_seconds)"));
        }
        edges.push(e);
    }
    Ok(Snapshot { t, nodes, edges })
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Dataset, GraphError> {
    let mut header: Option<DatasetHeader> = None;
    let mut snapshots: Vec<Snapshot> = Vec::new();
    for (k, text) in r.lines().enumerate() {
        let line = k + 1;
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let v = parse_line(&text, line)?;
        match &header {
            None => header = Some(parse_header(&v, line)?),
            Some(h) => {
                let s = parse_snapshot(&v, line, h)?;
                if let Some(prev) = snapshots.last() {
                    if s.t != prev.t + 1 {
                        return Err(GraphError::Parse {
                            line,
                            field: "t".into(),
                            message: format!("expected {}, found {}", prev.t + 1, s.t),
                        });
                    }
                }
                snapshots.push(s);
            }
        }
    }
    let header = header.ok_or(GraphError::Parse {
        line: 1,
        field: "<header>".into(),
        message: "missing header record".into(),
    })?;
    Ok(Dataset { header, snapshots })
}
