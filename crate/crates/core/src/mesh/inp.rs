//! Minimal Abaqus `.inp` reader and writer: `*NODE`, `*ELEMENT` (CPE4 / CPS4)
//! and `*NSET`. Every other keyword block is skipped and reported.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use super::{Mesh, MeshError};

const SUPPORTED_ELEMENTS: [&str; 2] = ["CPE4", "CPS4"];

/// Parsed mesh plus the warnings produced for skipped keywords.
#[derive(Debug, Clone)]
pub struct InpMesh {
    pub mesh: Mesh,
    pub warnings: Vec<String>,
}

enum Block {
    Node,
    Element,
    Nset { name: String, generate: bool },
    Skip,
}

fn keyword_params(line: &str) -> (String, HashMap<String, String>) {
    let mut parts = line[1..].split(',');
    let keyword = parts.next().unwrap_or("").trim().to_ascii_uppercase();
    let params = parts
        .filter_map(|p| {
            let p = p.trim();
            if p.is_empty() {
                return None;
            }
            let (k, v) = p.split_once('=').unwrap_or((p, ""));
            Some((k.trim().to_ascii_uppercase(), v.trim().to_string()))
        })
        .collect();
    (keyword, params)
}

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T, MeshError> {
    s.parse().map_err(|_| MeshError::Parse {
        line,
        message: format!("invalid {what} '{s}'"),
    })
}

/// Parses the supported subset of an Abaqus input deck. Node labels are
/// mapped to contiguous indices in order of appearance.
pub fn parse_abaqus_inp(text: &str) -> Result<InpMesh, MeshError> {
    let mut nodes = Vec::new();
    let mut labels: HashMap<i64, usize> = HashMap::new();
    // Element connectivity is kept as labels until all nodes are known.
    let mut raw_elements: Vec<(usize, [i64; 4])> = Vec::new();
    let mut raw_sets: BTreeMap<String, Vec<(usize, i64)>> = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut block = Block::Skip;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with("**") {
            continue;
        }
        if line.starts_with('*') {
            let (keyword, params) = keyword_params(line);
            block = match keyword.as_str() {
                "NODE" => Block::Node,
                "ELEMENT" => {
                    let ty = params.get("TYPE").map(|t| t.to_ascii_uppercase()).unwrap_or_default();
                    if !SUPPORTED_ELEMENTS.contains(&ty.as_str()) {
                        return Err(MeshError::Structural(format!(
                            "unsupported element type '{ty}' at line {line_no}"
                        )));
                    }
                    Block::Element
                }
                "NSET" => {
                    let name = params.get("NSET").cloned().ok_or_else(|| MeshError::Parse {
                        line: line_no,
                        message: "*NSET without NSET= name".into(),
                    })?;
                    Block::Nset { name, generate: params.contains_key("GENERATE") }
                }
                other => {
                    warnings.push(format!("line {line_no}: skipped keyword *{other}"));
                    Block::Skip
                }
            };
            continue;
        }
        match &block {
            Block::Node => {
                let f: Vec<&str> = fields(line).collect();
                if f.len() < 3 {
                    return Err(MeshError::Parse {
                        line: line_no,
                        message: "node line needs a label and two coordinates".into(),
                    });
                }
                let label: i64 = parse_num(f[0], line_no, "node label")?;
                let x: f64 = parse_num(f[1], line_no, "coordinate")?;
                let y: f64 = parse_num(f[2], line_no, "coordinate")?;
                if labels.insert(label, nodes.len()).is_some() {
                    return Err(MeshError::Parse {
                        line: line_no,
                        message: format!("duplicate node label {label}"),
                    });
                }
                nodes.push([x, y]);
            }
            Block::Element => {
                let f: Vec<&str> = fields(line).collect();
                if f.len() != 5 {
                    return Err(MeshError::Parse {
                        line: line_no,
                        message: format!("expected a label and 4 nodes, found {} fields", f.len()),
                    });
                }
                let _label: i64 = parse_num(f[0], line_no, "element label")?;
                let mut conn = [0i64; 4];
                for a in 0..4 {
                    conn[a] = parse_num(f[a + 1], line_no, "node label")?;
                }
                raw_elements.push((line_no, conn));
            }
            Block::Nset { name, generate } => {
                let entry = raw_sets.entry(name.clone()).or_default();
                let values: Vec<i64> = fields(line)
                    .map(|s| parse_num(s, line_no, "node label"))
                    .collect::<Result<_, _>>()?;
                if *generate {
                    let (start, end, step) = match values.as_slice() {
                        [a, b] => (*a, *b, 1),
                        [a, b, c] if *c > 0 => (*a, *b, *c),
                        _ => {
                            return Err(MeshError::Parse {
                                line: line_no,
                                message: "GENERATE expects start, end[, step]".into(),
                            })
                        }
                    };
                    let mut v = start;
                    while v <= end {
                        entry.push((line_no, v));
                        v += step;
                    }
                } else {
                    entry.extend(values.into_iter().map(|v| (line_no, v)));
                }
            }
            Block::Skip => {}
        }
    }

    let resolve = |label: i64, line: usize| {
        labels.get(&label).copied().ok_or_else(|| {
            MeshError::Structural(format!("line {line}: reference to missing node {label}"))
        })
    };
    let mut elements = Vec::with_capacity(raw_elements.len());
    for (line, conn) in raw_elements {
        let mut e = [0usize; 4];
        for a in 0..4 {
            e[a] = resolve(conn[a], line)?;
        }
        elements.push(e);
    }
    let mut boundary_sets = BTreeMap::new();
    for (name, entries) in raw_sets {
        let mut ids = Vec::with_capacity(entries.len());
        for (line, label) in entries {
            ids.push(resolve(label, line)?);
        }
        boundary_sets.insert(name, ids);
    }
    let mesh = Mesh { nodes, elements, boundary_sets, thickness: 1.0 };
    mesh.validate()?;
    Ok(InpMesh { mesh, warnings })
}

/// Writes a mesh in the subset understood by [`parse_abaqus_inp`].
/// Labels are one-based indices.
pub fn write_abaqus_inp(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str("*HEADING\nphasefrac mesh export\n*NODE\n");
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(out, "{}, {:.17e}, {:.17e}", i + 1, p[0], p[1]);
    }
    out.push_str("*ELEMENT, TYPE=CPE4\n");
    for (e, c) in mesh.elements.iter().enumerate() {
        let _ = writeln!(out, "{}, {}, {}, {}, {}", e + 1, c[0] + 1, c[1] + 1, c[2] + 1, c[3] + 1);
    }
    for (name, ids) in &mesh.boundary_sets {
        let _ = writeln!(out, "*NSET, NSET={name}");
        for chunk in ids.chunks(16) {
            let line: Vec<String> = chunk.iter().map(|i| (i + 1).to_string()).collect();
            let _ = writeln!(out, "{}", line.join(", "));
        }
    }
    out
}
