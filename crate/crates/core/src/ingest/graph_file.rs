//! Line-delimited graph records, plain edge lists and `id,label` CSV files.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::smiles::{parse_smiles, SmilesError};
use crate::graph::{Graph, GraphError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("semantic error at line {line}: {message}")]
    Semantic { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct NodeEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// One line of a graph file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GraphRecord {
    pub id: String,
    /// When absent, the topology is taken from `smiles`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<NodeEntry>>,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smiles: Option<String>,
}

impl GraphRecord {
    pub fn from_graph(g: &Graph) -> Self {
        Self {
            id: g.id().to_string(),
            nodes: Some(
                g.nodes()
                    .iter()
                    .filter(|n| !n.is_global)
                    .map(|n| NodeEntry {
                        text: n.text.clone(),
                    })
                    .collect(),
            ),
            edges: g.edges().iter().map(|&(a, b)| [a, b]).collect(),
            label: g.label(),
            smiles: g.graph_text().map(str::to_string),
        }
    }

    pub fn into_graph(self, line: usize) -> Result<Graph, IngestError> {
        let semantic = |message: String| IngestError::Semantic { line, message };
        let graph_error = |e: GraphError| semantic(e.to_string());
        let graph = match self.nodes {
            Some(nodes) => Graph::new(
                self.id,
                nodes.into_iter().map(|n| n.text).collect(),
                self.edges.iter().map(|e| (e[0], e[1])),
            )
            .map_err(graph_error)?,
            None => {
                let smiles = self
                    .smiles
                    .as_deref()
                    .ok_or_else(|| semantic("record has neither `nodes` nor `smiles`".into()))?;
                if !self.edges.is_empty() {
                    return Err(semantic("`edges` given without `nodes`".into()));
                }
                let mol = parse_smiles(smiles)
                    .map_err(|e: SmilesError| semantic(format!("bad SMILES: {e}")))?;
                super::smiles::to_graph(&mol, self.id).map_err(graph_error)?
            }
        };
        Ok(graph.with_label(self.label).with_graph_text(self.smiles))
    }
}

/// Parses a graph file: one JSON record per non-blank line.
pub fn parse_graph_file(bytes: &[u8]) -> Result<Vec<Graph>, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let before = &bytes[..e.valid_up_to()];
        let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
        let column = before.len()
            - before
                .iter()
                .rposition(|&b| b == b'\n')
                .map_or(0, |p| p + 1)
            + 1;
        IngestError::Syntax {
            line,
            column,
            message: "invalid UTF-8".into(),
        }
    })?;
    let mut graphs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: GraphRecord = serde_json::from_str(raw).map_err(|e| IngestError::Syntax {
            line,
            column: e.column(),
            message: e.to_string(),
        })?;
        graphs.push(record.into_graph(line)?);
    }
    Ok(graphs)
}

pub fn read_graph_file(path: &std::path::Path) -> Result<Vec<Graph>, IngestError> {
    parse_graph_file(&std::fs::read(path)?)
}

pub fn write_graph_file<W: Write>(mut out: W, graphs: &[Graph]) -> std::io::Result<()> {
    for g in graphs {
        serde_json::to_writer(&mut out, &GraphRecord::from_graph(g))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads `n=<count>` followed by one `i j` pair per line.
pub fn parse_edge_list(id: &str, text: &str) -> Result<Graph, IngestError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or(IngestError::Syntax {
        line: 1,
        column: 1,
        message: "missing `n=<count>` header".into(),
    })?;
    let n: usize = header
        .trim()
        .strip_prefix("n=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or(IngestError::Syntax {
            line: hline + 1,
            column: 1,
            message: format!("expected `n=<count>`, found {header:?}"),
        })?;
    let mut edges = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let mut parts = raw.split_whitespace();
        let mut field = |column: usize| -> Result<usize, IngestError> {
            let tok = parts.next().ok_or(IngestError::Syntax {
                line,
                column,
                message: "expected two node indices".into(),
            })?;
            tok.parse().map_err(|_| IngestError::Syntax {
                line,
                column: raw.find(tok).map_or(column, |p| p + 1),
                message: format!("not a node index: {tok:?}"),
            })
        };
        let a = field(1)?;
        let b = field(raw.len())?;
        if parts.next().is_some() {
            return Err(IngestError::Syntax {
                line,
                column: 1,
                message: "trailing fields".into(),
            });
        }
        edges.push((a, b));
    }
    Graph::from_edges(id, n, edges).map_err(|e| IngestError::Semantic {
        line: hline + 1,
        message: e.to_string(),
    })
}

/// Reads an `id,label` CSV file (header required).
pub fn read_label_csv<R: BufRead>(reader: R) -> Result<HashMap<String, i64>, IngestError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut labels = HashMap::new();
    for (idx, row) in rdr.records().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| IngestError::Syntax {
            line,
            column: 1,
            message: e.to_string(),
        })?;
        let (id, label) = match (row.get(0), row.get(1)) {
            (Some(id), Some(label)) => (id, label),
            _ => {
                return Err(IngestError::Syntax {
                    line,
                    column: 1,
                    message: "expected `id,label`".into(),
                })
            }
        };
        let label = label.trim().parse().map_err(|_| IngestError::Semantic {
            line,
            message: format!("label {label:?} is not an integer"),
        })?;
        labels.insert(id.trim().to_string(), label);
    }
    Ok(labels)
}

/// Overrides graph labels with the ones found in `labels`.
pub fn join_labels(graphs: Vec<Graph>, labels: &HashMap<String, i64>) -> Vec<Graph> {
    graphs
        .into_iter()
        .map(|g| match labels.get(g.id()) {
            Some(&l) => g.with_label(Some(l)),
            None => g,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_record() {
        let gs =
            parse_graph_file(br#"{"id":"g","nodes":[{"text":"a"},{"text":"b"}],"edges":[[0,1]]}"#)
                .unwrap();
        assert_eq!(gs.len(), 1);
        assert_eq!((gs[0].node_count(), gs[0].edge_count()), (2, 1));
        assert_eq!(gs[0].nodes()[1].text.as_deref(), Some("b"));
    }

    #[test]
    fn out_of_range_edge_is_semantic() {
        let err =
            parse_graph_file(b"\n{\"id\":\"g\",\"nodes\":[{},{}],\"edges\":[[0,5]]}").unwrap_err();
        assert!(
            matches!(err, IngestError::Semantic { line: 2, .. }),
            "{err}"
        );
    }

    #[test]
    fn empty_nodes_is_semantic() {
        let err = parse_graph_file(br#"{"id":"g","nodes":[],"edges":[]}"#).unwrap_err();
        assert!(matches!(err, IngestError::Semantic { line: 1, .. }));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_graph_file(b"{\"id\":\"a\",\"nodes\":[{}]}\n{\"id\": oops}").unwrap_err();
        match err {
            IngestError::Syntax { line, column, .. } => assert_eq!((line, column), (2, 8)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn smiles_only_record_and_label() {
        let gs = parse_graph_file(br#"{"id":"m","smiles":"C1CC1","label":1}"#).unwrap();
        assert_eq!(gs[0].edge_count(), 3);
        assert_eq!(gs[0].label(), Some(1));
        assert_eq!(gs[0].graph_text(), Some("C1CC1"));
    }

    #[test]
    fn write_then_read() {
        let g = Graph::new("x", vec![Some("a".into()), None, None], [(0, 1), (1, 2)])
            .unwrap()
            .with_label(Some(0))
            .with_graph_text(Some("CCC".into()));
        let mut buf = Vec::new();
        write_graph_file(&mut buf, std::slice::from_ref(&g)).unwrap();
        assert_eq!(parse_graph_file(&buf).unwrap(), vec![g]);
    }

    #[test]
    fn edge_list() {
        let g = parse_edge_list("e", "n=4\n0 1\n1 2\n\n2 3\n").unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2), (2, 3)]);
        assert!(matches!(
            parse_edge_list("e", "4\n0 1"),
            Err(IngestError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_edge_list("e", "n=2\n0 x"),
            Err(IngestError::Syntax {
                line: 2,
                column: 3,
                ..
            })
        ));
        assert!(matches!(
            parse_edge_list("e", "n=2\n0 3"),
            Err(IngestError::Semantic { .. })
        ));
    }

    #[test]
    fn label_csv_join() {
        let labels = read_label_csv("id,label\na,1\nb,0\n".as_bytes()).unwrap();
        let gs = vec![
            Graph::from_edges("a", 1, []).unwrap(),
            Graph::from_edges("c", 1, []).unwrap(),
        ];
        let joined = join_labels(gs, &labels);
        assert_eq!(joined[0].label(), Some(1));
        assert_eq!(joined[1].label(), None);
        assert!(read_label_csv("id,label\na,yes\n".as_bytes()).is_err());
    }
}
