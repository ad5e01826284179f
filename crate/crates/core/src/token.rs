//! `<SOG_k>` surface forms and token table files.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StructuralToken(pub usize);

impl StructuralToken {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for StructuralToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<SOG_{}>", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TokenError {
    #[error("not a structural token: {0:?}")]
    Malformed(String),
    #[error("token table line {line}: {message}")]
    Table { line: usize, message: String },
}

impl FromStr for StructuralToken {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix("<SOG_")
            .and_then(|rest| rest.strip_suffix('>'))
            .filter(|digits| !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|digits| digits.parse().ok())
            .map(StructuralToken)
            .ok_or_else(|| TokenError::Malformed(s.to_string()))
    }
}

/// Tokens for one graph. `node_tokens` follow the graph's node order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenAssignment {
    pub graph_id: String,
    pub graph_token: StructuralToken,
    pub node_tokens: Vec<StructuralToken>,
}

pub const TOKEN_TABLE_HEADER: &str = "id\tgraph_token\tnode_tokens";
pub const NODE_TOKEN_TABLE_HEADER: &str = "id\tnode\tnode_token";

/// Writes the graph token table sorted by id.
pub fn write_token_table<W: Write>(assignments: &[TokenAssignment], mut out: W) -> io::Result<()> {
    let mut sorted: Vec<&TokenAssignment> = assignments.iter().collect();
    sorted.sort_by(|a, b| a.graph_id.cmp(&b.graph_id));
    writeln!(out, "{TOKEN_TABLE_HEADER}")?;
    for a in sorted {
        let nodes: Vec<String> = a.node_tokens.iter().map(|t| t.0.to_string()).collect();
        writeln!(
            out,
            "{}\t{}\t{}",
            a.graph_id,
            a.graph_token,
            nodes.join(",")
        )?;
    }
    Ok(())
}

pub fn read_token_table<R: BufRead>(input: R) -> Result<Vec<TokenAssignment>, TokenError> {
    let mut rows = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| TokenError::Table {
            line: line_no,
            message: e.to_string(),
        })?;
        if idx == 0 {
            if line != TOKEN_TABLE_HEADER {
                return Err(TokenError::Table {
                    line: 1,
                    message: format!("expected header {TOKEN_TABLE_HEADER:?}"),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| TokenError::Table {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", fields.len())));
        }
        let graph_token = fields[1]
            .parse()
            .map_err(|e: TokenError| bad(e.to_string()))?;
        let node_tokens = if fields[2].is_empty() {
            Vec::new()
        } else {
            fields[2]
                .split(',')
                .map(|s| s.parse::<usize>().map(StructuralToken))
                .collect::<Result<_, _>>()
                .map_err(|e| bad(e.to_string()))?
        };
        rows.push(TokenAssignment {
            graph_id: fields[0].to_string(),
            graph_token,
            node_tokens,
        });
    }
    Ok(rows)
}

/// One node-level token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeTokenRecord {
    pub graph_id: String,
    pub node: usize,
    pub token: StructuralToken,
}

pub fn write_node_token_table<W: Write>(records: &[NodeTokenRecord], mut out: W) -> io::Result<()> {
    let mut sorted: Vec<&NodeTokenRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.graph_id.cmp(&b.graph_id).then(a.node.cmp(&b.node)));
    writeln!(out, "{NODE_TOKEN_TABLE_HEADER}")?;
    for r in sorted {
        writeln!(out, "{}\t{}\t{}", r.graph_id, r.node, r.token)?;
    }
    Ok(())
}

pub fn read_node_token_table<R: BufRead>(input: R) -> Result<Vec<NodeTokenRecord>, TokenError> {
    let mut rows = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let bad = |message: String| TokenError::Table {
            line: line_no,
            message,
        };
        let line = line.map_err(|e| bad(e.to_string()))?;
        if idx == 0 {
            if line != NODE_TOKEN_TABLE_HEADER {
                return Err(bad(format!("expected header {NODE_TOKEN_TABLE_HEADER:?}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", fields.len())));
        }
        rows.push(NodeTokenRecord {
            graph_id: fields[0].to_string(),
            node: fields[1]
                .parse()
                .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            token: fields[2]
                .parse()
                .map_err(|e: TokenError| bad(e.to_string()))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surface_form_round_trips() {
        for i in [0, 7, 157, 511] {
            let t = StructuralToken(i);
            assert_eq!(t.to_string().parse::<StructuralToken>().unwrap(), t);
        }
        assert_eq!(StructuralToken(157).to_string(), "<SOG_157>");
        for bad in [
            "<SOG_>", "SOG_1", "<SOG_1", "<SOG_-1>", "<SOG_1a>", "<sog_1>",
        ] {
            assert!(bad.parse::<StructuralToken>().is_err(), "{bad}");
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let mut buf = Vec::new();
        write_token_table(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "id\tgraph_token\tnode_tokens\n"
        );
    }

    #[test]
    fn table_sorted_and_round_trips() {
        let rows = vec![
            TokenAssignment {
                graph_id: "mol_b".into(),
                graph_token: StructuralToken(157),
                node_tokens: vec![StructuralToken(3), StructuralToken(3), StructuralToken(9)],
            },
            TokenAssignment {
                graph_id: "mol_a".into(),
                graph_token: StructuralToken(2),
                node_tokens: vec![],
            },
        ];
        let mut buf = Vec::new();
        write_token_table(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "id\tgraph_token\tnode_tokens\nmol_a\t<SOG_2>\t\nmol_b\t<SOG_157>\t3,3,9\n"
        );
        let back = read_token_table(&buf[..]).unwrap();
        assert_eq!(back[1], rows[0]);
        let mut again = Vec::new();
        write_token_table(&back, &mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn node_table_round_trips() {
        let recs = vec![
            NodeTokenRecord {
                graph_id: "b".into(),
                node: 2,
                token: StructuralToken(5),
            },
            NodeTokenRecord {
                graph_id: "a".into(),
                node: 0,
                token: StructuralToken(1),
            },
        ];
        let mut buf = Vec::new();
        write_node_token_table(&recs, &mut buf).unwrap();
        let back = read_node_token_table(&buf[..]).unwrap();
        assert_eq!(back, vec![recs[1].clone(), recs[0].clone()]);
        assert!(read_node_token_table(&b"id\tnode\tnode_token\na\tx\t<SOG_1>\n"[..]).is_err());
    }
}
