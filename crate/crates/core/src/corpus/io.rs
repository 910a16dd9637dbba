//! File formats: JSONL corpora and queries ({"id", "text"} per line) and
//! whitespace-separated qrels (`query-id doc-id grade`).

use std::fs;
use std::path::Path;

use crate::corpus::{Qrels, RawDoc, RawQuery};
use crate::error::{Error, Result};

fn parse_jsonl<T: serde::de::DeserializeOwned>(content: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        out.push(parsed);
    }
    Ok(out)
}

pub fn load_corpus(path: &Path) -> Result<Vec<RawDoc>> {
    parse_jsonl(&fs::read_to_string(path)?)
}

pub fn load_queries(path: &Path) -> Result<Vec<RawQuery>> {
    parse_jsonl(&fs::read_to_string(path)?)
}

pub fn load_qrels(path: &Path) -> Result<Qrels> {
    let content = fs::read_to_string(path)?;
    let mut qrels = Qrels::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("expected `query-id doc-id grade`, got {} fields", fields.len()),
            });
        }
        let grade: u32 = fields[2].parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            message: format!("grade {:?} is not a non-negative integer", fields[2]),
        })?;
        qrels.insert(fields[0], fields[1], grade);
    }
    Ok(qrels)
}

pub fn write_corpus(path: &Path, docs: &[RawDoc]) -> Result<()> {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&serde_json::to_string(doc).expect("doc serializes"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_queries(path: &Path, queries: &[RawQuery]) -> Result<()> {
    let mut out = String::new();
    for q in queries {
        out.push_str(&serde_json::to_string(q).expect("query serializes"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes qrels sorted by (query-id, doc-id) so output is reproducible.
pub fn write_qrels(path: &Path, qrels: &Qrels) -> Result<()> {
    let mut rows: Vec<(&str, &str, u32)> = qrels.iter().collect();
    rows.sort();
    let mut out = String::new();
    for (q, d, g) in rows {
        out.push_str(&format!("{q} {d} {g}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let docs = vec![
            RawDoc { id: "d1".into(), text: "alpha beta".into() },
            RawDoc { id: "d2".into(), text: "gamma".into() },
        ];
        write_corpus(&path, &docs).unwrap();
        assert_eq!(load_corpus(&path).unwrap(), docs);
    }

    #[test]
    fn malformed_jsonl_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"id\":\"d1\",\"text\":\"ok\"}\nnot json\n").unwrap();
        match load_corpus(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn qrels_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qrels.txt");
        std::fs::write(&path, "q1 d1 1\nq1 d2 0\n\nq2 d3 2\n").unwrap();
        let qrels = load_qrels(&path).unwrap();
        assert!(qrels.is_relevant("q1", "d1"));
        assert!(!qrels.is_relevant("q1", "d2"));
        assert_eq!(qrels.grade("q2", "d3"), 2);

        let out = dir.path().join("qrels_out.txt");
        write_qrels(&out, &qrels).unwrap();
        assert_eq!(load_qrels(&out).unwrap(), qrels);

        std::fs::write(&path, "q1 d1\n").unwrap();
        match load_qrels(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        std::fs::write(&path, "q1 d1 notanumber\n").unwrap();
        assert!(load_qrels(&path).is_err());
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_corpus(Path::new("/nonexistent/corpus.jsonl")).unwrap_err();
        assert_eq!(err.category(), "io");
    }
}
