use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use serde_json::Value;

use super::{CorpusError, FieldMap, RelationRecord, TaskId};

/// Input encodings accepted by [`parse_relations`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationFormat {
    /// Comma-separated table, header row first, double-quote escaping.
    /// Columns `task` (or `task_id`) and `item`; every other column is a
    /// query field. Empty cells are treated as absent fields.
    DelimitedTable,
    /// One object per line: `{"task_id": str, "query_fields": {..}, "item": str}`.
    JsonLines,
}

impl FromStr for RelationFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" | "delimited" | "delimited-table" => Ok(RelationFormat::DelimitedTable),
            "jsonl" | "json-lines" | "jsonlines" => Ok(RelationFormat::JsonLines),
            other => Err(CorpusError::Validation(format!("unknown relation format '{other}'"))),
        }
    }
}

pub fn parse_relations<R: Read>(
    input: R,
    format: RelationFormat,
) -> Result<Vec<RelationRecord>, CorpusError> {
    match format {
        RelationFormat::DelimitedTable => parse_table(input),
        RelationFormat::JsonLines => parse_json_lines(input),
    }
}

fn csv_error(err: csv::Error) -> CorpusError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => CorpusError::Io(e),
        csv::ErrorKind::Utf8 { err, .. } => CorpusError::Parse {
            line,
            message: format!("invalid UTF-8: {err}"),
        },
        other => CorpusError::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

fn parse_table<R: Read>(input: R) -> Result<Vec<RelationRecord>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let task_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("task") || h.eq_ignore_ascii_case("task_id"))
        .ok_or_else(|| CorpusError::Parse {
            line: 1,
            message: "header has no task column".into(),
        })?;
    let item_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("item"))
        .ok_or_else(|| CorpusError::Parse {
            line: 1,
            message: "header has no item column".into(),
        })?;

    let mut records = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let rec = result.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(row as u64 + 2);
        let task_id = TaskId::from_str(&rec[task_col])?;
        let item = rec[item_col].trim();
        if item.is_empty() {
            return Err(CorpusError::Validation(format!(
                "row {} (line {line}): empty item",
                row + 1
            )));
        }
        let query_fields: FieldMap = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != task_col && *i != item_col)
            .filter_map(|(i, h)| {
                let v = rec[i].trim();
                (!v.is_empty()).then(|| (h.clone(), v.to_string()))
            })
            .collect();
        if query_fields.is_empty() {
            return Err(CorpusError::Validation(format!(
                "row {} (line {line}): no query fields",
                row + 1
            )));
        }
        records.push(RelationRecord {
            task_id,
            query_fields,
            item: item.to_string(),
        });
    }
    Ok(records)
}

fn parse_json_lines<R: Read>(input: R) -> Result<Vec<RelationRecord>, CorpusError> {
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => CorpusError::Parse {
                line: line_no,
                message: "invalid UTF-8".into(),
            },
            _ => CorpusError::Io(e),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| CorpusError::Parse {
            line: line_no,
            message,
        };
        let value: Value = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let task = value
            .get("task_id")
            .and_then(Value::as_str)
            .ok_or_else(|| parse_err("missing string key task_id".into()))?;
        let task_id = TaskId::from_str(task)?;
        let item = value
            .get("item")
            .and_then(Value::as_str)
            .ok_or_else(|| parse_err("missing string key item".into()))?
            .trim();
        if item.is_empty() {
            return Err(CorpusError::Validation(format!(
                "row {line_no} (line {line_no}): empty item"
            )));
        }
        let fields = value
            .get("query_fields")
            .and_then(Value::as_object)
            .ok_or_else(|| parse_err("missing object key query_fields".into()))?;
        let mut query_fields = FieldMap::new();
        for (k, v) in fields {
            let v = v
                .as_str()
                .ok_or_else(|| parse_err(format!("query field '{k}' is not a string")))?
                .trim();
            if !v.is_empty() {
                query_fields.insert(k.trim(), v);
            }
        }
        if query_fields.is_empty() {
            return Err(CorpusError::Validation(format!(
                "row {line_no} (line {line_no}): no query fields"
            )));
        }
        records.push(RelationRecord {
            task_id,
            query_fields,
            item: item.to_string(),
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(text: &str) -> Result<Vec<RelationRecord>, CorpusError> {
        parse_relations(text.as_bytes(), RelationFormat::DelimitedTable)
    }

    #[test]
    fn maps_header_columns_to_fields() {
        let recs = csv("task,Asset,Category,item\nA2S,transformer,rotating,vibration\n").unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].task_id, TaskId::A2S);
        assert_eq!(recs[0].query_fields.get("Asset"), Some("transformer"));
        assert_eq!(recs[0].query_fields.get("Category"), Some("rotating"));
        assert_eq!(recs[0].item, "vibration");
        let order: Vec<_> = recs[0].query_fields.iter().map(|(k, _)| k).collect();
        assert_eq!(order, ["Asset", "Category"]);
    }

    #[test]
    fn unknown_task_is_a_validation_error() {
        let err = csv("task,Asset,item\nX2Y,pump,flow\n").unwrap_err();
        match err {
            CorpusError::Validation(msg) => assert!(msg.contains("unknown task"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_item_reports_row() {
        let err = csv("task,Asset,item\nA2S,pump,flow\nA2S,fan,  \n").unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn ragged_row_is_a_parse_error_with_line() {
        let err = csv("task,Asset,item\nA2S,pump\n").unwrap_err();
        match err {
            CorpusError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quoted_cells_and_trimming() {
        let recs = csv("task,Component,item\nC2FM,\" gate valves, subsea \",\"Fail to close on demand (FTC)\"\n").unwrap();
        assert_eq!(recs[0].query_fields.get("Component"), Some("gate valves, subsea"));
        assert_eq!(recs[0].item, "Fail to close on demand (FTC)");
    }

    #[test]
    fn figure_two_graph_has_seven_edges() {
        let text = "task,Asset,item\n\
            A2S,Transformer,Vibration\nA2S,Transformer,Temperature\nA2S,Transformer,Resistance\n\
            A2S,Pump,Vibration\nA2S,Pump,Temperature\n\
            A2S,Fan,Vibration\nA2S,Fan,Temperature\n";
        assert_eq!(csv(text).unwrap().len(), 7);
    }

    #[test]
    fn json_lines_round() {
        let text = r#"{"task_id": "FM2S", "query_fields": {"Asset": "electric motor", "Category": "electric", "Fault": "stator windings fault"}, "item": "current"}
{"task_id": "FM2S", "query_fields": {"Asset": "electric motor", "Category": "electric", "Fault": "stator windings fault"}, "item": " axial flux "}
"#;
        let recs = parse_relations(text.as_bytes(), RelationFormat::JsonLines).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].item, "axial flux");
        let order: Vec<_> = recs[0].query_fields.iter().map(|(k, _)| k).collect();
        assert_eq!(order, ["Asset", "Category", "Fault"]);
    }

    #[test]
    fn json_lines_errors_carry_line() {
        let text = "{\"task_id\": \"A2S\", \"query_fields\": {\"Asset\": \"pump\"}, \"item\": \"flow\"}\n{not json}\n";
        match parse_relations(text.as_bytes(), RelationFormat::JsonLines).unwrap_err() {
            CorpusError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
