use std::collections::HashSet;
use std::io::BufRead;

use serde_json::Value;

use super::{AnnotatedSentence, DataError};

const RECORD_KEYS: &[&str] = &["id", "title", "sentence", "entities", "readers"];
const READER_KEYS: &[&str] = &["attitude", "interpretation", "judgments"];
const JUDGMENT_KEYS: &[&str] = &["entity", "present", "trait", "evaluation", "soa", "appropriateness"];

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Reject keys outside the dataset schema instead of ignoring them.
    pub strict: bool,
}

/// Every record that parsed, with its 1-based line, plus every line-level
/// problem encountered.
#[derive(Debug, Default)]
pub struct DatasetParse {
    pub records: Vec<(usize, AnnotatedSentence)>,
    pub errors: Vec<DataError>,
}

impl DatasetParse {
    pub fn into_records(self) -> Vec<AnnotatedSentence> {
        self.records.into_iter().map(|(_, r)| r).collect()
    }
}

/// Parses a line-delimited dataset, failing on the first problem.
pub fn parse_dataset<R: BufRead>(reader: R, options: ParseOptions) -> Result<Vec<AnnotatedSentence>, DataError> {
    let mut parsed = read_dataset(reader, options)?;
    if !parsed.errors.is_empty() {
        return Err(parsed.errors.swap_remove(0));
    }
    Ok(parsed.into_records())
}

/// Parses a line-delimited dataset, collecting per-line problems instead
/// of stopping. Only I/O failures abort.
pub fn read_dataset<R: BufRead>(reader: R, options: ParseOptions) -> Result<DatasetParse, DataError> {
    let mut out = DatasetParse::default();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line, line_no, options) {
            Ok(record) => {
                if !seen.insert(record.id.clone()) {
                    out.errors.push(DataError::DuplicateId { line: line_no, id: record.id });
                    continue;
                }
                out.records.push((line_no, record));
            }
            Err(e) => out.errors.push(e),
        }
    }
    Ok(out)
}

fn parse_line(line: &str, line_no: usize, options: ParseOptions) -> Result<AnnotatedSentence, DataError> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| DataError::Malformed { line: line_no, message: e.to_string() })?;
    if options.strict {
        check_keys(&value, line_no)?;
    }
    let record: AnnotatedSentence =
        serde_json::from_value(value).map_err(|e| DataError::Malformed { line: line_no, message: e.to_string() })?;
    for reader in &record.readers {
        for judgment in &reader.context.judgments {
            if !record.entities.contains(&judgment.entity) {
                return Err(DataError::UnknownEntity {
                    line: line_no,
                    id: record.id.clone(),
                    entity: judgment.entity.clone(),
                });
            }
        }
    }
    Ok(record)
}

fn check_keys(value: &Value, line: usize) -> Result<(), DataError> {
    check_object(value, RECORD_KEYS, line)?;
    let readers = value.get("readers").and_then(Value::as_array).into_iter().flatten();
    for reader in readers {
        check_object(reader, READER_KEYS, line)?;
        let judgments = reader.get("judgments").and_then(Value::as_array).into_iter().flatten();
        for judgment in judgments {
            check_object(judgment, JUDGMENT_KEYS, line)?;
        }
    }
    Ok(())
}

fn check_object(value: &Value, allowed: &[&str], line: usize) -> Result<(), DataError> {
    if let Some(map) = value.as_object() {
        if let Some(key) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(DataError::UnknownKey { line, key: key.clone() });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Appropriateness, Evaluation, SphereOfAction};

    const ONE: &str = r#"{"id":"s1","title":"T","sentence":"She said so.","entities":["she"],"readers":[{"attitude":3,"interpretation":"She means it.","judgments":[{"entity":"she","present":false}]}]}"#;

    #[test]
    fn empty_stream_is_empty_list() {
        let parsed = parse_dataset("".as_bytes(), ParseOptions::default()).unwrap();
        assert!(parsed.is_empty());
    }

    #[test]
    fn single_unjudged_record() {
        let parsed = parse_dataset(ONE.as_bytes(), ParseOptions::default()).unwrap();
        assert_eq!(parsed.len(), 1);
        let ctx = &parsed[0].readers[0].context;
        assert_eq!(ctx.entity_count(), 1);
        assert_eq!(ctx.judged_count(), 0);
    }

    #[test]
    fn unknown_judgment_entity_is_named() {
        let line = r#"{"id":"s2","title":"T","sentence":"The ANC lost.","entities":["ANC"],"readers":[{"attitude":2,"interpretation":"x","judgments":[{"entity":"the ANC","present":false}]}]}"#;
        let err = parse_dataset(line.as_bytes(), ParseOptions::default()).unwrap_err();
        assert!(matches!(err, DataError::UnknownEntity { ref entity, line: 1, .. } if entity == "the ANC"));
        assert!(err.to_string().contains("the ANC"));
    }

    #[test]
    fn malformed_line_reports_location() {
        let input = format!("{ONE}\n\n{{not json\n");
        let err = parse_dataset(input.as_bytes(), ParseOptions::default()).unwrap_err();
        assert_eq!(err.line(), Some(3));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let input = format!("{ONE}\n{ONE}\n");
        let err = parse_dataset(input.as_bytes(), ParseOptions::default()).unwrap_err();
        assert!(matches!(err, DataError::DuplicateId { line: 2, .. }));
    }

    #[test]
    fn unknown_keys_strict_only() {
        let line = ONE.replacen("\"title\"", "\"extra\":1,\"title\"", 1);
        assert!(parse_dataset(line.as_bytes(), ParseOptions { strict: false }).is_ok());
        let err = parse_dataset(line.as_bytes(), ParseOptions { strict: true }).unwrap_err();
        assert!(matches!(err, DataError::UnknownKey { ref key, .. } if key == "extra"));

        let nested = ONE.replacen("\"present\":false", "\"present\":false,\"why\":\"\"", 1);
        assert!(parse_dataset(nested.as_bytes(), ParseOptions { strict: true }).is_err());
    }

    #[test]
    fn full_judgment_fields() {
        let line = r#"{"id":"s3","title":"T","sentence":"She kept it.","entities":["she"],"readers":[{"attitude":1,"interpretation":"Greedy.","judgments":[{"entity":"she","present":true,"trait":"greedy","evaluation":"bad","soa":"giving & taking: small money","appropriateness":"vice of excess"}]}]}"#;
        let parsed = parse_dataset(line.as_bytes(), ParseOptions { strict: true }).unwrap();
        let m = &parsed[0].readers[0].context.judgments[0];
        assert_eq!(m.evaluation, Some(Evaluation::Bad));
        assert_eq!(m.soa, Some(SphereOfAction::SmallMoney));
        assert_eq!(m.appropriateness, Some(Appropriateness::ViceOfExcess));
    }

    #[test]
    fn read_collects_all_problems() {
        let input = format!("{ONE}\nnope\n{ONE}\n");
        let parsed = read_dataset(input.as_bytes(), ParseOptions::default()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.errors.len(), 2);
    }
}
