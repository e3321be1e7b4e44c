use std::collections::HashSet;

use serde::Serialize;

use super::AnnotatedSentence;
use crate::prompt::{READER_TOKEN, SEP_TOKEN};

/// Readers per sentence expected of a fully annotated record.
pub const DEFAULT_MIN_READERS: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub id: String,
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks schema invariants of a parsed record. Too few readers is a
/// warning; everything else is an error.
pub fn validate_record(rec: &AnnotatedSentence, min_readers: usize) -> ValidationReport {
    let mut report = ValidationReport { id: rec.id.clone(), ..Default::default() };
    let errors = &mut report.errors;

    if rec.id.trim().is_empty() {
        errors.push("empty record id".into());
    }
    if rec.title.trim().is_empty() {
        errors.push("empty title".into());
    }
    if rec.sentence.trim().is_empty() {
        errors.push("empty sentence".into());
    }

    let mut seen = HashSet::new();
    for entity in &rec.entities {
        if entity.trim().is_empty() {
            errors.push("empty entity mention".into());
        } else if !seen.insert(entity.as_str()) {
            errors.push(format!("duplicate entity {entity:?}"));
        }
    }

    if rec.readers.is_empty() {
        errors.push("record has no readers".into());
    } else if rec.readers.len() < min_readers {
        report
            .warnings
            .push(format!("only {} readers (expected at least {min_readers})", rec.readers.len()));
    }

    for (j, reader) in rec.readers.iter().enumerate() {
        let ctx = &reader.context;
        if !ctx.attitude.is_valid() {
            errors.push(format!("reader {j}: attitude out of range ({})", ctx.attitude.value()));
        }
        if reader.interpretation.trim().is_empty() {
            errors.push(format!("reader {j}: empty interpretation"));
        }
        for token in [SEP_TOKEN, READER_TOKEN] {
            if reader.interpretation.contains(token) {
                errors.push(format!("reader {j}: interpretation contains reserved token {token}"));
            }
        }
        if ctx.judgments.len() != rec.entities.len() {
            errors.push(format!(
                "reader {j}: {} judgments for {} entities",
                ctx.judgments.len(),
                rec.entities.len()
            ));
        }
        for (q, m) in ctx.judgments.iter().enumerate() {
            match rec.entities.get(q) {
                Some(expected) if *expected == m.entity => {}
                Some(expected) => errors.push(format!(
                    "reader {j}: judgment {q} is for {:?}, expected {expected:?} (entity order)",
                    m.entity
                )),
                None => {}
            }
            if m.present && m.trait_desc.trim().is_empty() {
                errors.push(format!("reader {j}: present judgment of {:?} has empty trait", m.entity));
            }
            if !m.present
                && (!m.trait_desc.is_empty()
                    || m.evaluation.is_some()
                    || m.soa.is_some()
                    || m.appropriateness.is_some())
            {
                errors.push(format!("reader {j}: absent judgment of {:?} carries trait fields", m.entity));
            }
        }
    }
    report
}
