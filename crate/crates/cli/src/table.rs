//! Tab-separated PSM tables.
//!
//! The header must begin `spectrum_id  peptide  score  label`, optionally
//! followed by `truth`. Further columns are carried along untouched.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

use tdcfdr_core::{Identification, Origin, Truth};

pub const REQUIRED_COLUMNS: [&str; 4] = ["spectrum_id", "peptide", "score", "label"];

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct TableError {
    pub line: usize,
    pub message: String,
}

fn at(line: usize, message: impl Into<String>) -> TableError {
    TableError {
        line,
        message: message.into(),
    }
}

/// How peptide keys are derived from the `peptide` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum KeyMode {
    /// Strip modifications so every modified form maps to one key.
    #[default]
    Sequence,
    /// Use the peptide column verbatim.
    ModifiedSequence,
}

/// Drop bracketed modification annotations (`[...]`, `(...)`, `{...}`) and
/// anything that is not a letter, then upper-case.
pub fn strip_modifications(peptide: &str) -> String {
    let mut depth = 0usize;
    let mut out = String::with_capacity(peptide.len());
    for ch in peptide.chars() {
        match ch {
            '[' | '(' | '{' => depth += 1,
            ']' | ')' | '}' => depth = depth.saturating_sub(1),
            c if depth == 0 && c.is_ascii_alphabetic() => out.push(c.to_ascii_uppercase()),
            _ => {}
        }
    }
    out
}

impl KeyMode {
    pub fn key(&self, peptide: &str) -> String {
        match self {
            KeyMode::Sequence => strip_modifications(peptide),
            KeyMode::ModifiedSequence => peptide.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ReadOptions {
    pub key: KeyMode,
    /// Negate scores from smaller-is-better engines.
    pub flip_sign: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsmRow {
    pub identification: Identification,
    /// Peptide column as written, before keying.
    pub peptide: String,
    pub extra: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PsmTable {
    pub has_truth: bool,
    pub extra_columns: Vec<String>,
    pub rows: Vec<PsmRow>,
}

fn parse_label(s: &str, line: usize) -> Result<Origin, TableError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "target" => Ok(Origin::Target),
        "decoy" => Ok(Origin::Decoy),
        other => Err(at(line, format!("label must be target or decoy, got `{other}`"))),
    }
}

fn parse_truth(s: &str, line: usize) -> Result<Option<Truth>, TableError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "" => Ok(None),
        "correct" => Ok(Some(Truth::Correct)),
        "incorrect" => Ok(Some(Truth::Incorrect)),
        other => Err(at(
            line,
            format!("truth must be correct, incorrect or empty, got `{other}`"),
        )),
    }
}

impl PsmTable {
    pub fn read(reader: impl BufRead, opts: ReadOptions) -> Result<Self, TableError> {
        let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
        let header = match lines.next() {
            Some((_, Ok(h))) => h,
            Some((n, Err(e))) => return Err(at(n, e.to_string())),
            None => return Err(at(1, "missing header row")),
        };
        let columns: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
        if columns.len() < 4 || columns[..4] != REQUIRED_COLUMNS {
            return Err(at(
                1,
                format!("header must start with `{}`", REQUIRED_COLUMNS.join("\\t")),
            ));
        }
        let has_truth = columns.get(4) == Some(&"truth");
        let fixed = if has_truth { 5 } else { 4 };
        let mut table = PsmTable {
            has_truth,
            extra_columns: columns[fixed..].iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        };
        let mut seen = HashSet::new();
        for (n, line) in lines {
            let line = line.map_err(|e| at(n, e.to_string()))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < fixed {
                return Err(at(
                    n,
                    format!("expected at least {fixed} columns, found {}", fields.len()),
                ));
            }
            let spectrum_id = fields[0].to_string();
            if spectrum_id.is_empty() {
                return Err(at(n, "empty spectrum_id"));
            }
            if !seen.insert(spectrum_id.clone()) {
                return Err(at(n, format!("duplicate spectrum_id `{spectrum_id}`")));
            }
            let score: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|_| at(n, format!("score `{}` is not a number", fields[2])))?;
            if !score.is_finite() {
                return Err(at(n, format!("score `{}` is not finite", fields[2])));
            }
            let origin = parse_label(fields[3], n)?;
            let truth = if has_truth { parse_truth(fields[4], n)? } else { None };
            if origin == Origin::Decoy && truth == Some(Truth::Correct) {
                return Err(at(n, "a decoy cannot be correct"));
            }
            let score = if opts.flip_sign { -score } else { score };
            let mut identification = Identification::new(spectrum_id, opts.key.key(fields[1]), score, origin);
            identification.truth = truth;
            table.rows.push(PsmRow {
                identification,
                peptide: fields[1].to_string(),
                extra: fields[fixed..].iter().map(|s| s.to_string()).collect(),
            });
        }
        Ok(table)
    }

    pub fn identifications(&self) -> impl Iterator<Item = Identification> + '_ {
        self.rows.iter().map(|r| r.identification.clone())
    }
}

fn label(origin: Origin) -> &'static str {
    match origin {
        Origin::Target => "target",
        Origin::Decoy => "decoy",
    }
}

/// Write identifications back out in table form, with a truth column when
/// any identification carries one.
pub fn write_table<'a>(ids: impl IntoIterator<Item = &'a Identification>) -> String {
    let ids: Vec<&Identification> = ids.into_iter().collect();
    let with_truth = ids.iter().any(|i| i.truth.is_some());
    let mut out = REQUIRED_COLUMNS.join("\t");
    if with_truth {
        out.push_str("\ttruth");
    }
    out.push('\n');
    for id in ids {
        // `{}` on f64 prints the shortest string that parses back exactly
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}",
            id.spectrum_id,
            id.peptide_key,
            id.score,
            label(id.origin)
        );
        if with_truth {
            let truth = match id.truth {
                Some(Truth::Correct) => "correct",
                Some(Truth::Incorrect) => "incorrect",
                None => "",
            };
            let _ = write!(out, "\t{truth}");
        }
        out.push('\n');
    }
    out
}
