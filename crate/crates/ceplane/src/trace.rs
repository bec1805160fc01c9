//! Packet traces as CSV: a header row of dotted field names, then one
//! row per packet with decimal values. An empty cell means the packet
//! does not carry that field.

use crate::engine::Packet;
use crate::headers::HeaderSet;
use crate::program::CompiledProgram;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("trace has no header row")]
    Empty,
    #[error("column {column} names `{name}`, which is not a declared header field")]
    UnknownColumn { column: usize, name: String },
    #[error("column `{name}` appears twice")]
    DuplicateColumn { name: String },
    #[error("line {line}: expected {expected} cells, found {found}")]
    RowWidth { line: usize, expected: usize, found: usize },
    #[error("line {line}, column `{name}`: `{cell}` is not a decimal u32")]
    BadCell { line: usize, name: String, cell: String },
    #[error("line {line}, column `{name}`: {value} does not fit in {width} bits")]
    ValueTooWide { line: usize, name: String, value: u32, width: u8 },
}

/// A parsed trace. Column order follows the file; packet sequence
/// numbers are 1-based row positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<u32>>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Reshape rows onto a program's field slots. Trace columns the
    /// program never reads are dropped; program fields the trace lacks
    /// are absent from every packet.
    pub fn packets(&self, program: &CompiledProgram) -> Vec<Packet> {
        let slot_of: Vec<Option<usize>> = self
            .columns
            .iter()
            .map(|c| program.field_index(c).map(|i| i as usize))
            .collect();
        self.rows
            .iter()
            .map(|row| {
                let mut values = vec![None; program.fields.len()];
                for (cell, slot) in row.iter().zip(&slot_of) {
                    if let (Some(v), Some(s)) = (cell, slot) {
                        values[*s] = Some(*v);
                    }
                }
                Packet::new(values)
            })
            .collect()
    }
}

/// Parse a CSV trace, checking every column against the header set and
/// every value against its field width. Blank lines are skipped; `#`
/// starts a comment line.
pub fn parse_trace(src: &str, headers: &HeaderSet) -> Result<Trace, TraceError> {
    let mut lines = src
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (_, header_line) = lines.next().ok_or(TraceError::Empty)?;
    let columns: Vec<String> = header_line.split(',').map(|c| c.trim().to_string()).collect();
    let mut widths = Vec::with_capacity(columns.len());
    for (i, name) in columns.iter().enumerate() {
        let width = headers
            .width_of(name)
            .ok_or_else(|| TraceError::UnknownColumn { column: i + 1, name: name.clone() })?;
        if columns[..i].contains(name) {
            return Err(TraceError::DuplicateColumn { name: name.clone() });
        }
        widths.push(width);
    }

    let mut rows = Vec::new();
    for (line, text) in lines {
        let cells: Vec<&str> = text.split(',').map(|c| c.trim()).collect();
        if cells.len() != columns.len() {
            return Err(TraceError::RowWidth {
                line,
                expected: columns.len(),
                found: cells.len(),
            });
        }
        let mut row = Vec::with_capacity(cells.len());
        for (i, cell) in cells.iter().enumerate() {
            if cell.is_empty() {
                row.push(None);
                continue;
            }
            let value: u32 = cell.parse().map_err(|_| TraceError::BadCell {
                line,
                name: columns[i].clone(),
                cell: cell.to_string(),
            })?;
            let width = widths[i];
            if width < 32 && value >= 1u32 << width {
                return Err(TraceError::ValueTooWide {
                    line,
                    name: columns[i].clone(),
                    value,
                    width,
                });
            }
            row.push(Some(value));
        }
        rows.push(row);
    }
    Ok(Trace { columns, rows })
}
