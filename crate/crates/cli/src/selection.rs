//! Selection file format: one `record_id,offset,count` triple per line.
//!
//! Blank lines and lines starting with `#` are ignored. The two numeric
//! fields are parsed from the right, so record ids may contain commas.

use std::fmt::Write as _;
use std::path::Path;

use msid_core::SelectionEntry;

use crate::FormatError;

pub fn read_selection(path: &Path) -> Result<Vec<SelectionEntry>, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx as u64 + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.rsplitn(3, ',');
        let count = fields.next();
        let offset = fields.next();
        let id = fields.next();
        let (Some(count), Some(offset), Some(id)) = (count, offset, id) else {
            return Err(FormatError::parse(
                path,
                line,
                format!("expected record_id,offset,count, found {trimmed:?}"),
            ));
        };
        let offset: usize = offset.trim().parse().map_err(|_| {
            FormatError::parse(path, line, format!("bad offset {:?}", offset.trim()))
        })?;
        let count: usize = count.trim().parse().map_err(|_| {
            FormatError::parse(path, line, format!("bad count {:?}", count.trim()))
        })?;
        let id = id.trim();
        if id.is_empty() {
            return Err(FormatError::parse(path, line, "empty record id"));
        }
        entries.push(SelectionEntry {
            record_id: id.to_string(),
            offset,
            count,
        });
    }
    if entries.is_empty() {
        return Err(FormatError::schema(path, "selection file names no windows"));
    }
    Ok(entries)
}

pub fn write_selection(path: &Path, entries: &[SelectionEntry]) -> Result<(), FormatError> {
    let mut out = String::from("# record_id,offset,count\n");
    for e in entries {
        writeln!(out, "{},{},{}", e.record_id, e.offset, e.count).expect("string write");
    }
    std::fs::write(path, out).map_err(|e| FormatError::io(path, e))
}
