//! CSV archive format.
//!
//! Schema: header `t,seg,u1,...,um,y1,...,yp`; one row per sample. `t` is
//! an integer sample index, `seg` a segment (record) id. Rows of one
//! segment must be contiguous in `t`; a gap in the time axis means the
//! data belongs in two segments. Segments appear in the archive in order
//! of first appearance in the file.

use std::collections::HashMap;
use std::path::Path;

use msid_core::{Archive, Record};
use nalgebra::DMatrix;

use crate::FormatError;

/// Reads just the header and infers the channel counts `(m, p)` from the
/// `u*` / `y*` column names.
pub fn sniff_channel_dims(path: &Path) -> Result<(usize, usize), FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| map_csv_error(path, e))?;
    let header = reader.headers().map_err(|e| map_csv_error(path, e))?;
    parse_header(path, header)
}

/// Loads an archive, requiring exactly `m` input and `p` output channels.
pub fn load_archive_csv(path: &Path, m: usize, p: usize) -> Result<Archive, FormatError> {
    let (got_m, got_p) = sniff_channel_dims(path)?;
    if (got_m, got_p) != (m, p) {
        return Err(FormatError::schema(
            path,
            format!("expected {m} input and {p} output channels, header declares {got_m} and {got_p}"),
        ));
    }

    struct Row {
        t: i64,
        line: u64,
        values: Vec<f64>,
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| map_csv_error(path, e))?;

    let mut order: Vec<String> = Vec::new();
    let mut segments: HashMap<String, Vec<Row>> = HashMap::new();
    for result in reader.records() {
        let record = result.map_err(|e| map_csv_error(path, e))?;
        let line = record.position().map_or(0, |pos| pos.line());
        if record.len() != 2 + m + p {
            return Err(FormatError::parse(
                path,
                line,
                format!("expected {} fields, found {}", 2 + m + p, record.len()),
            ));
        }
        let t: i64 = record[0].trim().parse().map_err(|_| {
            FormatError::parse(path, line, format!("bad sample index {:?}", &record[0]))
        })?;
        let seg = record[1].trim().to_string();
        if seg.is_empty() {
            return Err(FormatError::parse(path, line, "empty segment id"));
        }
        let mut values = Vec::with_capacity(m + p);
        for field in record.iter().skip(2) {
            let v: f64 = field.trim().parse().map_err(|_| {
                FormatError::parse(path, line, format!("bad numeric field {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(FormatError::parse(
                    path,
                    line,
                    format!("non-finite sample {field:?}"),
                ));
            }
            values.push(v);
        }
        if !segments.contains_key(&seg) {
            order.push(seg.clone());
        }
        segments.entry(seg).or_default().push(Row { t, line, values });
    }

    if order.is_empty() {
        return Err(FormatError::schema(path, "archive contains no data rows"));
    }

    let mut records = Vec::with_capacity(order.len());
    for id in order {
        let mut rows = segments.remove(&id).expect("segment collected above");
        rows.sort_by_key(|r| r.t);
        for pair in rows.windows(2) {
            if pair[1].t != pair[0].t + 1 {
                let what = if pair[1].t == pair[0].t {
                    "duplicates"
                } else {
                    "does not follow"
                };
                return Err(FormatError::parse(
                    path,
                    pair[1].line,
                    format!(
                        "segment {id:?}: sample t={} {what} t={}; rows within a segment must be contiguous",
                        pair[1].t, pair[0].t,
                    ),
                ));
            }
        }
        let len = rows.len();
        let inputs = DMatrix::from_fn(m, len, |r, c| rows[c].values[r]);
        let outputs = DMatrix::from_fn(p, len, |r, c| rows[c].values[m + r]);
        records.push(Record::new(id, rows[0].t, inputs, outputs)?);
    }
    Ok(Archive::new(records)?)
}

/// Loads an archive, taking the channel counts from the header.
pub fn load_archive_csv_auto(path: &Path) -> Result<Archive, FormatError> {
    let (m, p) = sniff_channel_dims(path)?;
    load_archive_csv(path, m, p)
}

/// Writes an archive in the same schema `load_archive_csv` reads. Floats
/// are written in shortest round-trip form, so write-then-read is the
/// identity on well-formed archives.
pub fn write_archive_csv(path: &Path, archive: &Archive) -> Result<(), FormatError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| map_csv_error(path, e))?;
    let m = archive.input_dim();
    let p = archive.output_dim();
    let mut header = vec!["t".to_string(), "seg".to_string()];
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.extend((1..=p).map(|i| format!("y{i}")));
    writer
        .write_record(&header)
        .map_err(|e| map_csv_error(path, e))?;
    for record in archive.records() {
        for k in 0..record.len() {
            let mut fields = Vec::with_capacity(2 + m + p);
            fields.push((record.start_time() + k as i64).to_string());
            fields.push(record.id().to_string());
            for r in 0..m {
                fields.push(record.inputs()[(r, k)].to_string());
            }
            for r in 0..p {
                fields.push(record.outputs()[(r, k)].to_string());
            }
            writer
                .write_record(&fields)
                .map_err(|e| map_csv_error(path, e))?;
        }
    }
    writer.flush().map_err(|e| FormatError::io(path, e))?;
    Ok(())
}

fn parse_header(path: &Path, header: &csv::StringRecord) -> Result<(usize, usize), FormatError> {
    let fields: Vec<&str> = header.iter().map(str::trim).collect();
    if fields.len() < 4 || fields[0] != "t" || fields[1] != "seg" {
        return Err(FormatError::schema(
            path,
            "header must be t,seg,u1,...,um,y1,...,yp",
        ));
    }
    let mut m = 0;
    let mut idx = 2;
    while idx < fields.len() && fields[idx] == format!("u{}", m + 1) {
        m += 1;
        idx += 1;
    }
    let mut p = 0;
    while idx < fields.len() && fields[idx] == format!("y{}", p + 1) {
        p += 1;
        idx += 1;
    }
    if m == 0 || p == 0 || idx != fields.len() {
        return Err(FormatError::schema(
            path,
            "header must be t,seg,u1,...,um,y1,...,yp",
        ));
    }
    Ok((m, p))
}

fn map_csv_error(path: &Path, err: csv::Error) -> FormatError {
    let line = match err.kind() {
        csv::ErrorKind::Utf8 { pos, .. } => pos.as_ref().map(csv::Position::line),
        csv::ErrorKind::UnequalLengths { pos, .. } => pos.as_ref().map(csv::Position::line),
        csv::ErrorKind::Deserialize { pos, .. } => pos.as_ref().map(csv::Position::line),
        _ => None,
    };
    if err.is_io_error() {
        if let csv::ErrorKind::Io(io) = err.into_kind() {
            return FormatError::io(path, io);
        }
        unreachable!("is_io_error implies the Io kind");
    }
    match line {
        Some(line) => FormatError::parse(path, line, err.to_string()),
        None => FormatError::schema(path, err.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::Builder::new()
            .suffix(".csv")
            .tempfile()
            .expect("temp file");
        file.write_all(content.as_bytes()).expect("write");
        file
    }

    #[test]
    fn loads_single_segment() {
        let file = write_temp("t,seg,u1,y1\n0,a,1.0,2.0\n1,a,3.0,4.0\n2,a,5.0,6.0\n");
        let archive = load_archive_csv(file.path(), 1, 1).expect("load");
        assert_eq!(archive.len(), 1);
        let rec = archive.get("a").expect("record a");
        assert_eq!(rec.len(), 3);
        assert_eq!(rec.start_time(), 0);
        assert_eq!(rec.inputs()[(0, 2)], 5.0);
        assert_eq!(rec.outputs()[(0, 0)], 2.0);
    }

    #[test]
    fn sniffs_channel_dims() {
        let file = write_temp("t,seg,u1,u2,y1,y2,y3\n0,a,1,2,3,4,5\n");
        assert_eq!(sniff_channel_dims(file.path()).expect("sniff"), (2, 3));
    }

    #[test]
    fn preserves_first_appearance_order_and_sorts_time() {
        let file = write_temp(
            "t,seg,u1,y1\n5,b,1,1\n0,a,2,2\n4,b,3,3\n1,a,4,4\n",
        );
        let archive = load_archive_csv(file.path(), 1, 1).expect("load");
        let ids: Vec<&str> = archive.records().iter().map(|r| r.id()).collect();
        assert_eq!(ids, ["b", "a"]);
        let b = archive.get("b").expect("b");
        assert_eq!(b.start_time(), 4);
        assert_eq!(b.inputs()[(0, 0)], 3.0);
        assert_eq!(b.inputs()[(0, 1)], 1.0);
    }

    #[test]
    fn rejects_time_gap_naming_the_line() {
        let file = write_temp("t,seg,u1,y1\n0,a,1,1\n1,a,2,2\n3,a,3,3\n");
        let err = load_archive_csv(file.path(), 1, 1).expect_err("gap");
        let msg = err.to_string();
        assert!(msg.contains(":4:"), "line number missing in {msg}");
        assert!(msg.contains("contiguous"), "reason missing in {msg}");
    }

    #[test]
    fn rejects_duplicate_time_stamp() {
        let file = write_temp("t,seg,u1,y1\n0,a,1,1\n0,a,2,2\n");
        let err = load_archive_csv(file.path(), 1, 1).expect_err("dup");
        assert!(err.to_string().contains("duplicates"));
    }

    #[test]
    fn rejects_wrong_dims_and_bad_fields() {
        let file = write_temp("t,seg,u1,y1\n0,a,1,1\n");
        assert!(load_archive_csv(file.path(), 2, 1).is_err());

        let bad = write_temp("t,seg,u1,y1\n0,a,oops,1\n");
        let err = load_archive_csv(bad.path(), 1, 1).expect_err("bad field");
        assert!(err.to_string().contains("oops"));

        let nan = write_temp("t,seg,u1,y1\n0,a,NaN,1\n");
        assert!(load_archive_csv(nan.path(), 1, 1).is_err());

        let empty = write_temp("t,seg,u1,y1\n");
        assert!(load_archive_csv(empty.path(), 1, 1).is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let recs = vec![
            Record::new(
                "5".into(),
                7,
                DMatrix::from_row_slice(2, 3, &[0.1, -2.5e-7, 3.0, 1.0 / 3.0, 4.0, 5.25]),
                DMatrix::from_row_slice(1, 3, &[9.0, 0.0, -1.0000000001]),
            )
            .expect("record"),
            Record::new(
                "6".into(),
                -4,
                DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
                DMatrix::from_row_slice(1, 2, &[5.0, 6.0]),
            )
            .expect("record"),
        ];
        let archive = Archive::new(recs).expect("archive");
        let file = tempfile::Builder::new()
            .suffix(".csv")
            .tempfile()
            .expect("temp");
        write_archive_csv(file.path(), &archive).expect("write");
        let back = load_archive_csv(file.path(), 2, 1).expect("read");
        assert_eq!(back.len(), archive.len());
        for (a, b) in archive.records().iter().zip(back.records()) {
            assert_eq!(a.id(), b.id());
            assert_eq!(a.start_time(), b.start_time());
            assert_eq!(a.inputs(), b.inputs());
            assert_eq!(a.outputs(), b.outputs());
        }
    }
}
