//! CSV input and output.
//!
//! Input is one column `y` or two columns `t,y`; a header row is detected
//! when the first record does not parse as numbers, and a header naming a
//! `y` column selects it from any number of columns. Lines starting with `#`
//! are comments. The `t` column is not used beyond the row count since the
//! design is always `t_i = i/n`.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{design_point, DesignSample};

/// Observations read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesInput {
    pub sample: DesignSample,
    /// Whether the input carried a `t` column.
    pub has_t: bool,
    pub header: Option<Vec<String>>,
}

pub fn read_series<R: Read>(reader: R) -> Result<SeriesInput> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let mut header: Option<Vec<String>> = None;
    let mut width = None;
    let mut ycol = None;
    let mut y = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let fields: Vec<&str> = rec.iter().collect();
        if fields.is_empty() || (fields.len() > 2 && !(row == 0 || ycol.is_some())) {
            return Err(Error::Parse(format!(
                "expected 1 or 2 columns (or a header naming y), found {} on row {}",
                fields.len(),
                row + 1
            )));
        }
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if row == 0 && v.len() > 2 => {
                return Err(Error::Parse(format!("expected 1 or 2 columns, found {} on row 1", v.len())));
            }
            Ok(v) => {
                let yi = v[ycol.unwrap_or(v.len() - 1)];
                if !yi.is_finite() {
                    return Err(Error::Parse(format!("non-finite value on row {}", row + 1)));
                }
                y.push(yi);
            }
            Err(_) if row == 0 => {
                ycol = fields.iter().position(|f| f.eq_ignore_ascii_case("y"));
                if fields.len() > 2 && ycol.is_none() {
                    return Err(Error::Parse(format!("{} columns but no header named y", fields.len())));
                }
                header = Some(fields.iter().map(|s| s.to_string()).collect());
            }
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", row + 1))),
        }
        width = Some(fields.len());
    }
    if y.is_empty() {
        return Err(Error::Parse("no observations in input".into()));
    }
    let has_t = match &header {
        Some(h) => h.iter().any(|c| c.eq_ignore_ascii_case("t")),
        None => width == Some(2),
    };
    Ok(SeriesInput { sample: DesignSample::new(y)?, has_t, header })
}

pub fn read_series_file(path: &Path) -> Result<SeriesInput> {
    read_series(BufReader::new(File::open(path)?))
}

/// `x` with 12 significant digits, in the style of C's `%.12g`.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-5..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{x:.*}", (11 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes `# comment` lines, a header and equal-length numeric columns.
pub fn write_table<W: Write>(mut w: W, comments: &[String], header: &[&str], columns: &[&[f64]]) -> Result<()> {
    if header.len() != columns.len() {
        return Err(Error::LengthMismatch { expected: header.len(), got: columns.len() });
    }
    let rows = columns.first().map_or(0, |c| c.len());
    if let Some(c) = columns.iter().find(|c| c.len() != rows) {
        return Err(Error::LengthMismatch { expected: rows, got: c.len() });
    }
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header)?;
    for i in 0..rows {
        wtr.write_record(columns.iter().map(|c| fmt_g(c[i])))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_table_file(path: &Path, comments: &[String], header: &[&str], columns: &[&[f64]]) -> Result<()> {
    write_table(std::io::BufWriter::new(File::create(path)?), comments, header, columns)
}

/// The design points `1/n, ..., 1`.
pub fn design_column(n: usize) -> Vec<f64> {
    (1..=n).map(|i| design_point(i, n)).collect()
}
