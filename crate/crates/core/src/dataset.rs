//! CSV corpus loader: one record per line, `"label","field",...` with
//! doubled quotes for embedded quotes and a 1-based class label.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};

/// One line of a labelled corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetRecord {
    /// Class label as written in the file (1-based).
    pub label: usize,
    pub fields: Vec<String>,
}

impl DatasetRecord {
    /// The text fields joined by single spaces.
    pub fn text(&self) -> String {
        self.fields.join(" ")
    }

    pub fn class_index(&self) -> usize {
        self.label - 1
    }
}

fn parse_line(line: &str, number: usize) -> Result<DatasetRecord> {
    let malformed = |message: String| Error::Malformed { line: number, message };
    if line.trim().is_empty() {
        return Err(malformed("empty line".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(line.as_bytes());
    let mut record = csv::StringRecord::new();
    match reader.read_record(&mut record) {
        Ok(true) => {}
        Ok(false) => return Err(malformed("no fields".into())),
        Err(e) => return Err(malformed(e.to_string())),
    }
    if reader.read_record(&mut csv::StringRecord::new()).unwrap_or(true) {
        return Err(malformed("line holds more than one record".into()));
    }
    let mut fields = record.iter();
    let raw = fields.next().ok_or_else(|| malformed("no fields".into()))?;
    let label: usize = raw
        .trim()
        .parse()
        .map_err(|_| malformed(format!("label {raw:?} is not a positive integer")))?;
    if label == 0 {
        return Err(malformed("labels are 1-based".into()));
    }
    Ok(DatasetRecord {
        label,
        fields: fields.map(String::from).collect(),
    })
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<DatasetRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        out.push(parse_line(line, i + 1)?);
    }
    Ok(out)
}

pub fn load_csv(path: &Path) -> Result<Vec<DatasetRecord>> {
    let file = File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    read_csv(file)
}
