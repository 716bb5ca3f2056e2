//! CSV and JSON emission with 17 significant digits.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use walkrange_core::estimators::EstimateReport;
use walkrange_core::Error;

pub const CSV_HEADER: [&str; 11] = [
    "experiment",
    "group",
    "law",
    "n",
    "statistic",
    "element",
    "mean",
    "variance",
    "stderr",
    "reps",
    "seed",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Format, Error> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(Format::Csv),
            Some("json") => Ok(Format::Json),
            _ => Err(Error::Usage(format!(
                "--out must end in .csv or .json, got `{}`",
                path.display()
            ))),
        }
    }
}

pub fn number(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn write_csv<W: Write>(report: &EstimateReport, out: W) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    };
    w.write_record(CSV_HEADER).map_err(err)?;
    for r in &report.rows {
        w.write_record([
            report.experiment.clone(),
            report.group.clone(),
            report.law.clone(),
            r.n.to_string(),
            r.statistic.clone(),
            r.element.clone(),
            number(r.mean),
            number(r.variance),
            number(r.stderr),
            r.reps.to_string(),
            report.seed.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    })
}

// Pretty JSON whose floats carry 17 significant digits.
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(number(value).as_bytes())
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> Result<(), Error> {
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| Error::Io {
        path: "<json>".into(),
        message: e.to_string(),
    })?;
    out.write_all(b"\n").map_err(|e| Error::Io {
        path: "<json>".into(),
        message: e.to_string(),
    })
}

/// Writes the report to `path` in the format its extension names.
pub fn emit(report: &EstimateReport, path: &Path) -> Result<(), Error> {
    let format = Format::from_path(path)?;
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(report, &mut buf)?,
        Format::Json => write_json(report, &mut buf)?,
    }
    std::fs::write(path, buf).map_err(|e| io_error(path, e))
}
