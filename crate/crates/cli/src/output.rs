//! Writers for CSV series, JSON reports and the run manifest. Every float
//! is written with 17 significant digits.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// `{:.16e}`: 17 significant digits, round-trip exact.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Pretty JSON whose numbers are written like [`fmt_float`].
struct SigFormatter {
    inner: PrettyFormatter<'static>,
}

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

pub fn to_json<S: Serialize>(value: &S) -> io::Result<String> {
    let mut buf = Vec::new();
    let fmt = SigFormatter {
        inner: PrettyFormatter::new(),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser).map_err(io::Error::other)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// A CSV cell.
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_float(*x),
            Cell::U(v) => v.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

/// Collects the files written for one run.
pub struct Sink {
    dir: PathBuf,
    csv: bool,
    json: bool,
    pub written: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path, csv: bool, json: bool) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            csv,
            json,
            written: Vec::new(),
        })
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> io::Result<()> {
        if !self.csv {
            return Ok(());
        }
        let mut w = csv::Writer::from_path(self.dir.join(name)).map_err(io::Error::other)?;
        w.write_record(header).map_err(io::Error::other)?;
        for row in rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io::Error::other)?;
        }
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<S: Serialize>(&mut self, name: &str, value: &S) -> io::Result<()> {
        if !self.json {
            return Ok(());
        }
        self.write_raw(name, &to_json(value)?)
    }

    /// Written regardless of the selected formats (manifests).
    pub fn always_json<S: Serialize>(&mut self, name: &str, value: &S) -> io::Result<()> {
        self.write_raw(name, &to_json(value)?)
    }

    fn write_raw(&mut self, name: &str, text: &str) -> io::Result<()> {
        fs::write(self.dir.join(name), text)?;
        self.written.push(name.to_string());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        for x in [std::f64::consts::PI, 1e-300, -2.5e17, 0.3] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_numbers_use_the_same_format() {
        let s = to_json(&serde_json::json!({"a": 0.1, "b": [1.5], "c": 3})).unwrap();
        assert!(s.contains("\"a\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("1.5000000000000000e0"));
        assert!(s.contains("\"c\": 3"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"], 0.1);
    }
}
