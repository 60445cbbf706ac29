//! Report serialization: JSON and CSV with every float written to 17
//! significant digits, and the content hash embedded in reports.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

/// `{:.16e}` for finite values; `inf`, `-inf`, `nan` otherwise.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// JSON formatter writing floats as `{:.16e}`. Non-finite floats are
/// written as `null` by the serializer before reaching the formatter.
struct ExactFloats<F> {
    inner: F,
}

impl<F: Formatter> Formatter for ExactFloats<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

fn write_json<T: Serialize + ?Sized, F: Formatter>(value: &T, inner: F) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloats { inner });
    value.serialize(&mut ser).expect("report types serialize infallibly");
    buf
}

/// Pretty-printed JSON with exact floats and a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = write_json(value, PrettyFormatter::with_indent(b"  "));
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// Single-line JSON with exact floats.
pub fn to_json_compact<T: Serialize + ?Sized>(value: &T) -> String {
    String::from_utf8(write_json(value, CompactFormatter)).expect("serde_json writes UTF-8")
}

/// Hex SHA-256 of `bytes`, prefixed with `sha256:`.
pub fn content_hash(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

/// Joins one CSV row; floats go through [`fmt_f64`].
pub fn csv_row(cells: &[CsvCell]) -> String {
    let mut out = cells.iter().map(CsvCell::render).collect::<Vec<_>>().join(",");
    out.push('\n');
    out
}

pub enum CsvCell {
    Int(usize),
    Float(f64),
}

impl CsvCell {
    fn render(&self) -> String {
        match *self {
            CsvCell::Int(v) => v.to_string(),
            CsvCell::Float(v) => fmt_f64(v),
        }
    }
}
