//! Float formatting shared by every JSON and CSV writer: scientific notation
//! with 17 significant digits, enough to round-trip any `f64`.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};

pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{:.16e}", if x == 0.0 { 0.0 } else { x })
    } else {
        // Only reachable for diagnostics; CSV readers accept these spellings.
        format!("{x}")
    }
}

struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(float(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, Sig17(PrettyFormatter::with_indent(b"  ")));
    value
        .serialize(&mut ser)
        .expect("serializing to memory cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

/// CSV with a header row; every cell is already formatted.
pub fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [
            2.5,
            0.1,
            1.0 / 3.0,
            -7.25e-300,
            f64::MAX,
            f64::MIN_POSITIVE,
            123_456_789.123_456_78,
        ] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let mantissa = s
                .split('e')
                .next()
                .unwrap()
                .trim_start_matches('-')
                .replace('.', "");
            assert_eq!(mantissa.len(), 17);
        }
        assert_eq!(float(-0.0), float(0.0));
    }

    #[test]
    fn json_uses_seventeen_digits() {
        let s = to_json(&serde_json::json!({"a": 0.1, "b": [1.0, 2], "c": f64::NAN}));
        assert!(s.contains("\"a\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("1.0000000000000000e0"), "{s}");
        assert!(s.contains("\"c\": null"), "{s}");
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }
}
