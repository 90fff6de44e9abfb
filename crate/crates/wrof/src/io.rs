//! Measure files: JSON `{"dim", "points", "weights"}`, CSV rows
//! `x1,...,xd,w`, and PGM images (P2 or P5).

use std::fs;
use std::path::Path;

use serde::Deserialize;
use wrof_core::{from_grayscale_grid, BoxDomain, DiscreteMeasure, Error};

use crate::error::{CliError, Result};
use crate::format::{float, to_csv, to_json};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureFile {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Loads a measure, picking the format from the file extension. `domain` is
/// only used for images and defaults to the unit square.
pub fn load_measure(path: &Path, domain: Option<&BoxDomain>) -> Result<DiscreteMeasure> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("json") => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            parse_json(&text).map_err(|e| match e {
                CliError::Parse { message, .. } => CliError::parse(path, message),
                other => other,
            })
        }
        Some("csv") => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            parse_csv(&text).map_err(|e| match e {
                CliError::Parse { message, .. } => CliError::parse(path, message),
                other => other,
            })
        }
        Some("pgm") => load_pgm(path, domain),
        _ => Err(CliError::parse(
            path,
            "unknown measure format (expected .json, .csv or .pgm)",
        )),
    }
}

pub fn parse_json(text: &str) -> Result<DiscreteMeasure> {
    let file: MeasureFile = serde_json::from_str(text).map_err(|e| CliError::parse("<json>", e))?;
    if file.dim == 0 {
        return Err(CliError::parse("<json>", "dim must be positive"));
    }
    if let Some(p) = file.points.iter().find(|p| p.len() != file.dim) {
        return Err(Error::DimensionMismatch {
            expected: file.dim,
            found: p.len(),
        }
        .into());
    }
    if file.points.len() != file.weights.len() {
        return Err(Error::LengthMismatch {
            points: file.points.len(),
            weights: file.weights.len(),
        }
        .into());
    }
    let coords = file.points.into_iter().flatten().collect();
    Ok(DiscreteMeasure::from_flat(file.dim, coords, file.weights)?)
}

/// One atom per row, coordinates then weight. A first row that does not
/// parse as numbers is taken as a header.
pub fn parse_csv(text: &str) -> Result<DiscreteMeasure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut dim = None;
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::parse("<csv>", e))?;
        let values: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        let values = match values {
            Ok(v) => v,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(CliError::parse("<csv>", format!("row {}: {e}", line + 1))),
        };
        if values.len() < 2 {
            return Err(CliError::parse(
                "<csv>",
                format!("row {}: need coordinates and a weight", line + 1),
            ));
        }
        let d = values.len() - 1;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::DimensionMismatch { expected, found: d }.into())
            }
            Some(_) => {}
        }
        coords.extend_from_slice(&values[..d]);
        weights.push(values[d]);
    }
    let dim = dim.ok_or(Error::EmptyMeasure)?;
    Ok(DiscreteMeasure::from_flat(dim, coords, weights)?)
}

fn load_pgm(path: &Path, domain: Option<&BoxDomain>) -> Result<DiscreteMeasure> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let image = image::load_from_memory_with_format(&bytes, image::ImageFormat::Pnm)
        .map_err(|e| CliError::parse(path, e))?
        .into_luma16();
    let (width, height) = (image.width() as usize, image.height() as usize);
    let values: Vec<f64> = image.pixels().map(|p| f64::from(p.0[0])).collect();
    let unit;
    let domain = match domain {
        Some(d) => d,
        None => {
            unit = BoxDomain::unit(2)?;
            &unit
        }
    };
    Ok(from_grayscale_grid(&values, height, width, domain)?)
}

/// `"x0,y0,x1,y1"` for a planar box, or generally all lower bounds then all
/// upper bounds.
pub fn parse_domain(text: &str) -> Result<BoxDomain> {
    let values: std::result::Result<Vec<f64>, _> =
        text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let values = values.map_err(|e| CliError::Usage(format!("invalid --domain {text:?}: {e}")))?;
    if values.is_empty() || values.len() % 2 != 0 {
        return Err(CliError::Usage(format!(
            "invalid --domain {text:?}: need lower bounds then upper bounds"
        )));
    }
    let d = values.len() / 2;
    Ok(BoxDomain::new(values[..d].to_vec(), values[d..].to_vec())?)
}

pub fn measure_json(m: &DiscreteMeasure) -> String {
    to_json(m)
}

pub fn measure_csv(m: &DiscreteMeasure) -> String {
    let mut header: Vec<String> = (1..=m.dim()).map(|k| format!("x{k}")).collect();
    header.push("w".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    to_csv(
        &header,
        m.iter()
            .map(|(p, w)| p.iter().map(|&c| float(c)).chain([float(w)]).collect()),
    )
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let m = DiscreteMeasure::new(vec![vec![0.1, 0.7], vec![0.3, 0.2]], vec![1.0, 3.0]).unwrap();
        assert_eq!(parse_json(&measure_json(&m)).unwrap(), m);
    }

    #[test]
    fn json_rejects_ragged_points() {
        let err =
            parse_json(r#"{"dim": 2, "points": [[0, 1], [2]], "weights": [1, 1]}"#).unwrap_err();
        assert_eq!(err.kind(), "DimensionMismatch");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn csv_with_and_without_header() {
        let a = parse_csv("x1,w\n0,2\n3,2\n").unwrap();
        let b = parse_csv("0, 2\n# comment\n3, 2\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.weights(), &[0.5, 0.5]);
        let m = DiscreteMeasure::new(vec![vec![0.1, 0.7], vec![0.3, 0.2]], vec![1.0, 3.0]).unwrap();
        assert_eq!(parse_csv(&measure_csv(&m)).unwrap(), m);
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        assert_eq!(
            parse_csv("0,1\n0,1,1\n").unwrap_err().kind(),
            "DimensionMismatch"
        );
        assert_eq!(parse_csv("").unwrap_err().kind(), "EmptyMeasure");
    }

    #[test]
    fn pgm_ascii_and_binary() {
        let dir = tempfile::tempdir().unwrap();
        let ascii = dir.path().join("a.pgm");
        fs::write(&ascii, "P2\n# two pixels\n2 1\n255\n1 1\n").unwrap();
        let m = load_measure(&ascii, None).unwrap();
        assert_eq!(m.point(0), &[0.25, 0.5]);
        assert_eq!(m.point(1), &[0.75, 0.5]);
        assert_eq!(m.weights(), &[0.5, 0.5]);

        let binary = dir.path().join("b.pgm");
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 0, 0, 3]);
        fs::write(&binary, bytes).unwrap();
        let m = load_measure(&binary, None).unwrap();
        assert_eq!(m.weights(), &[0.25, 0.75]);

        let zero = dir.path().join("z.pgm");
        fs::write(&zero, "P2\n1 1\n255\n0\n").unwrap();
        assert_eq!(
            load_measure(&zero, None).unwrap_err().kind(),
            "AllZeroImage"
        );
    }

    #[test]
    fn domain_flag() {
        let d = parse_domain("0,0,3,4").unwrap();
        assert_eq!(d.diameter(), 5.0);
        assert!(parse_domain("0,1,2").is_err());
    }
}
