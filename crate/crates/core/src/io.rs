//! CSV ingestion and export, atomic file writes and fit serialization.
//!
//! Lines starting with `#` are comments. Exported files begin with a comment
//! block (configuration echo, seed, grid ordering) that the reader skips.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use log::info;

use crate::basis::EofBasis;
use crate::convolution::FieldRealization;
use crate::covariance::Ellipse;
use crate::engine::{ModelFit, PredictionResult, SpatialDataset};
use crate::error::{Error, Result};
use crate::location::Location;

struct Columns {
    x: usize,
    y: Option<usize>,
    value: usize,
    replicate: Option<usize>,
    covariates: Vec<usize>,
}

fn columns(headers: &csv::StringRecord) -> Result<Columns> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let need = |name: &str| find(name).ok_or_else(|| Error::Input(format!("missing column '{name}'")));
    Ok(Columns {
        x: need("x")?,
        y: find("y"),
        value: need("value")?,
        replicate: find("replicate"),
        covariates: headers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.trim().starts_with("cov_"))
            .map(|(i, _)| i)
            .collect(),
    })
}

fn field(rec: &csv::StringRecord, col: usize, name: &str, row: u64) -> Result<f64> {
    let raw = rec
        .get(col)
        .ok_or_else(|| Error::Input(format!("row {row}: missing field '{name}'")))?
        .trim();
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::Input(format!("row {row}: cannot parse {name} '{raw}'")))?;
    if !v.is_finite() {
        return Err(Error::Input(format!("row {row}: {name} is not finite")));
    }
    Ok(v)
}

/// Reads `x, y, value[, replicate][, cov_*]` rows.
///
/// With a replicate column every replicate must list the same set of
/// locations; the location order is that of the lowest-numbered replicate.
pub fn read_dataset<R: Read>(reader: R) -> Result<(SpatialDataset, usize)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let cols = columns(rdr.headers()?)?;
    // replicate label -> (location, value, covariates) rows in file order
    let mut groups: BTreeMap<i64, Vec<(Location, f64, Vec<f64>, u64)>> = BTreeMap::new();
    let mut rows = 0usize;
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map(|p| p.line()).unwrap_or(0);
        let x = field(&rec, cols.x, "x", row)?;
        let loc = match cols.y {
            Some(c) => Location::xy(x, field(&rec, c, "y", row)?),
            None => Location::x(x),
        };
        let value = field(&rec, cols.value, "value", row)?;
        let rep = match cols.replicate {
            Some(c) => {
                let raw = rec.get(c).unwrap_or("").trim();
                raw.parse::<i64>()
                    .map_err(|_| Error::Input(format!("row {row}: cannot parse replicate '{raw}'")))?
            }
            None => 0,
        };
        let cov = cols
            .covariates
            .iter()
            .map(|&c| field(&rec, c, "covariate", row))
            .collect::<Result<Vec<_>>>()?;
        groups.entry(rep).or_default().push((loc, value, cov, row));
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyData);
    }

    let mut iter = groups.into_iter();
    let (_, first) = iter.next().expect("at least one row");
    let locations: Vec<Location> = first.iter().map(|r| r.0).collect();
    let mut index: BTreeMap<[u64; 2], usize> = BTreeMap::new();
    for (i, l) in locations.iter().enumerate() {
        let c = l.coords();
        let key = [c[0].to_bits(), c.get(1).copied().unwrap_or(0.0).to_bits()];
        if index.insert(key, i).is_some() && cols.replicate.is_some() {
            return Err(Error::Input(format!(
                "row {}: location listed twice in one replicate",
                first[i].3
            )));
        }
    }
    let covariates: Vec<Vec<f64>> = first.iter().map(|r| r.2.clone()).collect();
    let mut values = vec![first.iter().map(|r| r.1).collect::<Vec<f64>>()];
    for (label, group) in iter {
        if group.len() != locations.len() {
            return Err(Error::Input(format!(
                "replicate {label} has {} rows, expected {}",
                group.len(),
                locations.len()
            )));
        }
        let mut y = vec![f64::NAN; locations.len()];
        for (loc, v, cov, row) in group {
            let c = loc.coords();
            let key = [c[0].to_bits(), c.get(1).copied().unwrap_or(0.0).to_bits()];
            let i = *index
                .get(&key)
                .ok_or_else(|| Error::Input(format!("row {row}: location not present in the first replicate")))?;
            if !y[i].is_nan() {
                return Err(Error::Input(format!("row {row}: location listed twice in replicate {label}")));
            }
            if cov != covariates[i] {
                return Err(Error::Input(format!("row {row}: covariates differ from the first replicate")));
            }
            y[i] = v;
        }
        values.push(y);
    }
    let covariates = if cols.covariates.is_empty() {
        None
    } else {
        Some(covariates)
    };
    Ok((SpatialDataset::new(locations, values, covariates)?, rows))
}

pub fn ingest_csv(path: impl AsRef<Path>) -> Result<SpatialDataset> {
    let path = path.as_ref();
    let (d, rows) = read_dataset(fs::File::open(path)?)?;
    info!(
        "read {rows} rows from {}: {} locations, {} replicates",
        path.display(),
        d.len(),
        d.replicates()
    );
    Ok(d)
}

fn comment_block(out: &mut String, header: &[String]) {
    for line in header {
        for l in line.lines() {
            let _ = writeln!(out, "# {l}");
        }
    }
}

fn xy(l: &Location) -> (f64, f64) {
    let c = l.coords();
    (c[0], c.get(1).copied().unwrap_or(0.0))
}

/// `x,y,value,replicate[,cov_*]`; replicates are numbered from 1.
pub fn dataset_csv(d: &SpatialDataset, header: &[String]) -> String {
    let mut out = String::new();
    comment_block(&mut out, header);
    let k = d.covariates.as_ref().and_then(|c| c.first()).map(|c| c.len()).unwrap_or(0);
    out.push_str("x,y,value,replicate");
    for j in 0..k {
        let _ = write!(out, ",cov_{j}");
    }
    out.push('\n');
    for (r, y) in d.values.iter().enumerate() {
        for (i, l) in d.locations.iter().enumerate() {
            let (x, yy) = xy(l);
            let _ = write!(out, "{x},{yy},{},{}", y[i], r + 1);
            if let Some(c) = &d.covariates {
                for v in &c[i] {
                    let _ = write!(out, ",{v}");
                }
            }
            out.push('\n');
        }
    }
    out
}

/// `x,y,value,replicate`; replicates are numbered from 1.
pub fn realization_csv(r: &FieldRealization, header: &[String]) -> String {
    let mut out = String::new();
    comment_block(&mut out, header);
    out.push_str("x,y,value,replicate\n");
    for (k, rep) in r.replicates.iter().enumerate() {
        for (l, v) in r.locations.iter().zip(rep) {
            let (x, y) = xy(l);
            let _ = writeln!(out, "{x},{y},{v},{}", k + 1);
        }
    }
    out
}

pub fn prediction_csv(p: &PredictionResult, header: &[String]) -> String {
    let mut out = String::new();
    comment_block(&mut out, header);
    out.push_str("x,y,mean,se\n");
    for ((l, m), s) in p.locations.iter().zip(&p.mean).zip(&p.se) {
        let (x, y) = xy(l);
        let _ = writeln!(out, "{x},{y},{m},{s}");
    }
    out
}

/// `x,y,lambda1,lambda2,angle,sigma,kappa`; `kappa` is empty for families
/// without a smoothness parameter.
pub fn ellipse_csv(e: &[Ellipse], header: &[String]) -> String {
    let mut out = String::new();
    comment_block(&mut out, header);
    out.push_str("x,y,lambda1,lambda2,angle,sigma,kappa\n");
    for r in e {
        let (x, y) = xy(&r.location);
        let kappa = r.smoothness.map(|k| k.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{x},{y},{},{},{},{},{kappa}",
            r.eigenvalue1, r.eigenvalue2, r.angle, r.sigma
        );
    }
    out
}

/// `location,component,loading`, zero-based, one row per entry of the EOF matrix.
pub fn eof_csv(b: &EofBasis, header: &[String]) -> String {
    let mut out = String::new();
    comment_block(&mut out, header);
    out.push_str("location,component,loading\n");
    for k in 0..b.vectors.ncols() {
        for i in 0..b.vectors.nrows() {
            let _ = writeln!(out, "{i},{k},{}", b.vectors[(i, k)]);
        }
    }
    out
}

/// Writes to a sibling temporary file and renames it into place, so readers
/// never observe a partially written file.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Input(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn fit_to_json(fit: &ModelFit) -> Result<String> {
    let mut s = serde_json::to_string_pretty(fit)?;
    s.push('\n');
    Ok(s)
}

pub fn save_fit(path: impl AsRef<Path>, fit: &ModelFit) -> Result<()> {
    write_atomic(path, fit_to_json(fit)?.as_bytes())
}

pub fn load_fit(path: impl AsRef<Path>) -> Result<ModelFit> {
    let fit: ModelFit = serde_json::from_reader(fs::File::open(path)?)?;
    fit.spec.validate()?;
    if !(fit.nugget >= 0.0) {
        return Err(Error::Input(format!("nugget must be nonnegative, got {}", fit.nugget)));
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows() {
        let text = "x,y,value\n0,0,1.5\n1,0,2\n0,1,-3\n";
        let (d, rows) = read_dataset(text.as_bytes()).unwrap();
        assert_eq!(rows, 3);
        assert_eq!(d.len(), 3);
        assert_eq!(d.values, vec![vec![1.5, 2.0, -3.0]]);
        assert!(d.covariates.is_none());
    }

    #[test]
    fn nan_names_row() {
        let text = "x,y,value\n0,0,1.5\n1,0,NaN\n";
        let err = read_dataset(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
    }

    #[test]
    fn comments_and_missing_columns() {
        let text = "# echo\nx,y,value\n# mid\n0,0,1\n";
        assert_eq!(read_dataset(text.as_bytes()).unwrap().1, 1);
        let err = read_dataset("x,value2\n0,1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("'value'"));
        assert!(matches!(read_dataset("x,y,value\n".as_bytes()), Err(Error::EmptyData)));
        let err = read_dataset("x,y,value\n0,abc,1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 2"));
    }

    #[test]
    fn replicates_realigned_to_first() {
        let text = "x,y,value,replicate,cov_a\n0,0,1,2,5\n1,0,2,2,6\n1,0,20,1,6\n0,0,10,1,5\n";
        let (d, _) = read_dataset(text.as_bytes()).unwrap();
        assert_eq!(d.locations, vec![Location::xy(1.0, 0.0), Location::xy(0.0, 0.0)]);
        assert_eq!(d.values, vec![vec![20.0, 10.0], vec![2.0, 1.0]]);
        assert_eq!(d.covariates, Some(vec![vec![6.0], vec![5.0]]));
        let bad = "x,y,value,replicate\n0,0,1,1\n1,0,2,1\n0,0,1,2\n";
        assert!(read_dataset(bad.as_bytes()).is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
