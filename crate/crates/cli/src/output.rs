//! Output directories, the run manifest, CSV tables, and gnuplot data.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("output directory {0} already exists and is not empty")]
    NotEmpty(PathBuf),
    #[error("no curves to plot")]
    NoCurves,
    #[error("curve `{0}` has no points")]
    EmptyCurve(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of the canonical JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    hex(&Sha256::digest(json))
}

/// Creates `dir`, refusing to reuse a directory that has content.
pub fn prepare_dir(dir: &Path) -> Result<(), OutputError> {
    if dir.exists() && fs::read_dir(dir)?.next().is_some() {
        return Err(OutputError::NotEmpty(dir.to_path_buf()));
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

#[derive(Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config_hash: String,
    pub seeds: &'a [u64],
    pub files: Vec<String>,
    pub config: &'a C,
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), OutputError> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(io::Error::from)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// Comma-separated table with a header row and LF line endings.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), OutputError> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{}", header.join(","))?;
    for r in rows {
        writeln!(f, "{}", r.join(","))?;
    }
    f.flush()?;
    Ok(())
}

/// A named series of `(x, y)` points.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub metric: String,
    pub mechanism: String,
    pub points: Vec<(f64, f64)>,
}

/// Writes one whitespace-separated file per curve, named
/// `<metric>_<mechanism>.dat`. Incentive-compatibility files carry a
/// `fair_share` column equal to `alpha`. Nothing is written unless every
/// curve has points.
pub fn emit_plot_data(dir: &Path, curves: &[Curve]) -> Result<Vec<PathBuf>, OutputError> {
    if curves.is_empty() {
        return Err(OutputError::NoCurves);
    }
    if let Some(c) = curves.iter().find(|c| c.points.is_empty()) {
        return Err(OutputError::EmptyCurve(format!("{}_{}", c.metric, c.mechanism)));
    }
    let mut out = Vec::new();
    for c in curves {
        let path = dir.join(format!("{}_{}.dat", c.metric, c.mechanism));
        let ic = c.metric == "ic";
        let mut f = io::BufWriter::new(fs::File::create(&path)?);
        writeln!(f, "# {} {}", c.metric, c.mechanism)?;
        if ic {
            writeln!(f, "# alpha value fair_share")?;
        } else {
            writeln!(f, "# alpha value")?;
        }
        for &(x, y) in &c.points {
            if ic {
                writeln!(f, "{x} {y} {x}")?;
            } else {
                writeln!(f, "{x} {y}")?;
            }
        }
        f.flush()?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(mech: &str) -> Curve {
        Curve {
            metric: "ic".into(),
            mechanism: mech.into(),
            points: vec![(0.1, 0.1), (0.3, 0.32)],
        }
    }

    #[test]
    fn empty_curve_list_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_plot_data(dir.path(), &[]), Err(OutputError::NoCurves)));
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn one_file_per_mechanism_with_fair_share() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plot_data(dir.path(), &[curve("bitcoin"), curve("prs")]).unwrap();
        assert_eq!(files.len(), 2);
        let cols: Vec<Vec<String>> = files
            .iter()
            .map(|p| {
                fs::read_to_string(p)
                    .unwrap()
                    .lines()
                    .filter(|l| !l.starts_with('#'))
                    .map(|l| {
                        let f: Vec<&str> = l.split_whitespace().collect();
                        assert_eq!(f[0], f[2]);
                        f[0].to_string()
                    })
                    .collect()
            })
            .collect();
        assert_eq!(cols[0], cols[1]);
    }

    #[test]
    fn refuses_non_empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("x"), "1").unwrap();
        assert!(matches!(prepare_dir(dir.path()), Err(OutputError::NotEmpty(_))));
    }
}
