//! Harmonic transfer-function samples and their CSV representation.
//!
//! ```text
//! omega,re_H1,im_H1,re_H2,im_H2,re_H3,im_H3
//! ```
//!
//! Levels that were not acquired are written as empty fields.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};

pub const CSV_HEADER: &str = "omega,re_H1,im_H1,re_H2,im_H2,re_H3,im_H3";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Direct,
    Probed,
    Noisy,
}

/// Samples `H_m(jω_ℓ)` for `m ∈ {1, 2, 3}` at positive frequencies `ω_ℓ`;
/// the conjugate samples at `-jω_ℓ` are implied.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicDataset {
    pub omegas: Vec<f64>,
    /// `levels[m-1]` holds the `H_m` samples when acquired.
    pub levels: [Option<Vec<C64>>; 3],
    pub provenance: Provenance,
}

impl HarmonicDataset {
    pub fn new(omegas: Vec<f64>, levels: [Option<Vec<C64>>; 3], provenance: Provenance) -> Result<Self> {
        let ds = Self { omegas, levels, provenance };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidArgument("frequencies must be finite and positive".into()));
        }
        for (m, level) in self.levels.iter().enumerate() {
            if let Some(v) = level {
                if v.len() != self.omegas.len() {
                    return Err(Error::Dimension(format!(
                        "H{} has {} samples for {} frequencies",
                        m + 1,
                        v.len(),
                        self.omegas.len()
                    )));
                }
                if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::InvalidArgument(format!("H{} contains non-finite values", m + 1)));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Samples of `H_m`, or an error naming the missing level.
    pub fn level(&self, m: usize) -> Result<&[C64]> {
        self.levels
            .get(m.wrapping_sub(1))
            .and_then(|l| l.as_deref())
            .ok_or_else(|| Error::InvalidArgument(format!("dataset has no H{m} samples")))
    }

    pub fn level_vector(&self, m: usize) -> Result<CVector> {
        let v = self.level(m)?;
        Ok(CVector::from_column_slice(v))
    }

    /// Sample points `jω_ℓ`.
    pub fn points(&self) -> Vec<C64> {
        self.omegas.iter().map(|&w| C64::new(0.0, w)).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "{CSV_HEADER}")?;
        for (i, w) in self.omegas.iter().enumerate() {
            write!(f, "{w}")?;
            for level in &self.levels {
                match level {
                    Some(v) => write!(f, ",{},{}", v[i].re, v[i].im)?,
                    None => write!(f, ",,")?,
                }
            }
            writeln!(f)?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, provenance: Provenance) -> Result<Self> {
        let fmt = |msg: String| Error::Format { path: path.display().to_string(), msg };
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| fmt("empty file".into()))??;
        if header.trim() != CSV_HEADER {
            return Err(fmt(format!("unexpected header {header:?}")));
        }
        let mut omegas = Vec::new();
        let mut cols: [Vec<Option<C64>>; 3] = Default::default();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(fmt(format!("line {}: expected 7 fields, found {}", lineno + 2, fields.len())));
            }
            let num = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|e| fmt(format!("line {}: {e}", lineno + 2)))
            };
            omegas.push(num(fields[0])?);
            for m in 0..3 {
                let (re, im) = (fields[1 + 2 * m].trim(), fields[2 + 2 * m].trim());
                cols[m].push(if re.is_empty() && im.is_empty() { None } else { Some(C64::new(num(re)?, num(im)?)) });
            }
        }
        let mut levels: [Option<Vec<C64>>; 3] = Default::default();
        for m in 0..3 {
            let present = cols[m].iter().filter(|v| v.is_some()).count();
            if present == omegas.len() && present > 0 {
                levels[m] = Some(cols[m].iter().map(|v| v.expect("checked")).collect());
            } else if present != 0 {
                return Err(fmt(format!("H{} is only partially present", m + 1)));
            }
        }
        Self::new(omegas, levels, provenance).map_err(|e| fmt(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_missing_level() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let ds = HarmonicDataset::new(
            vec![0.5, 1.0 / 3.0],
            [Some(vec![C64::new(1.0, -0.25), C64::new(0.1, 1e-17)]), None, Some(vec![C64::new(3.0, 0.0), C64::new(-2.5, 7.0)])],
            Provenance::Direct,
        )
        .unwrap();
        ds.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert!(text.lines().nth(1).unwrap().contains(",,,"));
        let back = HarmonicDataset::read_csv(&path, Provenance::Direct).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let r = HarmonicDataset::new(vec![1.0, 2.0], [Some(vec![C64::new(1.0, 0.0)]), None, None], Provenance::Direct);
        assert!(r.is_err());
    }

    #[test]
    fn bad_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "w,a,b\n1,2,3\n").unwrap();
        assert!(matches!(HarmonicDataset::read_csv(&path, Provenance::Direct), Err(Error::Format { .. })));
    }
}
