//! JSON persistence of quadratic systems.
//!
//! ```json
//! { "n": 2, "E": [...], "A": [...], "Q": [...], "B": [...], "C": [...] }
//! ```
//!
//! Matrices are flattened row-major; `B` is `n x 1` and `C` is `1 x n`.
//! Complex systems carry the imaginary parts in `E_im`, `A_im`, ... arrays.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::system::QuadraticSystem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub n: usize,
    #[serde(rename = "E")]
    pub e: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    #[serde(rename = "E_im", default, skip_serializing_if = "Option::is_none")]
    pub e_im: Option<Vec<f64>>,
    #[serde(rename = "A_im", default, skip_serializing_if = "Option::is_none")]
    pub a_im: Option<Vec<f64>>,
    #[serde(rename = "Q_im", default, skip_serializing_if = "Option::is_none")]
    pub q_im: Option<Vec<f64>>,
    #[serde(rename = "B_im", default, skip_serializing_if = "Option::is_none")]
    pub b_im: Option<Vec<f64>>,
    #[serde(rename = "C_im", default, skip_serializing_if = "Option::is_none")]
    pub c_im: Option<Vec<f64>>,
    #[serde(default)]
    pub symmetric: bool,
}

fn row_major(m: &CMatrix) -> (Vec<f64>, Option<Vec<f64>>) {
    let mut re = Vec::with_capacity(m.len());
    let mut im = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            re.push(m[(i, j)].re);
            im.push(m[(i, j)].im);
        }
    }
    let any_im = im.iter().any(|v| *v != 0.0);
    (re, any_im.then_some(im))
}

fn from_row_major(name: &str, rows: usize, cols: usize, re: &[f64], im: Option<&Vec<f64>>) -> Result<CMatrix> {
    if re.len() != rows * cols {
        return Err(Error::Dimension(format!("{name} has {} entries, expected {rows}x{cols}", re.len())));
    }
    if let Some(im) = im {
        if im.len() != re.len() {
            return Err(Error::Dimension(format!("{name}_im has {} entries, expected {}", im.len(), re.len())));
        }
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| {
        let k = i * cols + j;
        C64::new(re[k], im.map_or(0.0, |v| v[k]))
    }))
}

impl SystemFile {
    pub fn from_system(sys: &QuadraticSystem) -> Self {
        let c_row = sys.c().transpose();
        let (e, e_im) = row_major(sys.e());
        let (a, a_im) = row_major(sys.a());
        let (q, q_im) = row_major(sys.q());
        let (b, b_im) = row_major(&CMatrix::from_column_slice(sys.n(), 1, sys.b().as_slice()));
        let (c, c_im) = row_major(&CMatrix::from_row_slice(1, sys.n(), c_row.as_slice()));
        Self { n: sys.n(), e, a, q, b, c, e_im, a_im, q_im, b_im, c_im, symmetric: sys.is_symmetric() }
    }

    pub fn to_system(&self) -> Result<QuadraticSystem> {
        let n = self.n;
        let e = from_row_major("E", n, n, &self.e, self.e_im.as_ref())?;
        let a = from_row_major("A", n, n, &self.a, self.a_im.as_ref())?;
        let q = from_row_major("Q", n, n * n, &self.q, self.q_im.as_ref())?;
        let b = from_row_major("B", n, 1, &self.b, self.b_im.as_ref())?;
        let c = from_row_major("C", 1, n, &self.c, self.c_im.as_ref())?;
        QuadraticSystem::new(e, a, q, CVector::from_column_slice(b.as_slice()), CVector::from_column_slice(c.as_slice()))?
            .with_symmetric(self.symmetric)
    }
}

pub fn write_system(path: &Path, sys: &QuadraticSystem) -> Result<()> {
    let text = serde_json::to_string_pretty(&SystemFile::from_system(sys))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_system(path: &Path) -> Result<QuadraticSystem> {
    let text = std::fs::read_to_string(path)?;
    let file: SystemFile =
        serde_json::from_str(&text).map_err(|e| Error::Format { path: path.display().to_string(), msg: e.to_string() })?;
    file.to_system().map_err(|e| Error::Format { path: path.display().to_string(), msg: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::make_toy_system;

    #[test]
    fn round_trip_real() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sys.json");
        let toy = make_toy_system();
        write_system(&path, &toy).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains("_im"));
        let back = read_system(&path).unwrap();
        assert_eq!(back.q(), toy.q());
        assert_eq!(back.a(), toy.a());
        assert_eq!(back.c(), toy.c());
        assert!(back.is_symmetric());
    }

    #[test]
    fn round_trip_complex() {
        let one = CMatrix::identity(1, 1);
        let sys = QuadraticSystem::new(
            one.clone(),
            CMatrix::from_element(1, 1, C64::new(-1.0, 0.5)),
            CMatrix::from_element(1, 1, C64::new(0.0, 2.0)),
            CVector::from_element(1, C64::new(1.0, 0.0)),
            CVector::from_element(1, C64::new(1.0, -1.0)),
        )
        .unwrap();
        let file = SystemFile::from_system(&sys);
        assert!(file.a_im.is_some() && file.e_im.is_none());
        let back = file.to_system().unwrap();
        assert_eq!(back.a(), sys.a());
        assert_eq!(back.c(), sys.c());
    }

    #[test]
    fn wrong_sizes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"n":2,"E":[1,0,0,1],"A":[1],"Q":[0,0,0,0,0,0,0,0],"B":[1,1],"C":[1,0]}"#).unwrap();
        assert!(matches!(read_system(&path), Err(Error::Format { .. })));
    }
}
