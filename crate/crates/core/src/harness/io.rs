//! JSON formats: matrices as `{"rows", "cols", "data"}` with row-major
//! `[re, im]` pairs, and reports.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hermlin::{c64, CMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<[f64; 2]>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.data.len() != self.rows {
            return Err(Error::Parse(format!(
                "declared {} rows but found {}",
                self.rows,
                self.data.len()
            )));
        }
        for (i, row) in self.data.iter().enumerate() {
            if row.len() != self.cols {
                return Err(Error::Parse(format!(
                    "row {i} has {} entries, expected {}",
                    row.len(),
                    self.cols
                )));
            }
            if let Some(j) = row.iter().position(|z| !(z[0].is_finite() && z[1].is_finite())) {
                return Err(Error::Parse(format!("non-finite entry at ({i}, {j})")));
            }
        }
        Ok(CMatrix::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[i][j];
            c64(re, im)
        }))
    }
}

/// Parses a matrix document; non-numeric entries such as `NaN` are rejected.
pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    let raw: MatrixJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    raw.to_matrix()
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<CMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_matrix(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn matrix_to_json(m: &CMatrix) -> String {
    serde_json::to_string(&MatrixJson::from_matrix(m)).expect("matrix serializes")
}

pub fn save_matrix(m: &CMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, matrix_to_json(m))?;
    Ok(())
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

pub fn save_report<T: Serialize>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_json_pretty(report) + "\n")?;
    Ok(())
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// `#[serde(with = "matrix")]` for `CMatrix` fields.
pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from_matrix(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMatrix, D::Error> {
        MatrixJson::deserialize(d)?
            .to_matrix()
            .map_err(serde::de::Error::custom)
    }
}

/// `#[serde(with = "matrix_list")]` for `Vec<CMatrix>` fields.
pub mod matrix_list {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[CMatrix], s: S) -> std::result::Result<S::Ok, S::Error> {
        ms.iter().map(MatrixJson::from_matrix).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<CMatrix>, D::Error> {
        Vec::<MatrixJson>::deserialize(d)?
            .iter()
            .map(|m| m.to_matrix().map_err(serde::de::Error::custom))
            .collect()
    }
}

/// `f64` that may be infinite or NaN, written as `"inf"`, `"-inf"` or `"nan"` in that case.
pub mod extended_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(serde::de::Error::custom(format!("unexpected number string {s:?}"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{ginibre, rng_from_seed};

    #[test]
    fn identity_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("id.json");
        let id = CMatrix::identity(3, 3);
        save_matrix(&id, &path).unwrap();
        assert_eq!(load_matrix(&path).unwrap(), id);
    }

    #[test]
    fn bit_exact_round_trip() {
        let m = ginibre(4, 3, &mut rng_from_seed(1));
        assert_eq!(parse_matrix(&matrix_to_json(&m)).unwrap(), m);
    }

    #[test]
    fn complex_entry() {
        let m = parse_matrix(r#"{"rows":1,"cols":1,"data":[[[0,1]]]}"#).unwrap();
        assert_eq!(m[(0, 0)], c64(0.0, 1.0));
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse_matrix(r#"{"rows":1,"cols":1,"data":[[[NaN,0]]]}"#).is_err());
        assert!(parse_matrix(r#"{"rows":2,"cols":2,"data":[[[1,0],[0,0]],[[0,0]]]}"#).is_err());
        assert!(parse_matrix(r#"{"rows":2,"cols":1,"data":[[[1,0]]]}"#).is_err());
        assert!(parse_matrix("not json").is_err());
        assert!(MatrixJson {
            rows: 1,
            cols: 1,
            data: vec![vec![[f64::INFINITY, 0.0]]]
        }
        .to_matrix()
        .is_err());
    }
}
