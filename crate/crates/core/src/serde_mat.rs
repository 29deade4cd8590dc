//! Row-major nested-array (de)serialization for nalgebra matrices.

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn from_rows(r: &[Vec<f64>], ncols_if_empty: usize) -> Result<DMatrix<f64>, String> {
    if r.is_empty() {
        return Ok(DMatrix::zeros(0, ncols_if_empty));
    }
    let c = r[0].len();
    if r.iter().any(|row| row.len() != c) {
        return Err("ragged matrix rows".into());
    }
    Ok(DMatrix::from_fn(r.len(), c, |i, j| r[i][j]))
}

pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    rows(m).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
    let r = Vec::<Vec<f64>>::deserialize(d)?;
    from_rows(&r, 0).map_err(D::Error::custom)
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        let r = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        r.iter().map(|m| from_rows(m, 0).map_err(D::Error::custom)).collect()
    }
}
