//! Interchange formats: channels as `{repr, dim, data}` JSON objects and
//! operators as plain-text matrices (see [`Operator::to_text`]).

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::{QuantumChannel, Representation};
use crate::error::{Error, Result};
use crate::operator::{DensityMatrix, Operator};
use crate::scalar::{CMatrix, C};

/// Representation tag of a serialized channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReprTag {
    Kraus,
    Choi,
    Superop,
    Affine,
}

/// Serialized channel. `data` holds, per tag: a list of `dim × dim`
/// matrices, the Choi matrix, the superoperator, or `{"a": 3×3, "b": [3]}`.
/// Complex matrices are row-major lists of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelJson {
    pub repr: ReprTag,
    pub dim: usize,
    pub data: Value,
}

type Rows = Vec<Vec<[f64; 2]>>;

fn matrix_rows(m: &CMatrix<f64>) -> Rows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn rows_matrix(rows: Rows, n: usize) -> Result<CMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("expected a {n}×{n} matrix")));
    }
    let flat: Vec<C<f64>> = rows.into_iter().flatten().map(|[re, im]| C::new(re, im)).collect();
    Ok(CMatrix::from_row_slice(n, n, &flat))
}

#[derive(Serialize, Deserialize)]
struct AffineData {
    a: [[f64; 3]; 3],
    b: [f64; 3],
}

fn parse<D: for<'a> Deserialize<'a>>(v: Value) -> Result<D> {
    serde_json::from_value(v).map_err(|e| Error::Parse(e.to_string()))
}

impl ChannelJson {
    /// Encodes `ch` in its current representation.
    pub fn from_channel(ch: &QuantumChannel<f64>) -> Result<Self> {
        if ch.dim_in() != ch.dim_out() {
            return Err(Error::NonSquareChannel { dim_in: ch.dim_in(), dim_out: ch.dim_out() });
        }
        let dim = ch.dim_in();
        let (repr, data) = match ch.representation() {
            Representation::Kraus(ks) => {
                let ms: Vec<Rows> = ks.iter().map(|k| matrix_rows(k.matrix())).collect();
                (ReprTag::Kraus, serde_json::to_value(ms)?)
            }
            Representation::Choi(c) => (ReprTag::Choi, serde_json::to_value(matrix_rows(c.matrix()))?),
            Representation::SuperOperator(s) => (ReprTag::Superop, serde_json::to_value(matrix_rows(s))?),
            Representation::AffineBloch { a, b } => {
                let rows = [[a[(0, 0)], a[(0, 1)], a[(0, 2)]], [a[(1, 0)], a[(1, 1)], a[(1, 2)]], [a[(2, 0)], a[(2, 1)], a[(2, 2)]]];
                (ReprTag::Affine, serde_json::to_value(AffineData { a: rows, b: [b.x, b.y, b.z] })?)
            }
        };
        Ok(Self { repr, dim, data })
    }

    /// Decodes and validates (CPT within the channel tolerance).
    pub fn to_channel(&self) -> Result<QuantumChannel<f64>> {
        let d = self.dim;
        if d == 0 {
            return Err(Error::Parse("dim must be positive".into()));
        }
        match self.repr {
            ReprTag::Kraus => {
                let ms: Vec<Rows> = parse(self.data.clone())?;
                let ks = ms.into_iter().map(|r| Operator::new(rows_matrix(r, d)?)).collect::<Result<Vec<_>>>()?;
                QuantumChannel::from_kraus(ks)
            }
            ReprTag::Choi => {
                let m = rows_matrix(parse(self.data.clone())?, d * d)?;
                QuantumChannel::from_choi(DensityMatrix::new(m)?)
            }
            ReprTag::Superop => QuantumChannel::from_superoperator(rows_matrix(parse(self.data.clone())?, d * d)?),
            ReprTag::Affine => {
                if d != 2 {
                    return Err(Error::NotAQubitChannel { dim: d });
                }
                let AffineData { a, b } = parse(self.data.clone())?;
                QuantumChannel::from_affine(Matrix3::from_fn(|i, j| a[i][j]), Vector3::from(b))
            }
        }
    }
}

pub fn channel_to_json(ch: &QuantumChannel<f64>) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ChannelJson::from_channel(ch)?)?)
}

pub fn channel_from_json(text: &str) -> Result<QuantumChannel<f64>> {
    let j: ChannelJson = serde_json::from_str(text)?;
    j.to_channel()
}
