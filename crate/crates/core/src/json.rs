//! JSON encodings.
//!
//! Real matrix: `{"rows": r, "cols": c, "data": [[..row..], ..]}`.
//! Complex matrix: `{"rows": r, "cols": c, "re": [[..]], "im": [[..]]}`.
//! Complex scalar lists: `[{"re": x, "im": y}, ..]`.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, RealMatrix};
use crate::state_space::StateSpace;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealMatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexMatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

fn rows_of(m: &RealMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn check_grid(grid: &[Vec<f64>], rows: usize, cols: usize, field: &str) -> std::result::Result<(), String> {
    if grid.len() != rows {
        return Err(format!("`{field}` has {} rows, header says {rows}", grid.len()));
    }
    if let Some((i, r)) = grid.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(format!("`{field}` row {i} has {} entries, header says {cols}", r.len()));
    }
    if grid.iter().flatten().any(|x| !x.is_finite()) {
        return Err(format!("`{field}` contains a non-finite entry"));
    }
    Ok(())
}

impl From<&RealMatrix> for RealMatrixJson {
    fn from(m: &RealMatrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: rows_of(m),
        }
    }
}

impl TryFrom<RealMatrixJson> for RealMatrix {
    type Error = String;
    fn try_from(j: RealMatrixJson) -> std::result::Result<Self, String> {
        check_grid(&j.data, j.rows, j.cols, "data")?;
        Ok(RealMatrix::from_fn(j.rows, j.cols, |r, c| j.data[r][c]))
    }
}

impl From<&ComplexMatrix> for ComplexMatrixJson {
    fn from(m: &ComplexMatrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            re: rows_of(&m.map(|z| z.re)),
            im: rows_of(&m.map(|z| z.im)),
        }
    }
}

impl TryFrom<ComplexMatrixJson> for ComplexMatrix {
    type Error = String;
    fn try_from(j: ComplexMatrixJson) -> std::result::Result<Self, String> {
        check_grid(&j.re, j.rows, j.cols, "re")?;
        check_grid(&j.im, j.rows, j.cols, "im")?;
        Ok(ComplexMatrix::from_fn(j.rows, j.cols, |r, c| Complex64::new(j.re[r][c], j.im[r][c])))
    }
}

/// `#[serde(with = "...")]` adapter for [`RealMatrix`].
pub mod real_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &RealMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        RealMatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<RealMatrix, D::Error> {
        RealMatrix::try_from(RealMatrixJson::deserialize(d)?).map_err(D::Error::custom)
    }
}

/// `#[serde(with = "...")]` adapter for [`ComplexMatrix`].
pub mod complex_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &ComplexMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        ComplexMatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ComplexMatrix, D::Error> {
        ComplexMatrix::try_from(ComplexMatrixJson::deserialize(d)?).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComplexValue {
    re: f64,
    im: f64,
}

/// `#[serde(with = "...")]` adapter for lists of complex scalars.
pub mod complex_list {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
        let list: Vec<ComplexValue> = v.iter().map(|z| ComplexValue { re: z.re, im: z.im }).collect();
        list.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Complex64>, D::Error> {
        let list = Vec::<ComplexValue>::deserialize(d)?;
        Ok(list.into_iter().map(|z| Complex64::new(z.re, z.im)).collect())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct StateSpaceJson {
    n: usize,
    m: usize,
    #[serde(with = "real_matrix")]
    A: RealMatrix,
    #[serde(with = "real_matrix")]
    B: RealMatrix,
    #[serde(with = "real_matrix")]
    C: RealMatrix,
    #[serde(with = "real_matrix")]
    D: RealMatrix,
}

impl Serialize for StateSpace {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::Error as _;
        let n = self.modes().map_err(S::Error::custom)?;
        let m = self.channels().map_err(S::Error::custom)?;
        StateSpaceJson {
            n,
            m,
            A: self.a().clone(),
            B: self.b().clone(),
            C: self.c().clone(),
            D: self.d().clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateSpace {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = StateSpaceJson::deserialize(d)?;
        if j.A.nrows() != 2 * j.n {
            return Err(D::Error::custom(format!(
                "`A` has {} rows but n = {} requires {}",
                j.A.nrows(),
                j.n,
                2 * j.n
            )));
        }
        if j.D.nrows() != 2 * j.m || j.D.ncols() != 2 * j.m {
            return Err(D::Error::custom(format!(
                "`D` is {}x{} but m = {} requires {}x{}",
                j.D.nrows(),
                j.D.ncols(),
                j.m,
                2 * j.m,
                2 * j.m
            )));
        }
        StateSpace::new(j.A, j.B, j.C, j.D).map_err(D::Error::custom)
    }
}

/// Kinds of input document recognised by their required top-level fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentKind {
    StateSpace,
    RationalDiagonal,
    PmParams,
    AcParams,
    RealMatrix,
}

impl DocumentKind {
    pub fn required_fields(self) -> &'static [&'static str] {
        match self {
            DocumentKind::StateSpace => &["n", "m", "A", "B", "C", "D"],
            DocumentKind::RationalDiagonal => &["entries"],
            DocumentKind::PmParams => &["D", "M", "R", "Theta"],
            DocumentKind::AcParams => &["S", "N1", "N2", "H1", "H2", "E1", "E2"],
            DocumentKind::RealMatrix => &["rows", "cols", "data"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DocumentKind::StateSpace => "state-space",
            DocumentKind::RationalDiagonal => "rational diagonal",
            DocumentKind::PmParams => "position-momentum parameters",
            DocumentKind::AcParams => "annihilation-creation parameters",
            DocumentKind::RealMatrix => "real matrix",
        }
    }

    const ALL: [DocumentKind; 5] = [
        DocumentKind::StateSpace,
        DocumentKind::RationalDiagonal,
        DocumentKind::PmParams,
        DocumentKind::AcParams,
        DocumentKind::RealMatrix,
    ];
}

/// Identify a document by required-field fingerprint. Exactly one kind must
/// match; ambiguous or unrecognised documents are rejected.
pub fn detect(value: &Value) -> Result<DocumentKind> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::InvalidArgument("input must be a JSON object".into()))?;
    let hits: Vec<DocumentKind> = DocumentKind::ALL
        .into_iter()
        .filter(|k| k.required_fields().iter().all(|f| obj.contains_key(*f)))
        .collect();
    match hits.as_slice() {
        [one] => Ok(*one),
        [] => Err(Error::InvalidArgument(format!(
            "unrecognised input document (fields: {})",
            obj.keys().cloned().collect::<Vec<_>>().join(", ")
        ))),
        many => Err(Error::InvalidArgument(format!(
            "ambiguous input document, matches: {}",
            many.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
        ))),
    }
}
