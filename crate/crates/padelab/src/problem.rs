//! The linear autonomous ODE `x' = Ax + b`, `x(0) = x0`, on `[0, T]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64};

#[derive(Clone, Debug)]
pub struct OdeProblem {
    pub dim: usize,
    pub matrix_a: CMat,
    pub vec_b: CVec,
    pub vec_x0: CVec,
    pub horizon: f64,
}

impl OdeProblem {
    pub fn new(matrix_a: CMat, vec_b: CVec, vec_x0: CVec, horizon: f64) -> Result<Self> {
        let dim = matrix_a.nrows();
        if dim == 0 || !matrix_a.is_square() {
            return Err(Error::Shape(format!("A must be square and nonempty, got {:?}", matrix_a.shape())));
        }
        if vec_b.len() != dim || vec_x0.len() != dim {
            return Err(Error::Shape(format!(
                "b has {} and x0 has {} entries, expected {dim}",
                vec_b.len(),
                vec_x0.len()
            )));
        }
        let finite = |v: &CVec| v.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !linalg::all_finite(&matrix_a) || !finite(&vec_b) || !finite(&vec_x0) {
            return Err(Error::Input("problem data must be finite".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Input(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { dim, matrix_a, vec_b, vec_x0, horizon })
    }

    /// `tridiag(1, −2, 1)` with `b = x0 = 1`, the first experiment's instance.
    pub fn tridiagonal(n: usize, horizon: f64) -> Result<Self> {
        let a = CMat::from_fn(n, n, |i, j| {
            if i == j {
                c(-2.0)
            } else if i.abs_diff(j) == 1 {
                c(1.0)
            } else {
                c(0.0)
            }
        });
        let ones = CVec::from_element(n, c(1.0));
        Self::new(a, ones.clone(), ones, horizon)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: ProblemFile = serde_json::from_str(s)?;
        raw.into_problem()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let cell = |z: &C64| Entry::Complex { re: z.re, im: z.im };
        let file = ProblemFile {
            n: self.dim,
            a: (0..self.dim).map(|i| (0..self.dim).map(|j| cell(&self.matrix_a[(i, j)])).collect()).collect(),
            b: self.vec_b.iter().map(cell).collect(),
            x0: self.vec_x0.iter().map(cell).collect(),
            horizon: self.horizon,
        };
        serde_json::to_string_pretty(&file).expect("problem serialises")
    }
}

/// A JSON entry is either `{"re": .., "im": ..}` or a bare real number.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Complex {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    Real(f64),
}

impl Entry {
    fn value(&self) -> C64 {
        match *self {
            Entry::Complex { re, im } => C64::new(re, im),
            Entry::Real(re) => c(re),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ProblemFile {
    n: usize,
    a: Vec<Vec<Entry>>,
    b: Vec<Entry>,
    x0: Vec<Entry>,
    #[serde(rename = "T")]
    horizon: f64,
}

impl ProblemFile {
    fn into_problem(self) -> Result<OdeProblem> {
        let n = self.n;
        if self.a.len() != n || self.a.iter().any(|row| row.len() != n) {
            return Err(Error::Shape(format!("matrix a must be {n}x{n}")));
        }
        let a = CMat::from_fn(n, n, |i, j| self.a[i][j].value());
        let b = CVec::from_iterator(self.b.len(), self.b.iter().map(Entry::value));
        let x0 = CVec::from_iterator(self.x0.len(), self.x0.iter().map(Entry::value));
        OdeProblem::new(a, b, x0, self.horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let p = OdeProblem::tridiagonal(3, 2.5).unwrap();
        let q = OdeProblem::from_json_str(&p.to_json_string()).unwrap();
        assert_eq!(p.matrix_a, q.matrix_a);
        assert_eq!(p.vec_b, q.vec_b);
        assert_eq!(q.horizon, 2.5);
    }

    #[test]
    fn bare_reals_accepted() {
        let p = OdeProblem::from_json_str(r#"{"n":1,"a":[[-1]],"b":[0],"x0":[{"re":1}],"T":1}"#).unwrap();
        assert_eq!(p.matrix_a[(0, 0)], c(-1.0));
    }

    #[test]
    fn rejects_bad_data() {
        assert!(OdeProblem::from_json_str(r#"{"n":2,"a":[[1]],"b":[0],"x0":[1],"T":1}"#).is_err());
        let a = CMat::zeros(1, 1);
        let v = CVec::zeros(1);
        assert!(OdeProblem::new(a.clone(), v.clone(), v.clone(), 0.0).is_err());
        assert!(OdeProblem::new(a, CVec::from_element(1, c(f64::NAN)), v, 1.0).is_err());
    }
}
