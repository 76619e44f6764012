use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Outcomes, binary treatments and covariates, with covariates stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    w: Vec<bool>,
    x: Vec<f64>,
    dim: usize,
}

impl Dataset {
    pub fn new(y: Vec<f64>, w: Vec<bool>, x: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        let n = y.len();
        if w.len() != n || x.len() != n * dim {
            return Err(Error::Domain(format!(
                "inconsistent lengths: y={}, w={}, x={} with d={dim}",
                n,
                w.len(),
                x.len()
            )));
        }
        if let Some(p) = y.iter().chain(&x).position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at flat position {p}")));
        }
        let n1 = w.iter().filter(|&&t| t).count();
        if n1 == 0 || n1 == n {
            return Err(Error::InsufficientGroup {
                needed: 1,
                n0: n - n1,
                n1,
            });
        }
        Ok(Self { y, w, x, dim })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n1(&self) -> usize {
        self.w.iter().filter(|&&t| t).count()
    }

    pub fn n0(&self) -> usize {
        self.n() - self.n1()
    }

    pub fn p_hat(&self) -> f64 {
        self.n1() as f64 / self.n() as f64
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn w(&self) -> &[bool] {
        &self.w
    }

    pub fn treated(&self, i: usize) -> bool {
        self.w[i]
    }

    /// Row-major covariate matrix.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    /// Row indices of treatment group `w`.
    pub fn group(&self, w: bool) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.w[i] == w).collect()
    }

    pub fn with_outcomes(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(y, self.w.clone(), self.x.clone(), self.dim)
    }

    pub fn with_treatments(&self, w: Vec<bool>) -> Result<Self> {
        Self::new(self.y.clone(), w, self.x.clone(), self.dim)
    }

    pub fn with_covariates(&self, x: Vec<f64>) -> Result<Self> {
        Self::new(self.y.clone(), self.w.clone(), x, self.dim)
    }

    /// Reads `Y,W,X_1,...,X_d` with a header row. `W` must be `0` or `1`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
            .clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < 3 || cols[0] != "Y" || cols[1] != "W" {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header must be Y,W,X_1,...,X_d; got {}", cols.join(",")),
            });
        }
        let dim = cols.len() - 2;
        for (c, name) in cols[2..].iter().enumerate() {
            if *name != format!("X_{}", c + 1) {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected column X_{} but found {name}", c + 1),
                });
            }
        }
        let (mut y, mut w, mut x) = (Vec::new(), Vec::new(), Vec::new());
        for (r, rec) in rdr.records().enumerate() {
            let line = r + 2;
            let rec = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            if rec.len() != cols.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, found {}", cols.len(), rec.len()),
                });
            }
            let num = |s: &str, name: &str| -> Result<f64> {
                let v: f64 = s.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("column {name}: cannot parse {s:?} as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse { line, msg: format!("column {name}: non-finite value") });
                }
                Ok(v)
            };
            y.push(num(&rec[0], "Y")?);
            w.push(match &rec[1] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("column W must be 0 or 1, found {other:?}"),
                    })
                }
            });
            for c in 0..dim {
                x.push(num(&rec[c + 2], cols[c + 2])?);
            }
        }
        if y.is_empty() {
            return Err(Error::Parse { line: 2, msg: "no data rows".into() });
        }
        Self::new(y, w, x, dim)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(std::io::BufReader::new(f))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("Y,W");
        for c in 1..=self.dim {
            s.push_str(&format!(",X_{c}"));
        }
        s.push('\n');
        for i in 0..self.n() {
            s.push_str(&format!("{},{}", self.y[i], u8::from(self.w[i])));
            for v in self.row(i) {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}
