//! Row embeddings and their exchange file.
//!
//! ```text
//! EMBEDV1,n=<n>,d_e=<d_e>
//! {"n":<n>,"d_e":<d_e>,"source_model":"...","target_column":"...","folds":10,"seed":3}
//! <n lines of d_e comma-separated reals>
//! ```

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::linalg::dot;
use crate::nn::Matrix;
use crate::tabular::OneHotMatrix;

pub const HEADER_TAG: &str = "EMBEDV1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub n: usize,
    pub d_e: usize,
    pub source_model: String,
    /// Column used as the label when the embeddings were produced.
    #[serde(default)]
    pub target_column: Option<String>,
    #[serde(default)]
    pub folds: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Matrix,
    meta: EmbeddingMeta,
}

impl EmbeddingMatrix {
    pub fn new(values: Matrix, meta: EmbeddingMeta) -> Result<Self> {
        if meta.n != values.rows() || meta.d_e != values.cols() {
            return Err(Error::Format(format!(
                "meta declares {}x{}, values are {}x{}",
                meta.n,
                meta.d_e,
                values.rows(),
                values.cols()
            )));
        }
        for r in 0..values.rows() {
            if let Some(c) = values.row(r).iter().position(|v| !v.is_finite()) {
                return Err(Error::Value { row: r + 1, col: c + 1 });
            }
        }
        Ok(EmbeddingMatrix { values, meta })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn meta(&self) -> &EmbeddingMeta {
        &self.meta
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<embeddings>", e);
        writeln!(out, "{HEADER_TAG},n={},d_e={}", self.n(), self.dim()).map_err(io)?;
        serde_json::to_writer(&mut out, &self.meta)?;
        writeln!(out).map_err(io)?;
        for r in 0..self.n() {
            let line: Vec<String> = self.values.row(r).iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", line.join(",")).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(file))
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let mut next = || -> Result<Option<String>> {
            lines
                .next()
                .transpose()
                .map_err(|e| Error::io("<embeddings>", e))
        };
        let header = next()?.ok_or_else(|| Error::Format("missing EMBEDV1 header".into()))?;
        let (n, d_e) = parse_header(header.trim())?;
        let meta_line = next()?.ok_or_else(|| Error::Format("missing meta line".into()))?;
        let meta: EmbeddingMeta = serde_json::from_str(&meta_line)
            .map_err(|e| Error::Format(format!("meta line: {e}")))?;
        if meta.n != n || meta.d_e != d_e {
            return Err(Error::Format(format!(
                "header declares n={n}, d_e={d_e} but meta declares n={}, d_e={}",
                meta.n, meta.d_e
            )));
        }
        let mut data = Vec::with_capacity(n * d_e);
        let mut rows = 0;
        while let Some(line) = next()? {
            if line.trim().is_empty() {
                continue;
            }
            rows += 1;
            if rows > n {
                return Err(Error::Format(format!("more than the declared {n} rows")));
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d_e {
                return Err(Error::Format(format!(
                    "row {rows} has {} values, expected {d_e}",
                    fields.len()
                )));
            }
            for (c, field) in fields.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Format(format!("row {rows}, column {}: {field:?} is not a number", c + 1))
                })?;
                if !v.is_finite() {
                    return Err(Error::Value { row: rows, col: c + 1 });
                }
                data.push(v);
            }
        }
        if rows != n {
            return Err(Error::Format(format!("declared {n} rows, found {rows}")));
        }
        EmbeddingMatrix::new(Matrix::from_vec(n, d_e, data), meta)
    }
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let bad = || Error::Format(format!("bad header {line:?}"));
    let mut parts = line.split(',');
    if parts.next() != Some(HEADER_TAG) {
        return Err(bad());
    }
    let mut field = |key: &str| -> Result<usize> {
        parts
            .next()
            .and_then(|p| p.strip_prefix(key))
            .and_then(|v| v.parse().ok())
            .ok_or_else(bad)
    };
    let n = field("n=")?;
    let d_e = field("d_e=")?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((n, d_e))
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    EmbeddingMatrix::read(std::io::BufReader::new(file))
}

pub const SYNTHETIC_SOURCE: &str = "synthetic-random-projection";

/// Seeded stand-in for foundation-model embeddings: a fixed Gaussian random
/// projection of each one-hot row, squashed by `tanh`.
pub fn synthetic_embeddings(data: &OneHotMatrix, d_e: usize, seed: u64) -> Result<EmbeddingMatrix> {
    if d_e == 0 {
        return Err(Error::InvalidConfig("d_e must be >= 1".into()));
    }
    let width = data.width();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let projection: Vec<f64> = (0..d_e * width).map(|_| rng.sample(StandardNormal)).collect();
    let scale = 1.0 / (data.schema().n_columns() as f64).sqrt();
    let mut values = Matrix::zeros(data.n_rows(), d_e);
    for r in 0..data.n_rows() {
        let x = data.row(r);
        for (k, v) in values.row_mut(r).iter_mut().enumerate() {
            *v = (scale * dot(&projection[k * width..(k + 1) * width], x)).tanh();
        }
    }
    EmbeddingMatrix::new(
        values,
        EmbeddingMeta {
            n: data.n_rows(),
            d_e,
            source_model: SYNTHETIC_SOURCE.into(),
            target_column: None,
            folds: None,
            seed: Some(seed),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(header: &str, meta: &str, rows: &[&str]) -> String {
        let mut s = format!("{header}\n{meta}\n");
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    const META_3X4: &str = r#"{"n":3,"d_e":4,"source_model":"tabpfn","target_column":"g7","folds":10,"seed":3}"#;

    #[test]
    fn parses_declared_shape() {
        let text = file(
            "EMBEDV1,n=3,d_e=4",
            META_3X4,
            &["1,2,3,4", "0.5,-1e-3,2.5E2,0", "9,8,7,6"],
        );
        let e = EmbeddingMatrix::read(text.as_bytes()).unwrap();
        assert_eq!((e.n(), e.dim()), (3, 4));
        assert_eq!(e.values().row(1), [0.5, -0.001, 250.0, 0.0]);
        assert_eq!(e.meta().target_column.as_deref(), Some("g7"));
    }

    #[test]
    fn short_body_is_a_format_error() {
        let text = file("EMBEDV1,n=3,d_e=4", META_3X4, &["1,2,3,4", "1,2,3,4"]);
        assert!(matches!(EmbeddingMatrix::read(text.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn nan_is_a_value_error() {
        let text = file("EMBEDV1,n=3,d_e=4", META_3X4, &["1,2,3,4", "1,NaN,3,4", "1,2,3,4"]);
        match EmbeddingMatrix::read(text.as_bytes()) {
            Err(Error::Value { row, col }) => assert_eq!((row, col), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_meta_disagreement() {
        let text = file("EMBEDV1,n=2,d_e=4", META_3X4, &["1,2,3,4", "1,2,3,4"]);
        assert!(matches!(EmbeddingMatrix::read(text.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn write_then_read() {
        let text = file("EMBEDV1,n=3,d_e=4", META_3X4, &["0.1,2,3,4", "1,2,3,4", "1,2,3,1e-300"]);
        let e = EmbeddingMatrix::read(text.as_bytes()).unwrap();
        let mut buf = Vec::new();
        e.write(&mut buf).unwrap();
        assert_eq!(EmbeddingMatrix::read(buf.as_slice()).unwrap(), e);
    }
}
