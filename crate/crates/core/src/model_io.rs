//! Plain-text serialization for factors and fitted models.
//!
//! Every file starts with a header line `<magic> <version> [kind]`, followed
//! by whitespace-separated `key value...` lines and numeric blocks. Floats are
//! written in Rust's shortest round-trip form, so reading a file back
//! reproduces the values bit for bit.
//!
//! Factor (`rpchol-factor 1`):
//! ```text
//! rpchol-factor 1
//! shape <N> <k>
//! pivots <s_1> ... <s_k>
//! <N rows of k values>
//! ```
//!
//! KRR model (`rpchol-model 1 krr`):
//! ```text
//! rpchol-model 1 krr
//! kernel <gaussian|laplace_l1> <bandwidth>
//! lambda <lambda>
//! dim <d>
//! pivots <k>
//! <k rows: index beta x_1 ... x_d>
//! ```
//!
//! Cluster model (`rpchol-model 1 cluster`):
//! ```text
//! rpchol-model 1 cluster
//! kernel <family> <bandwidth>
//! shape <N> <m> <c>
//! pivots <s_1> ... <s_k>
//! centroids
//! <c rows of m values>
//! embedding
//! <N rows: label v_1 ... v_m>
//! ```

use std::io::{BufRead, Write};
use std::str::{FromStr, SplitWhitespace};

use nalgebra::{DMatrix, DVector};

use crate::apps::{ClusterModel, KrrModel};
use crate::error::{Error, Result};
use crate::factor::NystromFactor;
use crate::oracle::{Dataset, KernelSpec};

pub const FORMAT_VERSION: u32 = 1;
const FACTOR_MAGIC: &str = "rpchol-factor";
const MODEL_MAGIC: &str = "rpchol-model";

fn join<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn write_factor<W: Write>(factor: &NystromFactor, mut w: W) -> Result<()> {
    let f = factor.factor();
    writeln!(w, "{FACTOR_MAGIC} {FORMAT_VERSION}")?;
    writeln!(w, "shape {} {}", f.nrows(), f.ncols())?;
    writeln!(w, "pivots {}", join(factor.pivots()))?;
    for i in 0..f.nrows() {
        writeln!(w, "{}", join(f.row(i).iter()))?;
    }
    Ok(())
}

pub fn read_factor<R: BufRead>(r: R) -> Result<NystromFactor> {
    let mut lines = Lines::new(r);
    lines.header(FACTOR_MAGIC, None)?;
    let mut shape = lines.keyed("shape")?;
    let (n, k): (usize, usize) = (shape.next_parsed()?, shape.next_parsed()?);
    let pivots: Vec<usize> = lines.keyed("pivots")?.rest_parsed()?;
    if pivots.len() != k {
        return Err(parse_err(format!("expected {k} pivots, found {}", pivots.len())));
    }
    let f = lines.matrix(n, k)?;
    NystromFactor::new(f, pivots)
}

pub fn write_krr_model<W: Write>(model: &KrrModel, mut w: W) -> Result<()> {
    writeln!(w, "{MODEL_MAGIC} {FORMAT_VERSION} krr")?;
    write_kernel(&mut w, &model.kernel)?;
    writeln!(w, "lambda {}", model.lambda)?;
    writeln!(w, "dim {}", model.pivot_points.dim())?;
    writeln!(w, "pivots {}", model.pivots.len())?;
    for (i, &s) in model.pivots.iter().enumerate() {
        writeln!(
            w,
            "{s} {} {}",
            model.coefficients[i],
            join(model.pivot_points.point(i))
        )?;
    }
    Ok(())
}

pub fn read_krr_model<R: BufRead>(r: R) -> Result<KrrModel> {
    let mut lines = Lines::new(r);
    lines.header(MODEL_MAGIC, Some("krr"))?;
    let kernel = lines.kernel()?;
    let lambda = lines.keyed("lambda")?.next_parsed()?;
    let d: usize = lines.keyed("dim")?.next_parsed()?;
    let k: usize = lines.keyed("pivots")?.next_parsed()?;
    let mut pivots = Vec::with_capacity(k);
    let mut beta = Vec::with_capacity(k);
    let mut points = Vec::with_capacity(k * d);
    for _ in 0..k {
        let mut t = lines.next_fields()?;
        pivots.push(t.next_parsed()?);
        beta.push(t.next_parsed()?);
        let x: Vec<f64> = t.rest_parsed()?;
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: x.len() });
        }
        points.extend(x);
    }
    let pivot_points = if k == 0 { Dataset::empty(d) } else { Dataset::from_flat(points, d)? };
    Ok(KrrModel { kernel, lambda, pivots, pivot_points, coefficients: DVector::from_vec(beta) })
}

/// Stored fields of a cluster model (the pivot trace is not persisted).
#[derive(Debug, Clone, PartialEq)]
pub struct StoredClusterModel {
    pub kernel: KernelSpec,
    pub pivots: Vec<usize>,
    pub embedding: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub centroids: DMatrix<f64>,
}

pub fn write_cluster_model<W: Write>(model: &ClusterModel, mut w: W) -> Result<()> {
    let (n, m) = model.embedding.shape();
    writeln!(w, "{MODEL_MAGIC} {FORMAT_VERSION} cluster")?;
    write_kernel(&mut w, &model.kernel)?;
    writeln!(w, "shape {n} {m} {}", model.centroids.nrows())?;
    writeln!(w, "pivots {}", join(&model.pivots))?;
    writeln!(w, "centroids")?;
    for a in 0..model.centroids.nrows() {
        writeln!(w, "{}", join(model.centroids.row(a).iter()))?;
    }
    writeln!(w, "embedding")?;
    for i in 0..n {
        writeln!(w, "{} {}", model.labels[i], join(model.embedding.row(i).iter()))?;
    }
    Ok(())
}

pub fn read_cluster_model<R: BufRead>(r: R) -> Result<StoredClusterModel> {
    let mut lines = Lines::new(r);
    lines.header(MODEL_MAGIC, Some("cluster"))?;
    let kernel = lines.kernel()?;
    let mut shape = lines.keyed("shape")?;
    let (n, m, c): (usize, usize, usize) =
        (shape.next_parsed()?, shape.next_parsed()?, shape.next_parsed()?);
    let pivots = lines.keyed("pivots")?.rest_parsed()?;
    lines.keyed("centroids")?;
    let centroids = lines.matrix(c, m)?;
    lines.keyed("embedding")?;
    let mut labels = Vec::with_capacity(n);
    let mut emb = Vec::with_capacity(n * m);
    for _ in 0..n {
        let mut t = lines.next_fields()?;
        labels.push(t.next_parsed()?);
        let row: Vec<f64> = t.rest_parsed()?;
        if row.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: row.len() });
        }
        emb.extend(row);
    }
    let embedding = DMatrix::from_row_slice(n, m, &emb);
    Ok(StoredClusterModel { kernel, pivots, embedding, labels, centroids })
}

fn write_kernel<W: Write>(w: &mut W, k: &KernelSpec) -> Result<()> {
    writeln!(w, "kernel {} {}", k.family, k.bandwidth)?;
    Ok(())
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

struct Fields<'a> {
    line: usize,
    it: SplitWhitespace<'a>,
}

impl Fields<'_> {
    fn next_parsed<T: FromStr>(&mut self) -> Result<T> {
        let tok = self.it.next().ok_or_else(|| parse_err(format!("line {}: missing field", self.line)))?;
        tok.parse()
            .map_err(|_| parse_err(format!("line {}: cannot parse {tok:?}", self.line)))
    }

    fn rest_parsed<T: FromStr>(&mut self) -> Result<Vec<T>> {
        let line = self.line;
        self.it
            .by_ref()
            .map(|tok| tok.parse().map_err(|_| parse_err(format!("line {line}: cannot parse {tok:?}"))))
            .collect()
    }
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line_no: usize,
    current: String,
}

impl<R: BufRead> Lines<R> {
    fn new(r: R) -> Self {
        Self { inner: r.lines(), line_no: 0, current: String::new() }
    }

    fn next_fields(&mut self) -> Result<Fields<'_>> {
        loop {
            let line = self
                .inner
                .next()
                .ok_or_else(|| parse_err(format!("unexpected end of file after line {}", self.line_no)))??;
            self.line_no += 1;
            if !line.trim().is_empty() {
                self.current = line;
                return Ok(Fields { line: self.line_no, it: self.current.split_whitespace() });
            }
        }
    }

    fn keyed(&mut self, key: &str) -> Result<Fields<'_>> {
        let mut f = self.next_fields()?;
        let line = f.line;
        match f.it.next() {
            Some(k) if k == key => Ok(f),
            other => Err(parse_err(format!("line {line}: expected {key:?}, found {other:?}"))),
        }
    }

    fn header(&mut self, magic: &str, kind: Option<&str>) -> Result<()> {
        let mut f = self.next_fields()?;
        if f.it.next() != Some(magic) {
            return Err(parse_err(format!("not a {magic} file")));
        }
        let version: u32 = f.next_parsed()?;
        if version != FORMAT_VERSION {
            return Err(parse_err(format!("unsupported {magic} version {version}")));
        }
        if let Some(kind) = kind {
            let found = f.it.next();
            if found != Some(kind) {
                return Err(parse_err(format!("expected a {kind} model, found {found:?}")));
            }
        }
        Ok(())
    }

    fn kernel(&mut self) -> Result<KernelSpec> {
        let mut f = self.keyed("kernel")?;
        let family = f.next_parsed()?;
        let bandwidth = f.next_parsed()?;
        KernelSpec::new(family, bandwidth)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let row: Vec<f64> = self.next_fields()?.rest_parsed()?;
            if row.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: row.len() });
            }
            data.extend(row);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }
}
