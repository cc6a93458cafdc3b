//! Plain-text loop files: a `# degree=<n> j=<j>` header, then one `theta z`
//! line per node with θ as the continuous lift.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::BrokenLoop;
use crate::error::{Error, Result};
use crate::geodesic_flow::ConnectOptions;
use crate::scalar::{lit, to_f64, Real, V2};
use crate::surface::Metric;

/// Parsed loop file contents.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopText<T> {
    pub degree: i64,
    pub nodes: Vec<V2<T>>,
}

impl<T: Real> LoopText<T> {
    pub fn into_loop(self, metric: Arc<Metric<T>>, opts: ConnectOptions<T>) -> Result<BrokenLoop<T>> {
        BrokenLoop::new(metric, self.nodes, self.degree, opts)
    }
}

impl<T: Real> BrokenLoop<T> {
    pub fn to_text(&self) -> String {
        let mut s = format!("# degree={} j={}\n", self.degree(), self.len());
        for x in self.nodes() {
            let _ = writeln!(s, "{:?} {:?}", to_f64(x[0]), to_f64(x[1]));
        }
        s
    }
}

pub fn parse_loop_text<T: Real>(text: &str) -> Result<LoopText<T>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidLoop("empty loop file".into()))?;
    let body = header
        .strip_prefix('#')
        .ok_or_else(|| Error::InvalidLoop(format!("expected header, got {header:?}")))?;
    let mut degree = None;
    let mut j = None;
    for tok in body.split_whitespace() {
        if let Some(v) = tok.strip_prefix("degree=") {
            degree = Some(
                v.parse::<i64>()
                    .map_err(|e| Error::InvalidLoop(format!("degree: {e}")))?,
            );
        } else if let Some(v) = tok.strip_prefix("j=") {
            j = Some(v.parse::<usize>().map_err(|e| Error::InvalidLoop(format!("j: {e}")))?);
        }
    }
    let degree = degree.ok_or_else(|| Error::InvalidLoop("header lacks degree=".into()))?;
    let j = j.ok_or_else(|| Error::InvalidLoop("header lacks j=".into()))?;
    let mut nodes = Vec::with_capacity(j);
    for line in lines {
        if line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut num = || -> Result<T> {
            let tok = it
                .next()
                .ok_or_else(|| Error::InvalidLoop(format!("short line {line:?}")))?;
            let v: f64 = tok
                .parse()
                .map_err(|e| Error::InvalidLoop(format!("bad number {tok:?}: {e}")))?;
            Ok(lit(v))
        };
        let theta = num()?;
        let z = num()?;
        nodes.push([theta, z]);
    }
    if nodes.len() != j {
        return Err(Error::InvalidLoop(format!(
            "header says j={j}, found {} nodes",
            nodes.len()
        )));
    }
    Ok(LoopText { degree, nodes })
}

pub fn write_loop<T: Real>(l: &BrokenLoop<T>, path: &Path) -> Result<()> {
    std::fs::write(path, l.to_text())?;
    Ok(())
}

pub fn read_loop<T: Real>(path: &Path, metric: Arc<Metric<T>>, opts: ConnectOptions<T>) -> Result<BrokenLoop<T>> {
    let text = std::fs::read_to_string(path)?;
    parse_loop_text(&text)?.into_loop(metric, opts)
}
