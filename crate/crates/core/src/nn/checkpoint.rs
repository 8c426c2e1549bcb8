//! Plain-text network checkpoints.
//!
//! ```text
//! fdmap-net 1
//! mode unsupervised            | mode supervised <classes>
//! dropout <rate>
//! seed <u64>
//! layers <count>
//! layer <inputs> <outputs> <activation>
//! w <outputs floats>           (repeated <inputs> times, one row per input)
//! b <outputs floats>
//! ...                          (one layer/w/b block per layer)
//! end
//! ```
//!
//! Floats are written in Rust's shortest round-trip scientific notation, so
//! a save/load cycle reproduces the network bit for bit. Blank lines and
//! lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::activation::Activation;
use super::net::{DiscriminatorNet, Layer, NetMode};
use crate::error::{Error, Result};

pub const MAGIC: &str = "fdmap-net 1";

pub fn to_text(net: &DiscriminatorNet) -> String {
    let mut out = String::new();
    let floats = |vals: &mut dyn Iterator<Item = &f64>| {
        vals.map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ")
    };
    writeln!(out, "{MAGIC}").unwrap();
    match net.mode() {
        NetMode::Unsupervised => writeln!(out, "mode unsupervised").unwrap(),
        NetMode::Supervised { classes } => writeln!(out, "mode supervised {classes}").unwrap(),
    }
    writeln!(out, "dropout {:e}", net.dropout()).unwrap();
    writeln!(out, "seed {}", net.seed()).unwrap();
    writeln!(out, "layers {}", net.layers().len()).unwrap();
    for layer in net.layers() {
        writeln!(out, "layer {} {} {}", layer.input_dim(), layer.output_dim(), layer.activation).unwrap();
        for row in layer.weights.rows() {
            writeln!(out, "w {}", floats(&mut row.iter())).unwrap();
        }
        writeln!(out, "b {}", floats(&mut layer.bias.iter())).unwrap();
    }
    writeln!(out, "end").unwrap();
    out
}

struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)>> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.trim()))
                .filter(|(_, l)| !l.is_empty() && !l.starts_with('#')),
        );
        Lines { inner: it.peekable(), last: 0 }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Checkpoint { line: self.last, msg: msg.into() }
    }

    /// Next line, split after the expected keyword.
    fn expect(&mut self, keyword: &str) -> Result<Vec<&'a str>> {
        let (n, line) = self
            .inner
            .next()
            .ok_or_else(|| Error::Checkpoint { line: self.last + 1, msg: format!("unexpected end of file, expected `{keyword}`") })?;
        self.last = n;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some(k) if k == keyword => Ok(parts.collect()),
            other => Err(self.err(format!("expected `{keyword}`, found `{}`", other.unwrap_or("")))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("cannot parse {what} from `{s}`")))
    }

    fn single<T: std::str::FromStr>(&mut self, keyword: &str) -> Result<T> {
        let parts = self.expect(keyword)?;
        if parts.len() != 1 {
            return Err(self.err(format!("`{keyword}` takes one value")));
        }
        self.parse(parts[0], keyword)
    }

    fn floats(&mut self, keyword: &str, count: usize) -> Result<Vec<f64>> {
        let parts = self.expect(keyword)?;
        if parts.len() != count {
            return Err(self.err(format!("expected {count} values, found {}", parts.len())));
        }
        parts.iter().map(|p| self.parse::<f64>(p, "float")).collect()
    }
}

pub fn from_text(text: &str) -> Result<DiscriminatorNet> {
    let mut lines = Lines::new(text);
    let header = lines
        .inner
        .next()
        .ok_or(Error::Checkpoint { line: 1, msg: "empty checkpoint".into() })?;
    lines.last = header.0;
    if header.1 != MAGIC {
        return Err(lines.err(format!("bad header `{}` (expected `{MAGIC}`)", header.1)));
    }
    let mode_parts = lines.expect("mode")?;
    let mode = match mode_parts.as_slice() {
        ["unsupervised"] => NetMode::Unsupervised,
        ["supervised", c] => NetMode::Supervised { classes: lines.parse(c, "class count")? },
        _ => return Err(lines.err("mode must be `unsupervised` or `supervised <classes>`")),
    };
    let dropout: f64 = lines.single("dropout")?;
    let seed: u64 = lines.single("seed")?;
    let count: usize = lines.single("layers")?;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let head = lines.expect("layer")?;
        if head.len() != 3 {
            return Err(lines.err("layer line needs inputs, outputs and activation"));
        }
        let inputs: usize = lines.parse(head[0], "input count")?;
        let outputs: usize = lines.parse(head[1], "output count")?;
        let activation: Activation = head[2].parse().map_err(|e: Error| lines.err(e.to_string()))?;
        let mut weights = Vec::with_capacity(inputs * outputs);
        for _ in 0..inputs {
            weights.extend(lines.floats("w", outputs)?);
        }
        let bias = lines.floats("b", outputs)?;
        layers.push(Layer {
            weights: Array2::from_shape_vec((inputs, outputs), weights).expect("row lengths checked"),
            bias: Array1::from(bias),
            activation,
        });
    }
    lines.expect("end")?;
    if let Some((n, l)) = lines.inner.next() {
        return Err(Error::Checkpoint { line: n, msg: format!("trailing content `{l}`") });
    }
    DiscriminatorNet::from_layers(layers, mode, dropout, seed)
}

pub fn save(net: &DiscriminatorNet, path: &Path) -> Result<()> {
    std::fs::write(path, to_text(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<DiscriminatorNet> {
    from_text(&std::fs::read_to_string(path)?)
}
