//! Plain-text model container.
//!
//! ```text
//! mci-prognosis-autoencoder 1
//! input_dim 5
//! hidden_dim 5
//! seed 42
//! conditioning unconditioned
//! tensor encoder.0.w_f 5 10
//! <values, column-major, space separated>
//! ...
//! ```
//!
//! Values use shortest round-trip formatting, so a write/read cycle is
//! bit-exact.

use std::io::{BufRead, Write};

use super::{tensor_names, AutoencoderModel, Conditioning, LossRecord};
use crate::neural::ParamSet;
use crate::{Error, Result};

const MAGIC: &str = "mci-prognosis-autoencoder";
const VERSION: u32 = 1;

fn tensor_shapes(model: &AutoencoderModel) -> Vec<(usize, usize)> {
    let mut shapes = Vec::new();
    for stack in [&model.encoder, &model.decoder] {
        for l in stack.layers() {
            let w = l.w_f.shape();
            shapes.extend([w; 4]);
            shapes.extend([(l.hidden_dim(), 1); 4]);
        }
    }
    shapes.push(model.projection.shape());
    shapes.push((model.projection_bias.len(), 1));
    shapes
}

pub fn write_model<W: Write>(model: &AutoencoderModel, mut out: W) -> Result<()> {
    let io = |e| Error::io("<model>", e);
    writeln!(out, "{MAGIC} {VERSION}").map_err(io)?;
    writeln!(out, "input_dim {}", model.input_dim()).map_err(io)?;
    writeln!(out, "hidden_dim {}", model.hidden_dim()).map_err(io)?;
    writeln!(out, "seed {}", model.seed).map_err(io)?;
    writeln!(out, "conditioning {}", model.conditioning).map_err(io)?;
    for ((name, (rows, cols)), values) in tensor_names(model)
        .into_iter()
        .zip(tensor_shapes(model))
        .zip(model.tensors())
    {
        writeln!(out, "tensor {name} {rows} {cols}").map_err(io)?;
        let line: Vec<String> = values.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", line.join(" ")).map_err(io)?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        self.line_no += 1;
        match self.inner.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(Error::io("<model>", e)),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::ModelFormat {
            line: self.line_no,
            msg: msg.into(),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<String> {
        let line = self.next()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            _ => Err(self.err(format!("expected `{key}`"))),
        }
    }

    fn keyed_num<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.keyed(key)?;
        v.parse().map_err(|_| self.err(format!("bad value for `{key}`: {v}")))
    }
}

pub fn read_model<R: BufRead>(input: R) -> Result<AutoencoderModel> {
    let mut lines = Lines {
        inner: input.lines(),
        line_no: 0,
    };
    let header = lines.next()?;
    if header != format!("{MAGIC} {VERSION}") {
        return Err(lines.err(format!("unsupported header `{header}`")));
    }
    let input_dim: usize = lines.keyed_num("input_dim")?;
    let hidden_dim: usize = lines.keyed_num("hidden_dim")?;
    let seed: u64 = lines.keyed_num("seed")?;
    let conditioning: Conditioning = lines.keyed("conditioning")?.parse().map_err(|_| lines.err("bad conditioning"))?;
    if input_dim == 0 || hidden_dim == 0 {
        return Err(lines.err("dimensions must be positive"));
    }

    let mut model = AutoencoderModel::zeros(input_dim, hidden_dim);
    model.seed = seed;
    model.conditioning = conditioning;
    let names = tensor_names(&model);
    let shapes = tensor_shapes(&model);
    let mut tensors: Vec<Vec<f64>> = Vec::with_capacity(names.len());
    for (name, (rows, cols)) in names.iter().zip(&shapes) {
        let head = lines.next()?;
        if head != format!("tensor {name} {rows} {cols}") {
            return Err(lines.err(format!("expected `tensor {name} {rows} {cols}`, found `{head}`")));
        }
        let body = lines.next()?;
        let values: Vec<f64> = body
            .split_ascii_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| lines.err(format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        if values.len() != rows * cols {
            return Err(lines.err(format!("{name}: expected {} values, found {}", rows * cols, values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(lines.err(format!("{name}: non-finite value")));
        }
        tensors.push(values);
    }
    if let Some(Ok(extra)) = lines.inner.next() {
        if !extra.trim().is_empty() {
            return Err(lines.err("trailing content"));
        }
    }

    for (dst, src) in model.tensors_mut().into_iter().zip(&tensors) {
        dst.copy_from_slice(src);
    }
    Ok(model)
}

/// `iteration,lr,loss` rows.
pub fn write_loss_history<W: Write>(history: &[LossRecord], mut out: W) -> Result<()> {
    let io = |e| Error::io("<loss history>", e);
    writeln!(out, "iteration,lr,loss").map_err(io)?;
    for r in history {
        writeln!(out, "{},{},{}", r.iteration, r.lr, r.loss).map_err(io)?;
    }
    Ok(())
}
