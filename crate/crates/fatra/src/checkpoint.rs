//! Plain-text model checkpoints.
//!
//! ```text
//! fatra-checkpoint 1
//! backbone gcn
//! dims <input> <hidden> <embed> <classifier> <discriminator> <generator>
//! tau <τ>
//! lr <encoder> <discriminator> <classifier> <generator>
//! param <name> <rows> <cols> <adam-step>
//! <rows lines of values>     weights, row-major
//! <rows lines of values>     Adam first moment
//! <rows lines of values>     Adam second moment
//! ...one `param` block per parameter...
//! ```
//!
//! Numbers use shortest round-trip formatting, so save → load is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fatra_core::model::{Dims, LearningRates};
use fatra_core::ndmath::{AdamState, Matrix};
use fatra_core::{Backbone, FatraModel};

use crate::error::{io_err, CliError, Result};

const MAGIC: &str = "fatra-checkpoint 1";

fn push_rows(out: &mut String, m: &Matrix) {
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

pub fn to_text(model: &FatraModel) -> String {
    let mut out = String::new();
    let d = model.dims;
    let backbone = match model.backbone {
        Backbone::Gcn => "gcn",
        Backbone::Mlp => "mlp",
    };
    let _ = writeln!(out, "{MAGIC}\nbackbone {backbone}");
    let _ = writeln!(out, "dims {} {} {} {} {} {}", d.input, d.hidden, d.embed, d.classifier_hidden, d.discriminator_hidden, d.generator_hidden);
    let _ = writeln!(out, "tau {}", model.tau);
    let lr = model.lr;
    let _ = writeln!(out, "lr {} {} {} {}", lr.encoder, lr.discriminator, lr.classifier, lr.generator);
    for (name, p) in model.named_params() {
        let (rows, cols) = p.value.shape();
        let _ = writeln!(out, "param {name} {rows} {cols} {}", p.adam.step());
        push_rows(&mut out, &p.value);
        push_rows(&mut out, p.adam.first_moment());
        push_rows(&mut out, p.adam.second_moment());
    }
    out
}

pub fn save(model: &FatraModel, path: &Path) -> Result<()> {
    fs::write(path, to_text(model)).map_err(io_err(path))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    path: &'a Path,
}

impl<'a> Lines<'a> {
    fn err(&self, line: usize, message: impl std::fmt::Display) -> CliError {
        CliError::Checkpoint { path: self.path.to_path_buf(), message: format!("line {}: {message}", line + 1) }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .ok_or_else(|| CliError::Checkpoint { path: self.path.to_path_buf(), message: "unexpected end of file".into() })
    }

    /// Next line, which must start with `key`; returns the remaining fields.
    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (i, line) = self.next()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(i, format!("expected `{key}`")));
        }
        Ok((i, parts.collect()))
    }

    fn numbers<T: std::str::FromStr>(&self, i: usize, fields: &[&str], count: usize) -> Result<Vec<T>> {
        if fields.len() != count {
            return Err(self.err(i, format!("expected {count} fields, found {}", fields.len())));
        }
        fields.iter().map(|f| f.parse().map_err(|_| self.err(i, format!("bad number `{f}`")))).collect()
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (i, line) = self.next()?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            data.extend(self.numbers::<f64>(i, &fields, cols)?);
        }
        Ok(Matrix::from_vec(rows, cols, data)?)
    }
}

pub fn from_text(text: &str, path: &Path) -> Result<FatraModel> {
    let mut lines = Lines { inner: text.lines().enumerate(), path };
    let (i, magic) = lines.next()?;
    if magic.trim() != MAGIC {
        return Err(lines.err(i, "not a checkpoint"));
    }
    let (i, f) = lines.keyed("backbone")?;
    let backbone = match f.as_slice() {
        ["gcn"] => Backbone::Gcn,
        ["mlp"] => Backbone::Mlp,
        _ => return Err(lines.err(i, "backbone must be gcn or mlp")),
    };
    let (i, f) = lines.keyed("dims")?;
    let d: Vec<usize> = lines.numbers(i, &f, 6)?;
    let dims = Dims { input: d[0], hidden: d[1], embed: d[2], classifier_hidden: d[3], discriminator_hidden: d[4], generator_hidden: d[5] };
    let (i, f) = lines.keyed("tau")?;
    let tau = lines.numbers::<f64>(i, &f, 1)?[0];
    let (i, f) = lines.keyed("lr")?;
    let l: Vec<f64> = lines.numbers(i, &f, 4)?;
    let lr = LearningRates { encoder: l[0], discriminator: l[1], classifier: l[2], generator: l[3] };

    let mut model = FatraModel::new(dims, backbone, lr, tau, 0);
    let count = model.named_params().len();
    let mut loaded = Vec::with_capacity(count);
    for _ in 0..count {
        let (i, f) = lines.keyed("param")?;
        if f.len() != 4 {
            return Err(lines.err(i, "expected `param <name> <rows> <cols> <step>`"));
        }
        let name = f[0].to_string();
        let shape: Vec<usize> = lines.numbers(i, &f[1..3], 2)?;
        let step: u64 = lines.numbers(i, &f[3..], 1)?[0];
        let value = lines.matrix(shape[0], shape[1])?;
        let m = lines.matrix(shape[0], shape[1])?;
        let v = lines.matrix(shape[0], shape[1])?;
        loaded.push((i, name, value, AdamState::from_parts(m, v, step)?));
    }
    for (i, name, value, adam) in loaded {
        let mut params = model.named_params_mut();
        let slot = params.iter_mut().find(|(n, _)| *n == name).ok_or_else(|| lines.err(i, format!("unknown parameter `{name}`")))?;
        if slot.1.value.shape() != value.shape() {
            return Err(lines.err(i, format!("parameter `{name}` has shape {:?}, expected {:?}", value.shape(), slot.1.value.shape())));
        }
        slot.1.value = value;
        slot.1.adam = adam;
    }
    Ok(model)
}

pub fn load(path: &Path) -> Result<FatraModel> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    from_text(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let model = FatraModel::new(Dims::new(5), Backbone::Mlp, LearningRates::default(), 0.25, 11);
        let text = to_text(&model);
        let back = from_text(&text, Path::new("mem")).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let model = FatraModel::new(Dims::new(2), Backbone::Gcn, LearningRates::default(), 1.0, 1);
        let text = to_text(&model);
        let cut = &text[..text.len() / 2];
        assert!(from_text(cut, Path::new("mem")).is_err());
    }
}
