//! Plain-text policy checkpoints.
//!
//! ```text
//! metasac-checkpoint 1
//! state_dim 4
//! action_dim 2
//! hidden 64 64
//! action_bound 1
//! param log_std.l0.b 2
//! 0.0012 -0.0031
//! ...
//! ```
//!
//! Values are written in shortest round-trip form, so a save/load cycle is
//! lossless for `f64`.

use std::fs;
use std::path::Path;

use crate::autodiff::{ParamSet, Shape, Tensor};
use crate::error::{Error, Result};
use crate::networks::policy::{Policy, PolicySpec};
use crate::scalar::Scalar;

pub const MAGIC: &str = "metasac-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_policy<T: Scalar>(policy: &Policy<T>) -> String {
    let spec = policy.spec();
    let mut out = format!("{MAGIC} {FORMAT_VERSION}\n");
    out += &format!("state_dim {}\n", spec.state_dim);
    out += &format!("action_dim {}\n", spec.action_dim);
    let hidden: Vec<String> = spec.hidden.iter().map(usize::to_string).collect();
    out += &format!("hidden {}\n", hidden.join(" "));
    out += &format!("action_bound {:?}\n", spec.action_bound);
    out += &encode_params(&policy.params);
    out
}

pub fn encode_params<T: Scalar>(params: &ParamSet<T>) -> String {
    let mut out = String::new();
    for (name, t) in params.iter() {
        let dims: Vec<String> = t.shape().dims().iter().map(usize::to_string).collect();
        out += &format!("param {name} {}\n", dims.join(" "));
        let vals: Vec<String> = t.data().iter().map(|x| format!("{:?}", x.as_f64())).collect();
        out += &vals.join(" ");
        out.push('\n');
    }
    out
}

fn parse_num<N: std::str::FromStr>(s: &str, what: &str) -> Result<N> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad {what} `{s}` in checkpoint")))
}

pub fn decode_policy<T: Scalar>(text: &str) -> Result<Policy<T>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(Error::Parse("missing checkpoint header".into()));
    }
    let version: u32 = parse_num(parts.next().unwrap_or(""), "version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Parse(format!("unsupported checkpoint version {version}")));
    }

    let mut field = |key: &str| -> Result<Vec<String>> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing `{key}` line")))?;
        let mut it = line.split_whitespace();
        if it.next() != Some(key) {
            return Err(Error::Parse(format!("expected `{key}`, found `{line}`")));
        }
        Ok(it.map(str::to_string).collect())
    };
    let state_dim = parse_num(&field("state_dim")?.concat(), "state_dim")?;
    let action_dim = parse_num(&field("action_dim")?.concat(), "action_dim")?;
    let hidden = field("hidden")?
        .iter()
        .map(|h| parse_num(h, "hidden width"))
        .collect::<Result<Vec<usize>>>()?;
    let action_bound = parse_num(&field("action_bound")?.concat(), "action_bound")?;
    let params = decode_params(lines)?;
    Policy::from_params(
        PolicySpec {
            state_dim,
            action_dim,
            hidden,
            action_bound,
        },
        params,
    )
}

fn decode_params<'a, T: Scalar>(mut lines: impl Iterator<Item = &'a str>) -> Result<ParamSet<T>> {
    let mut params = ParamSet::new();
    while let Some(line) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        if it.next() != Some("param") {
            return Err(Error::Parse(format!("expected `param`, found `{line}`")));
        }
        let name = it
            .next()
            .ok_or_else(|| Error::Parse("parameter without name".into()))?;
        let dims = it
            .map(|d| parse_num(d, "dimension"))
            .collect::<Result<Vec<usize>>>()?;
        let values = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing values for `{name}`")))?
            .split_whitespace()
            .map(|v| parse_num::<f64>(v, "value").map(T::lit))
            .collect::<Result<Vec<T>>>()?;
        params.insert(name, Tensor::new(Shape::new(dims)?, values)?);
    }
    Ok(params)
}

pub fn save_policy<T: Scalar>(policy: &Policy<T>, path: &Path) -> Result<()> {
    fs::write(path, encode_policy(policy)).map_err(|e| Error::io(path, e))
}

pub fn load_policy<T: Scalar>(path: &Path) -> Result<Policy<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_policy(&text)
}
