//! Observation sequences and their CSV representation.
//!
//! Observations are indexed `t = 1..=T`; true states, when present, cover
//! `t = 0..=T`. Values are written with 17 significant digits so a file
//! round-trips to the same bits.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::ParamVector;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    obs_dim: usize,
    y: Vec<f64>,
    states: Option<(usize, Vec<f64>)>,
    theta: Option<ParamVector>,
}

impl Dataset {
    /// `y` holds `T` observations of dimension `obs_dim`, row-major.
    pub fn new(obs_dim: usize, y: Vec<f64>) -> Result<Self> {
        if obs_dim == 0 {
            return Err(Error::Dimension("observation dimension must be positive".into()));
        }
        if y.is_empty() || y.len() % obs_dim != 0 {
            return Err(Error::Dimension(format!(
                "{} values do not form a non-empty sequence of {obs_dim}-vectors",
                y.len()
            )));
        }
        Ok(Self { obs_dim, y, states: None, theta: None })
    }

    pub fn scalar(y: Vec<f64>) -> Result<Self> {
        Self::new(1, y)
    }

    /// Attaches `T + 1` true states of dimension `state_dim`.
    pub fn with_states(mut self, state_dim: usize, states: Vec<f64>) -> Result<Self> {
        if state_dim == 0 || states.len() != (self.horizon() + 1) * state_dim {
            return Err(Error::Dimension(format!(
                "expected {} states of dimension {state_dim}, got {} values",
                self.horizon() + 1,
                states.len()
            )));
        }
        self.states = Some((state_dim, states));
        Ok(self)
    }

    pub fn with_theta(mut self, theta: ParamVector) -> Result<Self> {
        self.theta = Some(theta);
        Ok(self)
    }

    pub fn horizon(&self) -> usize {
        self.y.len() / self.obs_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    /// Observation `y_t` for `t` in `1..=T`.
    pub fn obs(&self, t: usize) -> &[f64] {
        debug_assert!(t >= 1 && t <= self.horizon());
        &self.y[(t - 1) * self.obs_dim..t * self.obs_dim]
    }

    pub fn obs_flat(&self) -> &[f64] {
        &self.y
    }

    /// A copy keeping only the first `horizon` observations (and states).
    pub fn truncated(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 || horizon > self.horizon() {
            return Err(Error::Precondition(format!(
                "cannot truncate a length-{} dataset to {horizon}",
                self.horizon()
            )));
        }
        let mut out = Self::new(self.obs_dim, self.y[..horizon * self.obs_dim].to_vec())?;
        if let Some((d, s)) = &self.states {
            out = out.with_states(*d, s[..(horizon + 1) * d].to_vec())?;
        }
        out.theta = self.theta.clone();
        Ok(out)
    }

    pub fn state_dim(&self) -> Option<usize> {
        self.states.as_ref().map(|(d, _)| *d)
    }

    /// True state `x_t` for `t` in `0..=T`, if recorded.
    pub fn state(&self, t: usize) -> Option<&[f64]> {
        self.states.as_ref().map(|(d, s)| &s[t * d..(t + 1) * d])
    }

    pub fn theta(&self) -> Option<&ParamVector> {
        self.theta.as_ref()
    }

    pub fn write_obs_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(column_names("y", self.obs_dim));
        write_table(out, &header, 1, self.obs_dim, &self.y)
    }

    /// Writes the true states; a dataset without them yields an error.
    pub fn write_truth_csv<W: Write>(&self, out: W) -> Result<()> {
        let (d, s) = self
            .states
            .as_ref()
            .ok_or_else(|| Error::Precondition("dataset carries no true states".into()))?;
        let mut header = vec!["t".to_string()];
        header.extend((0..*d).map(|i| format!("x{i}")));
        write_table(out, &header, 0, *d, s)
    }

    pub fn read_obs_csv<R: Read>(input: R, origin: &str) -> Result<Self> {
        let (dim, values) = read_table(input, origin, "y", 1)?;
        if values.is_empty() {
            return Err(Error::Parse {
                origin: origin.to_owned(),
                line: 2,
                msg: "no observations".into(),
            });
        }
        Self::new(dim, values)
    }

    pub fn read_obs_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_obs_csv(std::io::BufReader::new(file), &path.display().to_string())
    }

    /// Reads a truth table (`t,x0,x1,…`, rows `t = 0..=T`) and attaches it.
    pub fn attach_truth_csv<R: Read>(self, input: R, origin: &str) -> Result<Self> {
        let (dim, values) = read_table(input, origin, "x", 0)?;
        self.with_states(dim, values)
    }
}

fn column_names(prefix: &str, dim: usize) -> Vec<String> {
    if dim == 1 && prefix == "y" {
        vec!["y".into()]
    } else {
        (0..dim).map(|i| format!("{prefix}{i}")).collect()
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_table<W: Write>(out: W, header: &[String], first_t: usize, dim: usize, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_io)?;
    for (i, row) in values.chunks(dim).enumerate() {
        let mut rec = vec![(first_t + i).to_string()];
        rec.extend(row.iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Parses `t,<prefix>…` tables, checking that `t` counts up from `first_t`.
fn read_table<R: Read>(input: R, origin: &str, prefix: &str, first_t: u64) -> Result<(usize, Vec<f64>)> {
    let parse_err = |line: u64, msg: String| Error::Parse { origin: origin.to_owned(), line, msg };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    let dim = cols.len().saturating_sub(1);
    let header_ok = cols.first() == Some(&"t")
        && dim >= 1
        && (cols[1..] == column_names(prefix, dim).iter().map(String::as_str).collect::<Vec<_>>()[..]
            || (dim == 1 && cols[1] == format!("{prefix}0")));
    if !header_ok {
        return Err(parse_err(
            1,
            format!("expected header `t,{prefix}` or `t,{prefix}0,{prefix}1,…`, found `{}`", cols.join(",")),
        ));
    }
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row as u64 + 2;
        let record = record.map_err(|e| {
            let line = e.position().map_or(line, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        if record.len() != dim + 1 {
            return Err(parse_err(line, format!("expected {} fields, found {}", dim + 1, record.len())));
        }
        let t: u64 = record[0]
            .parse()
            .map_err(|_| parse_err(line, format!("invalid time index `{}`", &record[0])))?;
        if t != first_t + row as u64 {
            return Err(parse_err(line, format!("time index {t} out of sequence, expected {}", first_t + row as u64)));
        }
        for field in record.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("invalid number `{field}`")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value `{field}`")));
            }
            values.push(v);
        }
    }
    Ok((dim, values))
}
