//! Parameter-grid syntax for sweep commands.
//!
//! Two forms are accepted, both binding a parameter name:
//!
//! * `a=0.5:3:0.25` — inclusive arithmetic range `start:stop:step`;
//! * `a=0.75,2,1.4142135623730951` — explicit comma-separated values.
//!
//! The name is either a model parameter (`a`, `b`, `kappa`, `c`) or the
//! literal `energy`.

use chanalyze::{Error, Result};

#[derive(Debug, Clone)]
pub struct Grid {
    pub name: String,
    pub values: Vec<f64>,
}

pub fn parse(spec: &str) -> Result<Grid> {
    let (name, rest) = spec.split_once('=').ok_or_else(|| {
        Error::InvalidInput(format!(
            "grid `{spec}` must look like name=start:stop:step or name=v1,v2,..."
        ))
    })?;
    let name = name.trim();
    if name.is_empty() {
        return Err(Error::InvalidInput(format!("grid `{spec}` is missing the parameter name")));
    }
    let rest = rest.trim();
    let values = if rest.contains(':') {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidInput(format!(
                "grid range `{rest}` must have exactly three fields start:stop:step"
            )));
        }
        let nums = parts
            .iter()
            .map(|s| parse_f64(s))
            .collect::<Result<Vec<f64>>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) {
            return Err(Error::InvalidInput(format!("grid step must be positive, got {step}")));
        }
        if stop < start {
            return Err(Error::InvalidInput(format!(
                "grid stop {stop} lies before start {start}"
            )));
        }
        // Tolerate a stop that misses the lattice by a few ulps so that
        // ranges like 0.5:3:0.25 include both endpoints.
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + i as f64 * step).collect()
    } else {
        rest.split(',').map(parse_f64).collect::<Result<Vec<f64>>>()?
    };
    if values.is_empty() {
        return Err(Error::InvalidInput(format!("grid `{spec}` produced no values")));
    }
    Ok(Grid { name: name.to_string(), values })
}

fn parse_f64(s: &str) -> Result<f64> {
    let s = s.trim();
    s.parse::<f64>()
        .map_err(|_| Error::InvalidInput(format!("grid entry `{s}` is not a number")))
}
