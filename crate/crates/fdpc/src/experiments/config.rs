//! Flat key-value experiment files: one `key = value` per line, `#` starts
//! a comment, lists are comma-separated, and the power grid additionally
//! accepts `start:step:end` (inclusive). Later lines override earlier ones;
//! anything not mentioned keeps its preset default.

use std::path::Path;

use super::{parse_fading, ExperimentError, ExperimentSpec};

/// Parse an experiment file's text into a spec, starting from
/// [`ExperimentSpec::default`] and validating the result.
pub fn parse_experiment_str(text: &str) -> Result<ExperimentSpec, ExperimentError> {
    parse_experiment_into(ExperimentSpec::default(), text)
}

/// Parse key-value text on top of an existing base spec — the layering the
/// CLI uses to put a config file over a preset and flags over both. The
/// merged spec is validated before it is returned.
pub fn parse_experiment_into(
    base: ExperimentSpec,
    text: &str,
) -> Result<ExperimentSpec, ExperimentError> {
    let mut spec = base;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ExperimentError::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        apply_key(&mut spec, key, value).map_err(|message| ExperimentError::Parse {
            line,
            message: format!("{key}: {message}"),
        })?;
    }
    spec.validate()?;
    Ok(spec)
}

/// Read and parse an experiment file.
pub fn load_experiment_file(path: impl AsRef<Path>) -> Result<ExperimentSpec, ExperimentError> {
    parse_experiment_str(&std::fs::read_to_string(path)?)
}

fn apply_key(spec: &mut ExperimentSpec, key: &str, value: &str) -> Result<(), String> {
    match key {
        "t" => spec.t = parse_scalar(value)?,
        "r" => spec.r = parse_scalar(value)?,
        "p_grid_db" => spec.p_grid_db = parse_grid(value)?,
        "q_over_p" => spec.q_over_p = parse_scalar(value)?,
        "csit" => spec.csit = parse_list(value)?,
        "algorithms" => spec.algorithms = parse_list(value)?,
        "fading" => spec.fading = parse_fading(value)?,
        "seed" => spec.seed = parse_scalar(value)?,
        "n_outer" => spec.mc.n_outer = parse_scalar(value)?,
        "n_inner" => spec.mc.n_inner = parse_scalar(value)?,
        "out" => spec.out = Some(value.to_string()),
        "batch" => spec.solver.batch = parse_scalar(value)?,
        "max_iters" => spec.solver.max_iters = parse_scalar(value)?,
        "rel_tol" => spec.solver.rel_tol = parse_scalar(value)?,
        "damping" => spec.solver.damping = parse_scalar(value)?,
        _ => return Err("unknown key".into()),
    }
    Ok(())
}

fn parse_scalar<T: std::str::FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("{e}"))
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(|item| item.trim().parse().map_err(|e: T::Err| format!("{e}")))
        .collect()
}

/// Power grids come either as an explicit comma list (`0, 5, 10`) or as an
/// inclusive range `start:step:end`.
fn parse_grid(value: &str) -> Result<Vec<f64>, String> {
    if !value.contains(':') {
        return parse_list(value);
    }
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("range must be start:step:end, got `{value}`"));
    }
    let start: f64 = parse_scalar(parts[0].trim())?;
    let step: f64 = parse_scalar(parts[1].trim())?;
    let end: f64 = parse_scalar(parts[2].trim())?;
    if !step.is_finite() || step <= 0.0 || !start.is_finite() || !end.is_finite() || end < start {
        return Err(format!(
            "range needs a positive step and end >= start, got `{value}`"
        ));
    }
    let mut grid = Vec::new();
    let mut k = 0u32;
    loop {
        let v = start + f64::from(k) * step;
        if v > end + 1e-9 * step {
            break;
        }
        grid.push(v);
        k += 1;
    }
    Ok(grid)
}
