//! Grid specifications: `start:end:step` (inclusive), a comma list, or a
//! single value.

use crate::CliError;

pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Err(CliError::input("empty grid specification"));
    }
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::input(format!("grid `{spec}` must be start:end:step")));
        }
        let start = parse_f64(parts[0])?;
        let end = parse_f64(parts[1])?;
        let step = parse_f64(parts[2])?;
        if step <= 0.0 || end < start {
            return Err(CliError::input(format!("grid `{spec}` needs end ≥ start and step > 0")));
        }
        let count = ((end - start) / step).round() as usize;
        let points: Vec<f64> = (0..=count).map(|i| start + i as f64 * step).collect();
        return Ok(points);
    }
    spec.split(',').map(parse_f64).collect()
}

pub fn parse_single(spec: &str) -> Result<f64, CliError> {
    let grid = parse_grid(spec)?;
    if grid.len() != 1 {
        return Err(CliError::input(format!("expected a single value, got the grid `{spec}`")));
    }
    Ok(grid[0])
}

fn parse_f64(s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| CliError::input(format!("`{s}` is not a number")))
}

pub fn parse_coeffs(spec: &str) -> Result<Vec<f64>, CliError> {
    spec.split(',').map(parse_f64).collect()
}
