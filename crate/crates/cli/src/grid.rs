//! Margin grids: `start:step:end` (inclusive) or a comma-separated list.

use std::fmt::Display;

/// Expands a grid spec. For `start:step:end` only `|step|` matters; the
/// grid always walks from `start` towards `end`. Values are rounded to 12
/// decimals so `-0.5:0.1:0.5` yields `0.3`, not `0.30000000000000004`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let spec = spec.trim();
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| -> Result<f64, String> {
        let v: f64 = s.trim().parse().map_err(|_| format!("invalid number '{}'", s.trim()))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite number '{}'", s.trim()))
        }
    };
    match parts.len() {
        1 => {
            let values: Vec<f64> = spec
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(num)
                .collect::<Result<_, _>>()?;
            if values.is_empty() {
                return Err("empty grid".into());
            }
            Ok(values)
        }
        3 => {
            let (start, step, end) = (num(parts[0])?, num(parts[1])?.abs(), num(parts[2])?);
            if step == 0.0 {
                return Err("grid step must be nonzero".into());
            }
            let span = (end - start).abs();
            let n = (span / step + 1e-9).floor() as usize;
            let dir = if end >= start { 1.0 } else { -1.0 };
            Ok((0..=n)
                .map(|i| round12(start + dir * step * i as f64))
                .collect())
        }
        _ => Err(format!("grid '{spec}' is neither start:step:end nor a list")),
    }
}

fn round12(v: f64) -> f64 {
    let r = (v * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn format_list<T: Display>(values: &[T]) -> String {
    values
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}
