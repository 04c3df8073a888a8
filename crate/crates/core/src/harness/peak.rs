use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A maximum of a sampled curve, refined by a parabola through the three
/// samples around the largest one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Index of the largest sample.
    pub index: usize,
    pub t: f64,
    pub value: f64,
}

fn check(times: &[f64], values: &[f64]) -> Result<()> {
    if times.len() != values.len() || times.is_empty() {
        return Err(invalid(format!(
            "peak search needs matching non-empty samples, got {} times and {} values",
            times.len(),
            values.len()
        )));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("peak search needs increasing times"));
    }
    Ok(())
}

fn refine(times: &[f64], values: &[f64], i: usize) -> Peak {
    let fallback = Peak {
        index: i,
        t: times[i],
        value: values[i],
    };
    if i == 0 || i + 1 == times.len() {
        return fallback;
    }
    let (a, b) = (times[i - 1] - times[i], times[i + 1] - times[i]);
    let (ya, y0, yb) = (values[i - 1], values[i], values[i + 1]);
    // y = y0 + p x + q x² through (a, ya), (0, y0), (b, yb).
    let q = ((ya - y0) / a - (yb - y0) / b) / (a - b);
    let p = (ya - y0) / a - q * a;
    if !(q < 0.0) {
        return fallback;
    }
    let x = -p / (2.0 * q);
    if !(a..=b).contains(&x) {
        return fallback;
    }
    Peak {
        index: i,
        t: times[i] + x,
        value: y0 + p * x + q * x * x,
    }
}

/// Global maximum with parabolic refinement.
pub fn locate_peak(times: &[f64], values: &[f64]) -> Result<Peak> {
    check(times, values)?;
    let i = (0..values.len()).fold(0, |best, k| if values[k] > values[best] { k } else { best });
    Ok(refine(times, values, i))
}

/// First interior local maximum that reaches `fraction` of the global maximum;
/// the global maximum when there is none.
pub fn first_prominent_peak(times: &[f64], values: &[f64], fraction: f64) -> Result<Peak> {
    check(times, values)?;
    let global = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for i in 1..values.len().saturating_sub(1) {
        if values[i] >= values[i - 1] && values[i] > values[i + 1] && values[i] >= fraction * global {
            return Ok(refine(times, values, i));
        }
    }
    locate_peak(times, values)
}
