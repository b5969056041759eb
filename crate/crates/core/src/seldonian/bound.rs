use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, sample_sd, t_quantile};

/// Parameters of the bound predicted at candidate-selection time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub delta: f64,
    /// Number of Z samples the safety set will yield.
    pub safety_size: usize,
    /// Multiplier on the confidence half-width.
    pub inflation: f64,
}

impl BoundParams {
    pub fn new(delta: f64, safety_size: usize, inflation: f64) -> Result<Self> {
        let p = Self {
            delta,
            safety_size,
            inflation,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        if self.safety_size < 2 {
            return Err(Error::SampleSize {
                required: 2,
                got: self.safety_size,
            });
        }
        if !(self.inflation >= 1.0 && self.inflation.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "inflation must be >= 1, got {}",
                self.inflation
            )));
        }
        Ok(())
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must be in (0,1), got {delta}")));
    }
    Ok(())
}

fn check_samples(z: &[f64]) -> Result<()> {
    if z.len() < 2 {
        return Err(Error::SampleSize {
            required: 2,
            got: z.len(),
        });
    }
    if let Some(v) = z.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("Z sample {v}")));
    }
    Ok(())
}

/// `mean + scale * s` with `d/dz_j`.
pub(crate) fn shifted_mean_with_grad(z: &[f64], scale: f64) -> (f64, Vec<f64>) {
    let m = z.len() as f64;
    let mu = mean(z);
    let s = sample_sd(z);
    if s == 0.0 {
        return (mu, vec![1.0 / m; z.len()]);
    }
    let g = z
        .iter()
        .map(|v| 1.0 / m + scale * (v - mu) / ((m - 1.0) * s))
        .collect();
    (mu + scale * s, g)
}

/// Factor `c` with `bound = mean + c * s` for the predicted bound.
pub(crate) fn predicted_scale(params: &BoundParams) -> Result<f64> {
    params.validate()?;
    let n = params.safety_size as f64;
    Ok(params.inflation * t_quantile(1.0 - params.delta, n - 1.0)? / n.sqrt())
}

/// One-sided `(1 - delta)` Student-t upper confidence bound on the mean of `z`.
pub fn upper_bound(z: &[f64], delta: f64) -> Result<f64> {
    check_delta(delta)?;
    check_samples(z)?;
    let m = z.len() as f64;
    let s = sample_sd(z);
    if s == 0.0 {
        return Ok(mean(z));
    }
    Ok(mean(z) + s / m.sqrt() * t_quantile(1.0 - delta, m - 1.0)?)
}

/// Upper bound the safety test is expected to produce, sized by the safety set
/// and widened by `inflation`.
pub fn predicted_bound(z: &[f64], params: BoundParams) -> Result<f64> {
    check_samples(z)?;
    let scale = predicted_scale(&params)?;
    Ok(shifted_mean_with_grad(z, scale).0)
}

/// Largest `delta` at which `upper_bound(z, delta) <= epsilon`, if any.
pub fn delta_needed(z: &[f64], epsilon: f64) -> Option<f64> {
    if z.len() < 2 {
        return None;
    }
    let m = z.len() as f64;
    let mu = mean(z);
    let s = sample_sd(z);
    if s == 0.0 {
        return (mu <= epsilon).then_some(0.0);
    }
    if epsilon <= mu {
        return None;
    }
    let t = (epsilon - mu) * m.sqrt() / s;
    Some(1.0 - crate::stats::t_cdf(t, m - 1.0))
}

/// Smallest sample count whose bound would pass at the observed mean and spread.
pub fn samples_needed(z: &[f64], epsilon: f64, delta: f64, limit: usize) -> Option<usize> {
    if z.len() < 2 {
        return None;
    }
    let mu = mean(z);
    let s = sample_sd(z);
    if mu > epsilon || (mu == epsilon && s > 0.0) {
        return None;
    }
    if s == 0.0 {
        return Some(2);
    }
    (2..=limit).find(|&m| {
        let m_f = m as f64;
        t_quantile(1.0 - delta, m_f - 1.0)
            .map(|t| mu + s / m_f.sqrt() * t <= epsilon)
            .unwrap_or(false)
    })
}
