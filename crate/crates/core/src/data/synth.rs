//! Synthetic single-peaked seasons with an optional holiday-style dip.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::season::{Season, SeasonSet, STANDARD_LEN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n: usize,
    /// Season position (0 = week 40) whose value is scaled by `1 - dip_depth`.
    pub dip_week: Option<usize>,
    pub dip_depth: f64,
    pub noise_sd: f64,
    pub seed: u64,
    pub region: String,
    pub start_year: i32,
    pub baseline: f64,
    pub amplitude: f64,
    /// Peak position in weeks from week 40.
    pub center: f64,
    pub width: f64,
    /// Relative standard deviation of the per-season peak height.
    pub amplitude_jitter: f64,
    /// Standard deviation of the per-season peak position, in weeks.
    pub center_jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 20,
            dip_week: None,
            dip_depth: 0.0,
            noise_sd: 0.0,
            seed: 0,
            region: "synth".into(),
            start_year: 1990,
            baseline: 0.8,
            amplitude: 4.0,
            center: 15.0,
            width: 4.0,
            amplitude_jitter: 0.0,
            center_jitter: 0.0,
        }
    }
}

/// Gaussian bump over a flat baseline.
pub fn bump(index: usize, baseline: f64, amplitude: f64, center: f64, width: f64) -> f64 {
    let x = index as f64 - center;
    baseline + amplitude * (-(x * x) / (2.0 * width * width)).exp()
}

struct Shape {
    amplitude: f64,
    center: f64,
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidArgument("need at least one season".into()));
        }
        for (name, v) in [
            ("dip_depth", self.dip_depth),
            ("noise_sd", self.noise_sd),
            ("amplitude_jitter", self.amplitude_jitter),
            ("center_jitter", self.center_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.width > 0.0) {
            return Err(Error::InvalidArgument("width must be positive".into()));
        }
        if let Some(d) = self.dip_week {
            if d >= STANDARD_LEN {
                return Err(Error::Index(format!(
                    "dip week position {d} outside season of {STANDARD_LEN} weeks"
                )));
            }
        }
        Ok(())
    }

    /// The noiseless, unjittered curve.
    pub fn nominal_curve(&self) -> Vec<f64> {
        (0..STANDARD_LEN)
            .map(|i| bump(i, self.baseline, self.amplitude, self.center, self.width))
            .collect()
    }

    fn draw_shape(&self, rng: &mut ChaCha8Rng) -> Shape {
        let za: f64 = rng.sample(StandardNormal);
        let zc: f64 = rng.sample(StandardNormal);
        Shape {
            amplitude: (self.amplitude * (1.0 + self.amplitude_jitter * za)).max(0.0),
            center: self.center + self.center_jitter * zc,
        }
    }

    fn draw_values(&self, shape: &Shape, noise_sd: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut values: Vec<f64> = (0..STANDARD_LEN)
            .map(|i| {
                let z: f64 = rng.sample(StandardNormal);
                bump(i, self.baseline, shape.amplitude, shape.center, self.width) + noise_sd * z
            })
            .collect();
        if let Some(d) = self.dip_week {
            values[d] *= 1.0 - self.dip_depth;
        }
        for v in &mut values {
            *v = v.max(0.0);
        }
        values
    }

    pub fn generate(&self) -> Result<SeasonSet> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let seasons = (0..self.n)
            .map(|i| {
                let shape = self.draw_shape(&mut rng);
                let values = self.draw_values(&shape, self.noise_sd, &mut rng);
                Season::new(self.region.clone(), self.start_year + i as i32, values)
            })
            .collect::<Result<Vec<_>>>()?;
        SeasonSet::new(seasons)
    }

    /// Same-year seasons for several regions that share each year's epidemic
    /// shape but carry region-specific noise levels.
    pub fn generate_regions(&self, regions: &[(&str, f64)]) -> Result<SeasonSet> {
        self.validate()?;
        if regions.is_empty() {
            return Err(Error::InvalidArgument("no regions requested".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut seasons = Vec::with_capacity(self.n * regions.len());
        for i in 0..self.n {
            let shape = self.draw_shape(&mut rng);
            for (region, noise_sd) in regions {
                if !(*noise_sd >= 0.0) {
                    return Err(Error::InvalidArgument(format!("noise for {region} must be >= 0")));
                }
                let values = self.draw_values(&shape, *noise_sd, &mut rng);
                seasons.push(Season::new(*region, self.start_year + i as i32, values)?);
            }
        }
        SeasonSet::new(seasons)
    }
}

pub fn synth_seasons(n: usize, dip_week: Option<usize>, dip_depth: f64, noise_sd: f64, seed: u64) -> Result<SeasonSet> {
    SynthConfig {
        n,
        dip_week,
        dip_depth,
        noise_sd,
        seed,
        ..SynthConfig::default()
    }
    .generate()
}
