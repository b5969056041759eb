use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of summary statistics per season fed to the similarity embeddings.
pub const N_STATS: usize = 4;

/// Sizes of the recurrent state, the season embedding, and the attended neighbourhood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub hidden: usize,
    pub embed: usize,
    pub neighbors: usize,
}

impl Default for Arch {
    fn default() -> Self {
        Self {
            hidden: 8,
            embed: 4,
            neighbors: 5,
        }
    }
}

impl Arch {
    pub fn new(hidden: usize, embed: usize, neighbors: usize) -> Result<Self> {
        let arch = Self {
            hidden,
            embed,
            neighbors,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden < 1 || self.embed < 1 || self.neighbors < 1 {
            return Err(Error::InvalidArgument(format!(
                "architecture sizes must be >= 1, got hidden={} embed={} neighbors={}",
                self.hidden, self.embed, self.neighbors
            )));
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        Layout::new(*self)
    }

    pub fn param_count(&self) -> usize {
        self.layout().len
    }
}

/// Offsets of each parameter block inside the flat vector.
///
/// Blocks in order: recurrent input weights (h), recurrent matrix (h x h,
/// row-major), recurrent bias (h), historical-season map (d x 4) and bias (d),
/// current-season map (d x 4) and bias (d), decoder weights (h + d), decoder bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub hidden: usize,
    pub embed: usize,
    pub w_in: usize,
    pub w_rec: usize,
    pub b_rec: usize,
    pub a_hist: usize,
    pub c_hist: usize,
    pub a_cur: usize,
    pub c_cur: usize,
    pub w_out: usize,
    pub b_out: usize,
    pub len: usize,
}

impl Layout {
    fn new(arch: Arch) -> Self {
        let (h, d) = (arch.hidden, arch.embed);
        let w_in = 0;
        let w_rec = w_in + h;
        let b_rec = w_rec + h * h;
        let a_hist = b_rec + h;
        let c_hist = a_hist + d * N_STATS;
        let a_cur = c_hist + d;
        let c_cur = a_cur + d * N_STATS;
        let w_out = c_cur + d;
        let b_out = w_out + h + d;
        Self {
            hidden: h,
            embed: d,
            w_in,
            w_rec,
            b_rec,
            a_hist,
            c_hist,
            a_cur,
            c_cur,
            w_out,
            b_out,
            len: b_out + 1,
        }
    }

    /// `(start, end, fan_in)` of every block, used for initialization.
    fn blocks(&self) -> [(usize, usize, usize); 9] {
        let (h, d) = (self.hidden, self.embed);
        [
            (self.w_in, self.w_rec, 1),
            (self.w_rec, self.b_rec, h),
            (self.b_rec, self.a_hist, h),
            (self.a_hist, self.c_hist, N_STATS),
            (self.c_hist, self.a_cur, N_STATS),
            (self.a_cur, self.c_cur, N_STATS),
            (self.c_cur, self.w_out, N_STATS),
            (self.w_out, self.b_out, h + d),
            (self.b_out, self.len, h + d),
        ]
    }
}

/// Parameter vector, its architecture, and the raw-to-network scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastModel {
    theta: Vec<f64>,
    arch: Arch,
    normalizer: f64,
}

impl ForecastModel {
    pub fn new(arch: Arch, theta: Vec<f64>, normalizer: f64) -> Result<Self> {
        arch.validate()?;
        if theta.len() != arch.param_count() {
            return Err(Error::InvalidArgument(format!(
                "parameter vector has {} entries, architecture needs {}",
                theta.len(),
                arch.param_count()
            )));
        }
        if !(normalizer > 0.0 && normalizer.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "normalizer must be positive, got {normalizer}"
            )));
        }
        Ok(Self {
            theta,
            arch,
            normalizer,
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn layout(&self) -> Layout {
        self.arch.layout()
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        Self::new(self.arch, theta, self.normalizer)
    }

    pub fn with_normalizer(&self, normalizer: f64) -> Result<Self> {
        Self::new(self.arch, self.theta.clone(), normalizer)
    }
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per block, normalizer 1.
pub fn init_model(arch: Arch, seed: u64) -> Result<ForecastModel> {
    arch.validate()?;
    let layout = arch.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = vec![0.0; layout.len];
    for (start, end, fan_in) in layout.blocks() {
        let half = 1.0 / (fan_in as f64).sqrt();
        for v in &mut theta[start..end] {
            *v = rng.random_range(-half..half);
        }
    }
    ForecastModel::new(arch, theta, 1.0)
}
