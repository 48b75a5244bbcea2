use ssm_smc::lgss::ScalarLgss;
use ssm_smc::{Dataset, SsmModel};

/// Posterior of `a` on a uniform grid of cell midpoints from prior × exact
/// likelihood.
pub struct GridPosterior {
    lo: f64,
    width: f64,
    mass: Vec<f64>,
}

impl GridPosterior {
    pub fn new(model: &ScalarLgss, data: &Dataset, points: usize) -> Self {
        let (lo, hi) = (model.config().a_lo, model.config().a_hi);
        let width = (hi - lo) / points as f64;
        let log_post: Vec<f64> = (0..points)
            .map(|i| {
                let theta = model.theta(lo + (i as f64 + 0.5) * width);
                model.log_prior(&theta) + model.lgss_params(&theta).log_likelihood(data).unwrap()
            })
            .collect();
        let top = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = log_post.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = unnorm.iter().sum();
        Self { lo, width, mass: unnorm.iter().map(|u| u / total).collect() }
    }

    /// Piecewise-linear CDF, uniform within each cell.
    pub fn cdf(&self, x: f64) -> f64 {
        let pos = ((x - self.lo) / self.width).clamp(0.0, self.mass.len() as f64);
        let cell = (pos.floor() as usize).min(self.mass.len() - 1);
        self.mass[..cell].iter().sum::<f64>() + self.mass[cell] * (pos - cell as f64)
    }

    pub fn mean(&self) -> f64 {
        self.mass.iter().enumerate().map(|(i, m)| m * (self.lo + (i as f64 + 0.5) * self.width)).sum()
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let mut acc = 0.0;
        for (i, m) in self.mass.iter().enumerate() {
            if acc + m >= q {
                return self.lo + (i as f64 + (q - acc) / m) * self.width;
            }
            acc += m;
        }
        self.lo + self.mass.len() as f64 * self.width
    }
}

pub fn kolmogorov_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

