//! Design samples on the equispaced grid `t_i = i/n`, test functions and
//! the difference-based noise scale estimate.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Observations `y_1..y_n` attached to the design points `t_i = i/n`.
///
/// Design points are never stored; [`DesignSample::t`] recomputes them.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSample {
    y: Vec<f64>,
}

impl DesignSample {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::InvalidParameter("a sample needs at least one observation".into()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "observation {} is not finite ({})",
                i + 1,
                y[i]
            )));
        }
        Ok(Self { y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn into_values(self) -> Vec<f64> {
        self.y
    }

    /// Design point of the 1-based index `i`.
    pub fn t(&self, i: usize) -> f64 {
        design_point(i, self.n())
    }
}

/// `t_i = i/n` for a 1-based index.
pub fn design_point(i: usize, n: usize) -> f64 {
    i as f64 / n as f64
}

/// Regression functions on `[0, 1]` used for simulation and detectability
/// calculations.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// Indicator of `|t - center| <= halfwidth`.
    Box { center: f64, halfwidth: f64 },
    /// `sin(frequency * t)`.
    Sine { frequency: f64 },
    /// `exp(rate * t)`.
    Exponential { rate: f64 },
    /// `sqrt(t (1 - t)) sin(2 pi 1.05 / (t + 0.05))`.
    Doppler,
    Constant(f64),
    /// Values at equispaced abscissae `0, 1/(m-1), .., 1`, linearly
    /// interpolated.
    Table(Vec<f64>),
}

/// Relative slack used when deciding whether a grid point lies on a closed
/// boundary, so that `49/100` is inside `[0.49, 0.51]`.
pub(crate) const BOUNDARY_SLACK: f64 = 1e-9;

impl TestFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TestFunction::Box { center, halfwidth } => {
                let u = (t - center) / halfwidth;
                if u.abs() <= 1.0 + BOUNDARY_SLACK {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Sine { frequency } => (frequency * t).sin(),
            TestFunction::Exponential { rate } => (rate * t).exp(),
            TestFunction::Doppler => (t * (1.0 - t)).max(0.0).sqrt() * (2.0 * PI * 1.05 / (t + 0.05)).sin(),
            TestFunction::Constant(c) => *c,
            TestFunction::Table(values) => interpolate_table(values, t),
        }
    }

    /// Analytic first derivative where one exists in closed form.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        match self {
            TestFunction::Sine { frequency } => Some(frequency * (frequency * t).cos()),
            TestFunction::Exponential { rate } => Some(rate * (rate * t).exp()),
            TestFunction::Constant(_) => Some(0.0),
            TestFunction::Doppler => {
                if t <= 0.0 || t >= 1.0 {
                    return None;
                }
                let s = (t * (1.0 - t)).sqrt();
                let phase = 2.0 * PI * 1.05 / (t + 0.05);
                let ds = (1.0 - 2.0 * t) / (2.0 * s);
                let dphase = -2.0 * PI * 1.05 / ((t + 0.05) * (t + 0.05));
                Some(ds * phase.sin() + s * phase.cos() * dphase)
            }
            TestFunction::Box { .. } | TestFunction::Table(_) => None,
        }
    }

    /// Values at the design points `1/n, .., n/n`.
    pub fn sample(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|i| self.eval(design_point(i, n))).collect()
    }
}

fn interpolate_table(values: &[f64], t: f64) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        m => {
            let x = t.clamp(0.0, 1.0) * (m - 1) as f64;
            let j = (x.floor() as usize).min(m - 2);
            let w = x - j as f64;
            values[j] * (1.0 - w) + values[j + 1] * w
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Box { center, halfwidth } => write!(f, "box:{center}:{halfwidth}"),
            TestFunction::Sine { frequency } => write!(f, "sine:{frequency}"),
            TestFunction::Exponential { rate } => write!(f, "exp:{rate}"),
            TestFunction::Doppler => write!(f, "doppler"),
            TestFunction::Constant(c) => write!(f, "const:{c}"),
            TestFunction::Table(v) => write!(f, "table[{}]", v.len()),
        }
    }
}

/// Parses `box:C:H`, `sine:W` (a trailing `pi` multiplies by pi, e.g.
/// `sine:4pi`), `exp:R`, `doppler` and `const:C`.
impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::Parse(format!("unrecognised test function '{s}'"));
        let num = |p: &str| -> Result<f64> {
            let p = p.trim();
            if let Some(stripped) = p.strip_suffix("pi") {
                let m = if stripped.is_empty() { 1.0 } else { stripped.parse::<f64>().map_err(|_| bad())? };
                Ok(m * PI)
            } else {
                p.parse::<f64>().map_err(|_| bad())
            }
        };
        match parts.as_slice() {
            ["box", c, h] => {
                let halfwidth = num(h)?;
                if halfwidth <= 0.0 {
                    return Err(Error::InvalidParameter("box halfwidth must be positive".into()));
                }
                Ok(TestFunction::Box { center: num(c)?, halfwidth })
            }
            ["sine" | "sin", w] => Ok(TestFunction::Sine { frequency: num(w)? }),
            ["exp", r] => Ok(TestFunction::Exponential { rate: num(r)? }),
            ["doppler"] => Ok(TestFunction::Doppler),
            ["const" | "constant", c] => Ok(TestFunction::Constant(num(c)?)),
            _ => Err(bad()),
        }
    }
}

/// Deterministic generator for replication `stream` under `seed`.
///
/// Every replication owns its own ChaCha stream, so results do not depend
/// on the order in which replications are executed.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` i.i.d. standard normal draws.
pub fn standard_normal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// `y_i = f(i/n) + sigma z_i` with `z` drawn from stream 0 of `seed`.
pub fn generate_data(f: &TestFunction, n: usize, sigma: f64, seed: u64) -> Result<DesignSample> {
    generate_replication(f, n, sigma, seed, 0)
}

/// As [`generate_data`] but drawing the noise from replication `stream`.
pub fn generate_replication(
    f: &TestFunction,
    n: usize,
    sigma: f64,
    seed: u64,
    stream: u64,
) -> Result<DesignSample> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    let mut rng = replication_rng(seed, stream);
    let z = standard_normal(&mut rng, n);
    let y = f.sample(n).into_iter().zip(z).map(|(fi, zi)| fi + sigma * zi).collect();
    DesignSample::new(y)
}

/// `Phi^{-1}(0.75)`, the upper quartile of the standard normal law.
pub fn normal_upper_quartile() -> f64 {
    Normal::standard().inverse_cdf(0.75)
}

/// Median with the even-count convention "midpoint of the two central
/// order statistics". Panics on an empty slice.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Noise scale from the median absolute successive difference,
/// `median |y_{i+1} - y_i| / (Phi^{-1}(0.75) sqrt 2)`.
pub fn estimate_sigma(s: &DesignSample) -> Result<f64> {
    let y = s.values();
    if y.len() < 2 {
        return Err(Error::InsufficientData(y.len()));
    }
    let diffs: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    Ok(median(&diffs) / (normal_upper_quartile() * std::f64::consts::SQRT_2))
}
