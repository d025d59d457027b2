//! Taut-string fits through a tube around the integrated data, and the
//! multiresolution loop that squeezes the tube until the fit's residuals
//! pass every interval test.

use std::collections::VecDeque;

use crate::error::{Error, IterationLimit, Result};
use crate::grid::DesignSample;
use crate::multires::{IndexInterval, IntervalFamily, RegionSpec};

/// Tube half-widths `lambda_0..lambda_n` at the knots of the integrated
/// data. The end widths are pinned to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeSpec {
    widths: Vec<f64>,
}

impl TubeSpec {
    pub fn new(widths: Vec<f64>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidParameter("a tube needs at least two knots".into()));
        }
        if let Some(w) = widths.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("tube widths must be finite and >= 0, got {w}")));
        }
        if widths[0] != 0.0 || *widths.last().unwrap() != 0.0 {
            return Err(Error::InvalidParameter("tube widths at both ends must be 0".into()));
        }
        Ok(Self { widths })
    }

    /// Pinned ends and the same width at every interior knot.
    pub fn constant(n: usize, width: f64) -> Result<Self> {
        let mut w = vec![width; n + 1];
        w[0] = 0.0;
        w[n] = 0.0;
        Self::new(w)
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TautFit {
    /// Slopes of the string, one fitted value per design point.
    pub fit: Vec<f64>,
    /// String ordinates `F(0)..F(n)`.
    pub string: Vec<f64>,
    /// Knot indices where the string changes slope, including `0` and `n`.
    pub knots: Vec<usize>,
    /// Number of fits computed (1 for a direct [`taut_string`] call).
    pub iterations: usize,
    pub widths: Vec<f64>,
}

/// `Y_0 = 0`, `Y_k = Y_{k-1} + y_k`.
pub fn cumulative(s: &DesignSample) -> Vec<f64> {
    crate::multires::prefix_sums(s.values())
}

type Point = (f64, f64);

fn slope(a: Point, b: Point) -> f64 {
    (b.1 - a.1) / (b.0 - a.0)
}

/// Shortest path from `(0, Y_0)` to `(n, Y_n)` between the polygonal
/// lines through `Y_i - w_i` and `Y_i + w_i`.
///
/// Linear-time funnel: the lower boundary keeps its least concave majorant
/// seen from the current apex, the upper boundary its greatest convex
/// minorant. A new upper point falling below the first lower segment (or a
/// lower point rising above the first upper segment) pins the string at
/// that hull vertex, which becomes the next apex.
fn pull_taut(cum: &[f64], widths: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let n = cum.len() - 1;
    let mut knots = vec![0usize];
    let mut values = vec![cum[0]];
    let start: Point = (0.0, cum[0]);
    let mut lower: VecDeque<Point> = VecDeque::from([start]);
    let mut upper: VecDeque<Point> = VecDeque::from([start]);

    for i in 1..=n {
        let x = i as f64;
        let pu = (x, cum[i] + widths[i]);
        let pl = (x, cum[i] - widths[i]);

        let mut moved = false;
        while lower.len() >= 2 && slope(lower[0], pu) < slope(lower[0], lower[1]) {
            lower.pop_front();
            let apex = lower[0];
            knots.push(apex.0 as usize);
            values.push(apex.1);
            moved = true;
        }
        if moved {
            upper.clear();
            upper.push_back(lower[0]);
        }
        while upper.len() >= 2 {
            let k = upper.len();
            if slope(upper[k - 2], upper[k - 1]) >= slope(upper[k - 1], pu) {
                upper.pop_back();
            } else {
                break;
            }
        }
        upper.push_back(pu);

        let mut moved = false;
        while upper.len() >= 2 && slope(upper[0], pl) > slope(upper[0], upper[1]) {
            upper.pop_front();
            let apex = upper[0];
            knots.push(apex.0 as usize);
            values.push(apex.1);
            moved = true;
        }
        if moved {
            lower.clear();
            lower.push_back(upper[0]);
        }
        while lower.len() >= 2 {
            let k = lower.len();
            if slope(lower[k - 2], lower[k - 1]) <= slope(lower[k - 1], pl) {
                lower.pop_back();
            } else {
                break;
            }
        }
        lower.push_back(pl);
    }
    if *knots.last().unwrap() != n {
        knots.push(n);
        values.push(cum[n]);
    }
    (knots, values)
}

fn fit_from_knots(n: usize, knots: &[usize], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut fit = vec![0.0; n];
    let mut string = vec![0.0; n + 1];
    string[0] = values[0];
    for k in 1..knots.len() {
        let (a, b) = (knots[k - 1], knots[k]);
        let slope = (values[k] - values[k - 1]) / (b - a) as f64;
        for i in a + 1..=b {
            fit[i - 1] = slope;
            string[i] = values[k - 1] + slope * (i - a) as f64;
        }
        string[b] = values[k];
    }
    (fit, string)
}

/// The taut string through `tube` around the integrated data.
pub fn taut_string(s: &DesignSample, tube: &TubeSpec) -> Result<TautFit> {
    let n = s.n();
    if tube.widths.len() != n + 1 {
        return Err(Error::LengthMismatch { expected: n + 1, got: tube.widths.len() });
    }
    let cum = cumulative(s);
    let (knots, values) = pull_taut(&cum, &tube.widths);
    let (fit, string) = fit_from_knots(n, &knots, &values);
    Ok(TautFit { fit, string, knots, iterations: 1, widths: tube.widths.clone() })
}

pub const DEFAULT_MAX_ITER: usize = 100;

/// Taut string whose tube is halved locally until
/// `|sum_{i in I} (y_i - f_i)| / sqrt|I| <= sigma sqrt(tau log n)` for every
/// `I` in `fam`.
///
/// Interior knot `i` (between data `i` and `i+1`) is halved when a failing
/// interval contains `i` or `i+1`.
pub fn taut_string_multires(
    s: &DesignSample,
    sigma: f64,
    tau: f64,
    fam: &IntervalFamily,
    max_iter: usize,
) -> Result<TautFit> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be finite and > 0, got {sigma}")));
    }
    let spec = RegionSpec::new(sigma, tau, fam.clone())?;
    spec.check_sample(s)?;
    let n = s.n();
    let threshold = spec.threshold();
    let cum = cumulative(s);
    let (lo, hi) = cum.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut widths = vec![hi - lo; n + 1];
    widths[0] = 0.0;
    widths[n] = 0.0;

    let y = s.values();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let (knots, values) = pull_taut(&cum, &widths);
        let (fit, string) = fit_from_knots(n, &knots, &values);
        debug_assert!(string.iter().zip(&cum).zip(&widths).all(|((f, c), w)| {
            let slack = 1e-9 * (1.0 + c.abs() + w);
            *f >= c - w - slack && *f <= c + w + slack
        }));

        let residual: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
        let p = crate::multires::prefix_sums(&residual);
        // +1 at lo-1, -1 after hi: marks knots lo-1..=hi
        let mut marks = vec![0i64; n + 2];
        let mut worst = (0.0f64, IndexInterval::singleton(1));
        for iv in fam.iter() {
            let w = ((p[iv.hi] - p[iv.lo - 1]) / (iv.len() as f64).sqrt()).abs();
            if w > threshold {
                marks[iv.lo - 1] += 1;
                marks[iv.hi + 1] -= 1;
                if w > worst.0 {
                    worst = (w, iv);
                }
            }
        }
        if worst.0 == 0.0 {
            return Ok(TautFit { fit, string, knots, iterations, widths });
        }

        let mut running = 0i64;
        let mut changed = false;
        for (i, m) in marks.iter().enumerate().take(n) {
            running += m;
            if running > 0 && i >= 1 && widths[i] > 0.0 {
                widths[i] *= 0.5;
                changed = true;
            }
        }
        if iterations >= max_iter || !changed {
            return Err(Error::IterationLimit(Box::new(IterationLimit {
                iterations,
                fit,
                worst_interval: worst.1,
                worst_value: worst.0,
                threshold,
            })));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremeKind {
    Maximum,
    Minimum,
}

/// A local extreme of a fitted sequence; `plateau` is the flat run of
/// indices attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalExtreme {
    pub kind: ExtremeKind,
    pub plateau: IndexInterval,
}

/// Interior local extremes, found from strict sign changes of successive
/// differences with flat runs merged into single plateaus.
pub fn local_extremes(f: &[f64]) -> Vec<LocalExtreme> {
    // (value, first, last) of each maximal run of equal values, 1-based
    let mut runs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &v) in f.iter().enumerate() {
        match runs.last_mut() {
            Some(last) if last.0 == v => last.2 = i + 1,
            _ => runs.push((v, i + 1, i + 1)),
        }
    }
    let mut out = Vec::new();
    for w in runs.windows(3) {
        let (prev, cur, next) = (w[0].0, w[1].0, w[2].0);
        let plateau = IndexInterval { lo: w[1].1, hi: w[1].2 };
        if cur > prev && cur > next {
            out.push(LocalExtreme { kind: ExtremeKind::Maximum, plateau });
        } else if cur < prev && cur < next {
            out.push(LocalExtreme { kind: ExtremeKind::Minimum, plateau });
        }
    }
    out
}

/// Number of interior local extremes (the modality of the fit).
pub fn modality(f: &[f64]) -> usize {
    local_extremes(f).len()
}
