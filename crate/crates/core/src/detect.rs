//! Deterministic detectability conditions: sample sizes beyond which every
//! member of the region must show a peak, or a peak in its derivative.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{design_point, TestFunction};
use crate::multires::DEFAULT_TAU;

/// Default quantile constant: three independent standard normals stay
/// inside `+-2.72` with probability 0.99.
pub const DEFAULT_CQ: f64 = 2.72;

const SNAP: f64 = 1e-9;

/// Sub-interval of `[0, 1]` with chosen endpoint closure; grid membership
/// is decided on `t_i = i/n`, snapping `i/n` that lie within `1e-9` of an
/// endpoint onto it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

fn snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= SNAP * x.abs().max(1.0) {
        r
    } else {
        x
    }
}

impl GridInterval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: true }
    }

    /// 1-based indices `i` with `i/n` inside; may be empty.
    pub fn indices(&self, n: usize) -> std::ops::RangeInclusive<usize> {
        let a = snapped(self.lo * n as f64);
        let b = snapped(self.hi * n as f64);
        let first = if self.lo_closed { a.ceil() } else { a.floor() + 1.0 };
        let last = if self.hi_closed { b.floor() } else { b.ceil() - 1.0 };
        let first = first.max(1.0);
        let last = last.min(n as f64);
        if last < first {
            #[allow(clippy::reversed_empty_ranges)]
            return 1..=0;
        }
        first as usize..=last as usize
    }

    pub fn count(&self, n: usize) -> usize {
        let r = self.indices(n);
        if r.is_empty() {
            0
        } else {
            r.end() - r.start() + 1
        }
    }
}

impl fmt::Display for GridInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{},{}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

impl FromStr for GridInterval {
    type Err = Error;

    /// `[a,b]`, `[a,b)`, `(a,b]` or `(a,b)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("interval '{s}' is not of the form [a,b) etc."));
        let s = s.trim();
        let lo_closed = match s.chars().next() {
            Some('[') => true,
            Some('(') => false,
            _ => return Err(bad()),
        };
        let hi_closed = match s.chars().last() {
            Some(']') => true,
            Some(')') => false,
            _ => return Err(bad()),
        };
        let inner = &s[1..s.len() - 1];
        let (a, b) = inner.split_once(',').ok_or_else(bad)?;
        let lo: f64 = a.trim().parse().map_err(|_| bad())?;
        let hi: f64 = b.trim().parse().map_err(|_| bad())?;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(bad());
        }
        Ok(Self { lo, hi, lo_closed, hi_closed })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakQuery {
    pub f: TestFunction,
    pub sigma: f64,
    pub tau: f64,
    pub c_q: f64,
    pub left: GridInterval,
    pub center: GridInterval,
    pub right: GridInterval,
}

impl PeakQuery {
    /// Query with `tau = 3`, `c_q = 2.72` and intervals `[0.48,0.49)`,
    /// `[0.49,0.51]`, `(0.51,0.52]`, i.e. the support of a box of
    /// half-width 0.01 at 1/2 with flanks of one precision step.
    pub fn new(f: TestFunction, sigma: f64) -> Self {
        Self {
            f,
            sigma,
            tau: DEFAULT_TAU,
            c_q: DEFAULT_CQ,
            left: GridInterval { lo: 0.48, hi: 0.49, lo_closed: true, hi_closed: false },
            center: GridInterval::closed(0.49, 0.51),
            right: GridInterval { lo: 0.51, hi: 0.52, lo_closed: false, hi_closed: true },
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.left.hi <= self.center.lo && self.center.hi <= self.right.lo) {
            return Err(Error::InvalidParameter("intervals must be ordered left < center < right".into()));
        }
        Ok(())
    }
}

/// Both sides of the peak inequality at one `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakTrace {
    pub n: usize,
    pub counts: [usize; 3],
    /// Center mean minus its noise allowance.
    pub center: f64,
    pub left: f64,
    pub right: f64,
    pub holds: bool,
}

fn interval_mean(f: &TestFunction, iv: &GridInterval, n: usize, name: &str) -> Result<(f64, usize)> {
    let idx = iv.indices(n);
    if idx.is_empty() {
        return Err(Error::EmptyInterval(format!("{name} interval {iv} holds no design point for n = {n}")));
    }
    let count = iv.count(n);
    let sum: f64 = idx.map(|i| f.eval(design_point(i, n))).sum();
    Ok((sum / count as f64, count))
}

/// Evaluates the peak inequality: center mean minus `sigma (sqrt(tau log n)
/// + c_q) / sqrt(|I_c|)` against each flank mean plus the same allowance.
pub fn peak_trace(q: &PeakQuery, n: usize) -> Result<PeakTrace> {
    q.validate()?;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")));
    }
    let (ml, cl) = interval_mean(&q.f, &q.left, n, "left")?;
    let (mc, cc) = interval_mean(&q.f, &q.center, n, "center")?;
    let (mr, cr) = interval_mean(&q.f, &q.right, n, "right")?;
    let allowance = q.sigma * ((q.tau * (n as f64).ln()).sqrt() + q.c_q);
    let center = mc - allowance / (cc as f64).sqrt();
    let left = ml + allowance / (cl as f64).sqrt();
    let right = mr + allowance / (cr as f64).sqrt();
    Ok(PeakTrace { n, counts: [cl, cc, cr], center, left, right, holds: center >= left.max(right) })
}

pub fn peak_condition(q: &PeakQuery, n: usize) -> Result<bool> {
    Ok(peak_trace(q, n)?.holds)
}

fn holds_or_empty(q: &PeakQuery, n: usize) -> Result<bool> {
    match peak_condition(q, n) {
        Err(Error::EmptyInterval(_)) => Ok(false),
        r => r,
    }
}

/// Smallest `n <= n_max` with the peak condition true, located by doubling
/// then bisection (the condition is eventually monotone) and then walked
/// down so that the condition fails at `n - 1`.
pub fn min_n_for_peak(q: &PeakQuery, n_max: usize) -> Result<Option<usize>> {
    q.validate()?;
    if n_max < 2 {
        return Ok(None);
    }
    let mut lo = 1usize; // condition treated as false here
    let mut hi = 2usize;
    loop {
        if holds_or_empty(q, hi)? {
            break;
        }
        if hi == n_max {
            return Ok(None);
        }
        lo = hi;
        hi = (hi * 2).min(n_max);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds_or_empty(q, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    while hi > 2 && holds_or_empty(q, hi - 1)? {
        hi -= 1;
    }
    Ok(Some(hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    /// Closed form from the test function.
    Analytic,
    /// `(f(t + 1/n) - f(t - 1/n)) n / 2`.
    CentralDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InflectionQuery {
    pub f: TestFunction,
    pub sigma: f64,
    pub tau: f64,
    pub c_q: f64,
    /// Centers of `I_l`, `I_c`, `I_r`; each interval is `center -+ k/n`.
    pub centers: [f64; 3],
    pub derivative: DerivativeMode,
}

impl InflectionQuery {
    pub fn new(f: TestFunction, sigma: f64, centers: [f64; 3]) -> Self {
        Self { f, sigma, tau: DEFAULT_TAU, c_q: DEFAULT_CQ, centers, derivative: DerivativeMode::Analytic }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflectionTrace {
    pub n: usize,
    pub k: usize,
    /// `min f'/n` over `I_c` minus the allowance.
    pub center: f64,
    pub left: f64,
    pub right: f64,
    pub holds: bool,
}

/// Derivative-peak inequality with intervals of half-width `k/n`: the
/// smallest `f'/n` on `I_c` minus `2 sigma (sqrt(tau log n) + c_q/sqrt 2) /
/// k^{3/2}` against the largest `f'/n` on each flank plus the same
/// allowance. Extremes of `f'` are taken over the grid points and
/// endpoints of each interval.
pub fn inflection_trace(q: &InflectionQuery, k: usize, n: usize) -> Result<InflectionTrace> {
    if k == 0 || n < 2 {
        return Err(Error::InvalidParameter(format!("need k >= 1 and n >= 2, got k = {k}, n = {n}")));
    }
    if !(q.sigma >= 0.0 && q.sigma.is_finite() && q.tau > 0.0) {
        return Err(Error::InvalidParameter("sigma must be >= 0 and tau > 0".into()));
    }
    let h = k as f64 / n as f64;
    let [cl, cc, cr] = q.centers;
    if !(cl + h < cc - h && cc + h < cr - h) {
        return Err(Error::InvalidParameter(format!("intervals of half-width {k}/{n} around {:?} overlap", q.centers)));
    }
    if cl - h < 0.0 || cr + h > 1.0 {
        return Err(Error::InvalidParameter(format!("intervals of half-width {k}/{n} leave [0, 1]")));
    }
    let nf = n as f64;
    let deriv = |t: f64| -> Result<f64> {
        match q.derivative {
            DerivativeMode::Analytic => q
                .f
                .derivative(t)
                .ok_or_else(|| Error::InvalidParameter(format!("{} has no analytic derivative", q.f))),
            DerivativeMode::CentralDifference => Ok((q.f.eval(t + 1.0 / nf) - q.f.eval(t - 1.0 / nf)) * nf / 2.0),
        }
    };
    let extremes = |c: f64| -> Result<(f64, f64)> {
        let iv = GridInterval::closed(c - h, c + h);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let pts = iv.indices(n).map(|i| design_point(i, n)).chain([c - h, c + h]);
        for t in pts {
            let d = deriv(t)? / nf;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        Ok((lo, hi))
    };
    let allowance = 2.0 * q.sigma * ((q.tau * nf.ln()).sqrt() + q.c_q / 2f64.sqrt()) / (k as f64).powf(1.5);
    let center = extremes(cc)?.0 - allowance;
    let left = extremes(cl)?.1 + allowance;
    let right = extremes(cr)?.1 + allowance;
    Ok(InflectionTrace { n, k, center, left, right, holds: center >= left.max(right) })
}

pub fn inflection_condition(q: &InflectionQuery, k: usize, n: usize) -> Result<bool> {
    Ok(inflection_trace(q, k, n)?.holds)
}

/// First `(n, k)` in the scan (n ascending, then k ascending) for which the
/// inflection condition holds; configurations with overlapping intervals
/// are skipped.
pub fn scan_inflection(q: &InflectionQuery, ns: &[usize], ks: &[usize]) -> Result<Option<InflectionTrace>> {
    for &n in ns {
        for &k in ks {
            match inflection_trace(q, k, n) {
                Ok(t) if t.holds => return Ok(Some(t)),
                Ok(_) | Err(Error::InvalidParameter(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(None)
}
