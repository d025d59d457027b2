//! Interval families, the multiscale residual statistic and membership in
//! the confidence region, plus Monte Carlo calibration of `tau`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{replication_rng, standard_normal, DesignSample};

/// A closed run of design indices `lo..=hi`, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndexInterval {
    pub lo: usize,
    pub hi: usize,
}

impl IndexInterval {
    pub fn new(lo: usize, hi: usize) -> Result<Self> {
        if lo == 0 || lo > hi {
            return Err(Error::InvalidParameter(format!("bad index interval [{lo},{hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn singleton(i: usize) -> Self {
        Self { lo: i, hi: i }
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        self.lo <= i && i <= self.hi
    }

    /// Zero-based half-open range over a data slice.
    pub fn range(&self) -> std::ops::Range<usize> {
        self.lo - 1..self.hi
    }
}

impl fmt::Display for IndexInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyKind {
    /// Every interval `[j, k]`, `1 <= j <= k <= n`.
    All,
    /// Geometric multiresolution scheme with ratio `lambda > 1`, plus all
    /// singletons.
    Dyadic(f64),
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::All => write!(f, "all"),
            FamilyKind::Dyadic(l) => write!(f, "dyadic:{l}"),
        }
    }
}

/// Accepts `all`, `dyadic` (ratio 2) and `dyadic:LAMBDA`.
impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(FamilyKind::All),
            "dyadic" => Ok(FamilyKind::Dyadic(2.0)),
            other => match other.strip_prefix("dyadic:") {
                Some(l) => l
                    .parse::<f64>()
                    .map(FamilyKind::Dyadic)
                    .map_err(|_| Error::Parse(format!("bad family ratio in '{s}'"))),
                None => Err(Error::Parse(format!("unknown interval family '{s}'"))),
            },
        }
    }
}

/// A finite family of index intervals on a grid of size `n`, kept in
/// canonical `(lo, hi)` order without duplicates. Always contains every
/// singleton.
///
/// The all-intervals family is enumerated on the fly rather than stored.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalFamily {
    n: usize,
    kind: FamilyKind,
    stored: Vec<IndexInterval>,
}

pub fn make_family(n: usize, kind: FamilyKind) -> Result<IntervalFamily> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    match kind {
        FamilyKind::All => Ok(IntervalFamily { n, kind, stored: Vec::new() }),
        FamilyKind::Dyadic(lambda) => {
            if !(lambda > 1.0 && lambda.is_finite()) {
                return Err(Error::InvalidParameter(format!("family ratio must exceed 1, got {lambda}")));
            }
            let mut stored: Vec<IndexInterval> = (1..=n).map(IndexInterval::singleton).collect();
            let levels = ((n as f64).ln() / lambda.ln()).ceil() as i32;
            for k in 1..=levels {
                let scale = lambda.powi(k);
                let count = (n as f64 / scale).ceil() as usize;
                for j in 1..=count {
                    let lo = ((j - 1) as f64 * scale + 1.0).floor() as usize;
                    let hi = ((j as f64 * scale).floor() as usize).min(n);
                    if lo >= 1 && lo <= hi {
                        stored.push(IndexInterval { lo, hi });
                    }
                }
            }
            stored.sort_unstable();
            stored.dedup();
            Ok(IntervalFamily { n, kind, stored })
        }
    }
}

impl IntervalFamily {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        match self.kind {
            FamilyKind::All => self.n * (self.n + 1) / 2,
            FamilyKind::Dyadic(_) => self.stored.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Intervals in canonical order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = IndexInterval> + '_> {
        match self.kind {
            FamilyKind::All => {
                let n = self.n;
                Box::new((1..=n).flat_map(move |lo| (lo..=n).map(move |hi| IndexInterval { lo, hi })))
            }
            FamilyKind::Dyadic(_) => Box::new(self.stored.iter().copied()),
        }
    }

    pub fn contains(&self, interval: &IndexInterval) -> bool {
        match self.kind {
            FamilyKind::All => interval.lo >= 1 && interval.lo <= interval.hi && interval.hi <= self.n,
            FamilyKind::Dyadic(_) => self.stored.binary_search(interval).is_ok(),
        }
    }
}

/// Value and (first) maximizing interval of the multiscale statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiscaleStat {
    pub value: f64,
    pub argmax: IndexInterval,
}

/// Running sums `P_0 = 0`, `P_k = r_1 + .. + r_k`.
pub(crate) fn prefix_sums(values: &[f64]) -> Vec<f64> {
    let mut p = Vec::with_capacity(values.len() + 1);
    p.push(0.0);
    let mut acc = 0.0;
    for v in values {
        acc += v;
        p.push(acc);
    }
    p
}

/// `max_I |sum_{i in I} r_i| / sqrt|I|` over the family, with the first
/// maximizer in canonical order.
pub fn residual_stat(residuals: &[f64], fam: &IntervalFamily) -> Result<MultiscaleStat> {
    if residuals.len() != fam.n() {
        return Err(Error::LengthMismatch { expected: fam.n(), got: residuals.len() });
    }
    let p = prefix_sums(residuals);
    let mut best = MultiscaleStat { value: f64::NEG_INFINITY, argmax: IndexInterval::singleton(1) };
    for iv in fam.iter() {
        let w = ((p[iv.hi] - p[iv.lo - 1]) / (iv.len() as f64).sqrt()).abs();
        if w > best.value {
            best = MultiscaleStat { value: w, argmax: iv };
        }
    }
    Ok(best)
}

/// `max_I |w(y, g, I)|` for `w(y, g, I) = sum_{i in I} (y_i - g_i) / sqrt|I|`.
pub fn multiscale_stat(s: &DesignSample, g: &[f64], fam: &IntervalFamily) -> Result<MultiscaleStat> {
    if g.len() != s.n() {
        return Err(Error::LengthMismatch { expected: s.n(), got: g.len() });
    }
    let r: Vec<f64> = s.values().iter().zip(g).map(|(y, g)| y - g).collect();
    residual_stat(&r, fam)
}

/// The confidence region as data: noise scale, `tau` and interval family.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    sigma: f64,
    tau: f64,
    family: IntervalFamily,
}

pub const DEFAULT_TAU: f64 = 3.0;

impl RegionSpec {
    pub fn new(sigma: f64, tau: f64, family: IntervalFamily) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be finite and > 0, got {tau}")));
        }
        Ok(Self { sigma, tau, family })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn family(&self) -> &IntervalFamily {
        &self.family
    }

    pub fn n(&self) -> usize {
        self.family.n()
    }

    /// `sigma sqrt(tau log n)`; zero for `n = 1`.
    pub fn threshold(&self) -> f64 {
        self.sigma * (self.tau * (self.n() as f64).ln()).sqrt()
    }

    pub(crate) fn check_sample(&self, s: &DesignSample) -> Result<()> {
        if s.n() != self.n() {
            return Err(Error::LengthMismatch { expected: self.n(), got: s.n() });
        }
        Ok(())
    }
}

pub fn is_member(s: &DesignSample, g: &[f64], spec: &RegionSpec) -> Result<bool> {
    spec.check_sample(s)?;
    Ok(multiscale_stat(s, g, spec.family())?.value <= spec.threshold())
}

/// Simulated null distribution of the multiscale statistic.
#[derive(Debug, Clone)]
pub struct TauCalibration {
    pub n: usize,
    pub alpha: f64,
    /// The `ceil(alpha * sims)`-th order statistic of the simulated maxima.
    pub quantile: f64,
    pub tau: f64,
    /// Simulated maxima, sorted ascending.
    pub maxima: Vec<f64>,
}

impl TauCalibration {
    /// `tau` read off the same simulated maxima at another level.
    pub fn tau_at(&self, alpha: f64) -> Result<f64> {
        let q = order_statistic(&self.maxima, alpha)?;
        Ok(q * q / (self.n as f64).ln())
    }
}

fn order_statistic(sorted: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let rank = ((alpha * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

/// Maximum of the multiscale statistic for pure noise from replication
/// `rep`.
pub fn null_maximum(n: usize, fam: &IntervalFamily, seed: u64, rep: u64) -> f64 {
    let mut rng = replication_rng(seed, rep);
    let z = standard_normal(&mut rng, n);
    residual_stat(&z, fam).map(|m| m.value).unwrap_or(f64::NAN)
}

/// Estimates `tau_n(alpha)` as `q^2 / log n`, `q` the empirical
/// `alpha`-quantile of the noise maximum over `fam`.
pub fn calibrate_tau(
    n: usize,
    fam: &IntervalFamily,
    alpha: f64,
    n_sim: usize,
    seed: u64,
) -> Result<TauCalibration> {
    if n < 2 {
        return Err(Error::InvalidParameter("tau calibration needs n >= 2 (log n = 0 otherwise)".into()));
    }
    if fam.n() != n {
        return Err(Error::LengthMismatch { expected: n, got: fam.n() });
    }
    if n_sim < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 simulations, got {n_sim}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut maxima: Vec<f64> =
        (0..n_sim as u64).into_par_iter().map(|rep| null_maximum(n, fam, seed, rep)).collect();
    maxima.sort_by(f64::total_cmp);
    let quantile = order_statistic(&maxima, alpha)?;
    Ok(TauCalibration { n, alpha, quantile, tau: quantile * quantile / (n as f64).ln(), maxima })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: usize, hi: usize) -> IndexInterval {
        IndexInterval { lo, hi }
    }

    #[test]
    fn dyadic_eight() {
        let fam = make_family(8, FamilyKind::Dyadic(2.0)).unwrap();
        let mut expected: Vec<IndexInterval> = (1..=8).map(IndexInterval::singleton).collect();
        expected.extend([iv(1, 2), iv(3, 4), iv(5, 6), iv(7, 8), iv(1, 4), iv(5, 8), iv(1, 8)]);
        expected.sort();
        assert_eq!(fam.iter().collect::<Vec<_>>(), expected);
        assert_eq!(fam.len(), 15);
    }

    #[test]
    fn dyadic_five_dedups() {
        let fam = make_family(5, FamilyKind::Dyadic(2.0)).unwrap();
        let mut expected: Vec<IndexInterval> = (1..=5).map(IndexInterval::singleton).collect();
        expected.extend([iv(1, 2), iv(3, 4), iv(1, 4), iv(1, 5)]);
        expected.sort();
        assert_eq!(fam.iter().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn single_point_families() {
        for kind in [FamilyKind::All, FamilyKind::Dyadic(2.0), FamilyKind::Dyadic(1.3)] {
            let fam = make_family(1, kind).unwrap();
            assert_eq!(fam.iter().collect::<Vec<_>>(), vec![iv(1, 1)]);
        }
    }

    #[test]
    fn all_family_size() {
        let fam = make_family(10, FamilyKind::All).unwrap();
        assert_eq!(fam.len(), 55);
        assert_eq!(fam.iter().count(), 55);
        assert!(fam.contains(&iv(3, 9)));
    }

    #[test]
    fn ratio_must_exceed_one() {
        assert!(make_family(10, FamilyKind::Dyadic(1.0)).is_err());
        assert!(make_family(10, FamilyKind::Dyadic(0.5)).is_err());
    }

    #[test]
    fn parse_kind() {
        assert_eq!("all".parse::<FamilyKind>().unwrap(), FamilyKind::All);
        assert_eq!("dyadic:2".parse::<FamilyKind>().unwrap(), FamilyKind::Dyadic(2.0));
        assert_eq!("dyadic:1.5".parse::<FamilyKind>().unwrap(), FamilyKind::Dyadic(1.5));
        assert!("wavelet".parse::<FamilyKind>().is_err());
    }

    #[test]
    fn zero_residuals_give_first_interval() {
        let s = DesignSample::new(vec![1.0, -2.0, 3.0]).unwrap();
        let fam = make_family(3, FamilyKind::All).unwrap();
        let m = multiscale_stat(&s, s.values(), &fam).unwrap();
        assert_eq!(m.value, 0.0);
        assert_eq!(m.argmax, iv(1, 1));
    }

    #[test]
    fn constant_residuals() {
        let s = DesignSample::new(vec![1.0; 4]).unwrap();
        let fam = make_family(4, FamilyKind::Dyadic(4.0)).unwrap();
        assert!(fam.contains(&iv(1, 4)));
        let m = multiscale_stat(&s, &[0.0; 4], &fam).unwrap();
        assert_eq!(m.value, 2.0);
        assert_eq!(m.argmax, iv(1, 4));
    }

    #[test]
    fn length_mismatch() {
        let s = DesignSample::new(vec![1.0; 4]).unwrap();
        let fam = make_family(4, FamilyKind::All).unwrap();
        assert!(matches!(multiscale_stat(&s, &[0.0; 3], &fam), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn two_point_membership() {
        let s = DesignSample::new(vec![0.0, 0.0]).unwrap();
        let spec = RegionSpec::new(1.0, 3.0, make_family(2, FamilyKind::Dyadic(2.0)).unwrap()).unwrap();
        assert!((spec.threshold() - (3.0 * 2f64.ln()).sqrt()).abs() < 1e-15);
        assert!((spec.threshold() - 1.4422).abs() < 5e-4);
        assert!(!is_member(&s, &[2.0, 0.0], &spec).unwrap());
        assert!(is_member(&s, &[0.0, 0.0], &spec).unwrap());
    }

    #[test]
    fn single_point_threshold_is_zero() {
        let spec = RegionSpec::new(1.0, 3.0, make_family(1, FamilyKind::All).unwrap()).unwrap();
        assert_eq!(spec.threshold(), 0.0);
    }

    #[test]
    fn calibration_rejects_bad_input() {
        let fam1 = make_family(1, FamilyKind::All).unwrap();
        assert!(calibrate_tau(1, &fam1, 0.95, 200, 0).is_err());
        let fam = make_family(20, FamilyKind::All).unwrap();
        assert!(calibrate_tau(20, &fam, 1.0, 200, 0).is_err());
        assert!(calibrate_tau(20, &fam, 0.95, 50, 0).is_err());
    }

    #[test]
    fn tau_monotone_in_alpha() {
        let fam = make_family(64, FamilyKind::Dyadic(2.0)).unwrap();
        let cal = calibrate_tau(64, &fam, 0.5, 400, 3).unwrap();
        let mut prev = 0.0;
        for a in [0.05, 0.2, 0.5, 0.8, 0.9, 0.95, 0.99, 0.999] {
            let t = cal.tau_at(a).unwrap();
            assert!(t >= prev);
            prev = t;
        }
    }

    #[test]
    fn calibration_deterministic_under_parallelism() {
        let fam = make_family(32, FamilyKind::All).unwrap();
        let a = calibrate_tau(32, &fam, 0.9, 300, 11).unwrap();
        let b = calibrate_tau(32, &fam, 0.9, 300, 11).unwrap();
        assert_eq!(a.tau.to_bits(), b.tau.to_bits());
    }
}
