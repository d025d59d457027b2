//! Monte Carlo coverage of the region and of the bands.

use rayon::prelude::*;
use serde::Serialize;

use crate::bands::BandSpec;
use crate::error::{Error, Result};
use crate::grid::{estimate_sigma, generate_replication, DesignSample, TestFunction};
use crate::multires::{is_member, make_family, FamilyKind, IntervalFamily, RegionSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaMode {
    /// Use the generating noise level.
    Known,
    /// Use [`estimate_sigma`] on each replication.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoverageMethod {
    /// The event `f in A_n`.
    Region,
    /// The event `lb <= f <= ub` at every design point.
    Band(BandSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageConfig {
    pub f: TestFunction,
    pub n: usize,
    pub sigma: f64,
    pub sigma_mode: SigmaMode,
    pub tau: f64,
    pub family: FamilyKind,
    pub method: CoverageMethod,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageEstimate {
    pub covered: usize,
    pub reps: usize,
    pub proportion: f64,
    /// Binomial standard error `sqrt(p (1 - p) / reps)`.
    pub std_error: f64,
}

impl CoverageEstimate {
    pub fn from_counts(covered: usize, reps: usize) -> Self {
        let p = covered as f64 / reps as f64;
        Self { covered, reps, proportion: p, std_error: (p * (1.0 - p) / reps as f64).sqrt() }
    }
}

/// Whether replication `rep` of `cfg` covers `f`.
pub fn replication_covers(cfg: &CoverageConfig, fam: &IntervalFamily, f: &[f64], rep: u64) -> Result<bool> {
    let s = generate_replication(&cfg.f, cfg.n, cfg.sigma, cfg.seed, rep)?;
    covers(cfg, fam, f, &s)
}

fn covers(cfg: &CoverageConfig, fam: &IntervalFamily, f: &[f64], s: &DesignSample) -> Result<bool> {
    let sigma = match cfg.sigma_mode {
        SigmaMode::Known => cfg.sigma,
        SigmaMode::Estimated => estimate_sigma(s)?,
    };
    let spec = RegionSpec::new(sigma, cfg.tau, fam.clone())?;
    match cfg.method {
        CoverageMethod::Region => is_member(s, f, &spec),
        CoverageMethod::Band(b) => match b.compute(s, &spec) {
            Ok(band) => Ok(band.contains(f)),
            // an empty restricted region cannot contain f
            Err(Error::Infeasible(_)) => Ok(false),
            Err(e) => Err(e),
        },
    }
}

/// Runs `cfg.reps` replications in parallel; replication `r` draws its
/// noise from stream `r` of `cfg.seed`, so the count does not depend on
/// scheduling.
pub fn simulate_coverage(cfg: &CoverageConfig) -> Result<CoverageEstimate> {
    if cfg.reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    if cfg.n < 2 && cfg.sigma_mode == SigmaMode::Estimated {
        return Err(Error::InsufficientData(cfg.n));
    }
    let fam = make_family(cfg.n, cfg.family)?;
    let f = cfg.f.sample(cfg.n);
    let hits: Vec<bool> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| replication_covers(cfg, &fam, &f, rep))
        .collect::<Result<_>>()?;
    Ok(CoverageEstimate::from_counts(hits.iter().filter(|&&h| h).count(), cfg.reps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::Windows;
    use crate::polyhedron::Direction;

    fn config(method: CoverageMethod, sigma: f64) -> CoverageConfig {
        CoverageConfig {
            f: TestFunction::Exponential { rate: 5.0 },
            n: 64,
            sigma,
            sigma_mode: SigmaMode::Known,
            tau: 3.0,
            family: FamilyKind::Dyadic(2.0),
            method,
            reps: 20,
            seed: 7,
        }
    }

    #[test]
    fn zero_noise_region_is_covered() {
        let est = simulate_coverage(&config(CoverageMethod::Region, 0.0)).unwrap();
        assert_eq!(est.covered, 20);
        assert_eq!(est.proportion, 1.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn deterministic_across_runs() {
        let m = CoverageMethod::Band(BandSpec::MonotoneSuperfast(Direction::Nondecreasing, 2.0));
        let a = simulate_coverage(&config(m, 1.0)).unwrap();
        let b = simulate_coverage(&config(m, 1.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_matches_serial() {
        let cfg = config(CoverageMethod::Band(BandSpec::SmoothFast(200.0, Windows::Geometric(2.0))), 1.0);
        let fam = make_family(cfg.n, cfg.family).unwrap();
        let f = cfg.f.sample(cfg.n);
        let serial = (0..cfg.reps as u64).filter(|&r| replication_covers(&cfg, &fam, &f, r).unwrap()).count();
        assert_eq!(simulate_coverage(&cfg).unwrap().covered, serial);
    }

    #[test]
    fn standard_error() {
        let e = CoverageEstimate::from_counts(90, 100);
        assert!((e.std_error - 0.03).abs() < 1e-12);
    }

    #[test]
    fn rejects_zero_reps() {
        let mut cfg = config(CoverageMethod::Region, 1.0);
        cfg.reps = 0;
        assert!(simulate_coverage(&cfg).is_err());
    }
}
