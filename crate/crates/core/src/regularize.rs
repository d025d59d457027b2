//! Smoothness regularization inside the confidence region.
//!
//! Discrete derivatives follow `D1 g_i = n (g_i - g_{i-1})` and
//! `D(k+1) = D1 D(k)`, so `D(k) g_i` is defined for `i = k+1..n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DesignSample;
use crate::multires::{is_member, IndexInterval, RegionSpec};
use crate::polyhedron::{
    push_region_rows, solve, solve_plain, ConstraintSystem, Curvature, Direction, LpStatus, Relation, Sense,
};

/// Signed binomial weights of the unscaled `k`-th difference, applied to
/// `g_{i-k}, ..., g_i`.
pub fn difference_weights(k: usize) -> Vec<f64> {
    let mut w = vec![1.0];
    for _ in 0..k {
        let mut next = vec![0.0; w.len() + 1];
        for (j, &c) in w.iter().enumerate() {
            next[j] -= c;
            next[j + 1] += c;
        }
        w = next;
    }
    w
}

/// `D(k) g_i` for `i = k+1..n` (empty when `n <= k`).
pub fn derivative(g: &[f64], k: usize) -> Vec<f64> {
    let mut d = g.to_vec();
    let n = g.len() as f64;
    for _ in 0..k {
        d = d.windows(2).map(|w| n * (w[1] - w[0])).collect();
    }
    d
}

/// Total variation of the `k`-th derivative, `sum |D(k+1) g_i|`.
pub fn tv(g: &[f64], k: usize) -> f64 {
    derivative(g, k + 1).iter().map(|d| d.abs()).sum()
}

/// `max_i |D(k) g_i|`; zero when no difference is defined.
pub fn supnorm_deriv(g: &[f64], k: usize) -> f64 {
    derivative(g, k).iter().fold(0.0, |m, d| m.max(d.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MonotoneKind {
    Increasing,
    Decreasing,
}

impl From<MonotoneKind> for Direction {
    fn from(k: MonotoneKind) -> Self {
        match k {
            MonotoneKind::Increasing => Direction::Nondecreasing,
            MonotoneKind::Decreasing => Direction::Nonincreasing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurvatureKind {
    Convex,
    Concave,
}

impl From<CurvatureKind> for Curvature {
    fn from(k: CurvatureKind) -> Self {
        match k {
            CurvatureKind::Convex => Curvature::Convex,
            CurvatureKind::Concave => Curvature::Concave,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonePiece {
    pub lo: usize,
    pub hi: usize,
    pub direction: MonotoneKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexPiece {
    pub lo: usize,
    pub hi: usize,
    pub curvature: CurvatureKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pin {
    pub index: usize,
    pub value: f64,
}

/// Closed index range `[lo, hi]` that may hold a local extreme (between two
/// monotone pieces) or an inflection point (between two convex pieces).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub lo: usize,
    pub hi: usize,
}

/// Shape restrictions, 1-based and inclusive. Consecutive pieces of one list
/// may share an endpoint but must not overlap further.
///
/// JSON form:
/// ```json
/// {"monotone": [{"lo": 1, "hi": 40, "direction": "increasing"}],
///  "convex": [{"lo": 1, "hi": 100, "curvature": "concave"}],
///  "pins": [{"index": 40, "value": 1.25}],
///  "extreme_anchors": [{"lo": 35, "hi": 45}],
///  "inflection_anchors": []}
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeSpec {
    pub monotone: Vec<MonotonePiece>,
    pub convex: Vec<ConvexPiece>,
    pub pins: Vec<Pin>,
    pub extreme_anchors: Vec<Anchor>,
    pub inflection_anchors: Vec<Anchor>,
}

fn check_pieces(what: &str, pieces: &[(usize, usize)], n: usize) -> Result<()> {
    let mut prev_hi = 0;
    for (m, &(lo, hi)) in pieces.iter().enumerate() {
        if lo == 0 || lo > hi || hi > n {
            return Err(Error::InvalidParameter(format!("{what} {m}: range [{lo},{hi}] outside 1..={n}")));
        }
        if m > 0 && lo < prev_hi {
            return Err(Error::InvalidParameter(format!("{what} {m}: [{lo},{hi}] overlaps its predecessor")));
        }
        prev_hi = hi;
    }
    Ok(())
}

fn check_anchors(what: &str, anchors: &[Anchor], pieces: usize, n: usize) -> Result<()> {
    if anchors.is_empty() {
        return Ok(());
    }
    if anchors.len() + 1 != pieces {
        return Err(Error::InvalidParameter(format!(
            "{} {what} anchors given for {pieces} pieces (need one fewer than pieces)",
            anchors.len()
        )));
    }
    for (m, a) in anchors.iter().enumerate() {
        if a.lo == 0 || a.lo > a.hi || a.hi > n {
            return Err(Error::InvalidParameter(format!("{what} anchor {m}: [{},{}] outside 1..={n}", a.lo, a.hi)));
        }
        if m > 0 && a.lo <= anchors[m - 1].hi {
            return Err(Error::InvalidParameter(format!("{what} anchors must be disjoint and increasing")));
        }
    }
    Ok(())
}

impl ShapeSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn is_empty(&self) -> bool {
        self.monotone.is_empty() && self.convex.is_empty() && self.pins.is_empty()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mono: Vec<_> = self.monotone.iter().map(|p| (p.lo, p.hi)).collect();
        let conv: Vec<_> = self.convex.iter().map(|p| (p.lo, p.hi)).collect();
        check_pieces("monotone piece", &mono, n)?;
        check_pieces("convex piece", &conv, n)?;
        for p in &self.pins {
            if p.index == 0 || p.index > n || !p.value.is_finite() {
                return Err(Error::InvalidParameter(format!("pin at {} = {} is invalid for n = {n}", p.index, p.value)));
            }
        }
        check_anchors("extreme", &self.extreme_anchors, self.monotone.len(), n)?;
        check_anchors("inflection", &self.inflection_anchors, self.convex.len(), n)?;
        Ok(())
    }

    /// Adds the piece and pin rows to `cs` (anchors impose no rows).
    pub fn apply(&self, cs: &mut ConstraintSystem) -> Result<()> {
        self.validate(cs.n_primary())?;
        for p in &self.monotone {
            cs.add_monotone(p.direction.into(), IndexInterval { lo: p.lo, hi: p.hi });
        }
        for p in &self.convex {
            cs.add_convex(p.curvature.into(), IndexInterval { lo: p.lo, hi: p.hi });
        }
        for p in &self.pins {
            cs.add_pin(p.index, p.value);
        }
        Ok(())
    }

    /// Whether `g` satisfies every piece and pin up to `tol` (absolute, on
    /// unscaled differences).
    pub fn holds(&self, g: &[f64], tol: f64) -> bool {
        let mono = self.monotone.iter().all(|p| {
            g[p.lo - 1..p.hi].windows(2).all(|w| match p.direction {
                MonotoneKind::Increasing => w[1] - w[0] >= -tol,
                MonotoneKind::Decreasing => w[0] - w[1] >= -tol,
            })
        });
        let conv = self.convex.iter().all(|p| {
            g[p.lo - 1..p.hi].windows(3).all(|w| {
                let d = w[2] - 2.0 * w[1] + w[0];
                match p.curvature {
                    CurvatureKind::Convex => d >= -tol,
                    CurvatureKind::Concave => d <= tol,
                }
            })
        });
        let pins = self.pins.iter().all(|p| (g[p.index - 1] - p.value).abs() <= tol * (1.0 + p.value.abs()));
        mono && conv && pins
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regularized {
    pub fit: Vec<f64>,
    /// `tv(fit, k)` or `supnorm_deriv(fit, k)`, recomputed from `fit`.
    pub objective: f64,
}

#[derive(Clone, Copy)]
enum Objective {
    TotalVariation,
    SupNorm,
}

const CERTIFY_MARGINS: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

fn region_and_shape(s: &DesignSample, spec: &RegionSpec, shape: Option<&ShapeSpec>, margin: f64) -> Result<ConstraintSystem> {
    let mut cs = ConstraintSystem::new(s.n());
    push_region_rows(&mut cs, s.values(), spec.family(), spec.threshold() * (1.0 - margin));
    if let Some(shape) = shape {
        shape.apply(&mut cs)?;
    }
    Ok(cs)
}

/// Adds the objective rows for order `k` and returns the LP objective.
fn add_objective(cs: &mut ConstraintSystem, k: usize, objective: Objective) -> Vec<(usize, f64)> {
    let n = cs.n_primary();
    match objective {
        Objective::TotalVariation => {
            let w = difference_weights(k + 1);
            let mut obj = Vec::new();
            for i in (k + 1)..n {
                let p = cs.add_aux(format!("tv+{}", i + 1), 0.0, f64::INFINITY);
                let m = cs.add_aux(format!("tv-{}", i + 1), 0.0, f64::INFINITY);
                let mut coefs: Vec<(usize, f64)> = w.iter().enumerate().map(|(j, &c)| (i - k - 1 + j, c)).collect();
                coefs.push((p, -1.0));
                coefs.push((m, 1.0));
                cs.push_row(coefs, Relation::Eq, 0.0);
                obj.push((p, 1.0));
                obj.push((m, 1.0));
            }
            obj
        }
        Objective::SupNorm => {
            let w = difference_weights(k);
            let b = cs.add_aux("bound", 0.0, f64::INFINITY);
            for i in k..n {
                let d: Vec<(usize, f64)> = w.iter().enumerate().map(|(j, &c)| (i - k + j, c)).collect();
                let mut up = d.clone();
                up.push((b, -1.0));
                cs.push_row(up, Relation::Le, 0.0);
                let mut down = d;
                down.push((b, 1.0));
                cs.push_row(down, Relation::Ge, 0.0);
            }
            vec![(b, 1.0)]
        }
    }
}

fn minimize(s: &DesignSample, spec: &RegionSpec, k: usize, shape: Option<&ShapeSpec>, objective: Objective) -> Result<Regularized> {
    spec.check_sample(s)?;
    let value = |fit: &[f64]| match objective {
        Objective::TotalVariation => tv(fit, k),
        Objective::SupNorm => supnorm_deriv(fit, k),
    };
    if spec.threshold() == 0.0 {
        // the region is the single point y
        let fit = s.values().to_vec();
        if shape.is_none_or(|sh| sh.holds(&fit, 0.0)) {
            return Ok(Regularized { objective: value(&fit), fit });
        }
        let base = region_and_shape(s, spec, shape, 0.0)?;
        return Err(Error::Infeasible(base.explain_infeasibility()?.unwrap_or_default()));
    }
    for (attempt, &margin) in CERTIFY_MARGINS.iter().enumerate() {
        let mut cs = region_and_shape(s, spec, shape, margin)?;
        let obj = add_objective(&mut cs, k, objective);
        for encoded in [true, false] {
            let r = if encoded { solve(&cs, &obj, Sense::Min) } else { solve_plain(&cs, &obj, Sense::Min) };
            let r = match r {
                Ok(r) => r,
                Err(Error::Numerical(_)) => continue,
                Err(e) => return Err(e),
            };
            match r.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible if attempt == 0 => {
                    let base = region_and_shape(s, spec, shape, 0.0)?;
                    let report = base.explain_infeasibility()?.unwrap_or_default();
                    return Err(Error::Infeasible(report));
                }
                LpStatus::Infeasible => break,
                LpStatus::Unbounded => return Err(Error::Numerical("regularization LP reported unbounded".into())),
            }
            let fit = r.primary(&cs).to_vec();
            let shape_ok = shape.is_none_or(|sh| sh.holds(&fit, 1e-9));
            if shape_ok && is_member(s, &fit, spec)? {
                return Ok(Regularized { objective: value(&fit), fit });
            }
        }
    }
    Err(Error::Numerical("could not certify membership of the LP minimizer".into()))
}

/// Minimizes `tv(g, k)` over the region, optionally under `shape`.
///
/// The returned fit passes [`is_member`] exactly; when the raw LP vertex
/// misses by rounding, the LP is re-solved on a slightly shrunk region.
/// Orders above 2 work but are numerically fragile.
pub fn minimize_tv(s: &DesignSample, spec: &RegionSpec, k: usize, shape: Option<&ShapeSpec>) -> Result<Regularized> {
    minimize(s, spec, k, shape, Objective::TotalVariation)
}

/// Minimizes `supnorm_deriv(g, k)` over the region, optionally under
/// `shape`; `objective` is the attained bound `B`.
pub fn minimize_supnorm(s: &DesignSample, spec: &RegionSpec, k: usize, shape: Option<&ShapeSpec>) -> Result<Regularized> {
    minimize(s, spec, k, shape, Objective::SupNorm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{generate_data, TestFunction};
    use crate::multires::{make_family, FamilyKind};
    use crate::tautstring::{taut_string_multires, DEFAULT_MAX_ITER};

    fn spec(n: usize, sigma: f64, kind: FamilyKind) -> RegionSpec {
        RegionSpec::new(sigma, 3.0, make_family(n, kind).unwrap()).unwrap()
    }

    #[test]
    fn weights() {
        assert_eq!(difference_weights(0), vec![1.0]);
        assert_eq!(difference_weights(1), vec![-1.0, 1.0]);
        assert_eq!(difference_weights(2), vec![1.0, -2.0, 1.0]);
        assert_eq!(difference_weights(3), vec![-1.0, 3.0, -3.0, 1.0]);
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv(&[2.0; 7], 0), 0.0);
        let lin: Vec<f64> = (1..=9).map(|i| i as f64 / 9.0).collect();
        assert!(tv(&lin, 1).abs() < 1e-9);
        assert_eq!(tv(&[0.0, 1.0, 0.0, 1.0], 0), 12.0);
    }

    #[test]
    fn polynomials_are_annihilated() {
        let n = 20;
        let q: Vec<f64> = (1..=n).map(|i| {
            let t = i as f64 / n as f64;
            1.0 - 2.0 * t + 3.0 * t * t
        }).collect();
        assert!(derivative(&q, 3).iter().all(|d| d.abs() < 1e-6));
        assert!(tv(&q, 2) < 1e-6);
    }

    #[test]
    fn supnorm_examples() {
        assert_eq!(supnorm_deriv(&[0.0; 5], 2), 0.0);
        assert_eq!(supnorm_deriv(&[1.0, -3.0], 0), 3.0);
        let n = 50;
        let lin: Vec<f64> = (1..=n).map(|i| -2.5 * i as f64 / n as f64).collect();
        assert!((supnorm_deriv(&lin, 1) - 2.5).abs() < 1e-9);
        let f = TestFunction::Sine { frequency: 4.0 * std::f64::consts::PI };
        let s = f.sample(500);
        let target = 16.0 * std::f64::consts::PI.powi(2);
        assert!((supnorm_deriv(&s, 2) - target).abs() < 0.02 * target);
    }

    #[test]
    fn constant_data_has_zero_tv() {
        let s = DesignSample::new(vec![1.5; 16]).unwrap();
        let r = minimize_tv(&s, &spec(16, 0.0, FamilyKind::Dyadic(2.0)), 0, None).unwrap();
        assert_eq!(r.objective, 0.0);
        assert!(r.fit.iter().all(|&g| g == 1.5));
        // with noise allowed any constant within T / sqrt(n) is optimal
        let sp = spec(16, 0.3, FamilyKind::Dyadic(2.0));
        let r = minimize_tv(&s, &sp, 0, None).unwrap();
        assert!(r.objective < 1e-9);
        let slack = sp.threshold() / 4.0;
        assert!(r.fit.iter().all(|g| (g - 1.5).abs() <= slack + 1e-9));
    }

    #[test]
    fn linear_data_has_zero_tv_of_slope() {
        let n = 24;
        let y: Vec<f64> = (1..=n).map(|i| 0.5 + 2.0 * i as f64 / n as f64).collect();
        let s = DesignSample::new(y).unwrap();
        let r = minimize_tv(&s, &spec(n, 0.1, FamilyKind::All), 1, None).unwrap();
        assert!(r.objective < 1e-6, "{}", r.objective);
    }

    #[test]
    fn supnorm_zero_cases() {
        let s = DesignSample::new(vec![-0.7; 12]).unwrap();
        let r = minimize_supnorm(&s, &spec(12, 0.0, FamilyKind::Dyadic(2.0)), 2, None).unwrap();
        assert!(r.objective < 1e-9);
        let s = DesignSample::new(vec![0.0, 0.0]).unwrap();
        let r = minimize_supnorm(&s, &spec(2, 0.0, FamilyKind::All), 0, None).unwrap();
        assert_eq!(r.objective, 0.0);
        assert_eq!(r.fit, vec![0.0, 0.0]);
    }

    #[test]
    fn tv_fit_beats_taut_string() {
        for seed in 0..5 {
            let f = TestFunction::Doppler;
            let s = generate_data(&f, 128, 0.1, seed).unwrap();
            let sp = spec(128, 0.1, FamilyKind::Dyadic(2.0));
            let taut = taut_string_multires(&s, 0.1, 3.0, sp.family(), DEFAULT_MAX_ITER).unwrap();
            let r = minimize_tv(&s, &sp, 0, None).unwrap();
            assert!(is_member(&s, &r.fit, &sp).unwrap());
            assert!(r.objective <= tv(&taut.fit, 0) * (1.0 + 1e-7), "seed {seed}");
        }
    }

    #[test]
    fn shape_never_lowers_the_optimum() {
        let n = 40;
        let f = TestFunction::Sine { frequency: 2.0 * std::f64::consts::PI };
        let s = generate_data(&f, n, 0.2, 3).unwrap();
        let sp = spec(n, 0.2, FamilyKind::Dyadic(2.0));
        let free = minimize_tv(&s, &sp, 2, None).unwrap();
        let shape = ShapeSpec {
            monotone: vec![
                MonotonePiece { lo: 1, hi: 10, direction: MonotoneKind::Increasing },
                MonotonePiece { lo: 10, hi: 30, direction: MonotoneKind::Decreasing },
                MonotonePiece { lo: 30, hi: 40, direction: MonotoneKind::Increasing },
            ],
            ..Default::default()
        };
        let shaped = minimize_tv(&s, &sp, 2, Some(&shape)).unwrap();
        assert!(shape.holds(&shaped.fit, 1e-9));
        assert!(shaped.objective >= free.objective * (1.0 - 1e-7));
    }

    #[test]
    fn infeasible_shape_is_explained() {
        let s = DesignSample::new(vec![10.0, -10.0, 0.0]).unwrap();
        let sp = spec(3, 1.0, FamilyKind::All);
        let shape = ShapeSpec {
            monotone: vec![MonotonePiece { lo: 1, hi: 2, direction: MonotoneKind::Increasing }],
            pins: vec![Pin { index: 3, value: 0.0 }],
            ..Default::default()
        };
        match minimize_tv(&s, &sp, 0, Some(&shape)) {
            Err(Error::Infeasible(rep)) => {
                assert!(rep.blocks.iter().any(|b| b == "nondecreasing on [1,2]"), "{rep}");
                assert!(!rep.blocks.iter().any(|b| b.starts_with("pin")), "{rep}");
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn shape_json_roundtrip() {
        let text = r#"{"monotone":[{"lo":1,"hi":5,"direction":"increasing"},{"lo":5,"hi":9,"direction":"decreasing"}],
                       "pins":[{"index":5,"value":2.0}],"extreme_anchors":[{"lo":4,"hi":6}]}"#;
        let shape = ShapeSpec::from_json(text).unwrap();
        shape.validate(9).unwrap();
        assert_eq!(shape.monotone[1].direction, MonotoneKind::Decreasing);
        let back = ShapeSpec::from_json(&serde_json::to_string(&shape).unwrap()).unwrap();
        assert_eq!(back, shape);
        assert!(shape.validate(8).is_err());
        assert!(ShapeSpec::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn overlapping_pieces_rejected() {
        let shape = ShapeSpec {
            monotone: vec![
                MonotonePiece { lo: 1, hi: 5, direction: MonotoneKind::Increasing },
                MonotonePiece { lo: 4, hi: 9, direction: MonotoneKind::Decreasing },
            ],
            ..Default::default()
        };
        assert!(shape.validate(9).is_err());
    }
}
