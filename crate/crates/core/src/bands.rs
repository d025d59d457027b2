//! Pointwise confidence bands at the design points.
//!
//! Fast and superfast bands only use window averages with the region
//! threshold `T = sigma * sqrt(tau log n)`; they are honest whenever the
//! noise stays below `T` on every interval. LP bands optimize each `g_i`
//! over the region intersected with a shape or smoothness restriction.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, InfeasibilityReport, Result};
use crate::grid::DesignSample;
use crate::multires::{prefix_sums, IndexInterval, RegionSpec};
use crate::polyhedron::{coordinate_ranges, push_region_rows, ConstraintSystem, Curvature, Direction, Relation};
use crate::regularize::{
    minimize_tv, Anchor, ConvexPiece, CurvatureKind, MonotoneKind, MonotonePiece, ShapeSpec,
};
use crate::tautstring::{local_extremes, taut_string_multires, ExtremeKind, DEFAULT_MAX_ITER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandMethod {
    Universal,
    MonotoneLp,
    MonotoneFast,
    MonotoneSuperfast,
    ConvexLp,
    ConvexFast,
    ConvexSuperfast,
    Piecewise,
    SmoothFast,
    SmoothLp,
}

impl fmt::Display for BandMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BandMethod::Universal => "universal",
            BandMethod::MonotoneLp => "monotone-lp",
            BandMethod::MonotoneFast => "monotone-fast",
            BandMethod::MonotoneSuperfast => "monotone-superfast",
            BandMethod::ConvexLp => "convex-lp",
            BandMethod::ConvexFast => "convex-fast",
            BandMethod::ConvexSuperfast => "convex-superfast",
            BandMethod::Piecewise => "piecewise",
            BandMethod::SmoothFast => "smooth-fast",
            BandMethod::SmoothLp => "smooth-lp",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    /// `lb <= ub` everywhere and, for LP bands, the restricted region is
    /// nonempty.
    pub feasible: bool,
    pub method: BandMethod,
    pub theta: Option<f64>,
    pub k_bound: Option<f64>,
    pub reason: Option<String>,
}

impl Band {
    fn new(lb: Vec<f64>, ub: Vec<f64>, method: BandMethod) -> Self {
        let crossing = lb.iter().zip(&ub).position(|(l, u)| l > u);
        let reason = crossing.map(|i| format!("lower bound exceeds upper bound at design point {}", i + 1));
        Self { feasible: crossing.is_none(), lb, ub, method, theta: None, k_bound: None, reason }
    }

    fn infeasible(n: usize, method: BandMethod, report: &InfeasibilityReport) -> Self {
        Self {
            lb: vec![f64::NAN; n],
            ub: vec![f64::NAN; n],
            feasible: false,
            method,
            theta: None,
            k_bound: None,
            reason: Some(format!("restricted region is empty: {report}")),
        }
    }

    fn with_theta(mut self, windows: Windows) -> Self {
        if let Windows::Geometric(t) = windows {
            self.theta = Some(t);
        }
        self
    }

    pub fn n(&self) -> usize {
        self.lb.len()
    }

    /// Whether `lb_i <= f_i <= ub_i` at every design point.
    pub fn contains(&self, f: &[f64]) -> bool {
        f.len() == self.n() && self.lb.iter().zip(&self.ub).zip(f).all(|((l, u), v)| l <= v && v <= u)
    }
}

/// Window set for fast bounds: every admissible size, or the geometric grid
/// of a ratio `theta > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Windows {
    All,
    Geometric(f64),
}

impl Windows {
    fn validate(self) -> Result<Self> {
        match self {
            Windows::Geometric(t) if !(t > 1.0) || t.is_nan() => {
                Err(Error::InvalidParameter(format!("theta must exceed 1, got {t}")))
            }
            w => Ok(w),
        }
    }

    /// Values `v <= max` taken from `0..=max` (`All`) or from
    /// `floor(theta^m - shift)`, `m >= 0`.
    fn values(self, shift: f64, max: usize) -> Vec<usize> {
        match self {
            Windows::All => (0..=max).collect(),
            Windows::Geometric(theta) => {
                let mut out = Vec::new();
                let mut p = 1.0f64;
                loop {
                    let v = (p - shift).floor();
                    if v > max as f64 {
                        break;
                    }
                    if v >= 0.0 && out.last() != Some(&(v as usize)) {
                        out.push(v as usize);
                    }
                    p *= theta;
                    if !p.is_finite() {
                        break;
                    }
                }
                out
            }
        }
    }

    /// Monotone window lengths `k + 1`, `k` on the `floor(theta^m - 1)` grid.
    fn monotone_lengths(self, n: usize) -> Vec<usize> {
        self.values(1.0, n.saturating_sub(1)).into_iter().map(|k| k + 1).collect()
    }

    /// Centered half-widths on the `floor(theta^m - 1)` grid.
    fn half_widths(self, n: usize) -> Vec<usize> {
        self.values(1.0, n / 2)
    }

    /// Positive offsets and lengths on the `floor(theta^m)` grid.
    fn offsets(self, n: usize) -> Vec<usize> {
        self.values(0.0, n).into_iter().filter(|&v| v >= 1).collect()
    }
}

fn window_mean(prefix: &[f64], y: &[f64], lo: usize, len: usize) -> f64 {
    if len == 1 {
        y[lo]
    } else {
        (prefix[lo + len] - prefix[lo]) / len as f64
    }
}

/// Band `y -+ T`.
pub fn universal_band(s: &DesignSample, spec: &RegionSpec) -> Result<Band> {
    spec.check_sample(s)?;
    let t = spec.threshold();
    let lb = s.values().iter().map(|y| y - t).collect();
    let ub = s.values().iter().map(|y| y + t).collect();
    Ok(Band::new(lb, ub, BandMethod::Universal))
}

fn negate_swap((lb, ub): (Vec<f64>, Vec<f64>)) -> (Vec<f64>, Vec<f64>) {
    (ub.into_iter().map(|v| -v).collect(), lb.into_iter().map(|v| -v).collect())
}

fn negated(y: &[f64]) -> Vec<f64> {
    y.iter().map(|v| -v).collect()
}

fn increasing_bounds(y: &[f64], t: f64, windows: Windows, sweep: bool) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let prefix = prefix_sums(y);
    let lengths = windows.monotone_lengths(n);
    let noise: Vec<f64> = lengths.iter().map(|&w| t / (w as f64).sqrt()).collect();
    let mut lb = vec![f64::NEG_INFINITY; n];
    let mut ub = vec![f64::INFINITY; n];
    for i in 0..n {
        for (&w, &e) in lengths.iter().zip(&noise) {
            if w <= i + 1 {
                lb[i] = lb[i].max(window_mean(&prefix, y, i + 1 - w, w) - e);
            }
            if w <= n - i {
                ub[i] = ub[i].min(window_mean(&prefix, y, i, w) + e);
            }
        }
    }
    if sweep {
        for i in (0..n.saturating_sub(1)).rev() {
            ub[i] = ub[i].min(ub[i + 1]);
        }
        for i in 1..n {
            lb[i] = lb[i].max(lb[i - 1]);
        }
    }
    (lb, ub)
}

/// Fast monotone bounds on raw values; `sweep` applies the monotonization
/// passes.
pub fn monotone_bounds(y: &[f64], threshold: f64, direction: Direction, windows: Windows, sweep: bool) -> (Vec<f64>, Vec<f64>) {
    match direction {
        Direction::Nondecreasing => increasing_bounds(y, threshold, windows, sweep),
        Direction::Nonincreasing => negate_swap(increasing_bounds(&negated(y), threshold, windows, sweep)),
    }
}

fn monotone_band(s: &DesignSample, spec: &RegionSpec, direction: Direction, windows: Windows, method: BandMethod) -> Result<Band> {
    spec.check_sample(s)?;
    let windows = windows.validate()?;
    let (lb, ub) = monotone_bounds(s.values(), spec.threshold(), direction, windows, true);
    Ok(Band::new(lb, ub, method).with_theta(windows))
}

/// Trailing/leading window bounds over every window size, swept monotone.
pub fn fast_band_monotone(s: &DesignSample, spec: &RegionSpec, direction: Direction) -> Result<Band> {
    monotone_band(s, spec, direction, Windows::All, BandMethod::MonotoneFast)
}

/// As [`fast_band_monotone`] with window sizes `floor(theta^k - 1) + 1`.
pub fn superfast_band_monotone(s: &DesignSample, spec: &RegionSpec, direction: Direction, theta: f64) -> Result<Band> {
    monotone_band(s, spec, direction, Windows::Geometric(theta), BandMethod::MonotoneSuperfast)
}

fn region_with(s: &DesignSample, spec: &RegionSpec) -> Result<ConstraintSystem> {
    spec.check_sample(s)?;
    let mut cs = ConstraintSystem::new(s.n());
    push_region_rows(&mut cs, s.values(), spec.family(), spec.threshold());
    Ok(cs)
}

fn lp_band(cs: &ConstraintSystem, method: BandMethod) -> Result<Band> {
    let n = cs.n_primary();
    let all: Vec<usize> = (0..n).collect();
    match coordinate_ranges(cs, &all) {
        Ok(r) => {
            let (lb, ub) = r.into_iter().unzip();
            Ok(Band::new(lb, ub, method))
        }
        Err(Error::Infeasible(report)) => Ok(Band::infeasible(n, method, &report)),
        Err(e) => Err(e),
    }
}

fn feasible(cs: &ConstraintSystem) -> Result<bool> {
    crate::polyhedron::is_feasible(cs)
}

fn monotone_system(s: &DesignSample, spec: &RegionSpec, direction: Direction) -> Result<ConstraintSystem> {
    let mut cs = region_with(s, spec)?;
    cs.add_monotone(direction, IndexInterval { lo: 1, hi: s.n() });
    Ok(cs)
}

fn convex_system(s: &DesignSample, spec: &RegionSpec, curvature: Curvature) -> Result<ConstraintSystem> {
    let mut cs = region_with(s, spec)?;
    cs.add_convex(curvature, IndexInterval { lo: 1, hi: s.n() });
    Ok(cs)
}

/// Whether the region holds a monotone vector.
pub fn monotone_feasible(s: &DesignSample, spec: &RegionSpec, direction: Direction) -> Result<bool> {
    feasible(&monotone_system(s, spec, direction)?)
}

/// Exact monotone band: `2n` LP optima over the region. Practical for small
/// `n` or sparse families.
pub fn lp_band_monotone(s: &DesignSample, spec: &RegionSpec, direction: Direction) -> Result<Band> {
    lp_band(&monotone_system(s, spec, direction)?, BandMethod::MonotoneLp)
}

/// Whether the region holds a convex (concave) vector.
pub fn convex_feasible(s: &DesignSample, spec: &RegionSpec, curvature: Curvature) -> Result<bool> {
    feasible(&convex_system(s, spec, curvature)?)
}

/// Exact convex (concave) band by LP.
pub fn lp_band_convex(s: &DesignSample, spec: &RegionSpec, curvature: Curvature) -> Result<Band> {
    lp_band(&convex_system(s, spec, curvature)?, BandMethod::ConvexLp)
}

fn convex_upper(y: &[f64], prefix: &[f64], t: f64, windows: Windows) -> Vec<f64> {
    let n = y.len();
    let halves = windows.half_widths(n);
    (0..n)
        .map(|i| {
            let reach = i.min(n - 1 - i);
            halves
                .iter()
                .take_while(|&&k| k <= reach)
                .map(|&k| {
                    let w = 2 * k + 1;
                    window_mean(prefix, y, i - k, w) + t / (w as f64).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Lower bound from the chord through `(i, g_i)` and `(i + k, ub_{i+k})`:
/// with `c = (j + 1) / (2|k|) < 1` and `A` the mean of the `j` points next
/// to `i` on the chord side minus `T / sqrt(j)`, every convex member
/// satisfies `g_i >= (A - c ub_{i+k}) / (1 - c)`.
fn convex_lower(y: &[f64], prefix: &[f64], ub: &[f64], t: f64, windows: Windows) -> Vec<f64> {
    let n = y.len();
    let offsets = windows.offsets(n);
    let noise: Vec<f64> = (0..=n).map(|j| if j == 0 { 0.0 } else { t / (j as f64).sqrt() }).collect();
    (0..n)
        .map(|i| {
            let mut best = y[i] - t;
            for &k in &offsets {
                for side in [1i64, -1] {
                    let end = i as i64 + side * k as i64;
                    if end < 0 || end >= n as i64 {
                        continue;
                    }
                    let u = ub[end as usize];
                    for &j in offsets.iter().take_while(|&&j| j <= k) {
                        let c = (j + 1) as f64 / (2 * k) as f64;
                        if c >= 1.0 {
                            continue;
                        }
                        let start = if side > 0 { i + 1 } else { i - j };
                        let a = window_mean(prefix, y, start, j) - noise[j];
                        best = best.max((a - c * u) / (1.0 - c));
                    }
                }
            }
            best
        })
        .collect()
}

fn convex_bounds_up(y: &[f64], t: f64, windows: Windows) -> (Vec<f64>, Vec<f64>) {
    let prefix = prefix_sums(y);
    let ub = convex_upper(y, &prefix, t, windows);
    let lb = convex_lower(y, &prefix, &ub, t, windows);
    (lb, ub)
}

/// Fast convex (concave) bounds on raw values.
pub fn convex_bounds(y: &[f64], threshold: f64, curvature: Curvature, windows: Windows) -> (Vec<f64>, Vec<f64>) {
    match curvature {
        Curvature::Convex => convex_bounds_up(y, threshold, windows),
        Curvature::Concave => negate_swap(convex_bounds_up(&negated(y), threshold, windows)),
    }
}

/// Only the upper bound of the convex case (lower for concave), which is
/// the cheap half.
pub fn convex_upper_bound(y: &[f64], threshold: f64, windows: Windows) -> Vec<f64> {
    convex_upper(y, &prefix_sums(y), threshold, windows)
}

fn convex_band(s: &DesignSample, spec: &RegionSpec, curvature: Curvature, windows: Windows, method: BandMethod) -> Result<Band> {
    spec.check_sample(s)?;
    let windows = windows.validate()?;
    let (lb, ub) = convex_bounds(s.values(), spec.threshold(), curvature, windows);
    Ok(Band::new(lb, ub, method).with_theta(windows))
}

/// Centered-mean upper bound and chord lower bound over all windows;
/// `O(n^2)` and `O(n^3)`.
pub fn fast_band_convex(s: &DesignSample, spec: &RegionSpec, curvature: Curvature) -> Result<Band> {
    convex_band(s, spec, curvature, Windows::All, BandMethod::ConvexFast)
}

/// Geometric-grid version of [`fast_band_convex`].
pub fn superfast_band_convex(s: &DesignSample, spec: &RegionSpec, curvature: Curvature, theta: f64) -> Result<Band> {
    convex_band(s, spec, curvature, Windows::Geometric(theta), BandMethod::ConvexSuperfast)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiecewiseMode {
    /// Pieces exactly as given.
    FixedAnchors,
    /// Every configuration of extreme (inflection) positions inside the
    /// anchor intervals; the band is the pointwise hull.
    UnionOverInterval,
}

type Bounds = (Vec<f64>, Vec<f64>);

fn fixed_pieces(y: &[f64], t: f64, pieces: &[(usize, usize)], bounds: &dyn Fn(&[f64], usize) -> Bounds) -> Bounds {
    let n = y.len();
    let mut lb = vec![f64::NEG_INFINITY; n];
    let mut ub = vec![f64::INFINITY; n];
    let mut covered = vec![false; n];
    for (m, &(lo, hi)) in pieces.iter().enumerate() {
        let (pl, pu) = bounds(&y[lo - 1..hi], m);
        for (off, (l, u)) in pl.into_iter().zip(pu).enumerate() {
            let i = lo - 1 + off;
            lb[i] = lb[i].max(l);
            ub[i] = ub[i].min(u);
            covered[i] = true;
        }
    }
    for i in 0..n {
        if !covered[i] {
            lb[i] = y[i] - t;
            ub[i] = y[i] + t;
        }
    }
    (lb, ub)
}

/// Hull over all anchor configurations. Piece `m` spans `[p_{m-1}, p_m]`
/// with `p_0 = first`, `p_M = last` and `p_m` ranging over anchor `m`; at
/// an anchor position both adjacent pieces apply.
fn union_pieces(
    y: &[f64],
    t: f64,
    first: usize,
    last: usize,
    anchors: &[Anchor],
    bounds: &dyn Fn(&[f64], usize) -> Bounds,
) -> Bounds {
    let n = y.len();
    let pieces = anchors.len() + 1;
    let inf = f64::INFINITY;
    // interior roles: hull over configurations where i is not a split point
    let mut lo_int = vec![inf; n];
    let mut hi_int = vec![-inf; n];
    // split roles per anchor: as right end of piece m, as left end of piece m+1
    let mut lo_right = vec![vec![inf; n]; anchors.len()];
    let mut hi_right = vec![vec![-inf; n]; anchors.len()];
    let mut lo_left = vec![vec![inf; n]; anchors.len()];
    let mut hi_left = vec![vec![-inf; n]; anchors.len()];
    for m in 0..pieces {
        let starts: Vec<usize> = if m == 0 { vec![first] } else { (anchors[m - 1].lo..=anchors[m - 1].hi).collect() };
        let ends: Vec<usize> = if m == pieces - 1 { vec![last] } else { (anchors[m].lo..=anchors[m].hi).collect() };
        for &a in &starts {
            for &b in &ends {
                if b < a {
                    continue;
                }
                let (pl, pu) = bounds(&y[a - 1..b], m);
                for (off, (l, u)) in pl.into_iter().zip(pu).enumerate() {
                    let p = a + off;
                    let i = p - 1;
                    let left_split = m > 0 && p == a;
                    let right_split = m < pieces - 1 && p == b;
                    if right_split {
                        lo_right[m][i] = lo_right[m][i].min(l);
                        hi_right[m][i] = hi_right[m][i].max(u);
                    }
                    if left_split {
                        lo_left[m - 1][i] = lo_left[m - 1][i].min(l);
                        hi_left[m - 1][i] = hi_left[m - 1][i].max(u);
                    }
                    if !left_split && !right_split {
                        lo_int[i] = lo_int[i].min(l);
                        hi_int[i] = hi_int[i].max(u);
                    }
                }
            }
        }
    }
    let mut lb = lo_int;
    let mut ub = hi_int;
    for (m, a) in anchors.iter().enumerate() {
        for p in a.lo..=a.hi {
            let i = p - 1;
            lb[i] = lb[i].min(lo_right[m][i].max(lo_left[m][i]));
            ub[i] = ub[i].max(hi_right[m][i].min(hi_left[m][i]));
        }
    }
    for i in 0..n {
        if lb[i] == inf {
            lb[i] = y[i] - t;
            ub[i] = y[i] + t;
        }
    }
    (lb, ub)
}

/// Band for piecewise monotone and/or piecewise convex functions.
///
/// Each piece runs the superfast bound of its direction or curvature on its
/// own stretch of data with the global threshold; monotone and convex
/// results are intersected. Points outside every piece keep the universal
/// band.
pub fn piecewise_band(s: &DesignSample, spec: &RegionSpec, shape: &ShapeSpec, mode: PiecewiseMode, theta: f64) -> Result<Band> {
    spec.check_sample(s)?;
    shape.validate(s.n())?;
    let windows = Windows::Geometric(theta).validate()?;
    let y = s.values();
    let t = spec.threshold();
    let mono = |seg: &[f64], m: usize| {
        monotone_bounds(seg, t, shape.monotone[m].direction.into(), windows, true)
    };
    let conv = |seg: &[f64], m: usize| convex_bounds(seg, t, shape.convex[m].curvature.into(), windows);
    let run = |pieces: Vec<(usize, usize)>, anchors: &[Anchor], f: &dyn Fn(&[f64], usize) -> Bounds| -> Option<Bounds> {
        if pieces.is_empty() {
            return None;
        }
        if mode == PiecewiseMode::UnionOverInterval && !anchors.is_empty() {
            let first = pieces[0].0;
            let last = pieces[pieces.len() - 1].1;
            let (mut lb, mut ub) = union_pieces(y, t, first, last, anchors, f);
            for i in (0..first - 1).chain(last..y.len()) {
                lb[i] = y[i] - t;
                ub[i] = y[i] + t;
            }
            Some((lb, ub))
        } else {
            Some(fixed_pieces(y, t, &pieces, f))
        }
    };
    let m = run(shape.monotone.iter().map(|p| (p.lo, p.hi)).collect(), &shape.extreme_anchors, &mono);
    let c = run(shape.convex.iter().map(|p| (p.lo, p.hi)).collect(), &shape.inflection_anchors, &conv);
    let (lb, ub) = match (m, c) {
        (Some(a), Some(b)) => (
            a.0.iter().zip(&b.0).map(|(x, y)| x.max(*y)).collect(),
            a.1.iter().zip(&b.1).map(|(x, y)| x.min(*y)).collect(),
        ),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => (y.iter().map(|v| v - t).collect(), y.iter().map(|v| v + t).collect()),
    };
    let mut band = Band::new(lb, ub, BandMethod::Piecewise);
    band.theta = Some(theta);
    Ok(band)
}

/// LP check that the region admits a vector with the shape's pieces and
/// pins; `Some(report)` names the conflicting constraint blocks.
pub fn shape_consistency(s: &DesignSample, spec: &RegionSpec, shape: &ShapeSpec) -> Result<Option<InfeasibilityReport>> {
    let mut cs = region_with(s, spec)?;
    shape.apply(&mut cs)?;
    cs.explain_infeasibility()
}

fn midpoint(lo: usize, hi: usize) -> usize {
    (lo + hi) / 2
}

/// Default shape: monotone pieces split at the midpoints of the taut-string
/// plateaus holding local extremes, and convex pieces split where the slope
/// of the minimum-`TV(g')` fit has its local extremes. Plateaus become the
/// anchors.
pub fn default_shape(s: &DesignSample, spec: &RegionSpec) -> Result<ShapeSpec> {
    spec.check_sample(s)?;
    let n = s.n();
    let mut shape = ShapeSpec::default();
    if spec.sigma() <= 0.0 || n < 3 {
        return Ok(shape);
    }
    let taut = taut_string_multires(s, spec.sigma(), spec.tau(), spec.family(), DEFAULT_MAX_ITER)?;
    let ext = disjoint(local_extremes(&taut.fit).iter().map(|e| (e.plateau.lo, e.plateau.hi, e.kind)).collect());
    shape.monotone = split_pieces(n, &ext)
        .into_iter()
        .map(|(lo, hi, rising)| MonotonePiece {
            lo,
            hi,
            direction: if rising { MonotoneKind::Increasing } else { MonotoneKind::Decreasing },
        })
        .collect();
    shape.extreme_anchors = ext.iter().map(|&(lo, hi, _)| Anchor { lo, hi }).collect();
    if shape.monotone.is_empty() {
        shape.extreme_anchors.clear();
    }

    let smooth = minimize_tv(s, spec, 1, None)?;
    let slope: Vec<f64> = smooth.fit.windows(2).map(|w| w[1] - w[0]).collect();
    // slope j (0-based) joins points j+1 and j+2, so a slope plateau [a, b]
    // covers design points a..=b+1
    let infl = disjoint(local_extremes(&slope).iter().map(|e| (e.plateau.lo, e.plateau.hi + 1, e.kind)).collect());
    shape.convex = split_pieces(n, &infl)
        .into_iter()
        .map(|(lo, hi, rising)| ConvexPiece {
            lo,
            hi,
            curvature: if rising { CurvatureKind::Convex } else { CurvatureKind::Concave },
        })
        .collect();
    shape.inflection_anchors = infl.iter().map(|&(lo, hi, _)| Anchor { lo, hi }).collect();
    if shape.convex.is_empty() {
        shape.inflection_anchors.clear();
    }
    Ok(shape)
}

/// Trims each range so it ends before the next one starts (starts are
/// strictly increasing, so no range empties).
fn disjoint(mut ranges: Vec<(usize, usize, ExtremeKind)>) -> Vec<(usize, usize, ExtremeKind)> {
    for m in 1..ranges.len() {
        let next_lo = ranges[m].0;
        let prev = &mut ranges[m - 1];
        if prev.1 >= next_lo {
            prev.1 = next_lo - 1;
        }
    }
    ranges
}

/// Pieces between split points at plateau midpoints; `true` marks a rising
/// piece (the next extreme is a maximum). Empty when there are no extremes.
fn split_pieces(n: usize, extremes: &[(usize, usize, ExtremeKind)]) -> Vec<(usize, usize, bool)> {
    if extremes.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(extremes.len() + 1);
    let mut start = 1;
    for &(lo, hi, kind) in extremes {
        let p = midpoint(lo, hi);
        out.push((start, p, kind == ExtremeKind::Maximum));
        start = p;
    }
    let last_rising = extremes[extremes.len() - 1].2 == ExtremeKind::Minimum;
    out.push((start, n, last_rising));
    out
}

/// Bound `K` on `|D(2) g|` defining the smoothness class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessClass {
    k_bound: f64,
}

impl SmoothnessClass {
    pub fn new(k_bound: f64) -> Result<Self> {
        if !(k_bound >= 0.0 && k_bound.is_finite()) {
            return Err(Error::InvalidParameter(format!("K must be finite and nonnegative, got {k_bound}")));
        }
        Ok(Self { k_bound })
    }

    pub fn k_bound(&self) -> f64 {
        self.k_bound
    }
}

/// Raw smoothness bounds: centered means widened by `(k/n)^2 K` and the
/// noise term. Radii come from `{0} U floor(theta^m)` or all radii.
pub fn smoothness_bounds(y: &[f64], threshold: f64, k_bound: f64, windows: Windows) -> Bounds {
    let n = y.len();
    let prefix = prefix_sums(y);
    let mut radii = windows.values(0.0, n / 2);
    if radii.first() != Some(&0) {
        radii.insert(0, 0);
    }
    let nf = n as f64;
    let mut lb = vec![f64::NEG_INFINITY; n];
    let mut ub = vec![f64::INFINITY; n];
    for i in 0..n {
        let reach = i.min(n - 1 - i);
        for &k in radii.iter().take_while(|&&k| k <= reach) {
            let w = 2 * k + 1;
            let mean = window_mean(&prefix, y, i - k, w);
            let slack = (k as f64 / nf).powi(2) * k_bound + threshold / (w as f64).sqrt();
            lb[i] = lb[i].max(mean - slack);
            ub[i] = ub[i].min(mean + slack);
        }
    }
    (lb, ub)
}

/// Fast band for `|D(2) f| <= K`; pass `Windows::All` for every radius.
pub fn smoothness_band_fast(s: &DesignSample, spec: &RegionSpec, cls: SmoothnessClass, windows: Windows) -> Result<Band> {
    spec.check_sample(s)?;
    let windows = windows.validate()?;
    let (lb, ub) = smoothness_bounds(s.values(), spec.threshold(), cls.k_bound, windows);
    let mut band = Band::new(lb, ub, BandMethod::SmoothFast).with_theta(windows);
    band.k_bound = Some(cls.k_bound);
    Ok(band)
}

/// Exact band over the region intersected with `|D(2) g| <= K`.
pub fn smoothness_band_lp(s: &DesignSample, spec: &RegionSpec, cls: SmoothnessClass) -> Result<Band> {
    let mut cs = region_with(s, spec)?;
    let n = s.n();
    let limit = cls.k_bound / (n as f64).powi(2);
    let rows = (2..n)
        .flat_map(|i| {
            let d = vec![(i - 2, 1.0), (i - 1, -2.0), (i, 1.0)];
            [(d.clone(), Relation::Le, limit), (d, Relation::Ge, -limit)]
        })
        .collect();
    cs.push_block(format!("|D2 g| <= {}", cls.k_bound), rows);
    let mut band = lp_band(&cs, BandMethod::SmoothLp)?;
    band.k_bound = Some(cls.k_bound);
    Ok(band)
}

/// Smallest `K` (to relative `1e-3`) whose fast smoothness band has
/// `lb <= ub` everywhere.
pub fn min_consistent_k(s: &DesignSample, spec: &RegionSpec, windows: Windows) -> Result<f64> {
    spec.check_sample(s)?;
    let windows = windows.validate()?;
    let y = s.values();
    let t = spec.threshold();
    let consistent = |k: f64| {
        let (lb, ub) = smoothness_bounds(y, t, k, windows);
        lb.iter().zip(&ub).all(|(l, u)| l <= u)
    };
    if consistent(0.0) {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while !consistent(hi) {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numerical("no finite K gives a consistent band".into()));
        }
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if consistent(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// A band method with its parameters, for harnesses and the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandSpec {
    Universal,
    MonotoneLp(Direction),
    MonotoneFast(Direction),
    MonotoneSuperfast(Direction, f64),
    ConvexLp(Curvature),
    ConvexFast(Curvature),
    ConvexSuperfast(Curvature, f64),
    /// Piecewise band on the default shape of each sample.
    Piecewise(PiecewiseMode, f64),
    SmoothFast(f64, Windows),
    SmoothLp(f64),
}

impl BandSpec {
    pub fn compute(&self, s: &DesignSample, spec: &RegionSpec) -> Result<Band> {
        match *self {
            BandSpec::Universal => universal_band(s, spec),
            BandSpec::MonotoneLp(d) => lp_band_monotone(s, spec, d),
            BandSpec::MonotoneFast(d) => fast_band_monotone(s, spec, d),
            BandSpec::MonotoneSuperfast(d, theta) => superfast_band_monotone(s, spec, d, theta),
            BandSpec::ConvexLp(c) => lp_band_convex(s, spec, c),
            BandSpec::ConvexFast(c) => fast_band_convex(s, spec, c),
            BandSpec::ConvexSuperfast(c, theta) => superfast_band_convex(s, spec, c, theta),
            BandSpec::Piecewise(mode, theta) => piecewise_band(s, spec, &default_shape(s, spec)?, mode, theta),
            BandSpec::SmoothFast(k, w) => smoothness_band_fast(s, spec, SmoothnessClass::new(k)?, w),
            BandSpec::SmoothLp(k) => smoothness_band_lp(s, spec, SmoothnessClass::new(k)?),
        }
    }
}
