//! Sparse linear-inequality systems over the function values `g_1..g_n`
//! (plus auxiliary variables) and a thin LP front end.
//!
//! The confidence region enters as `2 |family|` one-sided rows
//! `+-sum_{i in I} g_i / sqrt|I| <= +-sum_{i in I} y_i / sqrt|I| + T`,
//! kept in the `1/sqrt|I|` scaling. Shape restrictions, pins and
//! smoothness bounds are appended as further named blocks so that an
//! infeasible combination can be narrowed down to the blocks responsible.
//!
//! Solving is delegated to `microlp`, a sparse revised simplex with
//! bounded variables. Every primal it returns is re-checked against the
//! rows before it is handed back.

use std::fmt::{self, Write as _};
use std::ops::Range;

use microlp::{ComparisonOp, OptimizationDirection, Problem, Solution, SolveOutcome, Variable};

use crate::error::{Error, InfeasibilityReport, Result};
use crate::grid::DesignSample;
use crate::multires::{IndexInterval, IntervalFamily, RegionSpec};

/// Relative row tolerance for accepting an LP primal.
pub const FEASIBILITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coefs: Vec<(usize, f64)>,
    pub rel: Relation,
    pub rhs: f64,
}

impl Row {
    fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Violation scaled by `1 + |rhs| + sum |a_j x_j|`.
    fn scaled_violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        let raw = match self.rel {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        };
        let scale = 1.0 + self.rhs.abs() + self.coefs.iter().map(|&(j, c)| (c * x[j]).abs()).sum::<f64>();
        raw / scale
    }
}

#[derive(Debug, Clone, PartialEq)]
struct VarInfo {
    name: String,
    lower: f64,
    upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    name: String,
    rows: Range<usize>,
    /// Region rows are never dropped when narrowing down infeasibility.
    essential: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Nondecreasing,
    Nonincreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    Convex,
    Concave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

/// Linear rows over `n` primary variables `g_1..g_n` (indices `0..n`)
/// followed by named auxiliary variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    n_primary: usize,
    vars: Vec<VarInfo>,
    rows: Vec<Row>,
    blocks: Vec<Block>,
    /// Point near the polyhedron; the engine solves for the offset from it,
    /// which keeps partial sums small.
    origin: Option<Vec<f64>>,
}

impl ConstraintSystem {
    /// An empty system over `n` free primary variables.
    pub fn new(n: usize) -> Self {
        let vars = (1..=n)
            .map(|i| VarInfo { name: format!("g{i}"), lower: f64::NEG_INFINITY, upper: f64::INFINITY })
            .collect();
        Self { n_primary: n, vars, rows: Vec::new(), blocks: Vec::new(), origin: None }
    }

    pub fn n_primary(&self) -> usize {
        self.n_primary
    }

    /// Sets the reference point for the primary block. The solution set is
    /// unchanged; solutions are computed as offsets from `x`, which matters
    /// for accuracy when the values are large.
    pub fn set_origin(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.n_primary, "origin must cover the primary block");
        self.origin = Some(x.to_vec());
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn var_name(&self, j: usize) -> &str {
        &self.vars[j].name
    }

    /// Declares an auxiliary variable and returns its column index.
    pub fn add_aux(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.vars.push(VarInfo { name: name.into(), lower, upper });
        self.vars.len() - 1
    }

    fn open_block(&mut self, name: String, essential: bool) -> usize {
        let start = self.rows.len();
        self.blocks.push(Block { name, rows: start..start, essential });
        self.blocks.len() - 1
    }

    fn close_block(&mut self, b: usize) {
        self.blocks[b].rows.end = self.rows.len();
    }

    /// Appends a row. Panics if it names an undeclared variable or carries a
    /// non-finite number; both are programming errors here.
    pub fn push_row(&mut self, coefs: Vec<(usize, f64)>, rel: Relation, rhs: f64) {
        assert!(rhs.is_finite(), "non-finite right-hand side");
        for &(j, c) in &coefs {
            assert!(j < self.vars.len(), "row references undeclared variable {j}");
            assert!(c.is_finite(), "non-finite coefficient");
        }
        self.rows.push(row_merged(coefs, rel, rhs));
    }

    /// Appends rows under a block name used by infeasibility reports.
    pub fn push_block(&mut self, name: impl Into<String>, rows: Vec<(Vec<(usize, f64)>, Relation, f64)>) {
        let b = self.open_block(name.into(), false);
        for (coefs, rel, rhs) in rows {
            self.push_row(coefs, rel, rhs);
        }
        self.close_block(b);
    }

    /// Consecutive monotonicity rows over `range`; returns how many were
    /// added (none for a single-point range).
    pub fn add_monotone(&mut self, direction: Direction, range: IndexInterval) -> usize {
        let hi = range.hi.min(self.n_primary);
        if range.lo >= hi {
            return 0;
        }
        let name = format!("{} on {range}", match direction {
            Direction::Nondecreasing => "nondecreasing",
            Direction::Nonincreasing => "nonincreasing",
        });
        let rel = match direction {
            Direction::Nondecreasing => Relation::Ge,
            Direction::Nonincreasing => Relation::Le,
        };
        let rows = (range.lo..hi).map(|i| (vec![(i, 1.0), (i - 1, -1.0)], rel, 0.0)).collect::<Vec<_>>();
        let added = rows.len();
        self.push_block(name, rows);
        added
    }

    /// Second-difference rows `g_{i+1} - 2 g_i + g_{i-1} >= 0` (convex) or
    /// `<= 0` (concave) for interior `i` of `range`.
    pub fn add_convex(&mut self, curvature: Curvature, range: IndexInterval) -> usize {
        let hi = range.hi.min(self.n_primary);
        if hi < range.lo + 2 {
            return 0;
        }
        let (name, rel) = match curvature {
            Curvature::Convex => ("convex", Relation::Ge),
            Curvature::Concave => ("concave", Relation::Le),
        };
        // zero-based centre c runs over lo..hi-1, i.e. 1-based lo+1..hi-1
        let rows = (range.lo..hi - 1)
            .map(|c| (vec![(c - 1, 1.0), (c, -2.0), (c + 1, 1.0)], rel, 0.0))
            .collect::<Vec<_>>();
        let added = rows.len();
        self.push_block(format!("{name} on {range}"), rows);
        added
    }

    /// Fixes `g_index` (1-based) to `value`.
    pub fn add_pin(&mut self, index: usize, value: f64) {
        self.push_block(format!("pin g{index} = {value}"), vec![(vec![(index - 1, 1.0)], Relation::Eq, value)]);
    }

    /// Largest scaled row violation of `x` (0 when feasible); bounds are
    /// included.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.scaled_violation(x)).fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, &xi)| ((v.lower - xi).max(xi - v.upper)).max(0.0) / (1.0 + xi.abs()))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Plain-text dump: one row per line, `coef*var ... REL rhs`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            let _ = writeln!(out, "# {} ({} rows)", b.name, b.rows.len());
            for r in &self.rows[b.rows.clone()] {
                let terms: Vec<String> =
                    r.coefs.iter().map(|&(j, c)| format!("{}*{}", fmt_num(c), self.vars[j].name)).collect();
                let _ = writeln!(out, "{} {} {}", terms.join(" "), r.rel, fmt_num(r.rhs));
            }
        }
        for v in &self.vars[self.n_primary..] {
            let _ = writeln!(out, "# bounds {} in [{}, {}]", v.name, v.lower, v.upper);
        }
        out
    }

    fn without_blocks(&self, dropped: &[usize]) -> ConstraintSystem {
        let mut out = ConstraintSystem { n_primary: self.n_primary, vars: self.vars.clone(), rows: Vec::new(), blocks: Vec::new(), origin: self.origin.clone() };
        for (k, b) in self.blocks.iter().enumerate() {
            if dropped.contains(&k) {
                continue;
            }
            let nb = out.open_block(b.name.clone(), b.essential);
            out.rows.extend_from_slice(&self.rows[b.rows.clone()]);
            out.close_block(nb);
        }
        out
    }

    /// Deletion filter over the non-essential blocks: returns the names of
    /// an irreducible infeasible subset, or `None` if the system is
    /// feasible.
    pub fn explain_infeasibility(&self) -> Result<Option<InfeasibilityReport>> {
        if is_feasible(self)? {
            return Ok(None);
        }
        let mut dropped: Vec<usize> = Vec::new();
        for k in 0..self.blocks.len() {
            if self.blocks[k].essential {
                continue;
            }
            dropped.push(k);
            if is_feasible(&self.without_blocks(&dropped))? {
                dropped.pop();
            }
        }
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .filter(|(k, _)| !dropped.contains(k))
            .map(|(_, b)| b.name.clone())
            .collect();
        Ok(Some(InfeasibilityReport { blocks }))
    }
}

fn row_merged(coefs: Vec<(usize, f64)>, rel: Relation, rhs: f64) -> Row {
    let mut coefs = coefs;
    coefs.sort_by_key(|&(j, _)| j);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coefs.len());
    for (j, c) in coefs {
        match merged.last_mut() {
            Some(last) if last.0 == j => last.1 += c,
            _ => merged.push((j, c)),
        }
    }
    merged.retain(|&(_, c)| c != 0.0);
    Row { coefs: merged, rel, rhs }
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

/// Appends the region rows for `family` with the given half-width.
pub(crate) fn push_region_rows(cs: &mut ConstraintSystem, y: &[f64], family: &IntervalFamily, threshold: f64) {
    let b = cs.open_block(format!("confidence region ({} family, T = {threshold})", family.kind()), true);
    let mut prefix = Vec::with_capacity(y.len() + 1);
    prefix.push(0.0);
    for v in y {
        prefix.push(prefix.last().unwrap() + v);
    }
    for iv in family.iter() {
        let scale = 1.0 / (iv.len() as f64).sqrt();
        let ysum = (prefix[iv.hi] - prefix[iv.lo - 1]) * scale;
        let up: Vec<(usize, f64)> = iv.range().map(|i| (i, scale)).collect();
        let down: Vec<(usize, f64)> = iv.range().map(|i| (i, -scale)).collect();
        cs.rows.push(Row { coefs: up, rel: Relation::Le, rhs: ysum + threshold });
        cs.rows.push(Row { coefs: down, rel: Relation::Le, rhs: -ysum + threshold });
    }
    cs.close_block(b);
}

/// The system whose solution set is `{g : is_member(s, g, spec)}`.
pub fn build_region_constraints(s: &DesignSample, spec: &RegionSpec) -> Result<ConstraintSystem> {
    spec.check_sample(s)?;
    let mut cs = ConstraintSystem::new(s.n());
    push_region_rows(&mut cs, s.values(), spec.family(), spec.threshold());
    Ok(cs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Objective at `solution`; NaN unless optimal.
    pub objective: f64,
    /// Primal values for all variables; empty unless optimal.
    pub solution: Vec<f64>,
}

impl LpResult {
    fn non_optimal(status: LpStatus) -> Self {
        Self { status, objective: f64::NAN, solution: Vec::new() }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// The primary block `g_1..g_n` of the solution.
    pub fn primary<'a>(&'a self, cs: &ConstraintSystem) -> &'a [f64] {
        &self.solution[..cs.n_primary()]
    }
}

/// A system handed to the LP engine. With `cumulative` set, the primary block
/// enters through partial sums `G_i = g_1 + ... + g_i`, which turns every
/// interval sum into a two-term row.
struct Lifted {
    problem: Problem,
    vars: Vec<Variable>,
    np: usize,
    cumulative: bool,
    /// Engine variables hold `scale (x - origin)`.
    origin: Vec<f64>,
    scale: f64,
}

/// Largest right-hand side the engine sees after scaling. Its tolerances are
/// absolute (about 1e-10), so large right-hand sides make them negligible.
const ENGINE_RHS: f64 = 1e4;

impl Lifted {
    fn new(cs: &ConstraintSystem, obj: &[f64], sense: Sense, cumulative: bool) -> Option<Self> {
        let np = cs.n_primary;
        let mut problem = Problem::new(match sense {
            Sense::Min => OptimizationDirection::Minimize,
            Sense::Max => OptimizationDirection::Maximize,
        });
        let mut cobj = obj.to_vec();
        if cumulative {
            for i in 0..np.saturating_sub(1) {
                cobj[i] -= obj[i + 1];
            }
        }
        let mut origin = vec![0.0; cs.vars.len()];
        if let Some(o) = &cs.origin {
            origin[..np].copy_from_slice(o);
        }
        let shifted = |coefs: &[(usize, f64)], rhs: f64| rhs - coefs.iter().map(|&(j, c)| c * origin[j]).sum::<f64>();
        let largest = cs
            .rows
            .iter()
            .map(|r| shifted(&r.coefs, r.rhs).abs())
            .chain(cs.vars.iter().zip(&origin).flat_map(|(v, o)| [v.lower - o, v.upper - o]).map(f64::abs))
            .filter(|v| v.is_finite())
            .fold(0.0f64, f64::max);
        let scale = if largest > 0.0 { ENGINE_RHS / largest } else { 1.0 };
        let vars = cs
            .vars
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let bounds = if cumulative && j < np {
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    (scale * (v.lower - origin[j]), scale * (v.upper - origin[j]))
                };
                problem.add_var(cobj[j], bounds)
            })
            .collect();
        let mut lp = Self { problem, vars, np, cumulative, origin, scale };
        if cumulative {
            for (j, v) in cs.vars.iter().enumerate().take(np) {
                let e = lp.expr(&[(j, 1.0)]);
                if v.lower.is_finite() {
                    lp.problem.add_constraint(e.clone(), ComparisonOp::Ge, scale * (v.lower - lp.origin[j]));
                }
                if v.upper.is_finite() {
                    lp.problem.add_constraint(e, ComparisonOp::Le, scale * (v.upper - lp.origin[j]));
                }
            }
        }
        for r in &cs.rows {
            if r.coefs.is_empty() {
                let ok = match r.rel {
                    Relation::Le => 0.0 <= r.rhs,
                    Relation::Ge => 0.0 >= r.rhs,
                    Relation::Eq => r.rhs == 0.0,
                };
                if !ok {
                    return None;
                }
                continue;
            }
            let e = lp.expr(&r.coefs);
            let shift: f64 = r.coefs.iter().map(|&(j, c)| c * lp.origin[j]).sum();
            lp.problem.add_constraint(e, comparison(r.rel), lp.scale * (r.rhs - shift));
        }
        Some(lp)
    }

    fn expr(&self, coefs: &[(usize, f64)]) -> Vec<(Variable, f64)> {
        if !self.cumulative {
            return coefs.iter().map(|&(j, c)| (self.vars[j], c)).collect();
        }
        let mut m: Vec<(usize, f64)> = Vec::with_capacity(coefs.len() * 2);
        for &(j, c) in coefs {
            m.push((j, c));
            if j > 0 && j < self.np {
                m.push((j - 1, -c));
            }
        }
        m.sort_unstable_by_key(|e| e.0);
        let mut out: Vec<(Variable, f64)> = Vec::with_capacity(m.len());
        let mut last = usize::MAX;
        for (j, c) in m {
            if j == last {
                out.last_mut().unwrap().1 += c;
            } else {
                out.push((self.vars[j], c));
                last = j;
            }
        }
        out.retain(|e| e.1 != 0.0);
        out
    }

    fn values(&self, sol: &Solution) -> Vec<f64> {
        let mut x: Vec<f64> = self.vars.iter().map(|&v| sol.var_value_raw(v)).collect();
        if self.cumulative {
            for i in (1..self.np).rev() {
                x[i] -= x[i - 1];
            }
        }
        for (v, o) in x.iter_mut().zip(&self.origin) {
            *v = o + *v / self.scale;
        }
        x
    }
}

fn comparison(rel: Relation) -> ComparisonOp {
    match rel {
        Relation::Le => ComparisonOp::Le,
        Relation::Ge => ComparisonOp::Ge,
        Relation::Eq => ComparisonOp::Eq,
    }
}

fn verified(cs: &ConstraintSystem, x: Vec<f64>) -> Result<Vec<f64>> {
    let violation = cs.max_violation(&x);
    if !(violation <= FEASIBILITY_TOL) {
        return Err(Error::Numerical(format!("LP primal violates a row by {violation:.3e} (relative)")));
    }
    Ok(x)
}

fn dense_objective(cs: &ConstraintSystem, objective: &[(usize, f64)]) -> Result<Vec<f64>> {
    let mut obj = vec![0.0; cs.n_vars()];
    for &(j, c) in objective {
        if j >= cs.n_vars() {
            return Err(Error::InvalidParameter(format!("objective references undeclared variable {j}")));
        }
        obj[j] += c;
    }
    Ok(obj)
}

fn solve_with(cs: &ConstraintSystem, obj: &[f64], sense: Sense, cumulative: bool) -> Result<LpResult> {
    let Some(lp) = Lifted::new(cs, obj, sense, cumulative) else {
        return Ok(LpResult::non_optimal(LpStatus::Infeasible));
    };
    let sol = match lp.problem.solve() {
        Ok(SolveOutcome::Solution(sol)) => sol,
        Ok(SolveOutcome::Interrupted(_)) => return Err(Error::Numerical("LP solve interrupted".into())),
        Err(microlp::Error::Infeasible) => return Ok(LpResult::non_optimal(LpStatus::Infeasible)),
        Err(microlp::Error::Unbounded) => return Ok(LpResult::non_optimal(LpStatus::Unbounded)),
        Err(e) => return Err(Error::Numerical(format!("LP solver: {e}"))),
    };
    let solution = verified(cs, lp.values(&sol))?;
    let objective = obj.iter().zip(&solution).map(|(c, x)| c * x).sum();
    Ok(LpResult { status: LpStatus::Optimal, objective, solution })
}

/// Optimizes `objective . x` over the system.
///
/// An optimal primal is re-verified against every row and bound; a
/// violation above [`FEASIBILITY_TOL`] is reported as a numerical failure.
pub fn solve(cs: &ConstraintSystem, objective: &[(usize, f64)], sense: Sense) -> Result<LpResult> {
    let obj = dense_objective(cs, objective)?;
    match solve_with(cs, &obj, sense, true) {
        Err(Error::Numerical(_)) => solve_with(cs, &obj, sense, false),
        r => r,
    }
}

/// [`solve`] without the cumulative-sum encoding; rows reach the engine as
/// written.
pub(crate) fn solve_plain(cs: &ConstraintSystem, objective: &[(usize, f64)], sense: Sense) -> Result<LpResult> {
    let obj = dense_objective(cs, objective)?;
    solve_with(cs, &obj, sense, false)
}

/// Phase-one feasibility of the system.
pub fn is_feasible(cs: &ConstraintSystem) -> Result<bool> {
    Ok(solve(cs, &[], Sense::Min)?.is_optimal())
}

/// Exact range `(min g_i, max g_i)` of each listed primary coordinate over the
/// polyhedron.
///
/// One feasible basis is computed per direction; each coordinate is then
/// obtained by a warm-started re-solve after adding an epigraph row. Any
/// re-solve that fails verification falls back to a cold [`solve`].
/// An empty polyhedron yields [`Error::Infeasible`] with a deletion-filter
/// report.
pub fn coordinate_ranges(cs: &ConstraintSystem, which: &[usize]) -> Result<Vec<(f64, f64)>> {
    if let Some(&j) = which.iter().find(|&&j| j >= cs.n_primary()) {
        return Err(Error::InvalidParameter(format!("coordinate {j} is not a primary variable")));
    }
    let start = solve(cs, &[], Sense::Min)?;
    if !start.is_optimal() {
        let report = cs.explain_infeasibility()?.unwrap_or_default();
        return Err(Error::Infeasible(report));
    }
    let anchored;
    let cs = if cs.origin.is_none() {
        let mut c = cs.clone();
        c.set_origin(start.primary(cs));
        anchored = c;
        &anchored
    } else {
        cs
    };
    let lo = epigraph_sweep(cs, which, Sense::Min)?;
    let hi = epigraph_sweep(cs, which, Sense::Max)?;
    Ok(lo.into_iter().zip(hi).collect())
}

fn epigraph_sweep(cs: &ConstraintSystem, which: &[usize], sense: Sense) -> Result<Vec<f64>> {
    let cold = |j: usize| -> Result<f64> {
        let r = solve(cs, &[(j, 1.0)], sense)?;
        Ok(match r.status {
            LpStatus::Optimal => r.objective,
            LpStatus::Unbounded if sense == Sense::Min => f64::NEG_INFINITY,
            LpStatus::Unbounded => f64::INFINITY,
            LpStatus::Infeasible => return Err(Error::Numerical("polyhedron became empty during a bound sweep".into())),
        })
    };
    let zero = vec![0.0; cs.n_vars()];
    // t holds scale * (epigraph value); its row against g_j is
    // t - scale (g_j - origin_j) compared with scale origin_j. The wall on t
    // stays modest because warm re-solves lose accuracy in proportion to it;
    // a re-solve that reaches it is redone cold.
    let base = Lifted::new(cs, &zero, sense, true).and_then(|mut lp| {
        let reach = lp.origin.iter().fold(0.0f64, |m, o| m.max(o.abs()));
        let wall = 100.0 * ENGINE_RHS + lp.scale * reach;
        let t = lp.problem.add_var(1.0, (-wall, wall));
        match lp.problem.solve() {
            Ok(SolveOutcome::Solution(sol)) => Some((lp, t, sol, wall)),
            _ => None,
        }
    });
    let Some((lp, t, sol, wall)) = base else {
        return which.iter().map(|&j| cold(j)).collect();
    };
    let (op, wall) = match sense {
        Sense::Min => (ComparisonOp::Ge, -wall),
        Sense::Max => (ComparisonOp::Le, wall),
    };
    which
        .iter()
        .map(|&j| {
            let mut e = lp.expr(&[(j, -1.0)]);
            e.push((t, 1.0));
            let warm = match sol.clone().add_constraint(e, op, lp.scale * lp.origin[j]) {
                Ok(SolveOutcome::Solution(s)) => Some(s),
                _ => None,
            };
            if let Some(s) = warm {
                let tv = s.var_value_raw(t);
                let x = lp.values(&s);
                if (tv - wall).abs() > 1e-9 * wall.abs() && cs.max_violation(&x) <= FEASIBILITY_TOL {
                    return Ok(x[j]);
                }
            }
            cold(j)
        })
        .collect()
}
