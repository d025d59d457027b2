use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mscale::bands::{piecewise_band, BandSpec, PiecewiseMode, Windows};
use mscale::coverage::{simulate_coverage as simulate, CoverageConfig, CoverageMethod, SigmaMode};
use mscale::detect::{min_n_for_peak as min_n, GridInterval, PeakQuery};
use mscale::grid::{self, DesignSample, TestFunction};
use mscale::multires::{self, make_family, FamilyKind, RegionSpec, DEFAULT_TAU};
use mscale::polyhedron::{Curvature, Direction};
use mscale::regularize::{self, ShapeSpec};
use mscale::tautstring::{local_extremes, taut_string_multires, ExtremeKind, DEFAULT_MAX_ITER};

create_exception!(mscale_py, MscaleError, PyValueError);
create_exception!(mscale_py, InfeasibleError, MscaleError);
create_exception!(mscale_py, IterationLimitError, MscaleError);
create_exception!(mscale_py, NumericalError, MscaleError);

fn py_err(e: mscale::Error) -> PyErr {
    let msg = e.to_string();
    match e {
        mscale::Error::Infeasible(_) => InfeasibleError::new_err(msg),
        mscale::Error::IterationLimit(_) => IterationLimitError::new_err(msg),
        mscale::Error::Numerical(_) => NumericalError::new_err(msg),
        _ => MscaleError::new_err(msg),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for mscale::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn sample(y: Vec<f64>) -> PyResult<DesignSample> {
    DesignSample::new(y).py()
}

fn function(spec: &str) -> PyResult<TestFunction> {
    spec.parse().py()
}

fn family(spec: &str) -> PyResult<FamilyKind> {
    spec.parse().py()
}

/// Multiscale confidence region for data `y` at noise level `sigma`
/// (estimated from differences when omitted).
#[pyclass(module = "mscale_py")]
struct Region {
    y: Vec<f64>,
    spec: RegionSpec,
}

#[pymethods]
impl Region {
    #[new]
    #[pyo3(signature = (y, sigma=None, tau=DEFAULT_TAU, family="dyadic:2"))]
    fn new(y: Vec<f64>, sigma: Option<f64>, tau: f64, family: &str) -> PyResult<Self> {
        let s = sample(y)?;
        let sigma = match sigma {
            Some(v) => v,
            None => grid::estimate_sigma(&s).py()?,
        };
        let spec = RegionSpec::new(sigma, tau, make_family(s.n(), self::family(family)?).py()?).py()?;
        Ok(Self { y: s.into_values(), spec })
    }

    #[getter]
    fn n(&self) -> usize {
        self.y.len()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.spec.sigma()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.spec.tau()
    }

    /// `sigma sqrt(tau log n)`.
    #[getter]
    fn threshold(&self) -> f64 {
        self.spec.threshold()
    }

    #[getter]
    fn intervals(&self) -> usize {
        self.spec.family().len()
    }

    /// Largest normalized residual sum over the family.
    fn statistic(&self, g: Vec<f64>) -> PyResult<f64> {
        Ok(multires::multiscale_stat(&self.sample()?, &g, self.spec.family()).py()?.value)
    }

    fn contains(&self, g: Vec<f64>) -> PyResult<bool> {
        multires::is_member(&self.sample()?, &g, &self.spec).py()
    }

    #[pyo3(signature = (max_iter=DEFAULT_MAX_ITER))]
    fn taut_string(&self, py: Python<'_>, max_iter: usize) -> PyResult<Vec<f64>> {
        let s = self.sample()?;
        if self.spec.sigma() == 0.0 {
            return Ok(self.y.clone());
        }
        py.detach(|| taut_string_multires(&s, self.spec.sigma(), self.spec.tau(), self.spec.family(), max_iter))
            .py()
            .map(|r| r.fit)
    }

    /// Returns `(fit, objective)` minimizing TV of the `k`-th derivative;
    /// `shape` is a JSON shape description.
    #[pyo3(signature = (k=0, shape=None))]
    fn minimize_tv(&self, py: Python<'_>, k: usize, shape: Option<&str>) -> PyResult<(Vec<f64>, f64)> {
        let shape = shape.map(ShapeSpec::from_json).transpose().py()?;
        let s = self.sample()?;
        let r = py.detach(|| regularize::minimize_tv(&s, &self.spec, k, shape.as_ref())).py()?;
        Ok((r.fit, r.objective))
    }

    #[pyo3(signature = (k=2, shape=None))]
    fn minimize_supnorm(&self, py: Python<'_>, k: usize, shape: Option<&str>) -> PyResult<(Vec<f64>, f64)> {
        let shape = shape.map(ShapeSpec::from_json).transpose().py()?;
        let s = self.sample()?;
        let r = py.detach(|| regularize::minimize_supnorm(&s, &self.spec, k, shape.as_ref())).py()?;
        Ok((r.fit, r.objective))
    }

    /// Confidence band. `method` is one of universal, monotone-lp,
    /// monotone-fast, monotone-superfast, convex-lp, convex-fast,
    /// convex-superfast, piecewise, smooth-fast, smooth-lp.
    #[pyo3(signature = (method="monotone-superfast", theta=2.0, k_bound=None, decreasing=false, concave=false, union=false, shape=None))]
    #[allow(clippy::too_many_arguments)]
    fn band(
        &self,
        py: Python<'_>,
        method: &str,
        theta: f64,
        k_bound: Option<f64>,
        decreasing: bool,
        concave: bool,
        union: bool,
        shape: Option<&str>,
    ) -> PyResult<Band> {
        let spec = band_spec(method, theta, k_bound, decreasing, concave, union)?;
        let s = self.sample()?;
        let band = match (spec, shape) {
            (BandSpec::Piecewise(mode, theta), Some(text)) => {
                let shape = ShapeSpec::from_json(text).py()?;
                py.detach(|| piecewise_band(&s, &self.spec, &shape, mode, theta))
            }
            (spec, _) => py.detach(|| spec.compute(&s, &self.spec)),
        }
        .py()?;
        Ok(Band {
            lb: band.lb,
            ub: band.ub,
            feasible: band.feasible,
            method: band.method.to_string(),
            reason: band.reason,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Region(n={}, sigma={}, tau={}, family={})",
            self.y.len(),
            self.spec.sigma(),
            self.spec.tau(),
            self.spec.family().kind()
        )
    }
}

impl Region {
    fn sample(&self) -> PyResult<DesignSample> {
        sample(self.y.clone())
    }
}

fn band_spec(method: &str, theta: f64, k: Option<f64>, decreasing: bool, concave: bool, union: bool) -> PyResult<BandSpec> {
    let d = if decreasing { Direction::Nonincreasing } else { Direction::Nondecreasing };
    let c = if concave { Curvature::Concave } else { Curvature::Convex };
    let mode = if union { PiecewiseMode::UnionOverInterval } else { PiecewiseMode::FixedAnchors };
    let need_k = || k.ok_or_else(|| MscaleError::new_err(format!("method {method} needs k_bound")));
    Ok(match method {
        "universal" => BandSpec::Universal,
        "monotone-lp" => BandSpec::MonotoneLp(d),
        "monotone-fast" => BandSpec::MonotoneFast(d),
        "monotone-superfast" => BandSpec::MonotoneSuperfast(d, theta),
        "convex-lp" => BandSpec::ConvexLp(c),
        "convex-fast" => BandSpec::ConvexFast(c),
        "convex-superfast" => BandSpec::ConvexSuperfast(c, theta),
        "piecewise" => BandSpec::Piecewise(mode, theta),
        "smooth-fast" => BandSpec::SmoothFast(need_k()?, Windows::Geometric(theta)),
        "smooth-lp" => BandSpec::SmoothLp(need_k()?),
        other => return Err(MscaleError::new_err(format!("unknown band method '{other}'"))),
    })
}

#[pyclass(module = "mscale_py", get_all)]
struct Band {
    lb: Vec<f64>,
    ub: Vec<f64>,
    feasible: bool,
    method: String,
    reason: Option<String>,
}

#[pymethods]
impl Band {
    fn contains(&self, f: Vec<f64>) -> bool {
        f.len() == self.lb.len() && f.iter().zip(self.lb.iter().zip(&self.ub)).all(|(v, (l, u))| l <= v && v <= u)
    }

    fn __len__(&self) -> usize {
        self.lb.len()
    }

    fn __repr__(&self) -> String {
        format!("Band(method={}, n={}, feasible={})", self.method, self.lb.len(), self.feasible)
    }
}

/// `y_i = f(i/n) + sigma Z_i` for a test function spec such as `exp:5`.
#[pyfunction]
#[pyo3(signature = (f, n, sigma, seed=0))]
fn generate_data(f: &str, n: usize, sigma: f64, seed: u64) -> PyResult<Vec<f64>> {
    Ok(grid::generate_data(&function(f)?, n, sigma, seed).py()?.into_values())
}

/// Noise-free values `f(i/n)`.
#[pyfunction]
fn sample_function(f: &str, n: usize) -> PyResult<Vec<f64>> {
    Ok(function(f)?.sample(n))
}

#[pyfunction]
fn estimate_sigma(y: Vec<f64>) -> PyResult<f64> {
    grid::estimate_sigma(&sample(y)?).py()
}

/// Returns `(tau_hat, quantile)`.
#[pyfunction]
#[pyo3(signature = (n, family="dyadic:2", alpha=0.95, sims=10_000, seed=0))]
fn calibrate_tau(py: Python<'_>, n: usize, family: &str, alpha: f64, sims: usize, seed: u64) -> PyResult<(f64, f64)> {
    let fam = make_family(n, self::family(family)?).py()?;
    let cal = py.detach(|| multires::calibrate_tau(n, &fam, alpha, sims, seed)).py()?;
    Ok((cal.tau, cal.quantile))
}

/// Smallest `n <= nmax` at which the peak condition holds, or `None`.
#[pyfunction]
#[pyo3(signature = (f, sigma, nmax=100_000, left="[0.48,0.49)", center="[0.49,0.51]", right="(0.51,0.52]"))]
fn min_n_for_peak(f: &str, sigma: f64, nmax: usize, left: &str, center: &str, right: &str) -> PyResult<Option<usize>> {
    let mut q = PeakQuery::new(function(f)?, sigma);
    q.left = left.parse::<GridInterval>().py()?;
    q.center = center.parse::<GridInterval>().py()?;
    q.right = right.parse::<GridInterval>().py()?;
    min_n(&q, nmax).py()
}

/// Plateaus `(lo, hi, kind)` of the local extremes, 1-based.
#[pyfunction]
fn local_extrema(fit: Vec<f64>) -> Vec<(usize, usize, &'static str)> {
    local_extremes(&fit)
        .into_iter()
        .map(|e| {
            let kind = match e.kind {
                ExtremeKind::Maximum => "max",
                ExtremeKind::Minimum => "min",
            };
            (e.plateau.lo, e.plateau.hi, kind)
        })
        .collect()
}

/// Coverage of the region (`method="region"`) or of a band, as a dict
/// with covered, reps, proportion and std_error.
#[pyfunction]
#[pyo3(signature = (f, n, sigma, reps=1000, seed=0, method="region", estimated=false, tau=DEFAULT_TAU, family="dyadic:2", theta=2.0, k_bound=None))]
#[allow(clippy::too_many_arguments)]
fn simulate_coverage<'py>(
    py: Python<'py>,
    f: &str,
    n: usize,
    sigma: f64,
    reps: usize,
    seed: u64,
    method: &str,
    estimated: bool,
    tau: f64,
    family: &str,
    theta: f64,
    k_bound: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let method = match method {
        "region" => CoverageMethod::Region,
        m => CoverageMethod::Band(band_spec(m, theta, k_bound, false, false, false)?),
    };
    let cfg = CoverageConfig {
        f: function(f)?,
        n,
        sigma,
        sigma_mode: if estimated { SigmaMode::Estimated } else { SigmaMode::Known },
        tau,
        family: self::family(family)?,
        method,
        reps,
        seed,
    };
    let est = py.detach(|| simulate(&cfg)).py()?;
    let d = PyDict::new(py);
    d.set_item("covered", est.covered)?;
    d.set_item("reps", est.reps)?;
    d.set_item("proportion", est.proportion)?;
    d.set_item("std_error", est.std_error)?;
    Ok(d)
}

#[pymodule]
fn mscale_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Region>()?;
    m.add_class::<Band>()?;
    m.add_function(wrap_pyfunction!(generate_data, m)?)?;
    m.add_function(wrap_pyfunction!(sample_function, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_tau, m)?)?;
    m.add_function(wrap_pyfunction!(min_n_for_peak, m)?)?;
    m.add_function(wrap_pyfunction!(local_extrema, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_coverage, m)?)?;
    let py = m.py();
    m.add("MscaleError", py.get_type::<MscaleError>())?;
    m.add("InfeasibleError", py.get_type::<InfeasibleError>())?;
    m.add("IterationLimitError", py.get_type::<IterationLimitError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    Ok(())
}
