use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mscale::bands::{default_shape, min_consistent_k, piecewise_band, smoothness_band_fast, Band, BandSpec, PiecewiseMode, SmoothnessClass, Windows};
use mscale::coverage::{simulate_coverage, CoverageConfig, CoverageMethod, SigmaMode};
use mscale::detect::{min_n_for_peak, peak_trace, scan_inflection, GridInterval, InflectionQuery, PeakQuery, DEFAULT_CQ};
use mscale::grid::{estimate_sigma, generate_data, DesignSample, TestFunction};
use mscale::io::{design_column, fmt_g, read_series_file, write_table};
use mscale::multires::{calibrate_tau, make_family, FamilyKind, RegionSpec, DEFAULT_TAU};
use mscale::polyhedron::{Curvature, Direction};
use mscale::regularize::{minimize_supnorm, minimize_tv, ShapeSpec};
use mscale::tautstring::taut_string_multires;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] mscale::Error),
    #[error("{0}")]
    BandInfeasible(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use mscale::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::BandInfeasible(_) => 3,
            CliError::Core(e) => match e {
                E::IterationLimit(_) => 2,
                E::Infeasible(_) => 3,
                E::Numerical(_) => 4,
                _ => 1,
            },
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Multiscale confidence regions, regularized fits and honest bands for
/// regression on [0, 1].
///
/// Exit codes: 0 success, 1 usage or input error, 2 iteration limit,
/// 3 infeasible constraints, 4 numerical failure. MSCALE_THREADS caps the
/// worker pool.
#[derive(Parser, Debug)]
#[command(name = "mscale", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate y_i = f(i/n) + sigma Z_i.
    GenData(GenData),
    /// Multiresolution taut-string fit.
    Tautstring(Tautstring),
    /// Minimize TV or the sup-norm of the k-th derivative over the region.
    Minimize(Minimize),
    /// Confidence bands.
    Bands(Bands),
    /// Calibrate tau by simulating the noise maximum.
    CalibrateTau(CalibrateTau),
    /// Sample sizes at which a feature is guaranteed to show.
    Detect(Detect),
    /// Monte Carlo coverage of the region or of a band.
    SimulateCoverage(SimulateCoverage),
}

/// Noise level: `auto` (difference-based estimate) or a nonnegative value.
#[derive(Debug, Clone, Copy, PartialEq)]
enum SigmaArg {
    Auto,
    Fixed(f64),
}

impl FromStr for SigmaArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(SigmaArg::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(SigmaArg::Fixed(v)),
            _ => Err(format!("sigma must be 'auto' or a finite value >= 0, got '{s}'")),
        }
    }
}

impl fmt::Display for SigmaArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaArg::Auto => f.write_str("auto"),
            SigmaArg::Fixed(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Args, Debug)]
struct RegionArgs {
    /// Input CSV: one column y, or two columns t,y (header optional).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "auto")]
    sigma: SigmaArg,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    /// `dyadic:LAMBDA` (multiresolution scheme plus singletons) or `all`.
    #[arg(long, default_value = "dyadic:2")]
    family: FamilyKind,
}

/// Loaded data with its region and the comment lines describing both.
struct Prepared {
    sample: DesignSample,
    spec: RegionSpec,
    comments: Vec<String>,
}

impl RegionArgs {
    fn prepare(&self, command: &str, extra: &[(&str, String)]) -> Result<Prepared> {
        check_positive("tau", self.tau)?;
        check_family(self.family)?;
        if !self.input.exists() {
            return Err(usage(format!("input file {} does not exist", self.input.display())));
        }
        let sample = read_series_file(&self.input)?.sample;
        let mut comments = vec![config_line(
            command,
            &[
                &[
                    ("input", self.input.display().to_string()),
                    ("sigma", self.sigma.to_string()),
                    ("tau", self.tau.to_string()),
                    ("family", self.family.to_string()),
                ],
                extra,
            ]
            .concat(),
        )];
        let sigma = match self.sigma {
            SigmaArg::Fixed(v) => v,
            SigmaArg::Auto => {
                let v = estimate_sigma(&sample)?;
                comments.push(format!("sigma_hat={}", fmt_g(v)));
                v
            }
        };
        let spec = RegionSpec::new(sigma, self.tau, make_family(sample.n(), self.family)?)?;
        comments.push(format!("n={} threshold={}", sample.n(), fmt_g(spec.threshold())));
        Ok(Prepared { sample, spec, comments })
    }
}

fn config_line(command: &str, pairs: &[(&str, String)]) -> String {
    let body: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("mscale {command} {}", body.join(" "))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be finite and positive, got {v}")))
    }
}

fn check_theta(v: f64) -> Result<()> {
    if v > 1.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--theta must be finite and > 1, got {v}")))
    }
}

fn check_family(f: FamilyKind) -> Result<()> {
    match f {
        FamilyKind::Dyadic(l) if !(l > 1.0 && l.is_finite()) => Err(usage(format!("family ratio must exceed 1, got {l}"))),
        _ => Ok(()),
    }
}

/// Writes to `path`, or to stdout when absent.
fn emit(path: Option<&Path>, comments: &[String], header: &[&str], columns: &[&[f64]]) -> Result<()> {
    match path {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(mscale::Error::from)?;
            write_table(std::io::BufWriter::new(file), comments, header, columns)?;
        }
        None => write_table(std::io::stdout().lock(), comments, header, columns)?,
    }
    Ok(())
}

#[derive(Args, Debug)]
struct GenData {
    /// box:C:H, sine:W (e.g. sine:4pi), exp:R, doppler or const:C.
    #[arg(long = "f")]
    f: TestFunction,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the noise-free values as a column f.
    #[arg(long)]
    truth: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn gen_data(a: &GenData) -> Result<()> {
    if a.n == 0 {
        return Err(usage("--n must be positive"));
    }
    if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
        return Err(usage(format!("--sigma must be finite and >= 0, got {}", a.sigma)));
    }
    let s = generate_data(&a.f, a.n, a.sigma, a.seed)?;
    let comments = vec![config_line(
        "gen-data",
        &[("f", a.f.to_string()), ("n", a.n.to_string()), ("sigma", a.sigma.to_string()), ("seed", a.seed.to_string())],
    )];
    let t = design_column(a.n);
    if a.truth {
        let f = a.f.sample(a.n);
        emit(a.output.as_deref(), &comments, &["t", "y", "f"], &[&t, s.values(), &f])
    } else {
        emit(a.output.as_deref(), &comments, &["t", "y"], &[&t, s.values()])
    }
}

#[derive(Args, Debug)]
struct Tautstring {
    #[command(flatten)]
    region: RegionArgs,
    #[arg(long, default_value_t = mscale::tautstring::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn tautstring(a: &Tautstring) -> Result<()> {
    if a.max_iter == 0 {
        return Err(usage("--max-iter must be positive"));
    }
    let p = a.region.prepare("tautstring", &[("max_iter", a.max_iter.to_string())])?;
    let mut comments = p.comments;
    let fit = if p.spec.sigma() == 0.0 {
        // the region is the single point y
        p.sample.values().to_vec()
    } else {
        let r = taut_string_multires(&p.sample, p.spec.sigma(), p.spec.tau(), p.spec.family(), a.max_iter)?;
        comments.push(format!("iterations={}", r.iterations));
        r.fit
    };
    let t = design_column(p.sample.n());
    emit(a.output.as_deref(), &comments, &["t", "fit"], &[&t, &fit])
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    /// Total variation of the k-th derivative.
    Tv,
    /// Sup-norm of the k-th derivative.
    Sup,
}

fn read_shape(path: &Path) -> Result<ShapeSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read shape file {}: {e}", path.display())))?;
    Ok(ShapeSpec::from_json(&text)?)
}

#[derive(Args, Debug)]
struct Minimize {
    #[command(flatten)]
    region: RegionArgs,
    #[arg(long, value_enum, default_value = "tv")]
    objective: ObjectiveArg,
    /// Derivative order k.
    #[arg(long, default_value_t = 0)]
    order: usize,
    /// JSON with monotone/convex pieces, pins and anchors.
    #[arg(long)]
    shape: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn minimize(a: &Minimize) -> Result<()> {
    let obj = match a.objective {
        ObjectiveArg::Tv => "tv",
        ObjectiveArg::Sup => "sup",
    };
    let shape = a.shape.as_deref().map(read_shape).transpose()?;
    let mut extra = vec![("objective", obj.to_string()), ("order", a.order.to_string())];
    if let Some(p) = &a.shape {
        extra.push(("shape", p.display().to_string()));
    }
    let p = a.region.prepare("minimize", &extra)?;
    let r = match a.objective {
        ObjectiveArg::Tv => minimize_tv(&p.sample, &p.spec, a.order, shape.as_ref())?,
        ObjectiveArg::Sup => minimize_supnorm(&p.sample, &p.spec, a.order, shape.as_ref())?,
    };
    let mut comments = p.comments;
    comments.push(format!("objective={}", fmt_g(r.objective)));
    let t = design_column(p.sample.n());
    emit(a.output.as_deref(), &comments, &["t", "fit"], &[&t, &r.fit])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
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
    /// Smallest K with a consistent fast smoothness band, and that band.
    MinK,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionArg {
    Increasing,
    Decreasing,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Increasing => Direction::Nondecreasing,
            DirectionArg::Decreasing => Direction::Nonincreasing,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CurvatureArg {
    Convex,
    Concave,
}

impl From<CurvatureArg> for Curvature {
    fn from(c: CurvatureArg) -> Self {
        match c {
            CurvatureArg::Convex => Curvature::Convex,
            CurvatureArg::Concave => Curvature::Concave,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Pieces exactly as given.
    Fixed,
    /// Hull over all extreme positions inside the anchor intervals.
    Union,
}

#[derive(Args, Debug, Clone, Copy)]
struct BandParams {
    #[arg(long, value_enum, default_value = "monotone-superfast")]
    method: MethodArg,
    /// Window ratio for superfast and geometric-window methods.
    #[arg(long, default_value_t = 2.0)]
    theta: f64,
    /// Bound on |f''| for the smoothness methods.
    #[arg(long = "K")]
    k_bound: Option<f64>,
    #[arg(long, value_enum, default_value = "increasing")]
    direction: DirectionArg,
    #[arg(long, value_enum, default_value = "convex")]
    curvature: CurvatureArg,
    #[arg(long, value_enum, default_value = "fixed")]
    mode: ModeArg,
}

impl BandParams {
    fn validate(&self) -> Result<()> {
        check_theta(self.theta)?;
        if let Some(k) = self.k_bound {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(usage(format!("--K must be finite and >= 0, got {k}")));
            }
        }
        Ok(())
    }

    fn k(&self) -> Result<f64> {
        self.k_bound.ok_or_else(|| usage("this method needs --K"))
    }

    fn mode(&self) -> PiecewiseMode {
        match self.mode {
            ModeArg::Fixed => PiecewiseMode::FixedAnchors,
            ModeArg::Union => PiecewiseMode::UnionOverInterval,
        }
    }

    /// The band as a fixed spec; `None` for methods that need the data
    /// first (piecewise with a shape file, min-k).
    fn spec(&self) -> Result<Option<BandSpec>> {
        let (d, c, th) = (self.direction.into(), self.curvature.into(), self.theta);
        Ok(Some(match self.method {
            MethodArg::Universal => BandSpec::Universal,
            MethodArg::MonotoneLp => BandSpec::MonotoneLp(d),
            MethodArg::MonotoneFast => BandSpec::MonotoneFast(d),
            MethodArg::MonotoneSuperfast => BandSpec::MonotoneSuperfast(d, th),
            MethodArg::ConvexLp => BandSpec::ConvexLp(c),
            MethodArg::ConvexFast => BandSpec::ConvexFast(c),
            MethodArg::ConvexSuperfast => BandSpec::ConvexSuperfast(c, th),
            MethodArg::Piecewise => BandSpec::Piecewise(self.mode(), th),
            MethodArg::SmoothFast => BandSpec::SmoothFast(self.k()?, Windows::Geometric(th)),
            MethodArg::SmoothLp => BandSpec::SmoothLp(self.k()?),
            MethodArg::MinK => return Ok(None),
        }))
    }

    fn echo(&self) -> Vec<(&'static str, String)> {
        let name = self.method.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
        let mut out = vec![("method", name), ("theta", self.theta.to_string())];
        if let Some(k) = self.k_bound {
            out.push(("K", k.to_string()));
        }
        out
    }
}

#[derive(Args, Debug)]
struct Bands {
    #[command(flatten)]
    region: RegionArgs,
    #[command(flatten)]
    params: BandParams,
    /// Shape for the piecewise method; derived from the taut string if absent.
    #[arg(long)]
    shape: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn bands(a: &Bands) -> Result<()> {
    a.params.validate()?;
    let shape = a.shape.as_deref().map(read_shape).transpose()?;
    let mut extra = a.params.echo();
    if let Some(p) = &a.shape {
        extra.push(("shape", p.display().to_string()));
    }
    let p = a.region.prepare("bands", &extra)?;
    let mut comments = p.comments;
    let band: Band = match (a.params.method, a.params.spec()?) {
        (MethodArg::MinK, _) => {
            let w = Windows::Geometric(a.params.theta);
            let k = min_consistent_k(&p.sample, &p.spec, w)?;
            comments.push(format!("min_K={}", fmt_g(k)));
            smoothness_band_fast(&p.sample, &p.spec, SmoothnessClass::new(k)?, w)?
        }
        (MethodArg::Piecewise, _) => {
            let shape = match shape {
                Some(s) => s,
                None => default_shape(&p.sample, &p.spec)?,
            };
            piecewise_band(&p.sample, &p.spec, &shape, a.params.mode(), a.params.theta)?
        }
        (_, Some(spec)) => spec.compute(&p.sample, &p.spec)?,
        (_, None) => unreachable!("only min-k lacks a spec"),
    };
    comments.push(format!("feasible={}", band.feasible));
    if let Some(r) = &band.reason {
        comments.push(format!("reason={r}"));
    }
    let t = design_column(p.sample.n());
    emit(a.output.as_deref(), &comments, &["t", "lb", "ub"], &[&t, &band.lb, &band.ub])?;
    if band.feasible {
        Ok(())
    } else {
        Err(CliError::BandInfeasible(band.reason.unwrap_or_else(|| "band is empty".into())))
    }
}

#[derive(Args, Debug)]
struct CalibrateTau {
    #[arg(long)]
    n: usize,
    /// Calibrate against this family; use the one you fit with.
    #[arg(long, default_value = "dyadic:2")]
    family: FamilyKind,
    #[arg(long, default_value_t = 0.95)]
    alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    sims: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn calibrate(a: &CalibrateTau) -> Result<()> {
    check_family(a.family)?;
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(usage(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    if a.n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    let fam = make_family(a.n, a.family)?;
    let cal = calibrate_tau(a.n, &fam, a.alpha, a.sims, a.seed)?;
    let mut out = std::io::stdout().lock();
    let cfg = config_line(
        "calibrate-tau",
        &[
            ("n", a.n.to_string()),
            ("family", a.family.to_string()),
            ("alpha", a.alpha.to_string()),
            ("sims", a.sims.to_string()),
            ("seed", a.seed.to_string()),
        ],
    );
    writeln!(out, "# {cfg}").and_then(|_| {
        writeln!(out, "tau_hat={}", fmt_g(cal.tau))?;
        writeln!(out, "quantile={}", fmt_g(cal.quantile))
    })
    .map_err(mscale::Error::from)?;
    Ok(())
}

#[derive(Args, Debug)]
struct Detect {
    #[command(subcommand)]
    kind: DetectKind,
}

#[derive(Subcommand, Debug)]
enum DetectKind {
    /// Smallest n at which a peak on the center interval is guaranteed.
    Peak(PeakArgs),
    /// First (n, k) at which a derivative peak (inflection) is guaranteed.
    Inflection(InflectionArgs),
}

#[derive(Args, Debug)]
struct DetectCommon {
    #[arg(long = "f")]
    f: TestFunction,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    /// Quantile constant of the limiting noise maximum.
    #[arg(long, default_value_t = DEFAULT_CQ)]
    cq: f64,
    #[arg(long, default_value_t = 100_000)]
    nmax: usize,
}

impl DetectCommon {
    fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(usage(format!("--sigma must be finite and >= 0, got {}", self.sigma)));
        }
        check_positive("tau", self.tau)?;
        if !self.cq.is_finite() {
            return Err(usage("--cq must be finite"));
        }
        if self.nmax < 2 {
            return Err(usage("--nmax must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Args, Debug)]
struct PeakArgs {
    #[command(flatten)]
    common: DetectCommon,
    /// Flank and center intervals such as "[0.48,0.49)".
    #[arg(long, default_value = "[0.48,0.49)")]
    left: GridInterval,
    #[arg(long, default_value = "[0.49,0.51]")]
    center: GridInterval,
    #[arg(long, default_value = "(0.51,0.52]")]
    right: GridInterval,
}

#[derive(Args, Debug)]
struct InflectionArgs {
    #[command(flatten)]
    common: DetectCommon,
    /// Centers of the left, center and right intervals.
    #[arg(long, value_delimiter = ',', required = true)]
    centers: Vec<f64>,
    /// Largest half-width k scanned (intervals are center -+ k/n).
    #[arg(long, default_value_t = 200)]
    kmax: usize,
}

fn detect(a: &Detect) -> Result<()> {
    let mut out = std::io::stdout().lock();
    let lines = match &a.kind {
        DetectKind::Peak(p) => detect_peak(p)?,
        DetectKind::Inflection(p) => detect_inflection(p)?,
    };
    for l in lines {
        writeln!(out, "{l}").map_err(mscale::Error::from)?;
    }
    Ok(())
}

fn detect_peak(p: &PeakArgs) -> Result<Vec<String>> {
    p.common.validate()?;
    let mut q = PeakQuery::new(p.common.f.clone(), p.common.sigma);
    q.tau = p.common.tau;
    q.c_q = p.common.cq;
    q.left = p.left;
    q.center = p.center;
    q.right = p.right;
    let mut lines = vec![format!(
        "# {}",
        config_line(
            "detect peak",
            &[
                ("f", q.f.to_string()),
                ("sigma", q.sigma.to_string()),
                ("tau", q.tau.to_string()),
                ("cq", q.c_q.to_string()),
                ("left", q.left.to_string()),
                ("center", q.center.to_string()),
                ("right", q.right.to_string()),
                ("nmax", p.common.nmax.to_string()),
            ],
        )
    )];
    lines.push("n,count_left,count_center,count_right,center,left,right,holds".into());
    match min_n_for_peak(&q, p.common.nmax)? {
        Some(n) => {
            for m in [n - 1, n] {
                if let Ok(t) = peak_trace(&q, m) {
                    lines.push(format!(
                        "{},{},{},{},{},{},{},{}",
                        t.n,
                        t.counts[0],
                        t.counts[1],
                        t.counts[2],
                        fmt_g(t.center),
                        fmt_g(t.left),
                        fmt_g(t.right),
                        t.holds
                    ));
                }
            }
            lines.push(format!("min_n={n}"));
        }
        None => lines.push(format!("min_n=none (condition fails up to n={})", p.common.nmax)),
    }
    Ok(lines)
}

fn detect_inflection(p: &InflectionArgs) -> Result<Vec<String>> {
    p.common.validate()?;
    if p.kmax == 0 {
        return Err(usage("--kmax must be positive"));
    }
    if p.centers.len() != 3 {
        return Err(usage(format!("--centers takes three values, got {}", p.centers.len())));
    }
    let centers = [p.centers[0], p.centers[1], p.centers[2]];
    let mut q = InflectionQuery::new(p.common.f.clone(), p.common.sigma, centers);
    q.tau = p.common.tau;
    q.c_q = p.common.cq;
    let mut ns = Vec::new();
    let mut n = 16usize;
    while n < p.common.nmax {
        ns.push(n);
        n = n * 5 / 4 + 1;
    }
    ns.push(p.common.nmax);
    let ks: Vec<usize> = (1..=p.kmax).collect();
    let mut lines = vec![format!(
        "# {}",
        config_line(
            "detect inflection",
            &[
                ("f", q.f.to_string()),
                ("sigma", q.sigma.to_string()),
                ("tau", q.tau.to_string()),
                ("cq", q.c_q.to_string()),
                ("centers", format!("{},{},{}", centers[0], centers[1], centers[2])),
                ("kmax", p.kmax.to_string()),
                ("nmax", p.common.nmax.to_string()),
            ],
        )
    )];
    lines.push("n,k,center,left,right,holds".into());
    match scan_inflection(&q, &ns, &ks)? {
        Some(t) => {
            lines.push(format!("{},{},{},{},{},{}", t.n, t.k, fmt_g(t.center), fmt_g(t.left), fmt_g(t.right), t.holds));
            lines.push(format!("min_n={} k={}", t.n, t.k));
        }
        None => lines.push(format!("min_n=none (condition fails up to n={})", p.common.nmax)),
    }
    Ok(lines)
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SigmaModeArg {
    Known,
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CoverageMethodArg {
    Region,
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

#[derive(Args, Debug)]
struct SimulateCoverage {
    #[arg(long = "f")]
    f: TestFunction,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    sigma: f64,
    #[arg(long, value_enum, default_value = "known")]
    sigma_mode: SigmaModeArg,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value = "dyadic:2")]
    family: FamilyKind,
    #[arg(long, value_enum, default_value = "region")]
    method: CoverageMethodArg,
    #[arg(long, default_value_t = 2.0)]
    theta: f64,
    #[arg(long = "K")]
    k_bound: Option<f64>,
    #[arg(long, value_enum, default_value = "increasing")]
    direction: DirectionArg,
    #[arg(long, value_enum, default_value = "convex")]
    curvature: CurvatureArg,
    #[arg(long, value_enum, default_value = "fixed")]
    mode: ModeArg,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the estimate as JSON instead of key=value lines.
    #[arg(long)]
    json: bool,
}

fn coverage(a: &SimulateCoverage) -> Result<()> {
    if a.n == 0 {
        return Err(usage("--n must be positive"));
    }
    if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
        return Err(usage(format!("--sigma must be finite and >= 0, got {}", a.sigma)));
    }
    check_positive("tau", a.tau)?;
    check_family(a.family)?;
    if a.reps == 0 {
        return Err(usage("--reps must be positive"));
    }
    let band_method = |m: MethodArg| BandParams {
        method: m,
        theta: a.theta,
        k_bound: a.k_bound,
        direction: a.direction,
        curvature: a.curvature,
        mode: a.mode,
    };
    let params = match a.method {
        CoverageMethodArg::Region => None,
        m => Some(band_method(match m {
            CoverageMethodArg::Universal => MethodArg::Universal,
            CoverageMethodArg::MonotoneLp => MethodArg::MonotoneLp,
            CoverageMethodArg::MonotoneFast => MethodArg::MonotoneFast,
            CoverageMethodArg::MonotoneSuperfast => MethodArg::MonotoneSuperfast,
            CoverageMethodArg::ConvexLp => MethodArg::ConvexLp,
            CoverageMethodArg::ConvexFast => MethodArg::ConvexFast,
            CoverageMethodArg::ConvexSuperfast => MethodArg::ConvexSuperfast,
            CoverageMethodArg::Piecewise => MethodArg::Piecewise,
            CoverageMethodArg::SmoothFast => MethodArg::SmoothFast,
            CoverageMethodArg::SmoothLp => MethodArg::SmoothLp,
            CoverageMethodArg::Region => unreachable!(),
        })),
    };
    let method = match &params {
        None => CoverageMethod::Region,
        Some(p) => {
            p.validate()?;
            CoverageMethod::Band(p.spec()?.expect("every coverage method has a spec"))
        }
    };
    let cfg = CoverageConfig {
        f: a.f.clone(),
        n: a.n,
        sigma: a.sigma,
        sigma_mode: match a.sigma_mode {
            SigmaModeArg::Known => SigmaMode::Known,
            SigmaModeArg::Estimated => SigmaMode::Estimated,
        },
        tau: a.tau,
        family: a.family,
        method,
        reps: a.reps,
        seed: a.seed,
    };
    let est = simulate_coverage(&cfg)?;
    let mut echo = vec![
        ("f", a.f.to_string()),
        ("n", a.n.to_string()),
        ("sigma", a.sigma.to_string()),
        ("sigma_mode", format!("{:?}", a.sigma_mode).to_lowercase()),
        ("tau", a.tau.to_string()),
        ("family", a.family.to_string()),
        ("reps", a.reps.to_string()),
        ("seed", a.seed.to_string()),
    ];
    match &params {
        None => echo.push(("method", "region".into())),
        Some(p) => echo.extend(p.echo()),
    }
    let mut out = std::io::stdout().lock();
    let text = if a.json {
        let mut v = serde_json::to_value(est).map_err(mscale::Error::from)?;
        v["config"] = serde_json::Value::String(config_line("simulate-coverage", &echo));
        format!("{}\n", serde_json::to_string_pretty(&v).map_err(mscale::Error::from)?)
    } else {
        format!(
            "# {}\ncovered={}\nreps={}\ncoverage={}\nstd_error={}\n",
            config_line("simulate-coverage", &echo),
            est.covered,
            est.reps,
            fmt_g(est.proportion),
            fmt_g(est.std_error)
        )
    };
    out.write_all(text.as_bytes()).map_err(mscale::Error::from)?;
    Ok(())
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("MSCALE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("MSCALE_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| usage(format!("cannot size the worker pool: {e}")))
}

fn run(cli: &Cli) -> Result<()> {
    init_threads()?;
    match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Tautstring(a) => tautstring(a),
        Command::Minimize(a) => minimize(a),
        Command::Bands(a) => bands(a),
        Command::CalibrateTau(a) => calibrate(a),
        Command::Detect(a) => detect(a),
        Command::SimulateCoverage(a) => coverage(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
