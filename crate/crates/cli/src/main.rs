use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use geoquant::bounds::{
    admissibility, check_inclusion_with, lower_bound_check_with, upper_bound_report, InclusionConfig,
    LowerBoundConfig,
};
use geoquant::contour::{contour_experiment_with, quantile_contour, ContourBundle, ContourConfig};
use geoquant::depth::{depth_region_boundary_with, tukey_median_with, DepthConfig, DepthEvaluator};
use geoquant::directional::{m_gamma_estimate_with_direction, m_gamma_rotinv};
use geoquant::samplers::{identity, PRESETS};
use geoquant::sphere::sphere_directions;
use geoquant::{
    depth_approx, depth_exact_2d, expansion_sweep, io, projected_quantile, rate_fit, sample,
    solve_quantile_from, DirectionSearch, DistributionSpec, Error, Family, IndexVector, PointCloud,
    SolverConfig, SolverMethod, UnitVector,
};

mod output;

use output::{write_atomic, write_json, write_rows};

/// Version of the JSON layouts documented in docs/schemas.md.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "geoquant", version, about = "Geometric quantiles and halfspace depth for point clouds")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "GEOQUANT_THREADS")]
    threads: Option<usize>,
    /// Residual tolerance of the quantile solver.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a synthetic point cloud.
    Sample(SampleArgs),
    /// Solve for a single geometric quantile q(alpha u).
    Quantile(QuantileArgs),
    /// Halfspace depth of a point.
    Depth(DepthArgs),
    /// Depth-region boundaries, quantile contours, or the three-contour experiment.
    Contour(ContourArgs),
    /// Estimate the cap-mass constant M_gamma.
    Mgamma(MgammaArgs),
    /// Quantile of a one-dimensional projection.
    Projq(ProjqArgs),
    /// Check the upper, inclusion and lower bounds at one index vector.
    BoundsCheck(BoundsArgs),
    /// Log-log growth rate of quantile norms along an alpha ladder.
    RateFit(LadderArgs),
    /// First- and third-order expansions and the direction gap along an alpha ladder.
    Expansion(LadderArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Point cloud (CSV, one point per row, or JSON array of arrays).
    #[arg(long)]
    input: PathBuf,
    /// The CSV input starts with a header line.
    #[arg(long)]
    header: bool,
}

impl InputArgs {
    fn load(&self) -> Result<PointCloud, Error> {
        io::load_cloud(&self.input, self.header)
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("cannot parse {t:?} as a number")))
        .collect()
}

fn parse_matrix(s: &str) -> Result<Vec<Vec<f64>>, String> {
    s.split(';').map(parse_list).collect()
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FamilyName {
    Gaussian,
    StudentT,
    Cauchy,
    GaussianCopulaT,
    ExponentialCentered,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long, value_enum, conflicts_with_all = ["preset", "spec"])]
    family: Option<FamilyName>,
    /// Named setup: fig1a, fig1b-text or fig1b-caption.
    #[arg(long, conflicts_with = "spec")]
    preset: Option<String>,
    /// JSON distribution spec (its n and seed are used unless overridden).
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Dimension (equicorrelated and exponential families).
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Common correlation.
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Degrees of freedom (one value, or one per margin for the copula).
    #[arg(long, value_parser = parse_list)]
    nu: Option<std::vec::Vec<f64>>,
    /// Covariance or scale matrix, rows separated by ';'.
    #[arg(long, value_parser = parse_matrix)]
    cov: Option<std::vec::Vec<Vec<f64>>>,
    #[arg(long, value_parser = parse_list)]
    mean: Option<std::vec::Vec<f64>>,
    /// Output CSV (stdout if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodName {
    Newton,
    Weiszfeld,
}

#[derive(Args, Debug)]
struct QuantileArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    alpha: f64,
    #[arg(long, value_parser = parse_list)]
    direction: std::vec::Vec<f64>,
    #[arg(long, value_enum, default_value = "newton")]
    method: MethodName,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    /// Starting point (the coordinate-wise median if omitted).
    #[arg(long, value_parser = parse_list)]
    init: Option<std::vec::Vec<f64>>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DepthArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_parser = parse_list)]
    point: std::vec::Vec<f64>,
    /// Exact planar sweep (the default in the plane).
    #[arg(long, conflicts_with = "ndirs")]
    exact: bool,
    /// Random-projection approximation with this many directions.
    #[arg(long)]
    ndirs: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ContourKind {
    Depth,
    Quantile,
    Experiment,
}

#[derive(Args, Debug)]
struct ContourArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    kind: ContourKind,
    /// Depth level (kind = depth).
    #[arg(long)]
    tau: Option<f64>,
    /// Quantile level (kind = quantile, experiment; the experiment defaults
    /// to the middle of the admissible range).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    gamma: f64,
    /// Directions of the quantile fan.
    #[arg(long, default_value_t = 180)]
    ndirs: usize,
    /// Rays per depth region.
    #[arg(long, default_value_t = 360)]
    rays: usize,
    /// Directions for estimating M_gamma.
    #[arg(long, default_value_t = 720)]
    gamma_dirs: usize,
    /// Use the 1/2 maximal-depth bound of halfspace-symmetric laws.
    #[arg(long)]
    symmetric: bool,
    /// Output CSV, or a directory for kind = experiment.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct MgammaArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    header: bool,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 720)]
    ndirs: usize,
    /// Also report the rotation-invariant closed form in this dimension
    /// (the cloud's dimension by default).
    #[arg(long)]
    analytic: bool,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProjqArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_parser = parse_list)]
    direction: std::vec::Vec<f64>,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    gamma: f64,
    #[arg(long, value_parser = parse_list)]
    direction: std::vec::Vec<f64>,
    #[arg(long)]
    symmetric: bool,
    /// Norm threshold for the first upper bound (chosen automatically if omitted).
    #[arg(long)]
    k_alpha: Option<f64>,
    /// Skip the mean-based upper bound (for laws without a finite mean).
    #[arg(long)]
    no_ub2: bool,
    #[arg(long, default_value_t = 200)]
    n_probe: usize,
    #[arg(long, default_value_t = 720)]
    gamma_dirs: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LadderArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_parser = parse_list)]
    direction: std::vec::Vec<f64>,
    #[arg(long, value_parser = parse_list)]
    alphas: std::vec::Vec<f64>,
    /// `.csv` for a table, anything else for JSON (stdout JSON if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("could not configure the thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({"error": e.kind(), "message": e.to_string()});
            eprintln!("{body}");
            ExitCode::from(1)
        }
    }
}

fn solver(cli: &Cli) -> SolverConfig {
    SolverConfig::default().with_tol(cli.tol)
}

fn unit(v: &[f64]) -> Result<UnitVector, Error> {
    UnitVector::new(v.to_vec())
}

fn envelope(command: &str, body: Value) -> Value {
    let mut out = json!({"schema_version": SCHEMA_VERSION, "command": command});
    if let (Value::Object(o), Value::Object(b)) = (&mut out, body) {
        o.extend(b);
    }
    out
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable report")
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Sample(a) => cmd_sample(cli, a),
        Command::Quantile(a) => cmd_quantile(cli, a),
        Command::Depth(a) => cmd_depth(cli, a),
        Command::Contour(a) => cmd_contour(cli, a),
        Command::Mgamma(a) => cmd_mgamma(cli, a),
        Command::Projq(a) => cmd_projq(a),
        Command::BoundsCheck(a) => cmd_bounds(cli, a),
        Command::RateFit(a) => cmd_rate_fit(cli, a),
        Command::Expansion(a) => cmd_expansion(cli, a),
    }
}

fn equicorrelation(d: usize, rho: f64) -> Vec<Vec<f64>> {
    let mut m = identity(d);
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = rho;
            }
        }
    }
    m
}

fn sample_spec(cli: &Cli, a: &SampleArgs) -> Result<DistributionSpec, Error> {
    if let Some(path) = &a.spec {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        let mut spec: DistributionSpec =
            serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        if let Some(n) = a.n {
            spec.n = n;
        }
        return Ok(spec);
    }
    let n = a.n.unwrap_or(1000);
    if let Some(p) = &a.preset {
        return DistributionSpec::preset(p, n, cli.seed);
    }
    let family = a.family.ok_or_else(|| {
        Error::InvalidParameter(format!(
            "one of --family, --preset ({}) or --spec is required",
            PRESETS.join(", ")
        ))
    })?;
    let scale = || a.cov.clone().unwrap_or_else(|| equicorrelation(a.d, a.rho));
    let single_nu = || -> Result<f64, Error> {
        match a.nu.as_deref() {
            Some([v]) => Ok(*v),
            _ => Err(Error::BadParams("--nu takes exactly one value for this family".into())),
        }
    };
    let family = match family {
        FamilyName::Gaussian => Family::Gaussian {
            covariance: scale(),
            mean: a.mean.clone(),
        },
        FamilyName::StudentT => Family::StudentT {
            nu: single_nu()?,
            scale: scale(),
            mean: a.mean.clone(),
        },
        FamilyName::Cauchy => Family::Cauchy {
            scale: scale(),
            mean: a.mean.clone(),
        },
        FamilyName::GaussianCopulaT => Family::GaussianCopulaTMargins {
            rho: a.rho,
            nu: a
                .nu
                .clone()
                .ok_or_else(|| Error::BadParams("--nu is required for the copula family".into()))?,
        },
        FamilyName::ExponentialCentered => Family::ExponentialCentered { d: a.d },
    };
    Ok(DistributionSpec::new(family, n, cli.seed))
}

fn cmd_sample(cli: &Cli, a: &SampleArgs) -> Result<(), Error> {
    let spec = sample_spec(cli, a)?;
    let cloud = sample(&spec)?;
    let rows: Vec<&[f64]> = cloud.points().collect();
    write_rows(a.output.as_deref(), &rows)
}

fn cmd_quantile(cli: &Cli, a: &QuantileArgs) -> Result<(), Error> {
    let cloud = a.input.load()?;
    let index = IndexVector::new(a.alpha, unit(&a.direction)?)?;
    let cfg = SolverConfig {
        max_iters: a.max_iters,
        method: match a.method {
            MethodName::Newton => SolverMethod::Newton,
            MethodName::Weiszfeld => SolverMethod::Weiszfeld,
        },
        ..solver(cli)
    };
    let rep = solve_quantile_from(&cloud, &index, &cfg, a.init.as_deref())?;
    let body = json!({
        "alpha": a.alpha,
        "direction": index.direction(),
        "q": rep.q,
        "norm": rep.q.norm(),
        "residual": rep.residual,
        "iters": rep.iters,
        "status": rep.status,
        "tol": cfg.residual_tol,
        "n": cloud.n(),
    });
    write_json(a.output.as_deref(), &envelope("quantile", body))
}

fn cmd_depth(cli: &Cli, a: &DepthArgs) -> Result<(), Error> {
    let cloud = a.input.load()?;
    let exact = a.exact || (a.ndirs.is_none() && cloud.dim() == 2);
    let (dv, method) = if exact {
        (depth_exact_2d(&cloud, &a.point)?, "exact")
    } else {
        let n_dirs = a.ndirs.unwrap_or(20_000);
        (depth_approx(&cloud, &a.point, n_dirs, cli.seed)?, "approx")
    };
    let body = json!({
        "point": a.point,
        "value": dv.value,
        "count": dv.count,
        "n": cloud.n(),
        "witness_direction": dv.witness_direction,
        "method": method,
        "n_dirs": if exact { None } else { Some(a.ndirs.unwrap_or(20_000)) },
        "seed": cli.seed,
    });
    write_json(a.output.as_deref(), &envelope("depth", body))
}

fn depth_cfg(cli: &Cli) -> DepthConfig {
    DepthConfig {
        seed: cli.seed,
        ..Default::default()
    }
}

fn cmd_contour(cli: &Cli, a: &ContourArgs) -> Result<(), Error> {
    let cloud = a.input.load()?;
    match a.kind {
        ContourKind::Depth => {
            let tau = a
                .tau
                .ok_or_else(|| Error::InvalidParameter("--tau is required for depth contours".into()))?;
            let cfg = depth_cfg(cli);
            let eval = DepthEvaluator::new(&cloud, &cfg);
            let (center, depth) = tukey_median_with(&eval, cfg.median_refinements)?;
            let region = depth_region_boundary_with(&eval, tau, a.rays, &center, depth, &cfg)?;
            write_rows(Some(&a.output), &region.boundary.iter().map(|p| p.as_slice()).collect::<Vec<_>>())
        }
        ContourKind::Quantile => {
            let alpha = a
                .alpha
                .ok_or_else(|| Error::InvalidParameter("--alpha is required for quantile contours".into()))?;
            let dirs = sphere_directions(cloud.dim(), a.ndirs, cli.seed);
            let fan = quantile_contour(&cloud, alpha, &dirs, &solver(cli))?;
            write_rows(Some(&a.output), &fan.iter().map(|(p, _)| p.as_slice()).collect::<Vec<_>>())
        }
        ContourKind::Experiment => cmd_experiment(cli, a, &cloud),
    }
}

fn cmd_experiment(cli: &Cli, a: &ContourArgs, cloud: &PointCloud) -> Result<(), Error> {
    let cfg = ContourConfig {
        n_rays: a.rays,
        gamma_dirs: a.gamma_dirs,
        symmetric: a.symmetric,
        depth: depth_cfg(cli),
    };
    let alpha = match a.alpha {
        Some(x) => x,
        None => {
            let (m, _, _) = m_gamma_estimate_with_direction(
                cloud,
                a.gamma,
                &DirectionSearch::new(a.gamma_dirs, cli.seed),
            )?;
            geoquant::bounds::mid_admissible_alpha(m.m_gamma, cloud.dim(), a.symmetric)
        }
    };
    let b = contour_experiment_with(cloud, alpha, a.gamma, a.ndirs, &solver(cli), cli.seed, &cfg)?;
    std::fs::create_dir_all(&a.output)?;
    let dir = &a.output;
    let rows = |pts: &[geoquant::Point]| pts.iter().map(|p| p.as_slice().to_vec()).collect::<Vec<_>>();
    write_rows(Some(&dir.join("g_alpha.csv")), &rows(&b.g_alpha))?;
    write_rows(Some(&dir.join("d_best.csv")), &rows(&b.d_best.boundary))?;
    write_rows(Some(&dir.join("d_theory.csv")), &rows(&b.d_theory.boundary))?;
    write_json(Some(&dir.join("manifest.json")), &experiment_manifest(cli, a, cloud, &b))
}

fn experiment_manifest(cli: &Cli, a: &ContourArgs, cloud: &PointCloud, b: &ContourBundle) -> Value {
    let unconverged = b
        .g_status
        .iter()
        .filter(|s| **s != geoquant::SolveStatus::Converged)
        .count();
    let body = json!({
        "kind": "experiment",
        "alpha": b.alpha,
        "gamma": b.gamma,
        "m_gamma": b.m_gamma,
        "alpha_best": b.alpha_best,
        "best_level": b.best_level,
        "theory_level": b.theory_level,
        "levels_consistent": b.levels_consistent(2.0 / cloud.n() as f64),
        "theta": b.theta,
        "theta_depth": b.theta_depth,
        "eccentricity": b.eccentricity,
        "containment": b.containment,
        "unconverged_solves": unconverged,
        "n": cloud.n(),
        "d": cloud.dim(),
        "n_dirs": a.ndirs,
        "n_rays": a.rays,
        "gamma_dirs": a.gamma_dirs,
        "symmetric": a.symmetric,
        "seed": cli.seed,
        "tol": cli.tol,
        "files": {
            "g_alpha": "g_alpha.csv",
            "d_best": "d_best.csv",
            "d_theory": "d_theory.csv",
        },
    });
    envelope("contour", body)
}

fn cmd_mgamma(cli: &Cli, a: &MgammaArgs) -> Result<(), Error> {
    let mut body = json!({"gamma": a.gamma, "seed": cli.seed});
    let mut dim = a.d;
    if let Some(path) = &a.input {
        let cloud = io::load_cloud(path, a.header)?;
        let (m, u, used) =
            m_gamma_estimate_with_direction(&cloud, a.gamma, &DirectionSearch::new(a.ndirs, cli.seed))?;
        body["m_gamma"] = json!(m.m_gamma);
        body["method"] = to_value(&m.method);
        body["direction"] = to_value(&u);
        body["n_used"] = json!(used);
        body["n_dirs"] = json!(a.ndirs);
        dim = dim.or(Some(cloud.dim()));
    } else if !a.analytic {
        return Err(Error::InvalidParameter("--input is required unless --analytic is given".into()));
    }
    if a.analytic {
        let d = dim.ok_or_else(|| Error::InvalidParameter("--analytic needs --d or --input".into()))?;
        let m = m_gamma_rotinv(d, a.gamma)?;
        body["analytic"] = json!({"d": d, "m_gamma": m.m_gamma, "method": m.method});
    }
    write_json(a.output.as_deref(), &envelope("mgamma", body))
}

fn cmd_projq(a: &ProjqArgs) -> Result<(), Error> {
    let cloud = a.input.load()?;
    let q = projected_quantile(&cloud, &unit(&a.direction)?, a.beta)?;
    write_json(a.output.as_deref(), &envelope("projq", to_value(&q)))
}

fn cmd_bounds(cli: &Cli, a: &BoundsArgs) -> Result<(), Error> {
    let cloud = a.input.load()?;
    let u = unit(&a.direction)?;
    let cfg = solver(cli);
    let upper = upper_bound_report(&cloud, &IndexVector::new(a.alpha, u.clone())?, a.k_alpha, !a.no_ub2, &cfg)?;
    let (m, _, _) =
        m_gamma_estimate_with_direction(&cloud, a.gamma, &DirectionSearch::new(a.gamma_dirs, cli.seed))?;
    let icfg = InclusionConfig {
        n_probe: a.n_probe,
        seed: cli.seed,
        symmetric: a.symmetric,
        gamma_dirs: a.gamma_dirs,
        depth: depth_cfg(cli),
        ..Default::default()
    };
    let inclusion = check_inclusion_with(&cloud, &m, a.alpha, &icfg)?;
    let lcfg = LowerBoundConfig {
        seed: cli.seed,
        symmetric: a.symmetric,
        gamma_dirs: a.gamma_dirs,
        depth: depth_cfg(cli),
        ..Default::default()
    };
    let lower = match lower_bound_check_with(&cloud, &m, a.alpha, &u, &cfg, &lcfg) {
        Ok(r) => to_value(&r),
        Err(e @ Error::NotAdmissible { .. }) => json!({"skipped": e.kind(), "message": e.to_string()}),
        Err(e) => return Err(e),
    };
    let (tau, bound, admissible) = admissibility(m.m_gamma, a.alpha, cloud.dim(), a.symmetric);
    let body = json!({
        "alpha": a.alpha,
        "gamma": a.gamma,
        "direction": u,
        "admissible": admissible,
        "depth_threshold": tau,
        "max_depth_bound": bound,
        "upper": upper,
        "inclusion": inclusion,
        "lower": lower,
        "provenance": {
            "seed": cli.seed,
            "n": cloud.n(),
            "d": cloud.dim(),
            "tol": cfg.residual_tol,
            "gamma_dirs": a.gamma_dirs,
            "n_probe": a.n_probe,
        },
    });
    write_json(a.output.as_deref(), &envelope("bounds-check", body))
}

fn is_csv(p: Option<&Path>) -> bool {
    p.and_then(|p| p.extension()).and_then(|e| e.to_str()) == Some("csv")
}

fn cmd_rate_fit(cli: &Cli, a: &LadderArgs) -> Result<(), Error> {
    let cloud = a.input.load()?;
    let fit = rate_fit(&cloud, &unit(&a.direction)?, &a.alphas, &solver(cli))?;
    if is_csv(a.output.as_deref()) {
        let mut text = format!("# slope={}\n# intercept={}\n# r_squared={}\nalpha,norm\n", fit.slope, fit.intercept, fit.r_squared);
        for (al, r) in fit.alphas.iter().zip(&fit.norms) {
            text.push_str(&format!("{al},{r}\n"));
        }
        return write_atomic(a.output.as_deref(), text.as_bytes());
    }
    write_json(a.output.as_deref(), &envelope("rate-fit", to_value(&fit)))
}

fn cmd_expansion(cli: &Cli, a: &LadderArgs) -> Result<(), Error> {
    let cloud = a.input.load()?;
    let rep = expansion_sweep(&cloud, &unit(&a.direction)?, &a.alphas, &solver(cli))?;
    if is_csv(a.output.as_deref()) {
        let d = cloud.dim();
        let rhs = &rep.third_order_limit_rhs;
        let fmt_vec = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let mut text = format!(
            "# first_order_limit={}\n# third_order_rhs_uu={}\n# third_order_rhs_mumu={}\n# direction_gap_limit={}\n",
            rep.first_order_limit,
            rhs.rhs_uu,
            rhs.rhs_mumu,
            fmt_vec(&rep.direction_gap_limit)
        );
        let gaps: Vec<String> = (1..=d).map(|k| format!("gap_{k}")).collect();
        text.push_str(&format!("alpha,norm,first_order,third_order,{},status\n", gaps.join(",")));
        for i in 0..rep.alphas.len() {
            let g: Vec<String> = rep.direction_gaps[i].iter().map(|x| x.to_string()).collect();
            let status = serde_json::to_value(rep.statuses[i]).expect("status");
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                rep.alphas[i],
                rep.norms[i],
                rep.first_order_values[i],
                rep.third_order_values[i],
                g.join(","),
                status.as_str().unwrap_or("unknown")
            ));
        }
        return write_atomic(a.output.as_deref(), text.as_bytes());
    }
    write_json(a.output.as_deref(), &envelope("expansion", to_value(&rep)))
}
