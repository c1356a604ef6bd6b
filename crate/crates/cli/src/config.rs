//! Config-file and flag layering over [`TrainConfig`].
//!
//! Precedence is built-in defaults < config file < command-line flags. The
//! file format is flat `key = value` lines mirroring the `TrainConfig` field
//! names; `#` starts a comment.

use std::path::Path;

use clap::Args;
use gmpl_core::trainer::{Algorithm, TrainConfig};

/// Training knobs shared by `train` and `benchmark`.
#[derive(Debug, Clone, Args)]
pub struct TrainOpts {
    /// Flat key=value config file applied before the flags
    #[arg(long, value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,

    /// Latent dimension f
    #[arg(long)]
    pub f: Option<usize>,

    /// Swarm size q (also the number of SGD sub-iterations per iteration)
    #[arg(long)]
    pub q: Option<usize>,

    /// Inertia weight w
    #[arg(long)]
    pub w: Option<f64>,

    /// Cognitive acceleration c1
    #[arg(long)]
    pub c1: Option<f64>,

    /// Social acceleration c2
    #[arg(long)]
    pub c2: Option<f64>,

    /// Learning-rate search interval as "lo,hi"
    #[arg(long, value_name = "LO,HI")]
    pub eta_box: Option<String>,

    /// Regularization search interval as "lo,hi"
    #[arg(long, value_name = "LO,HI")]
    pub lambda_box: Option<String>,

    /// Momentum coefficient floor
    #[arg(long)]
    pub gamma_min: Option<f64>,

    /// Momentum coefficient ceiling
    #[arg(long)]
    pub gamma_max: Option<f64>,

    /// Iterations per momentum staircase step
    #[arg(long)]
    pub gamma_m: Option<usize>,

    /// Iteration cap
    #[arg(long)]
    pub max_iters: Option<usize>,

    /// Convergence tolerance on consecutive validation RMSE
    #[arg(long)]
    pub tol: Option<f64>,

    /// Fixed learning rate (required for plain SGD unless --grid)
    #[arg(long)]
    pub eta: Option<f64>,

    /// Fixed regularization coefficient (required for plain SGD unless --grid)
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Redraw r1, r2 per dimension instead of per particle
    #[arg(long)]
    pub per_dim_draws: bool,

    /// Normalize coordinates by box width in the improvement-rate distance
    #[arg(long)]
    pub normalized_distance: bool,

    /// Velocity limit as a fraction of each interval width
    #[arg(long)]
    pub velocity_fraction: Option<f64>,
}

fn parse_pair(value: &str) -> Result<(f64, f64), String> {
    let mut it = value.split(',').map(str::trim);
    let (Some(lo), Some(hi), None) = (it.next(), it.next(), it.next()) else {
        return Err(format!("expected \"lo,hi\", got {value:?}"));
    };
    let lo: f64 = lo.parse().map_err(|_| format!("bad number {lo:?}"))?;
    let hi: f64 = hi.parse().map_err(|_| format!("bad number {hi:?}"))?;
    Ok((lo, hi))
}

fn parse_into<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("{key}: cannot parse {value:?}"))
}

/// Apply one `key = value` pair onto the config.
fn apply_key(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<(), String> {
    match key {
        "f" => cfg.f = parse_into(key, value)?,
        "q" => cfg.q = parse_into(key, value)?,
        "w" => cfg.w = parse_into(key, value)?,
        "c1" => cfg.c1 = parse_into(key, value)?,
        "c2" => cfg.c2 = parse_into(key, value)?,
        "eta_box" => cfg.eta_box = parse_pair(value)?,
        "lambda_box" => cfg.lambda_box = parse_pair(value)?,
        "gamma_min" => cfg.gamma_min = parse_into(key, value)?,
        "gamma_max" => cfg.gamma_max = parse_into(key, value)?,
        "gamma_m" => cfg.gamma_m = parse_into(key, value)?,
        "max_iters" => cfg.max_iters = parse_into(key, value)?,
        "tol" => cfg.tol = parse_into(key, value)?,
        "seed" => cfg.seed = parse_into(key, value)?,
        "algorithm" => cfg.algorithm = value.parse::<Algorithm>()?,
        "fixed_eta" => cfg.fixed_eta = Some(parse_into(key, value)?),
        "fixed_lambda" => cfg.fixed_lambda = Some(parse_into(key, value)?),
        "per_dim_draws" => cfg.per_dim_draws = parse_into(key, value)?,
        "normalized_distance" => cfg.normalized_distance = parse_into(key, value)?,
        "velocity_fraction" => cfg.velocity_fraction = parse_into(key, value)?,
        other => return Err(format!("unknown config key {other:?}")),
    }
    Ok(())
}

/// Layer a flat key=value file onto the config.
pub fn apply_file(cfg: &mut TrainConfig, path: &Path) -> Result<(), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "{}:{}: expected key = value",
                path.display(),
                lineno + 1
            ));
        };
        apply_key(cfg, key.trim(), value.trim())
            .map_err(|e| format!("{}:{}: {e}", path.display(), lineno + 1))?;
    }
    Ok(())
}

/// Layer the command-line flags onto the config (highest precedence).
pub fn apply_opts(cfg: &mut TrainConfig, opts: &TrainOpts) -> Result<(), String> {
    if let Some(path) = &opts.config {
        apply_file(cfg, path)?;
    }
    macro_rules! set {
        ($field:ident, $opt:expr) => {
            if let Some(v) = $opt {
                cfg.$field = v;
            }
        };
    }
    set!(f, opts.f);
    set!(q, opts.q);
    set!(w, opts.w);
    set!(c1, opts.c1);
    set!(c2, opts.c2);
    if let Some(s) = &opts.eta_box {
        cfg.eta_box = parse_pair(s)?;
    }
    if let Some(s) = &opts.lambda_box {
        cfg.lambda_box = parse_pair(s)?;
    }
    set!(gamma_min, opts.gamma_min);
    set!(gamma_max, opts.gamma_max);
    set!(gamma_m, opts.gamma_m);
    set!(max_iters, opts.max_iters);
    set!(tol, opts.tol);
    set!(velocity_fraction, opts.velocity_fraction);
    if let Some(v) = opts.eta {
        cfg.fixed_eta = Some(v);
    }
    if let Some(v) = opts.lambda {
        cfg.fixed_lambda = Some(v);
    }
    if opts.per_dim_draws {
        cfg.per_dim_draws = true;
    }
    if opts.normalized_distance {
        cfg.normalized_distance = true;
    }
    Ok(())
}
