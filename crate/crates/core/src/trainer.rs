//! Training orchestration: the GM-PSO-adaptive loop, the standard-PSO and
//! plain-SGD baselines, grid tuning, and report assembly.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{DatasetSplit, SparseRatings};
use crate::error::{Error, Result};
use crate::lfa::{Hyperparams, LatentFactors};
use crate::swarm::{
    fitness_contributions, BestPolicy, SearchBox, SwarmConsts, SwarmState, DIVERGED_RMSE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sgd,
    Pso,
    GmPso,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Sgd => "sgd",
            Algorithm::Pso => "pso",
            Algorithm::GmPso => "gmpso",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sgd" => Ok(Algorithm::Sgd),
            "pso" => Ok(Algorithm::Pso),
            "gmpso" | "gm-pso" => Ok(Algorithm::GmPso),
            other => Err(format!("unknown algorithm {other:?}")),
        }
    }
}

/// Full configuration of one training run. Defaults follow the reference
/// protocol: f=20, q=10, w=0.729, c1=c2=2, eta in [2^-13, 2^-7], lambda in
/// [2^-7, 2^-1], staircase gamma in [0.4, 1.4] stepping every 5 iterations,
/// at most 1000 iterations, tolerance 1e-5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub f: usize,
    pub q: usize,
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    pub eta_box: (f64, f64),
    pub lambda_box: (f64, f64),
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gamma_m: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub fixed_eta: Option<f64>,
    pub fixed_lambda: Option<f64>,
    /// Redraw (r1, r2) per dimension instead of one scalar pair per particle.
    pub per_dim_draws: bool,
    /// Divide coordinates by box width in the improvement-rate distance.
    pub normalized_distance: bool,
    /// Velocity limit as a fraction of each search interval width.
    pub velocity_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            f: 20,
            q: 10,
            w: 0.729,
            c1: 2.0,
            c2: 2.0,
            eta_box: (2f64.powi(-13), 2f64.powi(-7)),
            lambda_box: (2f64.powi(-7), 2f64.powi(-1)),
            gamma_min: 0.4,
            gamma_max: 1.4,
            gamma_m: 5,
            max_iters: 1000,
            tol: 1e-5,
            seed: 0,
            algorithm: Algorithm::GmPso,
            fixed_eta: None,
            fixed_lambda: None,
            per_dim_draws: false,
            normalized_distance: false,
            velocity_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn consts(&self) -> SwarmConsts {
        SwarmConsts {
            w: self.w,
            c1: self.c1,
            c2: self.c2,
        }
    }

    pub fn search_box(&self) -> Result<SearchBox> {
        SearchBox::new(
            vec![self.eta_box.0, self.lambda_box.0],
            vec![self.eta_box.1, self.lambda_box.1],
        )
    }
}

/// One particle's slice of an iteration record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubRecord {
    pub j: usize,
    pub eta: f64,
    pub lambda: f64,
    /// Validation RMSE after this particle's SGD sub-iteration.
    pub a: f64,
    pub fitness: f64,
    pub ir: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub t: usize,
    pub subs: Vec<SubRecord>,
    pub gbest: Vec<f64>,
    pub gamma: Option<f64>,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdRecord {
    pub t: usize,
    pub rmse_val: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Curve {
    Swarm(Vec<IterRecord>),
    Sgd(Vec<SgdRecord>),
}

/// Everything a finished run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub curve: Curve,
    pub final_test_rmse: f64,
    pub converged_iteration: usize,
    pub total_seconds: f64,
    /// Wall time at which the lowest validation RMSE was first reached.
    pub time_to_best_s: f64,
    pub best_val_rmse: f64,
    pub final_val_rmse: f64,
    pub eta: f64,
    pub lambda: f64,
}

impl TrainReport {
    pub fn iterations(&self) -> usize {
        match &self.curve {
            Curve::Swarm(v) => v.len(),
            Curve::Sgd(v) => v.len(),
        }
    }

    /// Per-iteration curve as CSV. Swarm schema:
    /// `t,j,eta_j,lambda_j,A_j,F_j[,Ir_j],gbest_eta,gbest_lambda[,gamma],elapsed_s`
    /// where the Ir and gamma columns exist only for the GM run. Plain SGD:
    /// `t,rmse_val,elapsed_s`.
    pub fn curve_csv(&self) -> String {
        let mut out = String::new();
        match &self.curve {
            Curve::Sgd(records) => {
                out.push_str("t,rmse_val,elapsed_s\n");
                for r in records {
                    out.push_str(&format!("{},{},{}\n", r.t, r.rmse_val, r.elapsed_s));
                }
            }
            Curve::Swarm(records) => {
                let gm = self.algorithm == Algorithm::GmPso;
                if gm {
                    out.push_str(
                        "t,j,eta_j,lambda_j,A_j,F_j,Ir_j,gbest_eta,gbest_lambda,gamma,elapsed_s\n",
                    );
                } else {
                    out.push_str("t,j,eta_j,lambda_j,A_j,F_j,gbest_eta,gbest_lambda,elapsed_s\n");
                }
                for rec in records {
                    for s in &rec.subs {
                        if gm {
                            let ir = s.ir.map(|v| v.to_string()).unwrap_or_default();
                            let gamma = rec.gamma.map(|v| v.to_string()).unwrap_or_default();
                            out.push_str(&format!(
                                "{},{},{},{},{},{},{},{},{},{},{}\n",
                                rec.t,
                                s.j,
                                s.eta,
                                s.lambda,
                                s.a,
                                s.fitness,
                                ir,
                                rec.gbest[0],
                                rec.gbest[1],
                                gamma,
                                rec.elapsed_s
                            ));
                        } else {
                            out.push_str(&format!(
                                "{},{},{},{},{},{},{},{},{}\n",
                                rec.t,
                                s.j,
                                s.eta,
                                s.lambda,
                                s.a,
                                s.fitness,
                                rec.gbest[0],
                                rec.gbest[1],
                                rec.elapsed_s
                            ));
                        }
                    }
                }
            }
        }
        out
    }

    /// Summary object for the run's JSON file.
    pub fn summary_json(&self, dataset: &str) -> serde_json::Value {
        serde_json::json!({
            "algorithm": self.algorithm.to_string(),
            "dataset": dataset,
            "seed": self.seed,
            "final_rmse": self.final_test_rmse,
            "iterations": self.iterations(),
            "seconds": self.total_seconds,
            "time_to_best_s": self.time_to_best_s,
            "eta": self.eta,
            "lambda": self.lambda,
        })
    }
}

fn epoch_seed(seed: u64, t: usize, j: usize) -> u64 {
    // splitmix64 over a packed key
    let mut z = seed
        .wrapping_add((t as u64).wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add((j as u64 + 1).wrapping_mul(0xBF58476D1CE4E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn check_split(split: &DatasetSplit) -> Result<()> {
    if split.train.is_empty() {
        return Err(Error::InvalidParam("empty training partition".into()));
    }
    if split.validation.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    Ok(())
}

/// Hyper-parameter-adaptive training with the generalized-momentum swarm.
pub fn train_gmpl(split: &DatasetSplit, cfg: &TrainConfig) -> Result<(LatentFactors, TrainReport)> {
    train_swarm(split, cfg, true)
}

/// Baseline: identical loop with the standard evolution rule, no momentum
/// history, and gbest by fitness argmax.
pub fn train_pso(split: &DatasetSplit, cfg: &TrainConfig) -> Result<(LatentFactors, TrainReport)> {
    train_swarm(split, cfg, false)
}

fn train_swarm(
    split: &DatasetSplit,
    cfg: &TrainConfig,
    generalized: bool,
) -> Result<(LatentFactors, TrainReport)> {
    check_split(split)?;
    let bbox = cfg.search_box()?;
    let start = Instant::now();

    let mut factors = LatentFactors::init(split.n_users(), split.n_items(), cfg.f, cfg.seed)?;
    let mut swarm = SwarmState::new(
        cfg.q,
        bbox.clone(),
        cfg.consts(),
        cfg.velocity_fraction,
        cfg.gamma_min,
        cfg.seed,
        cfg.per_dim_draws,
        cfg.normalized_distance,
    )?;
    let policy = if generalized {
        BestPolicy::ImprovementRate
    } else {
        BestPolicy::FitnessArgmax
    };

    // A_q^0: validation RMSE of the untrained factors, carried as A_0^1.
    let mut a_prev = factors.rmse(split.validation.entries())?;
    let mut best_val = a_prev;
    let mut time_to_best = 0.0f64;
    let mut records: Vec<IterRecord> = Vec::new();
    let mut converged_iteration = 0;
    let mut snapshot = factors.clone();

    for t in 1..=cfg.max_iters {
        swarm.evolve_and_bound(generalized);
        if generalized {
            swarm.update_gamma(cfg.gamma_m, cfg.gamma_min, cfg.gamma_max);
        }

        let positions: Vec<Vec<f64>> =
            swarm.particles.iter().map(|p| p.position.clone()).collect();
        let mut ledger = Vec::with_capacity(cfg.q + 1);
        ledger.push(a_prev);
        let mut diverged = 0usize;
        for (j, pos) in positions.iter().enumerate() {
            assert!(bbox.contains(pos), "particle {j} escaped the search box");
            let hp = Hyperparams::new(pos[0], pos[1])?;
            snapshot.clone_from(&factors);
            match factors.sgd_epoch(split.train.entries(), hp, epoch_seed(cfg.seed, t, j)) {
                Ok(()) => ledger.push(factors.rmse(split.validation.entries())?),
                Err(Error::Diverged { .. }) => {
                    factors.clone_from(&snapshot);
                    ledger.push(DIVERGED_RMSE);
                    diverged += 1;
                }
                Err(e) => return Err(e),
            }
        }
        if diverged == cfg.q {
            return Err(Error::AllParticlesDiverged { t, q: cfg.q });
        }

        let contributions = fitness_contributions(&ledger)?;
        swarm.absorb_fitness(&contributions, policy);

        let elapsed = start.elapsed().as_secs_f64();
        let subs = swarm
            .particles
            .iter()
            .enumerate()
            .map(|(j, p)| SubRecord {
                j: j + 1,
                eta: positions[j][0],
                lambda: positions[j][1],
                a: ledger[j + 1],
                fitness: p.fitness,
                ir: p.ir,
            })
            .collect();
        records.push(IterRecord {
            t,
            subs,
            gbest: swarm.gbest.clone(),
            gamma: generalized.then_some(swarm.gamma),
            elapsed_s: elapsed,
        });

        let a_q = *ledger.last().expect("non-empty ledger");
        if a_q < best_val {
            best_val = a_q;
            time_to_best = elapsed;
        }
        let delta = (a_q - a_prev).abs();
        a_prev = a_q;
        if delta < cfg.tol {
            converged_iteration = t;
            break;
        }
        converged_iteration = t;
    }

    let final_test_rmse = factors.rmse(split.test.entries())?;
    let total_seconds = start.elapsed().as_secs_f64();
    let report = TrainReport {
        algorithm: if generalized {
            Algorithm::GmPso
        } else {
            Algorithm::Pso
        },
        seed: cfg.seed,
        curve: Curve::Swarm(records),
        final_test_rmse,
        converged_iteration,
        total_seconds,
        time_to_best_s: time_to_best,
        best_val_rmse: best_val,
        final_val_rmse: a_prev,
        eta: swarm.gbest[0],
        lambda: swarm.gbest[1],
    };
    Ok((factors, report))
}

/// Plain SGD with fixed hyper-parameters. Convergence compares validation
/// RMSE across two consecutive iterations, so the earliest stop is t = 2.
pub fn train_sgd(split: &DatasetSplit, cfg: &TrainConfig) -> Result<(LatentFactors, TrainReport)> {
    check_split(split)?;
    let eta = cfg
        .fixed_eta
        .ok_or_else(|| Error::InvalidParam("fixed_eta required for algorithm=sgd".into()))?;
    let lambda = cfg
        .fixed_lambda
        .ok_or_else(|| Error::InvalidParam("fixed_lambda required for algorithm=sgd".into()))?;
    let hp = Hyperparams::new(eta, lambda)?;

    let start = Instant::now();
    let mut factors = LatentFactors::init(split.n_users(), split.n_items(), cfg.f, cfg.seed)?;
    let mut records: Vec<SgdRecord> = Vec::new();
    let mut prev_val: Option<f64> = None;
    let mut best_val = f64::INFINITY;
    let mut time_to_best = 0.0f64;
    let mut converged_iteration = 0;

    for t in 1..=cfg.max_iters {
        factors.sgd_epoch(split.train.entries(), hp, epoch_seed(cfg.seed, t, 0))?;
        let val = factors.rmse(split.validation.entries())?;
        let elapsed = start.elapsed().as_secs_f64();
        records.push(SgdRecord {
            t,
            rmse_val: val,
            elapsed_s: elapsed,
        });
        if val < best_val {
            best_val = val;
            time_to_best = elapsed;
        }
        converged_iteration = t;
        if let Some(p) = prev_val {
            if (val - p).abs() < cfg.tol {
                break;
            }
        }
        prev_val = Some(val);
    }

    let final_val = records.last().expect("at least one epoch").rmse_val;
    let final_test_rmse = factors.rmse(split.test.entries())?;
    let total_seconds = start.elapsed().as_secs_f64();
    let report = TrainReport {
        algorithm: Algorithm::Sgd,
        seed: cfg.seed,
        curve: Curve::Sgd(records),
        final_test_rmse,
        converged_iteration,
        total_seconds,
        time_to_best_s: time_to_best,
        best_val_rmse: best_val,
        final_val_rmse: final_val,
        eta,
        lambda,
    };
    Ok((factors, report))
}

/// Log-2 lattice over the swarm's search boxes at integer exponents; the cell
/// with the lowest final validation RMSE is reported. Diverging cells are
/// skipped.
pub fn grid_search_sgd(
    split: &DatasetSplit,
    cfg: &TrainConfig,
) -> Result<(LatentFactors, TrainReport)> {
    let exps = |lo: f64, hi: f64| -> Vec<f64> {
        let lo_e = lo.log2().round() as i32;
        let hi_e = hi.log2().round() as i32;
        (lo_e..=hi_e).map(|e| 2f64.powi(e)).collect()
    };
    let etas = exps(cfg.eta_box.0, cfg.eta_box.1);
    let lambdas = exps(cfg.lambda_box.0, cfg.lambda_box.1);

    let mut best: Option<(LatentFactors, TrainReport)> = None;
    for &eta in &etas {
        for &lambda in &lambdas {
            let mut c = cfg.clone();
            c.algorithm = Algorithm::Sgd;
            c.fixed_eta = Some(eta);
            c.fixed_lambda = Some(lambda);
            match train_sgd(split, &c) {
                Ok((factors, report)) => {
                    let better = best
                        .as_ref()
                        .map(|(_, b)| report.final_val_rmse < b.final_val_rmse)
                        .unwrap_or(true);
                    if better {
                        best = Some((factors, report));
                    }
                }
                Err(Error::Diverged { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    best.ok_or(Error::AllParticlesDiverged {
        t: 0,
        q: etas.len() * lambdas.len(),
    })
}

/// Predict ratings for external-id pairs; unknown ids yield per-pair errors.
pub fn estimate_missing(
    factors: &LatentFactors,
    index: &SparseRatings,
    pairs: &[(String, String)],
) -> Vec<Result<f64>> {
    pairs
        .iter()
        .map(|(u, i)| {
            let uu = index
                .user_index(u)
                .ok_or_else(|| Error::UnknownUser(u.clone()))?;
            let ii = index
                .item_index(i)
                .ok_or_else(|| Error::UnknownItem(i.clone()))?;
            factors.predict(uu, ii)
        })
        .collect()
}
