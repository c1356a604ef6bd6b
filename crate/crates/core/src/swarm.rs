//! Particle state, standard and generalized-momentum PSO evolution, bounding,
//! fitness contributions, improvement rate, and pbest/gbest maintenance.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Validation RMSE recorded for a particle whose SGD sub-iteration diverged.
pub const DIVERGED_RMSE: f64 = 1e12;

/// Denominator threshold below which an iteration counts as stalled and all
/// fitness contributions are zeroed.
pub const STALL_EPS: f64 = 1e-12;

/// Axis-aligned search region with per-dimension bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl SearchBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<SearchBox> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidParam("search box dimension mismatch".into()));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if l >= h || !l.is_finite() || !h.is_finite() {
                return Err(Error::InvalidParam(format!(
                    "invalid search interval [{l}, {h}]"
                )));
            }
        }
        Ok(SearchBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, d: usize) -> f64 {
        self.hi[d] - self.lo[d]
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.dim()).map(|d| self.width(d)).collect()
    }

    pub fn contains(&self, h: &[f64]) -> bool {
        h.len() == self.dim()
            && h.iter()
                .enumerate()
                .all(|(d, &v)| self.lo[d] <= v && v <= self.hi[d])
    }

    /// Symmetric velocity limits as a fraction of each interval width.
    pub fn velocity_limits(&self, fraction: f64) -> Vec<f64> {
        (0..self.dim()).map(|d| fraction * self.width(d)).collect()
    }
}

/// Inertia and attraction constants of the evolution rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwarmConsts {
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for SwarmConsts {
    fn default() -> Self {
        SwarmConsts {
            w: 0.729,
            c1: 2.0,
            c2: 2.0,
        }
    }
}

/// One swarm member with two-step position/velocity history.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Position one step back (the t-2 state while a step computes t).
    pub prev_position: Option<Vec<f64>>,
    pub prev_velocity: Option<Vec<f64>>,
    pub pbest: Vec<f64>,
    pub pbest_fitness: f64,
    pub fitness: f64,
    pub prev_fitness: Option<f64>,
    pub ir: Option<f64>,
    pub prev_ir: Option<f64>,
}

impl Particle {
    /// New particle at a position, zero velocity, pbest = position.
    pub fn at(position: Vec<f64>) -> Particle {
        let dim = position.len();
        Particle {
            pbest: position.clone(),
            position,
            velocity: vec![0.0; dim],
            prev_position: None,
            prev_velocity: None,
            pbest_fitness: f64::NEG_INFINITY,
            fitness: f64::NAN,
            prev_fitness: None,
            ir: None,
            prev_ir: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }
}

/// Random attraction weights for one step. Scalar mode (the default) uses one
/// (r1, r2) pair across all dimensions; per-dimension mode redraws per axis.
pub fn draw_pairs(rng: &mut impl Rng, dim: usize, per_dimension: bool) -> (Vec<f64>, Vec<f64>) {
    if per_dimension {
        let r1 = (0..dim).map(|_| rng.random::<f64>()).collect();
        let r2 = (0..dim).map(|_| rng.random::<f64>()).collect();
        (r1, r2)
    } else {
        let a = rng.random::<f64>();
        let b = rng.random::<f64>();
        (vec![a; dim], vec![b; dim])
    }
}

/// Standard PSO step with explicit random draws:
/// `s <- w*s + c1*r1*(pbest - h) + c2*r2*(gbest - h); h <- h + s`.
pub fn pso_step_with_draws(
    p: &mut Particle,
    gbest: &[f64],
    c: SwarmConsts,
    r1: &[f64],
    r2: &[f64],
) {
    let dim = p.dim();
    let mut new_v = vec![0.0; dim];
    let mut new_h = vec![0.0; dim];
    for d in 0..dim {
        new_v[d] = c.w * p.velocity[d]
            + c.c1 * r1[d] * (p.pbest[d] - p.position[d])
            + c.c2 * r2[d] * (gbest[d] - p.position[d]);
        new_h[d] = p.position[d] + new_v[d];
    }
    shift_history(p, new_h, new_v);
}

/// Generalized-momentum PSO step with explicit draws. At t = 1 this is the
/// plain step; for t >= 2 the velocity gains `gamma*(s_prev - s_prev2)` and
/// the position gains `gamma*(h_prev - h_prev2)`.
pub fn gm_pso_step_with_draws(
    p: &mut Particle,
    gbest: &[f64],
    c: SwarmConsts,
    gamma: f64,
    t: usize,
    r1: &[f64],
    r2: &[f64],
) {
    if t <= 1 {
        pso_step_with_draws(p, gbest, c, r1, r2);
        return;
    }
    let h_prev2 = p
        .prev_position
        .clone()
        .expect("gm step at t >= 2 requires position history");
    let s_prev2 = p
        .prev_velocity
        .clone()
        .expect("gm step at t >= 2 requires velocity history");
    let dim = p.dim();
    let mut new_v = vec![0.0; dim];
    let mut new_h = vec![0.0; dim];
    for d in 0..dim {
        new_v[d] = c.w * p.velocity[d]
            + c.c1 * r1[d] * (p.pbest[d] - p.position[d])
            + c.c2 * r2[d] * (gbest[d] - p.position[d])
            + gamma * (p.velocity[d] - s_prev2[d]);
        new_h[d] = p.position[d] + new_v[d] + gamma * (p.position[d] - h_prev2[d]);
    }
    shift_history(p, new_h, new_v);
}

fn shift_history(p: &mut Particle, new_h: Vec<f64>, new_v: Vec<f64>) {
    p.prev_position = Some(std::mem::replace(&mut p.position, new_h));
    p.prev_velocity = Some(std::mem::replace(&mut p.velocity, new_v));
}

/// Drawing wrapper around [`pso_step_with_draws`].
pub fn pso_step(p: &mut Particle, gbest: &[f64], c: SwarmConsts, rng: &mut impl Rng, per_dim: bool) {
    let (r1, r2) = draw_pairs(rng, p.dim(), per_dim);
    pso_step_with_draws(p, gbest, c, &r1, &r2);
}

/// Drawing wrapper around [`gm_pso_step_with_draws`].
pub fn gm_pso_step(
    p: &mut Particle,
    gbest: &[f64],
    c: SwarmConsts,
    gamma: f64,
    t: usize,
    rng: &mut impl Rng,
    per_dim: bool,
) {
    let (r1, r2) = draw_pairs(rng, p.dim(), per_dim);
    gm_pso_step_with_draws(p, gbest, c, gamma, t, &r1, &r2);
}

/// Staircase momentum schedule: `min(gamma_min + 0.1*floor(t/m), gamma_max)`.
pub fn gamma_schedule(t: usize, m: usize, gamma_min: f64, gamma_max: f64) -> f64 {
    debug_assert!(m >= 1);
    (gamma_min + 0.1 * (t / m) as f64).min(gamma_max)
}

/// Clamp position to the box and velocity to the symmetric limits. Idempotent.
pub fn bound(p: &mut Particle, bbox: &SearchBox, s_limits: &[f64]) {
    for (d, limit) in s_limits.iter().enumerate() {
        p.position[d] = p.position[d].clamp(bbox.lo()[d], bbox.hi()[d]);
        p.velocity[d] = p.velocity[d].clamp(-limit, *limit);
    }
}

/// Per-particle fitness contributions from one iteration's RMSE ledger
/// `[A_0, A_1, ..., A_q]` where `A_0` carries the previous iteration's final
/// value: `F_j = (A_j - A_{j-1}) / (A_q - A_0)`.
///
/// A stalled denominator (|A_q - A_0| below [`STALL_EPS`]) zeroes every
/// contribution so no best moves on a stalled iteration.
pub fn fitness_contributions(ledger: &[f64]) -> Result<Vec<f64>> {
    if ledger.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "ledger needs at least 2 values, got {}",
            ledger.len()
        )));
    }
    let q = ledger.len() - 1;
    let denom = ledger[q] - ledger[0];
    if denom.abs() < STALL_EPS {
        return Ok(vec![0.0; q]);
    }
    Ok((1..=q).map(|j| (ledger[j] - ledger[j - 1]) / denom).collect())
}

/// Fitness change discounted by the exponential of the particle's travel:
/// `(F_prev - F_cur) / exp(|h_prev - h_cur|)`. Distance is Euclidean over raw
/// coordinates; pass `scale` to divide each axis first (normalized variant).
pub fn improvement_rate(
    f_prev: f64,
    f_cur: f64,
    h_prev: &[f64],
    h_cur: &[f64],
    scale: Option<&[f64]>,
) -> f64 {
    let dist: f64 = h_prev
        .iter()
        .zip(h_cur)
        .enumerate()
        .map(|(d, (a, b))| {
            let delta = match scale {
                Some(s) => (a - b) / s[d],
                None => a - b,
            };
            delta * delta
        })
        .sum::<f64>()
        .sqrt();
    (f_prev - f_cur) / dist.exp()
}

/// Which gbest policy a swarm run follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BestPolicy {
    /// gbest by fitness argmax every iteration (standard PSO baseline).
    FitnessArgmax,
    /// gbest at t=1 by fitness argmax, then per-particle improvement-rate
    /// comparisons (the generalized-momentum rule).
    ImprovementRate,
}

/// Swarm-level state threaded through a training run.
#[derive(Debug, Clone)]
pub struct SwarmState {
    pub particles: Vec<Particle>,
    pub gbest: Vec<f64>,
    pub gbest_metric: f64,
    pub gamma: f64,
    pub t: usize,
    pub consts: SwarmConsts,
    bbox: SearchBox,
    s_limits: Vec<f64>,
    rng: ChaCha8Rng,
    per_dim_draws: bool,
    normalized_distance: bool,
}

impl SwarmState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        q: usize,
        bbox: SearchBox,
        consts: SwarmConsts,
        velocity_fraction: f64,
        gamma_min: f64,
        seed: u64,
        per_dim_draws: bool,
        normalized_distance: bool,
    ) -> Result<SwarmState> {
        if q < 2 {
            return Err(Error::InvalidParam(format!("swarm size must be >= 2, got {q}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = bbox.dim();
        let particles: Vec<Particle> = (0..q)
            .map(|_| {
                let pos: Vec<f64> = (0..dim)
                    .map(|d| rng.random_range(bbox.lo()[d]..=bbox.hi()[d]))
                    .collect();
                Particle::at(pos)
            })
            .collect();
        // before any fitness exists, seed gbest from the first particle
        let gbest = particles[0].position.clone();
        let s_limits = bbox.velocity_limits(velocity_fraction);
        Ok(SwarmState {
            particles,
            gbest,
            gbest_metric: f64::NEG_INFINITY,
            gamma: gamma_min,
            t: 0,
            consts,
            bbox,
            s_limits,
            rng,
            per_dim_draws,
            normalized_distance,
        })
    }

    pub fn search_box(&self) -> &SearchBox {
        &self.bbox
    }

    pub fn velocity_limits(&self) -> &[f64] {
        &self.s_limits
    }

    /// Advance every particle one iteration (standard or GM evolution) and
    /// clamp it back into the box. Increments the iteration counter.
    pub fn evolve_and_bound(&mut self, generalized: bool) {
        self.t += 1;
        let gbest = self.gbest.clone();
        let consts = self.consts;
        let gamma = self.gamma;
        let t = self.t;
        for p in &mut self.particles {
            let (r1, r2) = draw_pairs(&mut self.rng, p.dim(), self.per_dim_draws);
            if generalized {
                gm_pso_step_with_draws(p, &gbest, consts, gamma, t, &r1, &r2);
            } else {
                pso_step_with_draws(p, &gbest, consts, &r1, &r2);
            }
            bound(p, &self.bbox, &self.s_limits);
        }
    }

    /// Update the momentum coefficient from the staircase schedule.
    pub fn update_gamma(&mut self, m: usize, gamma_min: f64, gamma_max: f64) {
        let g = gamma_schedule(self.t, m, gamma_min, gamma_max);
        debug_assert!(g >= self.gamma);
        self.gamma = g;
    }

    /// Record this iteration's contributions, compute improvement rates, and
    /// apply the pbest/gbest update rules.
    pub fn absorb_fitness(&mut self, contributions: &[f64], policy: BestPolicy) {
        assert_eq!(contributions.len(), self.particles.len(), "ledger mismatch");
        let widths = self.bbox.widths();
        let scale = self.normalized_distance.then_some(widths.as_slice());

        for (p, &f) in self.particles.iter_mut().zip(contributions) {
            p.prev_fitness = Some(std::mem::replace(&mut p.fitness, f));
            // fitness existed only from t=1 on
            if self.t == 1 {
                p.prev_fitness = None;
            }
            p.prev_ir = p.ir.take();
            if self.t >= 2 {
                let h_prev = p.prev_position.as_ref().expect("history at t >= 2");
                p.ir = Some(improvement_rate(
                    p.prev_fitness.unwrap_or(f64::NEG_INFINITY),
                    p.fitness,
                    h_prev,
                    &p.position,
                    scale,
                ));
            }
        }

        // pbest: keep the best contribution seen so far
        for p in &mut self.particles {
            if p.fitness > p.pbest_fitness {
                p.pbest_fitness = p.fitness;
                p.pbest = p.position.clone();
            }
        }

        match policy {
            BestPolicy::FitnessArgmax => {
                if let Some(best) = argmax_by_fitness(&self.particles) {
                    self.gbest = self.particles[best].position.clone();
                    self.gbest_metric = self.particles[best].fitness;
                }
            }
            BestPolicy::ImprovementRate => {
                if self.t == 1 {
                    if let Some(best) = argmax_by_fitness(&self.particles) {
                        self.gbest = self.particles[best].position.clone();
                        self.gbest_metric = self.particles[best].fitness;
                    }
                } else {
                    // literal per-particle rule: any particle whose improvement
                    // rate rose takes over gbest, scanned in index order
                    for p in &self.particles {
                        let ir = p.ir.unwrap_or(f64::NEG_INFINITY);
                        let prev = p.prev_ir.unwrap_or(f64::NEG_INFINITY);
                        if ir > prev {
                            self.gbest = p.position.clone();
                            self.gbest_metric = ir;
                        }
                    }
                }
            }
        }
    }
}

/// Highest fitness wins; ties go to the lowest index.
fn argmax_by_fitness(particles: &[Particle]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, p) in particles.iter().enumerate() {
        if p.fitness.is_nan() {
            continue;
        }
        match best {
            None => best = Some(j),
            Some(b) if p.fitness > particles[b].fitness => best = Some(j),
            _ => {}
        }
    }
    best
}
