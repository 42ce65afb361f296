//! Projected gradient descent over the relaxed attack state: joint
//! simultaneous steps (JO) or alternating block minimization (AO).

use super::objective::AttackObjective;
use super::relaxed::RelaxedProgram;

#[derive(Debug, Clone, PartialEq)]
pub struct PgdParams {
    pub alpha_z: f64,
    pub alpha_u: f64,
    /// Inner PGD steps per block in one AO outer iteration.
    pub inner_z: usize,
    pub inner_u: usize,
}

impl Default for PgdParams {
    fn default() -> Self {
        PgdParams {
            alpha_z: 0.5,
            alpha_u: 0.5,
            inner_z: 10,
            inner_u: 10,
        }
    }
}

/// Outcome of one optimizer run. `trace[t]` is the loss at the iterate
/// entering iteration t. With a constant step size the iterates can walk
/// away from a strong point, so the run keeps the best feasible iterate
/// it visited: `final_loss` is that iterate's loss and the relaxed state
/// is left there.
#[derive(Debug, Clone, PartialEq)]
pub struct PgdRun {
    pub trace: Vec<f64>,
    pub final_loss: f64,
}

/// Tracks the strongest iterate seen during a run.
struct BestIterate {
    loss: f64,
    z: Vec<f64>,
    u: Vec<Vec<f64>>,
}

impl BestIterate {
    fn new(relaxed: &RelaxedProgram, loss: f64) -> Self {
        BestIterate {
            loss,
            z: relaxed.site_z.clone(),
            u: relaxed.site_u.clone(),
        }
    }

    fn observe(&mut self, relaxed: &RelaxedProgram, loss: f64) {
        if loss < self.loss {
            self.loss = loss;
            self.z.clone_from(&relaxed.site_z);
            self.u.clone_from(&relaxed.site_u);
        }
    }

    fn observe_state(&mut self, loss: f64, z: Vec<f64>, u: Vec<Vec<f64>>) {
        if loss < self.loss {
            self.loss = loss;
            self.z = z;
            self.u = u;
        }
    }

    fn restore(self, relaxed: &mut RelaxedProgram) -> f64 {
        relaxed.site_z = self.z;
        relaxed.site_u = self.u;
        self.loss
    }
}

fn step_z(relaxed: &mut RelaxedProgram, grad: &[f64], alpha: f64) {
    for (z, g) in relaxed.site_z.iter_mut().zip(grad) {
        *z -= alpha * g;
    }
}

fn step_u(relaxed: &mut RelaxedProgram, grad: &[Vec<f64>], alpha: f64) {
    let sites = relaxed.enc.sitemap.sites.clone();
    for (s, site) in sites.iter().enumerate() {
        for &j in &site.candidates {
            relaxed.site_u[s][j] -= alpha * grad[s][j];
        }
    }
}

/// Joint optimization: simultaneous descent on (z, u), then the
/// decomposed projections, for `iters` iterations.
pub fn run_jo(
    relaxed: &mut RelaxedProgram,
    obj: &mut dyn AttackObjective,
    iters: usize,
    params: &PgdParams,
) -> PgdRun {
    let mut trace = Vec::with_capacity(iters);
    let mut best = BestIterate::new(relaxed, f64::INFINITY);
    for _ in 0..iters {
        let (loss, gz, gu) = obj.loss_grad(&relaxed.site_z, &relaxed.site_u);
        trace.push(loss);
        let score = obj.score(&relaxed.site_z, &relaxed.site_u);
        best.observe(relaxed, score);
        step_z(relaxed, &gz, params.alpha_z);
        step_u(relaxed, &gu, params.alpha_u);
        relaxed.project();
    }
    let last = obj.score(&relaxed.site_z, &relaxed.site_u);
    best.observe(relaxed, last);
    if let Some((score, z, u)) = obj.take_best_probe() {
        best.observe_state(score, z, u);
    }
    let final_loss = best.restore(relaxed);
    PgdRun { trace, final_loss }
}

/// Alternating optimization: per outer iteration, `inner_z` projected
/// steps on z with u fixed, then `inner_u` projected steps on u with z
/// fixed.
pub fn run_ao(
    relaxed: &mut RelaxedProgram,
    obj: &mut dyn AttackObjective,
    outer_iters: usize,
    params: &PgdParams,
) -> PgdRun {
    let mut trace = Vec::with_capacity(outer_iters);
    let mut best = BestIterate::new(relaxed, f64::INFINITY);
    for _ in 0..outer_iters {
        let outer_loss = obj.loss(&relaxed.site_z, &relaxed.site_u);
        trace.push(outer_loss);
        let score = obj.score(&relaxed.site_z, &relaxed.site_u);
        best.observe(relaxed, score);
        for _ in 0..params.inner_z {
            let (_, gz, _) = obj.loss_grad(&relaxed.site_z, &relaxed.site_u);
            let score = obj.score(&relaxed.site_z, &relaxed.site_u);
            best.observe(relaxed, score);
            step_z(relaxed, &gz, params.alpha_z);
            relaxed.project();
        }
        for _ in 0..params.inner_u {
            let (_, _, gu) = obj.loss_grad(&relaxed.site_z, &relaxed.site_u);
            let score = obj.score(&relaxed.site_z, &relaxed.site_u);
            best.observe(relaxed, score);
            step_u(relaxed, &gu, params.alpha_u);
            relaxed.project();
        }
    }
    let last = obj.score(&relaxed.site_z, &relaxed.site_u);
    best.observe(relaxed, last);
    if let Some((score, z, u)) = obj.take_best_probe() {
        best.observe_state(score, z, u);
    }
    let final_loss = best.restore(relaxed);
    PgdRun { trace, final_loss }
}

/// PGD on u only, z frozen (the random-site baseline's token solver).
pub fn run_u_only(
    relaxed: &mut RelaxedProgram,
    obj: &mut dyn AttackObjective,
    iters: usize,
    inner_u: usize,
    alpha_u: f64,
) -> PgdRun {
    let frozen_z = relaxed.site_z.clone();
    let mut trace = Vec::with_capacity(iters);
    let mut best = BestIterate::new(relaxed, f64::INFINITY);
    for _ in 0..iters {
        let loss = obj.loss(&relaxed.site_z, &relaxed.site_u);
        trace.push(loss);
        let score = obj.score(&relaxed.site_z, &relaxed.site_u);
        best.observe(relaxed, score);
        for _ in 0..inner_u {
            let (_, _, gu) = obj.loss_grad(&relaxed.site_z, &relaxed.site_u);
            let score = obj.score(&relaxed.site_z, &relaxed.site_u);
            best.observe(relaxed, score);
            step_u(relaxed, &gu, alpha_u);
            relaxed.project();
            relaxed.site_z = frozen_z.clone();
        }
    }
    let last = obj.score(&relaxed.site_z, &relaxed.site_u);
    best.observe(relaxed, last);
    if let Some((score, z, u)) = obj.take_best_probe() {
        best.observe_state(score, z, u);
    }
    let final_loss = best.restore(relaxed);
    PgdRun { trace, final_loss }
}
