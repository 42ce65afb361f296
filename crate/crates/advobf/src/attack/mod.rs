//! Attack mathematics: the relaxed perturbed-program construction, the
//! decomposed projections with bisection, joint and alternating PGD,
//! randomized smoothing, and discretization back to real transforms.

pub mod discretize;
pub mod driver;
pub mod objective;
pub mod optimizer;
pub mod projection;
pub mod relaxed;

pub use discretize::{discretize, DiscretizeMode, MaskExhausted};
pub use driver::{
    attack, AttackConfig, AttackError, AttackResult, OptimizerKind, SelectionItem,
};
pub use objective::{attack_loss, grad_zu, grad_zu_sites, AttackObjective, ModelObjective,
    SmoothedObjective};
pub use optimizer::{run_ao, run_jo, run_u_only, PgdParams, PgdRun};
pub use projection::{
    project_simplex, project_simplex_masked, project_simplex_stats, project_z, project_z_stats,
    BisectionStats, ROOT_TOL,
};
pub use relaxed::{NoSites, RelaxedProgram};

use crate::summarizer::SummarizerModel;
use rand_chacha::ChaCha8Rng;

/// Monte Carlo smoothed loss and gradients at the relaxed state (site
/// indexed). Noise is uniform in the unit ball over the masked u
/// coordinates; z stays unperturbed.
pub fn smooth_loss_grad(
    model: &SummarizerModel,
    relaxed: &RelaxedProgram,
    target: &[usize],
    mu_s: f64,
    samples: usize,
    rng: ChaCha8Rng,
) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let inner = ModelObjective::new(model, relaxed, target);
    let mut smoothed = SmoothedObjective::new(inner, relaxed, mu_s, samples, false, rng);
    smoothed.loss_grad(&relaxed.site_z, &relaxed.site_u)
}
