//! Analytic denoiser toward a known clean state, for testing the sampler
//! independently of training.

use super::process::{DiffusionState, ModelInput, RawOutput, ScoreModel};
use crate::linalg::Vec3;

/// Returns the exact noise/score targets that would have produced the input
/// from `target`.
#[derive(Clone, Debug)]
pub struct OracleDenoiser {
    pub target: DiffusionState,
}

impl OracleDenoiser {
    pub fn new(target: DiffusionState) -> Self {
        Self { target }
    }
}

impl ScoreModel for OracleDenoiser {
    fn predict(&self, input: &ModelInput) -> RawOutput {
        let ctx = input.ctx;
        let t = input.t;
        let ab = ctx.schedule.alpha_bar[t];
        let denom = (1.0 - ab).sqrt();
        let tgt = &self.target;
        let eps_k = [0, 1, 2, 3, 4, 5].map(|i| (input.k[i] - ab.sqrt() * tgt.k[i]) / denom);

        let layout = input.layout;
        let mut eps_f = Vec::with_capacity(layout.n_atoms);
        let mut eps_a = Vec::with_capacity(layout.n_atoms);
        for (a, &(s, i)) in layout.atom_site.iter().enumerate() {
            let w = &layout.sites[s].position;
            let basic = input.basic[s];
            let p = Vec3::from_fn(|j, _| {
                if w.free[j] {
                    ctx.normalized_score(t, basic[j] - tgt.basic[s][j], w.scale_sq[j])
                } else {
                    0.0
                }
            });
            eps_f.push(w.pairs[i].rot * p);
            eps_a.push(
                input.types[a].iter().zip(&tgt.types[s]).map(|(x, x0)| (x - ab.sqrt() * x0) / denom).collect(),
            );
        }
        RawOutput { eps_k, eps_f, eps_a }
    }
}
