//! Reverse-time sampling: DDPM steps on k and A′, predictor–corrector
//! Langevin steps on F′.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::process::{argmax, one_hot, project_output, DiffusionContext, DiffusionState, Layout, ModelInput, Noise, ScoreModel};
use crate::crystal::{Crystal, Site};
use crate::elements::{type_count, Element};
use crate::error::{domain, Result};
use crate::lattice::{lattice_from_k, KVector, LatticeMatrix};
use crate::linalg::Vec3;
use crate::spacegroup::{expand_structure, SpaceGroupTable};

/// Draws the prior state at `t = T`.
pub fn prior_state(
    layout: &Layout,
    ctx: &DiffusionContext,
    fixed_types: Option<&[Element]>,
    rng: &mut impl Rng,
) -> DiffusionState {
    let mut k = KVector(layout.mask.fixed);
    for i in 0..6 {
        if layout.mask.free[i] {
            k[i] = StandardNormal.sample(rng);
        }
    }
    let basic = layout
        .sites
        .iter()
        .map(|s| {
            let u = Vec3::new(rng.random(), rng.random(), rng.random());
            s.position.normalize(&u)
        })
        .collect();
    let types = match fixed_types {
        Some(ts) => ts.iter().map(|&e| one_hot(e)).collect(),
        None => (0..layout.num_sites())
            .map(|_| (0..type_count()).map(|_| StandardNormal.sample(rng)).collect())
            .collect(),
    };
    DiffusionState { t: ctx.steps(), k, basic, types }
}

fn langevin_update(
    state: &mut DiffusionState,
    layout: &Layout,
    ctx: &DiffusionContext,
    eps_f: &[Vec3],
    step: f64,
    noise_std: f64,
    rng: &mut impl Rng,
) {
    let t = state.t;
    for ((b, site), e) in state.basic.iter_mut().zip(&layout.sites).zip(eps_f) {
        let w = &site.position;
        let z = Vec3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng));
        let noise = w.project(&z) * noise_std;
        let mut next = *b;
        for j in 0..3 {
            if w.free[j] {
                let sc = ctx.denormalize(t, e[j], w.scale_sq[j]);
                next[j] += step * w.scale_sq[j] * sc + noise[j];
            }
        }
        *b = w.normalize(&next);
    }
}

/// One reverse step `t → t−1`.
pub fn reverse_step(
    state: &mut DiffusionState,
    layout: &Layout,
    model: &dyn ScoreModel,
    ctx: &DiffusionContext,
    fixed_types: bool,
    rng: &mut impl Rng,
) {
    let t = state.t;
    let sched = &ctx.schedule;
    let (sigma_t, sigma_prev) = (sched.sigma[t], sched.sigma[t - 1]);

    // Corrector on F′.
    let out = project_output(&model.predict(&ModelInput::new(state, layout, ctx)), layout);
    let step = sched.corrector_gamma * (sigma_t / sched.sigma[1]).powi(2);
    langevin_update(state, layout, ctx, &out.eps_f, step, (2.0 * step).sqrt(), rng);

    // Predictor on F′, ancestral DDPM on k and A′.
    let out = project_output(&model.predict(&ModelInput::new(state, layout, ctx)), layout);
    let step = sigma_t * sigma_t - sigma_prev * sigma_prev;
    let std = (sigma_prev * sigma_prev * step / (sigma_t * sigma_t)).sqrt();
    langevin_update(state, layout, ctx, &out.eps_f, step, std, rng);

    let alpha = sched.alpha(t);
    let coef = sched.beta[t] / (1.0 - sched.alpha_bar[t]).sqrt();
    let sd = if t > 1 { sched.posterior_variance(t).sqrt() } else { 0.0 };
    for i in 0..6 {
        if layout.mask.free[i] {
            let z: f64 = if t > 1 { StandardNormal.sample(rng) } else { 0.0 };
            state.k[i] = (state.k[i] - coef * out.eps_k[i]) / alpha.sqrt() + sd * z;
        }
    }
    if !fixed_types {
        for (a, e) in state.types.iter_mut().zip(&out.eps_a) {
            for (x, ex) in a.iter_mut().zip(e) {
                let z: f64 = if t > 1 { StandardNormal.sample(rng) } else { 0.0 };
                *x = (*x - coef * ex) / alpha.sqrt() + sd * z;
            }
        }
    }
    state.t = t - 1;
}

/// Runs the reverse chain from `state` down to `t = 0`, calling `observer`
/// after every step.
pub fn run_chain(
    mut state: DiffusionState,
    layout: &Layout,
    model: &dyn ScoreModel,
    ctx: &DiffusionContext,
    fixed_types: bool,
    rng: &mut impl Rng,
    observer: &mut dyn FnMut(&DiffusionState),
) -> DiffusionState {
    while state.t > 0 {
        reverse_step(&mut state, layout, model, ctx, fixed_types, rng);
        observer(&state);
    }
    state
}

/// Decodes a clean state into a full crystal.
pub fn decode(state: &DiffusionState, layout: &Layout, table: &SpaceGroupTable) -> Result<Crystal> {
    let entry = table.get(layout.group)?;
    let sites: Result<Vec<Site>> = layout
        .sites
        .iter()
        .zip(state.basic.iter().zip(&state.types))
        .map(|(s, (b, a))| Ok(Site { wyckoff: s.wyckoff, element: Element::from_index(argmax(a))?, basic: *b }))
        .collect();
    let lattice = LatticeMatrix::new(*lattice_from_k(&state.k).matrix())
        .map_err(|e| crate::Error::Domain(format!("sampled lattice is degenerate (k = {:?}): {e}", state.k.0)))?;
    expand_structure(&sites?, lattice, entry)
}

/// Samples one structure for a Wyckoff layout. With `fixed_types` (one
/// element per site) the types are held fixed throughout.
pub fn sample(
    layout: &Layout,
    model: &dyn ScoreModel,
    ctx: &DiffusionContext,
    table: &SpaceGroupTable,
    fixed_types: Option<&[Element]>,
    rng: &mut impl Rng,
) -> Result<Crystal> {
    if let Some(ts) = fixed_types {
        if ts.len() != layout.num_sites() {
            return domain(format!("{} fixed types for {} sites", ts.len(), layout.num_sites()));
        }
    }
    let init = prior_state(layout, ctx, fixed_types, rng);
    let out = run_chain(init, layout, model, ctx, fixed_types.is_some(), rng, &mut |_| {});
    decode(&out, layout, table)
}

/// Forward-noises a clean state to `t_start` and denoises it back.
pub fn refine_state(
    clean: &DiffusionState,
    layout: &Layout,
    model: &dyn ScoreModel,
    ctx: &DiffusionContext,
    t_start: usize,
    fixed_types: bool,
    rng: &mut impl Rng,
) -> Result<DiffusionState> {
    if t_start > ctx.steps() {
        return domain(format!("t_start {t_start} exceeds T = {}", ctx.steps()));
    }
    if t_start == 0 {
        return Ok(clean.clone());
    }
    let h = clean.types.first().map_or(0, |v| v.len());
    let noise = Noise::sample(layout, h, rng);
    let ab = ctx.schedule.alpha_bar[t_start];
    let state = DiffusionState {
        t: t_start,
        k: super::process::forward_k(&clean.k, &layout.mask, ab, &noise.k),
        basic: super::process::forward_f(&clean.basic, layout, ctx.schedule.sigma[t_start], &noise.f),
        types: if fixed_types { clean.types.clone() } else { super::process::forward_a(&clean.types, ab, &noise.a) },
    };
    Ok(run_chain(state, layout, model, ctx, fixed_types, rng, &mut |_| {}))
}
