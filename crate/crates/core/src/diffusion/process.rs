//! Site layouts, forward noising, denoising targets and the training loss.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::schedule::{NoiseSchedule, ScheduleConfig};
use super::wrapped::{score, LambdaTable};
use crate::crystal::Crystal;
use crate::elements::{type_count, Element};
use crate::error::{domain, Result};
use crate::lattice::{project_k, FamilyMask, KVector};
use crate::linalg::Vec3;
use crate::spacegroup::{SpaceGroupEntry, SpaceGroupTable, WyckoffPosition};

/// Schedule plus the cached λ weights.
#[derive(Clone, Debug)]
pub struct DiffusionContext {
    pub schedule: NoiseSchedule,
    pub lambda: LambdaTable,
}

impl DiffusionContext {
    pub fn new(cfg: &ScheduleConfig) -> Result<Self> {
        let schedule = cfg.build()?;
        let lambda = LambdaTable::new(schedule.sigma.clone(), cfg.n_images, cfg.lambda_samples, cfg.lambda_seed);
        Ok(Self { schedule, lambda })
    }

    pub fn steps(&self) -> usize {
        self.schedule.steps
    }

    /// Normalized wrapped-normal score `√λ · ∇ log q` of a parameter displacement.
    pub fn normalized_score(&self, t: usize, displacement: f64, scale_sq: f64) -> f64 {
        let s = self.schedule.sigma[t] * scale_sq.sqrt();
        score(displacement, s, self.schedule.n_images) * self.lambda.get(t, scale_sq).sqrt()
    }

    /// Inverse of [`Self::normalized_score`]'s scaling: the score estimate from a
    /// normalized network output.
    pub fn denormalize(&self, t: usize, value: f64, scale_sq: f64) -> f64 {
        value / self.lambda.get(t, scale_sq).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct SiteLayout {
    pub wyckoff: usize,
    pub position: WyckoffPosition,
    pub start: usize,
}

impl SiteLayout {
    pub fn len(&self) -> usize {
        self.position.multiplicity
    }

    pub fn is_empty(&self) -> bool {
        self.position.multiplicity == 0
    }
}

/// The Wyckoff structure of a crystal: which positions are occupied and where
/// each orbit sits in the expanded atom list.
#[derive(Clone, Debug)]
pub struct Layout {
    pub group: u16,
    pub mask: FamilyMask,
    pub sites: Vec<SiteLayout>,
    pub n_atoms: usize,
    /// `(site, pair)` of each expanded atom.
    pub atom_site: Vec<(usize, usize)>,
}

impl Layout {
    pub fn new(entry: &SpaceGroupEntry, wyckoff: &[usize]) -> Result<Self> {
        if wyckoff.is_empty() {
            return domain("layout needs at least one site");
        }
        let mut sites = Vec::with_capacity(wyckoff.len());
        let mut atom_site = Vec::new();
        for (s, &w) in wyckoff.iter().enumerate() {
            let position = entry
                .wyckoff
                .get(w)
                .ok_or_else(|| crate::Error::Domain(format!("group {} has no Wyckoff index {w}", entry.number)))?
                .clone();
            for i in 0..position.multiplicity {
                atom_site.push((s, i));
            }
            sites.push(SiteLayout { wyckoff: w, start: atom_site.len() - position.multiplicity, position });
        }
        Ok(Self {
            group: entry.number,
            mask: entry.family.mask(),
            n_atoms: atom_site.len(),
            sites,
            atom_site,
        })
    }

    pub fn from_letters(entry: &SpaceGroupEntry, letters: &[char]) -> Result<Self> {
        let idx: Result<Vec<usize>> = letters
            .iter()
            .map(|&l| {
                entry
                    .wyckoff_index(l)
                    .ok_or_else(|| crate::Error::Domain(format!("group {} has no Wyckoff position {l}", entry.number)))
            })
            .collect();
        Self::new(entry, &idx?)
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn position_of_atom(&self, atom: usize) -> (&WyckoffPosition, usize) {
        let (s, i) = self.atom_site[atom];
        (&self.sites[s].position, i)
    }

    pub fn expand_frac(&self, basic: &[Vec3]) -> Vec<Vec3> {
        self.sites.iter().zip(basic).flat_map(|(s, b)| s.position.orbit(b)).collect()
    }

    pub fn expand_rows<T: Clone>(&self, per_site: &[T]) -> Vec<T> {
        self.atom_site.iter().map(|&(s, _)| per_site[s].clone()).collect()
    }

    /// Distinct per-parameter variance scales occurring in the layout.
    pub fn scale_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .sites
            .iter()
            .flat_map(|s| (0..3).filter(|&j| s.position.free[j]).map(|j| s.position.scale_sq[j]))
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

/// One-hot row for an element over all `h` classes.
pub fn one_hot(e: Element) -> Vec<f64> {
    let mut v = vec![0.0; type_count()];
    v[e.index()] = 1.0;
    v
}

/// Index of the largest entry (first on ties).
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// `(k, F′, A′)` at step `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionState {
    pub t: usize,
    pub k: KVector,
    pub basic: Vec<Vec3>,
    pub types: Vec<Vec<f64>>,
}

/// A clean annotated structure ready for training or as an oracle target.
#[derive(Clone, Debug)]
pub struct Example {
    pub layout: Layout,
    pub state: DiffusionState,
    pub species: Vec<Element>,
}

impl Example {
    pub fn from_crystal(c: &Crystal, table: &SpaceGroupTable) -> Result<Self> {
        let ann = c.annotation.as_ref().ok_or_else(|| crate::Error::Domain("crystal is not annotated".into()))?;
        let entry = table.get(ann.group)?;
        let wyckoff: Vec<usize> = ann.sites.iter().map(|s| s.wyckoff).collect();
        let layout = Layout::new(entry, &wyckoff)?;
        let k = project_k(&c.lattice.k_vector(), &layout.mask);
        let state = DiffusionState {
            t: 0,
            k,
            basic: ann.sites.iter().zip(&layout.sites).map(|(s, l)| l.position.normalize(&s.basic)).collect(),
            types: ann.sites.iter().map(|s| one_hot(s.element)).collect(),
        };
        Ok(Self { layout, state, species: ann.sites.iter().map(|s| s.element).collect() })
    }
}

/// Standard-normal draws for one forward step.
#[derive(Clone, Debug)]
pub struct Noise {
    pub k: [f64; 6],
    pub f: Vec<Vec3>,
    pub a: Vec<Vec<f64>>,
}

impl Noise {
    pub fn sample(layout: &Layout, h: usize, rng: &mut impl Rng) -> Self {
        let mut n = || -> f64 { StandardNormal.sample(rng) };
        let k = [n(), n(), n(), n(), n(), n()];
        let f = (0..layout.num_sites()).map(|_| Vec3::new(n(), n(), n())).collect();
        let a = (0..layout.num_sites()).map(|_| (0..h).map(|_| n()).collect()).collect();
        Self { k, f, a }
    }
}

/// `k_t = m⊙(√ᾱ k₀ + √(1−ᾱ) ε) + (1−m)⊙k₀`.
pub fn forward_k(k0: &KVector, mask: &FamilyMask, alpha_bar: f64, noise: &[f64; 6]) -> KVector {
    let mut out = *k0;
    for i in 0..6 {
        if mask.free[i] {
            out[i] = alpha_bar.sqrt() * k0[i] + (1.0 - alpha_bar).sqrt() * noise[i];
        }
    }
    out
}

/// `F′_t = w(F′₀ + σ R₀† ε)` per site.
pub fn forward_f(basic0: &[Vec3], layout: &Layout, sigma: f64, noise: &[Vec3]) -> Vec<Vec3> {
    layout
        .sites
        .iter()
        .zip(basic0.iter().zip(noise))
        .map(|(s, (b, e))| s.position.normalize(&(b + s.position.project(&(e * sigma)))))
        .collect()
}

/// `A′_t = √ᾱ A′₀ + √(1−ᾱ) ε`.
pub fn forward_a(types0: &[Vec<f64>], alpha_bar: f64, noise: &[Vec<f64>]) -> Vec<Vec<f64>> {
    types0
        .iter()
        .zip(noise)
        .map(|(a, e)| a.iter().zip(e).map(|(x, z)| alpha_bar.sqrt() * x + (1.0 - alpha_bar).sqrt() * z).collect())
        .collect()
}

/// Normalized-score targets for the F′ head, per site.
pub fn coord_targets(ctx: &DiffusionContext, layout: &Layout, t: usize, basic_t: &[Vec3], basic0: &[Vec3]) -> Vec<Vec3> {
    layout
        .sites
        .iter()
        .zip(basic_t.iter().zip(basic0))
        .map(|(s, (bt, b0))| {
            let w = &s.position;
            Vec3::from_fn(|j, _| if w.free[j] { ctx.normalized_score(t, bt[j] - b0[j], w.scale_sq[j]) } else { 0.0 })
        })
        .collect()
}

/// Input to a score model: the expanded noisy structure at step `t`.
pub struct ModelInput<'a> {
    pub t: usize,
    pub k: KVector,
    /// Basic coordinates per site (oracle use); the network reads `frac`.
    pub basic: Vec<Vec3>,
    pub frac: Vec<Vec3>,
    pub types: Vec<Vec<f64>>,
    pub layout: &'a Layout,
    pub ctx: &'a DiffusionContext,
}

impl<'a> ModelInput<'a> {
    pub fn new(state: &DiffusionState, layout: &'a Layout, ctx: &'a DiffusionContext) -> Self {
        Self {
            t: state.t,
            k: state.k,
            basic: state.basic.clone(),
            frac: layout.expand_frac(&state.basic),
            types: layout.expand_rows(&state.types),
            layout,
            ctx,
        }
    }
}

/// Unconstrained per-atom model outputs, before masking and orbit averaging.
#[derive(Clone, Debug, PartialEq)]
pub struct RawOutput {
    pub eps_k: [f64; 6],
    pub eps_f: Vec<Vec3>,
    pub eps_a: Vec<Vec<f64>>,
}

impl RawOutput {
    pub fn zeros(n_atoms: usize, h: usize) -> Self {
        Self { eps_k: [0.0; 6], eps_f: vec![Vec3::zeros(); n_atoms], eps_a: vec![vec![0.0; h]; n_atoms] }
    }
}

/// A denoiser `φ(M_t, t)`.
pub trait ScoreModel: Sync {
    fn predict(&self, input: &ModelInput) -> RawOutput;
}

/// Outputs after the constraint projections.
#[derive(Clone, Debug, PartialEq)]
pub struct Projected {
    /// `m ⊙ ε̂_k`.
    pub eps_k: [f64; 6],
    /// Per atom, pulled back by `Rᵢ†` and restricted to free parameters.
    pub eps_f_atoms: Vec<Vec3>,
    /// Orbit means of `eps_f_atoms`.
    pub eps_f: Vec<Vec3>,
    /// Orbit means of the type outputs.
    pub eps_a: Vec<Vec<f64>>,
}

/// Masks the k head and averages the node heads over each Wyckoff orbit.
pub fn project_output(raw: &RawOutput, layout: &Layout) -> Projected {
    let w = layout.mask.weights();
    let eps_k = [0, 1, 2, 3, 4, 5].map(|i| w[i] * raw.eps_k[i]);
    let eps_f_atoms: Vec<Vec3> = (0..layout.n_atoms)
        .map(|a| {
            let (pos, i) = layout.position_of_atom(a);
            pos.restrict(&(pos.pair_pinv[i] * raw.eps_f[a]))
        })
        .collect();
    let h = raw.eps_a.first().map_or(0, |v| v.len());
    let mut eps_f = Vec::with_capacity(layout.num_sites());
    let mut eps_a = Vec::with_capacity(layout.num_sites());
    for s in &layout.sites {
        let n = s.len() as f64;
        let range = s.start..s.start + s.len();
        eps_f.push(eps_f_atoms[range.clone()].iter().sum::<Vec3>() / n);
        let mut mean = vec![0.0; h];
        for a in range {
            for (m, x) in mean.iter_mut().zip(&raw.eps_a[a]) {
                *m += x / n;
            }
        }
        eps_a.push(mean);
    }
    Projected { eps_k, eps_f_atoms, eps_f, eps_a }
}

/// Where the orbit average enters the coordinate loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordLossForm {
    /// Mean over orbit atoms of the per-atom error.
    #[default]
    Post,
    /// Error of the orbit-mean output.
    Pre,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub k: f64,
    pub coord: f64,
    pub types: f64,
    pub form: CoordLossForm,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { k: 1.0, coord: 1.0, types: 20.0, form: CoordLossForm::Post }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub k: f64,
    pub coord: f64,
    pub types: f64,
    pub total: f64,
}

/// Targets for one training draw.
#[derive(Clone, Debug)]
pub struct Targets {
    pub k: [f64; 6],
    pub f: Vec<Vec3>,
    pub a: Vec<Vec<f64>>,
}

/// Draws `t`-step noise for an example: the noisy state and its targets.
pub fn noisy_sample(
    ex: &Example,
    ctx: &DiffusionContext,
    t: usize,
    fixed_types: bool,
    rng: &mut impl Rng,
) -> (DiffusionState, Targets) {
    let h = ex.state.types.first().map_or(0, |v| v.len());
    let noise = Noise::sample(&ex.layout, h, rng);
    let ab = ctx.schedule.alpha_bar[t];
    let basic = forward_f(&ex.state.basic, &ex.layout, ctx.schedule.sigma[t], &noise.f);
    let f = coord_targets(ctx, &ex.layout, t, &basic, &ex.state.basic);
    let state = DiffusionState {
        t,
        k: forward_k(&ex.state.k, &ex.layout.mask, ab, &noise.k),
        basic,
        types: if fixed_types { ex.state.types.clone() } else { forward_a(&ex.state.types, ab, &noise.a) },
    };
    let w = ex.layout.mask.weights();
    let targets = Targets { k: [0, 1, 2, 3, 4, 5].map(|i| w[i] * noise.k[i]), f, a: noise.a };
    (state, targets)
}

/// Weighted loss and its gradient with respect to the raw outputs.
/// `include_types = false` drops the type term (structure prediction mode).
pub fn loss_and_grad(
    raw: &RawOutput,
    targets: &Targets,
    layout: &Layout,
    cfg: &LossConfig,
    include_types: bool,
) -> (LossParts, RawOutput) {
    let p = project_output(raw, layout);
    let n_sites = layout.num_sites() as f64;
    let h = raw.eps_a.first().map_or(0, |v| v.len());
    let mut grad = RawOutput::zeros(layout.n_atoms, h);
    let mut parts = LossParts::default();

    let w = layout.mask.weights();
    for i in 0..6 {
        let r = targets.k[i] - p.eps_k[i];
        parts.k += r * r;
        grad.eps_k[i] = -2.0 * r * w[i] * cfg.k;
    }

    for (s, site) in layout.sites.iter().enumerate() {
        let n = site.len() as f64;
        let target = targets.f[s];
        for a in site.start..site.start + site.len() {
            let (pos, i) = layout.position_of_atom(a);
            let resid = match cfg.form {
                CoordLossForm::Post => target - p.eps_f_atoms[a],
                CoordLossForm::Pre => target - p.eps_f[s],
            };
            if cfg.form == CoordLossForm::Post {
                parts.coord += resid.norm_squared() / (n * n_sites);
            }
            let g_p = pos.restrict(&(resid * (-2.0 / (n * n_sites))));
            grad.eps_f[a] = pos.pair_pinv[i].transpose() * g_p * cfg.coord;
        }
        if cfg.form == CoordLossForm::Pre {
            parts.coord += (target - p.eps_f[s]).norm_squared() / n_sites;
        }
        if include_types {
            let resid: Vec<f64> = targets.a[s].iter().zip(&p.eps_a[s]).map(|(e, m)| e - m).collect();
            parts.types += resid.iter().map(|r| r * r).sum::<f64>() / n_sites;
            for a in site.start..site.start + site.len() {
                for (g, r) in grad.eps_a[a].iter_mut().zip(&resid) {
                    *g = -2.0 * r / (n * n_sites) * cfg.types;
                }
            }
        }
    }
    parts.total = cfg.k * parts.k + cfg.coord * parts.coord + if include_types { cfg.types * parts.types } else { 0.0 };
    (parts, grad)
}

/// Monte-Carlo draw of the combined loss of a model on one example at step `t`.
pub fn loss(
    ex: &Example,
    model: &dyn ScoreModel,
    ctx: &DiffusionContext,
    t: usize,
    cfg: &LossConfig,
    csp: bool,
    rng: &mut impl Rng,
) -> Result<LossParts> {
    if t == 0 || t > ctx.steps() {
        return domain(format!("loss step {t} outside 1..={}", ctx.steps()));
    }
    let (state, targets) = noisy_sample(ex, ctx, t, csp, rng);
    let raw = model.predict(&ModelInput::new(&state, &ex.layout, ctx));
    Ok(loss_and_grad(&raw, &targets, &ex.layout, cfg, !csp).0)
}
