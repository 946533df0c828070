//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{ctx, family_structure, FAMILY_LAYOUTS};
use nalgebra::{Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use wyckdiff::crystal::{wrap, wrap_centered_vec};
use wyckdiff::denoiser::{smoothed, train, Denoiser, LrSchedule, ModelConfig, OptimizerKind, TrainConfig};
use wyckdiff::diffusion::process::{loss_and_grad, noisy_sample, project_output, CoordLossForm, ModelInput, RawOutput};
use wyckdiff::diffusion::sampler::{decode, prior_state};
use wyckdiff::diffusion::wrapped::{log_density, score};
use wyckdiff::diffusion::{run_chain, sample, DiffusionState, Example, LossConfig, OracleDenoiser};
use wyckdiff::evaluation::{match_rate, match_structures, min_distance, structural_validity, wasserstein_1d, MatchSettings};
use wyckdiff::lattice::{
    k_from_symmetric, lattice_from_k, lattice_params_check, params_from_lattice, polar_decompose, project_k,
    symmetric_from_k, CrystalFamily, KVector, LatticeMatrix, ShapeTolerance, SymmetricLog, HEXAGONAL_K1,
};
use wyckdiff::linalg::{Mat3, Vec3};
use wyckdiff::spacegroup::{builtin_group, orbit_expand, verify_symmetry, SpaceGroupTable};
use wyckdiff::{toy, Crystal, Element};

type Outcome = Result<String, String>;

/// Roundoff level of a central difference with h = 1e-5 on an O(1) loss.
const FD_FLOOR: f64 = 1e-8;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.1?}, limit {limit:?}"))
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn example(c: &Crystal) -> Example {
    Example::from_crystal(c, SpaceGroupTable::builtin()).unwrap()
}

fn same_mod1(a: &Vec3, b: &Vec3, tol: f64) -> bool {
    wrap_centered_vec(&(a - b)).norm() <= tol
}

fn det_positive(rng: &mut impl Rng) -> Mat3 {
    loop {
        let mut m: Mat3 = Matrix3::from_fn(|_, _| rng.random_range(-3.0..3.0));
        if m.determinant() < 0.0 {
            m.column_mut(0).neg_mut();
        }
        let sv = m.singular_values();
        if sv.min() > 0.05 && sv.max() / sv.min() < 1e3 {
            return m;
        }
    }
}

fn lattice_round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_l, mut worst_q, mut worst_k) = (0f64, 0f64, 0f64);
    for _ in 0..1000 {
        let l = det_positive(&mut rng);
        let p = polar_decompose(&l).map_err(|e| e.to_string())?;
        let s = p.log.matrix();
        worst_l = worst_l.max((l - p.rotation * s.exp()).norm());
        worst_q = worst_q.max((p.rotation.transpose() * p.rotation - Mat3::identity()).norm());
        let k = k_from_symmetric(&p.log);
        worst_k = worst_k.max(k_from_symmetric(&symmetric_from_k(&k)).max_abs_diff(&k));
    }
    ensure(worst_l < 1e-10, || format!("|L - Q exp(S)| = {worst_l:e}"))?;
    ensure(worst_q < 1e-10, || format!("|QtQ - I| = {worst_q:e}"))?;
    ensure(worst_k < 1e-12, || format!("k round trip {worst_k:e}"))?;
    within(Duration::from_secs(5), start)?;
    Ok(format!("max |L - Q exp(S)| {worst_l:.1e}, |QtQ - I| {worst_q:.1e}, k {worst_k:.1e}"))
}

fn family_conformance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for family in CrystalFamily::ALL {
        for _ in 0..100 {
            let raw = KVector([0; 6].map(|_: i32| rng.random_range(-1.0..1.0)));
            let l = lattice_from_k(&project_k(&raw, &family.mask()));
            ensure(lattice_params_check(&l, family, ShapeTolerance::default()), || {
                format!("{family}: {}", params_from_lattice(&l))
            })?;
        }
    }
    let mut worst_gamma = 0f64;
    for _ in 0..100 {
        let k = KVector([HEXAGONAL_K1, 0.0, 0.0, 0.0, rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0)]);
        worst_gamma = worst_gamma.max((params_from_lattice(&lattice_from_k(&k)).gamma - 120.0).abs());
    }
    ensure(worst_gamma < 1e-8, || format!("hexagonal gamma off by {worst_gamma:e}"))?;
    let mut worst_closed = 0f64;
    for _ in 0..100 {
        let (a, b, c): (f64, f64, f64) = (rng.random_range(1.0..10.0), rng.random_range(1.0..10.0), rng.random_range(1.0..10.0));
        let s = Mat3::from_diagonal(&Vector3::new(a.ln(), b.ln(), c.ln()));
        let k = k_from_symmetric(&SymmetricLog::from_matrix(&s));
        let closed = [0.0, 0.0, 0.0, (a / b).ln() / 2.0, (a * b / (c * c)).ln() / 6.0, (a * b * c).ln() / 3.0];
        for i in 0..6 {
            worst_closed = worst_closed.max((k[i] - closed[i]).abs());
        }
    }
    ensure(worst_closed < 1e-12, || format!("closed forms off by {worst_closed:e}"))?;
    Ok(format!("6 families x 100 cells, gamma err {worst_gamma:.1e}, closed forms {worst_closed:.1e}"))
}

fn group_theory() -> Outcome {
    let dir = std::path::Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/data/spacegroups"));
    let table = SpaceGroupTable::load_dir(dir).map_err(|e| e.to_string())?;
    let has = |ops: &[wyckdiff::spacegroup::AffinePair], r: &Mat3, t: &Vec3| {
        ops.iter().any(|o| (o.rot - r).norm() < 1e-12 && same_mod1(&o.trans, t, 1e-12))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut groups = 0;
    for n in table.numbers() {
        let e = table.get(n).map_err(|e| e.to_string())?;
        ensure(has(&e.ops, &Mat3::identity(), &Vec3::zeros()), || format!("group {n} lacks identity"))?;
        for a in &e.ops {
            let inv = a.rot.try_inverse().ok_or("singular operation")?;
            ensure(has(&e.ops, &inv, &(-inv * a.trans)), || format!("group {n} lacks an inverse"))?;
            for b in &e.ops {
                ensure(has(&e.ops, &(a.rot * b.rot), &(a.rot * b.trans + a.trans)), || format!("group {n} not closed"))?;
            }
        }
        for w in &e.wyckoff {
            for _ in 0..100 {
                let basic = w.normalize(&Vec3::new(rng.random(), rng.random(), rng.random()));
                let orbit = orbit_expand(&basic, w);
                for op in &e.ops {
                    for p in &orbit {
                        let q = op.apply(p);
                        ensure(orbit.iter().any(|o| same_mod1(o, &q, 1e-10)), || {
                            format!("group {n} {}{} orbit not permuted", w.multiplicity, w.letter)
                        })?;
                    }
                }
            }
        }
        groups += 1;
    }
    Ok(format!("{groups} shipped groups valid, orbits permuted"))
}

fn constraint_preservation() -> Outcome {
    let c = ctx(200);
    let table = SpaceGroupTable::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0f64;
    for (f, (family, _, _)) in FAMILY_LAYOUTS.iter().enumerate() {
        for run in 0..50 {
            let target = family_structure(f, &mut rng);
            let ex = example(&target);
            let oracle = OracleDenoiser::new(ex.state.clone());
            let mask = ex.layout.mask;
            let csp = run % 2 == 1;
            let fixed = csp.then_some(&ex.species[..]);
            let init = prior_state(&ex.layout, &c, fixed, &mut rng);
            let mut k_ok = true;
            let mut f_worst = 0f64;
            let mut check = |s: &DiffusionState| {
                k_ok &= (0..6).all(|i| mask.free[i] || s.k[i] == mask.fixed[i]);
                for (b, site) in s.basic.iter().zip(&ex.layout.sites) {
                    f_worst = f_worst.max(site.position.subspace_residual(b));
                }
            };
            check(&init);
            let out = run_chain(init, &ex.layout, &oracle, &c, csp, &mut rng, &mut check);
            ensure(k_ok, || format!("{family}: a constrained k dim moved"))?;
            ensure(f_worst < 1e-10, || format!("{family}: subspace residual {f_worst:e}"))?;
            worst = worst.max(f_worst);
            let crystal = decode(&out, &ex.layout, table).map_err(|e| e.to_string())?;
            let group = builtin_group(ex.layout.group).map_err(|e| e.to_string())?;
            ensure(verify_symmetry(&crystal, group, 1e-6), || format!("{family}: final structure lost symmetry"))?;
        }
    }
    Ok(format!("300 trajectories, max subspace residual {worst:.1e}"))
}

fn wrapped_normal() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0f64;
    for sigma in [0.01f64, 0.1, 0.5] {
        for _ in 0..100 {
            let x = normal(&mut rng) * sigma.min(0.3) * 2.0;
            let h = 1e-6 * sigma;
            let fd = (log_density(x + h, sigma, 3) - log_density(x - h, sigma, 3)) / (2.0 * h);
            let s = score(x, sigma, 3);
            worst = worst.max((s - fd).abs() / s.abs().max(1e-8));
            for shift in [1.0, -1.0, 5.0] {
                let d = (x * 1024.0).round() / 1024.0;
                ensure(score(d + shift, sigma, 3) == score(d, sigma, 3), || format!("not periodic at {d}"))?;
            }
        }
    }
    ensure(worst < 1e-5, || format!("finite-difference rel err {worst:e}"))?;
    Ok(format!("max rel err {worst:.1e}, periodic"))
}

fn max_diff(a: &RawOutput, b: &RawOutput) -> f64 {
    let mut m = (0..6).map(|i| (a.eps_k[i] - b.eps_k[i]).abs()).fold(0.0, f64::max);
    for (x, y) in a.eps_f.iter().zip(&b.eps_f) {
        m = m.max((x - y).abs().max());
    }
    for (x, y) in a.eps_a.iter().zip(&b.eps_a) {
        for (u, v) in x.iter().zip(y) {
            m = m.max((u - v).abs());
        }
    }
    m
}

fn denoiser_checks() -> Outcome {
    let c = ctx(100);
    let small = ModelConfig { layers: 2, hidden: 16, fourier: 8, ..ModelConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(6);

    let ex = example(&toy::zinc_oxide());
    let mut model = Denoiser::new(small, 5).map_err(|e| e.to_string())?;
    for t in model.tensors.iter_mut().filter(|t| t.shape.len() == 1) {
        t.data.iter_mut().for_each(|x| *x = rng.random_range(-0.3..0.3));
    }
    let (state, targets) = noisy_sample(&ex, &c, 60, false, &mut rng);
    let cfg = LossConfig::default();
    let eval = |m: &Denoiser| {
        let (raw, _) = m.forward(&ModelInput::new(&state, &ex.layout, &c)).unwrap();
        loss_and_grad(&raw, &targets, &ex.layout, &cfg, true).0.total
    };
    let (raw, cache) = model.forward(&ModelInput::new(&state, &ex.layout, &c)).map_err(|e| e.to_string())?;
    let grad = model.backward(&cache, &loss_and_grad(&raw, &targets, &ex.layout, &cfg, true).1);
    let mut worst = 0f64;
    for _ in 0..250 {
        let ti = rng.random_range(0..model.tensors.len());
        let wi = rng.random_range(0..model.tensors[ti].data.len());
        let orig = model.tensors[ti].data[wi];
        let h = 1e-5;
        model.tensors[ti].data[wi] = orig + h;
        let up = eval(&model);
        model.tensors[ti].data[wi] = orig - h;
        let down = eval(&model);
        model.tensors[ti].data[wi] = orig;
        let fd = (up - down) / (2.0 * h);
        let an = grad[ti][wi];
        // entries below the difference quotient's resolution are compared absolutely
        worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(FD_FLOOR));
    }
    ensure(worst < 1e-4, || format!("gradient rel err {worst:e}"))?;

    let ex = example(&toy::octahedral_cluster());
    let model = Denoiser::new(small, 12).map_err(|e| e.to_string())?;
    let mut inv = 0f64;
    for _ in 0..20 {
        let (state, _) = noisy_sample(&ex, &c, rng.random_range(1..=100), false, &mut rng);
        let input = ModelInput::new(&state, &ex.layout, &c);
        let (base, _) = model.forward(&input).map_err(|e| e.to_string())?;
        let tau = Vec3::new(rng.random(), rng.random(), rng.random());
        let mut shifted = ModelInput::new(&state, &ex.layout, &c);
        shifted.frac = input.frac.iter().map(|f| (f + tau).map(wrap)).collect();
        inv = inv.max(max_diff(&base, &model.forward(&shifted).unwrap().0));

        let mut perm: Vec<usize> = (0..input.frac.len()).collect();
        perm.shuffle(&mut rng);
        let mut p_in = ModelInput::new(&state, &ex.layout, &c);
        p_in.frac = perm.iter().map(|&i| input.frac[i]).collect();
        p_in.types = perm.iter().map(|&i| input.types[i].clone()).collect();
        let expect = RawOutput {
            eps_k: base.eps_k,
            eps_f: perm.iter().map(|&i| base.eps_f[i]).collect(),
            eps_a: perm.iter().map(|&i| base.eps_a[i].clone()).collect(),
        };
        inv = inv.max(max_diff(&model.forward(&p_in).unwrap().0, &expect));

        let p = project_output(&base, &ex.layout);
        ensure(p.eps_k[..5] == [0.0; 5], || "masked k-head output nonzero".into())?;
    }
    ensure(inv < 1e-12, || format!("invariance violated by {inv:e}"))?;
    Ok(format!("250 weights, max rel err {worst:.1e}, invariance {inv:.1e}, masked k dims 0"))
}

fn oracle_regeneration() -> Outcome {
    let start = Instant::now();
    let c = ctx(1000);
    let table = SpaceGroupTable::builtin();
    let target = toy::rock_salt();
    let ex = example(&target);
    let oracle = OracleDenoiser::new(ex.state.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut reports = Vec::new();
    for _ in 0..100 {
        let out = sample(&ex.layout, &oracle, &c, table, None, &mut rng).map_err(|e| e.to_string())?;
        reports.push(match_structures(&out, &target, &MatchSettings::default()));
    }
    let s = match_rate(&reports).map_err(|e| e.to_string())?;
    let rmsd = s.mean_rmsd.unwrap_or(f64::INFINITY);
    ensure(s.rate >= 0.9, || format!("match rate {}", s.rate))?;
    ensure(rmsd < 0.05, || format!("mean rmsd {rmsd}"))?;
    within(Duration::from_secs(120), start)?;
    Ok(format!("match rate {:.2} ({}/100), mean rmsd {rmsd:.4}", s.rate, s.matched))
}

fn toy_training() -> Outcome {
    let start = Instant::now();
    let c = ctx(1000);
    let table = SpaceGroupTable::builtin();
    let set = toy::cubic_training_set();
    let data: Vec<Example> = set.iter().map(|(_, x)| example(x)).collect();
    let mcfg = ModelConfig { layers: 3, hidden: 64, fourier: 32, ..ModelConfig::default() };
    let mut model = Denoiser::new(mcfg, 3).map_err(|e| e.to_string())?;
    let tcfg = TrainConfig {
        epochs: 2000,
        draws: 16,
        batch_size: 16,
        lr: 2e-3,
        optimizer: OptimizerKind::Adam,
        schedule: LrSchedule::Cosine,
        csp: true,
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let trace = train(&mut model, &data, &c, &LossConfig::default(), &tcfg, &mut rng).map_err(|e| e.to_string())?;
    let last = *smoothed(&trace, 20).last().ok_or("empty trace")?;
    let ratio = trace[0] / last;
    let mut matched = 0;
    for ((_, truth), ex) in set.iter().zip(&data) {
        if let Ok(out) = sample(&ex.layout, &model, &c, table, Some(&ex.species), &mut rng) {
            matched += match_structures(&out, truth, &MatchSettings::default()).matched as usize;
        }
    }
    let detail = format!("loss {:.3} -> {last:.4} ({ratio:.1}x), regenerated {matched}/5", trace[0]);
    ensure(ratio >= 10.0, || detail.clone())?;
    ensure(matched >= 3, || detail.clone())?;
    within(Duration::from_secs(15 * 60), start)?;
    Ok(detail)
}

fn random_raw(n: usize, h: usize, rng: &mut impl Rng) -> RawOutput {
    RawOutput {
        eps_k: [0; 6].map(|_| normal(rng)),
        eps_f: (0..n).map(|_| Vec3::new(normal(rng), normal(rng), normal(rng))).collect(),
        eps_a: (0..n).map(|_| (0..h).map(|_| normal(rng)).collect()).collect(),
    }
}

fn ablation_fixture() -> Outcome {
    let c = ctx(100);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let form = |form| LossConfig { form, ..LossConfig::default() };
    let both = |ex: &Example, rng: &mut ChaCha8Rng| {
        let (_, targets) = noisy_sample(ex, &c, rng.random_range(1..=100), false, rng);
        let raw = random_raw(ex.layout.n_atoms, ex.state.types[0].len(), rng);
        let post = loss_and_grad(&raw, &targets, &ex.layout, &form(CoordLossForm::Post), true).0;
        let pre = loss_and_grad(&raw, &targets, &ex.layout, &form(CoordLossForm::Pre), true).0;
        (post.coord, pre.coord)
    };
    let cell = LatticeMatrix::cubic(4.0).map_err(|e| e.to_string())?;
    let p1 = toy::build(1, cell, &[('a', "Na", [0.1, 0.2, 0.3]), ('a', "Cl", [0.6, 0.5, 0.9])]).map_err(|e| e.to_string())?;
    let ex = example(&p1);
    let mut worst_p1 = 0f64;
    for _ in 0..20 {
        let (post, pre) = both(&ex, &mut rng);
        worst_p1 = worst_p1.max((post - pre).abs() / post.abs().max(1e-300));
    }
    ensure(worst_p1 < 1e-12, || format!("P1 forms differ by {worst_p1:e}"))?;

    let tetragonal = LatticeMatrix::from_vectors([[4.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 5.0]]).map_err(|e| e.to_string())?;
    let fixture = toy::build(99, tetragonal, &[('a', "Ti", [0.0, 0.0, 0.0]), ('d', "O", [0.23, 0.0, 0.4])])
        .map_err(|e| e.to_string())?;
    let ex = example(&fixture);
    ensure(ex.layout.sites[1].position.multiplicity == 4, || "fixture is not multiplicity 4".into())?;
    let (post, pre) = both(&ex, &mut rng);
    let gap = (post - pre).abs();
    ensure(gap > 1e-8, || format!("multiplicity-4 forms differ by only {gap:e}"))?;
    Ok(format!("P1 rel diff {worst_p1:.1e}, 4d fixture diff {gap:.3e}"))
}

fn random_structure(rng: &mut impl Rng) -> Crystal {
    let p = loop {
        let p = wyckdiff::lattice::LatticeParams {
            a: rng.random_range(3.0..7.0),
            b: rng.random_range(3.0..7.0),
            c: rng.random_range(3.0..7.0),
            alpha: rng.random_range(75.0..105.0),
            beta: rng.random_range(75.0..105.0),
            gamma: rng.random_range(75.0..105.0),
        };
        if let Ok(l) = wyckdiff::lattice::lattice_from_params(&p) {
            break l;
        }
    };
    let n = rng.random_range(1..=8);
    let symbols = ["Na", "Cl", "O"];
    let species = (0..n).map(|_| symbols[rng.random_range(0..3)].parse::<Element>().unwrap()).collect();
    let frac = (0..n).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect();
    Crystal::new(p, species, frac).unwrap()
}

fn evaluation_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let settings = MatchSettings::default();
    for i in 0..100 {
        let c = random_structure(&mut rng);
        let tau = Vec3::new(rng.random(), rng.random(), rng.random());
        let moved = Crystal::new(c.lattice.clone(), c.species.clone(), c.frac.iter().map(|f| (f + tau).map(wrap)).collect())
            .unwrap();
        let q = loop {
            let m: Mat3 = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            if m.determinant().abs() > 0.05 {
                let mut q = m.qr().q();
                if q.determinant() < 0.0 {
                    q.column_mut(0).neg_mut();
                }
                break q;
            }
        };
        let rotated = Crystal::new(LatticeMatrix::new(q * c.lattice.matrix()).unwrap(), c.species.clone(), c.frac.clone()).unwrap();
        let mut perm: Vec<usize> = (0..c.num_atoms()).collect();
        perm.shuffle(&mut rng);
        let reindexed =
            Crystal::new(c.lattice.clone(), perm.iter().map(|&j| c.species[j]).collect(), perm.iter().map(|&j| c.frac[j]).collect())
                .unwrap();
        for (what, x) in [("translation", moved), ("rotation", rotated), ("reindex", reindexed)] {
            let r = match_structures(&x, &c, &settings);
            ensure(r.matched && r.rmsd.unwrap() < 1e-9, || format!("structure {i}: {what} gave {r}"))?;
        }
    }
    for i in 0..1000 {
        let c = random_structure(&mut rng);
        let l = c.lattice.matrix();
        let mut brute = f64::INFINITY;
        for a in 0..c.num_atoms() {
            for b in 0..c.num_atoms() {
                for n in 0..125 {
                    let img = Vec3::new((n / 25) as f64 - 2.0, ((n / 5) % 5) as f64 - 2.0, (n % 5) as f64 - 2.0);
                    if a == b && img == Vec3::zeros() {
                        continue;
                    }
                    brute = brute.min((l * (c.frac[b] + img - c.frac[a])).norm());
                }
            }
        }
        ensure((min_distance(&c) - brute).abs() < 1e-9, || format!("cell {i}: {} vs {brute}", min_distance(&c)))?;
        ensure(structural_validity(&c) == (brute > 0.5), || format!("cell {i}: validity disagrees"))?;
    }
    let mut worst = 0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..50);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..8.0)).collect();
        let (mut sa, mut sb) = (a.clone(), b.clone());
        sa.sort_by(f64::total_cmp);
        sb.sort_by(f64::total_cmp);
        let oracle = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64;
        worst = worst.max((wasserstein_1d(&a, &b).map_err(|e| e.to_string())? - oracle).abs());
    }
    ensure(worst < 1e-12, || format!("W1 off by {worst:e}"))?;
    Ok(format!("100 structures x 3 invariances, 1000 cells, W1 err {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("lattice round trip", lattice_round_trip),
        ("family shape conformance", family_conformance),
        ("group theory", group_theory),
        ("constraint preservation", constraint_preservation),
        ("wrapped normal", wrapped_normal),
        ("denoiser checks", denoiser_checks),
        ("oracle regeneration", oracle_regeneration),
        ("toy training", toy_training),
        ("pre/post averaging", ablation_fixture),
        ("evaluation suite", evaluation_suite),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|x| name.contains(x.as_str()) || *x == (i + 1).to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
