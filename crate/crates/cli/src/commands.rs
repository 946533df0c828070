use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use wyckdiff::crystal::Crystal;
use wyckdiff::denoiser::{smoothed, Denoiser};
use wyckdiff::diffusion::sampler::decode;
use wyckdiff::diffusion::{refine_state, sample as draw, DiffusionContext, Example, Layout, OracleDenoiser, ScoreModel};
use wyckdiff::elements::{parse_formula, type_count, Element};
use wyckdiff::error::io_error;
use wyckdiff::evaluation::{match_rate, match_structures, min_distance, structural_validity, MatchReport};
use wyckdiff::io::{read_crystal, to_cif, write_crystal, CrystalDocument, LatticeSpec, Mode, RunConfig};
use wyckdiff::lattice::{
    k_from_symmetric, polar_decompose, symmetric_from_k, CrystalFamily, LatticeMatrix,
};
use wyckdiff::linalg::Mat3;
use wyckdiff::spacegroup::{verify_symmetry, SpaceGroupTable};
use wyckdiff::templates::{refine, TemplateIndex};

use crate::{CspArgs, EncodeArgs, MatchArgs, SampleArgs, TrainArgs, ValidateArgs};

pub enum CliError {
    Usage(String),
    Lib(wyckdiff::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<wyckdiff::Error> for CliError {
    fn from(e: wyckdiff::Error) -> Self {
        CliError::Lib(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Usage(msg.into()))
}

pub struct Env {
    pub cfg: RunConfig,
    pub groups: SpaceGroupTable,
    pool: rayon::ThreadPool,
}

impl Env {
    pub fn new(config: Option<&Path>, seed: Option<u64>, jobs: Option<usize>) -> Result<Self> {
        let mut cfg = match config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let mut groups = SpaceGroupTable::builtin().clone();
        if let Some(dir) = &cfg.paths.groups {
            for e in SpaceGroupTable::load_dir(dir)?.entries() {
                groups.insert(e.clone());
            }
        }
        if jobs == Some(0) {
            return usage("--jobs must be at least 1");
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.unwrap_or(1))
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(Self { cfg, groups, pool })
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        r.set_stream(stream);
        r
    }

    fn context(&self) -> Result<DiffusionContext> {
        let ctx = DiffusionContext::new(&self.cfg.schedule)?;
        if let Some(p) = &self.cfg.paths.lambda_cache {
            ctx.lambda.load_matching(p)?;
        }
        Ok(ctx)
    }

    fn save_lambda(&self, ctx: &DiffusionContext) -> Result<()> {
        if let Some(p) = &self.cfg.paths.lambda_cache {
            ctx.lambda.save(p)?;
        }
        Ok(())
    }

    fn load_model(&self, arg: Option<&PathBuf>) -> Result<Denoiser> {
        let Some(path) = arg.or(self.cfg.paths.checkpoint.as_ref()) else {
            return usage("no checkpoint: pass --checkpoint (or paths.checkpoint) or use --oracle");
        };
        let model = Denoiser::load(path)?;
        if model.config.types != type_count() {
            return Err(wyckdiff::Error::Domain(format!(
                "{}: checkpoint type width {} differs from {}",
                path.display(),
                model.config.types,
                type_count()
            ))
            .into());
        }
        Ok(model)
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_error(path))?;
    Ok(())
}

fn fmt_rmsd(r: &MatchReport) -> String {
    r.rmsd.map_or(String::new(), |x| format!("{x}"))
}

// ---------------------------------------------------------------- encode

fn read_lattice(path: &Path, groups: &SpaceGroupTable) -> Result<LatticeMatrix> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    if let Ok(spec) = LatticeSpec::parse(&text, path) {
        return Ok(spec.to_lattice()?);
    }
    Ok(CrystalDocument::parse(&text, path)?.to_crystal(groups)?.lattice)
}

pub fn encode(env: &Env, a: &EncodeArgs) -> Result<()> {
    let l = read_lattice(&a.file, &env.groups)?;
    let polar = polar_decompose(l.matrix())?;
    let k = k_from_symmetric(&polar.log);
    let rebuilt = polar.rotation * polar.log.exp();
    let err_l = (l.matrix() - rebuilt).norm();
    let err_q = (polar.rotation.transpose() * polar.rotation - Mat3::identity()).norm();
    let err_k = k.max_abs_diff(&k_from_symmetric(&symmetric_from_k(&k)));

    println!("lattice  {}", l.params());
    println!("k        [{}]", k.0.iter().map(|x| format!("{x:.12}")).collect::<Vec<_>>().join(", "));
    println!("roundtrip |L - Q exp(S)|_F = {err_l:.3e}  |QtQ - I|_F = {err_q:.3e}  |k - k(S(k))|_inf = {err_k:.3e}");
    let tol = 1e-10;
    let compatible: Vec<&str> =
        CrystalFamily::ALL.iter().filter(|f| f.mask().admits(&k, tol)).map(|f| f.name()).collect();
    println!("compatible families: {}", compatible.join(", "));
    for fam in CrystalFamily::ALL {
        let m = fam.mask();
        let checks: Vec<String> = (0..6)
            .filter(|&i| !m.free[i])
            .map(|i| {
                let ok = (k[i] - m.fixed[i]).abs() <= tol;
                format!("k{}={} {}", i + 1, fmt_fixed(m.fixed[i]), if ok { "ok" } else { "violated" })
            })
            .collect();
        let verdict = if m.admits(&k, tol) { "satisfied" } else { "not satisfied" };
        let checks = if checks.is_empty() { "no constraints".to_string() } else { checks.join(", ") };
        println!("  {:<12} {verdict:<14} {checks}", fam.name());
    }
    Ok(())
}

fn fmt_fixed(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.6}")
    }
}

// ---------------------------------------------------------------- sample

/// Parses `a:Na,b:Cl` (or `a,b`).
fn parse_sites(spec: &str) -> Result<(Vec<char>, Option<Vec<Element>>)> {
    let mut letters = Vec::new();
    let mut elements = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (l, e) = match part.split_once(':') {
            Some((l, e)) => (l.trim(), Some(e.trim())),
            None => (part, None),
        };
        let mut chars = l.chars();
        let (Some(c), None) = (chars.next(), chars.next()) else {
            return usage(format!("bad site `{part}`: expected a single Wyckoff letter"));
        };
        letters.push(c);
        if let Some(e) = e {
            elements.push(Element::from_symbol(e)?);
        }
    }
    if letters.is_empty() {
        return usage("--sites is empty");
    }
    match elements.len() {
        0 => Ok((letters, None)),
        n if n == letters.len() => Ok((letters, Some(elements))),
        _ => usage("give an element for every site or for none"),
    }
}

struct Job {
    layout: Layout,
    fixed: Option<Vec<Element>>,
}

pub fn sample(env: &Env, a: &SampleArgs) -> Result<()> {
    let mode = a.mode.unwrap_or(env.cfg.mode);
    let count = a.count.unwrap_or(env.cfg.sample.count);
    if count == 0 {
        return usage("--count must be positive");
    }
    let t_start = a.t_start.unwrap_or(env.cfg.sample.refine_t);
    let out_dir = a.out.clone().or(env.cfg.paths.output.clone()).unwrap_or_else(|| PathBuf::from("samples"));
    let ctx = env.context()?;

    let target = a.oracle.as_ref().map(|p| read_crystal(p, &env.groups)).transpose()?;
    let input = match (mode, &a.input) {
        (Mode::Refine, Some(p)) => Some(read_crystal(p, &env.groups)?),
        (Mode::Refine, None) => return usage("refine mode needs --input"),
        (_, Some(_)) => return usage("--input is only used in refine mode"),
        _ => None,
    };
    let base = input.as_ref().or(target.as_ref());

    let job = match (&a.sites, base) {
        (Some(spec), _) => {
            let group = a.group.or(base.and_then(|c| c.group())).ok_or_else(|| {
                CliError::Usage("--sites needs --group".into())
            })?;
            let (letters, elements) = parse_sites(spec)?;
            let layout = Layout::from_letters(env.groups.get(group)?, &letters)?;
            Job { layout, fixed: elements }
        }
        (None, Some(c)) => {
            let ex = Example::from_crystal(c, &env.groups)?;
            if a.group.is_some_and(|g| g != ex.layout.group) {
                return usage("--group differs from the structure's group");
            }
            Job { layout: ex.layout, fixed: Some(ex.species) }
        }
        (None, None) => return usage("give --group and --sites, or an --oracle target"),
    };
    let fixed = match mode {
        Mode::AbInitio => None,
        _ => match job.fixed {
            Some(f) => Some(f),
            None => return usage("csp and refine modes need an element for every site (letter:Element)"),
        },
    };

    let oracle;
    let net;
    let model: &dyn ScoreModel = match &target {
        Some(t) => {
            let ex = Example::from_crystal(t, &env.groups)?;
            if ex.layout.group != job.layout.group
                || ex.layout.sites.iter().map(|s| s.wyckoff).ne(job.layout.sites.iter().map(|s| s.wyckoff))
            {
                return usage("the oracle target has a different group or Wyckoff assignment");
            }
            oracle = OracleDenoiser::new(ex.state);
            &oracle
        }
        None => {
            net = env.load_model(a.checkpoint.as_ref())?;
            &net
        }
    };
    for s in job.layout.scale_values() {
        ctx.lambda.ensure(s);
    }

    let clean = input.as_ref().map(|c| Example::from_crystal(c, &env.groups)).transpose()?;
    let results: Vec<wyckdiff::Result<Crystal>> = env.pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let mut rng = env.rng(i as u64);
                match &clean {
                    Some(ex) => {
                        let st = refine_state(&ex.state, &ex.layout, model, &ctx, t_start, true, &mut rng)?;
                        decode(&st, &ex.layout, &env.groups)
                    }
                    None => draw(&job.layout, model, &ctx, &env.groups, fixed.as_deref(), &mut rng),
                }
            })
            .collect()
    });

    mkdir(&out_dir)?;
    let mut rows = vec!["file,formula,valid,min_distance,matched,rmsd".to_string()];
    let mut reports = Vec::new();
    let mut valid = 0;
    for (i, r) in results.into_iter().enumerate() {
        let name = format!("sample_{i:03}");
        let c = match r {
            Ok(c) => c,
            Err(wyckdiff::Error::Domain(msg)) => {
                println!("{name}  failed: {msg}");
                rows.push(format!("{name},,false,,{},", if target.is_some() { "false" } else { "" }));
                if target.is_some() {
                    reports.push(MatchReport::UNMATCHED);
                }
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        write_crystal(&out_dir.join(format!("{name}.json")), &c, &env.groups)?;
        if a.cif {
            write_text(&out_dir.join(format!("{name}.cif")), &to_cif(&c, &name))?;
        }
        let ok = structural_validity(&c);
        valid += ok as usize;
        let rep = target.as_ref().map(|t| match_structures(&c, t, &env.cfg.matching));
        let (m, rm) = rep.map_or((String::new(), String::new()), |r| (r.matched.to_string(), fmt_rmsd(&r)));
        println!(
            "{name}.json  {}  {}  {}",
            c.formula(),
            if ok { "valid" } else { "invalid" },
            rep.map_or(String::new(), |r| r.to_string())
        );
        rows.push(format!("{name}.json,{},{ok},{},{m},{rm}", c.formula(), min_distance(&c)));
        reports.extend(rep);
    }
    write_text(&out_dir.join("summary.csv"), &(rows.join("\n") + "\n"))?;
    println!("samples: {count}  valid: {valid}/{count} ({:.3})", valid as f64 / count as f64);
    if !reports.is_empty() {
        let s = match_rate(&reports)?;
        println!("match rate vs target: {:.3} ({}/{})  mean rmsd: {}", s.rate, s.matched, s.total, opt(s.mean_rmsd));
    }
    env.save_lambda(&ctx)?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |v| format!("{v:.6}"))
}

// ---------------------------------------------------------------- train

pub fn train(env: &Env, a: &TrainArgs) -> Result<()> {
    let out = a.out.clone().or(env.cfg.paths.checkpoint.clone()).ok_or_else(|| {
        CliError::Usage("no output checkpoint: pass --out or set paths.checkpoint".into())
    })?;
    let set = wyckdiff::io::read_crystal_dir(&a.data, &env.groups)?;
    if set.is_empty() {
        return Err(wyckdiff::Error::Domain(format!("{}: no crystal documents", a.data.display())).into());
    }
    let mut data = Vec::with_capacity(set.len());
    for (name, c) in &set {
        let ex = Example::from_crystal(c, &env.groups).map_err(|e| {
            CliError::Lib(wyckdiff::Error::Domain(format!("{name}: {e}")))
        })?;
        if !verify_symmetry(c, env.groups.get(ex.layout.group)?, 1e-6) {
            return Err(wyckdiff::Error::Domain(format!("{name}: fails its symmetry check")).into());
        }
        data.push(ex);
    }
    let ctx = env.context()?;
    let mut tcfg = env.cfg.train;
    tcfg.csp = env.cfg.mode != Mode::AbInitio;
    let mut model = Denoiser::new(env.cfg.model, env.cfg.seed)?;
    println!(
        "training on {} structures, {} parameters, {} epochs, mode {}",
        data.len(),
        model.num_params(),
        tcfg.epochs,
        if tcfg.csp { "csp" } else { "ab-initio" }
    );
    let mut rng = env.rng(0);
    let trace = env.pool.install(|| wyckdiff::denoiser::train(&mut model, &data, &ctx, &env.cfg.loss, &tcfg, &mut rng))?;
    let smooth = smoothed(&trace, 20);
    let every = (trace.len() / 20).max(1);
    for (i, (l, s)) in trace.iter().zip(&smooth).enumerate() {
        if i % every == 0 || i + 1 == trace.len() {
            println!("epoch {:>5}  loss {l:.6}  smoothed {s:.6}", i + 1);
        }
    }
    if let (Some(first), Some(last)) = (trace.first(), smooth.last()) {
        println!("loss {first:.6} -> {last:.6} (x{:.1})", first / last);
    }
    model.save(&out)?;
    println!("wrote {}", out.display());
    if let Some(p) = &a.trace {
        let text: String = std::iter::once("epoch,loss\n".to_string())
            .chain(trace.iter().enumerate().map(|(i, l)| format!("{},{l}\n", i + 1)))
            .collect();
        write_text(p, &text)?;
    }
    env.save_lambda(&ctx)?;
    Ok(())
}

// ---------------------------------------------------------------- match

fn pairs(pred: &Path, reference: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    match (pred.is_dir(), reference.is_dir()) {
        (false, false) => Ok(vec![(pred.display().to_string(), pred.into(), reference.into())]),
        (true, true) => {
            let mut names: Vec<_> = fs::read_dir(reference)
                .map_err(io_error(reference))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            names.sort();
            Ok(names
                .into_iter()
                .filter_map(|r| {
                    let file = r.file_name()?.to_owned();
                    let p = pred.join(&file);
                    p.exists().then(|| (file.to_string_lossy().into_owned(), p, r))
                })
                .collect())
        }
        _ => usage("pred and reference must both be files or both be directories"),
    }
}

pub fn matching(env: &Env, a: &MatchArgs) -> Result<()> {
    let list = pairs(&a.pred, &a.reference)?;
    if list.is_empty() {
        return Err(wyckdiff::Error::Domain("no file pairs to compare".into()).into());
    }
    let mut rows = vec!["name,matched,rmsd".to_string()];
    let mut reports = Vec::new();
    for (name, p, r) in list {
        let rep = match_structures(&read_crystal(&p, &env.groups)?, &read_crystal(&r, &env.groups)?, &env.cfg.matching);
        println!("{name}: {rep}");
        rows.push(format!("{name},{},{}", rep.matched, fmt_rmsd(&rep)));
        reports.push(rep);
    }
    let s = match_rate(&reports)?;
    println!("match rate: {:.3} ({}/{})  mean rmsd: {}", s.rate, s.matched, s.total, opt(s.mean_rmsd));
    if let Some(p) = &a.csv {
        write_text(p, &(rows.join("\n") + "\n"))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- validate

pub fn validate(env: &Env, a: &ValidateArgs) -> Result<()> {
    let mut valid = 0;
    for f in &a.files {
        let c = read_crystal(f, &env.groups)?;
        let ok = structural_validity(&c);
        valid += ok as usize;
        println!(
            "{}: {} (min distance {:.4} A)",
            f.display(),
            if ok { "valid" } else { "invalid" },
            min_distance(&c)
        );
    }
    println!("valid: {valid}/{}", a.files.len());
    Ok(())
}

// ---------------------------------------------------------------- csp

struct Query {
    name: String,
    composition: Vec<(Element, usize)>,
    truth: Option<Crystal>,
}

pub fn csp(env: &Env, a: &CspArgs) -> Result<()> {
    let Some(tdir) = a.templates.clone().or(env.cfg.paths.templates.clone()) else {
        return usage("no template library: pass --templates or set paths.templates");
    };
    let index = TemplateIndex::new(wyckdiff::io::read_crystal_dir(&tdir, &env.groups)?, &env.groups)?;
    let mut queries = Vec::new();
    if let Some(dir) = &a.test {
        for (name, c) in wyckdiff::io::read_crystal_dir(dir, &env.groups)? {
            queries.push(Query { name, composition: c.composition().into_iter().collect(), truth: Some(c) });
        }
    }
    for f in &a.formula {
        queries.push(Query { name: f.clone(), composition: parse_formula(f)?, truth: None });
    }
    if queries.is_empty() {
        return usage("give --test or --formula");
    }
    let net = if a.oracle { None } else { Some(env.load_model(a.checkpoint.as_ref())?) };
    let t_start = a.t_start.unwrap_or(env.cfg.sample.refine_t);
    let ctx = env.context()?;
    if let Some(d) = &a.out {
        mkdir(d)?;
    }

    let mut rows = vec!["query,template,similarity,matched,rmsd".to_string()];
    let mut reports = Vec::new();
    println!("{:<10} {:<10} {:>10}  result", "query", "template", "similarity");
    for (qi, q) in queries.iter().enumerate() {
        let cands = index.retrieve(&q.composition)?;
        let Some(best) = cands.first() else {
            println!("{:<10} {:<10} {:>10}  no template with this ratio", q.name, "-", "-");
            rows.push(format!("{},,,false,", q.name));
            if q.truth.is_some() {
                reports.push(MatchReport::UNMATCHED);
            }
            continue;
        };
        let entry = &index.entries()[best.index];
        let substituted = index.substitute(&q.composition, &entry.crystal)?;
        let mut rng = env.rng(qi as u64);
        let pred = match &net {
            Some(m) => refine(&substituted, m, &ctx, &env.groups, t_start, &mut rng)?,
            None => {
                let oracle = OracleDenoiser::new(Example::from_crystal(&substituted, &env.groups)?.state);
                refine(&substituted, &oracle, &ctx, &env.groups, t_start, &mut rng)?
            }
        };
        if let Some(d) = &a.out {
            write_crystal(&d.join(format!("{}.json", q.name)), &pred, &env.groups)?;
        }
        let rep = q.truth.as_ref().map(|t| match_structures(&pred, t, &env.cfg.matching));
        println!(
            "{:<10} {:<10} {:>10.4}  {}",
            q.name,
            entry.name,
            best.similarity,
            rep.map_or("predicted".to_string(), |r| r.to_string())
        );
        rows.push(format!(
            "{},{},{},{},{}",
            q.name,
            entry.name,
            best.similarity,
            rep.map_or(String::new(), |r| r.matched.to_string()),
            rep.map_or(String::new(), |r| fmt_rmsd(&r))
        ));
        reports.extend(rep);
    }
    if !reports.is_empty() {
        let s = match_rate(&reports)?;
        println!("match rate: {:.3} ({}/{})  mean rmsd: {}", s.rate, s.matched, s.total, opt(s.mean_rmsd));
    }
    if let Some(p) = &a.csv {
        write_text(p, &(rows.join("\n") + "\n"))?;
    }
    env.save_lambda(&ctx)?;
    Ok(())
}
