//! Space-group tables and Wyckoff-position algebra.
//!
//! A Wyckoff position is a list of affine pairs `(Rᵢ, tᵢ)`. The free
//! parameters of a site (its basic coordinate `f′`) map to the orbit
//! `{Rᵢ f′ + tᵢ mod 1}`. The first pair fixes the parameterization; its
//! columns are required to be mutually orthogonal so that `R₀†` has the exact
//! form `diag(1/‖cⱼ‖²) R₀ᵀ`, and a parameter is constrained exactly when its
//! column of `R₀` is zero.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use crate::assignment::perfect_matching;
use crate::crystal::{wrap, wrap_centered_vec, wrap_vec, Annotation, Crystal, Site};
use crate::elements::Element;
use crate::error::{domain, io_error, Error, Result};
use crate::lattice::{CrystalFamily, LatticeMatrix};
use crate::linalg::{pseudo_inverse, Mat3, Vec3};
use crate::rational::{ExactAffine, Rat};

/// Tolerance for a basic coordinate's constrained entries.
pub const SUBSPACE_TOL: f64 = 1e-8;

/// An affine map on fractional coordinates, exact and as floats.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePair {
    pub exact: ExactAffine,
    pub rot: Mat3,
    pub trans: Vec3,
}

impl AffinePair {
    fn from_exact(exact: ExactAffine) -> Self {
        let rot = Mat3::from_fn(|i, j| exact.r[i][j].to_f64());
        let trans = Vec3::from_fn(|i, _| exact.t[i].to_f64());
        Self { exact, rot, trans }
    }

    /// `R v + t`, not wrapped.
    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.rot * v + self.trans
    }
}

#[derive(Clone, Debug)]
pub struct WyckoffPosition {
    pub letter: char,
    pub multiplicity: usize,
    pub pairs: Vec<AffinePair>,
    /// `R₀†`, exact for orthogonal columns.
    pub projector: Mat3,
    /// Number of free parameters (rank of `R₀`).
    pub dof: usize,
    /// Which of the three parameters are free.
    pub free: [bool; 3],
    /// `1/‖cⱼ‖²` for free parameters, 0 otherwise. A fractional displacement of
    /// variance `σ²` per axis has variance `σ²·scale_sq[j]` along parameter `j`.
    pub scale_sq: [f64; 3],
    /// Pseudo-inverse of each pair's matrix, used to pull orbit vectors back
    /// to parameter space.
    pub pair_pinv: Vec<Mat3>,
}

impl WyckoffPosition {
    fn new(letter: char, multiplicity: usize, pairs: Vec<AffinePair>, group: u16) -> Result<Self> {
        let bad = |msg: String| Error::InvalidGroup { group, msg: format!("wyckoff {letter}: {msg}") };
        if pairs.len() != multiplicity {
            return Err(bad(format!("multiplicity {multiplicity} but {} pairs", pairs.len())));
        }
        let r0 = &pairs[0].exact.r;
        let mut free = [false; 3];
        let mut scale_sq = [0.0; 3];
        let mut projector = Mat3::zeros();
        for j in 0..3 {
            let norm: Rat = (0..3).fold(Rat::ZERO, |acc, i| acc + r0[i][j] * r0[i][j]);
            for k in (j + 1)..3 {
                let dot = (0..3).fold(Rat::ZERO, |acc, i| acc + r0[i][j] * r0[i][k]);
                if dot != Rat::ZERO {
                    return Err(bad(format!("columns {j} and {k} of the first pair are not orthogonal")));
                }
            }
            if norm != Rat::ZERO {
                free[j] = true;
                scale_sq[j] = 1.0 / norm.to_f64();
                for i in 0..3 {
                    projector[(j, i)] = (r0[i][j] * Rat::new(norm.den(), norm.num()).expect("norm > 0")).to_f64();
                }
            }
        }
        let pair_pinv = pairs.iter().map(|p| pseudo_inverse(&p.rot, 1e-12)).collect();
        Ok(Self {
            letter,
            multiplicity,
            dof: free.iter().filter(|&&f| f).count(),
            pairs,
            projector,
            free,
            scale_sq,
            pair_pinv,
        })
    }

    /// `R₀† v`.
    pub fn project(&self, v: &Vec3) -> Vec3 {
        self.projector * v
    }

    /// Zeroes constrained parameters.
    pub fn restrict(&self, v: &Vec3) -> Vec3 {
        Vec3::from_fn(|j, _| if self.free[j] { v[j] } else { 0.0 })
    }

    /// Restricts and wraps free parameters into `[0, 1)`.
    pub fn normalize(&self, v: &Vec3) -> Vec3 {
        Vec3::from_fn(|j, _| if self.free[j] { wrap(v[j]) } else { 0.0 })
    }

    /// Largest constrained-parameter magnitude.
    pub fn subspace_residual(&self, v: &Vec3) -> f64 {
        (0..3).filter(|&j| !self.free[j]).map(|j| v[j].abs()).fold(0.0, f64::max)
    }

    /// The basic position `R₀ f′ + t₀` wrapped into the cell.
    pub fn basic_position(&self, basic: &Vec3) -> Vec3 {
        wrap_vec(&self.pairs[0].apply(basic))
    }

    /// All `n_s` orbit positions, wrapped into `[0, 1)`.
    pub fn orbit(&self, basic: &Vec3) -> Vec<Vec3> {
        self.pairs.iter().map(|p| wrap_vec(&p.apply(basic))).collect()
    }

    /// Parameter vector whose basic position coincides with `position` mod 1,
    /// searching integer lifts of `position − t₀`.
    pub fn parameters_of(&self, position: &Vec3, tol: f64) -> Option<Vec3> {
        let d = position - self.pairs[0].trans;
        let mut best: Option<(f64, Vec3)> = None;
        for n0 in -2..=2 {
            for n1 in -2..=2 {
                for n2 in -2..=2 {
                    let lifted = d + Vec3::new(n0 as f64, n1 as f64, n2 as f64);
                    let p = self.normalize(&self.project(&lifted));
                    let back = self.basic_position(&p);
                    let err = wrap_centered_vec(&(back - position)).norm();
                    if best.as_ref().is_none_or(|(e, _)| err < *e) {
                        best = Some((err, p));
                    }
                }
            }
        }
        best.filter(|(e, _)| *e <= tol).map(|(_, p)| p)
    }
}

#[derive(Clone, Debug)]
pub struct SpaceGroupEntry {
    pub number: u16,
    pub symbol: String,
    pub family: CrystalFamily,
    pub ops: Vec<AffinePair>,
    pub wyckoff: Vec<WyckoffPosition>,
}

impl SpaceGroupEntry {
    pub fn order(&self) -> usize {
        self.ops.len()
    }

    pub fn wyckoff_index(&self, letter: char) -> Option<usize> {
        self.wyckoff.iter().position(|w| w.letter == letter)
    }

    pub fn position(&self, letter: char) -> Option<&WyckoffPosition> {
        self.wyckoff.iter().find(|w| w.letter == letter)
    }

    /// The general position (largest multiplicity, last letter on ties).
    pub fn general_position(&self) -> &WyckoffPosition {
        self.wyckoff
            .iter()
            .rev()
            .max_by_key(|w| w.multiplicity)
            .expect("validated entries have Wyckoff positions")
    }
}

fn parse_affine(tokens: &[&str], parse_err: &dyn Fn(String) -> Error) -> Result<ExactAffine> {
    if tokens.len() != 12 {
        return Err(parse_err(format!("expected 12 rationals, found {}", tokens.len())));
    }
    let mut vals = [Rat::ZERO; 12];
    for (v, tok) in vals.iter_mut().zip(tokens) {
        *v = Rat::parse(tok).ok_or_else(|| parse_err(format!("bad rational `{tok}`")))?;
        if 24 % v.den() != 0 {
            return Err(parse_err(format!("denominator of `{tok}` does not divide 24")));
        }
    }
    let mut a = ExactAffine::identity();
    for i in 0..3 {
        for j in 0..3 {
            a.r[i][j] = vals[3 * i + j];
        }
        a.t[i] = vals[9 + i];
    }
    Ok(a)
}

/// Parses and validates one space-group file.
pub fn parse_spacegroup(text: &str, path: &Path) -> Result<SpaceGroupEntry> {
    let perr = |line: usize| move |msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let mut header: Option<(u16, String, CrystalFamily)> = None;
    let mut ops: Vec<ExactAffine> = Vec::new();
    let mut positions: Vec<(char, usize, Vec<ExactAffine>, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "group" => {
                if header.is_some() {
                    return Err(perr(lineno)("duplicate group header".into()));
                }
                if tokens.len() != 4 {
                    return Err(perr(lineno)("header must be `group <number> <symbol> <family>`".into()));
                }
                let n: u16 = tokens[1].parse().map_err(|_| perr(lineno)(format!("bad group number `{}`", tokens[1])))?;
                let fam: CrystalFamily = tokens[3].parse().map_err(|e: Error| perr(lineno)(e.to_string()))?;
                header = Some((n, tokens[2].to_string(), fam));
            }
            "wyckoff" => {
                if header.is_none() {
                    return Err(perr(lineno)("wyckoff block before group header".into()));
                }
                if tokens.len() != 3 {
                    return Err(perr(lineno)("expected `wyckoff <letter> <multiplicity>`".into()));
                }
                let mut letters = tokens[1].chars();
                let letter = match (letters.next(), letters.next()) {
                    (Some(c), None) if c.is_ascii_alphabetic() => c,
                    _ => return Err(perr(lineno)(format!("bad Wyckoff letter `{}`", tokens[1]))),
                };
                let mult: usize = tokens[2]
                    .parse()
                    .ok()
                    .filter(|&m| m > 0)
                    .ok_or_else(|| perr(lineno)(format!("bad multiplicity `{}`", tokens[2])))?;
                positions.push((letter, mult, Vec::new(), lineno));
            }
            _ => {
                if header.is_none() {
                    return Err(perr(lineno)("symmetry operation before group header".into()));
                }
                let a = parse_affine(&tokens, &perr(lineno))?;
                match positions.last_mut() {
                    Some(p) => p.2.push(a),
                    None => ops.push(a),
                }
            }
        }
    }
    let (number, symbol, family) = header.ok_or_else(|| perr(0)("missing group header".into()))?;
    let invalid = |msg: String| Error::InvalidGroup { group: number, msg };
    match CrystalFamily::from_group(number) {
        Ok(f) if f == family => {}
        Ok(f) => return Err(invalid(format!("family `{family}` disagrees with group number ({f})"))),
        Err(e) => return Err(invalid(e.to_string())),
    }
    validate_group(&ops).map_err(invalid)?;
    if positions.is_empty() {
        return Err(invalid("no Wyckoff positions".into()));
    }
    let mut wyckoff = Vec::new();
    let mut seen_letters = HashSet::new();
    for (letter, mult, pairs, lineno) in positions {
        if !seen_letters.insert(letter) {
            return Err(invalid(format!("duplicate Wyckoff letter {letter}")));
        }
        if pairs.is_empty() {
            return Err(perr(lineno)(format!("Wyckoff {letter} has no pairs")));
        }
        validate_orbit(&ops, &pairs).map_err(|m| invalid(format!("wyckoff {letter}: {m}")))?;
        let pairs = pairs.into_iter().map(AffinePair::from_exact).collect();
        wyckoff.push(WyckoffPosition::new(letter, mult, pairs, number)?);
    }
    let max_mult = wyckoff.iter().map(|w| w.multiplicity).max().unwrap_or(0);
    if ops.len() % max_mult != 0 {
        return Err(invalid(format!("general multiplicity {max_mult} does not divide |G| = {}", ops.len())));
    }
    Ok(SpaceGroupEntry { number, symbol, family, ops: ops.into_iter().map(AffinePair::from_exact).collect(), wyckoff })
}

/// Closure, identity, inverses and distinctness of the operations mod 1.
fn validate_group(ops: &[ExactAffine]) -> std::result::Result<(), String> {
    if ops.is_empty() {
        return Err("no symmetry operations".into());
    }
    let set: HashSet<ExactAffine> = ops.iter().map(|o| o.reduced()).collect();
    if set.len() != ops.len() {
        return Err("duplicate symmetry operations".into());
    }
    let id = ExactAffine::identity();
    if !set.contains(&id) {
        return Err("identity operation missing".into());
    }
    for (a, op) in ops.iter().enumerate() {
        let det = op.det();
        if det != Rat::ONE && det != Rat::int(-1) {
            return Err(format!("operation {a} has determinant {det}"));
        }
        if op.r.iter().flatten().any(|x| !x.is_integer()) {
            return Err(format!("operation {a} has a non-integer rotation part"));
        }
        let mut has_inverse = false;
        for (b, other) in ops.iter().enumerate() {
            let prod = op.compose(other).reduced();
            if !set.contains(&prod) {
                return Err(format!("closure violated: op {a} ∘ op {b} is not in the group"));
            }
            has_inverse |= prod == id;
        }
        if !has_inverse {
            return Err(format!("operation {a} has no inverse"));
        }
    }
    Ok(())
}

/// The pairs must be distinct mod 1, closed under the group action and form
/// a single orbit of the first pair.
fn validate_orbit(ops: &[ExactAffine], pairs: &[ExactAffine]) -> std::result::Result<(), String> {
    let set: HashSet<ExactAffine> = pairs.iter().map(|p| p.reduced()).collect();
    if set.len() != pairs.len() {
        return Err("duplicate pairs".into());
    }
    for (i, p) in pairs.iter().enumerate() {
        for (a, op) in ops.iter().enumerate() {
            if !set.contains(&op.compose(p).reduced()) {
                return Err(format!("op {a} maps pair {i} outside the orbit"));
            }
        }
    }
    let reached: HashSet<ExactAffine> = ops.iter().map(|op| op.compose(&pairs[0]).reduced()).collect();
    if reached.len() != pairs.len() {
        return Err("pairs are not a single orbit of the first pair".into());
    }
    Ok(())
}

macro_rules! builtin_groups {
    ($($n:literal),*) => {
        &[$(($n, include_str!(concat!("../data/spacegroups/", stringify!($n), ".txt")))),*]
    };
}

const BUILTIN: &[(u16, &str)] =
    builtin_groups!(001, 002, 014, 025, 062, 099, 123, 141, 160, 186, 194, 221, 225, 227);

/// Validated space-group entries keyed by number.
#[derive(Clone, Debug, Default)]
pub struct SpaceGroupTable {
    entries: BTreeMap<u16, SpaceGroupEntry>,
}

impl SpaceGroupTable {
    pub fn builtin() -> &'static SpaceGroupTable {
        static TABLE: OnceLock<SpaceGroupTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            let mut t = SpaceGroupTable::default();
            for (n, text) in BUILTIN {
                let name = PathBuf::from(format!("{n:03}.txt"));
                t.insert(parse_spacegroup(text, &name).expect("shipped space-group table is valid"));
            }
            t
        })
    }

    /// Loads every `*.txt` file in a directory.
    pub fn load_dir(dir: &Path) -> Result<SpaceGroupTable> {
        let mut t = SpaceGroupTable::default();
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io_error(dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        for f in files {
            let text = std::fs::read_to_string(&f).map_err(io_error(&f))?;
            t.insert(parse_spacegroup(&text, &f)?);
        }
        Ok(t)
    }

    pub fn insert(&mut self, e: SpaceGroupEntry) {
        self.entries.insert(e.number, e);
    }

    pub fn get(&self, number: u16) -> Result<&SpaceGroupEntry> {
        self.entries.get(&number).ok_or_else(|| {
            let have: Vec<String> = self.entries.keys().map(|k| k.to_string()).collect();
            Error::Domain(format!("space group {number} is not in the table (available: {})", have.join(", ")))
        })
    }

    pub fn numbers(&self) -> impl Iterator<Item = u16> + '_ {
        self.entries.keys().copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = &SpaceGroupEntry> {
        self.entries.values()
    }
}

/// Looks up a shipped group.
pub fn builtin_group(number: u16) -> Result<&'static SpaceGroupEntry> {
    SpaceGroupTable::builtin().get(number)
}

/// Orbit of a basic coordinate; the coordinate is projected to the subspace first.
pub fn orbit_expand(basic: &Vec3, w: &WyckoffPosition) -> Vec<Vec3> {
    w.orbit(&w.restrict(basic))
}

/// Least-squares projection `R₀† v`.
pub fn project_basic(v: &Vec3, w: &WyckoffPosition) -> Vec3 {
    w.project(v)
}

/// For every operation, a permutation `P_g` with `g·fᵢ ≐ f_{P_g(i)}` mod 1
/// within `tol` (Euclidean, fractional units) and equal species, or `None`
/// if some operation admits no such permutation.
pub fn symmetry_permutations(c: &Crystal, entry: &SpaceGroupEntry, tol: f64) -> Option<Vec<Vec<usize>>> {
    let n = c.num_atoms();
    let mut perms = Vec::with_capacity(entry.ops.len());
    for op in &entry.ops {
        let images: Vec<Vec3> = c.frac.iter().map(|f| op.apply(f)).collect();
        let close = |i: usize, j: usize| {
            c.species[i] == c.species[j] && wrap_centered_vec(&(images[i] - c.frac[j])).norm() <= tol
        };
        perms.push(perfect_matching(n, close)?);
    }
    Some(perms)
}

/// Whether every operation of the group maps the structure onto itself.
pub fn verify_symmetry(c: &Crystal, entry: &SpaceGroupEntry, tol: f64) -> bool {
    symmetry_permutations(c, entry, tol).is_some()
}

/// Builds the full crystal from occupied sites.
pub fn expand_structure(sites: &[Site], lattice: LatticeMatrix, entry: &SpaceGroupEntry) -> Result<Crystal> {
    if sites.is_empty() {
        return domain("no occupied sites");
    }
    let mut species = Vec::new();
    let mut frac = Vec::new();
    let mut normalized = Vec::with_capacity(sites.len());
    for (i, s) in sites.iter().enumerate() {
        let w = entry.wyckoff.get(s.wyckoff).ok_or_else(|| {
            Error::Domain(format!("site {i}: group {} has no Wyckoff index {}", entry.number, s.wyckoff))
        })?;
        let r = w.subspace_residual(&s.basic);
        if r > SUBSPACE_TOL {
            return domain(format!(
                "site {i} ({}{}) basic coordinate is {r:e} off its subspace",
                w.multiplicity, w.letter
            ));
        }
        if !s.basic.iter().all(|x| x.is_finite()) {
            return domain(format!("site {i} has a non-finite basic coordinate"));
        }
        let basic = w.normalize(&s.basic);
        for p in w.orbit(&basic) {
            species.push(s.element);
            frac.push(p);
        }
        normalized.push(Site { wyckoff: s.wyckoff, element: s.element, basic });
    }
    let mut c = Crystal::new(lattice, species, frac)?;
    c.annotation = Some(Annotation { group: entry.number, sites: normalized });
    Ok(c)
}

/// Annotates atoms carrying Wyckoff letters.
///
/// Atoms with the same letter and element must appear as consecutive orbits of
/// `n_s` atoms. Within a run, any atom lying on the first pair's subspace can
/// serve as the basic position. Atoms are reordered to pair order but keep
/// their input coordinates, so annotating a written crystal is lossless; the
/// orbit of each basic coordinate must reproduce its run within `tol`.
pub fn annotate_tagged(
    lattice: LatticeMatrix,
    atoms: &[(Element, Vec3, char)],
    entry: &SpaceGroupEntry,
    tol: f64,
) -> Result<Crystal> {
    let mut sites = Vec::new();
    let mut species = Vec::with_capacity(atoms.len());
    let mut frac = Vec::with_capacity(atoms.len());
    let mut i = 0;
    while i < atoms.len() {
        let (element, _, letter) = atoms[i];
        let widx = entry.wyckoff_index(letter).ok_or_else(|| {
            Error::Domain(format!("atom {i}: group {} has no Wyckoff position {letter}", entry.number))
        })?;
        let w = &entry.wyckoff[widx];
        let end = i + w.multiplicity;
        if end > atoms.len() || atoms[i..end].iter().any(|(e, _, l)| *e != element || *l != letter) {
            return domain(format!(
                "atoms {i}..{end}: expected {} consecutive {element} atoms on {}{letter}",
                w.multiplicity, w.multiplicity
            ));
        }
        let run: Vec<Vec3> = atoms[i..end].iter().map(|(_, f, _)| wrap_vec(f)).collect();
        let found = run.iter().filter_map(|p| w.parameters_of(p, tol)).find_map(|b| {
            let b = w.normalize(&b);
            orbit_assignment(&w.orbit(&b), &run, tol).map(|perm| (b, perm))
        });
        let (basic, perm) = found.ok_or_else(|| {
            Error::Domain(format!(
                "atoms {i}..{end} ({element} on {}{letter}) do not form a Wyckoff orbit within {tol}",
                w.multiplicity
            ))
        })?;
        for j in perm {
            species.push(element);
            frac.push(run[j]);
        }
        sites.push(Site { wyckoff: widx, element, basic });
        i = end;
    }
    let mut c = Crystal::new(lattice, species, frac)?;
    c.annotation = Some(Annotation { group: entry.number, sites });
    Ok(c)
}

/// For each orbit atom, the index of the run atom it lands on.
fn orbit_assignment(orbit: &[Vec3], run: &[Vec3], tol: f64) -> Option<Vec<usize>> {
    if orbit.len() != run.len() {
        return None;
    }
    perfect_matching(orbit.len(), |a, b| wrap_centered_vec(&(orbit[a] - run[b])).norm() <= tol)
}
