//! Structure matching, match rate, structural validity and distribution
//! distances for generated sets.
//!
//! The matcher is a compact version of the usual periodic structure
//! matcher: candidate supercell-free lattice mappings are enumerated from
//! short lattice vectors of the predicted cell, sites are compared under the
//! averaged metric of the two cells, and the translation is seeded from every
//! pairing of the least frequent species. Niggli reduction and supercell
//! matching are not attempted.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::assignment::hungarian;
use crate::crystal::{wrap_centered_vec, Crystal};
use crate::elements::Element;
use crate::error::{domain, Result};
use crate::linalg::{Mat3, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchSettings {
    pub stol: f64,
    pub angle_tol: f64,
    pub ltol: f64,
    /// Rescale the predicted cell to the reference volume before comparing.
    pub scale_volume: bool,
}

impl Default for MatchSettings {
    fn default() -> Self {
        Self { stol: 0.5, angle_tol: 10.0, ltol: 0.3, scale_volume: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchReport {
    pub matched: bool,
    /// RMS displacement over `∛(V/N)`; present iff matched.
    pub rmsd: Option<f64>,
}

impl MatchReport {
    pub const UNMATCHED: MatchReport = MatchReport { matched: false, rmsd: None };
}

impl fmt::Display for MatchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rmsd {
            Some(r) => write!(f, "matched rmsd={r:.6}"),
            None => f.write_str("unmatched"),
        }
    }
}

const SEARCH: i32 = 2;

/// Min-image squared distance of a fractional difference under metric `g`.
fn min_image_sq(d: &Vec3, g: &Mat3) -> f64 {
    let d = wrap_centered_vec(d);
    let mut best = f64::INFINITY;
    for i in -1..=1 {
        for j in -1..=1 {
            for k in -1..=1 {
                let v = d + Vec3::new(i as f64, j as f64, k as f64);
                best = best.min(v.dot(&(g * v)));
            }
        }
    }
    best
}

fn lengths_angles(g: &Mat3) -> ([f64; 3], [f64; 3]) {
    let len = [g[(0, 0)].sqrt(), g[(1, 1)].sqrt(), g[(2, 2)].sqrt()];
    let ang = |i: usize, j: usize| (g[(i, j)] / (len[i] * len[j])).clamp(-1.0, 1.0).acos().to_degrees();
    (len, [ang(1, 2), ang(0, 2), ang(0, 1)])
}

/// Integer matrices `U` with `det U = 1` such that the cell `L_pred U` has
/// lengths and angles within tolerance of the reference cell.
fn lattice_mappings(pred: &Mat3, reference: &Mat3, s: &MatchSettings) -> Vec<Mat3> {
    let gr = reference.transpose() * reference;
    let (rl, ra) = lengths_angles(&gr);
    let mut cands: [Vec<(Vec3, Vec3)>; 3] = Default::default();
    for a in -SEARCH..=SEARCH {
        for b in -SEARCH..=SEARCH {
            for c in -SEARCH..=SEARCH {
                if a == 0 && b == 0 && c == 0 {
                    continue;
                }
                let n = Vec3::new(a as f64, b as f64, c as f64);
                let v = pred * n;
                let len = v.norm();
                for i in 0..3 {
                    if (len - rl[i]).abs() <= s.ltol * rl[i] {
                        cands[i].push((n, v));
                    }
                }
            }
        }
    }
    let angle = |u: &Vec3, v: &Vec3| (u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos().to_degrees();
    let mut out = Vec::new();
    for (n0, v0) in &cands[0] {
        for (n1, v1) in &cands[1] {
            if (angle(v0, v1) - ra[2]).abs() > s.angle_tol {
                continue;
            }
            for (n2, v2) in &cands[2] {
                if (angle(v0, v2) - ra[1]).abs() > s.angle_tol || (angle(v1, v2) - ra[0]).abs() > s.angle_tol {
                    continue;
                }
                let u = Mat3::from_columns(&[*n0, *n1, *n2]);
                if (u.determinant() - 1.0).abs() < 1e-6 {
                    out.push(u);
                }
            }
        }
    }
    out
}

struct Trial {
    max_d: f64,
    rms: f64,
}

/// Assigns shifted predicted sites to reference sites per species and
/// returns the per-atom displacement vectors (fractional, min image).
fn assign(pred: &[Vec3], reference: &[Vec3], groups: &[Vec<usize>], tau: &Vec3, g: &Mat3) -> Vec<Vec3> {
    let mut disp = Vec::with_capacity(pred.len());
    for idx in groups {
        let cost: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| idx.iter().map(|&j| min_image_sq(&(reference[j] - pred[i] - tau), g)).collect())
            .collect();
        let (a, _) = hungarian(&cost);
        for (r, &c) in a.iter().enumerate() {
            let i = idx[r];
            let j = idx[c];
            disp.push(min_image_vec(&(reference[j] - pred[i] - tau), g));
        }
    }
    disp
}

fn min_image_vec(d: &Vec3, g: &Mat3) -> Vec3 {
    let d = wrap_centered_vec(d);
    let mut best = (f64::INFINITY, d);
    for i in -1..=1 {
        for j in -1..=1 {
            for k in -1..=1 {
                let v = d + Vec3::new(i as f64, j as f64, k as f64);
                let n = v.dot(&(g * v));
                if n < best.0 {
                    best = (n, v);
                }
            }
        }
    }
    best.1
}

fn trial(pred: &[Vec3], reference: &[Vec3], groups: &[Vec<usize>], tau0: Vec3, g: &Mat3) -> Trial {
    let mut tau = tau0;
    let mut disp = assign(pred, reference, groups, &tau, g);
    for _ in 0..2 {
        let mean = disp.iter().sum::<Vec3>() / disp.len() as f64;
        tau += mean;
        disp = assign(pred, reference, groups, &tau, g);
    }
    let sq: Vec<f64> = disp.iter().map(|d| d.dot(&(g * d))).collect();
    Trial {
        max_d: sq.iter().copied().fold(0.0, f64::max).sqrt(),
        rms: (sq.iter().sum::<f64>() / sq.len() as f64).sqrt(),
    }
}

/// Compares a predicted structure against a reference.
pub fn match_structures(pred: &Crystal, reference: &Crystal, s: &MatchSettings) -> MatchReport {
    let n = reference.num_atoms();
    if pred.num_atoms() != n || pred.composition() != reference.composition() {
        return MatchReport::UNMATCHED;
    }
    let pl = if s.scale_volume {
        match pred.lattice.scaled_to_volume(reference.volume()) {
            Ok(l) => *l.matrix(),
            Err(_) => return MatchReport::UNMATCHED,
        }
    } else {
        *pred.lattice.matrix()
    };
    let rl = *reference.lattice.matrix();
    let gr = rl.transpose() * rl;

    let species: Vec<Element> = reference.composition().keys().copied().collect();
    let groups: Vec<Vec<usize>> =
        species.iter().map(|e| (0..n).filter(|&i| reference.species[i] == *e).collect()).collect();
    let pred_groups: Vec<Vec<usize>> =
        species.iter().map(|e| (0..n).filter(|&i| pred.species[i] == *e).collect()).collect();
    // Reorder predicted atoms so both lists share the species grouping.
    let pred_order: Vec<usize> = pred_groups.iter().flatten().copied().collect();
    let ref_order: Vec<usize> = groups.iter().flatten().copied().collect();
    let mut grouped = Vec::new();
    let mut start = 0;
    for gidx in &groups {
        grouped.push((start..start + gidx.len()).collect::<Vec<usize>>());
        start += gidx.len();
    }
    let ref_frac: Vec<Vec3> = ref_order.iter().map(|&i| reference.frac[i]).collect();
    let rare = (0..grouped.len()).min_by_key(|&k| (grouped[k].len(), k)).expect("nonempty composition");

    let mut best: Option<f64> = None;
    for u in lattice_mappings(&pl, &rl, s) {
        let new_l = pl * u;
        let g = (new_l.transpose() * new_l + gr) * 0.5;
        let det = g.determinant();
        if !(det > 0.0) {
            continue;
        }
        let norm = (det.sqrt() / n as f64).cbrt();
        let u_inv = match u.try_inverse() {
            Some(m) => m,
            None => continue,
        };
        let pred_frac: Vec<Vec3> = pred_order.iter().map(|&i| u_inv * pred.frac[i]).collect();
        let r0 = grouped[rare][0];
        for &p0 in &grouped[rare] {
            let tau = ref_frac[r0] - pred_frac[p0];
            let tr = trial(&pred_frac, &ref_frac, &grouped, tau, &g);
            if tr.max_d <= s.stol * norm {
                let r = tr.rms / norm;
                if best.is_none_or(|b| r < b) {
                    best = Some(r);
                }
            }
        }
    }
    match best {
        Some(r) => MatchReport { matched: true, rmsd: Some(r) },
        None => MatchReport::UNMATCHED,
    }
}

/// Match rate and mean normalized RMSD over matched pairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchSummary {
    pub total: usize,
    pub matched: usize,
    pub rate: f64,
    pub mean_rmsd: Option<f64>,
}

pub fn match_rate(reports: &[MatchReport]) -> Result<MatchSummary> {
    if reports.is_empty() {
        return domain("match rate of an empty set");
    }
    let rms: Vec<f64> = reports.iter().filter_map(|r| r.rmsd).collect();
    let matched = reports.iter().filter(|r| r.matched).count();
    Ok(MatchSummary {
        total: reports.len(),
        matched,
        rate: matched as f64 / reports.len() as f64,
        mean_rmsd: if rms.is_empty() { None } else { Some(rms.iter().sum::<f64>() / rms.len() as f64) },
    })
}

/// Smallest interatomic distance (Å) over all pairs and the 27 neighbouring
/// cells, self-images included.
pub fn min_distance(c: &Crystal) -> f64 {
    let l = c.lattice.matrix();
    let g = l.transpose() * l;
    let n = c.num_atoms();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in i..n {
            let d = wrap_centered_vec(&(c.frac[j] - c.frac[i]));
            for a in -1..=1 {
                for b in -1..=1 {
                    for cc in -1..=1 {
                        if i == j && a == 0 && b == 0 && cc == 0 {
                            continue;
                        }
                        let v = d + Vec3::new(a as f64, b as f64, cc as f64);
                        best = best.min(v.dot(&(g * v)));
                    }
                }
            }
        }
    }
    best.sqrt()
}

/// Minimum pairwise distance strictly above 0.5 Å.
pub fn structural_validity(c: &Crystal) -> bool {
    min_distance(c) > 0.5
}

/// 1-Wasserstein distance between two empirical distributions on ℝ.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return domain("Wasserstein distance of an empty sample");
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    if xa.len() == xb.len() {
        return Ok(xa.iter().zip(&xb).map(|(x, y)| (x - y).abs()).sum::<f64>() / xa.len() as f64);
    }
    // ∫ |F_a − F_b| over the merged breakpoints.
    let mut all: Vec<f64> = xa.iter().chain(&xb).copied().collect();
    all.sort_by(f64::total_cmp);
    let cdf = |xs: &[f64], x: f64| xs.partition_point(|&v| v <= x) as f64 / xs.len() as f64;
    let mut total = 0.0;
    for w in all.windows(2) {
        let width = w[1] - w[0];
        if width > 0.0 {
            total += (cdf(&xa, w[0]) - cdf(&xb, w[0])).abs() * width;
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropertyStats {
    pub density: f64,
    pub num_elements: f64,
}

/// W1 distances of density and of the number of distinct elements.
pub fn property_stats(generated: &[Crystal], reference: &[Crystal]) -> Result<PropertyStats> {
    let dens = |s: &[Crystal]| s.iter().map(|c| c.density()).collect::<Vec<_>>();
    let elems = |s: &[Crystal]| s.iter().map(|c| c.composition().len() as f64).collect::<Vec<_>>();
    Ok(PropertyStats {
        density: wasserstein_1d(&dens(generated), &dens(reference))?,
        num_elements: wasserstein_1d(&elems(generated), &elems(reference))?,
    })
}
