//! Template-based structure prediction: retrieve training structures with the
//! query's composition ratio, substitute elements by optimal assignment on
//! element descriptors, then noise and re-denoise under the template's
//! symmetry.

use std::collections::BTreeMap;

use rand::Rng;

use crate::assignment::hungarian;
use crate::crystal::{Crystal, Site};
use crate::diffusion::sampler::decode;
use crate::diffusion::{refine_state, DiffusionContext, Example, ScoreModel};
use crate::elements::{Element, ElementTable};
use crate::error::{domain, Result};
use crate::spacegroup::{verify_symmetry, SpaceGroupTable};

/// Tolerance used to verify template symmetry on load and after refinement.
pub const SYMMETRY_TOL: f64 = 1e-6;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Element counts divided by their common divisor.
pub fn reduced_counts(composition: &[(Element, usize)]) -> Vec<(Element, usize)> {
    let mut merged: BTreeMap<Element, usize> = BTreeMap::new();
    for &(e, n) in composition {
        *merged.entry(e).or_insert(0) += n;
    }
    let g = merged.values().fold(0, |g, &n| gcd(g, n)).max(1);
    merged.into_iter().map(|(e, n)| (e, n / g)).collect()
}

/// Sorted reduced ratios, e.g. `[1, 1, 3]` for SrTiO₃.
pub fn ratio_signature(composition: &[(Element, usize)]) -> Vec<usize> {
    let mut v: Vec<usize> = reduced_counts(composition).into_iter().map(|(_, n)| n).collect();
    v.sort_unstable();
    v
}

fn crystal_composition(c: &Crystal) -> Vec<(Element, usize)> {
    c.composition().into_iter().collect()
}

#[derive(Clone, Debug)]
pub struct TemplateEntry {
    pub name: String,
    pub signature: Vec<usize>,
    pub crystal: Crystal,
}

/// A retrieved template with its similarity and element mapping.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub index: usize,
    pub similarity: f64,
    /// Mean descriptor distance of the optimal assignment.
    pub cost: f64,
    /// `(template element, query element)` pairs.
    pub mapping: Vec<(Element, Element)>,
}

#[derive(Clone, Debug)]
pub struct TemplateIndex {
    entries: Vec<TemplateEntry>,
    descriptors: Vec<[f64; 5]>,
}

impl TemplateIndex {
    /// Builds from annotated crystals, verifying each one's symmetry. Element
    /// descriptors are z-scored over the builtin table.
    pub fn new(entries: Vec<(String, Crystal)>, groups: &SpaceGroupTable) -> Result<Self> {
        Self::with_elements(entries, groups, ElementTable::builtin())
    }

    pub fn with_elements(
        entries: Vec<(String, Crystal)>,
        groups: &SpaceGroupTable,
        elements: &ElementTable,
    ) -> Result<Self> {
        let mut out = Vec::with_capacity(entries.len());
        for (name, c) in entries {
            let Some(group) = c.group() else {
                return domain(format!("template {name} is not annotated"));
            };
            if !verify_symmetry(&c, groups.get(group)?, SYMMETRY_TOL) {
                return domain(format!("template {name} fails its group {group} symmetry check"));
            }
            out.push(TemplateEntry { signature: ratio_signature(&crystal_composition(&c)), name, crystal: c });
        }
        let (mean, std) = elements.descriptor_moments();
        let descriptors = elements
            .records()
            .iter()
            .map(|r| {
                let d = r.descriptor();
                [0, 1, 2, 3, 4].map(|i| (d[i] - mean[i]) / std[i])
            })
            .collect();
        Ok(Self { entries: out, descriptors })
    }

    pub fn entries(&self) -> &[TemplateEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// L2 distance between z-scored descriptors.
    pub fn distance(&self, a: Element, b: Element) -> f64 {
        let (x, y) = (&self.descriptors[a.index()], &self.descriptors[b.index()]);
        x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
    }

    /// Optimal element mapping within each class of equal reduced count.
    /// `None` when the ratio signatures differ.
    fn assign(&self, query: &[(Element, usize)], template: &[(Element, usize)]) -> Option<(Vec<(Element, Element)>, f64)> {
        let q = reduced_counts(query);
        let t = reduced_counts(template);
        let classes = |v: &[(Element, usize)]| {
            let mut m: BTreeMap<usize, Vec<Element>> = BTreeMap::new();
            for &(e, n) in v {
                m.entry(n).or_default().push(e);
            }
            m
        };
        let (qc, tc) = (classes(&q), classes(&t));
        if qc.iter().map(|(n, v)| (*n, v.len())).ne(tc.iter().map(|(n, v)| (*n, v.len()))) {
            return None;
        }
        let mut mapping = Vec::new();
        let mut total = 0.0;
        for (n, tels) in &tc {
            let qels = &qc[n];
            let cost: Vec<Vec<f64>> =
                tels.iter().map(|&te| qels.iter().map(|&qe| self.distance(te, qe)).collect()).collect();
            let (col, c) = hungarian(&cost);
            total += c;
            mapping.extend(tels.iter().zip(col).map(|(&te, j)| (te, qels[j])));
        }
        Some((mapping, total / t.len() as f64))
    }

    /// Templates sharing the query's ratio signature, most similar first.
    /// Similarity is `1 / (1 + mean assignment distance)`; ties keep index
    /// order.
    pub fn retrieve(&self, query: &[(Element, usize)]) -> Result<Vec<Candidate>> {
        if self.entries.is_empty() {
            return domain("template index is empty");
        }
        let sig = ratio_signature(query);
        let mut out: Vec<Candidate> = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.signature == sig)
            .filter_map(|(index, e)| {
                self.assign(query, &crystal_composition(&e.crystal))
                    .map(|(mapping, cost)| Candidate { index, similarity: 1.0 / (1.0 + cost), cost, mapping })
            })
            .collect();
        out.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.index.cmp(&b.index)));
        Ok(out)
    }

    /// Replaces the template's elements by the query's under the optimal
    /// assignment; lattice, group and Wyckoff sites are inherited.
    pub fn substitute(&self, query: &[(Element, usize)], template: &Crystal) -> Result<Crystal> {
        let (mapping, _) = self.assign(query, &crystal_composition(template)).ok_or_else(|| {
            crate::Error::Domain(format!(
                "query ratio {:?} does not match template ratio {:?}",
                ratio_signature(query),
                ratio_signature(&crystal_composition(template))
            ))
        })?;
        Ok(apply_mapping(template, &mapping))
    }
}

fn apply_mapping(c: &Crystal, mapping: &[(Element, Element)]) -> Crystal {
    let map = |e: Element| mapping.iter().find(|(t, _)| *t == e).map_or(e, |(_, q)| *q);
    let mut out = c.clone();
    out.species = c.species.iter().map(|&e| map(e)).collect();
    if let Some(ann) = &mut out.annotation {
        ann.sites = ann.sites.iter().map(|s| Site { element: map(s.element), ..s.clone() }).collect();
    }
    out
}

/// Noises the template's lattice and coordinates to `t_start` and denoises
/// back with types and Wyckoff sites held fixed.
pub fn refine(
    template: &Crystal,
    model: &dyn ScoreModel,
    ctx: &DiffusionContext,
    groups: &SpaceGroupTable,
    t_start: usize,
    rng: &mut impl Rng,
) -> Result<Crystal> {
    if t_start > ctx.steps() {
        return domain(format!("t_start {t_start} exceeds T = {}", ctx.steps()));
    }
    if t_start == 0 {
        return Ok(template.clone());
    }
    let ex = Example::from_crystal(template, groups)?;
    let out = refine_state(&ex.state, &ex.layout, model, ctx, t_start, true, rng)?;
    let c = decode(&out, &ex.layout, groups)?;
    if !verify_symmetry(&c, groups.get(ex.layout.group)?, SYMMETRY_TOL) {
        return domain(format!("refined structure lost group {} symmetry", ex.layout.group));
    }
    Ok(c)
}
