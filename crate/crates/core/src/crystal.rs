//! Periodic crystal structures and their optional Wyckoff annotation.

use std::collections::BTreeMap;

use crate::elements::Element;
use crate::error::{domain, Result};
use crate::lattice::LatticeMatrix;
use crate::linalg::Vec3;

/// `x − ⌊x⌋`, mapped into `[0, 1)` even when rounding would give exactly 1.
pub fn wrap(x: f64) -> f64 {
    let w = x - x.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

pub fn wrap_vec(v: &Vec3) -> Vec3 {
    v.map(wrap)
}

/// Representative of `x` mod 1 in `[−0.5, 0.5)`.
pub fn wrap_centered(x: f64) -> f64 {
    let w = x - (x + 0.5).floor();
    if w >= 0.5 {
        w - 1.0
    } else {
        w
    }
}

pub fn wrap_centered_vec(v: &Vec3) -> Vec3 {
    v.map(wrap_centered)
}

/// One occupied Wyckoff site: its position index in the group's table, the
/// element on it, and its basic coordinate in parameter space (the
/// coordinates multiplying the columns of `R_{s₀}`; constrained entries are 0).
#[derive(Clone, Debug, PartialEq)]
pub struct Site {
    pub wyckoff: usize,
    pub element: Element,
    pub basic: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Annotation {
    pub group: u16,
    pub sites: Vec<Site>,
}

/// Lattice, species and fractional coordinates. When annotated, atoms are
/// laid out orbit by orbit in site order, the first atom of each orbit being
/// the site's basic position.
#[derive(Clone, Debug, PartialEq)]
pub struct Crystal {
    pub lattice: LatticeMatrix,
    pub species: Vec<Element>,
    pub frac: Vec<Vec3>,
    pub annotation: Option<Annotation>,
}

impl Crystal {
    /// Unannotated crystal; coordinates are wrapped into `[0, 1)`.
    pub fn new(lattice: LatticeMatrix, species: Vec<Element>, frac: Vec<Vec3>) -> Result<Self> {
        if species.len() != frac.len() {
            return domain(format!("{} species but {} coordinates", species.len(), frac.len()));
        }
        if species.is_empty() {
            return domain("crystal has no atoms");
        }
        if frac.iter().any(|f| !f.iter().all(|x| x.is_finite())) {
            return domain("non-finite fractional coordinate");
        }
        Ok(Self { lattice, species, frac: frac.iter().map(wrap_vec).collect(), annotation: None })
    }

    pub fn num_atoms(&self) -> usize {
        self.species.len()
    }

    pub fn group(&self) -> Option<u16> {
        self.annotation.as_ref().map(|a| a.group)
    }

    pub fn composition(&self) -> BTreeMap<Element, usize> {
        let mut out = BTreeMap::new();
        for e in &self.species {
            *out.entry(*e).or_insert(0) += 1;
        }
        out
    }

    pub fn volume(&self) -> f64 {
        self.lattice.volume()
    }

    /// Mass density in g/cm³.
    pub fn density(&self) -> f64 {
        const AMU_PER_A3_TO_G_PER_CM3: f64 = 1.660_539_066_60;
        let mass: f64 = self.species.iter().map(|e| e.mass()).sum();
        mass / self.volume() * AMU_PER_A3_TO_G_PER_CM3
    }

    pub fn cartesian(&self) -> Vec<Vec3> {
        self.frac.iter().map(|f| self.lattice.to_cartesian(f)).collect()
    }

    /// Reduced chemical formula in order of atomic number, e.g. `Na4Cl4`.
    pub fn formula(&self) -> String {
        self.composition()
            .iter()
            .map(|(e, n)| if *n == 1 { e.symbol().to_string() } else { format!("{}{}", e.symbol(), n) })
            .collect()
    }

    pub fn without_annotation(&self) -> Crystal {
        Crystal { annotation: None, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_edges() {
        assert_eq!(wrap(1.0), 0.0);
        assert_eq!(wrap(-0.25), 0.75);
        assert_eq!(wrap(-1e-18), 0.0);
        assert_eq!(wrap(2.5), 0.5);
        assert_eq!(wrap_centered(0.5), -0.5);
        assert_eq!(wrap_centered(0.75), -0.25);
        assert_eq!(wrap_centered(-0.5), -0.5);
    }

    #[test]
    fn density_of_rock_salt() {
        let na = Element::from_symbol("Na").unwrap();
        let cl = Element::from_symbol("Cl").unwrap();
        let mut species = vec![na; 4];
        species.extend([cl; 4]);
        let frac = vec![Vec3::zeros(); 8];
        let c = Crystal::new(LatticeMatrix::cubic(5.64).unwrap(), species, frac).unwrap();
        assert!((c.density() - 2.16).abs() < 0.02);
        assert_eq!(c.formula(), "Na4Cl4");
    }
}
