#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use wyckdiff::crystal::Site;
use wyckdiff::diffusion::{DiffusionContext, ScheduleConfig};
use wyckdiff::lattice::{lattice_from_k, project_k, CrystalFamily, KVector};
use wyckdiff::linalg::Vec3;
use wyckdiff::spacegroup::{builtin_group, expand_structure};
use wyckdiff::{Crystal, Element};

/// `(group, occupied letters)` per family, each with at least one free parameter.
pub const FAMILY_LAYOUTS: [(CrystalFamily, u16, &[char]); 6] = [
    (CrystalFamily::Triclinic, 2, &['i', 'a']),
    (CrystalFamily::Monoclinic, 14, &['e', 'a']),
    (CrystalFamily::Orthorhombic, 62, &['c', 'a']),
    (CrystalFamily::Tetragonal, 99, &['a', 'd']),
    (CrystalFamily::Hexagonal, 160, &['a', 'b']),
    (CrystalFamily::Cubic, 221, &['a', 'e']),
];

const SPECIES: [&str; 3] = ["Na", "Cl", "O"];

pub fn ctx(steps: usize) -> DiffusionContext {
    DiffusionContext::new(&ScheduleConfig::with_steps(steps)).unwrap()
}

/// A random cell of the family around 5 Å with mild distortion.
pub fn random_k(family: CrystalFamily, rng: &mut impl Rng) -> KVector {
    let d = Uniform::new(-0.12, 0.12).unwrap();
    let mut k = KVector([0.0; 6]);
    for i in 0..5 {
        k[i] = d.sample(rng);
    }
    k[5] = 5f64.ln() + d.sample(rng);
    project_k(&k, &family.mask())
}

/// Random structure on one of [`FAMILY_LAYOUTS`].
pub fn family_structure(index: usize, rng: &mut impl Rng) -> Crystal {
    let (family, group, letters) = FAMILY_LAYOUTS[index];
    let entry = builtin_group(group).unwrap();
    let sites: Vec<Site> = letters
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let w = entry.position(l).unwrap();
            let basic = w.normalize(&Vec3::new(rng.random(), rng.random(), rng.random()));
            Site { wyckoff: entry.wyckoff_index(l).unwrap(), element: SPECIES[i].parse::<Element>().unwrap(), basic }
        })
        .collect();
    expand_structure(&sites, lattice_from_k(&random_k(family, rng)), entry).unwrap()
}
