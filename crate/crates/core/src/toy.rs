//! Small annotated structures used by the tests, the acceptance suite and the
//! shipped example data.

use crate::crystal::{Crystal, Site};
use crate::elements::Element;
use crate::error::Result;
use crate::lattice::LatticeMatrix;
use crate::linalg::Vec3;
use crate::spacegroup::{builtin_group, expand_structure};

fn el(symbol: &str) -> Element {
    symbol.parse().expect("toy element")
}

/// Builds from `(letter, element, basic)` triples.
pub fn build(group: u16, lattice: LatticeMatrix, sites: &[(char, &str, [f64; 3])]) -> Result<Crystal> {
    let entry = builtin_group(group)?;
    let sites: Vec<Site> = sites
        .iter()
        .map(|&(letter, e, b)| Site {
            wyckoff: entry.wyckoff_index(letter).expect("toy letter"),
            element: el(e),
            basic: Vec3::from(b),
        })
        .collect();
    expand_structure(&sites, lattice, entry)
}

fn hexagonal(a: f64, c: f64) -> LatticeMatrix {
    LatticeMatrix::from_vectors([[a, 0.0, 0.0], [-0.5 * a, 0.75f64.sqrt() * a, 0.0], [0.0, 0.0, c]]).expect("hexagonal cell")
}

fn cubic(a: f64) -> LatticeMatrix {
    LatticeMatrix::cubic(a).expect("cubic cell")
}

/// NaCl, Fm-3m, a = 5.64 Å, 8 atoms.
pub fn rock_salt() -> Crystal {
    build(225, cubic(5.64), &[('a', "Na", [0.0; 3]), ('b', "Cl", [0.0; 3])]).expect("rock salt")
}

/// CsCl, Pm-3m, a = 4.12 Å.
pub fn cesium_chloride() -> Crystal {
    build(221, cubic(4.12), &[('a', "Cs", [0.0; 3]), ('b', "Cl", [0.0; 3])]).expect("CsCl")
}

/// Cubic SrTiO₃ perovskite, Pm-3m, a = 3.905 Å.
pub fn perovskite() -> Crystal {
    build(221, cubic(3.905), &[('a', "Sr", [0.0; 3]), ('b', "Ti", [0.0; 3]), ('c', "O", [0.0; 3])])
        .expect("perovskite")
}

/// fcc Cu, a = 3.615 Å.
pub fn copper() -> Crystal {
    build(225, cubic(3.615), &[('a', "Cu", [0.0; 3])]).expect("Cu")
}

/// Diamond Si, Fd-3m, a = 5.431 Å.
pub fn silicon() -> Crystal {
    build(227, cubic(5.431), &[('a', "Si", [0.0; 3])]).expect("Si")
}

/// hcp Mg, P6₃/mmc.
pub fn magnesium() -> Crystal {
    build(194, hexagonal(3.21, 5.21), &[('c', "Mg", [0.0; 3])]).expect("Mg")
}

/// Wurtzite ZnO, P6₃mc, u = 0.382.
pub fn zinc_oxide() -> Crystal {
    build(186, hexagonal(3.25, 5.207), &[('b', "Zn", [0.0; 3]), ('b', "O", [0.0, 0.0, 0.382])]).expect("ZnO")
}

/// Synthetic WO₆ cluster crystal on Pm-3m 1a + 6e with a free parameter
/// x = 0.3, a = 6 Å.
pub fn octahedral_cluster() -> Crystal {
    build(221, cubic(6.0), &[('a', "W", [0.0; 3]), ('e', "O", [0.3, 0.0, 0.0])]).expect("WO6")
}

/// The cubic training set.
pub fn cubic_training_set() -> Vec<(&'static str, Crystal)> {
    vec![
        ("NaCl", rock_salt()),
        ("CsCl", cesium_chloride()),
        ("SrTiO3", perovskite()),
        ("Cu", copper()),
        ("WO6", octahedral_cluster()),
    ]
}

/// Template library: the training set plus non-cubic prototypes.
pub fn template_set() -> Vec<(&'static str, Crystal)> {
    let mut v = cubic_training_set();
    v.push(("Si", silicon()));
    v.push(("Mg", magnesium()));
    v.push(("ZnO", zinc_oxide()));
    v
}

/// Held-out compositions with their known structures, for template-based
/// structure prediction.
pub fn csp_test_set() -> Vec<(&'static str, Crystal)> {
    vec![
        ("KCl", build(225, cubic(6.29), &[('a', "K", [0.0; 3]), ('b', "Cl", [0.0; 3])]).expect("KCl")),
        ("CsBr", build(221, cubic(4.29), &[('a', "Cs", [0.0; 3]), ('b', "Br", [0.0; 3])]).expect("CsBr")),
        (
            "BaTiO3",
            build(221, cubic(4.00), &[('a', "Ba", [0.0; 3]), ('b', "Ti", [0.0; 3]), ('c', "O", [0.0; 3])])
                .expect("BaTiO3"),
        ),
        (
            "GaN",
            build(186, hexagonal(3.189, 5.185), &[('b', "Ga", [0.0; 3]), ('b', "N", [0.0, 0.0, 0.377])])
                .expect("GaN"),
        ),
        ("Ni", build(225, cubic(3.524), &[('a', "Ni", [0.0; 3])]).expect("Ni")),
    ]
}

/// Two atoms 0.4 Å apart in a 5 Å cell.
pub fn close_pair() -> Crystal {
    Crystal::new(cubic(5.0), vec![el("Na"), el("Cl")], vec![Vec3::zeros(), Vec3::new(0.08, 0.0, 0.0)]).expect("pair")
}
