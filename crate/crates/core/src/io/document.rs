use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::crystal::Crystal;
use crate::elements::Element;
use crate::error::{domain, io_error, Error, Result};
use crate::lattice::{family_mask, lattice_from_k, KVector, LatticeMatrix};
use crate::linalg::Vec3;
use crate::spacegroup::{annotate_tagged, SpaceGroupTable};

pub const SCHEMA: u32 = 1;

/// Tolerance for Wyckoff tags when reading a document.
const TAG_TOL: f64 = 1e-6;

/// Lattice given either by its three Cartesian vectors or by `k` (which then
/// requires a group, whose family must admit `k`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeSpec {
    Vectors([[f64; 3]; 3]),
    K([f64; 6]),
}

impl LatticeSpec {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { path: path.into(), line: e.line(), msg: e.to_string() })
    }

    /// A `k` lattice is taken in the symmetric gauge.
    pub fn to_lattice(&self) -> Result<LatticeMatrix> {
        match self {
            LatticeSpec::Vectors(v) => LatticeMatrix::from_vectors(*v),
            LatticeSpec::K(k) => Ok(lattice_from_k(&KVector(*k))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomRecord {
    pub element: Element,
    pub frac: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wyckoff: Option<char>,
}

/// On-disk crystal. Either every atom carries a Wyckoff letter and `group` is
/// set, or no atom does.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalDocument {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<u16>,
    pub lattice: LatticeSpec,
    pub atoms: Vec<AtomRecord>,
}

impl CrystalDocument {
    pub fn from_crystal(c: &Crystal, groups: &SpaceGroupTable) -> Self {
        let letters: Option<Vec<char>> = c.annotation.as_ref().map(|ann| {
            // Annotated crystals are laid out orbit by orbit in site order.
            let entry = groups.get(ann.group).ok();
            ann.sites
                .iter()
                .flat_map(|s| {
                    let (letter, n) = entry
                        .and_then(|e| e.wyckoff.get(s.wyckoff))
                        .map_or(('?', 0), |w| (w.letter, w.multiplicity));
                    std::iter::repeat_n(letter, n)
                })
                .collect()
        });
        let letters = letters.filter(|l| l.len() == c.num_atoms() && !l.contains(&'?'));
        let atoms = c
            .species
            .iter()
            .zip(&c.frac)
            .enumerate()
            .map(|(i, (&element, f))| AtomRecord {
                element,
                frac: [f[0], f[1], f[2]],
                wyckoff: letters.as_ref().map(|l| l[i]),
            })
            .collect();
        Self {
            schema: SCHEMA,
            group: if letters.is_some() { c.group() } else { None },
            lattice: LatticeSpec::Vectors(c.lattice.vectors()),
            atoms,
        }
    }

    pub fn to_crystal(&self, groups: &SpaceGroupTable) -> Result<Crystal> {
        if self.schema != SCHEMA {
            return domain(format!("unsupported schema version {} (expected {SCHEMA})", self.schema));
        }
        if self.atoms.is_empty() {
            return domain("document has no atoms");
        }
        let lattice = match &self.lattice {
            LatticeSpec::Vectors(v) => LatticeMatrix::from_vectors(*v)?,
            LatticeSpec::K(k) => {
                let Some(g) = self.group else {
                    return domain("a k lattice needs a group");
                };
                let k = KVector(*k);
                let mask = family_mask(g)?;
                if !mask.admits(&k, 1e-12) {
                    return domain(format!("k = {:?} violates the {} constraints of group {g}", k.0, mask.family));
                }
                lattice_from_k(&k)
            }
        };
        let tagged = self.atoms.iter().filter(|a| a.wyckoff.is_some()).count();
        if tagged == 0 {
            if let Some(g) = self.group {
                return domain(format!("group {g} given but atoms carry no Wyckoff letters"));
            }
            let species = self.atoms.iter().map(|a| a.element).collect();
            let frac = self.atoms.iter().map(|a| Vec3::from(a.frac)).collect();
            return Crystal::new(lattice, species, frac);
        }
        if tagged != self.atoms.len() {
            return domain(format!("{tagged} of {} atoms carry Wyckoff letters; tag all or none", self.atoms.len()));
        }
        let Some(g) = self.group else {
            return domain("Wyckoff letters given without a group");
        };
        let atoms: Vec<(Element, Vec3, char)> =
            self.atoms.iter().map(|a| (a.element, Vec3::from(a.frac), a.wyckoff.unwrap_or('?'))).collect();
        annotate_tagged(lattice, &atoms, groups.get(g)?, TAG_TOL)
    }

    pub fn to_json(&self) -> Result<String> {
        super::to_json_compact(self)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { path: path.into(), line: e.line(), msg: e.to_string() })
    }
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Domain(msg) => Error::Domain(format!("{}: {msg}", path.display())),
        other => other,
    }
}

pub fn read_crystal(path: &Path, groups: &SpaceGroupTable) -> Result<Crystal> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    CrystalDocument::parse(&text, path)?.to_crystal(groups).map_err(|e| with_path(path, e))
}

pub fn write_crystal(path: &Path, c: &Crystal, groups: &SpaceGroupTable) -> Result<()> {
    std::fs::write(path, CrystalDocument::from_crystal(c, groups).to_json()?).map_err(io_error(path))
}

/// Every `*.json` file in `dir`, sorted by file name, with its stem.
pub fn read_crystal_dir(dir: &Path, groups: &SpaceGroupTable) -> Result<Vec<(String, Crystal)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_error(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, read_crystal(&p, groups)?))
        })
        .collect()
}
