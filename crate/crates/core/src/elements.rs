//! Element symbols, atomic masses and the scalar descriptors used for template
//! substitution.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Error, Result};

const BUILTIN: &str = include_str!("../data/elements.tsv");

/// A chemical element, identified by atomic number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(u8);

#[derive(Clone, Debug, PartialEq)]
pub struct ElementRecord {
    pub symbol: String,
    pub z: u8,
    pub period: u8,
    pub group: u8,
    pub electronegativity: f64,
    pub covalent_radius: f64,
    pub mass: f64,
}

impl ElementRecord {
    /// `(Z, period, group, electronegativity, covalent radius)`.
    pub fn descriptor(&self) -> [f64; 5] {
        [
            self.z as f64,
            self.period as f64,
            self.group as f64,
            self.electronegativity,
            self.covalent_radius,
        ]
    }
}

/// Shipped per-element constants, indexed by `Z - 1`.
#[derive(Clone, Debug)]
pub struct ElementTable {
    records: Vec<ElementRecord>,
}

impl ElementTable {
    /// Parses the tab-separated table; `path` is only used in error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
        let mut records: Vec<ElementRecord> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 7 {
                return Err(err(i + 1, format!("expected 7 columns, found {}", cols.len())));
            }
            let int = |s: &str| s.parse::<u8>().map_err(|e| err(i + 1, format!("`{s}`: {e}")));
            let float = |s: &str| s.parse::<f64>().map_err(|e| err(i + 1, format!("`{s}`: {e}")));
            let rec = ElementRecord {
                symbol: cols[0].to_string(),
                z: int(cols[1])?,
                period: int(cols[2])?,
                group: int(cols[3])?,
                electronegativity: float(cols[4])?,
                covalent_radius: float(cols[5])?,
                mass: float(cols[6])?,
            };
            if rec.z as usize != records.len() + 1 {
                return Err(err(i + 1, format!("atomic numbers must be consecutive from 1 (got {})", rec.z)));
            }
            records.push(rec);
        }
        if records.is_empty() {
            return Err(err(0, "empty element table".into()));
        }
        Ok(Self { records })
    }

    pub fn builtin() -> &'static ElementTable {
        static TABLE: OnceLock<ElementTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            ElementTable::parse(BUILTIN, Path::new("elements.tsv")).expect("shipped element table is valid")
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ElementRecord] {
        &self.records
    }

    pub fn get(&self, e: Element) -> &ElementRecord {
        &self.records[e.0 as usize - 1]
    }

    pub fn lookup(&self, symbol: &str) -> Option<Element> {
        self.records.iter().find(|r| r.symbol == symbol).map(|r| Element(r.z))
    }

    /// Column-wise mean and standard deviation of the descriptors over the table.
    pub fn descriptor_moments(&self) -> ([f64; 5], [f64; 5]) {
        let n = self.records.len() as f64;
        let mut mean = [0.0; 5];
        for r in &self.records {
            for (m, x) in mean.iter_mut().zip(r.descriptor()) {
                *m += x / n;
            }
        }
        let mut std = [0.0; 5];
        for r in &self.records {
            for ((s, x), m) in std.iter_mut().zip(r.descriptor()).zip(mean) {
                *s += (x - m).powi(2) / n;
            }
        }
        (mean, std.map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }))
    }
}

impl Element {
    pub fn from_z(z: u8) -> Result<Self> {
        if z == 0 || z as usize > ElementTable::builtin().len() {
            return domain(format!("no element with Z = {z}"));
        }
        Ok(Element(z))
    }

    pub fn from_symbol(symbol: &str) -> Result<Self> {
        ElementTable::builtin()
            .lookup(symbol)
            .ok_or_else(|| Error::Domain(format!("unknown element symbol `{symbol}`")))
    }

    pub fn z(&self) -> u8 {
        self.0
    }

    /// Zero-based class index used for one-hot type vectors.
    pub fn index(&self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::from_z(u8::try_from(i + 1).map_err(|_| Error::Domain(format!("type index {i} out of range")))?)
    }

    pub fn record(&self) -> &'static ElementRecord {
        ElementTable::builtin().get(*self)
    }

    pub fn symbol(&self) -> &'static str {
        &self.record().symbol
    }

    pub fn mass(&self) -> f64 {
        self.record().mass
    }
}

/// Number of element classes `h` in the one-hot type encoding.
pub fn type_count() -> usize {
    ElementTable::builtin().len()
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Element {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Element::from_symbol(s)
    }
}

impl Serialize for Element {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for Element {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Element::from_symbol(&s).map_err(serde::de::Error::custom)
    }
}

/// Parses a formula such as `NaCl`, `SrTiO3` or `Na4Cl4` into element counts
/// in order of first appearance.
pub fn parse_formula(formula: &str) -> Result<Vec<(Element, usize)>> {
    let mut out: Vec<(Element, usize)> = Vec::new();
    let chars: Vec<char> = formula.chars().filter(|c| !c.is_whitespace()).collect();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_ascii_uppercase() {
            return domain(format!("malformed formula `{formula}` at position {i}"));
        }
        let mut sym = chars[i].to_string();
        i += 1;
        while i < chars.len() && chars[i].is_ascii_lowercase() {
            sym.push(chars[i]);
            i += 1;
        }
        let start = i;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
        let count = if start == i {
            1
        } else {
            chars[start..i].iter().collect::<String>().parse::<usize>().map_err(|e| Error::Domain(e.to_string()))?
        };
        if count == 0 {
            return domain(format!("zero count for {sym} in `{formula}`"));
        }
        let e = Element::from_symbol(&sym)?;
        match out.iter_mut().find(|(x, _)| *x == e) {
            Some(entry) => entry.1 += count,
            None => out.push((e, count)),
        }
    }
    if out.is_empty() {
        return domain("empty formula");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_loads() {
        let t = ElementTable::builtin();
        assert!(t.len() >= 86);
        let na = Element::from_symbol("Na").unwrap();
        assert_eq!(na.z(), 11);
        assert_eq!(na.record().period, 3);
        assert_eq!(na.record().group, 1);
        assert!((na.mass() - 22.99).abs() < 0.01);
        assert_eq!(Element::from_symbol("Cl").unwrap().symbol(), "Cl");
        assert!(Element::from_symbol("Xx").is_err());
    }

    #[test]
    fn formulas() {
        let f = parse_formula("SrTiO3").unwrap();
        let syms: Vec<_> = f.iter().map(|(e, n)| (e.symbol(), *n)).collect();
        assert_eq!(syms, vec![("Sr", 1), ("Ti", 1), ("O", 3)]);
        assert_eq!(parse_formula("Na4Cl4").unwrap().len(), 2);
        assert!(parse_formula("nacl").is_err());
        assert!(parse_formula("Na0").is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = ElementTable::parse("# c\nH\t1\t1\n", Path::new("x.tsv")).unwrap_err();
        assert!(e.to_string().starts_with("x.tsv:2:"), "{e}");
    }

    #[test]
    fn serde_uses_symbols() {
        let e = Element::from_symbol("Fe").unwrap();
        assert_eq!(serde_json::to_string(&e).unwrap(), "\"Fe\"");
        let back: Element = serde_json::from_str("\"Fe\"").unwrap();
        assert_eq!(back, e);
    }
}
