//! O(3)-invariant logarithmic lattice encoding.
//!
//! A lattice matrix `L` (columns are the cell vectors) factors uniquely as
//! `L = Q·exp(S)` with `Q` orthogonal and `S` symmetric. `S` is expanded in six
//! mutually orthogonal symmetric bases `B₁..B₆`; the coefficient vector `k`
//! is the rotation-free lattice representation the diffusion model works in.
//! Each crystal family pins a subset of the coefficients.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{frobenius, jacobi_svd, symmetric_exp, Mat3, Vec3};

/// Fixed `k₁` of the hexagonal family; it produces γ = 120° between `l₁` and `l₂`.
pub const HEXAGONAL_K1: f64 = -0.274_653_072_167_027_45; // -ln(3)/4

/// Squared Frobenius norms `⟨Bᵢ,Bᵢ⟩` of the six bases.
pub const BASIS_NORMS_SQ: [f64; 6] = [2.0, 2.0, 2.0, 2.0, 6.0, 3.0];

/// The symmetric basis matrix `Bᵢ` for `i` in `0..6`.
pub fn basis(i: usize) -> Mat3 {
    match i {
        0 => Mat3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        1 => Mat3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0),
        2 => Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0),
        3 => Mat3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0),
        4 => Mat3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -2.0),
        5 => Mat3::identity(),
        _ => panic!("basis index {i} out of range"),
    }
}

/// A lattice matrix with the cell vectors as columns (Å). Always `det > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeMatrix(Mat3);

impl LatticeMatrix {
    pub fn new(m: Mat3) -> Result<Self> {
        if !m.iter().all(|x| x.is_finite()) {
            return domain("lattice matrix has non-finite entries");
        }
        let det = m.determinant();
        if !(det > 0.0) {
            return domain(format!("lattice matrix must have det > 0 (got {det})"));
        }
        Ok(Self(m))
    }

    /// Builds the matrix from three cell vectors `l₁, l₂, l₃`.
    pub fn from_vectors(vectors: [[f64; 3]; 3]) -> Result<Self> {
        let cols: Vec<Vec3> = vectors.iter().map(|v| Vec3::new(v[0], v[1], v[2])).collect();
        Self::new(Mat3::from_columns(&cols))
    }

    pub fn cubic(a: f64) -> Result<Self> {
        Self::new(Mat3::identity() * a)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn vectors(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [0, 1, 2].map(|j| [m[(0, j)], m[(1, j)], m[(2, j)]])
    }

    pub fn volume(&self) -> f64 {
        self.0.determinant()
    }

    /// Metric tensor `LᵀL`.
    pub fn gram(&self) -> Mat3 {
        self.0.transpose() * self.0
    }

    pub fn to_cartesian(&self, frac: &Vec3) -> Vec3 {
        self.0 * frac
    }

    pub fn params(&self) -> LatticeParams {
        params_from_lattice(self)
    }

    pub fn k_vector(&self) -> KVector {
        let polar = polar_decompose(&self.0).expect("det > 0 by construction");
        k_from_symmetric(&polar.log)
    }

    /// Scales the cell isotropically to the given volume.
    pub fn scaled_to_volume(&self, volume: f64) -> Result<Self> {
        let f = (volume / self.volume()).cbrt();
        Self::new(self.0 * f)
    }
}

/// Symmetric matrix stored by its six independent entries
/// `(s11, s22, s33, s12, s13, s23)`, so symmetry holds exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetricLog([f64; 6]);

impl SymmetricLog {
    pub const ZERO: Self = Self([0.0; 6]);

    /// Takes the symmetric part `(m + mᵀ)/2`.
    pub fn from_matrix(m: &Mat3) -> Self {
        Self([
            m[(0, 0)],
            m[(1, 1)],
            m[(2, 2)],
            0.5 * (m[(0, 1)] + m[(1, 0)]),
            0.5 * (m[(0, 2)] + m[(2, 0)]),
            0.5 * (m[(1, 2)] + m[(2, 1)]),
        ])
    }

    pub fn entries(&self) -> [f64; 6] {
        self.0
    }

    pub fn matrix(&self) -> Mat3 {
        let [a, b, c, ab, ac, bc] = self.0;
        Mat3::new(a, ab, ac, ab, b, bc, ac, bc, c)
    }

    pub fn exp(&self) -> Mat3 {
        symmetric_exp(&self.matrix())
    }
}

/// The six coefficients of `S = Σ kᵢ Bᵢ`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct KVector(pub [f64; 6]);

impl KVector {
    pub const ZERO: Self = Self([0.0; 6]);

    pub fn as_array(&self) -> &[f64; 6] {
        &self.0
    }

    pub fn max_abs_diff(&self, other: &KVector) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for KVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for KVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Result of `L = Q·exp(S)`.
#[derive(Clone, Copy, Debug)]
pub struct PolarDecomposition {
    pub rotation: Mat3,
    pub log: SymmetricLog,
}

/// Polar decomposition of a lattice matrix with `det(L) > 0`.
///
/// Follows the construction `J = LᵀL = UΛUᵀ`, `S = ½U log(Λ)Uᵀ`,
/// `Q = L·exp(S)⁻¹`, with `U` and `Λ^{1/2}` obtained from a one-sided Jacobi
/// SVD of `L` so that `Q` stays orthogonal to machine precision.
pub fn polar_decompose(l: &Mat3) -> Result<PolarDecomposition> {
    let det = l.determinant();
    if !det.is_finite() || det <= 0.0 {
        return domain(format!("polar decomposition needs det(L) > 0 (got {det})"));
    }
    polar_decompose_invertible(l)
}

/// Polar decomposition of any invertible matrix; `Q` carries the sign of
/// `det(L)`. `S` depends only on `LᵀL` and is therefore O(3)-invariant.
pub fn polar_decompose_invertible(l: &Mat3) -> Result<PolarDecomposition> {
    let (w, sigma, v) = jacobi_svd(l);
    if !(sigma[2] > 0.0) || !(sigma[2] / sigma[0] > 1e-15) {
        return domain("lattice matrix is singular");
    }
    let log_sigma = Mat3::from_diagonal(&sigma.map(f64::ln));
    let s = v * log_sigma * v.transpose();
    Ok(PolarDecomposition {
        rotation: w * v.transpose(),
        log: SymmetricLog::from_matrix(&s),
    })
}

/// `kᵢ = ⟨S,Bᵢ⟩_F / ⟨Bᵢ,Bᵢ⟩_F`.
pub fn k_from_symmetric(s: &SymmetricLog) -> KVector {
    let m = s.matrix();
    let mut k = [0.0; 6];
    for (i, ki) in k.iter_mut().enumerate() {
        *ki = frobenius(&m, &basis(i)) / BASIS_NORMS_SQ[i];
    }
    KVector(k)
}

/// `S = Σ kᵢ Bᵢ`.
pub fn symmetric_from_k(k: &KVector) -> SymmetricLog {
    let [k1, k2, k3, k4, k5, k6] = k.0;
    SymmetricLog([k4 + k5 + k6, -k4 + k5 + k6, -2.0 * k5 + k6, k1, k2, k3])
}

/// `exp(Σ kᵢ Bᵢ)`: the lattice in the canonical gauge `Q = I`.
pub fn lattice_from_k(k: &KVector) -> LatticeMatrix {
    LatticeMatrix(symmetric_from_k(k).exp())
}

/// Cell lengths (Å) and angles (degrees).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl LatticeParams {
    pub fn lengths(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn angles(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }
}

impl fmt::Display for LatticeParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "a={:.6} b={:.6} c={:.6} alpha={:.6} beta={:.6} gamma={:.6}",
            self.a, self.b, self.c, self.alpha, self.beta, self.gamma
        )
    }
}

fn angle_deg(u: &Vec3, v: &Vec3) -> f64 {
    (u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos().to_degrees()
}

pub fn params_from_lattice(l: &LatticeMatrix) -> LatticeParams {
    let m = l.matrix();
    let (l1, l2, l3) = (m.column(0).into_owned(), m.column(1).into_owned(), m.column(2).into_owned());
    LatticeParams {
        a: l1.norm(),
        b: l2.norm(),
        c: l3.norm(),
        alpha: angle_deg(&l2, &l3),
        beta: angle_deg(&l1, &l3),
        gamma: angle_deg(&l1, &l2),
    }
}

/// Builds the triangular cell `l₁ ∥ x`, `l₂` in the xy-plane.
pub fn lattice_from_params(p: &LatticeParams) -> Result<LatticeMatrix> {
    if !(p.a > 0.0 && p.b > 0.0 && p.c > 0.0) {
        return domain("lattice lengths must be positive");
    }
    for ang in p.angles() {
        if !(ang > 0.0 && ang < 180.0) {
            return domain(format!("lattice angle {ang} outside (0, 180)"));
        }
    }
    let (ca, cb, cg) = (p.alpha.to_radians().cos(), p.beta.to_radians().cos(), p.gamma.to_radians().cos());
    let sg = p.gamma.to_radians().sin();
    let cx = p.c * cb;
    let cy = p.c * (ca - cb * cg) / sg;
    let cz2 = p.c * p.c - cx * cx - cy * cy;
    if !(cz2 > 0.0) {
        return domain("lattice angles do not form a valid cell");
    }
    let m = Mat3::new(p.a, p.b * cg, cx, 0.0, p.b * sg, cy, 0.0, 0.0, cz2.sqrt());
    LatticeMatrix::new(m)
}

/// The six crystal families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrystalFamily {
    Triclinic,
    Monoclinic,
    Orthorhombic,
    Tetragonal,
    Hexagonal,
    Cubic,
}

impl CrystalFamily {
    pub const ALL: [CrystalFamily; 6] = [
        CrystalFamily::Triclinic,
        CrystalFamily::Monoclinic,
        CrystalFamily::Orthorhombic,
        CrystalFamily::Tetragonal,
        CrystalFamily::Hexagonal,
        CrystalFamily::Cubic,
    ];

    pub fn from_group(number: u16) -> Result<Self> {
        Ok(match number {
            1..=2 => Self::Triclinic,
            3..=15 => Self::Monoclinic,
            16..=74 => Self::Orthorhombic,
            75..=142 => Self::Tetragonal,
            143..=194 => Self::Hexagonal,
            195..=230 => Self::Cubic,
            _ => return domain(format!("space group number {number} outside 1..=230")),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Triclinic => "triclinic",
            Self::Monoclinic => "monoclinic",
            Self::Orthorhombic => "orthorhombic",
            Self::Tetragonal => "tetragonal",
            Self::Hexagonal => "hexagonal",
            Self::Cubic => "cubic",
        }
    }

    pub fn mask(&self) -> FamilyMask {
        let (free, fixed0) = match self {
            Self::Triclinic => ([true; 6], 0.0),
            Self::Monoclinic => ([false, true, false, true, true, true], 0.0),
            Self::Orthorhombic => ([false, false, false, true, true, true], 0.0),
            Self::Tetragonal => ([false, false, false, false, true, true], 0.0),
            Self::Hexagonal => ([false, false, false, false, true, true], HEXAGONAL_K1),
            Self::Cubic => ([false, false, false, false, false, true], 0.0),
        };
        let mut fixed = [0.0; 6];
        fixed[0] = fixed0;
        FamilyMask { family: *self, free, fixed }
    }
}

impl fmt::Display for CrystalFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CrystalFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "triclinic" => Ok(Self::Triclinic),
            "monoclinic" => Ok(Self::Monoclinic),
            "orthorhombic" => Ok(Self::Orthorhombic),
            "tetragonal" => Ok(Self::Tetragonal),
            "hexagonal" | "trigonal" => Ok(Self::Hexagonal),
            "cubic" => Ok(Self::Cubic),
            other => domain(format!("unknown crystal family `{other}`")),
        }
    }
}

/// Which k-coefficients are free for a family, and the values of the others.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FamilyMask {
    pub family: CrystalFamily,
    pub free: [bool; 6],
    pub fixed: [f64; 6],
}

impl FamilyMask {
    /// The mask as 0/1 weights.
    pub fn weights(&self) -> [f64; 6] {
        self.free.map(|f| if f { 1.0 } else { 0.0 })
    }

    /// The 0/1 mask as tabulated per family: 1 unless the coefficient is
    /// constrained to zero. Differs from [`Self::weights`] only for the
    /// pinned hexagonal k₁.
    pub fn table_mask(&self) -> [f64; 6] {
        [0, 1, 2, 3, 4, 5].map(|i| if self.free[i] || self.fixed[i] != 0.0 { 1.0 } else { 0.0 })
    }

    pub fn free_count(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }

    /// True when every constrained coefficient of `k` is within `tol` of its fixed value.
    pub fn admits(&self, k: &KVector, tol: f64) -> bool {
        (0..6).all(|i| self.free[i] || (k[i] - self.fixed[i]).abs() <= tol)
    }
}

pub fn family_mask(group_number: u16) -> Result<FamilyMask> {
    Ok(CrystalFamily::from_group(group_number)?.mask())
}

/// Copies free coefficients and overwrites constrained ones with their fixed values.
pub fn project_k(k: &KVector, mask: &FamilyMask) -> KVector {
    let mut out = *k;
    for i in 0..6 {
        if !mask.free[i] {
            out[i] = mask.fixed[i];
        }
    }
    out
}

/// Tolerances for lattice-shape checks.
#[derive(Clone, Copy, Debug)]
pub struct ShapeTolerance {
    pub angle_deg: f64,
    pub rel_length: f64,
}

impl Default for ShapeTolerance {
    fn default() -> Self {
        Self { angle_deg: 1e-8, rel_length: 1e-10 }
    }
}

/// Whether the cell shape satisfies the family's length/angle relations.
pub fn lattice_params_check(l: &LatticeMatrix, family: CrystalFamily, tol: ShapeTolerance) -> bool {
    let p = params_from_lattice(l);
    let ang = |x: f64, target: f64| (x - target).abs() <= tol.angle_deg;
    let len = |x: f64, y: f64| (x - y).abs() <= tol.rel_length * x.max(y);
    match family {
        CrystalFamily::Triclinic => true,
        CrystalFamily::Monoclinic => ang(p.alpha, 90.0) && ang(p.gamma, 90.0),
        CrystalFamily::Orthorhombic => ang(p.alpha, 90.0) && ang(p.beta, 90.0) && ang(p.gamma, 90.0),
        CrystalFamily::Tetragonal => {
            ang(p.alpha, 90.0) && ang(p.beta, 90.0) && ang(p.gamma, 90.0) && len(p.a, p.b)
        }
        CrystalFamily::Hexagonal => {
            ang(p.alpha, 90.0) && ang(p.beta, 90.0) && ang(p.gamma, 120.0) && len(p.a, p.b)
        }
        CrystalFamily::Cubic => {
            ang(p.alpha, 90.0)
                && ang(p.beta, 90.0)
                && ang(p.gamma, 90.0)
                && len(p.a, p.b)
                && len(p.b, p.c)
        }
    }
}

/// Families whose constrained k-coefficients `k` satisfies within `tol`.
pub fn compatible_families(k: &KVector, tol: f64) -> Vec<CrystalFamily> {
    CrystalFamily::ALL.into_iter().filter(|f| f.mask().admits(k, tol)).collect()
}
