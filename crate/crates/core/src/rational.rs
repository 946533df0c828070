//! Exact rational arithmetic for validating space-group tables.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rat {
    num: i64,
    den: i64,
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Rat {
    pub const ZERO: Rat = Rat { num: 0, den: 1 };
    pub const ONE: Rat = Rat { num: 1, den: 1 };

    pub fn new(num: i64, den: i64) -> Option<Rat> {
        if den == 0 {
            return None;
        }
        let g = gcd(num, den).max(1);
        let s = den.signum();
        Some(Rat { num: s * num / g, den: s * den / g })
    }

    pub fn int(n: i64) -> Rat {
        Rat { num: n, den: 1 }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    /// Fractional part in `[0, 1)`.
    pub fn fract(&self) -> Rat {
        Rat { num: self.num.rem_euclid(self.den), den: self.den }
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Parses `p/q` or a plain integer.
    pub fn parse(s: &str) -> Option<Rat> {
        match s.split_once('/') {
            Some((p, q)) => Rat::new(p.trim().parse().ok()?, q.trim().parse().ok()?),
            None => Some(Rat::int(s.trim().parse().ok()?)),
        }
    }
}

impl Add for Rat {
    type Output = Rat;
    fn add(self, o: Rat) -> Rat {
        Rat::new(self.num * o.den + o.num * self.den, self.den * o.den).expect("nonzero denominator")
    }
}

impl Sub for Rat {
    type Output = Rat;
    fn sub(self, o: Rat) -> Rat {
        self + (-o)
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat { num: -self.num, den: self.den }
    }
}

impl Mul for Rat {
    type Output = Rat;
    fn mul(self, o: Rat) -> Rat {
        Rat::new(self.num * o.num, self.den * o.den).expect("nonzero denominator")
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// An affine map `x ↦ R x + t` with rational entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ExactAffine {
    pub r: [[Rat; 3]; 3],
    pub t: [Rat; 3],
}

impl ExactAffine {
    pub fn identity() -> Self {
        let mut r = [[Rat::ZERO; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            row[i] = Rat::ONE;
        }
        Self { r, t: [Rat::ZERO; 3] }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        let mut r = [[Rat::ZERO; 3]; 3];
        let mut t = self.t;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    r[i][j] = r[i][j] + self.r[i][k] * other.r[k][j];
                }
                t[i] = t[i] + self.r[i][j] * other.t[j];
            }
        }
        Self { r, t }
    }

    /// Same map with the translation reduced mod 1.
    pub fn reduced(&self) -> Self {
        Self { r: self.r, t: self.t.map(|x| x.fract()) }
    }

    pub fn det(&self) -> Rat {
        let r = &self.r;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }
}
