//! One-dimensional wrapped normal on the unit circle, truncated to images
//! `n ∈ [−n_img, n_img]`, and the Monte-Carlo score-norm weights λ.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::RwLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::crystal::wrap_centered;
use crate::error::{io_error, Result};

/// `log Σₙ exp(−(x+n)²/(2s²)) − ½ log(2πs²)`.
pub fn log_density(x: f64, s: f64, n_img: usize) -> f64 {
    let d = wrap_centered(x);
    let n_img = n_img as i64;
    let terms: Vec<f64> = (-n_img..=n_img).map(|n| -(d + n as f64).powi(2) / (2.0 * s * s)).collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|e| (e - m).exp()).sum::<f64>().ln() - 0.5 * (2.0 * std::f64::consts::PI * s * s).ln()
}

/// `d/dx log N_w(x; 0, s²)`. Depends on `x` only through its wrapped
/// representative, so it is exactly periodic whenever `x + 1` is exact.
pub fn score(x: f64, s: f64, n_img: usize) -> f64 {
    let d = wrap_centered(x);
    let n_img = n_img as i64;
    let inv = 1.0 / (s * s);
    let mut m = f64::NEG_INFINITY;
    for n in -n_img..=n_img {
        m = m.max(-(d + n as f64).powi(2) * 0.5 * inv);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for n in -n_img..=n_img {
        let y = d + n as f64;
        let w = (-(y * y) * 0.5 * inv - m).exp();
        num += -y * inv * w;
        den += w;
    }
    num / den
}

/// Cached `λ(t, c²) = 1 / E[score(x; σ_t c)²]`, `x ~ N_w(0, σ_t² c²)`, keyed by
/// the per-parameter variance scale `c²`.
#[derive(Debug)]
pub struct LambdaTable {
    sigma: Vec<f64>,
    n_images: usize,
    samples: usize,
    seed: u64,
    tables: RwLock<BTreeMap<u64, Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct LambdaFile {
    version: u32,
    samples: usize,
    seed: u64,
    n_images: usize,
    sigma: Vec<f64>,
    tables: BTreeMap<String, Vec<f64>>,
}

impl Clone for LambdaTable {
    fn clone(&self) -> Self {
        Self {
            sigma: self.sigma.clone(),
            n_images: self.n_images,
            samples: self.samples,
            seed: self.seed,
            tables: RwLock::new(self.tables.read().expect("lambda lock").clone()),
        }
    }
}

impl LambdaTable {
    pub fn new(sigma: Vec<f64>, n_images: usize, samples: usize, seed: u64) -> Self {
        Self { sigma, n_images, samples, seed, tables: RwLock::new(BTreeMap::new()) }
    }

    fn compute(&self, scale_sq: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let z: Vec<f64> = (0..self.samples).map(|_| StandardNormal.sample(&mut rng)).collect();
        let c = scale_sq.sqrt();
        self.sigma
            .iter()
            .map(|&sig| {
                if sig == 0.0 {
                    return 0.0;
                }
                let s = sig * c;
                let mean_sq = z.iter().map(|&zi| score(s * zi, s, self.n_images).powi(2)).sum::<f64>()
                    / self.samples as f64;
                1.0 / mean_sq
            })
            .collect()
    }

    /// Makes sure the table for `scale_sq` exists.
    pub fn ensure(&self, scale_sq: f64) {
        let key = scale_sq.to_bits();
        if self.tables.read().expect("lambda lock").contains_key(&key) {
            return;
        }
        let table = self.compute(scale_sq);
        self.tables.write().expect("lambda lock").entry(key).or_insert(table);
    }

    /// λ at step `t` for variance scale `c²`; computes the table on first use.
    pub fn get(&self, t: usize, scale_sq: f64) -> f64 {
        self.ensure(scale_sq);
        self.tables.read().expect("lambda lock")[&scale_sq.to_bits()][t]
    }

    pub fn cached_scales(&self) -> Vec<f64> {
        self.tables.read().expect("lambda lock").keys().map(|&b| f64::from_bits(b)).collect()
    }

    /// Writes the cache as JSON.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tables = self.tables.read().expect("lambda lock");
        let file = LambdaFile {
            version: 1,
            samples: self.samples,
            seed: self.seed,
            n_images: self.n_images,
            sigma: self.sigma.clone(),
            tables: tables.iter().map(|(k, v)| (f64::from_bits(*k).to_string(), v.clone())).collect(),
        };
        std::fs::write(path, serde_json::to_string(&file)?).map_err(io_error(path))
    }

    /// Loads cached tables from `path` if it was produced with the same
    /// settings; otherwise leaves the cache untouched. Returns whether it loaded.
    pub fn load_matching(&self, path: &Path) -> Result<bool> {
        if !path.exists() {
            return Ok(false);
        }
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        let file: LambdaFile = serde_json::from_str(&text)?;
        if file.samples != self.samples
            || file.seed != self.seed
            || file.n_images != self.n_images
            || file.sigma != self.sigma
        {
            return Ok(false);
        }
        let mut tables = self.tables.write().expect("lambda lock");
        for (k, v) in file.tables {
            if let Ok(scale) = k.parse::<f64>() {
                if v.len() == self.sigma.len() {
                    tables.insert(scale.to_bits(), v);
                }
            }
        }
        Ok(true)
    }
}
