//! Message-passing score network over the fully connected graph of expanded
//! atoms, with Fourier embeddings of relative fractional coordinates.

mod net;
mod train;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elements::type_count;
use crate::error::{domain, io_error, Error, Result};

pub use net::{fourier_embed, time_embed, Cache};
pub use train::{smoothed, train, LrSchedule, Optimizer, OptimizerKind, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub layers: usize,
    pub hidden: usize,
    /// Fourier bases per coordinate component (even).
    pub fourier: usize,
    /// Width of the type vectors.
    pub types: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { layers: 3, hidden: 64, fourier: 32, types: type_count() }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("model.layers must be at least 1".into()));
        }
        if self.hidden < 4 || self.hidden % 2 != 0 {
            return Err(Error::Config(format!("model.hidden must be even and ≥ 4, got {}", self.hidden)));
        }
        if self.fourier < 2 || self.fourier % 2 != 0 {
            return Err(Error::Config(format!("model.fourier must be even and ≥ 2, got {}", self.fourier)));
        }
        if self.types == 0 {
            return Err(Error::Config("model.types must be positive".into()));
        }
        Ok(())
    }

    /// `(name, out, in)` for every linear map, in storage order.
    fn linears(&self) -> Vec<(String, usize, usize)> {
        let (d, k) = (self.hidden, self.fourier);
        let mut v = vec![("atom".to_string(), d, self.types), ("input".to_string(), d, 2 * d)];
        for l in 0..self.layers {
            v.push((format!("layer{l}.msg1"), d, 2 * d + 6 + 3 * k));
            v.push((format!("layer{l}.msg2"), d, d));
            v.push((format!("layer{l}.upd1"), d, 2 * d));
            v.push((format!("layer{l}.upd2"), d, d));
        }
        v.push(("head_k".to_string(), 6, d));
        v.push(("head_f".to_string(), 3, d));
        v.push(("head_a".to_string(), self.types, d));
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Network configuration and weights. Each linear map is stored as a weight
/// tensor `(out, in)` followed by its bias `(out)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Denoiser {
    pub config: ModelConfig,
    pub seed: u64,
    pub tensors: Vec<Tensor>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    seed: u64,
    config: ModelConfig,
    tensors: Vec<Tensor>,
}

const FORMAT: &str = "wyckdiff-denoiser";
const VERSION: u32 = 1;

impl Denoiser {
    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = Vec::new();
        for (name, out, inp) in config.linears() {
            let bound = 1.0 / (inp as f64).sqrt();
            let data = (0..out * inp).map(|_| rng.random_range(-bound..bound)).collect();
            tensors.push(Tensor { name: format!("{name}.w"), shape: vec![out, inp], data });
            tensors.push(Tensor { name: format!("{name}.b"), shape: vec![out], data: vec![0.0; out] });
        }
        Ok(Self { config, seed, tensors })
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    /// Zero-filled buffers shaped like the weights.
    pub fn zero_grad(&self) -> Vec<Vec<f64>> {
        self.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect()
    }

    fn check_shapes(&self) -> Result<()> {
        let lin = self.config.linears();
        if self.tensors.len() != 2 * lin.len() {
            return domain(format!("expected {} tensors, found {}", 2 * lin.len(), self.tensors.len()));
        }
        for (i, (name, out, inp)) in lin.into_iter().enumerate() {
            let (w, b) = (&self.tensors[2 * i], &self.tensors[2 * i + 1]);
            if w.name != format!("{name}.w") || b.name != format!("{name}.b") {
                return domain(format!("tensor {} / {} out of order, expected {name}", w.name, b.name));
            }
            if w.shape != [out, inp] || b.shape != [out] || w.data.len() != out * inp || b.data.len() != out {
                return domain(format!("tensor {name} has wrong shape"));
            }
            if w.data.iter().chain(&b.data).any(|x| !x.is_finite()) {
                return domain(format!("tensor {name} has non-finite entries"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            seed: self.seed,
            config: self.config,
            tensors: self.tensors.clone(),
        };
        Ok(serde_json::to_string(&ck)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != FORMAT {
            return domain(format!("not a denoiser checkpoint (format {:?})", ck.format));
        }
        if ck.version != VERSION {
            return domain(format!("unsupported checkpoint version {}", ck.version));
        }
        ck.config.validate()?;
        let model = Self { config: ck.config, seed: ck.seed, tensors: ck.tensors };
        model.check_shapes()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(io_error(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(io_error(path))?)
    }
}
