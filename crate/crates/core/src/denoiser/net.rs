use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::Denoiser;
use crate::crystal::wrap_centered;
use crate::diffusion::{ModelInput, RawOutput, ScoreModel};
use crate::error::{domain, Result};
use crate::linalg::Vec3;

/// `ψ(f)[c·K + k]`: `sin(2π m f_c)` for `k = 2m`, `cos(2π m f_c)` for `k = 2m+1`.
pub fn fourier_embed(f: &Vec3, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * k);
    for c in 0..3 {
        for m in 0..k / 2 {
            let x = 2.0 * std::f64::consts::PI * m as f64 * f[c];
            out.push(x.sin());
            out.push(x.cos());
        }
    }
    out
}

/// Sinusoidal embedding of the step index: `[sin(t ωᵢ)…, cos(t ωᵢ)…]`.
pub fn time_embed(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let scale = if half > 1 { (10000f64).ln() / (half - 1) as f64 } else { 0.0 };
    let freqs: Vec<f64> = (0..half).map(|i| (-(i as f64) * scale).exp() * t as f64).collect();
    freqs.iter().map(|x| x.sin()).chain(freqs.iter().map(|x| x.cos())).collect()
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

fn silu_grad(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

struct LayerCache {
    h_in: Array2<f64>,
    p1: Array2<f64>,
    z1: Array2<f64>,
    p2: Array2<f64>,
    upd_in: Array2<f64>,
    q1: Array2<f64>,
    z3: Array2<f64>,
    q2: Array2<f64>,
}

/// Activations kept from a forward pass for the backward pass.
pub struct Cache {
    n: usize,
    x: Array2<f64>,
    k: Array1<f64>,
    psi: Array2<f64>,
    in_cat: Array2<f64>,
    pre_in: Array2<f64>,
    layers: Vec<LayerCache>,
    h_out: Array2<f64>,
    hbar: Array1<f64>,
}

impl Denoiser {
    fn w(&self, lin: usize) -> ArrayView2<'_, f64> {
        let t = &self.tensors[2 * lin];
        ArrayView2::from_shape((t.shape[0], t.shape[1]), &t.data).expect("weight shape")
    }

    fn b(&self, lin: usize) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.tensors[2 * lin + 1].data[..])
    }

    fn affine(&self, x: &Array2<f64>, lin: usize) -> Array2<f64> {
        x.dot(&self.w(lin).t()) + &self.b(lin)
    }

    fn head_index(&self) -> usize {
        2 + 4 * self.config.layers
    }

    /// Runs the network on the expanded structure.
    pub fn forward(&self, input: &ModelInput) -> Result<(RawOutput, Cache)> {
        let cfg = &self.config;
        let (d, kf) = (cfg.hidden, cfg.fourier);
        let n = input.frac.len();
        if n == 0 {
            return domain("denoiser input has no atoms");
        }
        if input.types.len() != n {
            return domain(format!("{} type rows for {n} atoms", input.types.len()));
        }
        if let Some(row) = input.types.iter().find(|r| r.len() != cfg.types) {
            return domain(format!("type vector of width {}, model expects {}", row.len(), cfg.types));
        }

        let x = Array2::from_shape_fn((n, cfg.types), |(i, j)| input.types[i][j]);
        let k = Array1::from_iter(input.k.0);
        let mut psi = Array2::zeros((n * n, 3 * kf));
        for i in 0..n {
            for j in 0..n {
                let rel = (input.frac[j] - input.frac[i]).map(wrap_centered);
                psi.row_mut(i * n + j).assign(&Array1::from(fourier_embed(&rel, kf)));
            }
        }

        let h0 = self.affine(&x, 0);
        let temb = Array1::from(time_embed(input.t, d));
        let mut in_cat = Array2::zeros((n, 2 * d));
        in_cat.slice_mut(s![.., ..d]).assign(&h0);
        for mut row in in_cat.slice_mut(s![.., d..]).rows_mut() {
            row.assign(&temb);
        }
        let pre_in = self.affine(&in_cat, 1);
        let mut h = pre_in.mapv(silu);

        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let base = 2 + 4 * l;
            let w1 = self.w(base);
            let a = h.dot(&w1.slice(s![.., ..d]).t());
            let b = h.dot(&w1.slice(s![.., d..2 * d]).t());
            let c = w1.slice(s![.., 2 * d..2 * d + 6]).dot(&k) + &self.b(base);
            let mut p1 = psi.dot(&w1.slice(s![.., 2 * d + 6..]).t());
            for i in 0..n {
                for j in 0..n {
                    let mut row = p1.row_mut(i * n + j);
                    row += &a.row(i);
                    row += &b.row(j);
                    row += &c;
                }
            }
            let z1 = p1.mapv(silu);
            let p2 = self.affine(&z1, base + 1);
            let m = p2.mapv(silu);
            let mut agg = Array2::zeros((n, d));
            for i in 0..n {
                agg.row_mut(i).assign(&m.slice(s![i * n..(i + 1) * n, ..]).sum_axis(Axis(0)));
            }
            let mut upd_in = Array2::zeros((n, 2 * d));
            upd_in.slice_mut(s![.., ..d]).assign(&h);
            upd_in.slice_mut(s![.., d..]).assign(&agg);
            let q1 = self.affine(&upd_in, base + 2);
            let z3 = q1.mapv(silu);
            let q2 = self.affine(&z3, base + 3);
            let h_next = &h + &q2.mapv(silu);
            layers.push(LayerCache { h_in: h, p1, z1, p2, upd_in, q1, z3, q2 });
            h = h_next;
        }

        let hi = self.head_index();
        let hbar = h.mean_axis(Axis(0)).expect("non-empty");
        let ek = self.w(hi).dot(&hbar) + &self.b(hi);
        let ef = self.affine(&h, hi + 1);
        let ea = self.affine(&h, hi + 2);

        let out = RawOutput {
            eps_k: [0, 1, 2, 3, 4, 5].map(|i| ek[i]),
            eps_f: (0..n).map(|i| Vec3::new(ef[[i, 0]], ef[[i, 1]], ef[[i, 2]])).collect(),
            eps_a: ea.rows().into_iter().map(|r| r.to_vec()).collect(),
        };
        let cache = Cache { n, x, k, psi, in_cat, pre_in, layers, h_out: h, hbar };
        Ok((out, cache))
    }

    /// Gradients of a scalar loss with respect to every weight, given the
    /// loss gradient with respect to the raw outputs.
    pub fn backward(&self, cache: &Cache, grad: &RawOutput) -> Vec<Vec<f64>> {
        let cfg = &self.config;
        let (d, n) = (cfg.hidden, cache.n);
        let mut grads: Vec<Array2<f64>> = Vec::with_capacity(self.tensors.len() / 2);
        let mut gbias: Vec<Array1<f64>> = Vec::with_capacity(self.tensors.len() / 2);
        for t in self.tensors.chunks(2) {
            grads.push(Array2::zeros((t[0].shape[0], t[0].shape[1])));
            gbias.push(Array1::zeros(t[1].shape[0]));
        }

        let hi = self.head_index();
        let dk = Array1::from_iter(grad.eps_k);
        let df = Array2::from_shape_fn((n, 3), |(i, j)| grad.eps_f[i][j]);
        let da = Array2::from_shape_fn((n, cfg.types), |(i, j)| grad.eps_a[i][j]);

        grads[hi] = outer(&dk, &cache.hbar);
        gbias[hi] = dk.clone();
        grads[hi + 1] = df.t().dot(&cache.h_out);
        gbias[hi + 1] = df.sum_axis(Axis(0));
        grads[hi + 2] = da.t().dot(&cache.h_out);
        gbias[hi + 2] = da.sum_axis(Axis(0));

        let mut dh = df.dot(&self.w(hi + 1)) + da.dot(&self.w(hi + 2));
        let dhbar = self.w(hi).t().dot(&dk) / n as f64;
        for mut row in dh.rows_mut() {
            row += &dhbar;
        }

        for l in (0..cfg.layers).rev() {
            let base = 2 + 4 * l;
            let lc = &cache.layers[l];

            let dq2 = &dh * &lc.q2.mapv(silu_grad);
            grads[base + 3] = dq2.t().dot(&lc.z3);
            gbias[base + 3] = dq2.sum_axis(Axis(0));
            let dq1 = dq2.dot(&self.w(base + 3)) * lc.q1.mapv(silu_grad);
            grads[base + 2] = dq1.t().dot(&lc.upd_in);
            gbias[base + 2] = dq1.sum_axis(Axis(0));
            let dupd = dq1.dot(&self.w(base + 2));
            let mut dh_in = &dh + &dupd.slice(s![.., ..d]);
            let dagg = dupd.slice(s![.., d..]);

            let mut dp2 = lc.p2.mapv(silu_grad);
            for i in 0..n {
                for j in 0..n {
                    let mut row = dp2.row_mut(i * n + j);
                    row *= &dagg.row(i);
                }
            }
            grads[base + 1] = dp2.t().dot(&lc.z1);
            gbias[base + 1] = dp2.sum_axis(Axis(0));
            let dp1 = dp2.dot(&self.w(base + 1)) * lc.p1.mapv(silu_grad);

            let mut si = Array2::zeros((n, d));
            let mut tj = Array2::zeros((n, d));
            for i in 0..n {
                for j in 0..n {
                    let row = dp1.row(i * n + j);
                    let mut r = si.row_mut(i);
                    r += &row;
                    let mut r = tj.row_mut(j);
                    r += &row;
                }
            }
            let total = si.sum_axis(Axis(0));
            let mut gw1 = Array2::zeros((d, 2 * d + 6 + 3 * cfg.fourier));
            gw1.slice_mut(s![.., ..d]).assign(&si.t().dot(&lc.h_in));
            gw1.slice_mut(s![.., d..2 * d]).assign(&tj.t().dot(&lc.h_in));
            gw1.slice_mut(s![.., 2 * d..2 * d + 6]).assign(&outer(&total, &cache.k));
            gw1.slice_mut(s![.., 2 * d + 6..]).assign(&dp1.t().dot(&cache.psi));
            grads[base] = gw1;
            gbias[base] = total;
            let w1 = self.w(base);
            dh_in = dh_in + si.dot(&w1.slice(s![.., ..d])) + tj.dot(&w1.slice(s![.., d..2 * d]));
            dh = dh_in;
        }

        let dpre = dh * cache.pre_in.mapv(silu_grad);
        grads[1] = dpre.t().dot(&cache.in_cat);
        gbias[1] = dpre.sum_axis(Axis(0));
        let dh0 = dpre.dot(&self.w(1)).slice(s![.., ..d]).to_owned();
        grads[0] = dh0.t().dot(&cache.x);
        gbias[0] = dh0.sum_axis(Axis(0));

        grads
            .into_iter()
            .zip(gbias)
            .flat_map(|(w, b)| [w.into_iter().collect::<Vec<f64>>(), b.to_vec()])
            .collect()
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

impl ScoreModel for Denoiser {
    fn predict(&self, input: &ModelInput) -> RawOutput {
        match self.forward(input) {
            Ok((out, _)) => out,
            Err(e) => panic!("denoiser: {e}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_channels() {
        let z = fourier_embed(&Vec3::zeros(), 4);
        assert_eq!(z, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        let q = fourier_embed(&Vec3::new(0.25, 0.25, 0.25), 4);
        let want = [0.0, 1.0, 1.0, 0.0];
        for c in 0..3 {
            for k in 0..4 {
                assert!((q[c * 4 + k] - want[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn time_embedding_shape() {
        let e = time_embed(0, 8);
        assert_eq!(e, vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(time_embed(500, 64).iter().all(|x| x.abs() <= 1.0));
    }
}
