//! Two-layer 1-D convolutional classifier over window feature maps.
//!
//! Input is a `bands x frames` map with bands as channels. Layers: valid
//! convolution (ReLU) -> max-pool 2 -> valid convolution (ReLU) -> max-pool 2
//! -> dropout -> dense -> softmax over the three classes. Training minimizes
//! cross-entropy with Adam on shuffled mini-batches; every random draw comes
//! from one seeded stream, so a run is reproducible bit for bit.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vote::TidalClass;
use super::windows::WindowConfig;
use crate::error::{Error, Result};
use crate::seed;

pub const CNN_VERSION: &str = "spiro-cnn/1";
const CLASSES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub filters1: usize,
    pub filters2: usize,
    pub kernel: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            filters1: 8,
            filters2: 16,
            kernel: 3,
            dropout: 0.25,
            epochs: 30,
            batch_size: 16,
            learning_rate: 2e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Shape {
    c: usize,
    t: usize,
    f1: usize,
    f2: usize,
    k: usize,
    t1: usize,
    p1: usize,
    t2: usize,
    p2: usize,
}

impl Shape {
    fn new(c: usize, t: usize, cfg: &CnnConfig) -> Result<Self> {
        let k = cfg.kernel;
        if k == 0 || cfg.filters1 == 0 || cfg.filters2 == 0 {
            return Err(Error::invalid("kernel and filter counts must be positive"));
        }
        let t1 = (t + 1).checked_sub(k).unwrap_or(0);
        let p1 = t1 / 2;
        let t2 = (p1 + 1).checked_sub(k).unwrap_or(0);
        let p2 = t2 / 2;
        if p2 == 0 {
            return Err(Error::invalid(format!("{t} frames are too few for the network")));
        }
        Ok(Self {
            c,
            t,
            f1: cfg.filters1,
            f2: cfg.filters2,
            k,
            t1,
            p1,
            t2,
            p2,
        })
    }

    fn flat(&self) -> usize {
        self.f2 * self.p2
    }

    // Offsets of w1, b1, w2, b2, wd, bd in the flat parameter vector.
    fn offsets(&self) -> [usize; 7] {
        let w1 = 0;
        let b1 = w1 + self.f1 * self.c * self.k;
        let w2 = b1 + self.f1;
        let b2 = w2 + self.f2 * self.f1 * self.k;
        let wd = b2 + self.f2;
        let bd = wd + CLASSES * self.flat();
        [w1, b1, w2, b2, wd, bd, bd + CLASSES]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub version: String,
    pub window: WindowConfig,
    pub sample_rate_hz: u32,
    pub config: CnnConfig,
    shape: Shape,
    /// Per-band mean and standard deviation of the training maps.
    pub band_mean: Vec<f64>,
    pub band_std: Vec<f64>,
    params: Vec<f64>,
    pub train_seed: u64,
}

struct Trace {
    x: Vec<f64>,
    a1: Vec<f64>,
    arg1: Vec<usize>,
    p1: Vec<f64>,
    a2: Vec<f64>,
    arg2: Vec<usize>,
    d: Vec<f64>,
    mask: Vec<f64>,
    prob: [f64; CLASSES],
}

fn softmax(z: &[f64; CLASSES]) -> [f64; CLASSES] {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

fn conv(x: &[f64], cin: usize, tin: usize, w: &[f64], b: &[f64], cout: usize, k: usize) -> Vec<f64> {
    let tout = tin + 1 - k;
    let mut out = vec![0.0; cout * tout];
    for f in 0..cout {
        let row = &mut out[f * tout..(f + 1) * tout];
        row.iter_mut().for_each(|v| *v = b[f]);
        for c in 0..cin {
            let xc = &x[c * tin..(c + 1) * tin];
            for j in 0..k {
                let wv = w[(f * cin + c) * k + j];
                for (t, o) in row.iter_mut().enumerate() {
                    *o += wv * xc[t + j];
                }
            }
        }
    }
    out
}

fn pool(a: &[f64], ch: usize, tin: usize, tout: usize) -> (Vec<f64>, Vec<usize>) {
    let mut out = vec![0.0; ch * tout];
    let mut arg = vec![0; ch * tout];
    for f in 0..ch {
        for u in 0..tout {
            let i = f * tin + 2 * u;
            // ReLU folded in: pooled value is max(0, a).
            let (v, at) = if a[i + 1] > a[i] { (a[i + 1], i + 1) } else { (a[i], i) };
            out[f * tout + u] = v.max(0.0);
            arg[f * tout + u] = at;
        }
    }
    (out, arg)
}

impl CnnModel {
    fn normalize(&self, map: &[f64]) -> Vec<f64> {
        let t = self.shape.t;
        map.iter()
            .enumerate()
            .map(|(i, v)| (v - self.band_mean[i / t]) / self.band_std[i / t])
            .collect()
    }

    fn forward<R: Rng>(&self, x: Vec<f64>, dropout: Option<&mut R>) -> Trace {
        let s = self.shape;
        let [w1, b1, w2, b2, wd, bd, end] = s.offsets();
        let p = &self.params;
        let a1 = conv(&x, s.c, s.t, &p[w1..b1], &p[b1..w2], s.f1, s.k);
        let (p1, arg1) = pool(&a1, s.f1, s.t1, s.p1);
        let a2 = conv(&p1, s.f1, s.p1, &p[w2..b2], &p[b2..wd], s.f2, s.k);
        let (p2, arg2) = pool(&a2, s.f2, s.t2, s.p2);
        let mask: Vec<f64> = match dropout {
            Some(rng) => {
                let keep = 1.0 - self.config.dropout;
                (0..p2.len())
                    .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect()
            }
            None => vec![1.0; p2.len()],
        };
        let d: Vec<f64> = p2.iter().zip(&mask).map(|(a, m)| a * m).collect();
        let flat = s.flat();
        let mut z = [0.0; CLASSES];
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = p[bd + j]
                + p[wd + j * flat..wd + (j + 1) * flat]
                    .iter()
                    .zip(&d)
                    .map(|(w, v)| w * v)
                    .sum::<f64>();
        }
        debug_assert_eq!(end, p.len());
        Trace {
            x,
            a1,
            arg1,
            p1,
            a2,
            arg2,
            d,
            mask,
            prob: softmax(&z),
        }
    }

    /// Adds the cross-entropy gradient of one example to `g`.
    fn backward(&self, tr: &Trace, label: usize, g: &mut [f64]) {
        let s = self.shape;
        let [w1, b1, w2, b2, wd, bd, _] = s.offsets();
        let p = &self.params;
        let flat = s.flat();
        let mut dz = tr.prob;
        dz[label] -= 1.0;
        let mut dd = vec![0.0; flat];
        for j in 0..CLASSES {
            g[bd + j] += dz[j];
            for i in 0..flat {
                g[wd + j * flat + i] += dz[j] * tr.d[i];
                dd[i] += p[wd + j * flat + i] * dz[j];
            }
        }
        let mut da2 = vec![0.0; s.f2 * s.t2];
        for i in 0..flat {
            let at = tr.arg2[i];
            if tr.a2[at] > 0.0 {
                da2[at] += dd[i] * tr.mask[i];
            }
        }
        let mut dp1 = vec![0.0; s.f1 * s.p1];
        for gch in 0..s.f2 {
            let row = &da2[gch * s.t2..(gch + 1) * s.t2];
            g[b2 + gch] += row.iter().sum::<f64>();
            for f in 0..s.f1 {
                let xin = &tr.p1[f * s.p1..(f + 1) * s.p1];
                for j in 0..s.k {
                    let wi = w2 + (gch * s.f1 + f) * s.k + j;
                    let wv = p[wi];
                    let mut acc = 0.0;
                    for (t, &dv) in row.iter().enumerate() {
                        acc += dv * xin[t + j];
                        dp1[f * s.p1 + t + j] += wv * dv;
                    }
                    g[wi] += acc;
                }
            }
        }
        let mut da1 = vec![0.0; s.f1 * s.t1];
        for (i, &dv) in dp1.iter().enumerate() {
            let at = tr.arg1[i];
            if tr.a1[at] > 0.0 {
                da1[at] += dv;
            }
        }
        for f in 0..s.f1 {
            let row = &da1[f * s.t1..(f + 1) * s.t1];
            g[b1 + f] += row.iter().sum::<f64>();
            for c in 0..s.c {
                let xin = &tr.x[c * s.t..(c + 1) * s.t];
                for j in 0..s.k {
                    g[w1 + (f * s.c + c) * s.k + j] +=
                        row.iter().enumerate().map(|(t, dv)| dv * xin[t + j]).sum::<f64>();
                }
            }
        }
    }

    /// Class probabilities of one raw (unnormalized) feature map.
    pub fn probabilities(&self, map: &[f64]) -> Result<[f64; CLASSES]> {
        if map.len() != self.shape.c * self.shape.t {
            return Err(Error::SchemaError(format!(
                "feature map has {} values, model expects {}",
                map.len(),
                self.shape.c * self.shape.t
            )));
        }
        Ok(self.forward::<rand_chacha::ChaCha8Rng>(self.normalize(map), None).prob)
    }

    pub fn predict(&self, map: &[f64]) -> Result<TidalClass> {
        let p = self.probabilities(map)?;
        let mut best = 0;
        for j in 1..CLASSES {
            if p[j] > p[best] {
                best = j;
            }
        }
        TidalClass::from_index(best)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.version != CNN_VERSION {
            return Err(Error::SchemaError(format!(
                "model version {:?}, expected {CNN_VERSION:?}",
                m.version
            )));
        }
        if m.params.len() != m.shape.offsets()[6] || m.band_mean.len() != m.shape.c || m.band_std.len() != m.shape.c {
            return Err(Error::SchemaError(
                "parameter count does not match the network shape".into(),
            ));
        }
        Ok(m)
    }
}

/// Labeled feature maps sharing one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub maps: Vec<Vec<f64>>,
    pub labels: Vec<TidalClass>,
    pub bands: usize,
    pub frames: usize,
}

pub fn train_cnn(
    data: &TrainingSet,
    window: &WindowConfig,
    sample_rate_hz: u32,
    cfg: &CnnConfig,
    seed_root: u64,
) -> Result<CnnModel> {
    if data.maps.len() != data.labels.len() {
        return Err(Error::invalid("one label per map required"));
    }
    for c in TidalClass::ALL {
        let n = data.labels.iter().filter(|&&l| l == c).count();
        if n < 2 {
            return Err(Error::InvalidDataset(format!(
                "class {c} has {n} examples, need at least 2"
            )));
        }
    }
    if !(0.0..1.0).contains(&cfg.dropout) || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::invalid("bad training settings"));
    }
    let shape = Shape::new(data.bands, data.frames, cfg)?;
    if data.maps.iter().any(|m| m.len() != shape.c * shape.t) {
        return Err(Error::invalid("feature maps differ in shape"));
    }

    let (c, t) = (shape.c, shape.t);
    let mut band_mean = vec![0.0; c];
    let mut band_std = vec![0.0; c];
    let count = (data.maps.len() * t) as f64;
    for m in &data.maps {
        for (i, v) in m.iter().enumerate() {
            band_mean[i / t] += v / count;
        }
    }
    for m in &data.maps {
        for (i, v) in m.iter().enumerate() {
            band_std[i / t] += (v - band_mean[i / t]).powi(2) / count;
        }
    }
    band_std
        .iter_mut()
        .for_each(|s| *s = if *s > 0.0 { s.sqrt() } else { 1.0 });

    let mut rng = seed::rng(seed_root, 0);
    let off = shape.offsets();
    let mut params = vec![0.0; off[6]];
    let mut init = |lo: usize, hi: usize, fan_in: usize, fan_out: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for p in &mut params[lo..hi] {
            *p = rng.random_range(-limit..limit);
        }
    };
    init(off[0], off[1], c * shape.k, shape.f1 * shape.k, &mut rng);
    init(off[2], off[3], shape.f1 * shape.k, shape.f2 * shape.k, &mut rng);
    init(off[4], off[5], shape.flat(), CLASSES, &mut rng);

    let mut model = CnnModel {
        version: CNN_VERSION.to_string(),
        window: window.clone(),
        sample_rate_hz,
        config: cfg.clone(),
        shape,
        band_mean,
        band_std,
        params,
        train_seed: seed_root,
    };
    let inputs: Vec<Vec<f64>> = data.maps.iter().map(|m| model.normalize(m)).collect();
    let labels: Vec<usize> = data.labels.iter().map(|l| l.index()).collect();

    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let np = model.params.len();
    let mut m1 = vec![0.0; np];
    let mut m2 = vec![0.0; np];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut grad = vec![0.0; np];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let tr = model.forward(inputs[i].clone(), Some(&mut rng));
                model.backward(&tr, labels[i], &mut grad);
            }
            step += 1;
            let scale = 1.0 / batch.len() as f64;
            let c1 = 1.0 - beta1.powi(step);
            let c2 = 1.0 - beta2.powi(step);
            for k in 0..np {
                let g = grad[k] * scale;
                m1[k] = beta1 * m1[k] + (1.0 - beta1) * g;
                m2[k] = beta2 * m2[k] + (1.0 - beta2) * g * g;
                model.params[k] -= cfg.learning_rate * (m1[k] / c1) / ((m2[k] / c2).sqrt() + eps);
            }
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, seed_root: u64) -> TrainingSet {
        let mut rng = seed::rng(seed_root, 9);
        let (bands, frames) = (4, 16);
        let mut maps = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let class = TidalClass::ALL[i % 3];
            let map: Vec<f64> = (0..bands * frames)
                .map(|k| {
                    let b = k / frames;
                    let base = if b == class.index() { 2.0 } else { 0.0 };
                    base + rng.random_range(-0.5..0.5)
                })
                .collect();
            maps.push(map);
            labels.push(class);
        }
        TrainingSet {
            maps,
            labels,
            bands,
            frames,
        }
    }

    fn untrained(data: &TrainingSet) -> CnnModel {
        let cfg = CnnConfig {
            epochs: 0,
            dropout: 0.0,
            ..Default::default()
        };
        let mut m = train_cnn(data, &WindowConfig::default(), 16000, &cfg, 3).unwrap();
        // Push biases off zero so ReLU gates vary.
        let off = m.shape.offsets();
        for (i, p) in m.params[off[1]..off[2]].iter_mut().enumerate() {
            *p = 0.05 * (i as f64 - 3.0);
        }
        m
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = toy(6, 1);
        let mut m = untrained(&data);
        let x = m.normalize(&data.maps[0]);
        let label = 1;
        let mut g = vec![0.0; m.params.len()];
        let tr = m.forward::<rand_chacha::ChaCha8Rng>(x.clone(), None);
        m.backward(&tr, label, &mut g);
        let loss = |m: &CnnModel| -m.forward::<rand_chacha::ChaCha8Rng>(x.clone(), None).prob[label].ln();
        let h = 1e-6;
        let off = m.shape.offsets();
        for &k in &[
            off[0],
            off[0] + 7,
            off[1] + 2,
            off[2] + 5,
            off[3] + 1,
            off[4] + 11,
            off[5],
        ] {
            let orig = m.params[k];
            m.params[k] = orig + h;
            let up = loss(&m);
            m.params[k] = orig - h;
            let down = loss(&m);
            m.params[k] = orig;
            let num = (up - down) / (2.0 * h);
            assert!(
                (num - g[k]).abs() < 1e-5 * (1.0 + num.abs()),
                "param {k}: {num} vs {}",
                g[k]
            );
        }
    }

    #[test]
    fn learns_separable_toy_and_is_deterministic() {
        let data = toy(60, 2);
        let cfg = CnnConfig::default();
        let a = train_cnn(&data, &WindowConfig::default(), 16000, &cfg, 7).unwrap();
        let b = train_cnn(&data, &WindowConfig::default(), 16000, &cfg, 7).unwrap();
        assert_eq!(a.params, b.params);
        let test = toy(30, 5);
        let correct = test
            .maps
            .iter()
            .zip(&test.labels)
            .filter(|(m, l)| a.predict(m).unwrap() == **l)
            .count();
        assert!(correct >= 28, "{correct}");
        let p = a.probabilities(&test.maps[0]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let back = CnnModel::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn missing_class_rejected() {
        let mut data = toy(9, 1);
        data.labels.iter_mut().for_each(|l| {
            if *l == TidalClass::Noise {
                *l = TidalClass::Speech
            }
        });
        assert!(matches!(
            train_cnn(&data, &WindowConfig::default(), 16000, &CnnConfig::default(), 0),
            Err(Error::InvalidDataset(_))
        ));
    }
}
