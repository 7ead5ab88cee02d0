use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::vocab::{Vocab, IMAGE, RESERVED};
use super::{GroupSet, ParamGroup, ToyLmError};
use crate::scaledloss::TokenDistSeq;

pub const W_VIS: usize = 0;
pub const B_VIS: usize = 1;
pub const EMBED: usize = 2;
pub const POS: usize = 3;
pub const WQ: usize = 4;
pub const WK: usize = 5;
pub const WV: usize = 6;
pub const WO: usize = 7;
pub const W1: usize = 8;
pub const B1: usize = 9;
pub const W2: usize = 10;
pub const B2: usize = 11;
pub const W_OUT: usize = 12;
pub const B_OUT: usize = 13;

/// Name and group of every tensor, in storage order.
pub const PARAM_SPECS: [(&str, ParamGroup); 14] = [
    ("w_vis", ParamGroup::MapVisual),
    ("b_vis", ParamGroup::MapVisual),
    ("embed", ParamGroup::Embed),
    ("pos", ParamGroup::Core),
    ("wq", ParamGroup::Core),
    ("wk", ParamGroup::Core),
    ("wv", ParamGroup::Core),
    ("wo", ParamGroup::Core),
    ("w1", ParamGroup::Core),
    ("b1", ParamGroup::Core),
    ("w2", ParamGroup::Core),
    ("b2", ParamGroup::Core),
    ("w_out", ParamGroup::Out),
    ("b_out", ParamGroup::Out),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub d_vis: usize,
    /// Maximum input length.
    pub context: usize,
    /// Width of the feed-forward layer.
    pub hidden: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ToyLmError> {
        if self.vocab_size < RESERVED.len() {
            return Err(ToyLmError::Argument(format!(
                "vocabulary of size {} cannot hold the {} reserved tokens",
                self.vocab_size,
                RESERVED.len()
            )));
        }
        for (name, v) in [
            ("d_model", self.d_model),
            ("d_vis", self.d_vis),
            ("context", self.context),
            ("hidden", self.hidden),
        ] {
            if v == 0 {
                return Err(ToyLmError::Argument(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn shape(&self, index: usize) -> (usize, usize) {
        let ModelConfig {
            vocab_size: v,
            d_model: d,
            d_vis,
            context: c,
            hidden: h,
        } = *self;
        match index {
            W_VIS => (d_vis, d),
            B_VIS | B2 => (1, d),
            EMBED => (v, d),
            POS => (c, d),
            WQ | WK | WV | WO => (d, d),
            W1 => (d, h),
            B1 => (1, h),
            W2 => (h, d),
            W_OUT => (d, v),
            B_OUT => (1, v),
            _ => panic!("no parameter with index {index}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub tensors: Vec<Array2<f64>>,
}

/// Deterministic initialization. Weight entries are uniform with standard
/// deviation `scale / sqrt(fan_in)`; biases start at zero.
pub fn init_model(
    vocab: Vocab,
    d_model: usize,
    d_vis: usize,
    context: usize,
    hidden: usize,
    seed: u64,
) -> Result<ModelParams, ToyLmError> {
    let config = ModelConfig {
        vocab_size: vocab.len(),
        d_model,
        d_vis,
        context,
        hidden,
    };
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = (0..PARAM_SPECS.len())
        .map(|i| {
            let (rows, cols) = config.shape(i);
            let std = match i {
                B_VIS | B1 | B2 | B_OUT => 0.0,
                EMBED => 1.0,
                POS => 0.3,
                W_OUT => 0.5 / (rows as f64).sqrt(),
                _ => 1.0 / (rows as f64).sqrt(),
            };
            let half_width = std * 3f64.sqrt();
            if half_width == 0.0 {
                Array2::zeros((rows, cols))
            } else {
                Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-half_width..half_width))
            }
        })
        .collect();
    Ok(ModelParams { config, vocab, tensors })
}

/// Intermediate values of one forward pass, kept for backpropagation.
pub(crate) struct Cache {
    pub tokens: Vec<usize>,
    pub image_pos: usize,
    pub visual: Vec<f64>,
    pub u: Array2<f64>,
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    pub attn: Array2<f64>,
    pub z: Array2<f64>,
    pub h1: Array2<f64>,
    pub g: Array2<f64>,
    pub h2: Array2<f64>,
    pub probs: Array2<f64>,
}

fn softmax_in_place(mut row: ndarray::ArrayViewMut1<f64>) {
    let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    row.mapv_inplace(|x| (x - max).exp());
    let sum = row.sum();
    row.mapv_inplace(|x| x / sum);
}

fn bias(t: &Array2<f64>) -> ArrayView1<'_, f64> {
    t.row(0)
}

impl ModelParams {
    pub fn tensor(&self, name: &str) -> Option<&Array2<f64>> {
        PARAM_SPECS.iter().position(|(n, _)| *n == name).map(|i| &self.tensors[i])
    }

    pub fn image_embedding(&self, visual: &[f64]) -> Array1<f64> {
        let v = ArrayView1::from(visual);
        v.dot(&self.tensors[W_VIS]) + bias(&self.tensors[B_VIS])
    }

    fn check_input(&self, tokens: &[usize], visual: &[f64]) -> Result<usize, ToyLmError> {
        let cfg = &self.config;
        if tokens.is_empty() || tokens.len() > cfg.context {
            return Err(ToyLmError::Argument(format!(
                "sequence length {} outside 1..={}",
                tokens.len(),
                cfg.context
            )));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= cfg.vocab_size) {
            return Err(ToyLmError::Argument(format!("token id {bad} outside the vocabulary")));
        }
        let mut images = tokens.iter().enumerate().filter(|(_, &t)| t == IMAGE).map(|(i, _)| i);
        let image_pos = images
            .next()
            .ok_or_else(|| ToyLmError::Argument("sequence has no image sentinel".into()))?;
        if images.next().is_some() {
            return Err(ToyLmError::Argument("sequence has more than one image sentinel".into()));
        }
        if visual.len() != cfg.d_vis {
            return Err(ToyLmError::Argument(format!(
                "visual vector has dimension {}, expected {}",
                visual.len(),
                cfg.d_vis
            )));
        }
        Ok(image_pos)
    }

    pub(crate) fn forward_cache(&self, tokens: &[usize], visual: &[f64]) -> Result<Cache, ToyLmError> {
        let image_pos = self.check_input(tokens, visual)?;
        let p = &self.tensors;
        let t_len = tokens.len();
        let d = self.config.d_model;

        let mut x = Array2::zeros((t_len, d));
        for (t, &tok) in tokens.iter().enumerate() {
            if t == image_pos {
                x.row_mut(t).assign(&self.image_embedding(visual));
            } else {
                x.row_mut(t).assign(&p[EMBED].row(tok));
            }
        }
        let u = x + p[POS].slice(s![..t_len, ..]);
        let q = u.dot(&p[WQ]);
        let k = u.dot(&p[WK]);
        let v = u.dot(&p[WV]);

        // Explicit loops over s <= t keep causality exact.
        let scale = 1.0 / (d as f64).sqrt();
        let mut attn = Array2::zeros((t_len, t_len));
        let mut z = Array2::zeros((t_len, d));
        for t in 0..t_len {
            let qt = q.row(t);
            for s in 0..=t {
                attn[[t, s]] = qt.dot(&k.row(s)) * scale;
            }
            softmax_in_place(attn.slice_mut(s![t, ..=t]));
            let mut zt = z.row_mut(t);
            for s in 0..=t {
                zt.scaled_add(attn[[t, s]], &v.row(s));
            }
        }

        let h1 = &u + &z.dot(&p[WO]);
        let g = (h1.dot(&p[W1]) + bias(&p[B1])).mapv(f64::tanh);
        let h2 = &h1 + &g.dot(&p[W2]) + bias(&p[B2]);
        let mut probs = h2.dot(&p[W_OUT]) + bias(&p[B_OUT]);
        for row in probs.rows_mut() {
            softmax_in_place(row);
        }
        Ok(Cache {
            tokens: tokens.to_vec(),
            image_pos,
            visual: visual.to_vec(),
            u,
            q,
            k,
            v,
            attn,
            z,
            h1,
            g,
            h2,
            probs,
        })
    }

    /// Next-token distributions at every position of `tokens`.
    pub fn forward(&self, tokens: &[usize], visual: &[f64]) -> Result<TokenDistSeq, ToyLmError> {
        let cache = self.forward_cache(tokens, visual)?;
        let rows = cache.probs.rows().into_iter().map(|r| r.to_vec()).collect();
        TokenDistSeq::new(rows).map_err(|e| ToyLmError::Numerical(e.to_string()))
    }

    /// Backpropagates `dlogits` (gradient of the loss with respect to the
    /// pre-softmax scores) into `grads`, touching only the groups it holds.
    pub(crate) fn backward(&self, cache: &Cache, dlogits: ArrayView2<f64>, grads: &mut Gradients) {
        let p = &self.tensors;
        let d = self.config.d_model;
        let t_len = cache.tokens.len();

        grads.add(W_OUT, || cache.h2.t().dot(&dlogits));
        grads.add(B_OUT, || dlogits.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let dh2 = dlogits.dot(&p[W_OUT].t());

        grads.add(W2, || cache.g.t().dot(&dh2));
        grads.add(B2, || dh2.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let dpre = dh2.dot(&p[W2].t()) * cache.g.mapv(|g| 1.0 - g * g);
        grads.add(W1, || cache.h1.t().dot(&dpre));
        grads.add(B1, || dpre.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let dh1 = dh2 + dpre.dot(&p[W1].t());

        grads.add(WO, || cache.z.t().dot(&dh1));
        let dz = dh1.dot(&p[WO].t());

        let scale = 1.0 / (d as f64).sqrt();
        let mut dq = Array2::zeros((t_len, d));
        let mut dk = Array2::zeros((t_len, d));
        let mut dv = Array2::zeros((t_len, d));
        let mut da = vec![0.0; t_len];
        for t in 0..t_len {
            let dzt = dz.row(t);
            let mut weighted = 0.0;
            for s in 0..=t {
                let a = cache.attn[[t, s]];
                da[s] = dzt.dot(&cache.v.row(s));
                weighted += a * da[s];
                dv.row_mut(s).scaled_add(a, &dzt);
            }
            for s in 0..=t {
                let ds = cache.attn[[t, s]] * (da[s] - weighted) * scale;
                dq.row_mut(t).scaled_add(ds, &cache.k.row(s));
                dk.row_mut(s).scaled_add(ds, &cache.q.row(t));
            }
        }
        grads.add(WQ, || cache.u.t().dot(&dq));
        grads.add(WK, || cache.u.t().dot(&dk));
        grads.add(WV, || cache.u.t().dot(&dv));
        let du = dh1 + dq.dot(&p[WQ].t()) + dk.dot(&p[WK].t()) + dv.dot(&p[WV].t());

        if let Some(dpos) = grads.slot(POS) {
            let mut head = dpos.slice_mut(s![..t_len, ..]);
            head += &du;
        }
        if let Some(de) = grads.slot(EMBED) {
            for (t, &tok) in cache.tokens.iter().enumerate() {
                if t != cache.image_pos {
                    de.row_mut(tok).scaled_add(1.0, &du.row(t));
                }
            }
        }
        let dimg = du.row(cache.image_pos);
        if let Some(dw) = grads.slot(W_VIS) {
            for (i, &vi) in cache.visual.iter().enumerate() {
                dw.row_mut(i).scaled_add(vi, &dimg);
            }
        }
        if let Some(db) = grads.slot(B_VIS) {
            db.row_mut(0).scaled_add(1.0, &dimg);
        }
    }

    /// Hex SHA-256 of the tensors in `group`, over names and f64 bit patterns.
    pub fn group_hash(&self, group: ParamGroup) -> String {
        let mut hasher = Sha256::new();
        for (i, (name, g)) in PARAM_SPECS.iter().enumerate() {
            if *g != group {
                continue;
            }
            hasher.update(name.as_bytes());
            for x in self.tensors[i].iter() {
                hasher.update(x.to_le_bytes());
            }
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(Array2::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// `params -= lr * grads` for every group the gradients carry.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (param, grad) in self.tensors.iter_mut().zip(&grads.tensors) {
            if let Some(g) = grad {
                param.scaled_add(-lr, g);
            }
        }
    }
}

/// Gradients for the trainable groups; other groups hold `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn zeros(config: &ModelConfig, trainable: &GroupSet) -> Self {
        let tensors = PARAM_SPECS
            .iter()
            .enumerate()
            .map(|(i, (_, group))| trainable.contains(group).then(|| Array2::zeros(config.shape(i))))
            .collect();
        Gradients { tensors }
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        let i = PARAM_SPECS.iter().position(|(n, _)| *n == name)?;
        self.tensors[i].as_ref()
    }

    pub fn groups(&self) -> GroupSet {
        PARAM_SPECS
            .iter()
            .zip(&self.tensors)
            .filter_map(|((_, g), t)| t.as_ref().map(|_| *g))
            .collect()
    }

    fn slot(&mut self, index: usize) -> Option<&mut Array2<f64>> {
        self.tensors[index].as_mut()
    }

    fn add<F: FnOnce() -> Array2<f64>>(&mut self, index: usize, compute: F) {
        if let Some(t) = self.tensors[index].as_mut() {
            *t += &compute();
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors.iter_mut().flatten() {
            t.mapv_inplace(|x| x * factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|t| t.iter().all(|x| x.is_finite()))
    }
}
