//! Transformer building blocks over a [`Graph`].

use crate::numerics::{standard_normal, Graph, ParamId, ParamStore, Real, StreamRng, Tensor, Var};
use crate::Result;

/// Registers freshly initialized parameters under a name prefix.
pub struct Builder<'s, F> {
    pub store: &'s mut ParamStore<F>,
    pub rng: StreamRng,
    pub std: f64,
}

impl<F: Real> Builder<'_, F> {
    pub fn normal(&mut self, name: &str, shape: &[usize]) -> ParamId {
        let n = shape.iter().product();
        let values: Vec<f64> = standard_normal(&mut self.rng, n)
            .into_iter()
            .map(|x| x * self.std)
            .collect();
        let t = Tensor::from_f64(shape.to_vec(), &values).expect("positive extents");
        self.store.insert(name, t)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> ParamId {
        self.store
            .insert(name, Tensor::full(shape.to_vec(), F::from_f64_lossy(value)))
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, name: &str, d_in: usize, d_out: usize) -> Self {
        Self {
            weight: b.normal(&format!("{name}.weight"), &[d_in, d_out]),
            bias: Some(b.constant(&format!("{name}.bias"), &[d_out], 0.0)),
        }
    }

    pub fn without_bias<F: Real>(b: &mut Builder<'_, F>, name: &str, d_in: usize, d_out: usize) -> Self {
        Self {
            weight: b.normal(&format!("{name}.weight"), &[d_in, d_out]),
            bias: None,
        }
    }

    pub fn forward<F: Real>(&self, g: &mut Graph<'_, F>, x: Var) -> Result<Var> {
        let w = g.param(self.weight);
        let y = g.matmul(x, w)?;
        match self.bias {
            Some(b) => {
                let b = g.param(b);
                Ok(g.add(y, b)?)
            }
            None => Ok(y),
        }
    }
}

/// Layer norm over the last axis with learned gain and bias.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, name: &str, d: usize) -> Self {
        Self {
            gain: b.constant(&format!("{name}.gain"), &[d], 1.0),
            bias: b.constant(&format!("{name}.bias"), &[d], 0.0),
        }
    }

    pub fn forward<F: Real>(&self, g: &mut Graph<'_, F>, x: Var) -> Result<Var> {
        let n = g.layer_norm(x);
        let gain = g.param(self.gain);
        let bias = g.param(self.bias);
        let y = g.mul(n, gain)?;
        Ok(g.add(y, bias)?)
    }
}

/// Multi-head self-attention over `[S, d]` or `[B, S, d]`.
#[derive(Debug, Clone)]
pub struct SelfAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub out: Linear,
    pub n_heads: usize,
}

impl SelfAttention {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, name: &str, d: usize, n_heads: usize) -> Self {
        Self {
            query: Linear::new(b, &format!("{name}.query"), d, d),
            // a key bias shifts every logit of a row equally, which the softmax cancels
            key: Linear::without_bias(b, &format!("{name}.key"), d, d),
            value: Linear::new(b, &format!("{name}.value"), d, d),
            out: Linear::new(b, &format!("{name}.out"), d, d),
            n_heads,
        }
    }

    /// `mask` is added to the `[S, S]` attention logits before the softmax.
    pub fn forward<F: Real>(&self, g: &mut Graph<'_, F>, x: Var, mask: Option<Var>) -> Result<Var> {
        let shape = g.shape(x).to_vec();
        let axis = shape.len() - 1;
        let d = shape[axis];
        let dh = d / self.n_heads;
        let q = self.query.forward(g, x)?;
        let k = self.key.forward(g, x)?;
        let v = self.value.forward(g, x)?;
        let scale = F::from_f64_lossy(1.0 / (dh as f64).sqrt());
        let mut heads = Vec::with_capacity(self.n_heads);
        for h in 0..self.n_heads {
            let qh = g.slice(q, axis, h * dh, dh)?;
            let kh = g.slice(k, axis, h * dh, dh)?;
            let vh = g.slice(v, axis, h * dh, dh)?;
            let kt = g.transpose(kh)?;
            let scores = g.matmul(qh, kt)?;
            let mut scores = g.scale(scores, scale);
            if let Some(m) = mask {
                scores = g.add(scores, m)?;
            }
            let weights = g.softmax(scores);
            heads.push(g.matmul(weights, vh)?);
        }
        let joined = if heads.len() == 1 {
            heads[0]
        } else {
            g.concat(&heads, axis)?
        };
        self.out.forward(g, joined)
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl Mlp {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, name: &str, d: usize, hidden: usize) -> Self {
        Self {
            fc1: Linear::new(b, &format!("{name}.fc1"), d, hidden),
            fc2: Linear::new(b, &format!("{name}.fc2"), hidden, d),
        }
    }

    pub fn forward<F: Real>(&self, g: &mut Graph<'_, F>, x: Var) -> Result<Var> {
        let h = self.fc1.forward(g, x)?;
        let h = g.gelu(h);
        self.fc2.forward(g, h)
    }
}

/// Pre-norm transformer block.
#[derive(Debug, Clone)]
pub struct Block {
    pub ln_attn: LayerNorm,
    pub attn: SelfAttention,
    pub ln_mlp: LayerNorm,
    pub mlp: Mlp,
}

impl Block {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, name: &str, d: usize, n_heads: usize) -> Self {
        Self {
            ln_attn: LayerNorm::new(b, &format!("{name}.ln_attn"), d),
            attn: SelfAttention::new(b, &format!("{name}.attn"), d, n_heads),
            ln_mlp: LayerNorm::new(b, &format!("{name}.ln_mlp"), d),
            mlp: Mlp::new(b, &format!("{name}.mlp"), d, 4 * d),
        }
    }

    pub fn forward<F: Real>(&self, g: &mut Graph<'_, F>, x: Var, mask: Option<Var>) -> Result<Var> {
        let h = self.ln_attn.forward(g, x)?;
        let h = self.attn.forward(g, h, mask)?;
        let x = g.add(x, h)?;
        let h = self.ln_mlp.forward(g, x)?;
        let h = self.mlp.forward(g, h)?;
        Ok(g.add(x, h)?)
    }
}

/// Stack of blocks followed by a final layer norm.
#[derive(Debug, Clone)]
pub struct Transformer {
    pub blocks: Vec<Block>,
    pub ln_final: LayerNorm,
}

impl Transformer {
    pub fn new<F: Real>(
        b: &mut Builder<'_, F>,
        name: &str,
        d: usize,
        n_heads: usize,
        n_layers: usize,
    ) -> Self {
        Self {
            blocks: (0..n_layers)
                .map(|i| Block::new(b, &format!("{name}.blocks.{i}"), d, n_heads))
                .collect(),
            ln_final: LayerNorm::new(b, &format!("{name}.ln_final"), d),
        }
    }

    pub fn forward<F: Real>(&self, g: &mut Graph<'_, F>, x: Var, mask: Option<Var>) -> Result<Var> {
        let mut x = x;
        for block in &self.blocks {
            x = block.forward(g, x, mask)?;
        }
        self.ln_final.forward(g, x)
    }
}

/// Rows `0..n` of a learned position table.
pub fn positions<F: Real>(g: &mut Graph<'_, F>, table: ParamId, start: usize, n: usize) -> Result<Var> {
    let t = g.param(table);
    let ids: Vec<usize> = (start..start + n).collect();
    Ok(g.embedding(t, &ids)?)
}
