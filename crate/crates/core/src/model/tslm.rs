use super::layers::{positions, Builder, Transformer};
use super::ModelConfig;
use crate::numerics::{causal_mask, Graph, ParamId, Real, Var};
use crate::Result;

/// Causal text-semantic transformer over `[text tokens] ++ [acoustic embeddings]`.
#[derive(Debug, Clone)]
pub struct Tslm {
    pub token_embedding: ParamId,
    pub text_positions: ParamId,
    pub audio_positions: ParamId,
    pub transformer: Transformer,
}

/// Final-layer hidden states of one TSLM pass.
#[derive(Debug, Clone, Copy)]
pub struct TslmOutput {
    /// `[T, d]`: hiddens over the text positions.
    pub text: Var,
    /// `[T + M, d]`: hiddens over every position.
    pub all: Var,
}

impl Tslm {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, c: &ModelConfig) -> Self {
        Self {
            token_embedding: b.normal("tslm.token_embedding", &[c.vocab_size, c.d_model]),
            text_positions: b.normal("tslm.text_positions", &[c.max_text_len, c.d_model]),
            audio_positions: b.normal("tslm.audio_positions", &[c.max_patches, c.d_model]),
            transformer: Transformer::new(b, "tslm", c.d_model, c.n_heads, c.n_layers_tslm),
        }
    }

    /// Token ids must already be validated against the vocabulary and length limits.
    pub fn forward<F: Real>(
        &self,
        g: &mut Graph<'_, F>,
        tokens: &[usize],
        acoustic: Option<Var>,
    ) -> Result<TslmOutput> {
        let table = g.param(self.token_embedding);
        let text = g.embedding(table, tokens)?;
        let pos = positions(g, self.text_positions, 0, tokens.len())?;
        let mut x = g.add(text, pos)?;
        if let Some(e) = acoustic {
            let m = g.shape(e)[0];
            let pos = positions(g, self.audio_positions, 0, m)?;
            let e = g.add(e, pos)?;
            x = g.concat(&[x, e], 0)?;
        }
        let n = g.shape(x)[0];
        let mask = g.constant(causal_mask(n));
        let all = self.transformer.forward(g, x, Some(mask))?;
        let text = if n == tokens.len() {
            all
        } else {
            g.slice(all, 0, 0, tokens.len())?
        };
        Ok(TslmOutput { text, all })
    }
}
