use super::layers::{positions, Builder, Linear, Transformer};
use super::ModelConfig;
use crate::numerics::{causal_mask, Graph, ParamId, Real, Var};
use crate::{Error, Result};

/// Causal residual acoustic transformer.
///
/// Its sequence is the TSLM text hiddens followed by one position per past
/// step, each carrying a projection of `h_fsq ⊕ E` for that step.
#[derive(Debug, Clone)]
pub struct Ralm {
    pub history_proj: Linear,
    pub text_positions: ParamId,
    pub audio_positions: ParamId,
    pub transformer: Transformer,
}

impl Ralm {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, c: &ModelConfig) -> Self {
        Self {
            history_proj: Linear::new(b, "ralm.history_proj", 2 * c.d_model, c.d_model),
            text_positions: b.normal("ralm.text_positions", &[c.max_text_len, c.d_model]),
            audio_positions: b.normal("ralm.audio_positions", &[c.max_patches, c.d_model]),
            transformer: Transformer::new(b, "ralm", c.d_model, c.n_heads, c.n_layers_ralm),
        }
    }

    /// Returns hiddens over every position, `[T + M, d]`.
    pub fn forward<F: Real>(
        &self,
        g: &mut Graph<'_, F>,
        text_hiddens: Var,
        fsq_history: Option<Var>,
        acoustic_history: Option<Var>,
    ) -> Result<Var> {
        let t = g.shape(text_hiddens)[0];
        let pos = positions(g, self.text_positions, 0, t)?;
        let mut x = g.add(text_hiddens, pos)?;
        match (fsq_history, acoustic_history) {
            (None, None) => {}
            (Some(q), Some(e)) => {
                let (mq, me) = (g.shape(q)[0], g.shape(e)[0]);
                if mq != me {
                    return Err(Error::InvalidInput(format!(
                        "ralm: {mq} quantized history entries but {me} acoustic entries"
                    )));
                }
                let pair = g.concat(&[q, e], 1)?;
                let h = self.history_proj.forward(g, pair)?;
                let pos = positions(g, self.audio_positions, 0, mq)?;
                let h = g.add(h, pos)?;
                x = g.concat(&[x, h], 0)?;
            }
            (q, _) => {
                let have = if q.is_some() { "quantized" } else { "acoustic" };
                return Err(Error::InvalidInput(format!(
                    "ralm: {have} history given without its counterpart"
                )));
            }
        }
        let n = g.shape(x)[0];
        let mask = g.constant(causal_mask(n));
        self.transformer.forward(g, x, Some(mask))
    }
}
