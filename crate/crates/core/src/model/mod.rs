//! Conditioning side of the generator: local encoder, text-semantic
//! transformer, scalar quantizer, residual acoustic transformer and stop head.

mod config;
pub mod fsq;
pub mod layers;
mod loc_enc;
mod patch;
mod ralm;
mod stop;
mod tslm;

pub use config::ModelConfig;
pub(crate) use config::parse_value;
pub use fsq::{fsq_quantize, FsqLattice};
pub use loc_enc::LocEnc;
pub use patch::{stack_patches, stack_rows, unstack_rows, LatentPatch};
pub use ralm::Ralm;
pub use stop::StopHead;
pub use tslm::{Tslm, TslmOutput};

use crate::locdit::LocDit;
use crate::numerics::{Graph, ParamGrads, ParamId, ParamStore, Real, Streams, Var};
use crate::{Error, Result};
use layers::Builder;

/// Parameter-free description of the network: configuration plus the handles
/// of every parameter in the store it was built against.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub fsq: FsqLattice,
    pub loc_enc: LocEnc,
    pub tslm: Tslm,
    pub ralm: Ralm,
    pub stop: StopHead,
    pub locdit: LocDit,
}

/// Graph values produced for `M + 1` consecutive prediction steps from a
/// history of `M` patches. Row `i` conditions patch `i`.
#[derive(Debug, Clone, Copy)]
pub struct HierarchyVars {
    pub text_hiddens: Var,
    pub h_tslm: Var,
    pub h_fsq: Var,
    pub h_res: Var,
    pub h_final: Var,
    /// `[M + 1, 1]`
    pub stop_logits: Var,
}

/// Conditioning for one generation step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepHiddens<F> {
    pub h_tslm: Vec<F>,
    pub h_fsq: Vec<F>,
    pub h_res: Vec<F>,
    pub h_final: Vec<F>,
    pub stop_logit: F,
}

/// Submodule a parameter belongs to, from its name prefix.
pub fn submodule_of(name: &str) -> &str {
    name.split('.').next().unwrap_or(name)
}

pub const SUBMODULES: [&str; 5] = ["loc_enc", "tslm", "ralm", "stop", "locdit"];

impl Model {
    /// Builds the architecture, registering randomly initialized parameters into `store`.
    pub fn build<F: Real>(config: &ModelConfig, store: &mut ParamStore<F>, streams: &Streams) -> Result<Self> {
        config.validate()?;
        let mut b = Builder {
            store,
            rng: streams.stream("init"),
            std: config.init_std,
        };
        let loc_enc = LocEnc::new(&mut b, config.d_patch, config.d_model);
        let tslm = Tslm::new(&mut b, config);
        let ralm = Ralm::new(&mut b, config);
        let stop = StopHead::new(&mut b, config.d_model);
        let locdit = LocDit::new(&mut b, config);
        Ok(Self {
            config: config.clone(),
            fsq: FsqLattice::new(config.fsq_delta, config.fsq_l)?,
            loc_enc,
            tslm,
            ralm,
            stop,
            locdit,
        })
    }

    pub fn check_tokens(&self, tokens: &[usize]) -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::InvalidInput("text prompt is empty".into()));
        }
        if tokens.len() > self.config.max_text_len {
            return Err(Error::InvalidInput(format!(
                "text prompt has {} tokens, limit is {}",
                tokens.len(),
                self.config.max_text_len
            )));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.config.vocab_size) {
            return Err(Error::InvalidInput(format!(
                "token id {bad} is outside the vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    /// Runs every conditioning submodule over a patch history (`[M, d_patch]`,
    /// or `None` when empty), producing hiddens for the `M + 1` steps whose
    /// histories are its prefixes.
    pub fn hierarchy<F: Real>(
        &self,
        g: &mut Graph<'_, F>,
        tokens: &[usize],
        history: Option<Var>,
    ) -> Result<HierarchyVars> {
        self.check_tokens(tokens)?;
        let m = history.map_or(0, |h| g.shape(h)[0]);
        if m >= self.config.max_patches {
            return Err(Error::InvalidInput(format!(
                "history of {m} patches reaches the cap of {}",
                self.config.max_patches
            )));
        }
        let t = tokens.len();
        let acoustic = history.map(|h| self.loc_enc.forward(g, h)).transpose()?;
        let tslm = self.tslm.forward(g, tokens, acoustic)?;
        let h_tslm = g.slice(tslm.all, 0, t - 1, m + 1)?;
        let h_fsq = self.fsq.forward(g, h_tslm)?;
        let fsq_history = if m > 0 {
            Some(g.slice(h_fsq, 0, 0, m)?)
        } else {
            None
        };
        let ralm = self.ralm.forward(g, tslm.text, fsq_history, acoustic)?;
        let h_res = g.slice(ralm, 0, t - 1, m + 1)?;
        let h_final = g.add(h_fsq, h_res)?;
        let stop_logits = self.stop.forward(g, h_fsq)?;
        Ok(HierarchyVars {
            text_hiddens: tslm.text,
            h_tslm,
            h_fsq,
            h_res,
            h_final,
            stop_logits,
        })
    }

    /// Parameter ids grouped under one submodule prefix.
    pub fn submodule_params<F: Real>(store: &ParamStore<F>, prefix: &str) -> Vec<ParamId> {
        store
            .ids()
            .filter(|&id| submodule_of(store.name(id)) == prefix)
            .collect()
    }
}

/// A model together with the parameter values it reads.
#[derive(Debug, Clone)]
pub struct ModelState<F> {
    pub model: Model,
    pub params: ParamStore<F>,
}

impl<F: Real> ModelState<F> {
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut params = ParamStore::new();
        let model = Model::build(config, &mut params, &Streams::new(seed))?;
        Ok(Self { model, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.model.config
    }

    pub fn cast<G: Real>(&self) -> ModelState<G> {
        ModelState {
            model: self.model.clone(),
            params: self.params.cast(),
        }
    }

    fn patch_tensor(&self, g: &mut Graph<'_, F>, patches: &[LatentPatch]) -> Result<Option<Var>> {
        if patches.is_empty() {
            return Ok(None);
        }
        let t = stack_patches::<F>(patches, self.config().d_patch)?;
        Ok(Some(g.constant(t)))
    }

    /// One embedding per patch.
    pub fn loc_enc(&self, patches: &[LatentPatch]) -> Result<Vec<Vec<F>>> {
        let mut g = Graph::frozen(&self.params);
        match self.patch_tensor(&mut g, patches)? {
            None => Ok(Vec::new()),
            Some(p) => {
                let e = self.model.loc_enc.forward(&mut g, p)?;
                Ok(unstack_rows(g.value(e)))
            }
        }
    }

    /// Text hiddens and the hidden at the final position (predicting the next patch).
    pub fn tslm_forward(&self, tokens: &[usize], acoustic: &[Vec<F>]) -> Result<(Vec<Vec<F>>, Vec<F>)> {
        self.model.check_tokens(tokens)?;
        let d = self.config().d_model;
        let mut g = Graph::frozen(&self.params);
        let acoustic = if acoustic.is_empty() {
            None
        } else {
            Some(g.constant(stack_rows(acoustic, d, "acoustic embeddings")?))
        };
        let out = self.model.tslm.forward(&mut g, tokens, acoustic)?;
        let all = unstack_rows(g.value(out.all));
        let text = unstack_rows(g.value(out.text));
        Ok((text, all.last().cloned().expect("non-empty prompt")))
    }

    /// Residual hidden at the final position.
    pub fn ralm_forward(
        &self,
        text_hiddens: &[Vec<F>],
        fsq_history: &[Vec<F>],
        acoustic_history: &[Vec<F>],
    ) -> Result<Vec<F>> {
        if fsq_history.len() != acoustic_history.len() {
            return Err(Error::InvalidInput(format!(
                "ralm: {} quantized history entries but {} acoustic entries",
                fsq_history.len(),
                acoustic_history.len()
            )));
        }
        let d = self.config().d_model;
        let mut g = Graph::frozen(&self.params);
        let text = g.constant(stack_rows(text_hiddens, d, "text hiddens")?);
        let (q, e) = if fsq_history.is_empty() {
            (None, None)
        } else {
            (
                Some(g.constant(stack_rows(fsq_history, d, "quantized history")?)),
                Some(g.constant(stack_rows(acoustic_history, d, "acoustic history")?)),
            )
        };
        let out = self.model.ralm.forward(&mut g, text, q, e)?;
        Ok(unstack_rows(g.value(out)).pop().expect("non-empty sequence"))
    }

    pub fn stop_logit(&self, h_fsq: &[F]) -> Result<F> {
        let d = self.config().d_model;
        let mut g = Graph::frozen(&self.params);
        let h = g.constant(stack_rows(&[h_fsq.to_vec()], d, "stop input")?);
        let out = self.model.stop.forward(&mut g, h)?;
        Ok(g.value(out).item()?)
    }

    pub fn fsq_quantize(&self, h: &[F]) -> Result<Vec<F>> {
        self.model.fsq.quantize(h)
    }

    /// Conditioning for the step after `history`.
    pub fn step_hiddens(&self, tokens: &[usize], history: &[LatentPatch]) -> Result<StepHiddens<F>> {
        let mut g = Graph::frozen(&self.params);
        let h = self.patch_tensor(&mut g, history)?;
        let vars = self.model.hierarchy(&mut g, tokens, h)?;
        let last = |g: &Graph<'_, F>, v: Var| unstack_rows(g.value(v)).pop().expect("rows");
        Ok(StepHiddens {
            h_tslm: last(&g, vars.h_tslm),
            h_fsq: last(&g, vars.h_fsq),
            h_res: last(&g, vars.h_res),
            h_final: last(&g, vars.h_final),
            stop_logit: *g.value(vars.stop_logits).data().last().expect("rows"),
        })
    }

    /// Parameters with no gradient, or an all-zero one, across `grads`.
    pub fn dead_parameters(&self, grads: &ParamGrads<F>) -> Vec<String> {
        grads
            .iter()
            .filter(|(_, g)| g.is_none_or(|t| t.data().iter().all(|x| *x == F::zero())))
            .map(|(id, _)| self.params.name(id).to_string())
            .collect()
    }
}
