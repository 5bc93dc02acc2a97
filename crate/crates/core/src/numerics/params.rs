use std::ops::{Deref, DerefMut};

use indexmap::IndexMap;

use super::tape::{Tape, Var};
use super::tensor::{Tensor, TensorError, TensorResult};
use super::Real;

/// Stable handle to a named parameter in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named parameter tensors in registration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<F> {
    entries: IndexMap<String, Tensor<F>>,
}

impl<F: Real> ParamStore<F> {
    pub fn new() -> Self {
        Self {
            entries: IndexMap::new(),
        }
    }

    /// Registers `name`. Panics on duplicates: parameter names are fixed by the architecture.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<F>) -> ParamId {
        let name = name.into();
        assert!(
            !self.entries.contains_key(&name),
            "duplicate parameter name {name}"
        );
        let (idx, _) = self.entries.insert_full(name, value);
        ParamId(idx)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<F> {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.entries[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.entries.get_index_of(name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        self.entries.get_index(id.0).map(|(k, _)| k.as_str()).expect("valid id")
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<F>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(Tensor::numel).sum()
    }

    /// Replaces a tensor's values; the shape must match.
    pub fn set(&mut self, id: ParamId, value: Tensor<F>) -> TensorResult<()> {
        let slot = &mut self.entries[id.0];
        if slot.shape() != value.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "param_set",
                lhs: slot.shape().to_vec(),
                rhs: value.shape().to_vec(),
            });
        }
        *slot = value;
        Ok(())
    }

    pub fn cast<G: Real>(&self) -> ParamStore<G> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }
}

/// Per-parameter gradients; parameters the loss never touched have `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads<F> {
    grads: Vec<Option<Tensor<F>>>,
}

impl<F: Real> ParamGrads<F> {
    pub fn empty(n: usize) -> Self {
        Self {
            grads: vec![None; n],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor<F>> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient for `id`, with exact zeros for an unreachable parameter.
    pub fn dense(&self, id: ParamId, store: &ParamStore<F>) -> Tensor<F> {
        self.get(id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(store.get(id).shape().to_vec()))
    }

    pub fn accumulate(&mut self, other: &ParamGrads<F>) {
        for (mine, theirs) in self.grads.iter_mut().zip(&other.grads) {
            match (mine, theirs) {
                (Some(a), Some(b)) => {
                    for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
                        *x += y;
                    }
                }
                (slot @ None, Some(b)) => *slot = Some(b.clone()),
                _ => {}
            }
        }
    }

    /// Applies `f` to every stored gradient value.
    pub fn map_in_place(&mut self, f: impl Fn(F) -> F) {
        for t in self.grads.iter_mut().flatten() {
            for x in t.data_mut() {
                *x = f(*x);
            }
        }
    }

    pub fn scale(&mut self, c: F) {
        for g in self.grads.iter_mut().flatten() {
            for x in g.data_mut() {
                *x *= c;
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, Option<&Tensor<F>>)> {
        self.grads
            .iter()
            .enumerate()
            .map(|(i, g)| (ParamId(i), g.as_ref()))
    }
}

/// A [`Tape`] bound to a parameter store. Parameters enter the record lazily,
/// on first use, so anything a forward pass never reads gets no gradient.
pub struct Graph<'a, F> {
    tape: Tape<F>,
    params: &'a ParamStore<F>,
    bound: Vec<Option<Var>>,
    frozen: bool,
}

impl<'a, F: Real> Graph<'a, F> {
    pub fn new(params: &'a ParamStore<F>) -> Self {
        Self {
            tape: Tape::new(),
            params,
            bound: vec![None; params.len()],
            frozen: false,
        }
    }

    /// A graph whose parameters are recorded as constants (inference only).
    pub fn frozen(params: &'a ParamStore<F>) -> Self {
        Self {
            frozen: true,
            ..Self::new(params)
        }
    }

    pub fn params(&self) -> &'a ParamStore<F> {
        self.params
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        let value = self.params.get(id).clone();
        let v = if self.frozen {
            self.tape.constant(value)
        } else {
            self.tape.leaf(value)
        };
        self.bound[id.0] = Some(v);
        v
    }

    pub fn backward(&mut self, loss: Var) -> TensorResult<ParamGrads<F>> {
        let mut grads = self.tape.backward(loss)?;
        Ok(ParamGrads {
            grads: self
                .bound
                .iter()
                .map(|b| b.and_then(|v| grads.take(v)))
                .collect(),
        })
    }
}

impl<F> Deref for Graph<'_, F> {
    type Target = Tape<F>;
    fn deref(&self) -> &Tape<F> {
        &self.tape
    }
}

impl<F> DerefMut for Graph<'_, F> {
    fn deref_mut(&mut self) -> &mut Tape<F> {
        &mut self.tape
    }
}
