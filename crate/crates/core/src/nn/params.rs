use std::cell::RefCell;
use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use super::graph::{Gradients, Graph, Var};
use super::tensor::Tensor;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named, ordered collection of trainable tensors.
///
/// Registration order is the iteration order, which keeps initialization,
/// optimizer state and serialization deterministic.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    frozen: Vec<bool>,
    index: BTreeMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics on a duplicate name; parameter names are fixed by model code.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.values.push(value);
        self.frozen.push(false);
        ParamId(self.names.len() - 1)
    }

    pub fn uniform(&mut self, name: impl Into<String>, rows: usize, cols: usize, bound: f64, rng: &mut Rng) -> ParamId {
        let data = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
        self.add(name, Tensor::from_vec(rows, cols, data))
    }

    pub fn normal(&mut self, name: impl Into<String>, rows: usize, cols: usize, std: f64, rng: &mut Rng) -> ParamId {
        let data = (0..rows * cols).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
        self.add(name, Tensor::from_vec(rows, cols, data))
    }

    pub fn zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, Tensor::zeros(rows, cols))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.names.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names.iter().zip(&self.values).enumerate().map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.frozen[id.0]
    }

    /// Marks every parameter whose name starts with `prefix` as frozen.
    pub fn freeze_prefix(&mut self, prefix: &str) {
        for (i, n) in self.names.iter().enumerate() {
            if n.starts_with(prefix) {
                self.frozen[i] = true;
            }
        }
    }

    /// Rounds every value to `f32` precision, the precision checkpoints store.
    pub fn snap_to_f32(&mut self) {
        for v in &mut self.values {
            for x in v.data_mut() {
                *x = *x as f32 as f64;
            }
        }
    }

    /// SHA-256 over names, shapes and little-endian `f64` bits of the
    /// parameters whose name starts with `prefix`.
    pub fn checksum(&self, prefix: &str) -> String {
        let mut h = Sha256::new();
        for (_, name, v) in self.iter().filter(|(_, n, _)| n.starts_with(prefix)) {
            h.update(name.as_bytes());
            h.update((v.rows() as u64).to_le_bytes());
            h.update((v.cols() as u64).to_le_bytes());
            for x in v.data() {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(Tensor::is_finite)
    }
}

/// Binds a [`ParamStore`] to a [`Graph`] for one forward/backward pass.
///
/// Parameters become graph leaves on first use. Frozen parameters take part
/// in the forward pass but never receive gradients.
pub struct Ctx<'a> {
    pub g: &'a Graph,
    store: &'a ParamStore,
    bound: RefCell<Vec<Option<Var>>>,
}

impl<'a> Ctx<'a> {
    pub fn new(g: &'a Graph, store: &'a ParamStore) -> Self {
        Self { g, store, bound: RefCell::new(vec![None; store.len()]) }
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }

    pub fn p(&self, id: ParamId) -> Var {
        if let Some(v) = self.bound.borrow()[id.0] {
            return v;
        }
        let v = self.g.leaf(self.store.get(id).clone());
        self.bound.borrow_mut()[id.0] = Some(v);
        v
    }

    /// Gradients of the bound, non-frozen parameters.
    pub fn param_grads(&self, grads: &Gradients) -> Vec<(ParamId, Tensor)> {
        let bound = self.bound.borrow();
        let mut out = Vec::new();
        for (i, v) in bound.iter().enumerate() {
            let id = ParamId(i);
            if self.store.is_frozen(id) {
                continue;
            }
            if let Some(g) = v.and_then(|v| grads.get(v)) {
                out.push((id, g.clone()));
            }
        }
        out
    }
}
