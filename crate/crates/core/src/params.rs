//! Named parameter storage and its binding onto a tape.

use std::collections::HashMap;

use sinet_tensor::{BatchStats, Tape, Tensor, Var, BN_MOMENTUM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    /// `false` for running statistics, which are updated but never optimized.
    pub trainable: bool,
}

/// Every tensor a model owns, in registration order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<Param>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor. Panics on a duplicate name, which is a model
    /// construction bug.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) -> ParamId {
        let name = name.into();
        let id = ParamId(self.entries.len());
        assert!(
            self.by_name.insert(name.clone(), id).is_none(),
            "duplicate parameter name {name}"
        );
        self.entries.push(Param {
            name,
            value,
            trainable,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.entries[id.0]
    }

    pub fn set(&mut self, id: ParamId, value: Tensor) {
        assert_eq!(self.entries[id.0].value.shape(), value.shape());
        self.entries[id.0].value = value;
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.entries.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn trainable(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.iter().filter(|(_, p)| p.trainable).map(|(id, _)| id)
    }

    /// Total count of trainable scalars.
    pub fn trainable_scalars(&self) -> usize {
        self.iter().filter(|(_, p)| p.trainable).map(|(_, p)| p.value.len()).sum()
    }
}

/// How batch normalization behaves during a forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running averages are reported for update.
    Train,
    /// Frozen running statistics.
    Eval,
}

/// A pending running-statistics update produced by a training forward.
#[derive(Clone, Debug)]
pub struct BnUpdate {
    pub mean: ParamId,
    pub var: ParamId,
    pub stats: BatchStats,
}

/// Forward-pass context: the tape, the tape handles of every parameter, and
/// the batchnorm mode.
pub struct Ctx<'a> {
    pub tape: &'a mut Tape,
    pub store: &'a ParamStore,
    vars: Vec<Var>,
    pub mode: Mode,
    updates: Vec<BnUpdate>,
}

impl<'a> Ctx<'a> {
    /// Binds every parameter onto `tape`. With `track` set, trainable
    /// parameters are recorded as differentiable leaves; otherwise all are
    /// constants.
    pub fn new(tape: &'a mut Tape, store: &'a ParamStore, mode: Mode, track: bool) -> Self {
        let vars = store
            .entries
            .iter()
            .map(|p| {
                if track && p.trainable {
                    tape.param(p.value.clone())
                } else {
                    tape.constant(p.value.clone())
                }
            })
            .collect();
        Self {
            tape,
            store,
            vars,
            mode,
            updates: Vec::new(),
        }
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub(crate) fn record_update(&mut self, update: BnUpdate) {
        self.updates.push(update);
    }

    pub fn take_updates(&mut self) -> Vec<BnUpdate> {
        std::mem::take(&mut self.updates)
    }
}

/// Folds batch statistics into the store's running averages.
pub fn apply_bn_updates(store: &mut ParamStore, updates: &[BnUpdate]) {
    for u in updates {
        let mut mean = store.get(u.mean).data().to_vec();
        let mut var = store.get(u.var).data().to_vec();
        u.stats.fold_into(&mut mean, &mut var, BN_MOMENTUM);
        let shape = store.get(u.mean).shape();
        store.set(u.mean, Tensor::new(shape, mean).expect("finite running mean"));
        store.set(u.var, Tensor::new(shape, var).expect("finite running var"));
    }
}
