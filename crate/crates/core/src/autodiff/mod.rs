//! Reverse-mode automatic differentiation over a recording tape.
//!
//! Every op applied to a [`Var`] computes its value eagerly. When at least
//! one input is tracked and the tape has gradients enabled, the op also
//! appends a record holding a backward closure. Records are appended in
//! execution order, so the record list is already topologically sorted and
//! [`Tape::backward`] just walks it in reverse, visiting each record once.
//!
//! A tape is single-writer (`!Sync`). Trained parameters are plain
//! [`Tensor`]s with shared immutable buffers, so several threads can each
//! build their own tape over the same parameters.

mod kernels;
mod ops;

#[cfg(test)]
pub(crate) use kernels::sigmoid;

use std::cell::{Cell, RefCell};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

type BackwardFn = Box<dyn Fn(&[f64], &[bool]) -> Vec<Option<Vec<f64>>>>;

struct Record {
    output: usize,
    inputs: Vec<usize>,
    needs: Vec<bool>,
    backward: BackwardFn,
}

pub struct Tape {
    grad_enabled: bool,
    next_id: Cell<usize>,
    records: RefCell<Vec<Record>>,
    /// Parameter key to leaf var id, in registration order.
    leaves: RefCell<Vec<(u64, usize)>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            grad_enabled: true,
            next_id: Cell::new(0),
            records: RefCell::new(Vec::new()),
            leaves: RefCell::new(Vec::new()),
        }
    }

    /// A tape that never records; ops only compute values.
    pub fn no_grad() -> Self {
        Tape {
            grad_enabled: false,
            ..Self::new()
        }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    /// Number of recorded operations.
    pub fn len(&self) -> usize {
        self.records.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn fresh_id(&self) -> usize {
        let id = self.next_id.get();
        self.next_id.set(id + 1);
        id
    }

    /// An input that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        Var {
            tape: self,
            id: self.fresh_id(),
            value,
            tracked: false,
        }
    }

    /// A tracked input whose gradient can be read back with [`Gradients::wrt`].
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        Var {
            tape: self,
            id: self.fresh_id(),
            value,
            tracked: self.grad_enabled,
        }
    }

    /// Registers a parameter. Registering the same parameter twice yields
    /// the same var, so all uses share one gradient slot.
    pub fn param(&self, tensor: &Tensor) -> Var<'_> {
        if !(self.grad_enabled && tensor.is_param()) {
            return self.constant(tensor.clone());
        }
        let key = tensor.key();
        if let Some(&(_, id)) = self.leaves.borrow().iter().find(|(k, _)| *k == key) {
            return Var {
                tape: self,
                id,
                value: tensor.clone(),
                tracked: true,
            };
        }
        let var = self.leaf(tensor.clone());
        self.leaves.borrow_mut().push((key, var.id));
        var
    }

    /// Builds the result var of an op, recording `backward` when any input is tracked.
    ///
    /// `backward` receives the output gradient and a per-input `needs` mask
    /// and returns one optional gradient per input.
    pub(crate) fn record<'t>(
        &'t self,
        value: Tensor,
        inputs: &[&Var<'t>],
        backward: impl Fn(&[f64], &[bool]) -> Vec<Option<Vec<f64>>> + 'static,
    ) -> Var<'t> {
        let needs: Vec<bool> = inputs.iter().map(|v| v.tracked).collect();
        let tracked = self.grad_enabled && needs.iter().any(|&n| n);
        let id = self.fresh_id();
        if tracked {
            self.records.borrow_mut().push(Record {
                output: id,
                inputs: inputs.iter().map(|v| v.id).collect(),
                needs,
                backward: Box::new(backward),
            });
        }
        Var {
            tape: self,
            id,
            value,
            tracked,
        }
    }

    /// Back-propagates from a scalar loss through every record.
    pub fn backward(&self, loss: &Var<'_>) -> Result<Gradients> {
        if !std::ptr::eq(loss.tape, self) {
            return Err(Error::Usage("loss belongs to a different tape".into()));
        }
        if loss.value.numel() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss.value.shape()
            )));
        }
        if !loss.tracked {
            return Err(Error::Usage(
                "loss is not connected to any tracked input".into(),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.next_id.get()];
        grads[loss.id] = Some(vec![1.0]);
        for rec in self.records.borrow().iter().rev() {
            let Some(g_out) = grads[rec.output].take() else {
                continue;
            };
            let input_grads = (rec.backward)(&g_out, &rec.needs);
            for ((&input, &need), g) in rec.inputs.iter().zip(&rec.needs).zip(input_grads) {
                if !need {
                    continue;
                }
                let Some(g) = g else { continue };
                match &mut grads[input] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(Gradients {
            grads,
            leaves: self.leaves.borrow().clone(),
        })
    }
}

/// Gradients of one backward pass, addressable by leaf var or by parameter.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    leaves: Vec<(u64, usize)>,
}

impl Gradients {
    /// Gradient of a leaf var; `None` when the var did not influence the loss.
    pub fn wrt(&self, var: &Var<'_>) -> Option<Tensor> {
        self.grads
            .get(var.id)?
            .as_ref()
            .map(|g| Tensor::raw(var.value.shape().to_vec(), g.clone()))
    }

    /// Raw gradient buffer for a registered parameter.
    pub fn for_param(&self, param: &Tensor) -> Option<&[f64]> {
        if !param.is_param() {
            return None;
        }
        let key = param.key();
        let &(_, id) = self.leaves.iter().find(|(k, _)| *k == key)?;
        self.grads.get(id)?.as_deref()
    }

    /// Adds this pass's gradient into `param.grad`; no-op when disconnected.
    pub fn accumulate_into(&self, param: &mut Tensor) {
        if let Some(g) = self.for_param(param) {
            let g = g.to_vec();
            param.accumulate_grad(&g);
        }
    }
}

/// A value on a tape.
#[derive(Clone)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
    value: Tensor,
    tracked: bool,
}

impl<'t> Var<'t> {
    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn data(&self) -> &[f64] {
        self.value.data()
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    /// Whether gradients flow through this var.
    pub fn is_tracked(&self) -> bool {
        self.tracked
    }
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}({:?})", self.id, self.value)
    }
}
