//! Dense `f64` tensors with tape-free reverse-mode differentiation.
//!
//! Every tensor produced by an operation keeps handles to its inputs, so the
//! graph reachable from a loss is exactly the set of tensors that contributed
//! to it. [`Tensor::backward`] walks that graph once in reverse topological
//! order and accumulates gradients into the leaves that require them.
//!
//! Tensors are reference-counted handles (`Rc`), so a graph and everything in
//! it stays on the thread that built it.

mod grad_check;
mod ops;

use std::cell::{Ref, RefCell};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

pub use grad_check::{grad_check, GradCheckResult};
pub(crate) use ops::Op;

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct Tensor(Rc<Node>);

pub(crate) struct Node {
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    grad: RefCell<Option<Vec<f64>>>,
    requires_grad: bool,
    op: Option<Op>,
}

fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::InvalidShape {
            op: "tensor",
            msg: format!("dimensions must be positive, got {shape:?}"),
        });
    }
    let n: usize = shape.iter().product();
    if n != len {
        return Err(Error::InvalidShape {
            op: "tensor",
            msg: format!("shape {shape:?} implies {n} elements, got {len}"),
        });
    }
    Ok(())
}

impl Tensor {
    /// A constant (non-differentiable) tensor.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_shape(&shape, data.len())?;
        Ok(Self::leaf(shape, data, false))
    }

    /// A trainable leaf that accumulates gradients.
    pub fn param(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_shape(&shape, data.len())?;
        Ok(Self::leaf(shape, data, true))
    }

    pub fn scalar(value: f64) -> Self {
        Self::leaf(vec![1], vec![value], false)
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![0.0; n])
    }

    pub fn eye(n: usize) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::new(vec![n, n], data)
    }

    /// Builds a `[rows.len(), cols]` constant from row vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::InvalidShape {
                op: "from_rows",
                msg: format!("ragged rows: {cols} vs {}", bad.len()),
            });
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    fn leaf(shape: Vec<usize>, data: Vec<f64>, requires_grad: bool) -> Self {
        Tensor(Rc::new(Node {
            shape,
            data: RefCell::new(data),
            grad: RefCell::new(None),
            requires_grad,
            op: None,
        }))
    }

    pub(crate) fn from_op(shape: Vec<usize>, data: Vec<f64>, op: Op) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let requires_grad = op.inputs().iter().any(|t| t.requires_grad());
        Tensor(Rc::new(Node {
            shape,
            data: RefCell::new(data),
            grad: RefCell::new(None),
            requires_grad,
            // Constant subgraphs do not need to keep their inputs alive.
            op: requires_grad.then_some(op),
        }))
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn numel(&self) -> usize {
        self.0.shape.iter().product()
    }

    pub fn values(&self) -> Ref<'_, Vec<f64>> {
        self.0.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.data.borrow().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        let v = self.values();
        assert_eq!(v.len(), 1, "item() on tensor of shape {:?}", self.shape());
        v[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.op.is_none()
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.borrow().clone()
    }

    /// Sets the gradient buffer to zeros (present, not absent).
    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = Some(vec![0.0; self.numel()]);
    }

    pub fn clear_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    /// Overwrites the values in place; the shape is fixed.
    pub fn set_values(&self, values: &[f64]) -> Result<()> {
        let mut data = self.0.data.borrow_mut();
        if data.len() != values.len() {
            return Err(Error::ShapeMismatch {
                op: "set_values",
                lhs: self.0.shape.clone(),
                rhs: vec![values.len()],
            });
        }
        data.copy_from_slice(values);
        Ok(())
    }

    /// In-place update of the values, used by optimizers.
    pub fn update<F: FnOnce(&mut [f64])>(&self, f: F) {
        f(&mut self.0.data.borrow_mut());
    }

    /// A constant copy detached from any graph.
    pub fn detach(&self) -> Tensor {
        Self::leaf(self.0.shape.clone(), self.to_vec(), false)
    }

    pub fn ptr_eq(&self, other: &Tensor) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }

    fn key(&self) -> *const Node {
        Rc::as_ptr(&self.0)
    }

    /// Reverse-mode pass from a single-element loss. Gradients are added to
    /// whatever each leaf already holds.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::NonScalarLoss(self.shape().to_vec()));
        }
        if !self.requires_grad() {
            return Ok(());
        }

        let order = self.topo_order();
        let mut grads: HashMap<*const Node, Vec<f64>> = HashMap::new();
        grads.insert(self.key(), vec![1.0]);

        for t in order.iter().rev() {
            let Some(g) = grads.remove(&t.key()) else {
                continue;
            };
            match &t.0.op {
                None => {
                    let mut slot = t.0.grad.borrow_mut();
                    match slot.as_mut() {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                        None => *slot = Some(g),
                    }
                }
                Some(op) => {
                    let out = t.values();
                    op.backward(&t.0.shape, &out, &g, &mut |input, ig| {
                        if !input.requires_grad() {
                            return;
                        }
                        debug_assert_eq!(ig.len(), input.numel());
                        grads
                            .entry(input.key())
                            .and_modify(|acc| acc.iter_mut().zip(&ig).for_each(|(a, b)| *a += b))
                            .or_insert(ig);
                    });
                }
            }
        }
        Ok(())
    }

    /// Nodes requiring grad, inputs before outputs.
    fn topo_order(&self) -> Vec<Tensor> {
        let mut order = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !seen.insert(t.key()) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(op) = &t.0.op {
                for input in op.inputs() {
                    if input.requires_grad() && !seen.contains(&input.key()) {
                        stack.push((input.clone(), false));
                    }
                }
            }
        }
        order
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("values", &*self.values())
            .field("requires_grad", &self.0.requires_grad)
            .finish()
    }
}
