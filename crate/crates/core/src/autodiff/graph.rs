use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::ops::{backward_op, Op};
use super::tensor::{Dtype, Tensor};
use crate::error::{Error, Result};

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    pub(crate) graph: u64,
    pub(crate) index: usize,
}

pub(crate) struct Node {
    pub(crate) op: Op,
    pub(crate) value: Arc<Tensor>,
    /// True when some learnable leaf is upstream of this node.
    pub(crate) grad: bool,
}

/// Append-only computation graph for reverse-mode differentiation.
///
/// Nodes are stored in creation order, which is a topological order, so the
/// backward pass is a single reverse sweep. A graph is used by one thread at
/// a time; build one graph per batch.
pub struct Graph {
    pub(crate) id: u64,
    pub(crate) nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to the learnable leaves.
///
/// Complex leaves receive `dL/dRe + i dL/dIm`, i.e. the two real partial
/// derivatives packed into one complex number.
#[derive(Debug)]
pub struct Gradients {
    graph: u64,
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        if var.graph != self.graph {
            return None;
        }
        self.grads.get(var.index).and_then(|g| g.as_ref())
    }

    /// Moves a gradient out of the map.
    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        if var.graph != self.graph {
            return None;
        }
        self.grads.get_mut(var.index).and_then(|g| g.take())
    }
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self { id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed), nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Learnable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_node(Op::Leaf, Arc::new(value), true)
    }

    /// Non-learnable leaf.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_node(Op::Leaf, Arc::new(value), false)
    }

    /// Non-learnable leaf sharing storage with the caller.
    pub fn constant_shared(&mut self, value: Arc<Tensor>) -> Var {
        self.push_node(Op::Leaf, value, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        assert_eq!(var.graph, self.id, "variable belongs to another graph");
        &self.nodes[var.index].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.value(var).shape()
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.index].grad
    }

    pub(crate) fn check(&self, var: Var) -> Result<&Tensor> {
        if var.graph != self.id || var.index >= self.nodes.len() {
            return Err(Error::ForeignVar);
        }
        Ok(&self.nodes[var.index].value)
    }

    pub(crate) fn check_dtype(&self, var: Var, dtype: Dtype, op: &'static str) -> Result<&Tensor> {
        let t = self.check(var)?;
        if t.dtype() != dtype {
            return Err(Error::Dtype { op, expected: dtype });
        }
        Ok(t)
    }

    fn push_node(&mut self, op: Op, value: Arc<Tensor>, grad: bool) -> Var {
        self.nodes.push(Node { op, value, grad });
        Var { graph: self.id, index: self.nodes.len() - 1 }
    }

    pub(crate) fn push(&mut self, op: Op, value: Tensor) -> Var {
        let grad = op.parents().iter().any(|&p| self.nodes[p].grad);
        self.push_node(op, Arc::new(value), grad)
    }

    /// Op name of the first node (in creation order) holding a NaN or Inf.
    pub fn first_non_finite(&self) -> Option<(usize, &'static str)> {
        self.nodes.iter().enumerate().find(|(_, n)| !n.value.is_finite()).map(|(i, n)| (i, n.op.name()))
    }

    /// Reverse sweep from a real scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let value = self.check(root)?;
        if value.dtype() != Dtype::Real || value.len() != 1 {
            return Err(Error::NotScalar(value.shape().to_vec()));
        }
        if !self.nodes[root.index].grad {
            return Err(Error::Detached);
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root.index + 1];
        grads[root.index] = Some(Tensor::from_real(value.shape().to_vec(), vec![1.0]));
        let mut out: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        for index in (0..=root.index).rev() {
            let node = &self.nodes[index];
            let Some(g) = grads[index].take() else { continue };
            if !node.grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                out[index] = Some(g);
                continue;
            }
            backward_op(self, index, &g, &mut grads);
        }
        Ok(Gradients { graph: self.id, grads: out })
    }

    /// Adds `contribution` into the gradient slot of `parent` when that
    /// parent participates in differentiation.
    pub(crate) fn feed(&self, grads: &mut [Option<Tensor>], parent: usize, contribution: Tensor) {
        if !self.nodes[parent].grad {
            return;
        }
        match &mut grads[parent] {
            Some(acc) => acc.accumulate(&contribution),
            slot @ None => *slot = Some(contribution),
        }
    }

    pub(crate) fn wants(&self, parent: usize) -> bool {
        self.nodes[parent].grad
    }
}
