//! Append-only computation graph with reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order. `evaluate` produces a [`Forward`] holding every node
//! value; `backward` (or `backward_seeded` for vector-Jacobian products)
//! walks the list in reverse and accumulates adjoints. Contributions to a
//! fanned-out node are summed in ascending consumer order, which pins the
//! floating-point result bit-for-bit.

use std::collections::HashMap;
use std::rc::Rc;

use crate::ops::{self, Padding};
use crate::{Error, Result, Tensor};

/// Handle to a node inside one [`Graph`]. Ids are not portable across graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub usize);

/// An operator whose forward value and vector-Jacobian product are supplied
/// by the caller. This is how quantum-circuit subgraphs participate in
/// backpropagation without this crate knowing about circuits.
pub trait CustomOp {
    fn name(&self) -> &str;

    /// Forward value from the input tensors.
    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor>;

    /// Gradients with respect to each input, given the upstream gradient on
    /// the output. Must return exactly one tensor per input, shape-matched.
    fn vjp(&self, inputs: &[&Tensor], output: &Tensor, upstream: &Tensor) -> Result<Vec<Tensor>>;
}

#[derive(Clone)]
enum Op {
    Input { name: String, shape: Vec<usize> },
    Value(Tensor),
    MatMul { transpose_b: bool },
    Conv2d { padding: Padding },
    MaxPool2,
    BiasAdd,
    Tanh,
    Relu,
    Flatten,
    Add,
    Mul,
    Sum,
    Scale(f64),
    SoftmaxCrossEntropy,
    Custom(Rc<dyn CustomOp>),
}

impl Op {
    fn kind(&self) -> &'static str {
        match self {
            Op::Input { .. } => "input",
            Op::Value(_) => "value",
            Op::MatMul { .. } => "matmul",
            Op::Conv2d { .. } => "conv2d",
            Op::MaxPool2 => "maxpool2",
            Op::BiasAdd => "bias_add",
            Op::Tanh => "tanh",
            Op::Relu => "relu",
            Op::Flatten => "flatten",
            Op::Add => "add",
            Op::Mul => "mul",
            Op::Sum => "sum",
            Op::Scale(_) => "scale",
            Op::SoftmaxCrossEntropy => "softmax_cross_entropy",
            Op::Custom(_) => "custom",
        }
    }
}

struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    requires_grad: bool,
}

/// Forward values for every node of a graph, produced by [`Graph::evaluate`].
pub struct Forward {
    values: Vec<Tensor>,
}

impl Forward {
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.values[id.0]
    }
}

/// Adjoints produced by a backward sweep.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to the node, if the node requires
    /// grad and participates in the loss.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    outputs: Vec<(String, NodeId)>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>) -> NodeId {
        for id in &inputs {
            assert!(id.0 < self.nodes.len(), "node id from another graph");
        }
        let requires_grad = match &op {
            Op::Input { .. } => false,
            Op::Value(t) => t.requires_grad(),
            _ => inputs.iter().any(|id| self.nodes[id.0].requires_grad),
        };
        self.nodes.push(Node {
            op,
            inputs,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// A placeholder bound by name at evaluation time.
    pub fn input(&mut self, name: &str, shape: &[usize]) -> NodeId {
        self.push(
            Op::Input {
                name: name.to_string(),
                shape: shape.to_vec(),
            },
            Vec::new(),
        )
    }

    /// A trainable leaf; its gradient is produced by `backward`.
    pub fn parameter(&mut self, tensor: Tensor) -> NodeId {
        self.push(Op::Value(tensor.with_grad()), Vec::new())
    }

    /// A fixed leaf with no gradient.
    pub fn constant(&mut self, tensor: Tensor) -> NodeId {
        let mut t = tensor;
        if t.requires_grad() {
            t = Tensor::new(t.shape(), t.data().to_vec()).expect("same shape");
        }
        self.push(Op::Value(t), Vec::new())
    }

    /// Replaces the stored tensor of a parameter or constant leaf.
    pub fn set_value(&mut self, id: NodeId, data: &[f64]) -> Result<()> {
        let node = &mut self.nodes[id.0];
        match &mut node.op {
            Op::Value(t) => {
                if t.numel() != data.len() {
                    return Err(Error::ShapeMismatch {
                        node: Some(id.0),
                        detail: format!(
                            "set_value length {} does not match node numel {}",
                            data.len(),
                            t.numel()
                        ),
                    });
                }
                t.data_mut().copy_from_slice(data);
                Ok(())
            }
            other => Err(Error::ShapeMismatch {
                node: Some(id.0),
                detail: format!("set_value on non-leaf node of kind {}", other.kind()),
            }),
        }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::MatMul { transpose_b: false }, vec![a, b])
    }

    /// `a · bᵀ`; used for dense layers whose weights are stored [out, in].
    pub fn matmul_tb(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::MatMul { transpose_b: true }, vec![a, b])
    }

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, padding: Padding) -> NodeId {
        self.push(Op::Conv2d { padding }, vec![x, w])
    }

    pub fn maxpool2(&mut self, x: NodeId) -> NodeId {
        self.push(Op::MaxPool2, vec![x])
    }

    pub fn bias_add(&mut self, x: NodeId, bias: NodeId) -> NodeId {
        self.push(Op::BiasAdd, vec![x, bias])
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Tanh, vec![x])
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Relu, vec![x])
    }

    pub fn flatten(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Flatten, vec![x])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Add, vec![a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Mul, vec![a, b])
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Sum, vec![x])
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        self.push(Op::Scale(factor), vec![x])
    }

    /// Labels must be a no-grad leaf holding integer class indices.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, labels: NodeId) -> NodeId {
        assert!(
            !self.nodes[labels.0].requires_grad,
            "labels must not require grad"
        );
        self.push(Op::SoftmaxCrossEntropy, vec![logits, labels])
    }

    pub fn custom(&mut self, op: Rc<dyn CustomOp>, inputs: &[NodeId]) -> NodeId {
        self.push(Op::Custom(op), inputs.to_vec())
    }

    /// Names a node so callers of `evaluate` can look it up by string.
    pub fn mark_output(&mut self, name: &str, id: NodeId) {
        self.outputs.push((name.to_string(), id));
    }

    pub fn output_id(&self, name: &str) -> Option<NodeId> {
        self.outputs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, id)| *id)
    }

    fn node_err(&self, id: usize, err: Error) -> Error {
        match err {
            Error::ShapeMismatch { node: None, detail } => Error::ShapeMismatch {
                node: Some(id),
                detail,
            },
            other => other,
        }
    }

    /// Runs the forward pass with the given named inputs bound.
    pub fn evaluate(&self, inputs: &[(&str, &Tensor)]) -> Result<Forward> {
        let mut bound: HashMap<&str, &Tensor> = HashMap::new();
        for (name, t) in inputs {
            if bound.insert(name, t).is_some() {
                return Err(Error::UnknownInput {
                    name: format!("{name} bound twice"),
                });
            }
        }
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for (idx, node) in self.nodes.iter().enumerate() {
            let get = |id: &NodeId| &values[id.0];
            let value = match &node.op {
                Op::Input { name, shape } => {
                    let t = bound.get(name.as_str()).ok_or(Error::UnknownInput {
                        name: name.clone(),
                    })?;
                    if t.shape() != shape.as_slice() {
                        return Err(Error::ShapeMismatch {
                            node: Some(idx),
                            detail: format!(
                                "input '{name}' expects shape {:?}, got {:?}",
                                shape,
                                t.shape()
                            ),
                        });
                    }
                    if !t.is_finite() {
                        return Err(Error::NonFinite {
                            context: format!("input '{name}'"),
                        });
                    }
                    (*t).clone()
                }
                Op::Value(t) => {
                    if !t.is_finite() {
                        return Err(Error::NonFinite {
                            context: format!("leaf value at node {idx}"),
                        });
                    }
                    t.clone()
                }
                Op::MatMul { transpose_b } => {
                    ops::matmul(get(&node.inputs[0]), get(&node.inputs[1]), *transpose_b)
                        .map_err(|e| self.node_err(idx, e))?
                }
                Op::Conv2d { padding } => {
                    ops::conv2d(get(&node.inputs[0]), get(&node.inputs[1]), *padding)
                        .map_err(|e| self.node_err(idx, e))?
                }
                Op::MaxPool2 => {
                    ops::maxpool2(get(&node.inputs[0])).map_err(|e| self.node_err(idx, e))?
                }
                Op::BiasAdd => ops::bias_add(get(&node.inputs[0]), get(&node.inputs[1]))
                    .map_err(|e| self.node_err(idx, e))?,
                Op::Tanh => ops::tanh(get(&node.inputs[0])),
                Op::Relu => ops::relu(get(&node.inputs[0])),
                Op::Flatten => {
                    let x = get(&node.inputs[0]);
                    let xs = x.shape();
                    if xs.len() < 2 {
                        return Err(Error::ShapeMismatch {
                            node: Some(idx),
                            detail: format!("flatten expects rank >= 2, got {xs:?}"),
                        });
                    }
                    let rest: usize = xs[1..].iter().product();
                    x.reshaped(&[xs[0], rest])
                        .map_err(|e| self.node_err(idx, e))?
                }
                Op::Add => ops::add(get(&node.inputs[0]), get(&node.inputs[1]))
                    .map_err(|e| self.node_err(idx, e))?,
                Op::Mul => ops::mul(get(&node.inputs[0]), get(&node.inputs[1]))
                    .map_err(|e| self.node_err(idx, e))?,
                Op::Sum => ops::sum(get(&node.inputs[0])),
                Op::Scale(factor) => ops::scale(get(&node.inputs[0]), *factor),
                Op::SoftmaxCrossEntropy => {
                    ops::softmax_cross_entropy(get(&node.inputs[0]), get(&node.inputs[1]))
                        .map_err(|e| self.node_err(idx, e))?
                }
                Op::Custom(op) => {
                    let args: Vec<&Tensor> = node.inputs.iter().map(get).collect();
                    op.forward(&args).map_err(|e| self.node_err(idx, e))?
                }
            };
            values.push(value);
        }
        Ok(Forward { values })
    }

    /// Backward from a scalar loss node, seeding with dLoss/dLoss = 1.
    pub fn backward(&self, forward: &Forward, loss: NodeId) -> Result<Gradients> {
        let loss_value = forward.value(loss);
        if !loss_value.is_scalar() {
            return Err(Error::NotScalar {
                shape: loss_value.shape().to_vec(),
            });
        }
        self.backward_seeded(forward, loss, &Tensor::scalar(1.0))
    }

    /// Backward from an arbitrary node with a caller-supplied upstream
    /// gradient (the vector in a vector-Jacobian product).
    pub fn backward_seeded(
        &self,
        forward: &Forward,
        seed_node: NodeId,
        seed: &Tensor,
    ) -> Result<Gradients> {
        if forward.values.len() != self.nodes.len() {
            return Err(Error::NotEvaluated);
        }
        if seed.shape() != forward.value(seed_node).shape() {
            return Err(Error::ShapeMismatch {
                node: Some(seed_node.0),
                detail: format!(
                    "seed shape {:?} does not match node shape {:?}",
                    seed.shape(),
                    forward.value(seed_node).shape()
                ),
            });
        }
        // Contributions are appended while sweeping consumers in descending
        // node id, so folding them back-to-front sums in ascending order.
        let mut contribs: Vec<Vec<Tensor>> = vec![Vec::new(); self.nodes.len()];
        contribs[seed_node.0].push(seed.clone());
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];

        for idx in (0..self.nodes.len()).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad && idx != seed_node.0 {
                contribs[idx].clear();
                continue;
            }
            let parts = std::mem::take(&mut contribs[idx]);
            if parts.is_empty() {
                continue;
            }
            let mut acc: Option<Tensor> = None;
            for part in parts.into_iter().rev() {
                acc = Some(match acc {
                    None => part,
                    Some(a) => ops::add(&a, &part).map_err(|e| self.node_err(idx, e))?,
                });
            }
            let upstream = acc.expect("nonempty parts");

            let get = |id: &NodeId| forward.value(*id);
            match &node.op {
                Op::Input { .. } | Op::Value(_) => {}
                Op::MatMul { transpose_b } => {
                    let (da, db) = ops::matmul_vjp(
                        get(&node.inputs[0]),
                        get(&node.inputs[1]),
                        *transpose_b,
                        &upstream,
                    )
                    .map_err(|e| self.node_err(idx, e))?;
                    contribs[node.inputs[0].0].push(da);
                    contribs[node.inputs[1].0].push(db);
                }
                Op::Conv2d { padding } => {
                    let (dx, dw) = ops::conv2d_vjp(
                        get(&node.inputs[0]),
                        get(&node.inputs[1]),
                        *padding,
                        &upstream,
                    )
                    .map_err(|e| self.node_err(idx, e))?;
                    contribs[node.inputs[0].0].push(dx);
                    contribs[node.inputs[1].0].push(dw);
                }
                Op::MaxPool2 => {
                    let dx = ops::maxpool2_vjp(get(&node.inputs[0]), &upstream)
                        .map_err(|e| self.node_err(idx, e))?;
                    contribs[node.inputs[0].0].push(dx);
                }
                Op::BiasAdd => {
                    let (dx, db) = ops::bias_add_vjp(get(&node.inputs[0]), &upstream)
                        .map_err(|e| self.node_err(idx, e))?;
                    contribs[node.inputs[0].0].push(dx);
                    contribs[node.inputs[1].0].push(db);
                }
                Op::Tanh => {
                    let dx = ops::tanh_vjp(&forward.values[idx], &upstream);
                    contribs[node.inputs[0].0].push(dx);
                }
                Op::Relu => {
                    let dx = ops::relu_vjp(get(&node.inputs[0]), &upstream);
                    contribs[node.inputs[0].0].push(dx);
                }
                Op::Flatten => {
                    let dx = upstream
                        .reshaped(get(&node.inputs[0]).shape())
                        .map_err(|e| self.node_err(idx, e))?;
                    contribs[node.inputs[0].0].push(dx);
                }
                Op::Add => {
                    contribs[node.inputs[0].0].push(upstream.clone());
                    contribs[node.inputs[1].0].push(upstream.clone());
                }
                Op::Mul => {
                    let da = ops::mul(&upstream, get(&node.inputs[1]))
                        .map_err(|e| self.node_err(idx, e))?;
                    let db = ops::mul(&upstream, get(&node.inputs[0]))
                        .map_err(|e| self.node_err(idx, e))?;
                    contribs[node.inputs[0].0].push(da);
                    contribs[node.inputs[1].0].push(db);
                }
                Op::Sum => {
                    let u = upstream.scalar_value()?;
                    contribs[node.inputs[0].0]
                        .push(Tensor::filled(get(&node.inputs[0]).shape(), u));
                }
                Op::Scale(factor) => {
                    contribs[node.inputs[0].0].push(ops::scale(&upstream, *factor));
                }
                Op::SoftmaxCrossEntropy => {
                    let dlogits = ops::softmax_cross_entropy_vjp(
                        get(&node.inputs[0]),
                        get(&node.inputs[1]),
                        &upstream,
                    )
                    .map_err(|e| self.node_err(idx, e))?;
                    contribs[node.inputs[0].0].push(dlogits);
                }
                Op::Custom(op) => {
                    let args: Vec<&Tensor> = node.inputs.iter().map(get).collect();
                    let dins = op
                        .vjp(&args, &forward.values[idx], &upstream)
                        .map_err(|e| self.node_err(idx, e))?;
                    if dins.len() != node.inputs.len() {
                        return Err(Error::ShapeMismatch {
                            node: Some(idx),
                            detail: format!(
                                "custom op '{}' returned {} gradients for {} inputs",
                                op.name(),
                                dins.len(),
                                node.inputs.len()
                            ),
                        });
                    }
                    for (input, din) in node.inputs.iter().zip(dins) {
                        contribs[input.0].push(din);
                    }
                }
            }
            grads[idx] = Some(upstream);
        }
        Ok(Gradients { grads })
    }
}
