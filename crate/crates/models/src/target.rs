//! Binding a flat θ to an architecture and running it.

use qt_diffcore::{Graph, NodeId, Tensor};

use crate::arch::{layout, Activation, ArchitectureSpec, LayerSpec, ParamLayout};
use crate::{Error, Result};

/// An architecture with bound parameter tensors. Immutable after `inject`;
/// predictions are a pure function of θ and the input batch.
#[derive(Debug, Clone)]
pub struct TargetModel {
    spec: ArchitectureSpec,
    params: Vec<Tensor>,
}

/// Splits θ into layout-shaped tensors and binds them to the architecture.
pub fn inject(theta: &[f64], spec: &ArchitectureSpec) -> Result<TargetModel> {
    let expected = spec.param_count();
    if theta.len() != expected {
        return Err(Error::ThetaLength {
            expected,
            got: theta.len(),
        });
    }
    spec.validate()?;
    let l = layout(spec);
    let mut params = Vec::with_capacity(l.entries.len());
    for entry in &l.entries {
        params.push(Tensor::new(
            &entry.shape,
            theta[entry.offset..entry.offset + entry.len()].to_vec(),
        )?);
    }
    Ok(TargetModel {
        spec: spec.clone(),
        params,
    })
}

impl TargetModel {
    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn layout(&self) -> ParamLayout {
        layout(&self.spec)
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    /// Reassembles the flat θ from the bound tensors, bit for bit.
    pub fn read_back_theta(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.spec.param_count());
        for t in &self.params {
            out.extend_from_slice(t.data());
        }
        out
    }

    /// Logits for a batch; `images` must match the spec's input shape.
    pub fn forward(&self, images: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let x = g.constant(images.clone());
        let (_, logits) = build_model_graph(&mut g, &self.spec, &self.params, x)?;
        let fwd = g.evaluate(&[])?;
        Ok(fwd.value(logits).clone())
    }
}

/// Appends the architecture's forward pass to a graph, binding the given
/// parameter tensors as trainable nodes. Returns the parameter nodes in
/// layout order and the logits node.
pub fn build_model_graph(
    g: &mut Graph,
    spec: &ArchitectureSpec,
    params: &[Tensor],
    input: NodeId,
) -> Result<(Vec<NodeId>, NodeId)> {
    let l = layout(spec);
    if params.len() != l.entries.len() {
        return Err(Error::ThetaLength {
            expected: l.entries.len(),
            got: params.len(),
        });
    }
    for (entry, tensor) in l.entries.iter().zip(params) {
        if tensor.shape() != entry.shape.as_slice() {
            return Err(Error::BadArchitecture {
                detail: format!(
                    "parameter tensor for {} has shape {:?}, expected {:?}",
                    entry.name,
                    tensor.shape(),
                    entry.shape
                ),
            });
        }
    }
    let mut param_nodes = Vec::with_capacity(params.len());
    let mut next_param = 0;
    let mut h = input;
    for layer in &spec.layers {
        match layer {
            LayerSpec::Conv2d {
                padding, activation, ..
            } => {
                let w = g.parameter(params[next_param].clone());
                let b = g.parameter(params[next_param + 1].clone());
                next_param += 2;
                param_nodes.push(w);
                param_nodes.push(b);
                let c = g.conv2d(h, w, *padding);
                let cb = g.bias_add(c, b);
                h = apply_activation(g, cb, *activation);
            }
            LayerSpec::MaxPool2 => {
                h = g.maxpool2(h);
            }
            LayerSpec::Flatten => {
                h = g.flatten(h);
            }
            LayerSpec::Dense { activation, .. } => {
                let w = g.parameter(params[next_param].clone());
                let b = g.parameter(params[next_param + 1].clone());
                next_param += 2;
                param_nodes.push(w);
                param_nodes.push(b);
                let z = g.matmul_tb(h, w);
                let zb = g.bias_add(z, b);
                h = apply_activation(g, zb, *activation);
            }
        }
    }
    Ok((param_nodes, h))
}

fn apply_activation(g: &mut Graph, x: NodeId, activation: Activation) -> NodeId {
    match activation {
        Activation::Linear => x,
        Activation::Relu => g.relu(x),
        Activation::Tanh => g.tanh(x),
    }
}

/// Mean categorical cross-entropy of logits against integer labels.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let label_tensor = Tensor::new(&[labels.len()], labels.iter().map(|l| *l as f64).collect())?;
    let loss = qt_diffcore::ops::softmax_cross_entropy(logits, &label_tensor)?;
    Ok(loss.scalar_value()?)
}

/// Fraction of rows whose argmax matches the label; argmax ties break toward
/// the lowest class index.
pub fn accuracy(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let preds = qt_diffcore::ops::argmax_rows(logits)?;
    if preds.len() != labels.len() {
        return Err(Error::BadArchitecture {
            detail: format!(
                "{} predictions for {} labels",
                preds.len(),
                labels.len()
            ),
        });
    }
    let hits = preds
        .iter()
        .zip(labels)
        .filter(|(p, l)| *p == *l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}
