//! From measurement probabilities to classical weights.
//!
//! The pipeline: run the ansatz, assemble the basis-input matrix (basis bits
//! plus the measured probability per row), and push every row through the
//! small tanh network `G` to produce one classical parameter each. The
//! ansatz enters the computation graph through a custom-gradient hook, so a
//! single backward sweep yields gradients for both the circuit angles and
//! the mapping parameters.

use std::rc::Rc;

use qt_diffcore::{CustomOp, Forward, Graph, NodeId, Tensor};
use qt_quantum::{basis_bits, ProbabilityVector, QtAnsatz};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("model size M must be at least 2, got {m}")]
    DegenerateModel { m: usize },

    #[error("M = {m} exceeds the 2^{num_qubits} basis states")]
    TooManyParameters { m: usize, num_qubits: usize },

    #[error("invalid mapping model: {detail}")]
    InvalidModel { detail: String },

    #[error(transparent)]
    Graph(#[from] qt_diffcore::Error),

    #[error(transparent)]
    Quantum(#[from] qt_quantum::Error),
}

/// How the probability column of the basis-input matrix is scaled.
///
/// Raw probabilities average 2^−N, which at 13+ qubits is a very small
/// input feature; `Pow2` multiplies by 2^N for trainability studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleMode {
    #[default]
    Raw,
    Pow2,
}

impl ScaleMode {
    pub fn factor(self, num_qubits: usize) -> f64 {
        match self {
            ScaleMode::Raw => 1.0,
            ScaleMode::Pow2 => (1u64 << num_qubits) as f64,
        }
    }
}

/// N = ⌈log₂ M⌉, the qubit count whose basis spans all M parameters.
pub fn required_qubits(m: usize) -> Result<usize> {
    if m < 2 {
        return Err(Error::DegenerateModel { m });
    }
    Ok((m - 1).ilog2() as usize + 1)
}

/// The M×(N+1) matrix whose row i is the bits of basis index i followed by
/// the (optionally scaled) measured probability of that basis state.
#[derive(Debug, Clone)]
pub struct BasisInputMatrix {
    num_qubits: usize,
    tensor: Tensor,
}

impl BasisInputMatrix {
    /// Validates an externally assembled matrix: shape [M, N+1] with
    /// M ≤ 2^N, bit entries in {0, 1}, probabilities in [0, 1].
    pub fn from_tensor(tensor: Tensor, num_qubits: usize) -> Result<Self> {
        let shape = tensor.shape();
        if shape.len() != 2 || shape[1] != num_qubits + 1 {
            return Err(Error::InvalidModel {
                detail: format!(
                    "basis-input matrix must be [M, {}], got {:?}",
                    num_qubits + 1,
                    shape
                ),
            });
        }
        if shape[0] > (1usize << num_qubits) {
            return Err(Error::TooManyParameters {
                m: shape[0],
                num_qubits,
            });
        }
        let width = num_qubits + 1;
        for (i, row) in tensor.data().chunks(width).enumerate() {
            for (q, b) in row[..num_qubits].iter().enumerate() {
                if *b != 0.0 && *b != 1.0 {
                    return Err(Error::InvalidModel {
                        detail: format!("bit column {q} of row {i} holds {b}"),
                    });
                }
            }
            if !(0.0..=1.0).contains(&row[num_qubits]) {
                return Err(Error::InvalidModel {
                    detail: format!("probability column of row {i} holds {}", row[num_qubits]),
                });
            }
        }
        Ok(BasisInputMatrix { num_qubits, tensor })
    }

    pub fn rows(&self) -> usize {
        self.tensor.shape()[0]
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.num_qubits + 1;
        &self.tensor.data()[i * w..(i + 1) * w]
    }
}

/// Assembles the basis-input matrix for the first `m` of the 2^N basis states.
pub fn build_basis_inputs(
    num_qubits: usize,
    m: usize,
    p: &ProbabilityVector,
    scale_mode: ScaleMode,
) -> Result<BasisInputMatrix> {
    if m > (1usize << num_qubits) {
        return Err(Error::TooManyParameters { m, num_qubits });
    }
    if p.len() != 1 << num_qubits {
        return Err(Error::InvalidModel {
            detail: format!(
                "probability vector length {} does not match 2^{num_qubits}",
                p.len()
            ),
        });
    }
    let factor = scale_mode.factor(num_qubits);
    let width = num_qubits + 1;
    let mut data = vec![0.0; m * width];
    for i in 0..m {
        for (q, bit) in basis_bits(i, num_qubits).into_iter().enumerate() {
            data[i * width + q] = bit as f64;
        }
        data[i * width + num_qubits] = factor * p.values()[i];
    }
    Ok(BasisInputMatrix {
        num_qubits,
        tensor: Tensor::new(&[m, width], data)?,
    })
}

/// The classical parameters produced by the mapping network, one per row.
#[derive(Debug, Clone)]
pub struct GeneratedParameters {
    pub theta: Vec<f64>,
}

/// The mapping network `G`: a stack of dense layers with tanh between them
/// and a linear head, so outputs range over all of ℝ. Parameters live as
/// per-layer weight/bias tensors; the flat layout (weights then bias, layer
/// order) is used for counting, reporting, and round-trips.
#[derive(Debug, Clone)]
pub struct MappingModel {
    layer_dims: Vec<usize>,
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
}

impl MappingModel {
    fn validate_dims(layer_dims: &[usize]) -> Result<()> {
        if layer_dims.len() < 2 {
            return Err(Error::InvalidModel {
                detail: format!("need at least input and output dims, got {layer_dims:?}"),
            });
        }
        if layer_dims.iter().any(|d| *d == 0) {
            return Err(Error::InvalidModel {
                detail: format!("zero-sized layer in {layer_dims:?}"),
            });
        }
        if *layer_dims.last().unwrap() != 1 {
            return Err(Error::InvalidModel {
                detail: format!("output dimension must be 1, got {layer_dims:?}"),
            });
        }
        Ok(())
    }

    /// Σ (dᵢ·dᵢ₊₁ + dᵢ₊₁) over consecutive dims.
    pub fn param_count_for(layer_dims: &[usize]) -> usize {
        layer_dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Seeded init: every layer's weights and bias drawn from
    /// U(−1/√fan_in, +1/√fan_in), weights row-major first, then bias.
    pub fn init(layer_dims: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        Self::validate_dims(layer_dims)?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let wdata: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            let bdata: Vec<f64> = (0..fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
            weights.push(Tensor::new(&[fan_out, fan_in], wdata)?);
            biases.push(Tensor::new(&[fan_out], bdata)?);
        }
        Ok(MappingModel {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
        })
    }

    /// Rebuilds a model from the flat parameter vector.
    pub fn from_flat(layer_dims: &[usize], gamma: &[f64]) -> Result<Self> {
        Self::validate_dims(layer_dims)?;
        let expected = Self::param_count_for(layer_dims);
        if gamma.len() != expected {
            return Err(Error::InvalidModel {
                detail: format!(
                    "gamma length {} does not match dims {:?} (expected {})",
                    gamma.len(),
                    layer_dims,
                    expected
                ),
            });
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut offset = 0;
        for w in layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let wlen = fan_in * fan_out;
            weights.push(Tensor::new(
                &[fan_out, fan_in],
                gamma[offset..offset + wlen].to_vec(),
            )?);
            offset += wlen;
            biases.push(Tensor::new(
                &[fan_out],
                gamma[offset..offset + fan_out].to_vec(),
            )?);
            offset += fan_out;
        }
        Ok(MappingModel {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
        })
    }

    /// Flat view: per layer, weights row-major then bias.
    pub fn flat_gamma(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b.data());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        Self::param_count_for(&self.layer_dims)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    /// Per-layer tensors in optimizer order (weights, bias, per layer).
    pub fn param_tensors(&self) -> Vec<Tensor> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.clone());
            out.push(b.clone());
        }
        out
    }

    /// Writes optimizer-order tensors back into the model.
    pub fn set_param_tensors(&mut self, tensors: &[Tensor]) -> Result<()> {
        if tensors.len() != self.weights.len() * 2 {
            return Err(Error::InvalidModel {
                detail: format!(
                    "expected {} tensors, got {}",
                    self.weights.len() * 2,
                    tensors.len()
                ),
            });
        }
        for (i, pair) in tensors.chunks(2).enumerate() {
            if pair[0].shape() != self.weights[i].shape()
                || pair[1].shape() != self.biases[i].shape()
            {
                return Err(Error::InvalidModel {
                    detail: format!("tensor shapes at layer {i} do not match"),
                });
            }
            self.weights[i] = pair[0].clone();
            self.biases[i] = pair[1].clone();
        }
        Ok(())
    }

    /// Appends the layer stack to a graph: x → (linear → tanh)* → linear.
    /// Returns the parameter nodes (weight, bias per layer) and the output.
    fn build_graph(&self, g: &mut Graph, x: NodeId) -> (Vec<(NodeId, NodeId)>, NodeId) {
        let mut param_nodes = Vec::new();
        let mut h = x;
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let wn = g.parameter(w.clone());
            let bn = g.parameter(b.clone());
            let z = g.matmul_tb(h, wn);
            let zb = g.bias_add(z, bn);
            h = if l < last { g.tanh(zb) } else { zb };
            param_nodes.push((wn, bn));
        }
        (param_nodes, h)
    }
}

/// Applies the mapping network to every row of the basis-input matrix.
pub fn mapping_forward(model: &MappingModel, x: &BasisInputMatrix) -> Result<GeneratedParameters> {
    if x.tensor().shape()[1] != model.input_dim() {
        return Err(Error::InvalidModel {
            detail: format!(
                "input width {} does not match model input dim {}",
                x.tensor().shape()[1],
                model.input_dim()
            ),
        });
    }
    let mut g = Graph::new();
    let xn = g.constant(x.tensor().clone());
    let (_, out) = model.build_graph(&mut g, xn);
    let fwd = g.evaluate(&[])?;
    Ok(GeneratedParameters {
        theta: fwd.value(out).data().to_vec(),
    })
}

/// The ansatz-to-basis-inputs bridge, exposed to the graph as a custom
/// operator: forward runs the circuit and assembles X; the backward hook
/// feeds the probability-column gradient into the adjoint sweep.
struct AnsatzInputHook {
    num_qubits: usize,
    n_block: usize,
    m: usize,
    scale_mode: ScaleMode,
}

impl AnsatzInputHook {
    fn ansatz_from(&self, phi: &Tensor) -> qt_diffcore::Result<QtAnsatz> {
        QtAnsatz::new(self.num_qubits, self.n_block, phi.data().to_vec()).map_err(|e| {
            qt_diffcore::Error::CustomOpFailed {
                name: "ansatz_basis_inputs".into(),
                detail: e.to_string(),
            }
        })
    }
}

impl CustomOp for AnsatzInputHook {
    fn name(&self) -> &str {
        "ansatz_basis_inputs"
    }

    fn forward(&self, inputs: &[&Tensor]) -> qt_diffcore::Result<Tensor> {
        let ansatz = self.ansatz_from(inputs[0])?;
        let p = ansatz.run();
        let x = build_basis_inputs(self.num_qubits, self.m, &p, self.scale_mode).map_err(|e| {
            qt_diffcore::Error::CustomOpFailed {
                name: "ansatz_basis_inputs".into(),
                detail: e.to_string(),
            }
        })?;
        Ok(x.tensor().clone())
    }

    fn vjp(
        &self,
        inputs: &[&Tensor],
        _output: &Tensor,
        upstream: &Tensor,
    ) -> qt_diffcore::Result<Vec<Tensor>> {
        let ansatz = self.ansatz_from(inputs[0])?;
        // Only the probability column depends on the angles; the bit
        // columns are constants. States beyond the first m rows never
        // reach the mapping network, so their upstream is zero.
        let width = self.num_qubits + 1;
        let factor = self.scale_mode.factor(self.num_qubits);
        let mut up_p = vec![0.0; 1usize << self.num_qubits];
        for i in 0..self.m {
            up_p[i] = factor * upstream.data()[i * width + self.num_qubits];
        }
        let d_phi =
            ansatz
                .adjoint_gradient(&up_p)
                .map_err(|e| qt_diffcore::Error::CustomOpFailed {
                    name: "ansatz_basis_inputs".into(),
                    detail: e.to_string(),
                })?;
        Ok(vec![Tensor::new(inputs[0].shape(), d_phi)?])
    }
}

/// Gradients of a scalar loss with respect to the angle vector and the
/// mapping parameters, in the same optimizer order as
/// [`MappingModel::param_tensors`].
#[derive(Debug)]
pub struct ChainGradients {
    pub d_phi: Vec<f64>,
    pub d_gamma: Vec<Tensor>,
}

/// Everything produced by one weight-generation pass, plus the backward
/// closure over the captured graph.
pub struct GeneratedWeights {
    graph: Graph,
    forward: Forward,
    phi_node: NodeId,
    gamma_nodes: Vec<(NodeId, NodeId)>,
    theta_node: NodeId,
    theta: Vec<f64>,
}

impl GeneratedWeights {
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Maps dLoss/dθ back to (dLoss/dφ, dLoss/dγ) through the basis-input
    /// probabilities and the mapping network.
    pub fn backward(&self, d_theta: &[f64]) -> Result<ChainGradients> {
        let m = self.theta.len();
        if d_theta.len() != m {
            return Err(Error::InvalidModel {
                detail: format!("d_theta length {} does not match M = {m}", d_theta.len()),
            });
        }
        let seed = Tensor::new(&[m, 1], d_theta.to_vec())?;
        let grads = self
            .graph
            .backward_seeded(&self.forward, self.theta_node, &seed)?;
        let d_phi = grads
            .grad(self.phi_node)
            .map(|t| t.data().to_vec())
            .unwrap_or_else(|| vec![0.0; self.forward.value(self.phi_node).numel()]);
        let mut d_gamma = Vec::new();
        for (wn, bn) in &self.gamma_nodes {
            for node in [wn, bn] {
                d_gamma.push(match grads.grad(*node) {
                    Some(t) => t.clone(),
                    None => Tensor::zeros(self.forward.value(*node).shape()),
                });
            }
        }
        Ok(ChainGradients { d_phi, d_gamma })
    }
}

/// Runs ansatz → basis inputs → mapping network and captures the graph for
/// the gradient chain. θ has length exactly `m` no matter how many of the
/// 2^N basis states go unused.
pub fn generate_weights(
    ansatz: &QtAnsatz,
    model: &MappingModel,
    m: usize,
    scale_mode: ScaleMode,
) -> Result<GeneratedWeights> {
    if m < 2 {
        return Err(Error::DegenerateModel { m });
    }
    if m > (1usize << ansatz.num_qubits()) {
        return Err(Error::TooManyParameters {
            m,
            num_qubits: ansatz.num_qubits(),
        });
    }
    if model.input_dim() != ansatz.num_qubits() + 1 {
        return Err(Error::InvalidModel {
            detail: format!(
                "mapping input dim {} does not match N+1 = {}",
                model.input_dim(),
                ansatz.num_qubits() + 1
            ),
        });
    }
    let mut graph = Graph::new();
    let phi_tensor = Tensor::new(&[ansatz.param_count()], ansatz.phi().to_vec())?;
    let phi_node = graph.parameter(phi_tensor);
    let hook = Rc::new(AnsatzInputHook {
        num_qubits: ansatz.num_qubits(),
        n_block: ansatz.n_block(),
        m,
        scale_mode,
    });
    let x_node = graph.custom(hook, &[phi_node]);
    let (gamma_nodes, theta_node) = model.build_graph(&mut graph, x_node);
    let forward = graph.evaluate(&[])?;
    let theta = forward.value(theta_node).data().to_vec();
    Ok(GeneratedWeights {
        graph,
        forward,
        phi_node,
        gamma_nodes,
        theta_node,
        theta,
    })
}

/// Seeded angle initialization: U(−π, π) per parameter.
pub fn init_phi(num_qubits: usize, n_block: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..num_qubits * n_block)
        .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn required_qubits_matches_the_ceiling_rule() {
        assert_eq!(required_qubits(2).unwrap(), 1);
        assert_eq!(required_qubits(3).unwrap(), 2);
        assert_eq!(required_qubits(4).unwrap(), 2);
        assert_eq!(required_qubits(5).unwrap(), 3);
        assert_eq!(required_qubits(6690).unwrap(), 13);
        assert_eq!(required_qubits(285226).unwrap(), 19);
        assert!(required_qubits(1).is_err());
        assert!(required_qubits(0).is_err());
    }

    #[test]
    fn basis_inputs_match_the_worked_seven_qubit_row() {
        // p with mass 0.023 on index 36 (0100100) and the rest on index 0
        let mut values = vec![0.0; 128];
        values[36] = 0.023;
        values[0] = 0.977;
        let p = ProbabilityVector::new(values).unwrap();
        let x = build_basis_inputs(7, 128, &p, ScaleMode::Raw).unwrap();
        assert_eq!(x.row(36), &[0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.023]);
    }

    #[test]
    fn basis_inputs_enumerate_bits_in_order() {
        let p = ProbabilityVector::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let x = build_basis_inputs(2, 4, &p, ScaleMode::Raw).unwrap();
        assert_eq!(x.row(0), &[0.0, 0.0, 1.0]);
        assert_eq!(x.row(1), &[0.0, 1.0, 0.0]);
        assert_eq!(x.row(2), &[1.0, 0.0, 0.0]);
        assert_eq!(x.row(3), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn pow2_scaling_of_a_uniform_distribution_is_one() {
        let p = ProbabilityVector::new(vec![0.125; 8]).unwrap();
        let x = build_basis_inputs(3, 8, &p, ScaleMode::Pow2).unwrap();
        for i in 0..8 {
            assert_eq!(x.row(i)[3], 1.0);
        }
    }

    #[test]
    fn too_many_rows_is_rejected() {
        let p = ProbabilityVector::new(vec![0.25; 4]).unwrap();
        assert!(matches!(
            build_basis_inputs(2, 5, &p, ScaleMode::Raw),
            Err(Error::TooManyParameters { .. })
        ));
    }

    #[test]
    fn zero_gamma_maps_everything_to_zero() {
        let model = MappingModel::from_flat(&[3, 4, 1], &vec![0.0; 3 * 4 + 4 + 4 + 1]).unwrap();
        let p = ProbabilityVector::new(vec![0.25; 4]).unwrap();
        let x = build_basis_inputs(2, 4, &p, ScaleMode::Raw).unwrap();
        let theta = mapping_forward(&model, &x).unwrap();
        assert_eq!(theta.theta, vec![0.0; 4]);
    }

    #[test]
    fn single_layer_model_is_affine() {
        // dims [3, 1]: theta_i = w · x_i + b
        let gamma = vec![0.5, -1.0, 2.0, 0.25]; // w = [0.5, -1, 2], b = 0.25
        let model = MappingModel::from_flat(&[3, 1], &gamma).unwrap();
        let p = ProbabilityVector::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let x = build_basis_inputs(2, 3, &p, ScaleMode::Raw).unwrap();
        let theta = mapping_forward(&model, &x).unwrap();
        for (i, t) in theta.theta.iter().enumerate() {
            let r = x.row(i);
            let expected = 0.5 * r[0] - 1.0 * r[1] + 2.0 * r[2] + 0.25;
            assert!((t - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn mapping_parameter_count_matches_the_shipped_configurations() {
        assert_eq!(MappingModel::param_count_for(&[14, 4, 20, 4, 1]), 249);
        assert_eq!(MappingModel::param_count_for(&[20, 40, 200, 40, 1]), 17121);
    }

    #[test]
    fn flat_gamma_round_trips_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = MappingModel::init(&[6, 4, 1], &mut rng).unwrap();
        let flat = model.flat_gamma();
        let rebuilt = MappingModel::from_flat(&[6, 4, 1], &flat).unwrap();
        assert_eq!(flat, rebuilt.flat_gamma());
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = MappingModel::init(&[16, 4, 1], &mut rng).unwrap();
        let bound0 = 1.0 / 4.0; // 1/sqrt(16)
        for v in model.weights[0].data() {
            assert!(v.abs() <= bound0);
        }
        let bound1 = 1.0 / 2.0;
        for v in model.weights[1].data() {
            assert!(v.abs() <= bound1);
        }
    }

    #[test]
    fn output_dim_must_be_one() {
        assert!(MappingModel::from_flat(&[3, 2], &vec![0.0; 8]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(MappingModel::init(&[3, 2], &mut rng).is_err());
    }
}
