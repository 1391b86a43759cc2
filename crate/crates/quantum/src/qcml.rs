//! Angle-encoded hybrid circuit: H layer, per-qubit Ry/Rz feature encoding,
//! trainable Ry blocks with the linear CNOT chain, and per-qubit ⟨σ_z⟩
//! readout. The gradient sweep is the same reversible-adjoint technique as
//! the real-mode ansatz, generalized to complex amplitudes, and yields exact
//! gradients for both the trainable angles and the encoded features (the
//! features need gradients so an upstream network can be trained through
//! the circuit).

use crate::state::StateVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
enum Slot {
    /// No gradient is collected for this gate.
    Fixed,
    Feature(usize),
    Angle(usize),
}

#[derive(Debug, Clone, Copy)]
enum Gate {
    H { q: usize },
    Ry { q: usize, angle: f64, slot: Slot },
    Rz { q: usize, angle: f64, slot: Slot },
    Cnot { c: usize, t: usize },
}

#[derive(Debug, Clone)]
pub struct QcmlCircuit {
    num_qubits: usize,
    n_block: usize,
    features: Vec<f64>,
    angles: Vec<f64>,
}

/// Gradients returned by [`QcmlCircuit::gradients`].
#[derive(Debug, Clone)]
pub struct QcmlGradients {
    pub d_features: Vec<f64>,
    pub d_angles: Vec<f64>,
}

impl QcmlCircuit {
    /// One trainable angle per qubit per block: `angles[b*N + q]`.
    pub fn new(
        num_qubits: usize,
        n_block: usize,
        features: Vec<f64>,
        angles: Vec<f64>,
    ) -> Result<Self> {
        if n_block == 0 {
            return Err(Error::InvalidAnsatz {
                detail: "n_block must be at least 1".into(),
            });
        }
        if features.len() != num_qubits {
            return Err(Error::LengthMismatch {
                what: "qcml features",
                expected: num_qubits,
                got: features.len(),
            });
        }
        if angles.len() != num_qubits * n_block {
            return Err(Error::LengthMismatch {
                what: "qcml trainable angles",
                expected: num_qubits * n_block,
                got: angles.len(),
            });
        }
        if features.iter().chain(angles.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidAnsatz {
                detail: "qcml parameters contain a non-finite value".into(),
            });
        }
        StateVector::zero_state(num_qubits)?;
        Ok(QcmlCircuit {
            num_qubits,
            n_block,
            features,
            angles,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn trainable_count(&self) -> usize {
        self.angles.len()
    }

    fn gates(&self) -> Vec<Gate> {
        let n = self.num_qubits;
        let mut gates = Vec::new();
        for q in 0..n {
            gates.push(Gate::H { q });
        }
        for q in 0..n {
            gates.push(Gate::Ry {
                q,
                angle: self.features[q],
                slot: Slot::Feature(q),
            });
            gates.push(Gate::Rz {
                q,
                angle: self.features[q],
                slot: Slot::Feature(q),
            });
        }
        for block in 0..self.n_block {
            for q in 0..n {
                let idx = block * n + q;
                gates.push(Gate::Ry {
                    q,
                    angle: self.angles[idx],
                    slot: Slot::Angle(idx),
                });
            }
            for q in 0..n.saturating_sub(1) {
                gates.push(Gate::Cnot { c: q, t: q + 1 });
            }
        }
        gates
    }

    fn apply(state: &mut StateVector, gate: Gate) {
        match gate {
            Gate::H { q } => state.apply_h(q).expect("validated"),
            Gate::Ry { q, angle, .. } => state.apply_ry(q, angle).expect("validated"),
            Gate::Rz { q, angle, .. } => state.apply_rz(q, angle).expect("validated"),
            Gate::Cnot { c, t } => state.apply_cnot(c, t).expect("validated"),
        }
    }

    /// Inverse application; all four gate kinds invert to the same kind.
    fn unapply(state: &mut StateVector, gate: Gate) {
        match gate {
            Gate::H { q } => state.apply_h(q).expect("validated"),
            Gate::Ry { q, angle, .. } => state.apply_ry(q, -angle).expect("validated"),
            Gate::Rz { q, angle, .. } => state.apply_rz(q, -angle).expect("validated"),
            Gate::Cnot { c, t } => state.apply_cnot(c, t).expect("validated"),
        }
    }

    pub fn run_state(&self) -> StateVector {
        let mut state = StateVector::zero_state(self.num_qubits).expect("validated at new");
        for gate in self.gates() {
            Self::apply(&mut state, gate);
        }
        state
    }

    /// ⟨σ_z⟩ per qubit, each in [−1, 1].
    pub fn expectations(&self) -> Vec<f64> {
        self.run_state().sigma_z_expectations()
    }

    /// Exact (dL/dfeatures, dL/dangles) given upstream dL/d⟨σ_z⟩ per qubit.
    ///
    /// For a real loss of a complex state, dL/dμ = 2·Re⟨λ| ∂ψ/∂μ⟩ with
    /// λ_i = w_i ψ_i and w_i = Σ_q upstream_q · sign_q(i); the sweep mirrors
    /// the real-mode adjoint but tracks both components.
    pub fn gradients(&self, upstream: &[f64]) -> Result<QcmlGradients> {
        if upstream.len() != self.num_qubits {
            return Err(Error::LengthMismatch {
                what: "qcml upstream",
                expected: self.num_qubits,
                got: upstream.len(),
            });
        }
        let n = self.num_qubits;
        let state = self.run_state();
        let len = state.len();

        let mut weights = vec![0.0; len];
        for (i, w) in weights.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (q, u) in upstream.iter().enumerate() {
                let bit = (i >> (n - 1 - q)) & 1;
                acc += if bit == 0 { *u } else { -*u };
            }
            *w = acc;
        }
        let adj_re: Vec<f64> = state.re().iter().zip(&weights).map(|(a, w)| a * w).collect();
        let adj_im: Vec<f64> = state.im().iter().zip(&weights).map(|(a, w)| a * w).collect();
        let mut adj = StateVector::from_components(n, adj_re, adj_im);
        let mut amps = state;

        let mut d_features = vec![0.0; n];
        let mut d_angles = vec![0.0; self.angles.len()];
        for gate in self.gates().into_iter().rev() {
            Self::unapply(&mut amps, gate);
            match gate {
                Gate::Ry { q, angle, slot } => {
                    let g = ry_derivative_bilinear(&adj, &amps, q, angle);
                    match slot {
                        Slot::Feature(f) => d_features[f] += g,
                        Slot::Angle(a) => d_angles[a] += g,
                        Slot::Fixed => {}
                    }
                }
                Gate::Rz { q, angle, slot } => {
                    let g = rz_derivative_bilinear(&adj, &amps, q, angle);
                    match slot {
                        Slot::Feature(f) => d_features[f] += g,
                        Slot::Angle(a) => d_angles[a] += g,
                        Slot::Fixed => {}
                    }
                }
                Gate::H { .. } | Gate::Cnot { .. } => {}
            }
            // Ry/Rz/H/CNOT are unitary, so the conjugate transpose equals
            // the inverse and the adjoint vector moves with the same kernel.
            Self::unapply(&mut adj, gate);
        }
        Ok(QcmlGradients {
            d_features,
            d_angles,
        })
    }
}

/// 2·Re⟨adj| dRy(μ)/dμ |amps⟩ on qubit `q`.
fn ry_derivative_bilinear(adj: &StateVector, amps: &StateVector, q: usize, angle: f64) -> f64 {
    let n = amps.num_qubits();
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let stride = 1usize << (n - 1 - q);
    let block = stride * 2;
    let (sre, sim) = (amps.re(), amps.im());
    let (bre, bim) = (adj.re(), adj.im());
    let mut acc = 0.0;
    let mut base = 0;
    while base < sre.len() {
        for i in base..base + stride {
            let j = i + stride;
            let d0_re = 0.5 * (-s * sre[i] - c * sre[j]);
            let d0_im = 0.5 * (-s * sim[i] - c * sim[j]);
            let d1_re = 0.5 * (c * sre[i] - s * sre[j]);
            let d1_im = 0.5 * (c * sim[i] - s * sim[j]);
            acc += bre[i] * d0_re + bim[i] * d0_im + bre[j] * d1_re + bim[j] * d1_im;
        }
        base += block;
    }
    2.0 * acc
}

/// 2·Re⟨adj| dRz(μ)/dμ |amps⟩ on qubit `q`, with
/// dRz(μ)/dμ = diag(−(i/2)·e^{−iμ/2}, (i/2)·e^{iμ/2}).
fn rz_derivative_bilinear(adj: &StateVector, amps: &StateVector, q: usize, angle: f64) -> f64 {
    let n = amps.num_qubits();
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let stride = 1usize << (n - 1 - q);
    let block = stride * 2;
    let (sre, sim) = (amps.re(), amps.im());
    let (bre, bim) = (adj.re(), adj.im());
    let mut acc = 0.0;
    let mut base = 0;
    while base < sre.len() {
        for i in base..base + stride {
            let j = i + stride;
            let d0_re = 0.5 * (c * sim[i] - s * sre[i]);
            let d0_im = -0.5 * (c * sre[i] + s * sim[i]);
            let d1_re = -0.5 * (c * sim[j] + s * sre[j]);
            let d1_im = 0.5 * (c * sre[j] - s * sim[j]);
            acc += bre[i] * d0_re + bim[i] * d0_im + bre[j] * d1_re + bim[j] * d1_im;
        }
        base += block;
    }
    2.0 * acc
}
