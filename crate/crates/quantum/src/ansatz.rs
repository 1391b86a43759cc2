//! The Ry/CNOT ansatz whose measurement distribution feeds the mapping model.
//!
//! Each block applies one Ry per qubit (ascending qubit order) followed by
//! the open linear CNOT chain CNOT(q, q+1) for q = 0..N−2. Every block is
//! identical, including the last. The state stays real throughout, so the
//! probability gradient can be back-propagated with a reversible sweep over
//! the real amplitudes alone.

use crate::state::{ProbabilityVector, StateVector};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct QtAnsatz {
    num_qubits: usize,
    n_block: usize,
    phi: Vec<f64>,
}

impl QtAnsatz {
    /// `phi` is flat over blocks then qubits: `phi[b*N + q]`.
    pub fn new(num_qubits: usize, n_block: usize, phi: Vec<f64>) -> Result<Self> {
        if n_block == 0 {
            return Err(Error::InvalidAnsatz {
                detail: "n_block must be at least 1".into(),
            });
        }
        let expected = num_qubits * n_block;
        if phi.len() != expected {
            return Err(Error::InvalidAnsatz {
                detail: format!(
                    "phi length {} does not match N*n_block = {}*{} = {}",
                    phi.len(),
                    num_qubits,
                    n_block,
                    expected
                ),
            });
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidAnsatz {
                detail: "phi contains a non-finite angle".into(),
            });
        }
        // qubit-count range is enforced by the state constructor
        StateVector::zero_state(num_qubits)?;
        Ok(QtAnsatz {
            num_qubits,
            n_block,
            phi,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn n_block(&self) -> usize {
        self.n_block
    }

    pub fn param_count(&self) -> usize {
        self.num_qubits * self.n_block
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn set_phi(&mut self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.phi.len() {
            return Err(Error::InvalidAnsatz {
                detail: format!(
                    "set_phi length {} does not match parameter count {}",
                    phi.len(),
                    self.phi.len()
                ),
            });
        }
        self.phi.copy_from_slice(phi);
        Ok(())
    }

    /// Executes the circuit and returns the final state.
    pub fn run_state(&self) -> StateVector {
        let mut state = StateVector::zero_state(self.num_qubits).expect("validated at new");
        let n = self.num_qubits;
        for block in 0..self.n_block {
            for q in 0..n {
                state.apply_ry(q, self.phi[block * n + q]).expect("q < N");
            }
            for q in 0..n.saturating_sub(1) {
                state.apply_cnot(q, q + 1).expect("q+1 < N");
            }
        }
        state
    }

    /// Executes the circuit and returns the measurement distribution.
    pub fn run(&self) -> ProbabilityVector {
        self.run_state().probabilities()
    }

    /// Exact dL/dφ given dL/dp, by the reversible adjoint sweep: undo each
    /// gate on the state, contract the derivative gate against the adjoint
    /// vector, and pull the adjoint vector through the transposed gate.
    /// One forward pass plus one backward pass, memory O(2^N).
    pub fn adjoint_gradient(&self, upstream: &[f64]) -> Result<Vec<f64>> {
        let len = 1usize << self.num_qubits;
        if upstream.len() != len {
            return Err(Error::LengthMismatch {
                what: "adjoint upstream",
                expected: len,
                got: upstream.len(),
            });
        }
        let state = self.run_state();
        if !state.is_real_mode() || !state.imag_all_exactly_zero() {
            return Err(Error::InvalidAnsatz {
                detail: "internal invariant violation: ansatz state left real mode".into(),
            });
        }
        let n = self.num_qubits;
        // dL/dψ_i = 2 ψ_i · dL/dp_i since p_i = ψ_i².
        let mut adj: Vec<f64> = state
            .re()
            .iter()
            .zip(upstream)
            .map(|(a, u)| 2.0 * a * u)
            .collect();
        let mut amps = state.re().to_vec();
        let mut grad = vec![0.0; self.phi.len()];

        for block in (0..self.n_block).rev() {
            for q in (0..n.saturating_sub(1)).rev() {
                // CNOT is its own inverse and its own transpose.
                cnot_real(&mut amps, n, q, q + 1);
                cnot_real(&mut adj, n, q, q + 1);
            }
            for q in (0..n).rev() {
                let angle = self.phi[block * n + q];
                ry_real(&mut amps, n, q, -angle); // amps now holds the pre-gate state
                grad[block * n + q] = ry_derivative_bilinear(&adj, &amps, n, q, angle);
                ry_real(&mut adj, n, q, -angle); // Ryᵀ(μ) = Ry(−μ)
            }
        }
        Ok(grad)
    }

    /// dL/dφ via the parameter-shift rule: dp/dφⱼ = (p(φⱼ+π/2) − p(φⱼ−π/2))/2,
    /// contracted with dL/dp. Costs two full circuit runs per parameter.
    pub fn parameter_shift_gradient(&self, upstream: &[f64]) -> Result<Vec<f64>> {
        let len = 1usize << self.num_qubits;
        if upstream.len() != len {
            return Err(Error::LengthMismatch {
                what: "parameter-shift upstream",
                expected: len,
                got: upstream.len(),
            });
        }
        let shift = std::f64::consts::FRAC_PI_2;
        let mut grad = vec![0.0; self.phi.len()];
        let mut shifted = self.clone();
        for j in 0..self.phi.len() {
            shifted.phi[j] = self.phi[j] + shift;
            let plus = shifted.run();
            shifted.phi[j] = self.phi[j] - shift;
            let minus = shifted.run();
            shifted.phi[j] = self.phi[j];
            grad[j] = plus
                .values()
                .iter()
                .zip(minus.values())
                .zip(upstream)
                .map(|((p, m), u)| u * (p - m) / 2.0)
                .sum();
        }
        Ok(grad)
    }
}

fn stride(n: usize, q: usize) -> usize {
    1 << (n - 1 - q)
}

fn ry_real(amps: &mut [f64], n: usize, q: usize, angle: f64) {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let stride = stride(n, q);
    let block = stride * 2;
    let mut base = 0;
    while base < amps.len() {
        for i in base..base + stride {
            let j = i + stride;
            let (a0, a1) = (amps[i], amps[j]);
            amps[i] = c * a0 - s * a1;
            amps[j] = s * a0 + c * a1;
        }
        base += block;
    }
}

fn cnot_real(amps: &mut [f64], n: usize, control: usize, target: usize) {
    let cmask = stride(n, control);
    let tmask = stride(n, target);
    for i in 0..amps.len() {
        if i & cmask != 0 && i & tmask == 0 {
            amps.swap(i, i | tmask);
        }
    }
}

/// ⟨adj| dRy(μ)/dμ |amps⟩ on qubit `q`, where
/// dRy(μ)/dμ = ½·[[−sin(μ/2), −cos(μ/2)], [cos(μ/2), −sin(μ/2)]].
fn ry_derivative_bilinear(adj: &[f64], amps: &[f64], n: usize, q: usize, angle: f64) -> f64 {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let stride = stride(n, q);
    let block = stride * 2;
    let mut acc = 0.0;
    let mut base = 0;
    while base < amps.len() {
        for i in base..base + stride {
            let j = i + stride;
            let d0 = 0.5 * (-s * amps[i] - c * amps[j]);
            let d1 = 0.5 * (c * amps[i] - s * amps[j]);
            acc += adj[i] * d0 + adj[j] * d1;
        }
        base += block;
    }
    acc
}
