//! Statevector storage and gate kernels.
//!
//! Basis convention: integer index `i` spells the bitstring with **qubit 0 as
//! the most significant bit**, so for qubit `q` of an `N`-qubit register the
//! amplitude pair stride is `1 << (N - 1 - q)`.
//!
//! Real mode: Ry and CNOT map real states to real states, so circuits built
//! only from them keep every imaginary part exactly zero. The `real_mode`
//! flag tracks this; H and Rz clear it and from then on both components are
//! updated.

use crate::{Error, Result};

/// Hard cap on simulated qubits (2^24 amplitudes, two f64 buffers ≈ 268 MB).
pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Clone)]
pub struct StateVector {
    num_qubits: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    real_mode: bool,
}

impl StateVector {
    /// The all-|0⟩ state on `num_qubits` qubits.
    pub fn zero_state(num_qubits: usize) -> Result<Self> {
        if num_qubits < 1 || num_qubits > MAX_QUBITS {
            return Err(Error::QubitCount { num_qubits });
        }
        let len = 1usize << num_qubits;
        let mut re = vec![0.0; len];
        re[0] = 1.0;
        Ok(StateVector {
            num_qubits,
            re,
            im: vec![0.0; len],
            real_mode: true,
        })
    }

    /// Raw buffer constructor for adjoint vectors, which share the gate
    /// kernels but are not normalized states. Complex tracking is forced on.
    pub(crate) fn from_components(num_qubits: usize, re: Vec<f64>, im: Vec<f64>) -> Self {
        debug_assert_eq!(re.len(), 1 << num_qubits);
        debug_assert_eq!(im.len(), re.len());
        StateVector {
            num_qubits,
            re,
            im,
            real_mode: false,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_real_mode(&self) -> bool {
        self.real_mode
    }

    pub fn amplitude(&self, index: usize) -> (f64, f64) {
        (self.re[index], self.im[index])
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    /// Exact check used by the real-state invariant tests.
    pub fn imag_all_exactly_zero(&self) -> bool {
        self.im.iter().all(|v| *v == 0.0)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| r * r + i * i)
            .sum()
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            Err(Error::QubitIndex {
                qubit,
                num_qubits: self.num_qubits,
            })
        } else {
            Ok(())
        }
    }

    fn stride(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    /// Ry(μ) = [[cos(μ/2), −sin(μ/2)], [sin(μ/2), cos(μ/2)]]; preserves real mode.
    pub fn apply_ry(&mut self, qubit: usize, angle: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        let stride = self.stride(qubit);
        ry_kernel(&mut self.re, stride, c, s);
        if !self.real_mode {
            ry_kernel(&mut self.im, stride, c, s);
        }
        Ok(())
    }

    /// Swaps the target-bit pair wherever the control bit is 1; preserves real mode.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::SameQubit { qubit: control });
        }
        let cmask = self.stride(control);
        let tmask = self.stride(target);
        for i in 0..self.re.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.re.swap(i, i | tmask);
                if !self.real_mode {
                    self.im.swap(i, i | tmask);
                }
            }
        }
        Ok(())
    }

    /// Hadamard on one qubit. Leaves real mode per the simulator contract:
    /// once H or Rz appears, both components are tracked.
    pub fn apply_h(&mut self, qubit: usize) -> Result<()> {
        self.check_qubit(qubit)?;
        self.real_mode = false;
        let stride = self.stride(qubit);
        h_kernel(&mut self.re, stride);
        h_kernel(&mut self.im, stride);
        Ok(())
    }

    /// Rz(μ) = diag(e^{−iμ/2}, e^{iμ/2}); clears real mode.
    pub fn apply_rz(&mut self, qubit: usize, angle: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        self.real_mode = false;
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        let stride = self.stride(qubit);
        let block = stride * 2;
        let len = self.re.len();
        let mut base = 0;
        while base < len {
            for i in base..base + stride {
                let j = i + stride;
                // amp0 *= c − i·s ; amp1 *= c + i·s
                let (r0, i0) = (self.re[i], self.im[i]);
                self.re[i] = r0 * c + i0 * s;
                self.im[i] = i0 * c - r0 * s;
                let (r1, i1) = (self.re[j], self.im[j]);
                self.re[j] = r1 * c - i1 * s;
                self.im[j] = i1 * c + r1 * s;
            }
            base += block;
        }
        Ok(())
    }

    /// Measurement probabilities |⟨i|ψ⟩|².
    pub fn probabilities(&self) -> ProbabilityVector {
        let values = self
            .re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| r * r + i * i)
            .collect();
        ProbabilityVector { values }
    }

    /// ⟨σ_z⟩ per qubit: +1 weight where the qubit's bit is 0, −1 where 1.
    pub fn sigma_z_expectations(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_qubits];
        for q in 0..self.num_qubits {
            let mask = self.stride(q);
            let mut acc = 0.0;
            for i in 0..self.re.len() {
                let p = self.re[i] * self.re[i] + self.im[i] * self.im[i];
                acc += if i & mask == 0 { p } else { -p };
            }
            out[q] = acc;
        }
        out
    }
}

fn ry_kernel(amps: &mut [f64], stride: usize, c: f64, s: f64) {
    let block = stride * 2;
    let len = amps.len();
    let mut base = 0;
    while base < len {
        for i in base..base + stride {
            let j = i + stride;
            let (a0, a1) = (amps[i], amps[j]);
            amps[i] = c * a0 - s * a1;
            amps[j] = s * a0 + c * a1;
        }
        base += block;
    }
}

fn h_kernel(amps: &mut [f64], stride: usize) {
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let block = stride * 2;
    let len = amps.len();
    let mut base = 0;
    while base < len {
        for i in base..base + stride {
            let j = i + stride;
            let (a0, a1) = (amps[i], amps[j]);
            amps[i] = (a0 + a1) * inv_sqrt2;
            amps[j] = (a0 - a1) * inv_sqrt2;
        }
        base += block;
    }
}

/// Computational-basis measurement distribution.
#[derive(Debug, Clone)]
pub struct ProbabilityVector {
    values: Vec<f64>,
}

impl ProbabilityVector {
    /// Validates range and normalization (Σp = 1 within 1e-12).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDistribution {
                detail: "empty probability vector".into(),
            });
        }
        for (i, &p) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidDistribution {
                    detail: format!("p[{i}] = {p} outside [0, 1]"),
                });
            }
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution {
                detail: format!("probabilities sum to {total}"),
            });
        }
        Ok(ProbabilityVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Bits of basis index `i` for `n` qubits, qubit 0 first (most significant).
pub fn basis_bits(index: usize, num_qubits: usize) -> Vec<u8> {
    (0..num_qubits)
        .map(|q| ((index >> (num_qubits - 1 - q)) & 1) as u8)
        .collect()
}

/// Inverse of [`basis_bits`].
pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0usize, |acc, b| (acc << 1) | (*b as usize))
}
