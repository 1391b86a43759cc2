//! Trainable-parameter accounting.

use qt_mapping::MappingModel;

use crate::config::Method;

/// N·n_block circuit angles plus the mapping stack.
pub fn qt_param_count(num_qubits: usize, n_block: usize, mapping_dims: &[usize]) -> usize {
    num_qubits * n_block + MappingModel::param_count_for(mapping_dims)
}

/// What a run actually optimizes versus the size of the model it produces.
#[derive(Debug, Clone)]
pub struct ParamReport {
    pub method: Method,
    pub architecture: String,
    /// M: parameters of the produced classical model.
    pub target_params: usize,
    /// N_t: parameters the optimizer touches.
    pub trainable_params: usize,
    /// N_t / M.
    pub parameter_ratio: f64,
    /// n: training samples seen by this run.
    pub train_samples: usize,
    /// N_t > n.
    pub over_parameterized: bool,
    /// Named contributions to N_t (circuit, mapping, network parts).
    pub breakdown: Vec<(String, usize)>,
}

impl ParamReport {
    pub fn new(
        method: Method,
        architecture: &str,
        target_params: usize,
        train_samples: usize,
        breakdown: Vec<(String, usize)>,
    ) -> Self {
        let trainable_params: usize = breakdown.iter().map(|(_, n)| n).sum();
        ParamReport {
            method,
            architecture: architecture.to_string(),
            target_params,
            trainable_params,
            parameter_ratio: trainable_params as f64 / target_params as f64,
            train_samples,
            over_parameterized: trainable_params > train_samples,
            breakdown,
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("method: {}\n", self.method.as_str()));
        out.push_str(&format!("architecture: {}\n", self.architecture));
        out.push_str(&format!("target_params: {}\n", self.target_params));
        out.push_str(&format!("trainable_params: {}\n", self.trainable_params));
        for (name, count) in &self.breakdown {
            out.push_str(&format!("  {name}: {count}\n"));
        }
        out.push_str(&format!("parameter_ratio: {:.6}\n", self.parameter_ratio));
        out.push_str(&format!("train_samples: {}\n", self.train_samples));
        out.push_str(&format!(
            "over_parameterized: {}\n",
            self.over_parameterized
        ));
        out
    }
}
