//! Per-epoch metrics and the metrics.csv format.

use std::path::Path;

use crate::Result;

/// One epoch of bookkeeping. `gen_error` is stored exactly as
/// `test_loss - train_loss`; `wall_time_s` is seconds elapsed since the
/// start of training (the one field that varies across reruns).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub gen_error: f64,
    pub wall_time_s: f64,
}

/// gen = estimated expected loss minus training loss.
pub fn generalization_error(train_loss: f64, test_loss: f64) -> f64 {
    test_loss - train_loss
}

pub const METRICS_HEADER: &str = "epoch,train_loss,test_loss,train_acc,test_acc,gen_error,wall_time_s";

/// Renders the CSV: numeric fields use the shortest round-trip f64 form, so
/// equal values always produce equal bytes; wall time is fixed to ms.
pub fn metrics_csv_string(records: &[MetricsRecord]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.3}\n",
            r.epoch, r.train_loss, r.test_loss, r.train_acc, r.test_acc, r.gen_error, r.wall_time_s
        ));
    }
    out
}

pub fn write_metrics_csv(records: &[MetricsRecord], path: &Path) -> Result<()> {
    qt_models::write_atomic_bytes(path, metrics_csv_string(records).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_for_zero_epochs() {
        let csv = metrics_csv_string(&[]);
        assert_eq!(csv, format!("{METRICS_HEADER}\n"));
    }

    #[test]
    fn gen_error_is_the_plain_difference() {
        assert_eq!(generalization_error(0.3, 0.5), 0.2);
        assert_eq!(generalization_error(0.7, 0.7), 0.0);
        assert_eq!(generalization_error(1.0, 0.25), -0.75);
    }

    #[test]
    fn csv_round_trips_f64_fields_exactly() {
        let r = MetricsRecord {
            epoch: 3,
            train_loss: 0.1 + 0.2, // 0.30000000000000004
            test_loss: 2.302585092994046,
            train_acc: 1.0 / 3.0,
            test_acc: 0.875,
            gen_error: 2.302585092994046 - (0.1 + 0.2),
            wall_time_s: 1.23456,
        };
        let csv = metrics_csv_string(&[r.clone()]);
        let line = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[1].parse::<f64>().unwrap(), r.train_loss);
        assert_eq!(fields[2].parse::<f64>().unwrap(), r.test_loss);
        assert_eq!(fields[3].parse::<f64>().unwrap(), r.train_acc);
        assert_eq!(fields[5].parse::<f64>().unwrap(), r.gen_error);
        assert_eq!(fields[6], "1.235");
    }
}
