use serde::{Deserialize, Serialize};

use super::ShotRecord;

/// Binomial proportion with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn proportion(hits: usize, n: usize) -> Option<Self> {
        if n == 0 {
            return None;
        }
        let p = hits as f64 / n as f64;
        Some(Self {
            value: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
            samples: n,
        })
    }
}

/// Error fractions of the erasure-check experiment.
///
/// * `logical_assignment_error`: mean of P(read 2 | prepared 0) and
///   P(read 0 | prepared 2).
/// * `false_positive`: among shots prepared and read out in the code space,
///   the fraction flagged as erased.
/// * `false_negative`: among shots prepared and read out as leakage, the
///   fraction not flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentMetrics {
    pub logical_assignment_error: Option<Estimate>,
    pub false_positive: Option<Estimate>,
    pub false_negative: Option<Estimate>,
}

pub fn assignment_metrics(shots: &[(usize, ShotRecord)]) -> AssignmentMetrics {
    let mut wrong = [0usize; 2];
    let mut total = [0usize; 2];
    let (mut fp, mut fp_n, mut fn_, mut fn_n) = (0, 0, 0, 0);
    for (prepared, rec) in shots {
        let label = rec.final_label();
        match prepared {
            0 | 2 => {
                let slot = prepared / 2;
                total[slot] += 1;
                if label.logical_value() == Some(slot == 0) {
                    wrong[slot] += 1;
                }
                if label.is_logical() {
                    fp_n += 1;
                    fp += usize::from(rec.erased());
                }
            }
            _ => {
                if label.is_erasure() {
                    fn_n += 1;
                    fn_ += usize::from(!rec.erased());
                }
            }
        }
    }
    let logical = match (
        Estimate::proportion(wrong[0], total[0]),
        Estimate::proportion(wrong[1], total[1]),
    ) {
        (Some(a), Some(b)) => Some(Estimate {
            value: (a.value + b.value) / 2.0,
            stderr: (a.stderr.powi(2) + b.stderr.powi(2)).sqrt() / 2.0,
            samples: a.samples + b.samples,
        }),
        (a, b) => a.or(b),
    };
    AssignmentMetrics {
        logical_assignment_error: logical,
        false_positive: Estimate::proportion(fp, fp_n),
        false_negative: Estimate::proportion(fn_, fn_n),
    }
}
