//! Time series of reduced density matrices in the lab and Floquet frames.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::{num, Csv};
use crate::qubit::Mat2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Lab-frame states.
    pub lab: Option<Vec<Mat2>>,
    /// Floquet-frame (interaction picture) elements `⟨u_i(0)|ρ_I(t)|u_j(0)⟩`.
    pub floquet: Option<Vec<Mat2>>,
    pub metadata: serde_json::Value,
}

/// Worst-case invariant deviations over a trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StateDiagnostics {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl StateDiagnostics {
    pub fn of(states: &[Mat2]) -> Self {
        let mut d = Self {
            min_eigenvalue: f64::INFINITY,
            ..Self::default()
        };
        for m in states {
            d.max_trace_error = d.max_trace_error.max((m.trace() - 1.0).norm());
            d.max_hermiticity_error = d.max_hermiticity_error.max(m.hermiticity_error());
            d.min_eigenvalue = d.min_eigenvalue.min(m.hermitian_eigenvalues()[0]);
        }
        d
    }

    pub fn merge(self, o: Self) -> Self {
        Self {
            max_trace_error: self.max_trace_error.max(o.max_trace_error),
            max_hermiticity_error: self.max_hermiticity_error.max(o.max_hermiticity_error),
            min_eigenvalue: self.min_eigenvalue.min(o.min_eigenvalue),
        }
    }
}

const ELEMENTS: [(usize, usize, &str); 4] =
    [(0, 0, "11"), (0, 1, "12"), (1, 0, "21"), (1, 1, "22")];

impl Trajectory {
    /// Primary state sequence: lab frame when present.
    pub fn states(&self) -> &[Mat2] {
        self.lab
            .as_deref()
            .or(self.floquet.as_deref())
            .unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidState(
                "trajectory times not strictly increasing".into(),
            ));
        }
        for s in [&self.lab, &self.floquet].into_iter().flatten() {
            if s.len() != self.times.len() {
                return Err(Error::InvalidState("trajectory length mismatch".into()));
            }
        }
        Ok(())
    }

    pub fn diagnostics(&self) -> StateDiagnostics {
        let mut d = StateDiagnostics {
            min_eigenvalue: f64::INFINITY,
            ..Default::default()
        };
        for s in [&self.lab, &self.floquet].into_iter().flatten() {
            d = d.merge(StateDiagnostics::of(s));
        }
        d
    }

    /// `t` followed by real and imaginary parts of all four elements in the
    /// lab frame and in the Floquet frame; a missing frame is written as `nan`.
    pub fn to_csv(&self) -> Csv {
        let mut header = vec!["t".to_string()];
        for frame in ["lab", "flq"] {
            for (_, _, name) in ELEMENTS {
                header.push(format!("{frame}_re_{name}"));
                header.push(format!("{frame}_im_{name}"));
            }
        }
        let mut csv = Csv::new(&header);
        for (k, &t) in self.times.iter().enumerate() {
            let mut row = vec![num(t)];
            for frame in [&self.lab, &self.floquet] {
                for (i, j, _) in ELEMENTS {
                    match frame {
                        Some(s) => {
                            let z = s[k].0[i][j];
                            row.push(num(z.re));
                            row.push(num(z.im));
                        }
                        None => {
                            row.push("nan".into());
                            row.push("nan".into());
                        }
                    }
                }
            }
            csv.push(row);
        }
        csv
    }
}

/// Uniform grid `0, dt, 2dt, …, t_end`.
pub fn uniform_grid(t_end: f64, dt: f64) -> Vec<f64> {
    let n = (t_end / dt + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * dt).collect()
}
