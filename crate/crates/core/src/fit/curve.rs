use serde::{Deserialize, Serialize};

/// Readout polarization versus time, normalized by the fully polarized value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub stderr: Vec<f64>,
    pub t_g: f64,
    pub theta: f64,
    /// Offset already subtracted from the readout times.
    pub shift: f64,
}

impl DecayCurve {
    pub fn to_csv(&self) -> String {
        let mut s = format!("# t_g = {}\n# theta = {}\n# shift = {}\nt,mean,stderr\n", self.t_g, self.theta, self.shift);
        for k in 0..self.t.len() {
            s.push_str(&format!("{:.10e},{:.10e},{:.10e}\n", self.t[k], self.y[k], self.stderr[k]));
        }
        s
    }
}

/// Re-expresses a curve in effective time `t_r - t_o`.
pub fn shift_curve(curve: &DecayCurve, t_o: f64) -> DecayCurve {
    DecayCurve {
        t: curve.t.iter().map(|t| t - t_o).collect(),
        shift: curve.shift + t_o,
        ..curve.clone()
    }
}
