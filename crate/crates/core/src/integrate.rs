//! Fixed-step classical Runge-Kutta integration with an invariant log, and
//! CSV trajectory output.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ScalarField, VectorField};

/// Step, duration and seed for a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub h: f64,
    pub duration: f64,
    pub seed: u64,
    pub samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            h: 1e-3,
            duration: 10.0,
            seed: 20_240_601,
            samples: 200,
        }
    }
}

impl RunConfig {
    pub fn steps(&self) -> Result<usize> {
        if !(self.h > 0.0) || !(self.duration >= 0.0) {
            return Err(Error::PreconditionViolation(format!(
                "run config needs h > 0 and T >= 0 (h = {}, T = {})",
                self.h, self.duration
            )));
        }
        let n = (self.duration / self.h).round();
        if ((n * self.h) - self.duration).abs() > 1e-9 * self.duration.max(1.0) {
            return Err(Error::PreconditionViolation(format!(
                "duration {} is not a whole number of steps of {}",
                self.duration, self.h
            )));
        }
        Ok(n as usize)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub coordinates: Vec<String>,
    pub invariants: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub invariant_log: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Max over the run of `|I(t) − I(0)|` for each logged invariant.
    pub fn invariant_drift(&self) -> Vec<f64> {
        let first = &self.invariant_log[0];
        (0..self.invariants.len())
            .map(|i| {
                self.invariant_log
                    .iter()
                    .map(|row| (row[i] - first[i]).abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// CSV with header `time,<coords>,<invariants>` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["time".to_string()];
        header.extend(self.coordinates.iter().cloned());
        header.extend(self.invariants.iter().cloned());
        writeln!(w, "{}", header.join(","))?;
        for ((t, x), inv) in self.times.iter().zip(&self.states).zip(&self.invariant_log) {
            let mut row = vec![format!("{t:.16e}")];
            row.extend(x.iter().map(|v| format!("{v:.16e}")));
            row.extend(inv.iter().map(|v| format!("{v:.16e}")));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Classical RK4 with compensated accumulation of the increments.
///
/// Every state is checked against the chart's domain guard; failures are
/// reported with the index of the offending step.
pub fn rk4_integrate(
    field: &VectorField,
    x0: &[f64],
    cfg: &RunConfig,
    invariants: &[(String, ScalarField)],
) -> Result<Trajectory> {
    let steps = cfg.steps()?;
    let h = cfg.h;
    let n = x0.len();
    let at = |step: usize, e: Error| Error::AtStep {
        step,
        source: Box::new(e),
    };
    let log = |x: &[f64], step: usize| -> Result<Vec<f64>> {
        invariants
            .iter()
            .map(|(_, f)| f.eval(x).map_err(|e| at(step, e)))
            .collect()
    };
    let mut x = x0.to_vec();
    let mut comp = vec![0.0; n];
    let mut traj = Trajectory {
        coordinates: field.chart().names().to_vec(),
        invariants: invariants.iter().map(|(name, _)| name.clone()).collect(),
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        invariant_log: Vec::with_capacity(steps + 1),
    };
    traj.times.push(0.0);
    traj.invariant_log.push(log(&x, 0)?);
    traj.states.push(x.clone());
    let mut stage = vec![0.0; n];
    for step in 1..=steps {
        let eval = |p: &[f64]| field.eval(p).map_err(|e| at(step, e));
        let k1 = eval(&x)?;
        for i in 0..n {
            stage[i] = x[i] + 0.5 * h * k1[i];
        }
        let k2 = eval(&stage)?;
        for i in 0..n {
            stage[i] = x[i] + 0.5 * h * k2[i];
        }
        let k3 = eval(&stage)?;
        for i in 0..n {
            stage[i] = x[i] + h * k3[i];
        }
        let k4 = eval(&stage)?;
        for i in 0..n {
            let inc = h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            let y = inc - comp[i];
            let t = x[i] + y;
            comp[i] = (t - x[i]) - y;
            x[i] = t;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step });
        }
        field.chart().check(&x).map_err(|e| at(step, e))?;
        traj.times.push(step as f64 * h);
        traj.invariant_log.push(log(&x, step)?);
        traj.states.push(x.clone());
    }
    Ok(traj)
}
