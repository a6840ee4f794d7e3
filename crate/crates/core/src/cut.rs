//! Two-dimensional cuts of a level set `J_a = μ_a`, written as gnuplot
//! grid data.
//!
//! All but three coordinates are fixed; two span a grid and the level set
//! is solved for the third by a sign-change scan and bisection. Each root
//! index along the scan becomes a separate branch (a gnuplot `index`).

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::ScalarField;

#[derive(Debug, Clone, Serialize)]
pub struct Axis {
    pub coord: usize,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    fn value(&self, i: usize) -> f64 {
        if self.points <= 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.points - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CutSpec {
    /// Base point; the grid and solve coordinates are overwritten.
    pub base: Vec<f64>,
    pub u: Axis,
    pub v: Axis,
    /// Coordinate solved for, scanned over `points` intervals.
    pub solve: Axis,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelCut {
    pub names: [String; 3],
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// `branches[b][i][j]` is the `b`-th root at `(u_i, v_j)`, if any.
    pub branches: Vec<Vec<Vec<Option<f64>>>>,
}

fn bisect(g: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, mut ga: f64) -> Result<f64> {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m)?;
        if gm == 0.0 {
            return Ok(m);
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Solves `f = level` over the grid. Points outside the chart's guarded
/// domain count as no root.
pub fn levelset_cut(f: &ScalarField, level: f64, spec: &CutSpec) -> Result<LevelCut> {
    let chart = f.chart();
    let n = chart.dim();
    if spec.base.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: spec.base.len(),
        });
    }
    let idx = [spec.u.coord, spec.v.coord, spec.solve.coord];
    if idx.iter().any(|&i| i >= n) || idx[0] == idx[1] || idx[0] == idx[2] || idx[1] == idx[2] {
        return Err(Error::PreconditionViolation("cut needs three distinct coordinates".into()));
    }
    if spec.solve.points < 2 {
        return Err(Error::PreconditionViolation("solve axis needs at least two scan points".into()));
    }
    let mut branches: Vec<Vec<Vec<Option<f64>>>> = Vec::new();
    for i in 0..spec.u.points {
        for j in 0..spec.v.points {
            let mut x = spec.base.clone();
            x[spec.u.coord] = spec.u.value(i);
            x[spec.v.coord] = spec.v.value(j);
            let g = |z: f64| -> Result<f64> {
                let mut y = x.clone();
                y[spec.solve.coord] = z;
                if !chart.contains(&y) {
                    return Ok(f64::NAN);
                }
                Ok(f.eval(&y)? - level)
            };
            let mut roots = Vec::new();
            let mut prev = (spec.solve.value(0), g(spec.solve.value(0))?);
            for k in 1..spec.solve.points {
                let z = spec.solve.value(k);
                let gz = g(z)?;
                if prev.1 == 0.0 {
                    roots.push(prev.0);
                } else if prev.1.is_finite() && gz.is_finite() && (prev.1 < 0.0) != (gz < 0.0) && gz != 0.0 {
                    roots.push(bisect(&g, prev.0, z, prev.1)?);
                }
                prev = (z, gz);
            }
            if prev.1 == 0.0 {
                roots.push(prev.0);
            }
            while branches.len() < roots.len() {
                branches.push(vec![vec![None; spec.v.points]; spec.u.points]);
            }
            for (b, r) in roots.into_iter().enumerate() {
                branches[b][i][j] = Some(r);
            }
        }
    }
    let names = chart.names();
    Ok(LevelCut {
        names: [names[idx[0]].clone(), names[idx[1]].clone(), names[idx[2]].clone()],
        u: (0..spec.u.points).map(|i| spec.u.value(i)).collect(),
        v: (0..spec.v.points).map(|j| spec.v.value(j)).collect(),
        branches,
    })
}

impl LevelCut {
    /// gnuplot grid data: one `index` per branch, rows separated by blank
    /// lines, `NaN` where a branch has no root.
    pub fn write_gnuplot<W: Write>(&self, mut w: W, title: &str) -> Result<()> {
        writeln!(w, "# {title}")?;
        writeln!(w, "# columns: {} {} {}", self.names[0], self.names[1], self.names[2])?;
        for (b, grid) in self.branches.iter().enumerate() {
            if b > 0 {
                writeln!(w)?;
                writeln!(w)?;
            }
            writeln!(w, "# branch {b}")?;
            for (i, row) in grid.iter().enumerate() {
                for (j, z) in row.iter().enumerate() {
                    match z {
                        Some(z) => writeln!(w, "{:.10e} {:.10e} {:.10e}", self.u[i], self.v[j], z)?,
                        None => writeln!(w, "{:.10e} {:.10e} NaN", self.u[i], self.v[j])?,
                    }
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}
