//! The end-to-end run: validate, modify to the evolution dynamics, build
//! the mechanical presymplectic structure, diagnose the cocycle, modify the
//! momentum map, check the symmetry, sample the level set, check the
//! orthogonality identities, reduce and compare dynamics.

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::integrate::RunConfig;
use crate::reduction::{
    basic_form_report, compare_dynamics, reduce, sample_level, tangent_perp_report, LevelSample, LevelSet, PERP_TOL,
};
use crate::scenario::Scenario;
use crate::symmetry::{
    albert_condition, check_cosymplectic_action, check_presym_symmetry, compute_cocycle, modified_action,
    modify_momentum, noether_report, verify_momentum, MOMENTUM_TOL,
};

#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub mu: Vec<f64>,
    pub run: RunConfig,
    /// Points drawn on the level set.
    pub level_samples: usize,
    /// Starting point of the dynamics comparison, on the level set.
    pub x0: Option<Vec<f64>>,
    /// Run the final dynamics comparison.
    pub compare: bool,
}

impl PipelineConfig {
    pub fn new(s: &Scenario, run: RunConfig) -> Self {
        PipelineConfig {
            mu: s.mu_default.clone(),
            run,
            level_samples: 50,
            x0: None,
            compare: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub stage: String,
    pub passed: bool,
    pub report: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    EmptyLevelSet { reason: String },
    Halted { stage: String, error: String, exit_code: i32 },
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub scenario: String,
    pub mu: Vec<f64>,
    pub config: RunConfig,
    pub stages: Vec<StageReport>,
    pub outcome: Outcome,
}

impl PipelineReport {
    pub fn stage(&self, name: &str) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == name)
    }

    /// Every stage passed and the run was not halted.
    pub fn passed(&self) -> bool {
        !matches!(self.outcome, Outcome::Halted { .. }) && self.stages.iter().all(|s| s.passed)
    }

    pub fn exit_code(&self) -> i32 {
        match &self.outcome {
            Outcome::Halted { exit_code, .. } => *exit_code,
            _ if self.passed() => 0,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("scenario {}  mu = {:?}\n", self.scenario, self.mu);
        for s in &self.stages {
            out.push_str(&format!("[{}] {}\n", if s.passed { "PASS" } else { "FAIL" }, s.stage));
            render_value(&mut out, &s.report, 1);
        }
        match &self.outcome {
            Outcome::Completed => out.push_str("outcome: completed\n"),
            Outcome::EmptyLevelSet { reason } => out.push_str(&format!("outcome: EmptyLevelSet ({reason})\n")),
            Outcome::Halted { stage, error, .. } => out.push_str(&format!("outcome: halted at {stage}: {error}\n")),
        }
        out
    }
}

/// Indented `key: value` lines for a JSON object.
pub fn render_value(out: &mut String, v: &Value, depth: usize) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                match v {
                    Value::Object(_) => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        render_value(out, v, depth + 1);
                    }
                    _ => out.push_str(&format!("{pad}{k}: {}\n", compact(v))),
                }
            }
        }
        other => out.push_str(&format!("{pad}{}\n", compact(other))),
    }
}

fn compact(v: &Value) -> String {
    match v {
        Value::Array(a) if a.len() > 8 => format!("[{} values]", a.len()),
        _ => v.to_string(),
    }
}

struct Runner {
    stages: Vec<StageReport>,
}

impl Runner {
    fn record<T: Serialize>(&mut self, stage: &str, passed: bool, report: &T) {
        self.stages.push(StageReport {
            stage: stage.to_string(),
            passed,
            report: serde_json::to_value(report).expect("report serializes"),
        });
    }
}

#[derive(Serialize)]
struct ValidateStage {
    structure: crate::structure::CosymplecticReport,
    action: crate::symmetry::CosymplecticActionReport,
    momentum: crate::symmetry::MomentumReport,
}

#[derive(Serialize)]
struct ModifyStage {
    structure: crate::structure::CosymplecticReport,
    reeb_vs_evolution: f64,
    tolerance: f64,
}

#[derive(Serialize)]
struct CocycleStage {
    cocycle: crate::symmetry::Cocycle,
    albert_condition: bool,
    modified_action: Option<crate::symmetry::ModifiedActionReport>,
}

#[derive(Serialize)]
struct MomentumStage {
    components: Vec<String>,
    momentum_for_omega_h: crate::symmetry::MomentumReport,
}

#[derive(Serialize)]
struct PresymStage {
    symmetry: crate::symmetry::PresymSymmetryReport,
    noether: crate::symmetry::NoetherReport,
}

#[derive(Serialize)]
struct PerpStage {
    points: usize,
    max_constraint_residual: f64,
    max_perp_distance: f64,
    max_kernel_distance: f64,
    dims: Vec<(usize, usize, usize)>,
    tolerance: f64,
    failures: usize,
}

#[derive(Serialize)]
struct ReduceStage {
    slice: crate::reduction::SliceReport,
    reduced: crate::reduction::ReducedReport,
    basic: crate::reduction::BasicFormReport,
}

/// Runs every stage in order. A stage error halts the run; the stages
/// already completed stay in the report.
pub fn run_pipeline(s: &Scenario, cfg: &PipelineConfig) -> PipelineReport {
    let mut r = Runner { stages: Vec::new() };
    let outcome = match stages(s, cfg, &mut r) {
        Ok(o) => o,
        Err((stage, e)) => Outcome::Halted {
            stage: stage.to_string(),
            exit_code: e.exit_code(),
            error: e.to_string(),
        },
    };
    PipelineReport {
        scenario: s.name.clone(),
        mu: cfg.mu.clone(),
        config: cfg.run.clone(),
        stages: r.stages,
        outcome,
    }
}

fn stages(s: &Scenario, cfg: &PipelineConfig, r: &mut Runner) -> std::result::Result<Outcome, (&'static str, Error)> {
    let seed = cfg.run.seed;
    let pts = s.samples(cfg.run.samples, seed).map_err(|e| ("validate", e))?;
    let group = &s.group_samples;
    let a = &s.action;

    let stage = "validate";
    let v = (|| -> Result<ValidateStage> {
        Ok(ValidateStage {
            structure: s.structure.validate(&pts)?,
            action: check_cosymplectic_action(a, &s.structure, &pts, group)?,
            momentum: verify_momentum(a, s.structure.omega(), &s.momentum, &pts)?,
        })
    })()
    .map_err(|e| (stage, e))?;
    r.record(stage, v.structure.passed && v.action.passed && v.momentum.passed, &v);

    let stage = "modify_structure";
    let modified = s.structure.modify(&s.hamiltonian);
    let evolution = s.structure.evolution_field(&s.hamiltonian);
    let m = (|| -> Result<ModifyStage> {
        let rep = modified.validate(&pts)?;
        let reeb = modified.reeb_field();
        let mut dev: f64 = 0.0;
        for x in &pts {
            dev = dev.max((reeb.eval(x)? - evolution.eval(x)?).amax());
        }
        Ok(ModifyStage {
            structure: rep,
            reeb_vs_evolution: dev,
            tolerance: 1e-8,
        })
    })()
    .map_err(|e| (stage, e))?;
    r.record(stage, m.structure.passed && m.reeb_vs_evolution < m.tolerance, &m);

    let stage = "as_mechanical";
    let mech = modified.as_mechanical();
    let mr = mech.validate(&pts).map_err(|e| (stage, e))?;
    r.record(stage, mr.passed, &mr);

    let stage = "cocycle";
    let c = (|| -> Result<CocycleStage> {
        let c = compute_cocycle(a, &s.structure, &pts)?;
        let albert = albert_condition(&c);
        let modified_action = match (&s.reeb_flow, albert) {
            (Some(flow), false) => Some(modified_action(a, &s.structure, flow, &c, &pts)?.1),
            _ => None,
        };
        Ok(CocycleStage {
            cocycle: c,
            albert_condition: albert,
            modified_action,
        })
    })()
    .map_err(|e| (stage, e))?;
    r.record(stage, c.modified_action.as_ref().is_none_or(|m| m.passed), &c);

    let stage = "modify_momentum";
    let jh = modify_momentum(a, &s.momentum, &s.hamiltonian, &c.cocycle, &pts, group).map_err(|e| (stage, e))?;
    let mom = verify_momentum(a, mech.omega(), &jh, &pts).map_err(|e| (stage, e))?;
    r.record(
        stage,
        mom.passed,
        &MomentumStage {
            components: jh.components.iter().map(|c| c.label().to_string()).collect(),
            momentum_for_omega_h: mom.clone(),
        },
    );

    let stage = "presym_symmetry";
    let p = (|| -> Result<PresymStage> {
        let symmetry = check_presym_symmetry(a, &mech, &pts, group)?;
        let xh = s.structure.hamiltonian_field(&s.hamiltonian);
        let reeb = s.structure.reeb_field();
        let noether = noether_report(&jh, &[("X_H", &xh), ("R", &reeb), ("E_H", &evolution)], &pts)?;
        Ok(PresymStage { symmetry, noether })
    })()
    .map_err(|e| (stage, e))?;
    let e_max = p.noether.max_for("E_H").unwrap_or(0.0);
    r.record(stage, p.symmetry.passed && e_max < MOMENTUM_TOL, &p);

    let stage = "level_set";
    let level = LevelSet::new(mech.clone(), jh.clone(), cfg.mu.clone()).map_err(|e| (stage, e))?;
    let hook = s.empty_hook.clone();
    let hook_ref = hook.as_deref().map(|h| h as &(dyn Fn(&[f64]) -> bool + Sync));
    let sample = sample_level(&level, &s.level_box, cfg.level_samples, seed, hook_ref).map_err(|e| (stage, e))?;
    r.record(stage, true, &sample);
    let level_pts = match &sample {
        LevelSample::EmptyLevelSet { reason, .. } => {
            return Ok(Outcome::EmptyLevelSet { reason: reason.clone() });
        }
        LevelSample::Points { points, .. } => points.clone(),
    };

    let stage = "tangent_perp";
    let mut perp = PerpStage {
        points: level_pts.len(),
        max_constraint_residual: 0.0,
        max_perp_distance: 0.0,
        max_kernel_distance: 0.0,
        dims: Vec::new(),
        tolerance: PERP_TOL,
        failures: 0,
    };
    for x in &level_pts {
        let rep = tangent_perp_report(&level, a, x).map_err(|e| (stage, e))?;
        perp.max_constraint_residual = perp.max_constraint_residual.max(rep.constraint_residual);
        perp.max_perp_distance = perp.max_perp_distance.max(rep.perp_distance);
        perp.max_kernel_distance = perp.max_kernel_distance.max(rep.kernel_distance);
        let d = (rep.dim_tangent, rep.dim_perp, rep.kernel_dim);
        if !perp.dims.contains(&d) {
            perp.dims.push(d);
        }
        if !rep.passed {
            perp.failures += 1;
        }
    }
    r.record(stage, perp.failures == 0, &perp);

    let stage = "reduce";
    let red = (|| -> Result<_> {
        let slice = s.build_slice(&cfg.mu)?;
        let mut ys = Vec::with_capacity(level_pts.len());
        let mut sy = Vec::with_capacity(level_pts.len());
        for x in &level_pts {
            let (sv, y) = slice.to_slice(a, x)?;
            let mut p = sv.clone();
            p.extend_from_slice(&y);
            sy.push(p);
            ys.push(y);
        }
        let slice_rep = slice.validate(&level, a, &ys, group)?;
        let reduced = reduce(&level, a, &slice)?;
        let red_rep = reduced.validate(&ys)?;
        let basic = basic_form_report(&slice, a, mech.omega(), None, &sy)?;
        Ok((
            reduced,
            ReduceStage {
                slice: slice_rep,
                reduced: red_rep,
                basic,
            },
        ))
    })()
    .map_err(|e| (stage, e))?;
    let (reduced, rep) = red;
    r.record(stage, rep.slice.passed && rep.reduced.passed && rep.basic.passed, &rep);

    if !cfg.compare {
        return Ok(Outcome::Completed);
    }
    let stage = "compare_dynamics";
    let x0 = cfg.x0.clone().unwrap_or_else(|| level_pts[0].clone());
    let cmp = compare_dynamics(&level, a, &reduced, &x0, &cfg.run).map_err(|e| (stage, e))?;
    r.record(stage, cmp.max_deviation < COMPARE_TOL, &cmp);
    Ok(Outcome::Completed)
}

/// Largest accepted gap between the reduced and the projected flow.
pub const COMPARE_TOL: f64 = 1e-5;
