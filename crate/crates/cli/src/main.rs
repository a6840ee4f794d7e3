use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use cosym_core::cut::{levelset_cut, Axis, CutSpec};
use cosym_core::integrate::{rk4_integrate, RunConfig};
use cosym_core::linalg::lemma45_fuzz;
use cosym_core::pipeline::{render_value, run_pipeline, PipelineConfig};
use cosym_core::reduction::{sample_level, LevelSet};
use cosym_core::scenario::{load_scenario_with, Scenario};
use cosym_core::structure::{
    build_reeb_formalism, formalism_relation_check, hamilton_equations_residual, HamiltonianSectionData,
};
use cosym_core::symmetry::{
    check_cosymplectic_action, compute_cocycle, modify_momentum, noether_report, verify_momentum, MomentumMap,
};
use cosym_core::{Error, Result};

#[derive(Parser)]
#[command(name = "cosym", version, about = "Cosymplectic mechanics, momentum maps and reduction")]
struct Cli {
    /// Machine-readable JSON reports.
    #[arg(long, global = true)]
    json: bool,
    /// Directory that receives report, trajectory and plot files.
    #[arg(long, global = true, env = "COSYM_REPORT_DIR")]
    report_dir: Option<PathBuf>,
    /// Seed for every sampled quantity.
    #[arg(long, global = true, default_value_t = RunConfig::default().seed)]
    seed: u64,
    /// Number of random sample points for pointwise checks.
    #[arg(long, global = true, default_value_t = RunConfig::default().samples)]
    samples: usize,
    /// Scenario parameter override, e.g. `--param eA0=1`.
    #[arg(long = "param", global = true, value_parser = parse_param)]
    params: Vec<(String, f64)>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Integration {
    /// Duration of the run.
    #[arg(long = "T", default_value_t = 10.0)]
    duration: f64,
    /// Fixed RK4 step.
    #[arg(long, default_value_t = 1e-3)]
    h: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Check the cosymplectic structure, the action and the momentum map.
    Validate { scenario: String },
    /// Compare the Reeb field of the modified structure with the evolution field.
    Reeb { scenario: String },
    /// Integrate the evolution field and write the trajectory as CSV.
    Evolve {
        scenario: String,
        /// Initial point, comma separated; defaults to the first sample point.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[command(flatten)]
        run: Integration,
        /// CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check which fields preserve the modified momentum map.
    Noether {
        scenario: String,
        /// Number of on-level trajectories.
        #[arg(long, default_value_t = 10)]
        starts: usize,
        #[command(flatten)]
        run: Integration,
    },
    /// Run the reduction pipeline up to the reduced structure.
    Reduce {
        scenario: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Option<Vec<f64>>,
    },
    /// Run the full pipeline including the dynamics comparison.
    Compare {
        scenario: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[command(flatten)]
        run: Integration,
    },
    /// Compare the Reeb and evolution formalisms of the scenario Hamiltonian.
    Formalisms {
        scenario: String,
        /// Duration of the Hamilton-equation check.
        #[arg(long = "T", default_value_t = 1.0)]
        duration: f64,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
    },
    /// Random check of the perp dimension formula and the biperp identity.
    #[command(name = "fuzz-lemma45")]
    FuzzLemma45 {
        #[arg(long, value_delimiter = ',', default_value = "3,5,7")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        cases: usize,
    },
    /// Write a two-dimensional cut of a level set as gnuplot data.
    #[command(name = "levelset-cut")]
    LevelsetCut {
        scenario: String,
        #[arg(long, allow_hyphen_values = true)]
        mu: Option<f64>,
        /// Momentum component to cut.
        #[arg(long, default_value_t = 0)]
        component: usize,
        /// Fixed coordinates, e.g. `p3=0,q2=0,q3=0,t=0`; others are zero.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        plane: Vec<String>,
        /// Grid axes `name:lo:hi:points,name:lo:hi:points`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "q1:-6.283185307179586:6.283185307179586:121,p2:-1.5:1.5:61")]
        axes: Vec<String>,
        /// Solved coordinate `name:lo:hi:scan_points`.
        #[arg(long, allow_hyphen_values = true, default_value = "p1:-2:4:601")]
        solve: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected KEY=VALUE")?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

struct Report {
    name: String,
    passed: bool,
    body: Value,
    /// Preformatted text rendering, when the generic one does not fit.
    text: Option<String>,
}

struct Ctx {
    json: bool,
    report_dir: Option<PathBuf>,
    seed: u64,
    samples: usize,
    params: BTreeMap<String, f64>,
}

impl Ctx {
    fn load(&self, source: &str) -> Result<Scenario> {
        load_scenario_with(source, &self.params)
    }

    fn run_config(&self, duration: f64, h: f64) -> RunConfig {
        RunConfig {
            h,
            duration,
            seed: self.seed,
            samples: self.samples,
        }
    }

    fn output_path(&self, explicit: Option<&Path>, default_name: &str) -> Result<PathBuf> {
        if let Some(p) = explicit {
            return Ok(p.to_path_buf());
        }
        let dir = self.report_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir)?;
        Ok(dir.join(default_name))
    }

    fn emit(&self, r: &Report) -> Result<()> {
        let text = if self.json {
            serde_json::to_string_pretty(&r.body).expect("report serializes") + "\n"
        } else if let Some(t) = &r.text {
            t.clone()
        } else {
            let mut out = format!("[{}] {}\n", if r.passed { "PASS" } else { "FAIL" }, r.name);
            render_value(&mut out, &r.body, 1);
            out
        };
        print!("{text}");
        if let Some(dir) = &self.report_dir {
            fs::create_dir_all(dir)?;
            let ext = if self.json { "json" } else { "txt" };
            fs::write(dir.join(format!("{}.{ext}", file_stem(&r.name))), &text)?;
        }
        Ok(())
    }
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect()
}

fn value<T: serde::Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report serializes")
}

/// `J_H = J − c H` of a scenario with its cocycle.
fn modified_momentum(s: &Scenario, pts: &[Vec<f64>]) -> Result<(MomentumMap, Vec<f64>)> {
    let c = compute_cocycle(&s.action, &s.structure, pts)?;
    let jh = modify_momentum(&s.action, &s.momentum, &s.hamiltonian, &c, pts, &s.group_samples)?;
    Ok((jh, c.values))
}

fn validate(ctx: &Ctx, source: &str) -> Result<Report> {
    let s = ctx.load(source)?;
    let pts = s.samples(ctx.samples, ctx.seed)?;
    let structure = s.structure.validate(&pts)?;
    let action = check_cosymplectic_action(&s.action, &s.structure, &pts, &s.group_samples)?;
    let momentum = verify_momentum(&s.action, s.structure.omega(), &s.momentum, &pts)?;
    let modified = s.structure.modify(&s.hamiltonian);
    let modified_rep = modified.validate(&pts)?;
    let mechanical = modified.as_mechanical().validate(&pts)?;
    Ok(Report {
        name: format!("validate-{}", s.name),
        passed: structure.passed && action.passed && momentum.passed && modified_rep.passed && mechanical.passed,
        body: json!({
            "scenario": s.name,
            "structure": value(&structure),
            "action": value(&action),
            "momentum": value(&momentum),
            "modified_structure": value(&modified_rep),
            "mechanical": value(&mechanical),
        }),
        text: None,
    })
}

fn reeb(ctx: &Ctx, source: &str) -> Result<Report> {
    let s = ctx.load(source)?;
    let pts = s.samples(ctx.samples, ctx.seed)?;
    let modified = s.structure.modify(&s.hamiltonian);
    let r_h = modified.reeb_field();
    let e_h = s.structure.evolution_field(&s.hamiltonian);
    let mut dev: f64 = 0.0;
    for x in &pts {
        dev = dev.max((r_h.eval(x)? - e_h.eval(x)?).amax());
    }
    let x = &pts[0];
    Ok(Report {
        name: format!("reeb-{}", s.name),
        passed: dev < 1e-8,
        body: json!({
            "scenario": s.name,
            "samples": pts.len(),
            "max_reeb_minus_evolution": dev,
            "tolerance": 1e-8,
            "at": x,
            "reeb_original": s.structure.reeb_field().eval(x)?.as_slice(),
            "reeb_modified": r_h.eval(x)?.as_slice(),
            "evolution": e_h.eval(x)?.as_slice(),
        }),
        text: None,
    })
}

fn evolve(ctx: &Ctx, source: &str, x0: Option<Vec<f64>>, run: &Integration, out: Option<&Path>) -> Result<Report> {
    let s = ctx.load(source)?;
    let pts = s.samples(ctx.samples, ctx.seed)?;
    let x0 = match x0 {
        Some(x) => x,
        None => pts[0].clone(),
    };
    s.chart.check(&x0)?;
    let (jh, _) = modified_momentum(&s, &pts)?;
    let mut invariants: Vec<(String, _)> = jh
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| (format!("J_H{}", i + 1), c.clone()))
        .collect();
    invariants.push(("H".to_string(), s.hamiltonian.clone()));
    let cfg = ctx.run_config(run.duration, run.h);
    let traj = rk4_integrate(&s.structure.evolution_field(&s.hamiltonian), &x0, &cfg, &invariants)?;
    let path = ctx.output_path(out, &format!("evolve-{}.csv", file_stem(&s.name)))?;
    traj.write_csv(fs::File::create(&path)?)?;
    let drift: BTreeMap<String, f64> = traj.invariants.iter().cloned().zip(traj.invariant_drift()).collect();
    Ok(Report {
        name: format!("evolve-{}", s.name),
        passed: true,
        body: json!({
            "scenario": s.name,
            "x0": x0,
            "h": cfg.h,
            "duration": cfg.duration,
            "steps": traj.states.len() - 1,
            "final": traj.last(),
            "invariant_drift": drift,
            "csv": path.display().to_string(),
        }),
        text: None,
    })
}

fn noether(ctx: &Ctx, source: &str, starts: usize, run: &Integration) -> Result<Report> {
    let s = ctx.load(source)?;
    let pts = s.samples(ctx.samples, ctx.seed)?;
    let (jh, c) = modified_momentum(&s, &pts)?;
    let xh = s.structure.hamiltonian_field(&s.hamiltonian);
    let r = s.structure.reeb_field();
    let eh = s.structure.evolution_field(&s.hamiltonian);
    let pointwise = noether_report(&jh, &[("X_H", &xh), ("R", &r), ("E_H", &eh)], &pts)?;
    let mech = s.structure.modify(&s.hamiltonian).as_mechanical();
    let level = LevelSet::new(mech, jh.clone(), s.mu_default.clone())?;
    let sample = sample_level(&level, &s.level_box, starts, ctx.seed, None)?;
    let starts_pts = sample
        .points()
        .ok_or_else(|| Error::PreconditionViolation("default level set is empty".into()))?;
    let invariants: Vec<(String, _)> = jh
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| (format!("J_H{}", i + 1), c.clone()))
        .collect();
    let cfg = ctx.run_config(run.duration, run.h);
    let mut max_drift: f64 = 0.0;
    for x in starts_pts {
        let traj = rk4_integrate(&eh, x, &cfg, &invariants)?;
        max_drift = traj.invariant_drift().into_iter().fold(max_drift, f64::max);
    }
    let e_max = pointwise.max_for("E_H").unwrap_or(0.0);
    Ok(Report {
        name: format!("noether-{}", s.name),
        passed: e_max < 1e-8 && max_drift < 1e-6,
        body: json!({
            "scenario": s.name,
            "cocycle": c,
            "pointwise": value(&pointwise),
            "trajectories": starts_pts.len(),
            "h": cfg.h,
            "duration": cfg.duration,
            "max_trajectory_drift": max_drift,
            "drift_tolerance": 1e-6,
        }),
        text: None,
    })
}

fn pipeline(
    ctx: &Ctx,
    source: &str,
    mu: Option<Vec<f64>>,
    x0: Option<Vec<f64>>,
    run: Option<&Integration>,
) -> Result<(Report, i32)> {
    let s = ctx.load(source)?;
    let run_cfg = match run {
        Some(r) => ctx.run_config(r.duration, r.h),
        None => ctx.run_config(RunConfig::default().duration, RunConfig::default().h),
    };
    let mut cfg = PipelineConfig::new(&s, run_cfg);
    if let Some(mu) = mu {
        if mu.len() != s.action.k() {
            return Err(Error::DimensionMismatch {
                expected: s.action.k(),
                found: mu.len(),
            });
        }
        cfg.mu = mu;
    }
    cfg.x0 = x0;
    cfg.compare = run.is_some();
    let rep = run_pipeline(&s, &cfg);
    let code = rep.exit_code();
    let verb = if run.is_some() { "compare" } else { "reduce" };
    Ok((
        Report {
            name: format!("{verb}-{}", s.name),
            passed: code == 0,
            body: value(&rep),
            text: Some(rep.to_text()),
        },
        code,
    ))
}

fn formalisms(ctx: &Ctx, source: &str, duration: f64, h: f64) -> Result<Report> {
    let s = ctx.load(source)?;
    let pts = s.samples(ctx.samples, ctx.seed)?;
    let d = HamiltonianSectionData::new(s.hamiltonian.clone(), s.connection.clone())?;
    let relation = formalism_relation_check(&d, &pts)?;
    let reeb = build_reeb_formalism(&d).reeb_field();
    let cfg = ctx.run_config(duration, h);
    let traj = rk4_integrate(&reeb, &pts[0], &cfg, &[])?;
    let he = hamilton_equations_residual(&d, &traj)?;
    Ok(Report {
        name: format!("formalisms-{}", s.name),
        passed: relation.passed && he < 1e-6,
        body: json!({
            "scenario": s.name,
            "relation": value(&relation),
            "hamilton_equations_residual": he,
            "residual_tolerance": 1e-6,
            "h": h,
            "duration": duration,
        }),
        text: None,
    })
}

fn fuzz(ctx: &Ctx, dims: &[usize], cases: usize) -> Result<Report> {
    if dims.contains(&0) {
        return Err(Error::PreconditionViolation("dimensions must be positive".into()));
    }
    let rep = lemma45_fuzz(dims, cases, ctx.seed);
    Ok(Report {
        name: "fuzz-lemma45".into(),
        passed: rep.passed(),
        body: value(&rep),
        text: None,
    })
}

fn parse_axis(s: &Scenario, spec: &str) -> Result<Axis> {
    let bad = || Error::parse("axis", format!("`{spec}` is not name:lo:hi:points"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 4 {
        return Err(bad());
    }
    let coord = s
        .chart
        .index_of(parts[0])
        .ok_or_else(|| Error::parse("axis", format!("`{}` is not a coordinate", parts[0])))?;
    Ok(Axis {
        coord,
        lo: parts[1].parse().map_err(|_| bad())?,
        hi: parts[2].parse().map_err(|_| bad())?,
        points: parts[3].parse().map_err(|_| bad())?,
    })
}

#[allow(clippy::too_many_arguments)]
fn cut(
    ctx: &Ctx,
    source: &str,
    mu: Option<f64>,
    component: usize,
    plane: &[String],
    axes: &[String],
    solve: &str,
    out: Option<&Path>,
) -> Result<Report> {
    let s = ctx.load(source)?;
    let pts = s.samples(ctx.samples, ctx.seed)?;
    let (jh, _) = modified_momentum(&s, &pts)?;
    let f = jh
        .components
        .get(component)
        .ok_or_else(|| Error::parse("component", format!("J_H has {} component(s)", jh.k())))?;
    let mu = mu.unwrap_or(s.mu_default[component]);
    let mut base = vec![0.0; s.chart.dim()];
    for p in plane {
        let (k, v) = parse_param(p).map_err(|m| Error::parse("plane", m))?;
        let i = s
            .chart
            .index_of(&k)
            .ok_or_else(|| Error::parse("plane", format!("`{k}` is not a coordinate")))?;
        base[i] = v;
    }
    if axes.len() != 2 {
        return Err(Error::parse("axes", "need exactly two axes"));
    }
    let spec = CutSpec {
        base,
        u: parse_axis(&s, &axes[0])?,
        v: parse_axis(&s, &axes[1])?,
        solve: parse_axis(&s, solve)?,
    };
    let result = levelset_cut(f, mu, &spec)?;
    let path = ctx.output_path(out, &format!("levelset-cut-{}.dat", file_stem(&s.name)))?;
    let title = format!(
        "{}: J_H = {mu} cut at {}; parameters {:?}",
        s.name,
        plane.join(","),
        s.constants
    );
    result.write_gnuplot(fs::File::create(&path)?, &title)?;
    let found: usize = result.branches.iter().flatten().flatten().filter(|z| z.is_some()).count();
    Ok(Report {
        name: format!("levelset-cut-{}", s.name),
        passed: found > 0,
        body: json!({
            "scenario": s.name,
            "mu": mu,
            "axes": result.names,
            "branches": result.branches.len(),
            "points": found,
            "data": path.display().to_string(),
        }),
        text: None,
    })
}

fn run(cli: Cli) -> Result<i32> {
    let ctx = Ctx {
        json: cli.json,
        report_dir: cli.report_dir,
        seed: cli.seed,
        samples: cli.samples,
        params: cli.params.into_iter().collect(),
    };
    let (report, code) = match &cli.command {
        Command::Validate { scenario } => with_code(validate(&ctx, scenario)?),
        Command::Reeb { scenario } => with_code(reeb(&ctx, scenario)?),
        Command::Evolve { scenario, x0, run, out } => with_code(evolve(&ctx, scenario, x0.clone(), run, out.as_deref())?),
        Command::Noether { scenario, starts, run } => with_code(noether(&ctx, scenario, *starts, run)?),
        Command::Reduce { scenario, mu } => pipeline(&ctx, scenario, mu.clone(), None, None)?,
        Command::Compare { scenario, mu, x0, run } => pipeline(&ctx, scenario, mu.clone(), x0.clone(), Some(run))?,
        Command::Formalisms { scenario, duration, h } => with_code(formalisms(&ctx, scenario, *duration, *h)?),
        Command::FuzzLemma45 { dims, cases } => with_code(fuzz(&ctx, dims, *cases)?),
        Command::LevelsetCut {
            scenario,
            mu,
            component,
            plane,
            axes,
            solve,
            out,
        } => with_code(cut(&ctx, scenario, *mu, *component, plane, axes, solve, out.as_deref())?),
    };
    ctx.emit(&report)?;
    Ok(code)
}

fn with_code(r: Report) -> (Report, i32) {
    let code = if r.passed { 0 } else { 1 };
    (r, code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            if json {
                println!(
                    "{}",
                    json!({ "error": e.to_string(), "exit_code": e.exit_code() })
                );
            }
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
