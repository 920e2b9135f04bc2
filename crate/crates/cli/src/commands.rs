use std::path::{Path, PathBuf};

use agebid::analytic::{asymptotic_regret, shading_closed_form, time_average};
use agebid::export::{policy_rows, write_csv, write_json, ShadingRow};
use agebid::simulator::{compare_policies, estimate_value, Horizon, PolicyCase};
use agebid::solver::bisect_v0;
use agebid::{BidPolicy64, CompetitionModel64, Model64, ValueCurve64};
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Solve,
    Table1,
    Shading,
    Asymptotics,
}

impl Which {
    fn name(self) -> &'static str {
        match self {
            Which::Solve => "solve",
            Which::Table1 => "table1",
            Which::Shading => "shading",
            Which::Asymptotics => "asymptotics",
        }
    }
}

/// Runs one command and returns the files it wrote.
pub fn dispatch(which: Which, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let out = cfg.output_dir.as_path();
    let mut files = match which {
        Which::Solve => solve(cfg, out)?,
        Which::Table1 => table1(cfg, out)?,
        Which::Shading => shading(cfg, out)?,
        Which::Asymptotics => asymptotics(cfg, out)?,
    };
    let manifest = out.join("manifest.json");
    write_json(
        &manifest,
        &json!({
            "command": which.name(),
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": cfg.hash(),
            "seed": cfg.sim.seed,
            "n_reps": cfg.sim.n_reps,
            "files": files
                .iter()
                .map(|f| f.file_name().unwrap().to_string_lossy().into_owned())
                .collect::<Vec<_>>(),
        }),
    )?;
    files.push(manifest);
    Ok(files)
}

/// Per-time value of a simulated estimate: discounted totals are scaled by `gamma`.
fn per_time(cfg: &ExperimentConfig, model: &Model64) -> f64 {
    match cfg.sim.horizon {
        Horizon::Discounted => model.env.gamma,
        Horizon::TimeAverage { .. } => 1.0,
    }
}

fn solve(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let model = cfg.model()?;
    let result = bisect_v0(&model, &cfg.solver)?;
    let csv = out.join("policy.csv");
    write_csv(&csv, &policy_rows(&result))?;
    let js = out.join("solve.json");
    write_json(
        &js,
        &json!({
            "v0_star": result.v0_star,
            "value_per_time": model.env.gamma * result.v0_star,
            "final_width": result.final_width(),
            "bracket_history": result.bracket_history,
            "tau_max": result.tau_max,
            "grid_points": result.tau_grid.len(),
            "k_kind": model.curve.kind_name(),
            "mu": model.env.mu,
            "gamma": model.env.gamma,
            "policy": result.to_policy(),
            "config_hash": cfg.hash(),
            "seed": cfg.sim.seed,
        }),
    )?;
    Ok(vec![csv, js])
}

#[derive(Serialize)]
struct AnalyticRow {
    k_kind: String,
    mu: f64,
    policy: String,
    time_average: f64,
    solver_value_per_time: Option<f64>,
}

fn table1(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut cases = Vec::new();
    let mut analytic = Vec::new();
    for panel in &cfg.table1.panels {
        for &mu in &panel.mu {
            let model = cfg.model_for(&panel.curve, mu)?;
            let result = bisect_v0(&model, &cfg.solver)?;
            let optimal = result.to_policy();
            for (label, policy, solver) in [
                ("optimal", optimal, Some(model.env.gamma * result.v0_star)),
                ("greedy", BidPolicy64::Greedy, None),
            ] {
                analytic.push(AnalyticRow {
                    k_kind: model.curve.kind_name().into(),
                    mu,
                    policy: label.into(),
                    time_average: time_average(&policy, &model)?,
                    solver_value_per_time: solver,
                });
                cases.push(PolicyCase {
                    label: label.into(),
                    policy,
                    model: model.clone(),
                });
            }
        }
    }
    let rows = compare_policies(&cases, &cfg.sim)?;
    let csv = out.join("table1.csv");
    write_csv(&csv, &rows)?;
    let extra = out.join("table1_analytic.csv");
    write_csv(&extra, &analytic)?;
    Ok(vec![csv, extra])
}

#[derive(Serialize)]
struct RatioRow {
    alpha: f64,
    mu: f64,
    simulated: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    optimal: f64,
    ratio: f64,
}

fn closed_form_applies(curve: &ValueCurve64, comp: &CompetitionModel64) -> bool {
    matches!(curve, ValueCurve64::Hyperbolic) && matches!(comp, CompetitionModel64::Uniform01)
}

fn shading(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    for &mu in &cfg.shading.mu {
        let model = cfg.model_for(&cfg.curve, mu)?;
        let optimal = model.env.gamma * bisect_v0(&model, &cfg.solver)?.v0_star;
        for &alpha in &cfg.shading.alphas {
            let policy = BidPolicy64::shading(alpha)?;
            let quadrature = time_average(&policy, &model)?;
            let closed_form = if closed_form_applies(&model.curve, &model.competition) && mu * alpha > 1.0 {
                Some(shading_closed_form(alpha, mu)?)
            } else {
                None
            };
            rows.push(ShadingRow {
                alpha,
                mu,
                closed_form,
                quadrature,
            });
            let sim = if cfg.shading.simulate {
                let est = estimate_value(&policy, &model, &cfg.sim)?.scaled(per_time(cfg, &model));
                Some(est)
            } else {
                None
            };
            ratios.push(RatioRow {
                alpha,
                mu,
                simulated: sim.map(|e| e.mean),
                ci_low: sim.map(|e| e.ci95.0),
                ci_high: sim.map(|e| e.ci95.1),
                optimal,
                ratio: quadrature / optimal,
            });
        }
    }
    let csv = out.join("shading.csv");
    write_csv(&csv, &rows)?;
    let extra = out.join("shading_ratio.csv");
    write_csv(&extra, &ratios)?;
    Ok(vec![csv, extra])
}

fn asymptotics(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let p_dot_0 = asymptotic_regret(&cfg.competition)?;
    let mut gaps = Vec::new();
    for &mu in &cfg.asymptotics.mu {
        let model = cfg.model_for(&cfg.curve, mu)?;
        let result = bisect_v0(&model, &cfg.solver)?;
        let optimal = time_average(&result.to_policy(), &model)?;
        let greedy = time_average(&BidPolicy64::Greedy, &model)?;
        gaps.push(json!({
            "mu": mu,
            "optimal": optimal,
            "greedy": greedy,
            "gap": 1.0 - greedy / optimal,
        }));
    }
    let js = out.join("asymptotics.json");
    write_json(
        &js,
        &json!({
            "p_dot_0": p_dot_0,
            "k_kind": cfg.curve.kind_name(),
            "gaps": gaps,
            "config_hash": cfg.hash(),
            "seed": cfg.sim.seed,
        }),
    )?;
    Ok(vec![js])
}
