//! The three subcommands. Each writes its artifacts into `out` and returns
//! a one-line summary, or an error carrying the exit code.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use hfo::analysis::{
    check_bound, constants, reconstruct_x, rate_check, BoundReport, Constants, Theorem, ENTRY_TOL, STEP_TOL,
};
use hfo::hybrid::{check_non_zeno, jump_stats, simulate, HybridArc, HybridTime, Horizon, JumpStats, NonZenoReport};
use hfo::model::{Diagnostics, FoSystem, State};
use hfo::robustness::{robustness_sweep, SweepResult};
use serde::Serialize;

use crate::config::Loaded;
use crate::output::{write_json, write_trajectory};
use crate::{CliError, VERSION};

/// Largest deviation accepted between the simulated and reconstructed plant state.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

fn run(loaded: &Loaded) -> Result<(Constants, HybridArc), CliError> {
    let c = constants(&loaded.params).map_err(|e| CliError::Validation(format!("constants: {e}")))?;
    let sys = FoSystem::new(loaded.params.clone())?;
    let h = Horizon {
        t_end: loaded.config.horizon.t_end,
        max_jumps: loaded.config.horizon.max_jumps,
    };
    let arc = simulate(&sys, &loaded.initial, loaded.config.policy, h, loaded.config.sample_dt)?;
    Ok((c, arc))
}

fn ensure_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    version: &'static str,
    seed: u64,
    constants: &'a Constants,
    diagnostics: &'a Diagnostics,
    strict_init_ok: bool,
    jump_stats: JumpStats,
    non_zeno: NonZenoReport,
    final_time: HybridTime,
    final_state: &'a State,
}

pub fn cmd_simulate(loaded: &Loaded, out: &Path) -> Result<String, CliError> {
    ensure_dir(out)?;
    let (c, arc) = run(loaded)?;
    let csv_path = out.join("trajectory.csv");
    write_trajectory(BufWriter::new(File::create(&csv_path)?), &arc, &c)?;
    let report = SimulateReport {
        version: VERSION,
        seed: loaded.config.policy.seed,
        constants: &c,
        diagnostics: &loaded.diagnostics,
        strict_init_ok: loaded.strict_init_ok(),
        jump_stats: jump_stats(&arc)?,
        non_zeno: check_non_zeno(&arc),
        final_time: arc.final_time(),
        final_state: arc.final_state(),
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(format!(
        "simulated to t = {} with {} jumps; wrote {} and report.json",
        report.final_time.t,
        report.final_time.j,
        csv_path.display()
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Which {
    Thm1,
    Thm2,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    /// Worst-case slack: negative means the check failed by that much.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    pub detail: String,
}

impl CheckResult {
    fn judged(name: &'static str, ok: bool, margin: Option<f64>, detail: String) -> Self {
        Self {
            name,
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            margin,
            detail,
        }
    }
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    version: &'static str,
    seed: u64,
    passed: bool,
    constants: &'a Constants,
    diagnostics: &'a Diagnostics,
    checks: Vec<CheckResult>,
}

fn bound_check(name: &'static str, r: &BoundReport) -> CheckResult {
    let worst = r
        .samples
        .iter()
        .map(|s| s.rhs + r.tolerance - s.lhs)
        .fold(f64::INFINITY, f64::min);
    let detail = match r.first_violation {
        Some(at) => format!(
            "{} violations over {} samples, first at t = {} (j = {}), max violation {:e}",
            r.violations,
            r.samples.len(),
            at.t,
            at.j,
            r.max_violation
        ),
        None => format!("{} samples within the bound", r.samples.len()),
    };
    CheckResult::judged(name, r.passed(), Some(worst), detail)
}

pub fn cmd_verify(loaded: &Loaded, which: Which, out: &Path) -> Result<String, CliError> {
    ensure_dir(out)?;
    let (c, arc) = run(loaded)?;
    let timers = &loaded.params.timers;
    let mut checks = Vec::new();

    let strict_ok = loaded.strict_init_ok();
    let want_thm1 = matches!(which, Which::Thm1 | Which::All);
    // The first bound only applies to strictly initialized runs; the second one replaces it otherwise.
    let want_thm2 = which == Which::Thm2 || which == Which::All || !strict_ok;
    if want_thm1 {
        if strict_ok {
            checks.push(bound_check("thm1", &check_bound(&arc, &c, timers, Theorem::Thm1)));
        } else {
            let failing: Vec<&str> = loaded
                .diagnostics
                .items
                .iter()
                .filter(|d| d.check.starts_with("init_") && d.status != hfo::model::Status::Pass)
                .map(|d| d.check)
                .collect();
            checks.push(CheckResult {
                name: "thm1",
                status: CheckStatus::Skipped,
                margin: None,
                detail: format!("initial state is not strictly initialized ({})", failing.join(", ")),
            });
        }
    }
    if want_thm2 {
        checks.push(bound_check("thm2", &check_bound(&arc, &c, timers, Theorem::Thm2)));
    }

    let final_dist = hfo::analysis::dist_to_A(arc.final_state(), &c);
    checks.push(CheckResult::judged(
        "entry",
        final_dist <= ENTRY_TOL,
        Some(ENTRY_TOL - final_dist),
        format!("distance to the target set at t = {} is {final_dist:e}", arc.final_time().t),
    ));

    let rates = rate_check(&arc, &loaded.params)?;
    let worst_step = rates
        .periods
        .iter()
        .map(|p| STEP_TOL - p.worst_step_margin)
        .fold(f64::INFINITY, f64::min);
    checks.push(CheckResult::judged(
        "contraction",
        rates.passed,
        worst_step.is_finite().then_some(worst_step),
        format!("{} input periods checked with q = {}", rates.periods.len(), rates.q),
    ));

    let rec = reconstruct_x(&arc, &loaded.params)?;
    checks.push(CheckResult::judged(
        "reconstruction",
        rec.max_deviation <= RECONSTRUCTION_TOL,
        Some(RECONSTRUCTION_TOL - rec.max_deviation),
        format!("max deviation {:e} over {} points", rec.max_deviation, rec.points.len()),
    ));

    let nz = check_non_zeno(&arc);
    checks.push(CheckResult::judged(
        "non_zeno",
        nz.passed,
        None,
        format!(
            "at most {} jumps per instant, {} violations",
            nz.max_jumps_at_one_time,
            nz.violations.len()
        ),
    ));

    let failed: Vec<&str> = checks.iter().filter(|c| c.status == CheckStatus::Fail).map(|c| c.name).collect();
    let report = VerifyReport {
        version: VERSION,
        seed: loaded.config.policy.seed,
        passed: failed.is_empty(),
        constants: &c,
        diagnostics: &loaded.diagnostics,
        checks,
    };
    write_json(&out.join("verify.json"), &report)?;
    if failed.is_empty() {
        Ok(format!("all {} checks passed; wrote verify.json", report.checks.len()))
    } else {
        Err(CliError::Verification(format!("{} (see verify.json)", failed.join(", "))))
    }
}

pub const DEFAULT_DELTAS: [f64; 3] = [1e-1, 1e-2, 1e-3];
pub const DEFAULT_TAU: f64 = 10.0;

#[derive(Serialize)]
struct RobustnessReport<'a> {
    version: &'static str,
    seed: u64,
    verdict: &'static str,
    sweep: &'a SweepResult,
}

pub fn verdict(sweep: &SweepResult) -> &'static str {
    if sweep.nonincreasing {
        "nonincreasing"
    } else if sweep.kendall_tau > 0.0 {
        "decreasing trend with exceptions"
    } else {
        "no decreasing trend"
    }
}

fn fmt_eps(e: f64) -> String {
    if e.is_finite() {
        e.to_string()
    } else {
        "inf".into()
    }
}

pub fn cmd_robustness(loaded: &Loaded, deltas: &[f64], tau: f64, out: &Path) -> Result<String, CliError> {
    let pert = loaded
        .config
        .perturbation
        .as_ref()
        .ok_or_else(|| CliError::Input("config has no perturbation block".into()))?;
    if deltas.is_empty() || deltas.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
        return Err(CliError::Input(format!("deltas must be non-negative and finite, got {deltas:?}")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(CliError::Input(format!("tau must be positive, got {tau}")));
    }
    ensure_dir(out)?;
    let sweep = robustness_sweep(
        &loaded.params,
        &loaded.initial,
        pert,
        deltas,
        tau,
        loaded.config.policy,
        loaded.config.sample_dt,
    )?;

    let csv_path: PathBuf = out.join("robustness.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["delta", "epsilon", "witness_t", "witness_j"])?;
    for r in &sweep.rows {
        let (wt, wj) = match &r.witness {
            Some(w) => (w.at.t.to_string(), w.at.j.to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([r.delta.to_string(), fmt_eps(r.epsilon), wt, wj])?;
    }
    w.flush()?;

    let report = RobustnessReport {
        version: VERSION,
        seed: loaded.config.policy.seed,
        verdict: verdict(&sweep),
        sweep: &sweep,
    };
    write_json(&out.join("robustness.json"), &report)?;
    Ok(format!(
        "epsilon over decreasing delta: {} (Kendall tau {:.3}); wrote {}",
        report.verdict,
        sweep.kendall_tau,
        csv_path.display()
    ))
}
