//! Experiment runner: validates a configuration, executes the named command
//! under an optional fixed-size thread pool, and writes an atomic result
//! archive (config + JSON report + CSV tables + warning log). All parallel
//! reductions are index-ordered, so archives are byte-identical across
//! worker counts.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::archive::{csv_bytes, fmt_f64, run_id, write_archive, ArchiveFile, ResultArchive};
use crate::concentration::{
    bblm_from_ensemble, es_ensemble, mean_bound_check, sample_z, sigma_scaling_sweep, tail_check,
};
use crate::config::{
    validate, ConcentrationParams, CriterionParams, Diagnostic, ExperimentConfig, GreenMethodSpec,
    GreenParams, Severity, StartsSpec, SweepParams, TaskSpec, WalkParams,
};
use crate::criterion::{run_pipeline, CriterionReport, DeskCaps, Holds};
use crate::env::{sample_environment, EnvironmentLaw};
use crate::green::{green_apply_exact, green_apply_mc, GreenField, GreenMethod};
use crate::lattice::{LatticeDomain, Site};
use crate::walk::{aggregate_faces, default_step_cap, face_tallies};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration invalid")]
    Invalid(Vec<Diagnostic>),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub struct RunOutcome {
    pub archive: ResultArchive,
    pub warnings: Vec<String>,
    /// Sub-tasks that errored; their messages are in the report and the
    /// warning log, and the process should exit with code 3.
    pub partial_failures: usize,
}

fn to_json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn holds_str(h: &Holds) -> &'static str {
    match h {
        Holds::Holds => "holds",
        Holds::Fails => "fails",
        Holds::UntestableAtScale => "untestable",
    }
}

/// Run one sub-task, converting an error into a recorded partial failure.
fn sub_task<T: Serialize, E: std::fmt::Display>(
    name: &str,
    result: Result<T, E>,
    failures: &mut usize,
    warnings: &mut Vec<String>,
) -> Value {
    match result {
        Ok(v) => to_json(&v),
        Err(e) => {
            *failures += 1;
            warnings.push(format!("{name}: {e}"));
            json!({ "error": e.to_string() })
        }
    }
}

struct TaskOutput {
    result: Value,
    tables: Vec<(String, Vec<u8>)>,
    failures: usize,
}

/// Validate, execute, and archive one experiment.
pub fn run(
    cfg: &ExperimentConfig,
    out_root: &Path,
    workers: Option<usize>,
) -> Result<RunOutcome, RunError> {
    let diags = validate(cfg);
    if crate::config::has_errors(&diags) {
        return Err(RunError::Invalid(diags));
    }
    let mut warnings: Vec<String> = diags
        .iter()
        .filter(|d| d.severity == Severity::Warning)
        .map(|d| format!("{}: {}", d.path, d.message))
        .collect();

    let canonical = cfg.canonical_json();
    let id = run_id(&canonical);

    let output = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("thread pool")
            .install(|| execute(cfg, &id, &mut warnings)),
        None => execute(cfg, &id, &mut warnings),
    };

    let report = json!({
        "schema_version": crate::config::SCHEMA_VERSION,
        "run_id": id,
        "command": cfg.task.command_name(),
        "law": to_json(&cfg.law),
        "domain": to_json(&cfg.domain),
        "deterministic": cfg.deterministic,
        "partial_failures": output.failures,
        "result": output.result,
    });

    let mut files = vec![
        ArchiveFile::new("config.json", canonical.into_bytes()),
        ArchiveFile::new(
            "report.json",
            serde_json::to_string_pretty(&report).expect("report serializes").into_bytes(),
        ),
        ArchiveFile::new("warnings.log", {
            let mut log = warnings.join("\n");
            if !log.is_empty() {
                log.push('\n');
            }
            log.into_bytes()
        }),
    ];
    for (name, bytes) in output.tables {
        files.push(ArchiveFile::new(&format!("tables/{name}"), bytes));
    }
    let archive = write_archive(out_root, &id, &files)?;
    Ok(RunOutcome { archive, warnings, partial_failures: output.failures })
}

fn execute(cfg: &ExperimentConfig, id: &str, warnings: &mut Vec<String>) -> TaskOutput {
    match &cfg.task {
        TaskSpec::Walk(p) => run_walk(cfg, p, warnings),
        TaskSpec::Green(p) => run_green(cfg, p, warnings),
        TaskSpec::Criterion(p) => run_criterion(cfg, p, warnings),
        TaskSpec::Concentration(p) => run_concentration(cfg, p, warnings),
        TaskSpec::Sweep(p) => run_sweep(cfg, p, id, warnings),
    }
}

fn run_walk(cfg: &ExperimentConfig, p: &WalkParams, warnings: &mut Vec<String>) -> TaskOutput {
    let domain = cfg.domain.to_domain(cfg.law.d).expect("validated");
    let step_cap = cfg.caps.step_cap.unwrap_or_else(|| default_step_cap(&domain));
    let seed = cfg.seeds.seed_for("walk-envs");
    let mut failures = 0;
    let mut tables = Vec::new();
    let result = match face_tallies(&cfg.law, &domain, p.n_env, p.n_walks, seed, step_cap) {
        Ok(per_env) => {
            let annealed = aggregate_faces(&per_env, p.n_walks);
            let rows: Vec<Vec<String>> = per_env
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    vec![
                        i.to_string(),
                        t.front.to_string(),
                        t.back.to_string(),
                        t.side.to_string(),
                        t.censored.to_string(),
                        t.n.to_string(),
                        fmt_f64(t.mean_exit_time),
                    ]
                })
                .collect();
            tables.push((
                "exits.csv".to_string(),
                csv_bytes(
                    &["env", "front", "back", "side", "censored", "n", "mean_exit_time"],
                    &rows,
                ),
            ));
            let censored: u64 = per_env.iter().map(|t| t.censored).sum();
            if censored > 0 {
                warnings.push(format!("{censored} walks hit the step cap {step_cap}"));
            }
            json!({
                "n_env": p.n_env,
                "n_walks": p.n_walks,
                "step_cap": step_cap,
                "seed": seed,
                "annealed": to_json(&annealed),
            })
        }
        Err(e) => {
            failures += 1;
            warnings.push(format!("walk: {e}"));
            json!({ "error": e.to_string() })
        }
    };
    TaskOutput { result, tables, failures }
}

fn green_table(field: &GreenField, domain: &LatticeDomain, d: usize) -> (String, Vec<u8>) {
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    header.push("value".to_string());
    let with_se = field.std_errors.is_some();
    if with_se {
        header.push("std_error".to_string());
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let indices: Vec<usize> = match &field.evaluated {
        Some(list) => list.clone(),
        None => (0..field.values.len()).collect(),
    };
    let rows: Vec<Vec<String>> = indices
        .iter()
        .map(|&i| {
            let site = domain.site_at(i);
            let mut row: Vec<String> =
                site.0[..d].iter().map(|c| c.to_string()).collect();
            row.push(fmt_f64(field.values[i]));
            if let Some(se) = &field.std_errors {
                row.push(fmt_f64(se[i]));
            }
            row
        })
        .collect();
    ("green.csv".to_string(), csv_bytes(&header_refs, &rows))
}

fn run_green(cfg: &ExperimentConfig, p: &GreenParams, warnings: &mut Vec<String>) -> TaskOutput {
    let domain = cfg.domain.to_domain(cfg.law.d).expect("validated");
    let env_seed = cfg.seeds.seed_for("green-env");
    let env = sample_environment(cfg.law.clone(), domain.clone(), env_seed);
    let mut failures = 0;
    let mut tables = Vec::new();
    let field_result = match &p.method {
        GreenMethodSpec::Exact => {
            green_apply_exact(&env, &domain, &p.source, cfg.caps.state_cap)
                .map_err(|e| e.to_string())
        }
        GreenMethodSpec::Mc { n_walks_per_start } => {
            let step_cap = cfg.caps.step_cap.unwrap_or_else(|| default_step_cap(&domain));
            let starts: Vec<Site> = match p.starts {
                StartsSpec::Origin => vec![Site::origin()],
                StartsSpec::All => (0..domain.states().unwrap() as usize)
                    .map(|i| domain.site_at(i))
                    .collect(),
            };
            green_apply_mc(
                &env,
                &domain,
                &p.source,
                &starts,
                *n_walks_per_start,
                cfg.seeds.seed_for("green-walks"),
                step_cap,
            )
            .map_err(|e| e.to_string())
        }
    };
    let result = match field_result {
        Ok(field) => {
            tables.push(green_table(&field, &domain, cfg.law.d));
            let method = match &field.method {
                GreenMethod::Exact { residual, iterations } => {
                    let mut header =
                        json!({ "method": "exact", "residual": residual, "iterations": iterations });
                    if field.values.len() as u64 <= cfg.caps.dense_cap {
                        let diff = dense_cross_check(&env, &domain, &p.source, &field.values);
                        let scale = field.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
                        header["dense_max_abs_diff"] = json!(diff);
                        if diff > 1e-10 * scale {
                            warnings.push(format!(
                                "green: dense cross-check disagrees with the iterative solve \
                                 (max |diff| = {diff:.3e} over {} states)",
                                field.values.len()
                            ));
                        }
                    }
                    header
                }
                GreenMethod::Mc { n_walks_per_start } => {
                    json!({ "method": "mc", "n_walks_per_start": n_walks_per_start })
                }
            };
            json!({
                "source": to_json(&p.source),
                "env_seed": env_seed,
                "states": field.values.len(),
                "header": method,
            })
        }
        Err(e) => {
            failures += 1;
            warnings.push(format!("green: {e}"));
            json!({ "error": e })
        }
    };
    TaskOutput { result, tables, failures }
}

/// Max |iterative - dense| over all states: the dense LU factorization is an
/// independent route through the same (I - P) system, run whenever the state
/// count fits under caps.dense_cap.
fn dense_cross_check(
    env: &crate::env::Environment,
    domain: &LatticeDomain,
    source: &crate::green::GreenSource,
    values: &[f64],
) -> f64 {
    let kernel = crate::solver::ChainKernel::build(env, domain, values.len() as u64)
        .expect("kernel rebuilt at its own size");
    let rhs = source.build_rhs(env, domain, kernel.n);
    let dense = crate::solver::solve_dense(&kernel, &rhs, false, values.len());
    values.iter().zip(&dense).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
}

/// Fixed flat row for sweep aggregation; missing estimates are empty cells.
fn criterion_csv_header() -> Vec<&'static str> {
    vec![
        "law_kind",
        "d",
        "r",
        "mode",
        "epsilon",
        "lambda",
        "sigma_2",
        "sigma_2r",
        "lambda0",
        "m",
        "l",
        "big_h",
        "small_h",
        "gamma1",
        "admissible",
        "theorem",
        "kalikow",
        "nottoosmall",
        "eps_l",
        "paper_floor",
        "delta_applicable",
        "effective",
        "hat_rho_mean",
        "p_hat",
        "backexit",
    ]
}

fn criterion_csv_row(rep: &CriterionReport) -> Vec<String> {
    let verdict = |prefix: &str| -> String {
        rep.verdict(prefix).map(|v| holds_str(&v.holds).to_string()).unwrap_or_default()
    };
    let effective = rep
        .verdict("ln backexit")
        .or_else(|| rep.verdict("ln lemma1-bound"))
        .map(|v| holds_str(&v.holds).to_string())
        .unwrap_or_default();
    vec![
        rep.law_kind.clone(),
        rep.d.to_string(),
        rep.r.to_string(),
        rep.mode.clone(),
        fmt_f64(rep.moments.epsilon),
        fmt_f64(rep.moments.lambda.value),
        fmt_f64(rep.moments.sigma_2.value),
        fmt_f64(rep.moments.sigma_2r.value),
        fmt_f64(rep.schedule.lambda0),
        fmt_f64(rep.schedule.m),
        fmt_f64(rep.schedule.l),
        fmt_f64(rep.schedule.big_h),
        fmt_f64(rep.schedule.small_h),
        fmt_f64(rep.schedule.gamma1),
        rep.schedule.flags.admissible.to_string(),
        verdict("lambda >= lambda0"),
        verdict("lambda >= 4d"),
        verdict("sigma_2r > eps^2"),
        verdict("eps L < 3/4"),
        verdict("ln M >= 100"),
        verdict("delta_inverse < 1"),
        effective,
        rep.hat_rho_mean.map(|e| fmt_f64(e.mean)).unwrap_or_default(),
        rep.p_hat.map(|e| fmt_f64(e.mean)).unwrap_or_default(),
        rep.backexit.map(|e| fmt_f64(e.mean)).unwrap_or_default(),
    ]
}

fn desk_caps(cfg: &ExperimentConfig) -> DeskCaps {
    let defaults = DeskCaps::default();
    DeskCaps {
        state_cap: cfg.caps.state_cap,
        step_cap: cfg.caps.step_cap.unwrap_or(defaults.step_cap),
    }
}

fn run_criterion(
    cfg: &ExperimentConfig,
    p: &CriterionParams,
    warnings: &mut Vec<String>,
) -> TaskOutput {
    let rep = run_pipeline(
        &cfg.law,
        p.r,
        &p.mode,
        desk_caps(cfg),
        p.consts,
        cfg.seeds.seed_for("criterion"),
        p.moment_samples,
    );
    warnings.extend(rep.warnings.iter().cloned());
    let tables = vec![(
        "criterion.csv".to_string(),
        csv_bytes(&criterion_csv_header(), &[criterion_csv_row(&rep)]),
    )];
    TaskOutput { result: to_json(&rep), tables, failures: 0 }
}

fn run_concentration(
    cfg: &ExperimentConfig,
    p: &ConcentrationParams,
    warnings: &mut Vec<String>,
) -> TaskOutput {
    let slab = cfg.domain.slab(cfg.law.d).expect("validated");
    let mut failures = 0;
    let mut tables = Vec::new();

    let bblm = match es_ensemble(
        &cfg.law,
        slab,
        p.n_env,
        p.inner_replicates,
        cfg.seeds.seed_for("conc-resample"),
        cfg.caps.state_cap,
        cfg.caps.solve_budget_per_env,
    ) {
        Ok(ens) => {
            let reports: Vec<Value> = p
                .q
                .iter()
                .map(|&q| {
                    sub_task(
                        &format!("bblm q={q}"),
                        bblm_from_ensemble(&ens, q),
                        &mut failures,
                        warnings,
                    )
                })
                .collect();
            Value::Array(reports)
        }
        Err(e) => {
            failures += 1;
            warnings.push(format!("bblm ensemble: {e}"));
            json!({ "error": e.to_string() })
        }
    };

    let mean_bound = sub_task(
        "mean-bound",
        mean_bound_check(
            &cfg.law,
            slab,
            p.n_env_mean,
            cfg.seeds.seed_for("conc-mean"),
            cfg.caps.state_cap,
        ),
        &mut failures,
        warnings,
    );

    let tail = match sample_z(
        &cfg.law,
        slab,
        p.n_env_tail,
        cfg.seeds.seed_for("conc-tail"),
        cfg.caps.state_cap,
    )
    .map_err(|e| e.to_string())
    .and_then(|ens| tail_check(&ens, p.r, &p.u_grid, p.c7).map_err(|e| e.to_string()))
    {
        Ok(rep) => {
            let rows: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|row| {
                    vec![
                        fmt_f64(row.u),
                        fmt_f64(row.empirical_tail.value),
                        fmt_f64(row.empirical_tail.std_error),
                        fmt_f64(row.markov_reference),
                        fmt_f64(row.paper_form),
                        row.consistent.map(|b| b.to_string()).unwrap_or_default(),
                        row.vacuous.to_string(),
                    ]
                })
                .collect();
            tables.push((
                "tail.csv".to_string(),
                csv_bytes(
                    &[
                        "u",
                        "empirical_tail",
                        "std_error",
                        "markov_reference",
                        "paper_form",
                        "consistent",
                        "vacuous",
                    ],
                    &rows,
                ),
            ));
            to_json(&rep)
        }
        Err(e) => {
            failures += 1;
            warnings.push(format!("tail: {e}"));
            json!({ "error": e })
        }
    };

    let scaling = match &p.scaling_amplitudes {
        None => Value::Null,
        Some(amps) => sub_task(
            "sigma-scaling",
            sigma_scaling_sweep(
                cfg.law.d,
                slab,
                cfg.law.lambda_analytic(),
                amps,
                p.r,
                p.scaling_n_env.unwrap_or(200),
                cfg.seeds.seed_for("conc-scaling"),
                cfg.caps.state_cap,
            ),
            &mut failures,
            warnings,
        ),
    };

    let result = json!({
        "bblm": bblm,
        "mean_bound": mean_bound,
        "tail": tail,
        "scaling": scaling,
    });
    TaskOutput { result, tables, failures }
}

fn run_sweep(
    cfg: &ExperimentConfig,
    p: &SweepParams,
    id: &str,
    warnings: &mut Vec<String>,
) -> TaskOutput {
    let mut failures = 0;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut cell_summaries: Vec<Value> = Vec::new();
    let caps = desk_caps(cfg);
    for (i, cell) in p.cells.iter().enumerate() {
        let cell_id = run_id(&format!("{id}:{i}:{}:{}:{}", cell.a, cell.lambda, cell.r));
        match EnvironmentLaw::two_point(cfg.law.d, cell.a, cell.lambda) {
            Ok(law) => {
                let rep = run_pipeline(
                    &law,
                    cell.r,
                    &p.mode,
                    caps,
                    p.consts,
                    cfg.seeds.seed_for(&format!("sweep-cell-{i}")),
                    p.moment_samples,
                );
                warnings.extend(rep.warnings.iter().map(|w| format!("cell {i}: {w}")));
                let mut row = vec![cell_id.clone()];
                row.extend(criterion_csv_row(&rep));
                rows.push(row);
                cell_summaries.push(json!({
                    "cell_id": cell_id,
                    "a": cell.a,
                    "lambda": cell.lambda,
                    "r": cell.r,
                    "epsilon": rep.moments.epsilon,
                    "verdicts": to_json(&rep.verdicts),
                }));
            }
            Err(e) => {
                failures += 1;
                warnings.push(format!("cell {i}: {e}"));
                let mut row = vec![cell_id.clone()];
                row.resize(criterion_csv_header().len() + 1, String::new());
                rows.push(row);
                cell_summaries.push(json!({
                    "cell_id": cell_id,
                    "a": cell.a,
                    "lambda": cell.lambda,
                    "r": cell.r,
                    "error": e.to_string(),
                }));
            }
        }
    }
    let mut header = vec!["cell_id"];
    header.extend(criterion_csv_header());
    let tables = vec![("sweep.csv".to_string(), csv_bytes(&header, &rows))];
    TaskOutput {
        result: json!({ "cells": cell_summaries }),
        tables,
        failures,
    }
}
