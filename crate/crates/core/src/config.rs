//! Experiment configuration: a single self-describing JSON document that
//! pins the command, law, domain, caps, and every seed, so one file (plus
//! one master seed) reproduces a run byte for byte.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::criterion::{make_schedule, PipelineMode, ScheduleConstants};
use crate::env::EnvironmentLaw;
use crate::green::GreenSource;
use crate::lattice::{LatticeDomain, SlabSpec};
use crate::rng::derive_key;

pub const SCHEMA_VERSION: u32 = 1;

const TAG_NAMED_STREAM: u64 = 0x5eed_a11c;

/// Default hard ceiling on assembled solver states.
pub fn default_state_cap() -> u64 {
    1 << 21
}

/// Default ceiling on states eligible for the dense oracle.
pub fn default_dense_cap() -> u64 {
    2000
}

/// Default per-environment budget of perturbed resampling solves.
pub fn default_solve_budget() -> u64 {
    1 << 24
}

fn default_inner_replicates() -> u32 {
    8
}

fn default_c7() -> f64 {
    1.0
}

fn default_out_dir() -> String {
    "runs".to_string()
}

fn default_q_list() -> Vec<f64> {
    vec![2.0, 4.0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Caps {
    #[serde(default = "default_state_cap")]
    pub state_cap: u64,
    #[serde(default = "default_dense_cap")]
    pub dense_cap: u64,
    /// Walk step cap; absent means 100x the symmetric exit time.
    #[serde(default)]
    pub step_cap: Option<u64>,
    #[serde(default = "default_solve_budget")]
    pub solve_budget_per_env: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            state_cap: default_state_cap(),
            dense_cap: default_dense_cap(),
            step_cap: None,
            solve_budget_per_env: default_solve_budget(),
        }
    }
}

/// One master seed plus optional named overrides; every task stream pulls
/// its seed by name through keyed hashing, so the master seed alone
/// reproduces everything.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedManifest {
    pub master_seed: u64,
    #[serde(default)]
    pub named: BTreeMap<String, u64>,
}

impl SeedManifest {
    pub fn new(master_seed: u64) -> Self {
        SeedManifest { master_seed, named: BTreeMap::new() }
    }

    /// Stream seed: the named override if present, else a keyed hash of the
    /// stream name under the master seed.
    pub fn seed_for(&self, name: &str) -> u64 {
        if let Some(&s) = self.named.get(name) {
            return s;
        }
        let bytes = name.as_bytes();
        let mut tags = Vec::with_capacity(bytes.len() / 8 + 2);
        tags.push(TAG_NAMED_STREAM);
        for chunk in bytes.chunks(8) {
            let mut b = [0u8; 8];
            b[..chunk.len()].copy_from_slice(chunk);
            tags.push(u64::from_le_bytes(b));
        }
        tags.push(bytes.len() as u64);
        derive_key(self.master_seed, &tags)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutputBlock {
    #[serde(default = "default_out_dir")]
    pub dir: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: default_out_dir() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum DomainBlock {
    Slab { l: i64, w: i64 },
    Box { m: i64 },
    Rect { lo: Vec<i64>, hi: Vec<i64> },
}

impl DomainBlock {
    pub fn to_domain(&self, d: usize) -> Result<LatticeDomain, String> {
        match self {
            DomainBlock::Slab { l, w } => SlabSpec::new(d, *l, *w)
                .map(LatticeDomain::Slab)
                .map_err(|e| e.to_string()),
            DomainBlock::Box { m } => {
                LatticeDomain::boxed(d, *m).map_err(|e| e.to_string())
            }
            DomainBlock::Rect { lo, hi } => {
                if lo.len() != d || hi.len() != d {
                    return Err(format!(
                        "rect bounds need {d} coordinates, got {} and {}",
                        lo.len(),
                        hi.len()
                    ));
                }
                LatticeDomain::rect(lo.clone(), hi.clone()).map_err(|e| e.to_string())
            }
        }
    }

    pub fn slab(&self, d: usize) -> Option<SlabSpec> {
        match self {
            DomainBlock::Slab { l, w } => SlabSpec::new(d, *l, *w).ok(),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WalkParams {
    pub n_env: u64,
    pub n_walks: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum GreenMethodSpec {
    Exact,
    Mc { n_walks_per_start: u64 },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum StartsSpec {
    /// evaluate at the origin only
    Origin,
    /// evaluate at every interior state
    All,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreenParams {
    pub source: GreenSource,
    #[serde(flatten)]
    pub method: GreenMethodSpec,
    #[serde(default = "GreenParams::default_starts")]
    pub starts: StartsSpec,
}

impl GreenParams {
    fn default_starts() -> StartsSpec {
        StartsSpec::All
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionParams {
    pub r: u32,
    #[serde(flatten)]
    pub mode: PipelineMode,
    #[serde(default)]
    pub consts: ScheduleConstants,
    /// Monte Carlo sample count for laws without analytic moments.
    #[serde(default)]
    pub moment_samples: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcentrationParams {
    #[serde(default = "default_q_list")]
    pub q: Vec<f64>,
    pub r: u32,
    pub u_grid: Vec<f64>,
    #[serde(default = "default_c7")]
    pub c7: f64,
    /// Environments for the resampling (moment-inequality) ensemble.
    pub n_env: u64,
    /// Environments for the tail table (>= 1000).
    pub n_env_tail: u64,
    /// Environments for the mean-bound check.
    pub n_env_mean: u64,
    #[serde(default = "default_inner_replicates")]
    pub inner_replicates: u32,
    /// Optional amplitude sweep for the sigma-scaling diagnostic.
    #[serde(default)]
    pub scaling_amplitudes: Option<Vec<f64>>,
    #[serde(default)]
    pub scaling_n_env: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepCell {
    pub a: f64,
    pub lambda: f64,
    pub r: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepParams {
    pub cells: Vec<SweepCell>,
    /// Pipeline mode applied to every cell.
    #[serde(flatten)]
    pub mode: PipelineMode,
    #[serde(default)]
    pub consts: ScheduleConstants,
    #[serde(default)]
    pub moment_samples: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "command", content = "params", rename_all = "kebab-case")]
pub enum TaskSpec {
    Walk(WalkParams),
    Green(GreenParams),
    Criterion(CriterionParams),
    Concentration(ConcentrationParams),
    Sweep(SweepParams),
}

impl TaskSpec {
    pub fn command_name(&self) -> &'static str {
        match self {
            TaskSpec::Walk(_) => "walk",
            TaskSpec::Green(_) => "green",
            TaskSpec::Criterion(_) => "criterion",
            TaskSpec::Concentration(_) => "concentration",
            TaskSpec::Sweep(_) => "sweep",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(flatten)]
    pub task: TaskSpec,
    pub law: EnvironmentLaw,
    pub domain: DomainBlock,
    #[serde(default)]
    pub caps: Caps,
    pub seeds: SeedManifest,
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default)]
    pub output: OutputBlock,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Canonical serialization used for hashing and archiving: struct field
    /// order is fixed by the type definitions and named seeds live in an
    /// ordered map, so equal configs give equal bytes.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Severity {
    /// blocks the run (exit code 2)
    Error,
    /// recorded in the archive's warning log; the run proceeds
    Warning,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
    pub severity: Severity,
}

impl Diagnostic {
    fn error(path: &str, message: String) -> Self {
        Diagnostic { path: path.to_string(), message, severity: Severity::Error }
    }

    fn warning(path: &str, message: String) -> Self {
        Diagnostic { path: path.to_string(), message, severity: Severity::Warning }
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

/// Admissibility pre-flight: schema, law parameters, domain feasibility
/// against the state cap, a memory estimate, schedule flags, and
/// command-specific sanity checks. Errors block the run; warnings are
/// archived.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    if cfg.schema_version != SCHEMA_VERSION {
        diags.push(Diagnostic::error(
            "schema_version",
            format!("unsupported schema version {} (expected {SCHEMA_VERSION})", cfg.schema_version),
        ));
    }
    if let Err(e) = cfg.law.validate() {
        diags.push(Diagnostic::error("law", e.to_string()));
    }
    let domain = match cfg.domain.to_domain(cfg.law.d) {
        Ok(dom) => Some(dom),
        Err(e) => {
            diags.push(Diagnostic::error("domain", e));
            None
        }
    };
    if let Some(dom) = &domain {
        if let Some(states) = dom.states() {
            if states > cfg.caps.state_cap {
                diags.push(Diagnostic::error(
                    "domain",
                    format!(
                        "{states} states exceed the cap; raise caps.state_cap to at least {states}"
                    ),
                ));
            }
            // Rough memory estimate: neighbour table (4 bytes), probabilities
            // (8 bytes) per edge, plus ~4 solve vectors.
            let bytes = states * (2 * cfg.law.d as u64) * 12 + states * 32;
            let gib = bytes as f64 / (1u64 << 30) as f64;
            if gib > 4.0 {
                diags.push(Diagnostic::error(
                    "domain",
                    format!("estimated solver memory {gib:.1} GiB exceeds the 4 GiB budget"),
                ));
            } else if gib > 2.0 {
                diags.push(Diagnostic::warning(
                    "domain",
                    format!("estimated solver memory {gib:.1} GiB is close to the budget"),
                ));
            }
        }
    }
    match &cfg.task {
        TaskSpec::Walk(p) => {
            if p.n_env == 0 {
                diags.push(Diagnostic::error("params.n_env", "must be >= 1".into()));
            }
            if p.n_walks == 0 {
                diags.push(Diagnostic::error("params.n_walks", "must be >= 1".into()));
            }
        }
        TaskSpec::Green(p) => {
            if let GreenMethodSpec::Mc { n_walks_per_start } = &p.method {
                if *n_walks_per_start == 0 {
                    diags.push(Diagnostic::error(
                        "params.n_walks_per_start",
                        "must be >= 1".into(),
                    ));
                }
                if p.starts == StartsSpec::All {
                    diags.push(Diagnostic::warning(
                        "params.starts",
                        "Monte Carlo at every state is expensive; consider starts = origin".into(),
                    ));
                }
            }
            if let GreenSource::Custom { .. } = p.source {
                diags.push(Diagnostic::warning(
                    "params.source",
                    "custom sources must match the state enumeration length at run time".into(),
                ));
            }
        }
        TaskSpec::Criterion(p) => {
            if p.r < 1 {
                diags.push(Diagnostic::error("params.r", "must be >= 1".into()));
            }
            diags.extend(schedule_diagnostics(&cfg.law, p.r, p.consts, "params.consts"));
        }
        TaskSpec::Concentration(p) => {
            for (i, &q) in p.q.iter().enumerate() {
                if !(q >= 2.0) {
                    diags.push(Diagnostic::error(
                        &format!("params.q[{i}]"),
                        format!("norm order must be >= 2, got {q}"),
                    ));
                }
            }
            if p.r < 2 || p.r % 2 != 0 {
                diags.push(Diagnostic::error(
                    "params.r",
                    format!("tail order must be even and >= 2, got {}", p.r),
                ));
            }
            if p.n_env_tail < crate::concentration::TAIL_MIN_SAMPLES as u64 {
                diags.push(Diagnostic::error(
                    "params.n_env_tail",
                    format!(
                        "tail table needs >= {} environments, got {}",
                        crate::concentration::TAIL_MIN_SAMPLES,
                        p.n_env_tail
                    ),
                ));
            }
            if p.inner_replicates == 0 {
                diags.push(Diagnostic::error("params.inner_replicates", "must be >= 1".into()));
            }
            match cfg.domain.slab(cfg.law.d) {
                None => diags.push(Diagnostic::error(
                    "domain",
                    "concentration runs need a slab domain".into(),
                )),
                Some(slab) => {
                    let needed = slab.states() * p.inner_replicates as u64;
                    if needed > cfg.caps.solve_budget_per_env {
                        diags.push(Diagnostic::error(
                            "params.inner_replicates",
                            format!(
                                "resampling needs {needed} solves per environment, budget is {}",
                                cfg.caps.solve_budget_per_env
                            ),
                        ));
                    }
                }
            }
        }
        TaskSpec::Sweep(p) => {
            if p.cells.is_empty() {
                diags.push(Diagnostic::error("params.cells", "sweep grid is empty".into()));
            }
            for (i, cell) in p.cells.iter().enumerate() {
                if cell.r < 1 {
                    diags.push(Diagnostic::error(
                        &format!("params.cells[{i}].r"),
                        "must be >= 1".into(),
                    ));
                }
            }
            if p.consts.c1 >= 0.75 {
                diags.push(Diagnostic::warning(
                    "params.consts.c1",
                    format!(
                        "schedule flag \"eps L < 3/4\" violated: eps*L = c1 = {} >= 0.75",
                        p.consts.c1
                    ),
                ));
            }
        }
    }
    diags
}

/// Schedule-flag pre-flight for criterion runs: eps*L < 3/4 (= c1), 2h <= H
/// <= M^3/32, and sigma_2r > eps^2, evaluated from analytic moments when the
/// law has them.
fn schedule_diagnostics(
    law: &EnvironmentLaw,
    r: u32,
    consts: ScheduleConstants,
    path: &str,
) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    if consts.c1 <= 0.0 || consts.c2 <= 0.0 {
        diags.push(Diagnostic::error(path, "schedule constants must be positive".into()));
        return diags;
    }
    if consts.c1 >= 0.75 {
        diags.push(Diagnostic::warning(
            &format!("{path}.c1"),
            format!(
                "schedule flag \"eps L < 3/4\" violated: eps*L = c1 = {} >= 0.75",
                consts.c1
            ),
        ));
    }
    if law.validate().is_err() {
        return diags; // law diagnostics already emitted
    }
    let epsilon = law.epsilon();
    let Some(sigma_2r) = law.sigma_analytic(r) else {
        diags.push(Diagnostic::warning(
            path,
            "law has no analytic sigma_2r; schedule flags are checked at run time only".into(),
        ));
        return diags;
    };
    if epsilon <= 0.0 || epsilon >= 1.0 {
        diags.push(Diagnostic::warning(
            "law",
            format!("eps = {epsilon} outside (0,1): schedule flags not evaluable"),
        ));
        return diags;
    }
    let schedule = make_schedule(r, epsilon, sigma_2r, consts);
    if !schedule.flags.probe_fits_subslab {
        diags.push(Diagnostic::warning(
            path,
            format!(
                "schedule flag \"2h <= H\" violated: h = {:.4e}, H = {:.4e}",
                schedule.small_h, schedule.big_h
            ),
        ));
    }
    if !schedule.flags.subslab_fits_box {
        diags.push(Diagnostic::warning(
            path,
            format!(
                "schedule flag \"H <= M^3/32\" violated: H = {:.4e}, M^3/32 = {:.4e}",
                schedule.big_h,
                schedule.m.powi(3) / 32.0
            ),
        ));
    }
    if !schedule.flags.nottoosmall {
        diags.push(Diagnostic::warning(
            path,
            format!(
                "schedule flag \"sigma_2r > eps^2\" violated: sigma_2r = {:.4e}, eps^2 = {:.4e}",
                sigma_2r,
                epsilon * epsilon
            ),
        ));
    }
    diags
}
