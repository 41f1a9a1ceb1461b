//! Green operator of the killed walk: G[f](x) = E_x[sum of f over the path
//! before exit], evaluated by exact absorbing-chain solves with Monte Carlo
//! cross-checks, plus the derived functionals rho-hat and the
//! symmetric-walk weight sum used for dimension-dependent scaling checks.

use crate::env::Environment;
use crate::lattice::{LatticeDomain, Site, SlabSpec};
use crate::rng::CounterRng;
use crate::solver::{
    default_tol, solve_gs, ChainKernel, SolveError, SolveReport, SsrwSlab,
};
use crate::walk::{MCEstimate, StepTable, TAG_WALK};

pub const MAX_GS_SWEEPS: usize = 200_000;
/// Residual ceiling for any exact Green field.
pub const RESIDUAL_CEILING: f64 = 1e-10;

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GreenSource {
    /// f = 1 everywhere: G[1](x) is the expected exit time.
    Ones,
    /// f = local drift · e1.
    DriftE1,
    /// f = indicator of one site.
    PointMass { site: Vec<i64> },
    /// explicit per-state values in canonical enumeration order
    Custom { values: Vec<f64> },
}

impl GreenSource {
    pub fn build_rhs(&self, env: &Environment, domain: &LatticeDomain, n: usize) -> Vec<f64> {
        match self {
            GreenSource::Ones => vec![1.0; n],
            GreenSource::DriftE1 => (0..n)
                .map(|i| {
                    let v = env.vector_at(&domain.site_at(i));
                    v.p[0] - v.p[1]
                })
                .collect(),
            GreenSource::PointMass { site } => {
                let mut s = Site::origin();
                s.0[..site.len()].copy_from_slice(site);
                let mut f = vec![0.0; n];
                if let Some(i) = domain.index_of(&domain.fold(&s)) {
                    f[i] = 1.0;
                }
                f
            }
            GreenSource::Custom { values } => {
                assert_eq!(values.len(), n, "custom source length must match state count");
                values.clone()
            }
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum GreenMethod {
    Exact { residual: f64, iterations: usize },
    Mc { n_walks_per_start: u64 },
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct GreenField {
    pub domain: LatticeDomain,
    /// state-indexed values (canonical enumeration)
    pub values: Vec<f64>,
    /// per-state standard errors (Monte Carlo only)
    pub std_errors: Option<Vec<f64>>,
    /// states carrying estimates for subset MC runs; None = all states
    pub evaluated: Option<Vec<usize>>,
    pub method: GreenMethod,
}

impl GreenField {
    pub fn at(&self, site: &Site) -> Option<f64> {
        self.domain.index_of(&self.domain.fold(site)).map(|i| self.values[i])
    }
}

/// Solve (I - P) u = rhs with the pinned Green tolerance policy.
pub fn solve_green(
    kernel: &ChainKernel,
    rhs: &[f64],
    warm: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    let tol = default_tol(rhs).min(RESIDUAL_CEILING);
    solve_gs(kernel, rhs, false, tol, MAX_GS_SWEEPS, warm)
}

/// Exact Green field on a domain.
pub fn green_apply_exact(
    env: &Environment,
    domain: &LatticeDomain,
    source: &GreenSource,
    cap: u64,
) -> Result<GreenField, SolveError> {
    let kernel = ChainKernel::build(env, domain, cap)?;
    let rhs = source.build_rhs(env, domain, kernel.n);
    let (values, rep) = solve_green(&kernel, &rhs, None)?;
    Ok(GreenField {
        domain: domain.clone(),
        values,
        std_errors: None,
        evaluated: None,
        method: GreenMethod::Exact { residual: rep.residual, iterations: rep.iterations },
    })
}

/// Monte Carlo Green estimates at chosen start sites (path sums of f).
pub fn green_apply_mc(
    env: &Environment,
    domain: &LatticeDomain,
    source: &GreenSource,
    starts: &[Site],
    n_walks: u64,
    seed: u64,
    step_cap: u64,
) -> Result<GreenField, SolveError> {
    let table = StepTable::build(env, domain)?;
    let n = domain.states().unwrap() as usize;
    let f = source.build_rhs(env, domain, n);
    let mut values = vec![0.0; n];
    let mut ses = vec![0.0; n];
    let mut evaluated = Vec::with_capacity(starts.len());
    for (si, start) in starts.iter().enumerate() {
        let idx = domain
            .index_of(&domain.fold(start))
            .expect("start outside domain");
        let mut sums = Vec::with_capacity(n_walks as usize);
        for w in 0..n_walks {
            let mut rng = CounterRng::derive(seed, &[TAG_WALK, si as u64, w]);
            let (_, acc) = table.run_weighted(start, &f, &mut rng, step_cap);
            sums.push(acc);
        }
        let est = MCEstimate::from_values(&sums, 0.0);
        values[idx] = est.mean;
        ses[idx] = est.std_error;
        evaluated.push(idx);
    }
    Ok(GreenField {
        domain: domain.clone(),
        values,
        std_errors: Some(ses),
        evaluated: Some(evaluated),
        method: GreenMethod::Mc { n_walks_per_start: n_walks },
    })
}

/// Occupation field g(start, ·): expected visits to each state before exit,
/// from the transposed solve with a point source.
pub fn green_occupation(
    env: &Environment,
    domain: &LatticeDomain,
    start: &Site,
    cap: u64,
) -> Result<GreenField, SolveError> {
    let kernel = ChainKernel::build(env, domain, cap)?;
    let mut rhs = vec![0.0; kernel.n];
    let idx = domain.index_of(&domain.fold(start)).expect("start outside domain");
    rhs[idx] = 1.0;
    let tol = default_tol(&rhs).min(RESIDUAL_CEILING);
    let (values, rep) = solve_gs(&kernel, &rhs, true, tol, MAX_GS_SWEEPS, None)?;
    Ok(GreenField {
        domain: domain.clone(),
        values,
        std_errors: None,
        evaluated: None,
        method: GreenMethod::Exact { residual: rep.residual, iterations: rep.iterations },
    })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct HatRho {
    pub value: f64,
    /// hyperplane site achieving the supremum
    pub arg_site: Site,
    pub n_checked: usize,
    pub residual: f64,
    /// some checked site had 1 + G/L <= 0
    pub degenerate_denominator: bool,
}

/// rho-hat: supremum over the x·e1 = 0 hyperplane of
/// (1 - G[drift·e1](x)/L) / (1 + G[drift·e1](x)/L), from one exact solve.
/// The hyperplane is thinned to at most `site_target` sites by a
/// deterministic stride when it is large.
pub fn hat_rho(
    env: &Environment,
    spec: SlabSpec,
    site_target: usize,
    cap: u64,
) -> Result<HatRho, SolveError> {
    let domain = LatticeDomain::Slab(spec);
    let field = green_apply_exact(env, &domain, &GreenSource::DriftE1, cap)?;
    let residual = match field.method {
        GreenMethod::Exact { residual, .. } => residual,
        _ => unreachable!(),
    };
    let t_count = (spec.w as usize).pow(spec.d as u32 - 1);
    let base = spec.l as usize * t_count; // layer x1 = 0
    let stride = t_count.div_ceil(site_target.max(1)).max(1);
    let l = spec.l as f64;
    let mut best = f64::NEG_INFINITY;
    let mut arg = Site::origin();
    let mut n_checked = 0;
    let mut degenerate = false;
    let mut t = 0;
    while t < t_count {
        let g = field.values[base + t];
        let denom = 1.0 + g / l;
        if denom <= 0.0 {
            degenerate = true;
        } else {
            let ratio = (1.0 - g / l) / denom;
            if ratio > best {
                best = ratio;
                arg = domain.site_at(base + t);
            }
        }
        n_checked += 1;
        t += stride;
    }
    Ok(HatRho {
        value: best,
        arg_site: arg,
        n_checked,
        residual,
        degenerate_denominator: degenerate,
    })
}

/// Symmetric-walk occupation field g(0, ·) on the slab via matrix-free
/// conjugate gradient (the kernel is symmetric, so no transpose is needed).
pub fn ssrw_green_slab(spec: SlabSpec, cap: u64) -> Result<(Vec<f64>, SolveReport), SolveError> {
    let n = spec.states();
    if n > cap {
        return Err(SolveError::TooManyStates { n, cap });
    }
    let slab = SsrwSlab::new(spec);
    let max_iters = 50_000usize.max(8 * (2 * spec.l as usize + spec.w as usize));
    slab.cg_point_source(slab.index_of_origin(), 2e-12, max_iters)
}

#[derive(Clone, Debug, serde::Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum GammaCertification {
    /// recomputed at doubled transverse width
    Doubled { w2: i64, sum2: f64, rel_shift: f64, truncation_warning: bool },
    /// doubling would exceed the state cap; left uncertified
    SkippedCap { required_states: u64 },
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct GammaReport {
    pub d: usize,
    pub l: i64,
    pub w: i64,
    pub alpha: f64,
    pub beta: f64,
    pub sum: f64,
    pub g_origin: f64,
    pub certification: GammaCertification,
}

/// Sum of g(0,x)^beta over the whole truncated slab for the symmetric walk,
/// beta = 2/(2 - alpha). Certified against transverse truncation by a
/// doubled-width recomputation when that fits under the cap; a relative
/// shift above 1% raises the truncation warning.
pub fn gamma_weight_sum(
    d: usize,
    l: i64,
    w: i64,
    alpha: f64,
    cap: u64,
) -> Result<GammaReport, SolveError> {
    assert!((0.0..1.0).contains(&alpha), "alpha must lie in (0,1)");
    let beta = 2.0 / (2.0 - alpha);
    let spec = SlabSpec::new(d, l, w).expect("slab spec");
    let (g, _) = ssrw_green_slab(spec, cap)?;
    let sum = weight_sum(&g, beta);
    let g_origin = g[SsrwSlab::new(spec).index_of_origin()];
    let spec2 = SlabSpec::new(d, l, 2 * w).expect("slab spec");
    let certification = if spec2.states() <= cap {
        let (g2, _) = ssrw_green_slab(spec2, cap)?;
        let sum2 = weight_sum(&g2, beta);
        let rel_shift = (sum2 - sum).abs() / sum.max(f64::MIN_POSITIVE);
        GammaCertification::Doubled { w2: 2 * w, sum2, rel_shift, truncation_warning: rel_shift > 0.01 }
    } else {
        GammaCertification::SkippedCap { required_states: spec2.states() }
    };
    Ok(GammaReport { d, l, w, alpha, beta, sum, g_origin, certification })
}

fn weight_sum(g: &[f64], beta: f64) -> f64 {
    // clamp the odd -1e-16 entry from finite solver residuals
    g.iter().map(|&v| v.max(0.0).powf(beta)).sum()
}
