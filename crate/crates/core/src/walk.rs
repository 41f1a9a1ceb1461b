//! Quenched walk simulation: exit times, exit faces, displacement functionals,
//! and the slab-minimum drift probability.
//!
//! Estimators come in two flavours. Aggregate Monte Carlo over a finite domain
//! uses a pre-assembled table of per-site transition CDFs (fast path); one-off
//! trajectories step lazily through the environment. Annealed quantities
//! average quenched frequencies over fresh environments, with standard errors
//! clustered at the environment level.

use crate::env::{Environment, EnvironmentLaw};
use crate::lattice::{Direction, ExitFace, LatticeDomain, Site};
use crate::rng::{derive_key, CounterRng};
use crate::solver::{solve_gs, ChainKernel, SolveError};
use rayon::prelude::*;

/// Tag for per-walk generator streams.
pub const TAG_WALK: u64 = 0x77a1_c003;
/// Tag for per-environment master seeds inside annealed loops.
pub const TAG_ENV: u64 = 0xe4a9_0004;

#[derive(Clone, Debug, serde::Serialize)]
pub struct ExitRecord {
    pub exit_site: Option<Site>,
    pub exit_time: u64,
    pub face: Option<ExitFace>,
    pub censored: bool,
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
    pub censored_fraction: f64,
}

impl MCEstimate {
    pub fn from_values(values: &[f64], censored_fraction: f64) -> MCEstimate {
        let n = values.len() as u64;
        let mean = values.iter().sum::<f64>() / n.max(1) as f64;
        let var = if n >= 2 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        MCEstimate { mean, std_error: (var / n.max(1) as f64).sqrt(), n, censored_fraction }
    }

    /// Mean and binomial standard error of a count out of n trials.
    pub fn binomial(count: u64, n: u64, censored_fraction: f64) -> MCEstimate {
        let p = count as f64 / n.max(1) as f64;
        MCEstimate {
            mean: p,
            std_error: (p * (1.0 - p) / n.max(1) as f64).sqrt(),
            n,
            censored_fraction,
        }
    }
}

/// Default step cap: 100 x the symmetric-walk expected exit time through the
/// narrowest axis of the domain, floored at 10^4.
pub fn default_step_cap(domain: &LatticeDomain) -> u64 {
    (100.0 * domain.ssrw_e1_exit_time(0).max(1.0)) as u64 + 10_000
}

/// Per-site cumulative transition probabilities over a finite domain.
pub struct StepTable {
    domain: LatticeDomain,
    d: usize,
    cdf: Vec<f64>,
}

impl StepTable {
    pub fn build(env: &Environment, domain: &LatticeDomain) -> Result<StepTable, SolveError> {
        let n = domain.states().ok_or(SolveError::TooManyStates { n: u64::MAX, cap: u64::MAX })?
            as usize;
        let d = domain.d();
        let mut cdf = vec![0.0; n * 2 * d];
        for i in 0..n {
            let v = env.vector_at(&domain.site_at(i));
            let mut acc = 0.0;
            for e in 0..2 * d {
                acc += v.p[e];
                cdf[i * 2 * d + e] = acc;
            }
            cdf[i * 2 * d + 2 * d - 1] = 1.0;
        }
        Ok(StepTable { domain: domain.clone(), d, cdf })
    }

    #[inline]
    fn draw_direction(&self, state: usize, u: f64) -> Direction {
        let row = state * 2 * self.d;
        let mut e = 0;
        while e + 1 < 2 * self.d && u >= self.cdf[row + e] {
            e += 1;
        }
        Direction::from_index(e)
    }

    /// One walk from `start` (must be in the domain) to exit or the cap.
    pub fn run(&self, start: &Site, rng: &mut CounterRng, step_cap: u64) -> ExitRecord {
        let mut x = self.domain.fold(start);
        let mut idx = self.domain.index_of(&x).expect("start outside domain");
        for t in 0..step_cap {
            let dir = self.draw_direction(idx, rng.next_f64());
            let y = self.domain.fold(&x.step(dir));
            match self.domain.index_of(&y) {
                Some(j) => {
                    x = y;
                    idx = j;
                }
                None => {
                    return ExitRecord {
                        face: Some(self.domain.classify_exit(&y)),
                        exit_site: Some(y),
                        exit_time: t + 1,
                        censored: false,
                    }
                }
            }
        }
        ExitRecord { exit_site: None, exit_time: step_cap, face: None, censored: true }
    }

    /// Like `run`, but also accumulates `sum_{n < T} f(X_n)` for the path.
    pub fn run_weighted(
        &self,
        start: &Site,
        f: &[f64],
        rng: &mut CounterRng,
        step_cap: u64,
    ) -> (ExitRecord, f64) {
        let mut x = self.domain.fold(start);
        let mut idx = self.domain.index_of(&x).expect("start outside domain");
        let mut acc = 0.0;
        for t in 0..step_cap {
            acc += f[idx];
            let dir = self.draw_direction(idx, rng.next_f64());
            let y = self.domain.fold(&x.step(dir));
            match self.domain.index_of(&y) {
                Some(j) => {
                    x = y;
                    idx = j;
                }
                None => {
                    let rec = ExitRecord {
                        face: Some(self.domain.classify_exit(&y)),
                        exit_site: Some(y),
                        exit_time: t + 1,
                        censored: false,
                    };
                    return (rec, acc);
                }
            }
        }
        (ExitRecord { exit_site: None, exit_time: step_cap, face: None, censored: true }, acc)
    }
}

/// Lazy single-trajectory walk; works on any domain without assembling tables.
pub fn run_until_exit(
    env: &Environment,
    domain: &LatticeDomain,
    start: &Site,
    rng: &mut CounterRng,
    step_cap: u64,
) -> ExitRecord {
    let mut x = domain.fold(start);
    assert!(domain.contains(&x), "start outside domain");
    let d = domain.d();
    for t in 0..step_cap {
        let v = env.vector_at(&x);
        let u = rng.next_f64();
        let mut acc = 0.0;
        let mut pick = 2 * d - 1;
        for e in 0..2 * d {
            acc += v.p[e];
            if u < acc {
                pick = e;
                break;
            }
        }
        let y = domain.fold(&x.step(Direction::from_index(pick)));
        if !domain.contains(&y) {
            return ExitRecord {
                face: Some(domain.classify_exit(&y)),
                exit_site: Some(y),
                exit_time: t + 1,
                censored: false,
            };
        }
        x = y;
    }
    ExitRecord { exit_site: None, exit_time: step_cap, face: None, censored: true }
}

/// Per-face exit tallies of repeated quenched walks from one start.
#[derive(Clone, Copy, Debug, Default, serde::Serialize)]
pub struct FaceTally {
    pub front: u64,
    pub back: u64,
    pub side: u64,
    pub censored: u64,
    pub n: u64,
    pub mean_exit_time: f64,
}

impl FaceTally {
    fn record(&mut self, rec: &ExitRecord) {
        self.n += 1;
        self.mean_exit_time += rec.exit_time as f64;
        match rec.face {
            Some(ExitFace::Front) => self.front += 1,
            Some(ExitFace::Back) => self.back += 1,
            Some(ExitFace::Side) => self.side += 1,
            None => self.censored += 1,
        }
    }

    fn finish(mut self) -> Self {
        if self.n > 0 {
            self.mean_exit_time /= self.n as f64;
        }
        self
    }
}

/// n_walks quenched walks from `start`; the walk stream is keyed on
/// (walk_seed, walk index) so tallies are independent of execution order.
pub fn quenched_face_tally(
    env: &Environment,
    domain: &LatticeDomain,
    start: &Site,
    n_walks: u64,
    walk_seed: u64,
    step_cap: u64,
) -> Result<FaceTally, SolveError> {
    let table = StepTable::build(env, domain)?;
    let mut tally = FaceTally::default();
    for w in 0..n_walks {
        let mut rng = CounterRng::derive(walk_seed, &[TAG_WALK, w]);
        tally.record(&table.run(start, &mut rng, step_cap));
    }
    Ok(tally.finish())
}

/// Quenched back-or-side exit frequency q_B for a box of half-width m.
pub fn quenched_q_b(
    env: &Environment,
    m: i64,
    n_walks: u64,
    walk_seed: u64,
    step_cap: u64,
) -> Result<MCEstimate, SolveError> {
    let domain = LatticeDomain::boxed(env.law.d, m).expect("box domain");
    let tally = quenched_face_tally(env, &domain, &Site::origin(), n_walks, walk_seed, step_cap)?;
    Ok(MCEstimate::binomial(
        tally.back + tally.side + tally.censored,
        tally.n,
        tally.censored as f64 / tally.n.max(1) as f64,
    ))
}

/// rho_B = q / (1 - q); infinite when back-exit is certain.
pub fn rho_of_q(q: f64) -> f64 {
    assert!((0.0..=1.0).contains(&q), "q must be a probability");
    if q >= 1.0 {
        f64::INFINITY
    } else {
        q / (1.0 - q)
    }
}

/// Annealed per-face exit estimates over fresh environments; standard errors
/// are clustered over environments when n_env >= 2.
#[derive(Clone, Debug, serde::Serialize)]
pub struct AnnealedFaces {
    pub front: MCEstimate,
    pub back: MCEstimate,
    pub side: MCEstimate,
    pub not_front: MCEstimate,
    pub mean_exit_time: MCEstimate,
}

/// One face tally per fresh environment, in environment-index order.
pub fn face_tallies(
    law: &EnvironmentLaw,
    domain: &LatticeDomain,
    n_env: u64,
    n_walks: u64,
    master_seed: u64,
    step_cap: u64,
) -> Result<Vec<FaceTally>, SolveError> {
    let tallies: Vec<Result<FaceTally, SolveError>> = (0..n_env)
        .into_par_iter()
        .map(|i| {
            let env_seed = derive_key(master_seed, &[TAG_ENV, i]);
            let env = crate::env::sample_environment(law.clone(), domain.clone(), env_seed);
            quenched_face_tally(&env, domain, &Site::origin(), n_walks, env_seed, step_cap)
        })
        .collect();
    let mut per_env: Vec<FaceTally> = Vec::with_capacity(n_env as usize);
    for t in tallies {
        per_env.push(t?);
    }
    Ok(per_env)
}

pub fn annealed_exit_faces(
    law: &EnvironmentLaw,
    domain: &LatticeDomain,
    n_env: u64,
    n_walks: u64,
    master_seed: u64,
    step_cap: u64,
) -> Result<AnnealedFaces, SolveError> {
    let per_env = face_tallies(law, domain, n_env, n_walks, master_seed, step_cap)?;
    Ok(aggregate_faces(&per_env, n_walks))
}

/// Collapse per-environment tallies into annealed estimates (clustered SEs
/// when more than one environment is present).
pub fn aggregate_faces(per_env: &[FaceTally], n_walks: u64) -> AnnealedFaces {
    let n_env = per_env.len() as u64;
    let frac = |f: &dyn Fn(&FaceTally) -> u64| -> Vec<f64> {
        per_env.iter().map(|t| f(t) as f64 / t.n.max(1) as f64).collect()
    };
    let fronts = frac(&|t| t.front);
    let backs = frac(&|t| t.back);
    let sides = frac(&|t| t.side);
    let notf = frac(&|t| t.back + t.side + t.censored);
    let times: Vec<f64> = per_env.iter().map(|t| t.mean_exit_time).collect();
    let cens = per_env.iter().map(|t| t.censored).sum::<u64>() as f64
        / per_env.iter().map(|t| t.n).sum::<u64>().max(1) as f64;
    let est = |vals: &[f64]| {
        if n_env >= 2 {
            MCEstimate::from_values(vals, cens)
        } else {
            let count = (vals[0] * n_walks as f64).round() as u64;
            MCEstimate::binomial(count, n_walks, cens)
        }
    };
    AnnealedFaces {
        front: est(&fronts),
        back: est(&backs),
        side: est(&sides),
        not_front: est(&notf),
        mean_exit_time: MCEstimate::from_values(&times, cens),
    }
}

/// Annealed estimate of the non-front exit probability from the box of
/// half-width m.
pub fn estimate_backexit_prob(
    law: &EnvironmentLaw,
    m: i64,
    n_env: u64,
    n_walks: u64,
    master_seed: u64,
    step_cap: u64,
) -> Result<MCEstimate, SolveError> {
    let domain = LatticeDomain::boxed(law.d, m).expect("box domain");
    Ok(annealed_exit_faces(law, &domain, n_env, n_walks, master_seed, step_cap)?.not_front)
}

#[derive(Clone, Copy, Debug)]
pub enum DeltaMode {
    Exact,
    Mc { n_walks: u64, seed: u64 },
}

/// Expected displacement at exit of the stopped box around `x`:
/// stop when |(X - x)·e1| >= l or any transverse |(X - x)·ej| >= h.
/// Exact mode solves one linear system per coordinate; MC averages exit
/// positions. Returns (delta vector, censored fraction for MC).
pub fn displacement_delta(
    env: &Environment,
    x: &Site,
    l: i64,
    h: i64,
    mode: DeltaMode,
    cap: u64,
) -> Result<([f64; crate::lattice::MAX_D], f64), SolveError> {
    let d = env.law.d;
    let mut lo = [0i64; crate::lattice::MAX_D];
    let mut hi = [0i64; crate::lattice::MAX_D];
    for j in 0..d {
        let r = if j == 0 { l - 1 } else { h - 1 };
        lo[j] = x.0[j] - r;
        hi[j] = x.0[j] + r;
    }
    let domain = LatticeDomain::rect(lo[..d].to_vec(), hi[..d].to_vec()).expect("rect domain");
    let mut delta = [0.0; crate::lattice::MAX_D];
    match mode {
        DeltaMode::Exact => {
            let kernel = ChainKernel::build(env, &domain, cap)?;
            let xi = domain.index_of(x).expect("centre in rect");
            for k in 0..d {
                // rhs: mass leaving each state, weighted by the exit site's
                // k-th coordinate
                let mut b = vec![0.0; kernel.n];
                for i in 0..kernel.n {
                    let site = domain.site_at(i);
                    let v = env.vector_at(&site);
                    for dir in Direction::all(d) {
                        let y = site.step(dir);
                        if domain.index_of(&y).is_none() {
                            b[i] += v.p[dir.index()] * y.0[k] as f64;
                        }
                    }
                }
                let (u, _) = solve_gs(&kernel, &b, false, crate::solver::default_tol(&b), 200_000, None)?;
                delta[k] = u[xi] - x.0[k] as f64;
            }
            Ok((delta, 0.0))
        }
        DeltaMode::Mc { n_walks, seed } => {
            let table = StepTable::build(env, &domain)?;
            let step_cap = default_step_cap(&domain);
            let mut censored = 0u64;
            let mut sums = [0.0; crate::lattice::MAX_D];
            for w in 0..n_walks {
                let mut rng = CounterRng::derive(seed, &[TAG_WALK, w]);
                let rec = table.run(x, &mut rng, step_cap);
                match rec.exit_site {
                    Some(site) if !rec.censored => {
                        for k in 0..d {
                            sums[k] += (site.0[k] - x.0[k]) as f64;
                        }
                    }
                    _ => censored += 1,
                }
            }
            let kept = (n_walks - censored).max(1) as f64;
            for k in 0..d {
                delta[k] = sums[k] / kept;
            }
            Ok((delta, censored as f64 / n_walks.max(1) as f64))
        }
    }
}

/// Geometry for the slab-minimum drift probability: box half-width m,
/// displacement scales (l, h), threshold gamma1 * l.
#[derive(Clone, Copy, Debug)]
pub struct PGeometry {
    pub m: i64,
    pub l: i64,
    pub h: i64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct PReport {
    /// environment-probability that min over the sampled sub-slab of
    /// Delta·e1 reaches gamma1*l, one entry per transverse axis j >= 2
    pub p_by_axis: Vec<MCEstimate>,
    /// infimum over axes
    pub p: MCEstimate,
    /// fraction of each sub-slab actually visited by the subgrid
    pub coverage: f64,
    pub threshold: f64,
    pub sites_per_axis: usize,
}

/// Deterministic subgrid of a site list: stride chosen so at most `target`
/// sites remain; full enumeration when already small.
fn subgrid(sites: Vec<Site>, target: usize) -> (Vec<Site>, f64) {
    if sites.len() <= target {
        let cov = 1.0;
        return (sites, cov);
    }
    let stride = sites.len().div_ceil(target);
    let picked: Vec<Site> = sites.iter().step_by(stride).cloned().collect();
    let cov = picked.len() as f64 / sites.len() as f64;
    (picked, cov)
}

/// Estimate p = inf_j P(min_{z in sub-slab_j} Delta(z)·e1 >= gamma1 * l),
/// with the sub-slab_j = {z in box : |z·e_j| < h_slab} and the minimum taken
/// over a deterministic subgrid.
#[allow(clippy::too_many_arguments)]
pub fn estimate_p(
    law: &EnvironmentLaw,
    geom: PGeometry,
    h_slab: i64,
    gamma1: f64,
    n_env: u64,
    site_target: usize,
    master_seed: u64,
    cap: u64,
) -> Result<PReport, SolveError> {
    let d = law.d;
    let box_dom = LatticeDomain::boxed(d, geom.m).expect("box");
    let n_states = box_dom.states().unwrap_or(u64::MAX);
    let threshold = gamma1 * geom.l as f64;
    // enumerate each sub-slab, then thin to the subgrid
    let mut per_axis_sites: Vec<Vec<Site>> = Vec::new();
    let mut coverage = 1.0f64;
    for j in 1..d {
        let mut sites = Vec::new();
        for i in 0..n_states as usize {
            let s = box_dom.site_at(i);
            if s.0[j].abs() < h_slab {
                sites.push(s);
            }
        }
        let (picked, cov) = subgrid(sites, site_target);
        coverage = coverage.min(cov);
        per_axis_sites.push(picked);
    }
    let sites_per_axis = per_axis_sites.iter().map(|v| v.len()).min().unwrap_or(0);

    let hits: Vec<Result<Vec<bool>, SolveError>> = (0..n_env)
        .into_par_iter()
        .map(|i| {
            let env_seed = derive_key(master_seed, &[TAG_ENV, i]);
            let env = crate::env::sample_environment(law.clone(), box_dom.clone(), env_seed);
            let mut ok = Vec::with_capacity(per_axis_sites.len());
            for sites in &per_axis_sites {
                let mut min_d1 = f64::INFINITY;
                for z in sites {
                    let (delta, _) =
                        displacement_delta(&env, z, geom.l, geom.h, DeltaMode::Exact, cap)?;
                    min_d1 = min_d1.min(delta[0]);
                }
                ok.push(min_d1 >= threshold);
            }
            Ok(ok)
        })
        .collect();

    let mut indicator_by_axis: Vec<Vec<f64>> = vec![Vec::new(); d - 1];
    for h in hits {
        let ok = h?;
        for (j, &b) in ok.iter().enumerate() {
            indicator_by_axis[j].push(if b { 1.0 } else { 0.0 });
        }
    }
    let p_by_axis: Vec<MCEstimate> =
        indicator_by_axis.iter().map(|v| MCEstimate::from_values(v, 0.0)).collect();
    let p = p_by_axis
        .iter()
        .cloned()
        .min_by(|a, b| a.mean.total_cmp(&b.mean))
        .unwrap_or(MCEstimate { mean: 0.0, std_error: 0.0, n: 0, censored_fraction: 0.0 });
    Ok(PReport { p_by_axis, p, coverage, threshold, sites_per_axis })
}
