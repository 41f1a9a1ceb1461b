//! Environment laws and sampled environments.
//!
//! A law mu describes the i.i.d. per-site distribution of the transition
//! vector omega(x, .) over the 2d nearest-neighbour directions. The
//! perturbation strength is eps(mu) = 4d * sup|omega(0,e) - 1/(2d)|, the
//! axial drift is lambda = E[omega(0,e1) - omega(0,-e1)], and the centred
//! moment scale is sigma_2r = (sum_e E[(omega(0,e) - E omega(0,e))^(2r)])^(1/(2r)).
//!
//! Environments are lazy: the vector at site x is a pure function of
//! (master_seed, x), so any site on Z^d has a well-defined vector whether or
//! not it lies in the domain of interest, resampling one site is O(1), and
//! parallel schedules cannot change what is drawn where.

use crate::lattice::{Direction, LatticeDomain, Site, MAX_D};
use crate::rng::CounterRng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const TAG_SITE: u64 = 0x5174_e001;
const TAG_RESAMPLE: u64 = 0x5e5a_4002;

#[derive(Clone, PartialEq, Debug, thiserror::Error)]
pub enum LawError {
    #[error("dimension {0} rejected (need even d with 2 <= d <= 8)")]
    BadDimension(usize),
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("invalid table: {0}")]
    InvalidTable(String),
}

/// Probabilities over the 2d directions in canonical order.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct TransitionVector {
    pub d: usize,
    pub p: [f64; 2 * MAX_D],
}

impl TransitionVector {
    pub fn uniform(d: usize) -> Self {
        let mut p = [0.0; 2 * MAX_D];
        p[..2 * d].fill(1.0 / (2 * d) as f64);
        TransitionVector { d, p }
    }

    #[inline]
    pub fn get(&self, dir: Direction) -> f64 {
        self.p[dir.index()]
    }

    pub fn sum(&self) -> f64 {
        self.p[..2 * self.d].iter().sum()
    }

    /// e1-component of the local drift: omega(e1) - omega(-e1).
    #[inline]
    pub fn drift_e1(&self) -> f64 {
        self.p[0] - self.p[1]
    }

    /// Full local drift vector sum_e omega(e) e.
    pub fn drift(&self) -> [f64; MAX_D] {
        let mut v = [0.0; MAX_D];
        for j in 0..self.d {
            v[j] = self.p[2 * j] - self.p[2 * j + 1];
        }
        v
    }

    /// Checks normalization and the band |p_e - 1/(2d)| <= eps/(4d).
    pub fn check(&self, eps: f64) -> Result<(), String> {
        if (self.sum() - 1.0).abs() > 1e-12 {
            return Err(format!("entries sum to {} (need 1 within 1e-12)", self.sum()));
        }
        let centre = 1.0 / (2.0 * self.d as f64);
        let band = eps / (4.0 * self.d as f64) + 1e-15;
        for e in 0..2 * self.d {
            let dev = (self.p[e] - centre).abs();
            if dev > band {
                return Err(format!("entry {e} deviates {dev:.3e} > eps/(4d) = {band:.3e}"));
            }
        }
        Ok(())
    }
}

/// One row of a finite mixture law.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub probs: Vec<f64>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LawKind {
    /// Constant vector: 1/(2d) +/- lambda/2 on the e1 axis.
    DeterministicDrift { lambda: f64 },
    /// omega(+-e1) = 1/(2d) +/- (lambda/2 + a S), S = +/-1 fair; rest uniform.
    TwoPoint { a: f64, lambda: f64 },
    /// Exchangeable centred perturbation of amplitude a on all 2d directions
    /// plus an axial drift: omega(e) = 1/(2d) + a (xi_e - mean xi) + (lambda/2) e.e1.
    IsotropicPlusDrift { a: f64, lambda: f64 },
    /// Finite mixture of explicit transition vectors.
    CustomTable { atoms: Vec<Atom> },
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct EnvironmentLaw {
    pub d: usize,
    #[serde(flatten)]
    pub kind: LawKind,
}

fn check_dim(d: usize) -> Result<(), LawError> {
    if d < 2 || d > MAX_D || d % 2 != 0 {
        return Err(LawError::BadDimension(d));
    }
    Ok(())
}

impl EnvironmentLaw {
    pub fn deterministic_drift(d: usize, lambda: f64) -> Result<Self, LawError> {
        check_dim(d)?;
        let law = EnvironmentLaw { d, kind: LawKind::DeterministicDrift { lambda } };
        law.check_epsilon()?;
        Ok(law)
    }

    pub fn two_point(d: usize, a: f64, lambda: f64) -> Result<Self, LawError> {
        check_dim(d)?;
        if a < 0.0 || !a.is_finite() {
            return Err(LawError::ParameterOutOfRange(format!("a = {a}")));
        }
        let law = EnvironmentLaw { d, kind: LawKind::TwoPoint { a, lambda } };
        law.check_epsilon()?;
        Ok(law)
    }

    pub fn isotropic_plus_drift(d: usize, a: f64, lambda: f64) -> Result<Self, LawError> {
        check_dim(d)?;
        if a < 0.0 || !a.is_finite() {
            return Err(LawError::ParameterOutOfRange(format!("a = {a}")));
        }
        let law = EnvironmentLaw { d, kind: LawKind::IsotropicPlusDrift { a, lambda } };
        law.check_epsilon()?;
        Ok(law)
    }

    pub fn custom_table(d: usize, atoms: Vec<Atom>) -> Result<Self, LawError> {
        check_dim(d)?;
        if atoms.is_empty() {
            return Err(LawError::InvalidTable("empty table".into()));
        }
        let wsum: f64 = atoms.iter().map(|a| a.weight).sum();
        if (wsum - 1.0).abs() > 1e-12 || atoms.iter().any(|a| a.weight < 0.0) {
            return Err(LawError::InvalidTable(format!("weights sum to {wsum}")));
        }
        for a in &atoms {
            if a.probs.len() != 2 * d {
                return Err(LawError::InvalidTable(format!(
                    "atom has {} entries, need {}",
                    a.probs.len(),
                    2 * d
                )));
            }
            let psum: f64 = a.probs.iter().sum();
            if (psum - 1.0).abs() > 1e-12 || a.probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(LawError::InvalidTable(format!("atom entries sum to {psum}")));
            }
        }
        let law = EnvironmentLaw { d, kind: LawKind::CustomTable { atoms } };
        law.check_epsilon()?;
        Ok(law)
    }

    fn check_epsilon(&self) -> Result<(), LawError> {
        let eps = self.epsilon();
        if !eps.is_finite() || eps >= 1.0 {
            return Err(LawError::ParameterOutOfRange(format!(
                "eps(mu) = {eps} (need eps < 1; entries must stay within (1/(4d), 3/(4d)))"
            )));
        }
        Ok(())
    }

    /// Re-run the constructor checks (needed for laws built by
    /// deserialization, which bypasses the checked constructors).
    pub fn validate(&self) -> Result<(), LawError> {
        match &self.kind {
            LawKind::DeterministicDrift { lambda } => {
                Self::deterministic_drift(self.d, *lambda).map(|_| ())
            }
            LawKind::TwoPoint { a, lambda } => Self::two_point(self.d, *a, *lambda).map(|_| ()),
            LawKind::IsotropicPlusDrift { a, lambda } => {
                Self::isotropic_plus_drift(self.d, *a, *lambda).map(|_| ())
            }
            LawKind::CustomTable { atoms } => {
                Self::custom_table(self.d, atoms.clone()).map(|_| ())
            }
        }
    }

    /// eps(mu) = 4d * esssup_e |omega(0,e) - 1/(2d)|, analytic for all kinds.
    pub fn epsilon(&self) -> f64 {
        let d = self.d as f64;
        match &self.kind {
            LawKind::DeterministicDrift { lambda } => 2.0 * d * lambda.abs(),
            LawKind::TwoPoint { a, lambda } => 4.0 * d * (a + lambda.abs() / 2.0),
            LawKind::IsotropicPlusDrift { a, lambda } => {
                // sup|xi_e - mean xi| = (2d-1)/d for xi uniform on [-1, 1]
                4.0 * d * (a * (2.0 * d - 1.0) / d + lambda.abs() / 2.0)
            }
            LawKind::CustomTable { atoms } => {
                let centre = 1.0 / (2.0 * d);
                let dev = atoms
                    .iter()
                    .flat_map(|a| a.probs.iter())
                    .map(|p| (p - centre).abs())
                    .fold(0.0, f64::max);
                4.0 * d * dev
            }
        }
    }

    /// E[omega(0, e)] for every direction, analytic for all kinds.
    pub fn mean_vector(&self) -> TransitionVector {
        match &self.kind {
            LawKind::DeterministicDrift { lambda }
            | LawKind::TwoPoint { lambda, .. }
            | LawKind::IsotropicPlusDrift { lambda, .. } => {
                let mut v = TransitionVector::uniform(self.d);
                v.p[0] += lambda / 2.0;
                v.p[1] -= lambda / 2.0;
                v
            }
            LawKind::CustomTable { atoms } => {
                let mut v = TransitionVector { d: self.d, p: [0.0; 2 * MAX_D] };
                for a in atoms {
                    for e in 0..2 * self.d {
                        v.p[e] += a.weight * a.probs[e];
                    }
                }
                v
            }
        }
    }

    /// lambda = E[d(0) . e1], analytic for all kinds.
    pub fn lambda_analytic(&self) -> f64 {
        match &self.kind {
            LawKind::DeterministicDrift { lambda }
            | LawKind::TwoPoint { lambda, .. }
            | LawKind::IsotropicPlusDrift { lambda, .. } => *lambda,
            LawKind::CustomTable { .. } => {
                let m = self.mean_vector();
                m.p[0] - m.p[1]
            }
        }
    }

    /// Certified bound on sup|omega(0,e) - E omega(0,e)| (used to scale
    /// high-order moment accumulation so powers never underflow).
    pub fn deviation_sup(&self) -> f64 {
        let d = self.d as f64;
        match &self.kind {
            LawKind::DeterministicDrift { .. } => 0.0,
            LawKind::TwoPoint { a, .. } => *a,
            LawKind::IsotropicPlusDrift { a, .. } => a * (2.0 * d - 1.0) / d,
            LawKind::CustomTable { atoms } => {
                let m = self.mean_vector();
                atoms
                    .iter()
                    .flat_map(|a| a.probs.iter().enumerate())
                    .map(|(e, p)| (p - m.p[e]).abs())
                    .fold(0.0, f64::max)
            }
        }
    }

    /// sigma_2r when a closed form exists (None for the isotropic kind).
    pub fn sigma_analytic(&self, r: u32) -> Option<f64> {
        assert!(r >= 1);
        match &self.kind {
            LawKind::DeterministicDrift { .. } => Some(0.0),
            LawKind::TwoPoint { a, .. } => {
                // deltas are +-a on e1 and -+a on -e1: sum_e E = 2 a^(2r)
                Some(a * 2f64.powf(1.0 / (2.0 * r as f64)))
            }
            LawKind::IsotropicPlusDrift { .. } => None,
            LawKind::CustomTable { atoms } => {
                let m = self.mean_vector();
                let sum: f64 = atoms
                    .iter()
                    .map(|a| {
                        a.weight
                            * a.probs
                                .iter()
                                .enumerate()
                                .map(|(e, p)| (p - m.p[e]).powi(2 * r as i32))
                                .sum::<f64>()
                    })
                    .sum();
                Some(sum.powf(1.0 / (2.0 * r as f64)))
            }
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.kind, LawKind::DeterministicDrift { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            LawKind::DeterministicDrift { .. } => "deterministic-drift",
            LawKind::TwoPoint { .. } => "two-point",
            LawKind::IsotropicPlusDrift { .. } => "isotropic-plus-drift",
            LawKind::CustomTable { .. } => "custom-table",
        }
    }

    pub fn sample_with(&self, rng: &mut CounterRng) -> TransitionVector {
        let d = self.d;
        match &self.kind {
            LawKind::DeterministicDrift { lambda } => {
                let mut v = TransitionVector::uniform(d);
                v.p[0] += lambda / 2.0;
                v.p[1] -= lambda / 2.0;
                v
            }
            LawKind::TwoPoint { a, lambda } => {
                let s = if rng.next_f64() < 0.5 { 1.0 } else { -1.0 };
                let mut v = TransitionVector::uniform(d);
                v.p[0] += lambda / 2.0 + a * s;
                v.p[1] -= lambda / 2.0 + a * s;
                v
            }
            LawKind::IsotropicPlusDrift { a, lambda } => {
                let mut xi = [0.0; 2 * MAX_D];
                let mut mean = 0.0;
                for x in xi.iter_mut().take(2 * d) {
                    *x = rng.next_symmetric();
                    mean += *x;
                }
                mean /= (2 * d) as f64;
                let mut v = TransitionVector::uniform(d);
                for e in 0..2 * d {
                    v.p[e] += a * (xi[e] - mean);
                }
                v.p[0] += lambda / 2.0;
                v.p[1] -= lambda / 2.0;
                v
            }
            LawKind::CustomTable { atoms } => {
                let u = rng.next_f64();
                let mut acc = 0.0;
                let mut chosen = atoms.len() - 1;
                for (i, a) in atoms.iter().enumerate() {
                    acc += a.weight;
                    if u < acc {
                        chosen = i;
                        break;
                    }
                }
                let mut v = TransitionVector { d, p: [0.0; 2 * MAX_D] };
                v.p[..2 * d].copy_from_slice(&atoms[chosen].probs);
                v
            }
        }
    }
}

/// JSON surface for laws: {"kind", "d", "params", "seed"}.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LawConfig {
    pub kind: String,
    pub d: usize,
    #[serde(default)]
    pub params: LawParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LawParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<Atom>>,
}

/// Build a validated law from its JSON description.
pub fn make_law(cfg: &LawConfig) -> Result<EnvironmentLaw, LawError> {
    let lambda = cfg.params.lambda.unwrap_or(0.0);
    let a = cfg.params.a.unwrap_or(0.0);
    match cfg.kind.as_str() {
        "deterministic-drift" => EnvironmentLaw::deterministic_drift(cfg.d, lambda),
        "two-point" => EnvironmentLaw::two_point(cfg.d, a, lambda),
        "isotropic-plus-drift" => EnvironmentLaw::isotropic_plus_drift(cfg.d, a, lambda),
        "custom-table" => {
            let atoms = cfg
                .params
                .atoms
                .clone()
                .ok_or_else(|| LawError::InvalidTable("custom-table needs atoms".into()))?;
            EnvironmentLaw::custom_table(cfg.d, atoms)
        }
        "ssrw" => EnvironmentLaw::deterministic_drift(cfg.d, 0.0),
        other => Err(LawError::ParameterOutOfRange(format!("unknown kind {other:?}"))),
    }
}

#[derive(Clone, PartialEq, Debug, thiserror::Error)]
pub enum EnvError {
    #[error("site {0:?} outside the environment domain")]
    OutsideDomain(Site),
}

/// A lazily sampled environment: law + domain descriptor + master seed,
/// plus explicit overrides recorded by resampling.
#[derive(Clone, Debug)]
pub struct Environment {
    pub law: EnvironmentLaw,
    pub domain: LatticeDomain,
    pub master_seed: u64,
    overrides: BTreeMap<Site, TransitionVector>,
}

/// Construct the lazy environment (no storage is allocated up front).
pub fn sample_environment(
    law: EnvironmentLaw,
    domain: LatticeDomain,
    master_seed: u64,
) -> Environment {
    Environment { law, domain, master_seed, overrides: BTreeMap::new() }
}

impl Environment {
    fn site_tags(site: &Site, d: usize, tag: u64) -> [u64; MAX_D + 1] {
        let mut tags = [0u64; MAX_D + 1];
        tags[0] = tag;
        for j in 0..d {
            tags[j + 1] = site.0[j] as u64;
        }
        tags
    }

    /// The transition vector at any site of Z^d (total function; slabs fold
    /// transverse coordinates first).
    pub fn vector_at(&self, site: &Site) -> TransitionVector {
        let site = self.domain.fold(site);
        if let Some(v) = self.overrides.get(&site) {
            return *v;
        }
        let tags = Self::site_tags(&site, self.law.d, TAG_SITE);
        let mut rng = CounterRng::derive(self.master_seed, &tags[..self.law.d + 1]);
        self.law.sample_with(&mut rng)
    }

    /// Local drift vector d(x, omega); errors outside the declared domain.
    pub fn local_drift(&self, site: &Site) -> Result<[f64; MAX_D], EnvError> {
        if !self.domain.contains(&self.domain.fold(site)) {
            return Err(EnvError::OutsideDomain(*site));
        }
        Ok(self.vector_at(site).drift())
    }

    /// Draw the vector that resampling `site` under `fresh_seed` would
    /// produce, without mutating the environment. Same (site, fresh_seed)
    /// always produces the same vector.
    pub fn resample_draw(
        &self,
        site: &Site,
        fresh_seed: u64,
    ) -> Result<TransitionVector, EnvError> {
        let folded = self.domain.fold(site);
        if !self.domain.contains(&folded) {
            return Err(EnvError::OutsideDomain(*site));
        }
        let mut full = [0u64; MAX_D + 2];
        full[0] = TAG_RESAMPLE;
        full[1] = fresh_seed;
        for j in 0..self.law.d {
            full[j + 2] = folded.0[j] as u64;
        }
        let mut rng = CounterRng::derive(self.master_seed, &full[..self.law.d + 2]);
        Ok(self.law.sample_with(&mut rng))
    }

    /// Redraw one site from the law under `fresh_seed`, record it as an
    /// override, and return the new vector. Same (site, fresh_seed) always
    /// produces the same vector; all other sites are untouched.
    pub fn resample_site(
        &mut self,
        site: &Site,
        fresh_seed: u64,
    ) -> Result<TransitionVector, EnvError> {
        let folded = self.domain.fold(site);
        let v = self.resample_draw(site, fresh_seed)?;
        self.overrides.insert(folded, v);
        Ok(v)
    }

    /// Drop the override for a site (restores the lazily generated vector).
    pub fn clear_override(&mut self, site: &Site) {
        let folded = self.domain.fold(site);
        self.overrides.remove(&folded);
    }

    pub fn override_count(&self) -> usize {
        self.overrides.len()
    }
}

/// A point estimate with a CLT standard error (zero for closed forms).
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, std_error: 0.0 }
    }
}

/// Empirical moment summary for a law at a given r.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentReport {
    pub d: usize,
    pub r: u32,
    pub n_samples: u64,
    pub epsilon: f64,
    pub lambda: Estimate,
    pub sigma_2: Estimate,
    pub sigma_2r: Estimate,
    pub lambda_analytic: f64,
    pub sigma_2_analytic: Option<f64>,
    pub sigma_2r_analytic: Option<f64>,
    /// Moment chain sigma_2 <= (2d)^((r-1)/r) sigma_2r <= (2d)^((r-1)/r) (2d)^(1/(2r)) eps,
    /// each side with its 3-SE slack.
    pub chain_ok: bool,
}

pub fn epsilon_of(law: &EnvironmentLaw) -> f64 {
    law.epsilon()
}

/// Analytic when `n_samples` is None; otherwise a Monte Carlo mean of
/// d(0,omega) . e1 with a CLT standard error.
pub fn lambda_of(law: &EnvironmentLaw, n_samples: Option<u64>, seed: u64) -> Estimate {
    match n_samples {
        None => Estimate::exact(law.lambda_analytic()),
        Some(n) => {
            let report = empirical_moments(law, 1, n, seed);
            report.lambda
        }
    }
}

/// sigma_2r: closed form when available and `n_samples` is None.
pub fn sigma_of(law: &EnvironmentLaw, r: u32, n_samples: Option<u64>, seed: u64) -> Estimate {
    match (n_samples, law.sigma_analytic(r)) {
        (None, Some(v)) => Estimate::exact(v),
        (n, _) => {
            let report = empirical_moments(law, r, n.unwrap_or(1_000_000), seed);
            report.sigma_2r
        }
    }
}

/// Draw `n` independent vectors and estimate lambda, sigma_2, sigma_2r with
/// standard errors. High powers are accumulated on deviations scaled by the
/// certified sup so they cannot underflow for large r.
pub fn empirical_moments(law: &EnvironmentLaw, r: u32, n: u64, seed: u64) -> MomentReport {
    assert!(n >= 2, "need at least 2 samples");
    let d = law.d;
    let mean = law.mean_vector();
    let scale = law.deviation_sup().max(1e-300);
    let p2r = 2 * r as i32;

    // per-sample statistics: drift, sum_e delta^2, sum_e (delta/scale)^(2r)
    let mut acc = [Welford::new(), Welford::new(), Welford::new()];
    let mut rng = CounterRng::derive(seed, &[0x3a01]);
    for _ in 0..n {
        let v = law.sample_with(&mut rng);
        let mut s2 = 0.0;
        let mut s2r = 0.0;
        for e in 0..2 * d {
            let delta = v.p[e] - mean.p[e];
            s2 += delta * delta;
            s2r += (delta / scale).powi(p2r);
        }
        acc[0].push(v.drift_e1());
        acc[1].push(s2);
        acc[2].push(s2r);
    }

    let lambda = Estimate { value: acc[0].mean(), std_error: acc[0].se() };
    let sigma_2 = root_estimate(acc[1].mean(), acc[1].se(), 2, 1.0);
    let sigma_2r = root_estimate(acc[2].mean(), acc[2].se(), 2 * r, scale);

    let eps = law.epsilon();
    let dd = (2 * d) as f64;
    let rr = r as f64;
    let holder = dd.powf((rr - 1.0) / rr);
    let lhs_ok = sigma_2.value <= holder * sigma_2r.value
        + 3.0 * (sigma_2.std_error + holder * sigma_2r.std_error);
    let rhs_ok =
        sigma_2r.value <= dd.powf(1.0 / (2.0 * rr)) * eps + 3.0 * sigma_2r.std_error;

    MomentReport {
        d,
        r,
        n_samples: n,
        epsilon: eps,
        lambda,
        sigma_2,
        sigma_2r,
        lambda_analytic: law.lambda_analytic(),
        sigma_2_analytic: law.sigma_analytic(1),
        sigma_2r_analytic: law.sigma_analytic(r),
        chain_ok: lhs_ok && rhs_ok,
    }
}

/// sigma = scale * m^(1/(2r)) with the delta-method standard error.
fn root_estimate(m: f64, m_se: f64, two_r: u32, scale: f64) -> Estimate {
    if m <= 0.0 {
        return Estimate::exact(0.0);
    }
    let inv = 1.0 / two_r as f64;
    let value = scale * m.powf(inv);
    let std_error = scale * m_se * inv * m.powf(inv - 1.0);
    Estimate { value, std_error }
}

/// Streaming mean/variance.
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn new() -> Self {
        Welford { n: 0, mean: 0.0, m2: 0.0 }
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    fn se(&self) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}
