//! Shared oracles and fixture loaders for the integration suites.
//!
//! Everything here is computed by a route independent of the library code
//! under test: closed-form gambler's-ruin identities for one-dimensional
//! marginals, dense `LU` solves for small chains, and frozen high-precision
//! fixtures generated offline (see `tools/`).

#![allow(dead_code)]

use rwre::env::Environment;
use rwre::green::GreenSource;
use rwre::lattice::LatticeDomain;
use rwre::solver::{solve_dense, ChainKernel};

use serde::Deserialize;
use std::path::PathBuf;

// ---------------------------------------------------------------------------
// Gambler's-ruin closed forms (expm1/ln1p-safe near the symmetric point)
// ---------------------------------------------------------------------------

/// P(hit +b before -a) for a nearest-neighbour birth-death chain started at 0
/// with down/up odds `rho` (laziness does not matter). Stable for rho -> 1.
pub fn ruin_front_prob(rho: f64, a: i64, b: i64) -> f64 {
    assert!(rho > 0.0 && rho.is_finite());
    assert!(a >= 1 && b >= 1);
    let ln_rho = rho.ln();
    if ln_rho.abs() < 1e-14 {
        return a as f64 / (a + b) as f64;
    }
    // (1 - rho^a) / (1 - rho^{a+b}) = expm1(a ln rho) / expm1((a+b) ln rho)
    f64::exp_m1(a as f64 * ln_rho) / f64::exp_m1((a + b) as f64 * ln_rho)
}

/// Expected exit time from (-a, b) for a lazy biased walk started at 0 with
/// per-step up/down probabilities `p_up`, `p_down` (hold otherwise).
/// Wald route when the drift is nonzero; jump-chain count a*b over the move
/// probability when symmetric.
pub fn ruin_exit_time(p_up: f64, p_down: f64, a: i64, b: i64) -> f64 {
    assert!(p_up > 0.0 && p_down > 0.0 && p_up + p_down <= 1.0 + 1e-15);
    let mu = p_up - p_down;
    if mu.abs() < 1e-14 {
        return a as f64 * b as f64 / (p_up + p_down);
    }
    let p_front = ruin_front_prob(p_down / p_up, a, b);
    (b as f64 * p_front - a as f64 * (1.0 - p_front)) / mu
}

/// Z = G[local-drift](0) on the slab of half-width `l` for the constant-drift
/// law: the path sum of a constant drift telescopes to the mean exit
/// displacement, L*P(front) - (L+1)*(1 - P(front)). Exact for every lambda.
pub fn constant_drift_z(d: usize, l: i64, lambda: f64) -> f64 {
    let up = 1.0 / (2.0 * d as f64) + lambda / 2.0;
    let down = 1.0 / (2.0 * d as f64) - lambda / 2.0;
    if (up - down).abs() < 1e-15 {
        return 0.0;
    }
    // slab interior x1 in [-l, l-1]: absorbers at -l-1 (distance l+1) and l
    let p_front = ruin_front_prob(down / up, l + 1, l);
    l as f64 * p_front - (l + 1) as f64 * (1.0 - p_front)
}

/// Mean exit time of the d-dimensional walk with constant e1-drift from the
/// slab of half-width l (transverse moves are holds for the e1-marginal).
pub fn constant_drift_exit_time(d: usize, l: i64, lambda: f64) -> f64 {
    let up = 1.0 / (2.0 * d as f64) + lambda / 2.0;
    let down = 1.0 / (2.0 * d as f64) - lambda / 2.0;
    ruin_exit_time(up, down, l + 1, l)
}

// ---------------------------------------------------------------------------
// Dense reference solves
// ---------------------------------------------------------------------------

/// Green field via the dense LU factorization of (I - P): an independent
/// numerical route to cross-check the iterative solver on small domains.
pub fn dense_green_field(
    env: &Environment,
    domain: &LatticeDomain,
    source: &GreenSource,
    dense_cap: usize,
) -> Vec<f64> {
    let kernel = ChainKernel::build(env, domain, dense_cap as u64).expect("kernel");
    let rhs = source.build_rhs(env, domain, kernel.n);
    solve_dense(&kernel, &rhs, false, dense_cap)
}

// ---------------------------------------------------------------------------
// Frozen high-precision fixtures
// ---------------------------------------------------------------------------

fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

#[derive(Deserialize)]
pub struct FormulaReference {
    pub precision_digits: u32,
    pub delta_inverse: Vec<DeltaCase>,
    pub lemma1: Vec<Lemma1Case>,
}

#[derive(Deserialize)]
pub struct DeltaCase {
    pub m: f64,
    pub l: f64,
    pub big_h: f64,
    pub small_h: f64,
    pub gamma1: f64,
    pub value: f64,
    pub ln: f64,
}

#[derive(Deserialize)]
pub struct Lemma1Case {
    pub rho: f64,
    pub p: f64,
    pub m: f64,
    pub l: f64,
    pub big_h: f64,
    pub kappa: f64,
    pub delta: f64,
    pub d: usize,
    pub value: f64,
    pub ln: f64,
}

pub fn load_formula_reference() -> FormulaReference {
    let text = std::fs::read_to_string(data_path("formula_reference.json")).expect("fixture");
    serde_json::from_str(&text).expect("fixture parse")
}

#[derive(Deserialize)]
pub struct GammaReference {
    pub beta: f64,
    pub alpha: f64,
    pub rows: Vec<GammaCase>,
}

#[derive(Deserialize)]
pub struct GammaCase {
    pub d: usize,
    pub l: i64,
    pub w: i64,
    pub beta: f64,
    pub sum: f64,
    pub g_origin: f64,
}

pub fn load_gamma_reference() -> GammaReference {
    let text = std::fs::read_to_string(data_path("gamma_reference.json")).expect("fixture");
    serde_json::from_str(&text).expect("fixture parse")
}

// ---------------------------------------------------------------------------
// Assertion helpers
// ---------------------------------------------------------------------------

/// |x - y| within k standard errors (combined in quadrature), with a tiny
/// absolute floor so exact-zero comparisons do not demand SE > 0.
pub fn within_k_se(x: f64, se_x: f64, y: f64, se_y: f64, k: f64) -> bool {
    let se = (se_x * se_x + se_y * se_y).sqrt();
    (x - y).abs() <= k * se + 1e-12 * x.abs().max(y.abs()).max(1.0) * f64::EPSILON.sqrt()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}
