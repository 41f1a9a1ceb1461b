//! Python veneer over the `rwre` crate: environment laws and sampled
//! environments as classes, plus free functions for the slab Green operator,
//! exit statistics, criterion formulas, concentration checks, and the
//! config-driven runner. Compound reports cross the boundary as JSON strings
//! (the same shapes the CLI archives), scalars as plain numbers.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use rwre::concentration::{bblm_check, mean_bound_check};
use rwre::criterion::{make_schedule, ScheduleConstants};
use rwre::env::{sample_environment, EnvironmentLaw};
use rwre::green::{gamma_weight_sum, green_apply_exact, GreenSource};
use rwre::lattice::{LatticeDomain, Site, SlabSpec};
use rwre::walk::{aggregate_faces, default_step_cap, face_tallies};

const DEFAULT_CAP: u64 = 1 << 21;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn json_of<T: serde::Serialize>(x: &T) -> PyResult<String> {
    serde_json::to_string(x).map_err(runtime_err)
}

/// An i.i.d. law for the site transition vector.
#[pyclass(name = "EnvironmentLaw", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyLaw {
    pub inner: EnvironmentLaw,
}

#[pymethods]
impl PyLaw {
    #[staticmethod]
    pub fn deterministic_drift(d: usize, lambda: f64) -> PyResult<Self> {
        Ok(PyLaw { inner: EnvironmentLaw::deterministic_drift(d, lambda).map_err(value_err)? })
    }

    #[staticmethod]
    pub fn two_point(d: usize, a: f64, lambda: f64) -> PyResult<Self> {
        Ok(PyLaw { inner: EnvironmentLaw::two_point(d, a, lambda).map_err(value_err)? })
    }

    #[staticmethod]
    pub fn isotropic_plus_drift(d: usize, a: f64, lambda: f64) -> PyResult<Self> {
        Ok(PyLaw { inner: EnvironmentLaw::isotropic_plus_drift(d, a, lambda).map_err(value_err)? })
    }

    /// Parse a law from its JSON form, e.g.
    /// {"kind": "two-point", "d": 2, "a": 0.02, "lambda": 0.01}.
    #[staticmethod]
    pub fn from_json(text: &str) -> PyResult<Self> {
        let law: EnvironmentLaw = serde_json::from_str(text).map_err(value_err)?;
        law.validate().map_err(value_err)?;
        Ok(PyLaw { inner: law })
    }

    #[getter]
    pub fn d(&self) -> usize {
        self.inner.d
    }

    pub fn kind(&self) -> &'static str {
        self.inner.kind_name()
    }

    /// Perturbation strength eps(mu) = 4d sup|omega - 1/2d|.
    pub fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }

    /// Mean e1-drift lambda.
    pub fn lambda_analytic(&self) -> f64 {
        self.inner.lambda_analytic()
    }

    /// sigma_2r in closed form, when one exists for this kind.
    pub fn sigma_analytic(&self, r: u32) -> Option<f64> {
        self.inner.sigma_analytic(r)
    }

    pub fn to_json(&self) -> PyResult<String> {
        json_of(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("EnvironmentLaw({}, d={})", self.inner.kind_name(), self.inner.d)
    }
}

/// A lazily sampled environment on a fixed domain.
#[pyclass(name = "Environment")]
pub struct PyEnvironment {
    pub inner: rwre::env::Environment,
}

#[pymethods]
impl PyEnvironment {
    /// Transition probabilities at a site, in direction order
    /// (+e1, -e1, +e2, -e2, ...).
    pub fn vector_at(&self, coords: Vec<i64>) -> PyResult<Vec<f64>> {
        self.check_coords(&coords)?;
        let v = self.inner.vector_at(&Site::from_coords(&coords));
        Ok(v.p[..2 * self.inner.law.d].to_vec())
    }

    /// e1-component of the local drift at a site.
    pub fn drift_e1_at(&self, coords: Vec<i64>) -> PyResult<f64> {
        Ok(self.vector_at(coords).map(|p| p[0] - p[1])?)
    }

    /// Preview the vector a resample with this seed would produce, without
    /// recording it.
    pub fn resample_draw(&self, coords: Vec<i64>, fresh_seed: u64) -> PyResult<Vec<f64>> {
        self.check_coords(&coords)?;
        let v = self
            .inner
            .resample_draw(&Site::from_coords(&coords), fresh_seed)
            .map_err(value_err)?;
        Ok(v.p[..2 * self.inner.law.d].to_vec())
    }

    /// Redraw one site from the law and record the override.
    pub fn resample_site(&mut self, coords: Vec<i64>, fresh_seed: u64) -> PyResult<Vec<f64>> {
        self.check_coords(&coords)?;
        let v = self
            .inner
            .resample_site(&Site::from_coords(&coords), fresh_seed)
            .map_err(value_err)?;
        Ok(v.p[..2 * self.inner.law.d].to_vec())
    }

    pub fn clear_override(&mut self, coords: Vec<i64>) -> PyResult<()> {
        self.check_coords(&coords)?;
        self.inner.clear_override(&Site::from_coords(&coords));
        Ok(())
    }

    #[getter]
    pub fn override_count(&self) -> usize {
        self.inner.override_count()
    }

    #[getter]
    pub fn d(&self) -> usize {
        self.inner.law.d
    }

    fn __repr__(&self) -> String {
        format!(
            "Environment({}, d={}, overrides={})",
            self.inner.law.kind_name(),
            self.inner.law.d,
            self.inner.override_count()
        )
    }
}

impl PyEnvironment {
    fn check_coords(&self, coords: &[i64]) -> PyResult<()> {
        if coords.len() != self.inner.law.d {
            return Err(PyValueError::new_err(format!(
                "expected {} coordinates, got {}",
                self.inner.law.d,
                coords.len()
            )));
        }
        Ok(())
    }
}

/// Sample an environment on the slab -L <= x.e1 < L with transverse period W.
#[pyfunction]
pub fn slab_environment(law: &PyLaw, l: i64, w: i64, seed: u64) -> PyResult<PyEnvironment> {
    let spec = SlabSpec::new(law.inner.d, l, w).map_err(value_err)?;
    Ok(PyEnvironment {
        inner: sample_environment(law.inner.clone(), LatticeDomain::Slab(spec), seed),
    })
}

/// Sample an environment on the box of e1 half-width M.
#[pyfunction]
pub fn box_environment(law: &PyLaw, m: i64, seed: u64) -> PyResult<PyEnvironment> {
    let domain = LatticeDomain::boxed(law.inner.d, m).map_err(value_err)?;
    Ok(PyEnvironment { inner: sample_environment(law.inner.clone(), domain, seed) })
}

fn parse_source(source: &str) -> PyResult<GreenSource> {
    match source {
        "ones" => Ok(GreenSource::Ones),
        "drift-e1" => Ok(GreenSource::DriftE1),
        other => Err(PyValueError::new_err(format!(
            "unknown source {other:?}; use \"ones\" or \"drift-e1\""
        ))),
    }
}

/// Exact Green value G[f](0) on the environment's own domain.
#[pyfunction]
#[pyo3(signature = (env, source = "ones", state_cap = DEFAULT_CAP))]
pub fn green_exact_origin(env: &PyEnvironment, source: &str, state_cap: u64) -> PyResult<f64> {
    let src = parse_source(source)?;
    let field = green_apply_exact(&env.inner, &env.inner.domain, &src, state_cap)
        .map_err(runtime_err)?;
    field
        .at(&Site::origin())
        .ok_or_else(|| PyValueError::new_err("origin outside domain"))
}

/// Symmetric-walk slab exit time G[1](0); equals d L (L+1).
#[pyfunction]
pub fn ssrw_exit_time(d: usize, l: i64, w: i64) -> PyResult<f64> {
    let law = PyLaw::deterministic_drift(d, 0.0)?;
    let env = slab_environment(&law, l, w, 0)?;
    green_exact_origin(&env, "ones", DEFAULT_CAP)
}

/// Worst hyperplane odds ratio rho-hat on the environment's slab:
/// returns (value, degenerate_denominator).
#[pyfunction]
#[pyo3(signature = (env, site_target = 4096, state_cap = DEFAULT_CAP))]
pub fn hat_rho(env: &PyEnvironment, site_target: usize, state_cap: u64) -> PyResult<(f64, bool)> {
    let spec = match env.inner.domain {
        LatticeDomain::Slab(spec) => spec,
        _ => return Err(PyValueError::new_err("rho-hat needs a slab environment")),
    };
    let hr = rwre::green::hat_rho(&env.inner, spec, site_target, state_cap).map_err(runtime_err)?;
    Ok((hr.value, hr.degenerate_denominator))
}

/// Annealed per-face exit estimates from the origin of the box of half-width
/// M, as a JSON report.
#[pyfunction]
#[pyo3(signature = (law, m, n_env, n_walks, seed, step_cap = None))]
pub fn annealed_faces_json(
    law: &PyLaw,
    m: i64,
    n_env: u64,
    n_walks: u64,
    seed: u64,
    step_cap: Option<u64>,
) -> PyResult<String> {
    let domain = LatticeDomain::boxed(law.inner.d, m).map_err(value_err)?;
    let cap = step_cap.unwrap_or_else(|| default_step_cap(&domain));
    let tallies = face_tallies(&law.inner, &domain, n_env, n_walks, seed, cap).map_err(runtime_err)?;
    json_of(&aggregate_faces(&tallies, n_walks))
}

/// Inverse tail threshold delta^{-1}; returns (value, ln value).
#[pyfunction]
pub fn delta_inverse(m: f64, l: f64, big_h: f64, small_h: f64, gamma1: f64) -> (f64, f64) {
    let di = rwre::criterion::delta_inverse(m, l, big_h, small_h, gamma1);
    (di.value, di.ln)
}

/// Renormalization bound on E[sqrt(rho_B)]; returns (value, ln value),
/// infinite when the geometric-series denominator vanishes.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
pub fn lemma1_bound(
    rho_mean: f64,
    p: f64,
    m: f64,
    l: f64,
    big_h: f64,
    kappa: f64,
    delta: f64,
    d: usize,
) -> (f64, f64) {
    let out = rwre::criterion::lemma1_bound(rho_mean, p, m, l, big_h, kappa, delta, d);
    (out.value(), out.ln())
}

/// Full scale schedule (lambda0, M, L, H, h, gamma1, admissibility flags)
/// as JSON.
#[pyfunction]
#[pyo3(signature = (r, epsilon, sigma_2r, c1 = 0.5, c2 = 1.0))]
pub fn schedule_json(r: u32, epsilon: f64, sigma_2r: f64, c1: f64, c2: f64) -> PyResult<String> {
    json_of(&make_schedule(r, epsilon, sigma_2r, ScheduleConstants { c1, c2 }))
}

/// Moment-inequality check for Z = G[drift](0) on the slab, as JSON.
#[pyfunction]
#[pyo3(signature = (law, l, w, q, n_env, inner_replicates, seed, state_cap = DEFAULT_CAP))]
#[allow(clippy::too_many_arguments)]
pub fn bblm_check_json(
    law: &PyLaw,
    l: i64,
    w: i64,
    q: f64,
    n_env: u64,
    inner_replicates: u32,
    seed: u64,
    state_cap: u64,
) -> PyResult<String> {
    let spec = SlabSpec::new(law.inner.d, l, w).map_err(value_err)?;
    let rep = bblm_check(&law.inner, spec, q, n_env, inner_replicates, seed, state_cap, 1 << 24)
        .map_err(runtime_err)?;
    json_of(&rep)
}

/// Mean lower-bound check E[Z] >= (2/5) d lambda L^2, as JSON.
#[pyfunction]
#[pyo3(signature = (law, l, w, n_env, seed, state_cap = DEFAULT_CAP))]
pub fn mean_bound_json(
    law: &PyLaw,
    l: i64,
    w: i64,
    n_env: u64,
    seed: u64,
    state_cap: u64,
) -> PyResult<String> {
    let spec = SlabSpec::new(law.inner.d, l, w).map_err(value_err)?;
    let rep = mean_bound_check(&law.inner, spec, n_env, seed, state_cap).map_err(runtime_err)?;
    json_of(&rep)
}

/// Green-weight sum S = sum_x g(0,x)^beta with its truncation certification,
/// as JSON.
#[pyfunction]
#[pyo3(signature = (d, l, w, alpha, state_cap = DEFAULT_CAP))]
pub fn gamma_weight_sum_json(d: usize, l: i64, w: i64, alpha: f64, state_cap: u64) -> PyResult<String> {
    json_of(&gamma_weight_sum(d, l, w, alpha, state_cap).map_err(runtime_err)?)
}

/// Validate and execute an experiment config (same JSON the CLI takes);
/// returns (run_id, archive_dir, partial_failures).
#[pyfunction]
#[pyo3(signature = (config_json, out_root, workers = None))]
pub fn run_config(
    config_json: &str,
    out_root: &str,
    workers: Option<usize>,
) -> PyResult<(String, String, usize)> {
    let cfg = rwre::config::ExperimentConfig::from_json(config_json).map_err(value_err)?;
    match rwre::runner::run(&cfg, std::path::Path::new(out_root), workers) {
        Ok(outcome) => Ok((
            outcome.archive.run_id,
            outcome.archive.dir.to_string_lossy().into_owned(),
            outcome.partial_failures,
        )),
        Err(rwre::runner::RunError::Invalid(diags)) => {
            let msgs: Vec<String> =
                diags.iter().map(|d| format!("{}: {}", d.path, d.message)).collect();
            Err(PyValueError::new_err(msgs.join("; ")))
        }
        Err(e) => Err(runtime_err(e)),
    }
}

#[pymodule]
pub fn rwre_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLaw>()?;
    m.add_class::<PyEnvironment>()?;
    m.add_function(wrap_pyfunction!(slab_environment, m)?)?;
    m.add_function(wrap_pyfunction!(box_environment, m)?)?;
    m.add_function(wrap_pyfunction!(green_exact_origin, m)?)?;
    m.add_function(wrap_pyfunction!(ssrw_exit_time, m)?)?;
    m.add_function(wrap_pyfunction!(hat_rho, m)?)?;
    m.add_function(wrap_pyfunction!(annealed_faces_json, m)?)?;
    m.add_function(wrap_pyfunction!(delta_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(lemma1_bound, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_json, m)?)?;
    m.add_function(wrap_pyfunction!(bblm_check_json, m)?)?;
    m.add_function(wrap_pyfunction!(mean_bound_json, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_weight_sum_json, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrappers_work_without_interpreter() {
        let law = PyLaw::two_point(2, 0.02, 0.0).unwrap();
        assert!((law.epsilon() - 0.16).abs() < 1e-15);
        assert_eq!(law.kind(), "two-point");
        let t = ssrw_exit_time(2, 5, 4).unwrap();
        assert!((t - 60.0).abs() < 1e-6);
        let (v, _) = delta_inverse(320.0, 10.0, 256.0, 1.0, 1.0);
        assert!((v - 320.36787944117145).abs() < 1e-10);
        let mut env = slab_environment(&law, 2, 4, 7).unwrap();
        let p = env.vector_at(vec![0, 0]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        env.resample_site(vec![0, 0], 99).unwrap();
        assert_eq!(env.override_count(), 1);
        assert!(PyLaw::two_point(3, 0.02, 0.0).is_err());
    }

    #[test]
    fn module_imports_in_embedded_interpreter() {
        pyo3::append_to_inittab!(rwre_py);
        Python::attach(|py| {
            let m = py.import("rwre_py").unwrap();
            let t: f64 = m
                .getattr("ssrw_exit_time")
                .unwrap()
                .call1((2, 2, 4))
                .unwrap()
                .extract()
                .unwrap();
            assert!((t - 12.0).abs() < 1e-6);
        });
    }
}
