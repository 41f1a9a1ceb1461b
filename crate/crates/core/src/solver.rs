//! Absorbing-chain linear algebra.
//!
//! Exact Green values solve (I - P) g = f on the interior states of a finite
//! domain, where P is the substochastic interior transition matrix (rows lose
//! the mass that exits). Three solvers:
//!
//! * Gauss-Seidel on an assembled kernel — the workhorse for random
//!   environments at desk scale, with warm starts for single-site resampling.
//! * A dense LU oracle (below a state cap) used to cross-check the iterative
//!   path in tests.
//! * A matrix-free conjugate gradient for the symmetric simple-random-walk
//!   slab, which is the only place state counts get large.
//!
//! All solvers are sequential, so results are independent of worker count.

use crate::env::Environment;
use crate::lattice::{Direction, LatticeDomain, SlabSpec};

#[derive(Clone, Copy, Debug)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum SolveError {
    #[error("state count {n} exceeds cap {cap}")]
    TooManyStates { n: u64, cap: u64 },
    #[error("no convergence after {iterations} sweeps (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("length mismatch: rhs has {got}, kernel has {want} states")]
    BadRhs { got: usize, want: usize },
}

/// Marker for states whose neighbour in some direction is absorbing.
const EXIT: u32 = u32::MAX;

/// Assembled interior kernel of an absorbing chain on a finite domain.
/// Per-direction storage; a pair of directions may reach the same state
/// (periodic width 2), in which case both entries simply contribute.
#[derive(Clone, Debug)]
pub struct ChainKernel {
    pub domain: LatticeDomain,
    pub n: usize,
    pub two_d: usize,
    nbr: Vec<u32>,
    prob: Vec<f64>,
}

impl ChainKernel {
    /// Assemble from a sampled environment restricted to `domain`.
    pub fn build(env: &Environment, domain: &LatticeDomain, cap: u64) -> Result<Self, SolveError> {
        let n = domain.states().filter(|&n| n <= cap).ok_or(SolveError::TooManyStates {
            n: domain.states().unwrap_or(u64::MAX),
            cap,
        })?;
        let d = domain.d();
        let mut k = ChainKernel {
            domain: domain.clone(),
            n: n as usize,
            two_d: 2 * d,
            nbr: vec![EXIT; n as usize * 2 * d],
            prob: vec![0.0; n as usize * 2 * d],
        };
        for i in 0..k.n {
            let site = domain.site_at(i);
            let v = env.vector_at(&site);
            for dir in Direction::all(d) {
                let e = dir.index();
                let y = site.step(dir);
                k.prob[i * k.two_d + e] = v.p[e];
                if let Some(j) = domain.index_of(&y) {
                    k.nbr[i * k.two_d + e] = j as u32;
                }
            }
        }
        Ok(k)
    }

    /// Assemble the symmetric simple-random-walk kernel on `domain`.
    pub fn build_ssrw(domain: &LatticeDomain, cap: u64) -> Result<Self, SolveError> {
        let d = domain.d();
        let n = domain.states().filter(|&n| n <= cap).ok_or(SolveError::TooManyStates {
            n: domain.states().unwrap_or(u64::MAX),
            cap,
        })?;
        let u = 1.0 / (2 * d) as f64;
        let mut k = ChainKernel {
            domain: domain.clone(),
            n: n as usize,
            two_d: 2 * d,
            nbr: vec![EXIT; n as usize * 2 * d],
            prob: vec![u; n as usize * 2 * d],
        };
        for i in 0..k.n {
            let site = domain.site_at(i);
            for dir in Direction::all(d) {
                let y = site.step(dir);
                if let Some(j) = domain.index_of(&y) {
                    k.nbr[i * k.two_d + dir.index()] = j as u32;
                }
            }
        }
        Ok(k)
    }

    /// Replace the outgoing probabilities of one interior state (the
    /// neighbour structure is positional and never changes). Used for cheap
    /// single-site perturbations with warm-started re-solves.
    pub fn set_row(&mut self, i: usize, v: &crate::env::TransitionVector) {
        for e in 0..self.two_d {
            self.prob[i * self.two_d + e] = v.p[e];
        }
    }

    /// The outgoing probabilities of one state, in direction order.
    pub fn row_probs(&self, i: usize) -> &[f64] {
        &self.prob[i * self.two_d..(i + 1) * self.two_d]
    }

    /// Restore a row saved with `row_probs`.
    pub fn set_row_probs(&mut self, i: usize, probs: &[f64]) {
        self.prob[i * self.two_d..(i + 1) * self.two_d].copy_from_slice(probs);
    }

    /// y = (I - P) x (or (I - P^T) x when transposed).
    fn apply(&self, x: &[f64], y: &mut [f64], transposed: bool) {
        if !transposed {
            for i in 0..self.n {
                let mut s = 0.0;
                for e in 0..self.two_d {
                    let j = self.nbr[i * self.two_d + e];
                    if j != EXIT {
                        s += self.prob[i * self.two_d + e] * x[j as usize];
                    }
                }
                y[i] = x[i] - s;
            }
        } else {
            y.copy_from_slice(x);
            for i in 0..self.n {
                let xi = x[i];
                for e in 0..self.two_d {
                    let j = self.nbr[i * self.two_d + e];
                    if j != EXIT {
                        y[j as usize] -= self.prob[i * self.two_d + e] * xi;
                    }
                }
            }
        }
    }

    fn residual_inf(&self, x: &[f64], f: &[f64], transposed: bool, scratch: &mut [f64]) -> f64 {
        self.apply(x, scratch, transposed);
        let mut r = 0.0f64;
        for i in 0..self.n {
            r = r.max((f[i] - scratch[i]).abs());
        }
        r
    }

    /// Probability of being absorbed through `face`, per interior state:
    /// solves (I - P) u = b with b(i) = mass exiting i through `face`.
    pub fn exit_mass(&self, face: crate::lattice::ExitFace) -> Vec<f64> {
        let mut b = vec![0.0; self.n];
        let d = self.domain.d();
        for i in 0..self.n {
            let site = self.domain.site_at(i);
            for dir in Direction::all(d) {
                let e = dir.index();
                if self.nbr[i * self.two_d + e] == EXIT
                    && self.domain.classify_exit(&site.step(dir)) == face
                {
                    b[i] += self.prob[i * self.two_d + e];
                }
            }
        }
        b
    }
}

/// Default residual target: 2e-12 scaled by the data size.
pub fn default_tol(f: &[f64]) -> f64 {
    let norm = f.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    2e-12 * norm.max(1.0)
}

/// Gauss-Seidel solve of (I - P) x = f (or the transposed system), optionally
/// warm-started. Sweeps in fixed state order; checks the true residual every
/// few sweeps.
pub fn solve_gs(
    kernel: &ChainKernel,
    f: &[f64],
    transposed: bool,
    tol: f64,
    max_sweeps: usize,
    warm: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    if f.len() != kernel.n {
        return Err(SolveError::BadRhs { got: f.len(), want: kernel.n });
    }
    let n = kernel.n;
    let mut x = match warm {
        Some(w) if w.len() == n => w.to_vec(),
        _ => vec![0.0; n],
    };
    let mut scratch = vec![0.0; n];
    // Transposed sweeps use the reverse adjacency, built on demand.
    let rev = transposed.then(|| reverse_adjacency(kernel));
    let mut sweeps = 0;
    loop {
        for i in 0..n {
            let mut s = f[i];
            match &rev {
                None => {
                    for e in 0..kernel.two_d {
                        let j = kernel.nbr[i * kernel.two_d + e];
                        if j != EXIT {
                            s += kernel.prob[i * kernel.two_d + e] * x[j as usize];
                        }
                    }
                }
                Some((starts, cols, vals)) => {
                    for k in starts[i]..starts[i + 1] {
                        s += vals[k] * x[cols[k] as usize];
                    }
                }
            }
            x[i] = s;
        }
        sweeps += 1;
        if sweeps % 4 == 0 || sweeps >= max_sweeps {
            let r = kernel.residual_inf(&x, f, transposed, &mut scratch);
            if r <= tol {
                return Ok((x, SolveReport { iterations: sweeps, residual: r }));
            }
            if sweeps >= max_sweeps {
                return Err(SolveError::NotConverged { iterations: sweeps, residual: r });
            }
        }
    }
}

type Csr = (Vec<usize>, Vec<u32>, Vec<f64>);

fn reverse_adjacency(kernel: &ChainKernel) -> Csr {
    let n = kernel.n;
    let mut counts = vec![0usize; n + 1];
    for i in 0..n {
        for e in 0..kernel.two_d {
            let j = kernel.nbr[i * kernel.two_d + e];
            if j != EXIT {
                counts[j as usize + 1] += 1;
            }
        }
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let starts = counts.clone();
    let mut fill = counts;
    let nnz = starts[n];
    let mut cols = vec![0u32; nnz];
    let mut vals = vec![0.0; nnz];
    for i in 0..n {
        for e in 0..kernel.two_d {
            let j = kernel.nbr[i * kernel.two_d + e];
            if j != EXIT {
                let slot = fill[j as usize];
                cols[slot] = i as u32;
                vals[slot] = kernel.prob[i * kernel.two_d + e];
                fill[j as usize] += 1;
            }
        }
    }
    (starts, cols, vals)
}

/// Dense LU oracle for small systems. Panics above `cap` states.
pub fn solve_dense(kernel: &ChainKernel, f: &[f64], transposed: bool, cap: usize) -> Vec<f64> {
    assert!(kernel.n <= cap, "dense oracle limited to {cap} states, got {}", kernel.n);
    assert_eq!(f.len(), kernel.n);
    let n = kernel.n;
    let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] += 1.0;
        for e in 0..kernel.two_d {
            let j = kernel.nbr[i * kernel.two_d + e];
            if j != EXIT {
                if transposed {
                    a[(j as usize, i)] -= kernel.prob[i * kernel.two_d + e];
                } else {
                    a[(i, j as usize)] -= kernel.prob[i * kernel.two_d + e];
                }
            }
        }
    }
    let b = nalgebra::DVector::from_column_slice(f);
    let x = a.lu().solve(&b).expect("absorbing chain is nonsingular");
    x.as_slice().to_vec()
}

/// Matrix-free symmetric slab operator for the simple random walk:
/// states are (layer, transverse) with layer = x1 + L in [0, 2L) and
/// transverse positions folded periodically.
pub struct SsrwSlab {
    pub spec: SlabSpec,
    pub n: usize,
    layers: usize,
    t_count: usize,
    inv_2d: f64,
    /// transverse neighbour table: for each transverse index, 2(d-1) wrapped
    /// transverse indices
    tnbr: Vec<u32>,
    t_deg: usize,
}

impl SsrwSlab {
    pub fn new(spec: SlabSpec) -> Self {
        let d = spec.d;
        let w = spec.w as usize;
        let layers = 2 * spec.l as usize;
        let t_count = w.pow(d as u32 - 1);
        let t_deg = 2 * (d - 1);
        let mut tnbr = vec![0u32; t_count * t_deg];
        let mut digits = vec![0usize; d - 1];
        for t in 0..t_count {
            // the last transverse axis is the fastest index
            let mut strides = 1usize;
            for (k, &dg) in digits.iter().enumerate().rev() {
                let up = if dg + 1 == w { t - (w - 1) * strides } else { t + strides };
                let dn = if dg == 0 { t + (w - 1) * strides } else { t - strides };
                tnbr[t * t_deg + 2 * k] = up as u32;
                tnbr[t * t_deg + 2 * k + 1] = dn as u32;
                strides *= w;
            }
            // odometer increment
            for k in (0..d - 1).rev() {
                digits[k] += 1;
                if digits[k] < w {
                    break;
                }
                digits[k] = 0;
            }
        }
        SsrwSlab {
            spec,
            n: layers * t_count,
            layers,
            t_count,
            inv_2d: 1.0 / (2 * d) as f64,
            tnbr,
            t_deg,
        }
    }

    pub fn index_of_origin(&self) -> usize {
        // origin: layer L, transverse all-zero
        self.spec.l as usize * self.t_count
    }

    /// y = (I - P) x.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let t = self.t_count;
        for layer in 0..self.layers {
            let base = layer * t;
            let up = layer + 1 < self.layers;
            let dn = layer > 0;
            for ti in 0..t {
                let mut s = 0.0;
                let row = ti * self.t_deg;
                for k in 0..self.t_deg {
                    s += x[base + self.tnbr[row + k] as usize];
                }
                if up {
                    s += x[base + t + ti];
                }
                if dn {
                    s += x[base - t + ti];
                }
                y[base + ti] = x[base + ti] - s * self.inv_2d;
            }
        }
    }

    /// Conjugate gradient for (I - P) g = e_source; the operator is
    /// symmetric positive definite.
    pub fn cg_point_source(
        &self,
        source: usize,
        tol: f64,
        max_iters: usize,
    ) -> Result<(Vec<f64>, SolveReport), SolveError> {
        let n = self.n;
        let mut x = vec![0.0; n];
        let mut r = vec![0.0; n];
        r[source] = 1.0;
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let mut rs: f64 = 1.0; // r.r for r = e_source
        let mut iters = 0;
        loop {
            self.apply(&p, &mut ap);
            let pap: f64 = dot(&p, &ap);
            let alpha = rs / pap;
            axpy(&mut x, alpha, &p);
            axpy(&mut r, -alpha, &ap);
            iters += 1;
            let rinf = r.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            if rinf <= tol * 0.5 || iters >= max_iters {
                // true residual (CG's recurrence can drift)
                self.apply(&x, &mut ap);
                let mut tr = 0.0f64;
                for i in 0..n {
                    let fi = if i == source { 1.0 } else { 0.0 };
                    tr = tr.max((fi - ap[i]).abs());
                }
                if tr <= tol {
                    return Ok((x, SolveReport { iterations: iters, residual: tr }));
                }
                if iters >= max_iters {
                    return Err(SolveError::NotConverged { iterations: iters, residual: tr });
                }
            }
            let rs_new = dot(&r, &r);
            let beta = rs_new / rs;
            rs = rs_new;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for i in 0..y.len() {
        y[i] += alpha * x[i];
    }
}
