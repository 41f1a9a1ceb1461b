//! Randomized invariant checks: structural identities that must hold for
//! every law, seed, and scale, independent of any calibrated tolerance.

mod common;

use proptest::prelude::*;

use rwre::criterion::{
    delta_inverse, lambda0, lemma1_bound, make_schedule, Lemma1Outcome, ScheduleConstants,
};
use rwre::env::{sample_environment, Atom, EnvironmentLaw};
use rwre::green::{green_apply_exact, GreenSource};
use rwre::lattice::{Direction, ExitFace, LatticeDomain, Site, SlabSpec};
use rwre::solver::{solve_dense, solve_gs, ChainKernel};
use rwre::walk::{face_tallies, rho_of_q};

const DENSE_CAP: usize = 4096;

fn dim() -> impl Strategy<Value = usize> {
    // environment laws are defined for even dimension only
    prop_oneof![Just(2usize), Just(4)]
}

fn two_point_law() -> impl Strategy<Value = EnvironmentLaw> {
    (dim(), 1e-4..0.02f64, -0.004..0.004f64)
        .prop_map(|(d, a, l)| EnvironmentLaw::two_point(d, a, l).unwrap())
}

fn isotropic_law() -> impl Strategy<Value = EnvironmentLaw> {
    (dim(), 1e-4..0.01f64, -0.002..0.002f64)
        .prop_map(|(d, a, l)| EnvironmentLaw::isotropic_plus_drift(d, a, l).unwrap())
}

/// Two-atom custom table: uniform kernel with opposite +-delta tilts on the
/// e1 pair, mixed with weight w.
fn custom_law() -> impl Strategy<Value = EnvironmentLaw> {
    (dim(), 1e-4..0.01f64, 1e-4..0.01f64, 0.1..0.9f64).prop_map(|(d, d1, d2, w)| {
        let base = 1.0 / (2.0 * d as f64);
        let mut atoms = Vec::new();
        for (delta, weight) in [(d1, w), (-d2, 1.0 - w)] {
            let mut probs = vec![base; 2 * d];
            probs[0] += delta;
            probs[1] -= delta;
            atoms.push(Atom { weight, probs });
        }
        EnvironmentLaw::custom_table(d, atoms).unwrap()
    })
}

fn any_stochastic_law() -> impl Strategy<Value = EnvironmentLaw> {
    prop_oneof![two_point_law(), isotropic_law(), custom_law()]
}

fn slab_domain(d: usize, l: i64, w: i64) -> LatticeDomain {
    LatticeDomain::Slab(SlabSpec::new(d, l, w).unwrap())
}

proptest! {
    // ---- transition vectors ------------------------------------------------

    /// Every sampled vector is a probability vector inside the uniform band
    /// |p_e - 1/2d| <= eps/4d implied by the law's perturbation strength.
    #[test]
    fn sampled_vectors_stay_in_band(
        law in any_stochastic_law(),
        seed in any::<u64>(),
        x1 in -2..2i64,
        t in proptest::collection::vec(-9..9i64, 3),
    ) {
        let d = law.d;
        let eps = law.epsilon();
        let domain = slab_domain(d, 2, 4);
        let env = sample_environment(law, domain, seed);
        let mut coords = vec![x1];
        coords.extend_from_slice(&t[..d - 1]);
        let v = env.vector_at(&Site::from_coords(&coords));
        prop_assert!((v.sum() - 1.0).abs() < 1e-12);
        let centre = 1.0 / (2.0 * d as f64);
        let band = eps / (4.0 * d as f64) + 1e-12;
        for e in 0..2 * d {
            prop_assert!(v.p[e] >= 0.0);
            prop_assert!((v.p[e] - centre).abs() <= band,
                "component {e} = {} outside band {band}", v.p[e]);
        }
        prop_assert_eq!(v.drift_e1(), v.p[0] - v.p[1]);
    }

    // ---- moment functionals ------------------------------------------------

    /// Norm chain sigma_2 <= (2d)^((r-1)/r) sigma_2r <= (2d)^((r-1)/r) (2d)^(1/2r) eps,
    /// including an extreme order where naive power accumulation would
    /// underflow.
    #[test]
    fn holder_chain_two_point(law in two_point_law(), r in prop_oneof![
        Just(1u32), Just(2), Just(4), Just(2304)
    ]) {
        let twod = 2.0 * law.d as f64;
        let eps = law.epsilon();
        let s2 = law.sigma_analytic(1).unwrap();
        let s2r = law.sigma_analytic(r).unwrap();
        let c = twod.powf((r as f64 - 1.0) / r as f64);
        prop_assert!(s2 <= c * s2r * (1.0 + 1e-12));
        prop_assert!(s2r <= twod.powf(1.0 / (2.0 * r as f64)) * eps * (1.0 + 1e-12));
    }

    #[test]
    fn holder_chain_custom_table(law in custom_law(), r in prop_oneof![
        Just(1u32), Just(2), Just(3), Just(4)
    ]) {
        let twod = 2.0 * law.d as f64;
        let eps = law.epsilon();
        let s2 = law.sigma_analytic(1).unwrap();
        let s2r = law.sigma_analytic(r).unwrap();
        let c = twod.powf((r as f64 - 1.0) / r as f64);
        prop_assert!(s2 <= c * s2r * (1.0 + 1e-12));
        prop_assert!(s2r <= twod.powf(1.0 / (2.0 * r as f64)) * eps * (1.0 + 1e-12));
    }

    // ---- determinism -------------------------------------------------------

    /// The same master seed reproduces the same environment and the same
    /// Monte Carlo tallies, bit for bit.
    #[test]
    fn seeded_runs_reproduce(law in any_stochastic_law(), seed in any::<u64>()) {
        let d = law.d;
        let domain = slab_domain(d, 2, 4);
        let e1 = sample_environment(law.clone(), domain.clone(), seed);
        let e2 = sample_environment(law.clone(), domain.clone(), seed);
        let n = domain.states().unwrap() as usize;
        for i in 0..n {
            let s = domain.site_at(i);
            prop_assert_eq!(e1.vector_at(&s).p, e2.vector_at(&s).p);
        }
        let t1 = face_tallies(&law, &domain, 2, 16, seed, 10_000).unwrap();
        let t2 = face_tallies(&law, &domain, 2, 16, seed, 10_000).unwrap();
        prop_assert_eq!(
            serde_json::to_string(&t1).unwrap(),
            serde_json::to_string(&t2).unwrap()
        );
    }

    // ---- resampling locality ----------------------------------------------

    /// Resampling one site changes that site only; clearing the override
    /// restores the original draw bitwise.
    #[test]
    fn resample_is_local_and_reversible(
        law in any_stochastic_law(),
        seed in any::<u64>(),
        fresh in any::<u64>(),
        pick in any::<prop::sample::Index>(),
    ) {
        let d = law.d;
        let domain = slab_domain(d, 2, 4);
        let n = domain.states().unwrap() as usize;
        let mut env = sample_environment(law, domain.clone(), seed);
        let before: Vec<_> = (0..n).map(|i| env.vector_at(&domain.site_at(i)).p).collect();
        let i = pick.index(n);
        let site = domain.site_at(i);
        let preview = env.resample_draw(&site, fresh).unwrap();
        let drawn = env.resample_site(&site, fresh).unwrap();
        prop_assert_eq!(preview.p, drawn.p);
        prop_assert_eq!(env.override_count(), 1);
        for j in 0..n {
            let now = env.vector_at(&domain.site_at(j));
            if j == i {
                prop_assert_eq!(now.p, drawn.p);
            } else {
                prop_assert_eq!(now.p, before[j]);
            }
        }
        env.clear_override(&site);
        prop_assert_eq!(env.override_count(), 0);
        prop_assert_eq!(env.vector_at(&site).p, before[i]);
    }

    // ---- Green operator ---------------------------------------------------

    /// The Green operator is linear and maps nonnegative sources to
    /// nonnegative fields (dense-LU route, so no iteration error).
    #[test]
    fn green_linear_and_positive(
        law in two_point_law(),
        seed in any::<u64>(),
        alpha in 0.25..4.0f64,
    ) {
        let d = law.d;
        let domain = slab_domain(d, 2, 4);
        let env = sample_environment(law, domain.clone(), seed);
        let kernel = ChainKernel::build(&env, &domain, DENSE_CAP as u64).unwrap();
        let ones = vec![1.0; kernel.n];
        let drift = GreenSource::DriftE1.build_rhs(&env, &domain, kernel.n);
        let combo: Vec<f64> =
            ones.iter().zip(&drift).map(|(a, b)| alpha * a + b).collect();
        let g_ones = solve_dense(&kernel, &ones, false, DENSE_CAP);
        let g_drift = solve_dense(&kernel, &drift, false, DENSE_CAP);
        let g_combo = solve_dense(&kernel, &combo, false, DENSE_CAP);
        let scale = g_ones.iter().fold(1.0f64, |m, &v| m.max(v.abs()));
        for i in 0..kernel.n {
            let lin = alpha * g_ones[i] + g_drift[i];
            prop_assert!((g_combo[i] - lin).abs() <= 1e-10 * scale);
            prop_assert!(g_ones[i] >= -1e-12 * scale);
        }
    }

    /// Widening the slab strictly lengthens the stay: exiting the bigger slab
    /// requires first exiting the smaller one and then at least one more step.
    #[test]
    fn exit_time_grows_with_slab_half_width(law in two_point_law(), seed in any::<u64>()) {
        let d = law.d;
        let mut prev = 0.0f64;
        for l in 1..=3i64 {
            let domain = slab_domain(d, l, 4);
            let env = sample_environment(law.clone(), domain.clone(), seed);
            let field = green_apply_exact(&env, &domain, &GreenSource::Ones, 1 << 20).unwrap();
            let t = field.at(&Site::origin()).unwrap();
            prop_assert!(t >= prev + 1.0 - 1e-9, "E[tau] {t} vs previous {prev}");
            prev = t;
        }
    }

    /// Exact exit field satisfies the one-step restart identity
    /// u(x) = f(x) + sum_e p(x,e) u(x+e) at every interior state.
    #[test]
    fn green_field_obeys_one_step_restart(law in any_stochastic_law(), seed in any::<u64>()) {
        let d = law.d;
        let domain = slab_domain(d, 2, 4);
        let env = sample_environment(law, domain.clone(), seed);
        let field = green_apply_exact(&env, &domain, &GreenSource::Ones, 1 << 20).unwrap();
        let scale = field.values.iter().fold(1.0f64, |m, &v| m.max(v.abs()));
        let n = domain.states().unwrap() as usize;
        for i in 0..n {
            let site = domain.site_at(i);
            let v = env.vector_at(&site);
            let mut rhs = 1.0;
            for dir in Direction::all(d) {
                if let Some(j) = domain.index_of(&site.step(dir)) {
                    rhs += v.p[dir.index()] * field.values[j];
                }
            }
            prop_assert!((field.values[i] - rhs).abs() <= 5e-9 * scale);
        }
    }

    // ---- odds / exit bookkeeping -------------------------------------------

    /// rho = q/(1-q) identities: monotone, exact at the endpoints, and
    /// q <= sqrt(rho) always.
    #[test]
    fn back_exit_odds_identities(q in 0.0..0.999f64, bump in 1e-6..1e-3f64) {
        let rho = rho_of_q(q);
        prop_assert!((rho - q / (1.0 - q)).abs() <= 1e-12 * rho.max(1.0));
        prop_assert!(q <= rho.sqrt() + 1e-15);
        prop_assert!(rho_of_q((q + bump).min(0.9999)) >= rho);
    }

    // ---- schedule algebra ---------------------------------------------------

    /// Schedule fields satisfy their defining identities exactly (recomputed
    /// independently here) and repeated construction is bitwise stable.
    #[test]
    fn schedule_recomputes_to_identities(
        r in prop_oneof![Just(1u32), Just(2), Just(4), Just(9), Just(16)],
        eps in 1e-3..0.8f64,
        sigma in 1e-6..0.5f64,
        c1 in 0.3..0.7f64,
        c2 in 0.5..1.5f64,
    ) {
        let consts = ScheduleConstants { c1, c2 };
        let s = make_schedule(r, eps, sigma, consts);
        let s2 = make_schedule(r, eps, sigma, consts);
        prop_assert_eq!(s.m.to_bits(), s2.m.to_bits());
        prop_assert_eq!(s.gamma1.to_bits(), s2.gamma1.to_bits());

        let sr = (r as f64).sqrt();
        let l0 = sr * sigma * eps.powf(2.0 - 1.0 / sr);
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1e-300);
        prop_assert!(rel(s.lambda0, l0));
        prop_assert!(rel(s.lambda0, lambda0(r, eps, sigma)));
        prop_assert!(rel(s.m, eps.powf(-1.0 / sr) / l0));
        prop_assert!(rel(s.l, c1 / eps));
        prop_assert!(rel(s.big_h, s.m * s.m));
        prop_assert!(rel(s.small_h, eps.powf(-0.5 / sr) * s.l * s.l));
        prop_assert!(rel(s.gamma1, c2 / 10.0 * l0 * s.l));
        prop_assert_eq!(s.flags.eps_l_small, eps * s.l < 0.75);
        prop_assert_eq!(s.flags.nottoosmall, sigma > eps * eps);
        prop_assert_eq!(
            s.flags.admissible,
            s.flags.probe_fits_subslab && s.flags.subslab_fits_box
                && s.flags.eps_l_small && s.flags.nottoosmall
        );
    }

    // ---- tail-formula shape -------------------------------------------------

    /// The inverse-threshold formula dominates its first term and decreases
    /// (weakly) as the sub-slab width H grows; ln stays consistent with value.
    #[test]
    fn delta_inverse_shape(
        m in 50.0..5000.0f64,
        l in 2.0..50.0f64,
        small_h in 1.0..200.0f64,
        gamma1 in 0.05..2.0f64,
        h0 in 10.0..1e4f64,
    ) {
        let a = gamma1 * m / (32.0 * l);
        let mut prev = f64::INFINITY;
        for k in 0..4 {
            let big_h = h0 * (1 << k) as f64;
            let di = delta_inverse(m, l, big_h, small_h, gamma1);
            prop_assert!(di.value >= (-a).exp());
            if di.value.is_normal() {
                prop_assert!((di.ln.exp() - di.value).abs() <= 1e-12 * di.value);
            }
            prop_assert!(di.value <= prev * (1.0 + 1e-12));
            prev = di.value;
        }
    }

    /// The renormalization bound is monotone: (weakly) increasing in the mean
    /// odds, (weakly) decreasing in the slab-minimum probability, and a mean
    /// of one or more is a structural infinity.
    #[test]
    fn lemma1_bound_monotone(
        rho_lo in 1e-4..0.5f64,
        rho_gap in 0.0..0.45f64,
        p_lo in 0.0..0.9f64,
        p_gap in 0.0..0.1f64,
        m in 50.0..2000.0f64,
        l in 2.0..40.0f64,
        kappa in 0.05..0.8f64,
        delta in 1.5..1e4f64,
        d in dim(),
    ) {
        let big_h = m * m;
        let lo = lemma1_bound(rho_lo, p_lo, m, l, big_h, kappa, delta, d);
        let hi = lemma1_bound(rho_lo + rho_gap, p_lo, m, l, big_h, kappa, delta, d);
        prop_assert!(lo.ln() <= hi.ln() + 1e-12 * hi.ln().abs().max(1.0));
        let more_p = lemma1_bound(rho_lo, p_lo + p_gap, m, l, big_h, kappa, delta, d);
        prop_assert!(more_p.ln() <= lo.ln() + 1e-12 * lo.ln().abs().max(1.0));
        match lemma1_bound(1.0 + rho_gap, p_lo, m, l, big_h, kappa, delta, d) {
            Lemma1Outcome::DenominatorVanished { rho_mean } => {
                prop_assert!(rho_mean >= 1.0)
            }
            Lemma1Outcome::Finite { .. } => prop_assert!(false, "rho >= 1 must not be finite"),
        }
    }

    // ---- reflection symmetry ------------------------------------------------

    /// Negating e1 (swapping the +-e1 components and mirroring sites) swaps
    /// the front and back absorption probabilities exactly.
    #[test]
    fn reflection_swaps_front_and_back(law in two_point_law(), seed in any::<u64>()) {
        let d = law.d;
        let domain = LatticeDomain::boxed(d, 2).unwrap();
        let env = sample_environment(law, domain.clone(), seed);
        let kernel = ChainKernel::build(&env, &domain, DENSE_CAP as u64).unwrap();
        let mut mirrored = ChainKernel::build(&env, &domain, DENSE_CAP as u64).unwrap();
        for i in 0..kernel.n {
            let mut s = domain.site_at(i);
            s.0[0] = -s.0[0];
            let mut v = env.vector_at(&s);
            v.p.swap(0, 1);
            mirrored.set_row(i, &v);
        }
        let u_front = solve_dense(&kernel, &kernel.exit_mass(ExitFace::Front), false, DENSE_CAP);
        let u_back =
            solve_dense(&mirrored, &mirrored.exit_mass(ExitFace::Back), false, DENSE_CAP);
        let origin = domain.index_of(&Site::origin()).unwrap();
        prop_assert!((u_front[origin] - u_back[origin]).abs() <= 1e-12);

        // exit masses from any state form a probability split
        let u_side = solve_dense(&kernel, &kernel.exit_mass(ExitFace::Side), false, DENSE_CAP);
        let u_b = solve_dense(&kernel, &kernel.exit_mass(ExitFace::Back), false, DENSE_CAP);
        prop_assert!((u_front[origin] + u_b[origin] + u_side[origin] - 1.0).abs() <= 1e-11);
    }
}

// Exactly 100 fresh (environment, site) pairs, as pinned for the
// warm-start contract.
proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// A warm-started re-solve after a single-row patch agrees with a cold
    /// solve of the patched system to 1e-9.
    #[test]
    fn warm_restart_matches_cold_solve(
        law in two_point_law(),
        seed in any::<u64>(),
        fresh in any::<u64>(),
        pick in any::<prop::sample::Index>(),
    ) {
        let d = law.d;
        let domain = slab_domain(d, 3, 4);
        let mut env = sample_environment(law, domain.clone(), seed);
        let mut kernel = ChainKernel::build(&env, &domain, 1 << 20).unwrap();
        let rhs = GreenSource::DriftE1.build_rhs(&env, &domain, kernel.n);
        let tol = rwre::solver::default_tol(&rhs).min(1e-10);
        let (u0, _) = solve_gs(&kernel, &rhs, false, tol, 200_000, None).unwrap();

        let i = pick.index(kernel.n);
        let site = domain.site_at(i);
        let v = env.resample_site(&site, fresh).unwrap();
        kernel.set_row(i, &v);
        let mut rhs2 = rhs.clone();
        rhs2[i] = v.p[0] - v.p[1];
        let tol2 = rwre::solver::default_tol(&rhs2).min(1e-10);
        let (warm, _) = solve_gs(&kernel, &rhs2, false, tol2, 200_000, Some(&u0)).unwrap();
        let (cold, _) = solve_gs(&kernel, &rhs2, false, tol2, 200_000, None).unwrap();
        let scale = cold.iter().fold(1.0f64, |m, &x| m.max(x.abs()));
        for j in 0..kernel.n {
            prop_assert!((warm[j] - cold[j]).abs() <= 1e-9 * scale);
        }
    }
}
