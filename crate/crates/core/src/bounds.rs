//! Upper confidence bounds for the radius of the nominal confidence sets: the
//! iterative geometric-growth scheme and the all-points linear program,
//! together with the conditionally-linear feasibility construction.

use nalgebra::{DMatrix, DVector};

use crate::criterion::{delta_r, ConfidenceBox};
use crate::linearize::{linearize, LinearizedPair};
use crate::model::{DiscriminationProblem, ExactDesign};
use crate::search::{kl_exchange_seeded, SearchConfig, SearchResult};
use crate::simplex::{simplex_solve, LpOutcome, LpProblem};
use crate::{Error, Result};

/// Which bound computation produced a result.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundMethod {
    Iterative,
    Lp,
}

/// An upper confidence bound and its provenance.
#[derive(Clone, Debug)]
pub struct BoundResult {
    /// The bound; `None` when the LP admits no vanishing radius.
    pub r_star: Option<f64>,
    pub method: BoundMethod,
    /// For the LP: the minimizing `(theta0, theta1)` certificate.
    pub certificate: Option<(Vec<f64>, Vec<f64>)>,
    /// Optimal-design computations (iterative) resp. 0 (LP).
    pub design_computations: usize,
}

/// Iterative upper confidence bound: grow `r` geometrically by `q` and
/// re-optimize the design only when the incumbent's `delta_r` has dropped to
/// the unrestricted optimum `o_inf`; stop when the re-optimized design stays
/// there as well.
///
/// The growth loop is accelerated by an exponential-plus-binary search for the
/// smallest step count with `delta_{r q^k}(D) <= o_inf`, which visits the same
/// radii as stepping one by one because `delta_r` is non-increasing in `r`.
pub fn bound_iterative(
    problem: &DiscriminationProblem,
    n: usize,
    o_inf: f64,
    r_ini: f64,
    q: f64,
    search: &SearchConfig,
) -> Result<BoundResult> {
    if !(r_ini > 0.0) {
        return Err(Error::InvalidArgument("r_ini must be positive".into()));
    }
    if !(q > 1.0) {
        return Err(Error::InvalidArgument("q must exceed 1".into()));
    }
    if !(o_inf >= 0.0) {
        return Err(Error::InvalidArgument("o_inf must be >= 0".into()));
    }
    let threshold = o_inf + 1e-9 * (1.0 + o_inf);
    let guard = 1e12 * r_ini;

    let optimize = |r: f64, warm: &[ExactDesign]| -> Result<SearchResult> {
        let config = SearchConfig { n, r, ..search.clone() };
        kl_exchange_seeded(problem, &config, warm)
    };

    let mut r = r_ini;
    let mut computations = 1usize;
    let mut incumbent = optimize(r, &[])?;
    if incumbent.value <= threshold {
        return Ok(BoundResult {
            r_star: Some(r),
            method: BoundMethod::Iterative,
            certificate: None,
            design_computations: computations,
        });
    }

    loop {
        // Smallest k >= 1 with delta_{r q^k}(incumbent) <= o_inf.
        let value_at = |k: i32| -> Result<f64> {
            delta_r(problem, &incumbent.design, r * q.powi(k))
        };
        let mut hi: i32 = 1;
        while value_at(hi)? > threshold {
            hi = hi.saturating_mul(2);
            if r * q.powi(hi) > guard {
                return Err(Error::SolverFailure(format!(
                    "iterative bound exceeded {guard:.3e} without the incumbent reaching \
                     o_inf = {o_inf}; the unrestricted optimum looks unreachable"
                )));
            }
        }
        let mut lo: i32 = hi / 2 + 1;
        if hi == 1 {
            lo = 1;
        }
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if value_at(mid)? <= threshold {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        r *= q.powi(lo);

        let warm = [incumbent.design.clone()];
        incumbent = optimize(r, &warm)?;
        computations += 1;
        if incumbent.value <= threshold {
            return Ok(BoundResult {
                r_star: Some(r),
                method: BoundMethod::Iterative,
                certificate: None,
                design_computations: computations,
            });
        }
    }
}

/// Equality system of the all-points design: `G phi = rhs` with
/// `G = [F0, -F1]` and `rhs = a1 - a0`, so that a solution makes the two
/// linearized mean surfaces agree on every candidate point.
struct AllPointsSystem {
    lp_pair: LinearizedPair,
    phi_particular: DVector<f64>,
    nullspace: DMatrix<f64>,
    residual_inf: f64,
    scale: f64,
}

fn all_points_system(problem: &DiscriminationProblem) -> Result<AllPointsSystem> {
    let design = ExactDesign::all_points(problem.space());
    let lp_pair = linearize(problem, &design)?;
    let g = {
        let (n, m) = (lp_pair.n(), lp_pair.param_dim());
        let mut g = DMatrix::zeros(n, 2 * m);
        g.view_mut((0, 0), (n, m)).copy_from(&lp_pair.f0);
        g.view_mut((0, m), (n, m)).copy_from(&(-&lp_pair.f1));
        g
    };
    let rhs = &lp_pair.a1 - &lp_pair.a0;
    let scale = rhs.amax().max(g.amax()).max(1.0);

    // Rank-revealing eigendecomposition of the Gram matrix gives both the
    // minimum-norm particular solution and a null-space basis for any shape
    // of G (the space may have fewer points than parameters).
    let p = g.ncols();
    let gram = g.transpose() * &g;
    let gtr = g.transpose() * &rhs;
    let eig = gram.symmetric_eigen();
    let lmax = eig.eigenvalues.amax();
    let cut = if lmax > 0.0 { lmax * 1e-10 } else { f64::INFINITY };
    let mut coeffs = eig.eigenvectors.transpose() * gtr;
    let mut null_cols = Vec::new();
    for j in 0..p {
        if eig.eigenvalues[j] > cut {
            coeffs[j] /= eig.eigenvalues[j];
        } else {
            coeffs[j] = 0.0;
            null_cols.push(j);
        }
    }
    let phi_particular = &eig.eigenvectors * coeffs;
    let residual_inf = (&g * &phi_particular - &rhs).amax();
    let mut nullspace = DMatrix::zeros(p, null_cols.len());
    for (col, &j) in null_cols.iter().enumerate() {
        nullspace.set_column(col, &eig.eigenvectors.column(j));
    }

    Ok(AllPointsSystem { lp_pair, phi_particular, nullspace, residual_inf, scale })
}

/// Linear-programming upper confidence bound on the all-points design: the
/// smallest `r` whose dilated cuboids contain parameters making the linearized
/// mean surfaces agree everywhere. Returns `r_star = None` when the equality
/// system is inconsistent (no vanishing radius exists along this route).
///
/// The overdetermined equality block is eliminated first (rank-revealing SVD,
/// consistency to 1e-9 of the row scale); the simplex then runs on the
/// surviving null-space coordinates, which keeps floating-point inconsistency
/// from masquerading as LP infeasibility.
pub fn bound_lp(problem: &DiscriminationProblem) -> Result<BoundResult> {
    let sys = all_points_system(problem)?;
    if sys.residual_inf > 1e-9 * sys.scale {
        return Ok(BoundResult {
            r_star: None,
            method: BoundMethod::Lp,
            certificate: None,
            design_computations: 0,
        });
    }

    let p = sys.phi_particular.len();
    let nullity = sys.nullspace.ncols();
    let theta_nom = DVector::from_vec(problem.theta_nom_stacked());
    let halfwidth = DVector::from_vec(problem.halfwidth_stacked());

    // Variables (r, psi, slacks s) with rows
    //   +(N psi)_j - r h_j + s_j       = theta_nom_j - phi_j
    //   -(N psi)_j - r h_j + s_{2m+j}  = phi_j - theta_nom_j
    let n_vars = 1 + nullity + 2 * p;
    let mut eq_matrix = Vec::with_capacity(2 * p);
    let mut eq_rhs = Vec::with_capacity(2 * p);
    for j in 0..p {
        for sign in [1.0, -1.0] {
            let mut row = vec![0.0; n_vars];
            row[0] = -halfwidth[j];
            for k in 0..nullity {
                row[1 + k] = sign * sys.nullspace[(j, k)];
            }
            let slack = 1 + nullity + if sign > 0.0 { j } else { p + j };
            row[slack] = 1.0;
            eq_matrix.push(row);
            eq_rhs.push(sign * (theta_nom[j] - sys.phi_particular[j]));
        }
    }
    let mut objective = vec![0.0; n_vars];
    objective[0] = 1.0;
    let mut var_lower = vec![0.0; n_vars];
    let mut var_upper = vec![f64::INFINITY; n_vars];
    for k in 0..nullity {
        var_lower[1 + k] = f64::NEG_INFINITY;
        var_upper[1 + k] = f64::INFINITY;
    }
    let lp = LpProblem { objective, eq_matrix, eq_rhs, var_lower, var_upper };

    match simplex_solve(&lp)? {
        LpOutcome::Optimal { x, .. } => {
            let r_star = x[0].max(0.0);
            let psi = DVector::from_iterator(nullity, x[1..1 + nullity].iter().copied());
            let phi = &sys.phi_particular + &sys.nullspace * psi;
            let m = p / 2;
            let theta0: Vec<f64> = phi.as_slice()[..m].to_vec();
            let theta1: Vec<f64> = phi.as_slice()[m..].to_vec();
            Ok(BoundResult {
                r_star: Some(r_star),
                method: BoundMethod::Lp,
                certificate: Some((theta0, theta1)),
                design_computations: 0,
            })
        }
        // The reduced program is feasible for large r by construction, so
        // these cannot occur on consistent input; surface them as failures.
        LpOutcome::Infeasible => Err(Error::SolverFailure(
            "reduced confidence-bound LP reported infeasible".into(),
        )),
        LpOutcome::Unbounded => Err(Error::SolverFailure(
            "reduced confidence-bound LP reported unbounded".into(),
        )),
    }
}

/// Per-model verification of the conditionally-linear construction.
#[derive(Clone, Debug)]
pub struct ModelLinearityCheck {
    /// Sup-norm of `F_k theta_hat + a_k` on the all-points design.
    pub residual_inf: f64,
    pub ok: bool,
    /// Radius needed for this model's box to contain its constructed point.
    pub r_required: f64,
}

/// Outcome of [`conditionally_linear_certificate`].
#[derive(Clone, Debug)]
pub struct CertificateOutcome {
    pub model0: ModelLinearityCheck,
    pub model1: ModelLinearityCheck,
    /// `(theta0_hat, theta1_hat, r)` when both models verify.
    pub certificate: Option<(Vec<f64>, Vec<f64>, f64)>,
}

/// Builds the conditionally-linear feasibility certificate: hold the
/// designated coordinates at their nominal values, zero the rest, and verify
/// that the linearized surface vanishes on the all-points design. When both
/// models verify, the dilation radius making both boxes contain the
/// constructed points is a finite upper confidence bound.
pub fn conditionally_linear_certificate(
    problem: &DiscriminationProblem,
    fixed_coords0: &[usize],
    fixed_coords1: &[usize],
) -> Result<CertificateOutcome> {
    let m = problem.param_dim();
    for &j in fixed_coords0.iter().chain(fixed_coords1) {
        if j >= m {
            return Err(Error::InvalidArgument(format!(
                "fixed coordinate {j} out of range for parameter dimension {m}"
            )));
        }
    }
    let design = ExactDesign::all_points(problem.space());
    let lp_pair = linearize(problem, &design)?;

    let build_hat = |fixed: &[usize], nom: &[f64]| -> DVector<f64> {
        DVector::from_fn(m, |j, _| if fixed.contains(&j) { nom[j] } else { 0.0 })
    };
    let check = |f: &DMatrix<f64>,
                 a: &DVector<f64>,
                 hat: &DVector<f64>,
                 nom: &[f64],
                 hw: &[f64]|
     -> ModelLinearityCheck {
        let residual_inf = (f * hat + a).amax();
        let scale = 1.0 + a.amax();
        let r_required = (0..m)
            .map(|j| (hat[j] - nom[j]).abs() / hw[j])
            .fold(0.0f64, f64::max);
        ModelLinearityCheck { residual_inf, ok: residual_inf <= 1e-8 * scale, r_required }
    };

    let hat0 = build_hat(fixed_coords0, problem.theta_nom(0));
    let hat1 = build_hat(fixed_coords1, problem.theta_nom(1));
    let model0 = check(&lp_pair.f0, &lp_pair.a0, &hat0, problem.theta_nom(0), problem.halfwidth(0));
    let model1 = check(&lp_pair.f1, &lp_pair.a1, &hat1, problem.theta_nom(1), problem.halfwidth(1));

    let certificate = if model0.ok && model1.ok {
        Some((
            hat0.as_slice().to_vec(),
            hat1.as_slice().to_vec(),
            model0.r_required.max(model1.r_required),
        ))
    } else {
        None
    };
    Ok(CertificateOutcome { model0, model1, certificate })
}

/// Verifies a bound certificate by replaying it through the criterion: the
/// distance on the all-points design at the certified parameters.
pub fn certificate_replay_distance(
    problem: &DiscriminationProblem,
    theta0: &[f64],
    theta1: &[f64],
) -> Result<f64> {
    let design = ExactDesign::all_points(problem.space());
    let lp_pair = linearize(problem, &design)?;
    crate::criterion::delta_given_theta(&lp_pair, theta0, theta1)
}

/// Convenience: does the box of radius `r` contain the stacked point?
pub fn box_contains(problem: &DiscriminationProblem, r: f64, theta0: &[f64], theta1: &[f64]) -> Result<bool> {
    let cb = ConfidenceBox::from_problem(problem, r)?;
    let mut stacked = theta0.to_vec();
    stacked.extend_from_slice(theta1);
    Ok(stacked
        .iter()
        .enumerate()
        .all(|(j, &v)| cb.lower[j] - 1e-12 <= v && v <= cb.upper[j] + 1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        builtin_pair, motivating_problem, DesignSpace, DiscriminationProblem, RegressionModel,
    };
    use std::sync::Arc;

    fn polynomial_model(name: &str, powers: &'static [i32]) -> RegressionModel {
        RegressionModel::new(
            name,
            powers.len(),
            vec![-100.0; powers.len()],
            vec![100.0; powers.len()],
            Arc::new(move |t: &[f64], x: &[f64]| {
                Ok(powers.iter().zip(t).map(|(&p, &c)| c * x[0].powi(p)).sum())
            }),
            Arc::new(move |_t: &[f64], x: &[f64]| {
                Ok(powers.iter().map(|&p| x[0].powi(p)).collect())
            }),
        )
        .unwrap()
    }

    /// Two linear models with disjoint regressors: G is full rank, the only
    /// agreeing surface is zero, so r* = max_j |nom_j| / halfwidth_j.
    #[test]
    fn lp_bound_linear_models() {
        let m0 = polynomial_model("poly12", &[1, 2]);
        let m1 = polynomial_model("poly34", &[3, 4]);
        let space = DesignSpace::line(&[0.5, 1.0, 1.5, 2.0, 2.5]).unwrap();
        let p = DiscriminationProblem::new(
            m0,
            m1,
            space,
            vec![1.0, 2.0],
            vec![0.5, -1.5],
            vec![0.5, 1.0],
            vec![0.25, 0.5],
        )
        .unwrap();
        let res = bound_lp(&p).unwrap();
        let r = res.r_star.unwrap();
        // |1|/0.5 = 2, |2|/1 = 2, |0.5|/0.25 = 2, |1.5|/0.5 = 3
        assert!((r - 3.0).abs() < 1e-7, "r* = {r}");
        let (t0, t1) = res.certificate.unwrap();
        assert!(t0.iter().chain(&t1).all(|v| v.abs() < 1e-7));
        assert!(certificate_replay_distance(&p, &t0, &t1).unwrap() < 1e-8);
        assert!(box_contains(&p, r, &t0, &t1).unwrap());
    }

    /// Models sharing the `x` regressor: the agreeing surfaces form a line
    /// `(t, 0, t, 0)`, and the LP balances the two first-coordinate boxes.
    #[test]
    fn lp_bound_optimizes_over_nullspace() {
        let m0 = polynomial_model("poly12", &[1, 2]);
        let m1 = polynomial_model("poly13", &[1, 3]);
        let space = DesignSpace::line(&[0.5, 1.0, 1.5, 2.0, 2.5]).unwrap();
        let p = DiscriminationProblem::new(
            m0,
            m1,
            space,
            vec![1.0, 2.0],
            vec![3.0, 4.0],
            vec![1.0, 1.0],
            vec![1.0, 2.0],
        )
        .unwrap();
        let res = bound_lp(&p).unwrap();
        let r = res.r_star.unwrap();
        // fixed coordinates need max(2/1, 4/2) = 2; the shared slope is
        // balanced at t = 2 with max(|2-1|, |2-3|) = 1
        assert!((r - 2.0).abs() < 1e-7, "r* = {r}");
        let (t0, t1) = res.certificate.unwrap();
        assert!((t0[0] - t1[0]).abs() < 1e-7, "certificate must share the slope");
        assert!(t0[1].abs() < 1e-7 && t1[1].abs() < 1e-7);
        assert!(certificate_replay_distance(&p, &t0, &t1).unwrap() < 1e-8);
    }

    #[test]
    fn lp_bound_enzyme_value() {
        let p = builtin_pair("enzyme").unwrap();
        let res = bound_lp(&p).unwrap();
        let r = res.r_star.unwrap();
        assert!((r - 64.0175).abs() < 0.5, "r* = {r}");
        let (t0, t1) = res.certificate.unwrap();
        assert!(certificate_replay_distance(&p, &t0, &t1).unwrap() < 1e-8);
    }

    #[test]
    fn lp_bound_infeasible_pair() {
        // linear vs exponential: no parameters make the linearized surfaces
        // agree on the whole grid, so no vanishing radius exists.
        let p = motivating_problem().unwrap();
        let res = bound_lp(&p).unwrap();
        assert!(res.r_star.is_none());
        assert!(res.certificate.is_none());
    }

    #[test]
    fn conditionally_linear_enzyme() {
        let p = builtin_pair("enzyme").unwrap();
        let out = conditionally_linear_certificate(&p, &[1, 2], &[1, 2]).unwrap();
        assert!(out.model0.ok, "residual {}", out.model0.residual_inf);
        assert!(out.model1.ok, "residual {}", out.model1.residual_inf);
        let (t0, t1, r) = out.certificate.unwrap();
        // zeroed velocity parameters, nominal inhibition constants
        assert_eq!(t0[0], 0.0);
        assert_eq!(t1[0], 0.0);
        assert!((r - 7.298 / 0.114).abs() < 1e-9);
        assert!(certificate_replay_distance(&p, &t0, &t1).unwrap() < 1e-8);
    }

    #[test]
    fn conditionally_linear_motivating_only_model0() {
        let p = motivating_problem().unwrap();
        let out = conditionally_linear_certificate(&p, &[], &[]).unwrap();
        assert!(out.model0.ok, "the linear model verifies with nothing fixed");
        assert!((out.model0.r_required - std::f64::consts::E).abs() < 1e-12);
        assert!(!out.model1.ok, "the exponential model is not conditionally linear");
        assert!(out.certificate.is_none());
    }

    #[test]
    fn lp_bound_dominates_all_designs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let p = builtin_pair("enzyme").unwrap();
        let r_star = bound_lp(&p).unwrap().r_star.unwrap();
        for _ in 0..20 {
            let k = rng.gen_range(1..=4);
            let counts: Vec<(usize, usize)> =
                (0..k).map(|_| (rng.gen_range(0..p.space().len()), rng.gen_range(1..=3))).collect();
            let design = ExactDesign::from_counts(p.space(), counts).unwrap();
            let v = delta_r(&p, &design, r_star).unwrap();
            assert!(v <= 1e-8, "delta at r* must vanish, got {v}");
            let v2 = delta_r(&p, &design, r_star * 1.7).unwrap();
            assert!(v2 <= 1e-8);
        }
    }

    #[test]
    fn iterative_bound_trivial_finish() {
        // r_ini beyond the stabilization point: one design computation.
        let p = motivating_problem().unwrap();
        let config = SearchConfig { restarts: 4, seed: 5, ..SearchConfig::new(6, 0.0) };
        let o_inf = kl_exchange_seeded(&p, &SearchConfig { r: f64::INFINITY, ..config.clone() }, &[])
            .unwrap()
            .value;
        let res = bound_iterative(&p, 6, o_inf, 5.0, 1.5, &config).unwrap();
        assert_eq!(res.design_computations, 1);
        assert_eq!(res.r_star, Some(5.0));
    }

    #[test]
    fn iterative_bound_motivating_small_q() {
        let p = motivating_problem().unwrap();
        let config = SearchConfig { restarts: 5, seed: 2, ..SearchConfig::new(6, 0.0) };
        let o_inf = kl_exchange_seeded(&p, &SearchConfig { r: f64::INFINITY, ..config.clone() }, &[])
            .unwrap()
            .value;
        let res = bound_iterative(&p, 6, o_inf, 0.3, 2.0, &config).unwrap();
        let r = res.r_star.unwrap();
        // coarse q: the returned radius must satisfy o(r) = o(inf)
        let check = kl_exchange_seeded(&p, &SearchConfig { r, ..config.clone() }, &[]).unwrap();
        assert!((check.value - o_inf).abs() <= 1e-9 * (1.0 + o_inf));
        // and r / q^2 must still be strictly above the bound
        let below = kl_exchange_seeded(&p, &SearchConfig { r: r / 4.0, ..config }, &[]).unwrap();
        assert!(below.value > o_inf + 1e-9);
    }

    #[test]
    fn iterative_bound_rejects_bad_input() {
        let p = motivating_problem().unwrap();
        let config = SearchConfig::new(6, 0.0);
        assert!(bound_iterative(&p, 6, 0.1, 0.0, 2.0, &config).is_err());
        assert!(bound_iterative(&p, 6, 0.1, 0.3, 1.0, &config).is_err());
        assert!(bound_iterative(&p, 6, -0.1, 0.3, 2.0, &config).is_err());
    }
}
