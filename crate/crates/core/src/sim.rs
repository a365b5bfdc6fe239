//! Monte-Carlo evaluation of a design's discrimination performance: simulate
//! data under a designated true model, fit both models by maximum likelihood
//! (nonlinear least squares), decide via the likelihood ratio, aggregate hit
//! rates.
//!
//! Reproducibility: every replicate draws from counter-derived substreams
//! keyed on `(seed, true-model side, replicate index)`; the two model fits use
//! substreams keyed additionally on the fitted model's *name*, so results are
//! independent of scheduling and of the order in which the models are fitted.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{DesignSpace, DiscriminationProblem, ExactDesign, RegressionModel};
use crate::{mix64, Error, Result};

/// Observation error structure of the data-generating process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    NormalAdditive,
    /// Multiplicative lognormal noise rescaled so each observation keeps its
    /// mean exactly and its standard deviation matches the normal case.
    LognormalRescaled,
}

/// Error model with a base standard deviation and an inflation multiplier;
/// the effective standard deviation is `inflation * sigma`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ErrorModel {
    pub kind: ErrorKind,
    pub sigma: f64,
    pub inflation: f64,
}

impl ErrorModel {
    pub fn normal(sigma: f64, inflation: f64) -> Self {
        Self { kind: ErrorKind::NormalAdditive, sigma, inflation }
    }

    pub fn lognormal(sigma: f64, inflation: f64) -> Self {
        Self { kind: ErrorKind::LognormalRescaled, sigma, inflation }
    }

    pub fn effective_sd(&self) -> f64 {
        self.sigma * self.inflation
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument("error sigma must be positive".into()));
        }
        if !(self.inflation > 0.0 && self.inflation.is_finite()) {
            return Err(Error::InvalidArgument("error inflation must be positive".into()));
        }
        Ok(())
    }

    /// Human-readable descriptor recorded in reports.
    pub fn describe(&self) -> String {
        match self.kind {
            ErrorKind::NormalAdditive => {
                format!("normal-additive(sd = {} x {})", self.inflation, self.sigma)
            }
            ErrorKind::LognormalRescaled => format!(
                "lognormal-multiplicative-rescaled(mean-preserving, sd = {} x {})",
                self.inflation, self.sigma
            ),
        }
    }
}

/// Settings of the multistart box-projected Levenberg-Marquardt fitter.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FitConfig {
    /// Total number of starts: the nominal parameters plus uniform draws.
    pub multistarts: usize,
    pub max_iterations: usize,
    /// Convergence when the projected gradient falls below
    /// `gradient_tol * (1 + sse)`.
    pub gradient_tol: f64,
    /// Extra starts are drawn uniformly from the nominal parameters dilated by
    /// this many unit half-widths, clipped to the parameter box.
    pub start_dilation: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { multistarts: 5, max_iterations: 200, gradient_tol: 1e-8, start_dilation: 10.0 }
    }
}

/// Simulation settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    /// Replicates per true model.
    pub replicates: usize,
    pub seed: u64,
    /// Parameter perturbation: true parameters are drawn uniformly from the
    /// nominal values plus/minus `perturbation_c` half-widths.
    pub perturbation_c: f64,
    pub error: ErrorModel,
    pub fit: FitConfig,
    /// Keep per-replicate records in the report.
    pub log_replicates: bool,
}

impl SimConfig {
    pub fn new(replicates: usize, seed: u64, error: ErrorModel) -> Self {
        Self {
            replicates,
            seed,
            perturbation_c: 0.0,
            error,
            fit: FitConfig::default(),
            log_replicates: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be >= 1".into()));
        }
        if !(self.perturbation_c >= 0.0) {
            return Err(Error::InvalidArgument("perturbation must be >= 0".into()));
        }
        if self.fit.multistarts == 0 {
            return Err(Error::InvalidArgument("multistarts must be >= 1".into()));
        }
        self.error.validate()
    }
}

/// Likelihood-ratio decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Model0,
    Model1,
}

/// Smaller residual sum of squares wins; exact ties go to model 0.
pub fn decide(sse0: f64, sse1: f64) -> Decision {
    if sse0 <= sse1 {
        Decision::Model0
    } else {
        Decision::Model1
    }
}

/// One replicate of the per-replicate audit log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub true_model: usize,
    pub index: usize,
    pub data_seed: u64,
    pub sse0: Option<f64>,
    pub sse1: Option<f64>,
    pub decision: Option<Decision>,
}

/// Aggregated simulation outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimReport {
    /// Correct decisions with model 0 resp. model 1 generating the data.
    pub hits0: usize,
    pub hits1: usize,
    /// Replicates per true model.
    pub n: usize,
    pub fit_failures0: usize,
    pub fit_failures1: usize,
    pub ties: usize,
    /// Replicates where the best fitted sse exceeded the sse at the
    /// generating parameters.
    pub quality_violations: usize,
    pub seed: u64,
    pub error: String,
    pub fd_gradients: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<ReplicateRecord>>,
}

impl SimReport {
    /// Hit rate with failed fits excluded from the denominator.
    pub fn hit_rate(&self, true_model: usize) -> f64 {
        let (hits, failures) = match true_model {
            0 => (self.hits0, self.fit_failures0),
            _ => (self.hits1, self.fit_failures1),
        };
        let denom = self.n.saturating_sub(failures);
        if denom == 0 {
            f64::NAN
        } else {
            hits as f64 / denom as f64
        }
    }

    /// Hit rate with failed fits counted as misses.
    pub fn hit_rate_total(&self, true_model: usize) -> f64 {
        let hits = if true_model == 0 { self.hits0 } else { self.hits1 };
        hits as f64 / self.n as f64
    }
}

fn name_hash(name: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

const DATA_TAG: u64 = 0xDA7A;
const SIDE_TAG: u64 = 0x51DE;
const BATCH_TAG: u64 = 0xBA7C;

/// Draws one observation vector for `model` at `theta_true` on the design.
///
/// Normal-additive: `y_i = eta_i + N(0, sd^2)`. Lognormal-rescaled:
/// `y_i = eta_i * exp(z_i - s_i^2/2)` with `z_i ~ N(0, s_i^2)` and
/// `s_i^2 = ln(1 + (sd/eta_i)^2)`, which preserves `E[y_i] = eta_i` exactly
/// and gives every observation the standard deviation `sd`.
pub fn simulate_observations(
    model: &RegressionModel,
    theta_true: &[f64],
    space: &DesignSpace,
    design: &ExactDesign,
    error: &ErrorModel,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    error.validate()?;
    let sd = error.effective_sd();
    let mut out = Vec::with_capacity(design.n());
    for (idx, c) in design.counts() {
        let mu = model.mean(theta_true, space.point(idx))?;
        for _ in 0..c {
            let z: f64 = rng.sample(StandardNormal);
            let y = match error.kind {
                ErrorKind::NormalAdditive => mu + sd * z,
                ErrorKind::LognormalRescaled => {
                    if mu <= 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "lognormal errors need positive means, got {mu} at point {idx}"
                        )));
                    }
                    let s2 = (1.0 + (sd / mu).powi(2)).ln();
                    mu * (s2.sqrt() * z - 0.5 * s2).exp()
                }
            };
            out.push(y);
        }
    }
    Ok(out)
}

fn sse_at(
    model: &RegressionModel,
    theta: &[f64],
    points: &[usize],
    space: &DesignSpace,
    y: &[f64],
) -> Result<f64> {
    let mut sse = 0.0;
    for (row, &idx) in points.iter().enumerate() {
        let r = model.mean(theta, space.point(idx))? - y[row];
        sse += r * r;
    }
    Ok(sse)
}

/// Box-projected damped Gauss-Newton from one start.
fn lm_from_start(
    model: &RegressionModel,
    points: &[usize],
    space: &DesignSpace,
    y: &[f64],
    start: &[f64],
    cfg: &FitConfig,
) -> Result<(Vec<f64>, f64, bool)> {
    let m = model.param_dim();
    let n = points.len();
    let mut theta = start.to_vec();
    model.clamp(&mut theta);
    let mut sse = sse_at(model, &theta, points, space, y)?;
    let mut lambda = 1e-3;
    let lower = model.param_lower().to_vec();
    let upper = model.param_upper().to_vec();

    let mut jac = DMatrix::zeros(n, m);
    let mut resid = DVector::zeros(n);
    for _ in 0..cfg.max_iterations {
        for (row, &idx) in points.iter().enumerate() {
            let x = space.point(idx);
            let g = model.gradient(&theta, x)?;
            for j in 0..m {
                jac[(row, j)] = g[j];
            }
            resid[row] = model.mean(&theta, x)? - y[row];
        }
        let grad = jac.transpose() * &resid;
        let mut violation = 0.0f64;
        for j in 0..m {
            let v = if theta[j] <= lower[j] {
                (-grad[j]).max(0.0)
            } else if theta[j] >= upper[j] {
                grad[j].max(0.0)
            } else {
                grad[j].abs()
            };
            violation = violation.max(v);
        }
        if violation <= cfg.gradient_tol * (1.0 + sse) {
            return Ok((theta, sse, true));
        }

        let jtj = jac.transpose() * &jac;
        let mut accepted = false;
        while lambda <= 1e12 {
            let mut damped = jtj.clone();
            for j in 0..m {
                damped[(j, j)] += lambda * jtj[(j, j)].max(1e-12);
            }
            let step = match damped.cholesky() {
                Some(chol) => chol.solve(&(-&grad)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let mut trial: Vec<f64> = (0..m).map(|j| theta[j] + step[j]).collect();
            model.clamp(&mut trial);
            let trial_sse = sse_at(model, &trial, points, space, y)?;
            if trial_sse < sse {
                theta = trial;
                sse = trial_sse;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No acceptable damped step left; report the best point found.
            return Ok((theta, sse, false));
        }
    }
    Ok((theta, sse, false))
}

/// Multistart maximum-likelihood fit (least squares under the error models
/// used here). Starts at the supplied nominal parameters plus uniform draws
/// from the dilated box; the best sse over all starts is returned. Errors with
/// `FitFailure` only when no start converges.
pub fn fit_mle(
    model: &RegressionModel,
    space: &DesignSpace,
    design: &ExactDesign,
    y: &[f64],
    nominal: &[f64],
    halfwidth: &[f64],
    cfg: &FitConfig,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, f64)> {
    if y.len() != design.n() {
        return Err(Error::InvalidArgument(format!(
            "observation vector has length {}, design has {} trials",
            y.len(),
            design.n()
        )));
    }
    let points = design.expand();
    let m = model.param_dim();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut any_converged = false;
    for s in 0..cfg.multistarts {
        let start: Vec<f64> = if s == 0 {
            nominal.to_vec()
        } else {
            (0..m)
                .map(|j| nominal[j] + cfg.start_dilation * halfwidth[j] * rng.gen_range(-1.0..1.0))
                .collect()
        };
        let (theta, sse, converged) = lm_from_start(model, &points, space, y, &start, cfg)?;
        any_converged |= converged;
        if best.as_ref().map_or(true, |(_, b)| sse < *b) {
            best = Some((theta, sse));
        }
    }
    if !any_converged {
        return Err(Error::FitFailure(format!(
            "no start of the {} fit converged in {} iterations",
            model.name(),
            cfg.max_iterations
        )));
    }
    Ok(best.expect("multistarts >= 1"))
}

struct ReplicateOutcome {
    hit: Option<bool>,
    failed: bool,
    tie: bool,
    quality_violation: bool,
    record: Option<ReplicateRecord>,
}

#[allow(clippy::too_many_arguments)]
fn run_replicate(
    problem: &DiscriminationProblem,
    design: &ExactDesign,
    sim: &SimConfig,
    true_model: usize,
    side_seed: u64,
    index: usize,
) -> Result<ReplicateOutcome> {
    let space = problem.space();
    let data_seed = mix64(side_seed, index as u64, DATA_TAG);
    let mut data_rng = ChaCha8Rng::seed_from_u64(data_seed);

    let model_t = problem.model(true_model);
    let nominal = problem.theta_nom(true_model);
    let hw = problem.halfwidth(true_model);
    let mut theta_true: Vec<f64> = (0..problem.param_dim())
        .map(|j| nominal[j] + sim.perturbation_c * hw[j] * data_rng.gen_range(-1.0..1.0))
        .collect();
    model_t.clamp(&mut theta_true);

    let y = simulate_observations(model_t, &theta_true, space, design, &sim.error, &mut data_rng)?;
    let points = design.expand();
    let sse_true = sse_at(model_t, &theta_true, &points, space, &y)?;

    let fit_side = |k: usize| -> Result<Option<f64>> {
        let model = problem.model(k);
        let fit_seed = mix64(side_seed, index as u64, name_hash(model.name()));
        let mut rng = ChaCha8Rng::seed_from_u64(fit_seed);
        match fit_mle(
            model,
            space,
            design,
            &y,
            problem.theta_nom(k),
            problem.halfwidth(k),
            &sim.fit,
            &mut rng,
        ) {
            Ok((_, sse)) => Ok(Some(sse)),
            Err(Error::FitFailure(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let sse0 = fit_side(0)?;
    let sse1 = fit_side(1)?;

    let mut outcome = ReplicateOutcome {
        hit: None,
        failed: false,
        tie: false,
        quality_violation: false,
        record: None,
    };
    let mut decision = None;
    match (sse0, sse1) {
        (Some(s0), Some(s1)) => {
            let d = decide(s0, s1);
            decision = Some(d);
            let decided = match d {
                Decision::Model0 => 0,
                Decision::Model1 => 1,
            };
            outcome.hit = Some(decided == true_model);
            outcome.tie = s0 == s1;
            let fitted_true = if true_model == 0 { s0 } else { s1 };
            outcome.quality_violation = fitted_true > sse_true + 1e-9 * (1.0 + sse_true);
        }
        _ => outcome.failed = true,
    }
    if sim.log_replicates {
        outcome.record = Some(ReplicateRecord {
            true_model,
            index,
            data_seed,
            sse0,
            sse1,
            decision,
        });
    }
    Ok(outcome)
}

/// One side of the simulation: `replicates` data sets generated under
/// `true_model`, both models fitted, decisions tallied. Exposed with an
/// explicit stream seed so label-swap symmetry can be exercised exactly.
pub fn run_side(
    problem: &DiscriminationProblem,
    design: &ExactDesign,
    sim: &SimConfig,
    true_model: usize,
    side_seed: u64,
) -> Result<Vec<ReplicateRecord>> {
    sim.validate()?;
    let outcomes: Vec<ReplicateRecord> = (0..sim.replicates)
        .into_par_iter()
        .map(|i| {
            let mut s = sim.clone();
            s.log_replicates = true;
            run_replicate(problem, design, &s, true_model, side_seed, i)
                .map(|o| o.record.expect("requested"))
        })
        .collect::<Result<_>>()?;
    Ok(outcomes)
}

/// Full simulation: for each true model and replicate, draw parameters from
/// the perturbation box, simulate, fit both models, decide, and count hits.
/// Bit-reproducible from the seed; replicates run in parallel and reduce by
/// integer counts, so scheduling cannot change the result.
pub fn run_simulation(
    problem: &DiscriminationProblem,
    design: &ExactDesign,
    sim: &SimConfig,
) -> Result<SimReport> {
    sim.validate()?;
    let mut report = SimReport {
        hits0: 0,
        hits1: 0,
        n: sim.replicates,
        fit_failures0: 0,
        fit_failures1: 0,
        ties: 0,
        quality_violations: 0,
        seed: sim.seed,
        error: sim.error.describe(),
        fd_gradients: problem.model0().uses_fd_gradient() || problem.model1().uses_fd_gradient(),
        records: if sim.log_replicates { Some(Vec::new()) } else { None },
    };
    for true_model in 0..2 {
        let side_seed = mix64(sim.seed, true_model as u64, SIDE_TAG);
        let outcomes: Vec<ReplicateOutcome> = (0..sim.replicates)
            .into_par_iter()
            .map(|i| run_replicate(problem, design, sim, true_model, side_seed, i))
            .collect::<Result<_>>()?;
        for o in outcomes {
            if o.failed {
                if true_model == 0 {
                    report.fit_failures0 += 1;
                } else {
                    report.fit_failures1 += 1;
                }
            } else if o.hit == Some(true) {
                if true_model == 0 {
                    report.hits0 += 1;
                } else {
                    report.hits1 += 1;
                }
            }
            report.ties += usize::from(o.tie);
            report.quality_violations += usize::from(o.quality_violation);
            if let (Some(records), Some(r)) = (report.records.as_mut(), o.record) {
                records.push(r);
            }
        }
    }
    Ok(report)
}

/// One cell of a hit-rate table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HitRateCell {
    pub design: String,
    pub perturbation_c: f64,
    pub inflation: f64,
    pub report: Option<SimReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Hit-rate table over designs and `(perturbation, inflation)` cells. Failing
/// cells are marked and do not abort the batch.
pub fn batch_hit_rates(
    problem: &DiscriminationProblem,
    designs: &[(String, ExactDesign)],
    grid: &[(f64, f64)],
    base: &SimConfig,
) -> Result<Vec<HitRateCell>> {
    if designs.is_empty() {
        return Err(Error::InvalidArgument("design list must be non-empty".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("simulation grid must be non-empty".into()));
    }
    let mut cells = Vec::with_capacity(designs.len() * grid.len());
    for (name, design) in designs {
        for &(c, inflation) in grid {
            let mut sim = base.clone();
            sim.perturbation_c = c;
            sim.error.inflation = inflation;
            let cell = match run_simulation(problem, design, &sim) {
                Ok(report) => HitRateCell {
                    design: name.clone(),
                    perturbation_c: c,
                    inflation,
                    report: Some(report),
                    failure: None,
                },
                Err(e) => HitRateCell {
                    design: name.clone(),
                    perturbation_c: c,
                    inflation,
                    report: None,
                    failure: Some(e.to_string()),
                },
            };
            cells.push(cell);
        }
    }
    Ok(cells)
}

/// Per-batch hit rates for distribution summaries: `batches` independent
/// simulations of `batch_size` replicates each.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatchRates {
    pub batch: usize,
    pub rate0: f64,
    pub rate1: f64,
}

pub fn run_batches(
    problem: &DiscriminationProblem,
    design: &ExactDesign,
    base: &SimConfig,
    batches: usize,
    batch_size: usize,
) -> Result<Vec<BatchRates>> {
    if batches == 0 || batch_size == 0 {
        return Err(Error::InvalidArgument("batches and batch size must be >= 1".into()));
    }
    let mut out = Vec::with_capacity(batches);
    for b in 0..batches {
        let mut sim = base.clone();
        sim.replicates = batch_size;
        sim.seed = mix64(base.seed, b as u64, BATCH_TAG);
        let report = run_simulation(problem, design, &sim)?;
        out.push(BatchRates { batch: b, rate0: report.hit_rate(0), rate1: report.hit_rate(1) });
    }
    Ok(out)
}
