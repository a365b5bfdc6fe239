//! Search for `delta_r`-optimal exact designs: KL exchange with restarts,
//! complete enumeration for small instances, radius sweeps, and efficient
//! rounding of approximate designs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::criterion::{delta_r, DeltaEvaluator};
use crate::linearize::QuadraticForm;
use crate::model::{DiscriminationProblem, ExactDesign};
use crate::{mix64, Error, Result};

/// Parameters of the exchange search.
#[derive(Clone, Debug)]
pub struct SearchConfig {
    /// Design size.
    pub n: usize,
    /// Confidence radius of the criterion (0 <= r <= inf).
    pub r: f64,
    /// Number of restarts; the first two are deterministic seeds, the rest are
    /// random multisets.
    pub restarts: usize,
    /// Seed of the restart stream.
    pub seed: u64,
    /// Cap on exchange passes per restart.
    pub max_passes: usize,
    /// Relative improvement factor: a swap is accepted when it gains more than
    /// `improvement_tol * (1 + value)`.
    pub improvement_tol: f64,
}

impl SearchConfig {
    pub fn new(n: usize, r: f64) -> Self {
        Self { n, r, restarts: 8, seed: 0, max_passes: 200, improvement_tol: 1e-12 }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("design size must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be >= 1".into()));
        }
        if self.r.is_nan() || self.r < 0.0 {
            return Err(Error::InvalidArgument("confidence radius must be >= 0".into()));
        }
        if !(self.improvement_tol >= 0.0) {
            return Err(Error::InvalidArgument("improvement_tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Result of a design search.
#[derive(Clone, Debug)]
pub struct SearchResult {
    pub design: ExactDesign,
    /// `delta_r` of the design, re-evaluated through [`delta_r`].
    pub value: f64,
    /// Squared criterion value (the scale optimal values are quoted on).
    pub value_sq: f64,
    /// Best value reached by each restart, in restart order.
    pub restarts_log: Vec<f64>,
    /// Criterion evaluations performed.
    pub evaluations: u64,
}

/// Exchange state shared by the public entry points.
struct Exchanger<'a> {
    eval: &'a DeltaEvaluator,
    bounds: (nalgebra::DVector<f64>, nalgebra::DVector<f64>),
    r: f64,
    improvement_tol: f64,
    max_passes: usize,
    evaluations: u64,
}

impl<'a> Exchanger<'a> {
    fn new(eval: &'a DeltaEvaluator, config: &SearchConfig) -> Result<Self> {
        Ok(Self {
            eval,
            bounds: eval.bounds(config.r)?,
            r: config.r,
            improvement_tol: config.improvement_tol,
            max_passes: config.max_passes,
            evaluations: 0,
        })
    }

    fn value_of_form(&mut self, form: &QuadraticForm) -> Result<f64> {
        self.evaluations += 1;
        self.eval.value_of_form(form, &self.bounds, self.r)
    }

    /// Best-improvement exchange passes until no single-point swap gains more
    /// than the tolerance. Ties favor the lowest (removed, added) index pair.
    fn optimize(&mut self, counts: &mut [usize]) -> Result<f64> {
        let tables = self.eval.tables();
        let d = counts.len();
        let mut form = tables.quadratic_form_from_counts(counts);
        let mut value = self.value_of_form(&form)?;
        for _pass in 0..self.max_passes {
            let mut best_swap: Option<(usize, usize)> = None;
            let mut best_value = value + self.improvement_tol * (1.0 + value.abs());
            for i in 0..d {
                if counts[i] == 0 {
                    continue;
                }
                // contribution of one trial at i removed once per candidate row
                let mut reduced = form.clone();
                tables.accumulate_point(&mut reduced, i, -1.0);
                for j in 0..d {
                    if j == i {
                        continue;
                    }
                    let mut trial = reduced.clone();
                    tables.accumulate_point(&mut trial, j, 1.0);
                    let v = self.value_of_form(&trial)?;
                    if v > best_value {
                        best_value = v;
                        best_swap = Some((i, j));
                    }
                }
            }
            match best_swap {
                None => break,
                Some((i, j)) => {
                    counts[i] -= 1;
                    counts[j] += 1;
                    tables.accumulate_point(&mut form, i, -1.0);
                    tables.accumulate_point(&mut form, j, 1.0);
                    value = best_value;
                }
            }
        }
        Ok(value)
    }
}

/// Index of the largest nominal mean difference (lowest index on ties).
fn argmax_delta_eta(eval: &DeltaEvaluator) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &de) in eval.tables().delta_eta.iter().enumerate() {
        let v = de.abs();
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    best
}

/// Deterministic spread of `n` trials across the candidate list.
fn uniform_seed(d: usize, n: usize) -> Vec<usize> {
    let mut counts = vec![0usize; d];
    if n >= d {
        // round the uniform weights: everyone gets floor(n/d), first n mod d get one more
        let base = n / d;
        let extra = n % d;
        for (i, c) in counts.iter_mut().enumerate() {
            *c = base + usize::from(i < extra);
        }
    } else if n == 1 {
        counts[0] = 1;
    } else {
        for k in 0..n {
            let idx = (k as f64 * (d - 1) as f64 / (n - 1) as f64).round() as usize;
            counts[idx.min(d - 1)] += 1;
        }
    }
    counts
}

fn counts_to_design(
    problem: &DiscriminationProblem,
    counts: &[usize],
) -> Result<ExactDesign> {
    ExactDesign::from_counts(
        problem.space(),
        counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i, c)),
    )
}

/// KL exchange with restarts. Restart 1 starts from all trials at the point of
/// largest nominal mean difference, restart 2 from a uniform spread, further
/// restarts from random multisets drawn from the seeded generator. The best
/// value wins; ties go to the earliest restart.
pub fn kl_exchange(problem: &DiscriminationProblem, config: &SearchConfig) -> Result<SearchResult> {
    kl_exchange_seeded(problem, config, &[])
}

/// As [`kl_exchange`] with additional caller-provided warm-start designs that
/// are optimized before the standard restarts (used by sweeps and the
/// iterative confidence bound).
pub fn kl_exchange_seeded(
    problem: &DiscriminationProblem,
    config: &SearchConfig,
    warm_starts: &[ExactDesign],
) -> Result<SearchResult> {
    config.validate()?;
    let eval = DeltaEvaluator::new(problem)?;
    let mut ex = Exchanger::new(&eval, config)?;
    let d = eval.space_len();

    let mut starts: Vec<Vec<usize>> = Vec::new();
    for w in warm_starts {
        if w.n() != config.n {
            return Err(Error::InvalidArgument(format!(
                "warm start has size {} but the search asks for {}",
                w.n(),
                config.n
            )));
        }
        let mut counts = vec![0usize; d];
        for (idx, c) in w.counts() {
            counts[idx] += c;
        }
        starts.push(counts);
    }
    {
        let mut counts = vec![0usize; d];
        counts[argmax_delta_eta(&eval)] = config.n;
        starts.push(counts);
    }
    if starts.len() < config.restarts + warm_starts.len() {
        starts.push(uniform_seed(d, config.n));
    }
    while starts.len() < config.restarts + warm_starts.len() {
        // per-restart substream so the start list is independent of evaluation order
        let restart_idx = starts.len() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(mix64(config.seed, restart_idx, 0xD5));
        let mut counts = vec![0usize; d];
        for _ in 0..config.n {
            counts[rng.gen_range(0..d)] += 1;
        }
        starts.push(counts);
    }

    let mut restarts_log = Vec::with_capacity(starts.len());
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mut counts in starts {
        let v = ex.optimize(&mut counts)?;
        restarts_log.push(v);
        if best.as_ref().map_or(true, |(bv, _)| v > *bv) {
            best = Some((v, counts));
        }
    }
    let (_, counts) = best.expect("at least one restart");
    let design = counts_to_design(problem, &counts)?;
    // Re-evaluate through the direct route so the reported value reproduces
    // delta_r(problem, design, r) bit for bit.
    let value = delta_r(problem, &design, config.r)?;
    Ok(SearchResult {
        design,
        value,
        value_sq: value * value,
        restarts_log,
        evaluations: ex.evaluations,
    })
}

/// Number of size-`n` multisets over `d` symbols, saturating.
fn multiset_count(d: usize, n: usize) -> u128 {
    // C(d + n - 1, n)
    let mut num: u128 = 1;
    for k in 0..n {
        let f = (d as u128).saturating_add(n as u128 - 1 - k as u128);
        num = num.saturating_mul(f) / (k as u128 + 1);
        if num > u128::MAX / 2 {
            return u128::MAX;
        }
    }
    num
}

const ENUMERATION_GUARD: u128 = 10_000_000;

/// Exact global optimum over all `n`-trial designs by complete enumeration.
/// Ties are resolved to the first design in lexicographic enumeration order.
pub fn enumerate_optimal(
    problem: &DiscriminationProblem,
    n: usize,
    r: f64,
) -> Result<SearchResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("design size must be >= 1".into()));
    }
    let d = problem.space().len();
    let candidates = multiset_count(d, n);
    if candidates > ENUMERATION_GUARD {
        return Err(Error::EnumerationGuard { candidates, guard: ENUMERATION_GUARD });
    }
    let eval = DeltaEvaluator::new(problem)?;
    let bounds = eval.bounds(r)?;
    let tables = eval.tables();

    // non-decreasing index tuples = multisets, visited in lexicographic order
    let mut tuple = vec![0usize; n];
    let mut evaluations = 0u64;
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let mut form = QuadraticForm::zeros(tables.theta_nom.len());
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &i in &tuple {
            *counts.entry(i).or_insert(0) += 1;
        }
        for (&i, &c) in &counts {
            tables.accumulate_point(&mut form, i, c as f64);
        }
        let v = eval.value_of_form(&form, &bounds, r)?;
        evaluations += 1;
        if best.as_ref().map_or(true, |(bv, _)| v > *bv) {
            best = Some((v, tuple.clone()));
        }
        // advance the odometer
        let mut pos = n;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            if tuple[pos] + 1 < d {
                let next = tuple[pos] + 1;
                for t in tuple.iter_mut().skip(pos) {
                    *t = next;
                }
                break;
            }
            if pos == 0 {
                pos = usize::MAX;
                break;
            }
        }
        if pos == usize::MAX {
            break;
        }
    }

    let (_, tuple) = best.expect("enumeration visits at least one design");
    let mut counts = vec![0usize; d];
    for &i in &tuple {
        counts[i] += 1;
    }
    let design = counts_to_design(problem, &counts)?;
    let value = delta_r(problem, &design, r)?;
    Ok(SearchResult {
        design,
        value,
        value_sq: value * value,
        restarts_log: vec![value],
        evaluations,
    })
}

/// Optimal designs over a sorted list of radii. Each search is warm-started
/// with the previous radius' optimum; the optimal values must come out
/// non-increasing, which is verified before returning.
pub fn sweep_r(
    problem: &DiscriminationProblem,
    n: usize,
    r_list: &[f64],
    base: &SearchConfig,
) -> Result<Vec<(f64, SearchResult)>> {
    if r_list.is_empty() {
        return Err(Error::InvalidArgument("radius list must be non-empty".into()));
    }
    if r_list.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidArgument("radius list must be sorted ascending".into()));
    }
    let mut out: Vec<(f64, SearchResult)> = Vec::with_capacity(r_list.len());
    let mut prev_design: Option<ExactDesign> = None;
    for &r in r_list {
        let config = SearchConfig { n, r, ..base.clone() };
        let warm: Vec<ExactDesign> = prev_design.iter().cloned().collect();
        let res = kl_exchange_seeded(problem, &config, &warm)?;
        if let Some((_, last)) = out.last() {
            if res.value > last.value + 1e-9 * (1.0 + last.value) {
                return Err(Error::SolverFailure(format!(
                    "sweep produced a non-monotone optimal value: {} at r={} after {} at r={}",
                    res.value,
                    r,
                    last.value,
                    out.last().unwrap().0
                )));
            }
        }
        prev_design = Some(res.design.clone());
        out.push((r, res));
    }
    Ok(out)
}

/// Efficient apportionment of approximate-design weights into an exact design
/// of size `n`: start from `ceil((n - l/2) w_i)` and repair the total with
/// quotient-ordered increments/decrements. Every support point keeps at least
/// one trial.
pub fn round_approximate(
    weights: &BTreeMap<usize, f64>,
    n: usize,
    space_len: usize,
) -> Result<Vec<(usize, usize)>> {
    let support: Vec<(usize, f64)> =
        weights.iter().filter(|(_, &w)| w != 0.0).map(|(&i, &w)| (i, w)).collect();
    if support.iter().any(|&(i, w)| i >= space_len || !w.is_finite() || w < 0.0) {
        return Err(Error::InvalidArgument("weights must be nonnegative on valid points".into()));
    }
    let l = support.len();
    if l == 0 {
        return Err(Error::InvalidArgument("weights must have non-empty support".into()));
    }
    if l > n {
        return Err(Error::InvalidArgument(format!(
            "support size {l} exceeds the design size {n}"
        )));
    }
    let total: f64 = support.iter().map(|&(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("weights must sum to 1, got {total}")));
    }

    let mut counts: Vec<usize> = support
        .iter()
        .map(|&(_, w)| ((n as f64 - l as f64 / 2.0) * w).ceil().max(1.0) as usize)
        .collect();
    let mut sum: usize = counts.iter().sum();
    while sum > n {
        // decrement the point with the largest (n_i - 1) / w_i
        let mut pick = None;
        let mut pick_val = f64::NEG_INFINITY;
        for (k, &(_, w)) in support.iter().enumerate() {
            if counts[k] <= 1 {
                continue;
            }
            let v = (counts[k] as f64 - 1.0) / w;
            if v > pick_val {
                pick_val = v;
                pick = Some(k);
            }
        }
        let k = pick.ok_or_else(|| {
            Error::InvalidArgument("cannot reduce design without emptying a support point".into())
        })?;
        counts[k] -= 1;
        sum -= 1;
    }
    while sum < n {
        // increment the point with the smallest n_i / w_i
        let mut pick = 0;
        let mut pick_val = f64::INFINITY;
        for (k, &(_, w)) in support.iter().enumerate() {
            let v = counts[k] as f64 / w;
            if v < pick_val {
                pick_val = v;
                pick = k;
            }
        }
        counts[pick] += 1;
        sum += 1;
    }
    Ok(support.iter().map(|&(i, _)| i).zip(counts).collect())
}

/// [`round_approximate`] returning an [`ExactDesign`] over the problem's space.
pub fn round_approximate_design(
    problem: &DiscriminationProblem,
    weights: &BTreeMap<usize, f64>,
    n: usize,
) -> Result<ExactDesign> {
    let counts = round_approximate(weights, n, problem.space().len())?;
    ExactDesign::from_counts(problem.space(), counts)
}
