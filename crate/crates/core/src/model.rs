//! Regression models, design spaces, exact designs and the built-in model
//! pairs used throughout the toolkit.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::{Error, Result};

/// Mean function `(theta, x) -> eta`.
pub type MeanFn = Arc<dyn Fn(&[f64], &[f64]) -> Result<f64> + Send + Sync>;
/// Gradient of the mean function with respect to `theta`.
pub type GradientFn = Arc<dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync>;

/// A finite design space: an ordered list of candidate design points.
#[derive(Clone, Debug)]
pub struct DesignSpace {
    points: Vec<Vec<f64>>,
    labels: Option<Vec<String>>,
    dim: usize,
}

impl DesignSpace {
    /// Builds a design space, checking non-emptiness, consistent dimension and
    /// absence of duplicate points.
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("design space must be non-empty".into()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("design points must have dimension >= 1".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "inconsistent design point dimension: expected {dim}, got {}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("design points must be finite".into()));
            }
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i] == points[j] {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate design point at indices {i} and {j}"
                    )));
                }
            }
        }
        Ok(Self { points, labels: None, dim })
    }

    /// Attaches per-point labels (one per point).
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.points.len() {
            return Err(Error::InvalidArgument("label count must match point count".into()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// One-dimensional design space from a list of scalar points.
    pub fn line(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    /// Two-dimensional grid, row-major in the first coordinate.
    pub fn grid2(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let mut pts = Vec::with_capacity(xs.len() * ys.len());
        for &a in xs {
            for &b in ys {
                pts.push(vec![a, b]);
            }
        }
        Self::new(pts)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees non-emptiness
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, idx: usize) -> &[f64] {
        &self.points[idx]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn label(&self, idx: usize) -> Option<&str> {
        self.labels.as_ref().map(|l| l[idx].as_str())
    }
}

/// A regression model: a named mean function with gradient over a parameter box.
#[derive(Clone)]
pub struct RegressionModel {
    name: String,
    param_dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    mean: MeanFn,
    gradient: GradientFn,
    fd_gradient: bool,
}

impl fmt::Debug for RegressionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegressionModel")
            .field("name", &self.name)
            .field("param_dim", &self.param_dim)
            .field("fd_gradient", &self.fd_gradient)
            .finish()
    }
}

impl RegressionModel {
    /// Builds a model with an analytic gradient.
    pub fn new(
        name: impl Into<String>,
        param_dim: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
        mean: MeanFn,
        gradient: GradientFn,
    ) -> Result<Self> {
        Self::build(name.into(), param_dim, lower, upper, mean, Some(gradient))
    }

    /// Builds a model whose gradient is generated by central finite differences.
    /// Reports downstream flag the gradient as finite-difference generated.
    pub fn with_fd_gradient(
        name: impl Into<String>,
        param_dim: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
        mean: MeanFn,
    ) -> Result<Self> {
        Self::build(name.into(), param_dim, lower, upper, mean, None)
    }

    fn build(
        name: String,
        param_dim: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
        mean: MeanFn,
        gradient: Option<GradientFn>,
    ) -> Result<Self> {
        if param_dim == 0 {
            return Err(Error::InvalidArgument("param_dim must be positive".into()));
        }
        if lower.len() != param_dim || upper.len() != param_dim {
            return Err(Error::InvalidArgument("parameter box dimension mismatch".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::InvalidArgument("parameter box must satisfy lower < upper".into()));
        }
        let fd_gradient = gradient.is_none();
        let gradient = gradient.unwrap_or_else(|| {
            let mean = mean.clone();
            Arc::new(move |theta: &[f64], x: &[f64]| finite_difference_gradient(&mean, theta, x))
                as GradientFn
        });
        Ok(Self { name, param_dim, lower, upper, mean, gradient, fd_gradient })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn param_lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn param_upper(&self) -> &[f64] {
        &self.upper
    }

    /// True when the gradient was auto-generated by finite differences.
    pub fn uses_fd_gradient(&self) -> bool {
        self.fd_gradient
    }

    /// Evaluates the mean at `(theta, x)`.
    pub fn mean(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        if theta.len() != self.param_dim {
            return Err(Error::InvalidArgument(format!(
                "model {}: parameter dimension {} != {}",
                self.name,
                theta.len(),
                self.param_dim
            )));
        }
        let v = (self.mean)(theta, x)?;
        if !v.is_finite() {
            return Err(Error::NumericDomain(format!(
                "model {}: non-finite mean at theta={theta:?}, x={x:?}",
                self.name
            )));
        }
        Ok(v)
    }

    /// Evaluates the gradient of the mean with respect to `theta`.
    pub fn gradient(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.param_dim {
            return Err(Error::InvalidArgument(format!(
                "model {}: parameter dimension {} != {}",
                self.name,
                theta.len(),
                self.param_dim
            )));
        }
        let g = (self.gradient)(theta, x)?;
        if g.len() != self.param_dim {
            return Err(Error::NumericDomain(format!(
                "model {}: gradient length {} != {}",
                self.name,
                g.len(),
                self.param_dim
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericDomain(format!(
                "model {}: non-finite gradient at theta={theta:?}, x={x:?}",
                self.name
            )));
        }
        Ok(g)
    }

    /// True when `theta` lies strictly inside the parameter box.
    pub fn strictly_inside(&self, theta: &[f64]) -> bool {
        theta.len() == self.param_dim
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (l, u))| l < t && t < u)
    }

    /// Clamps `theta` componentwise into the parameter box.
    pub fn clamp(&self, theta: &mut [f64]) {
        for ((t, l), u) in theta.iter_mut().zip(&self.lower).zip(&self.upper) {
            *t = t.max(*l).min(*u);
        }
    }
}

fn finite_difference_gradient(mean: &MeanFn, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let mut g = vec![0.0; theta.len()];
    let mut t = theta.to_vec();
    for j in 0..theta.len() {
        let h = 1e-6 * (1.0 + theta[j].abs());
        t[j] = theta[j] + h;
        let up = mean(&t, x)?;
        t[j] = theta[j] - h;
        let dn = mean(&t, x)?;
        t[j] = theta[j];
        g[j] = (up - dn) / (2.0 * h);
    }
    Ok(g)
}

/// An exact design: a multiset of design-space points stored as
/// point-index -> replication count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactDesign {
    counts: BTreeMap<usize, usize>,
    n: usize,
}

impl ExactDesign {
    /// Builds a design from `(point index, count)` pairs; counts must be >= 1
    /// and indices valid for `space`.
    pub fn from_counts<I>(space: &DesignSpace, counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut map = BTreeMap::new();
        for (idx, c) in counts {
            if idx >= space.len() {
                return Err(Error::InvalidArgument(format!(
                    "design point index {idx} out of range (space has {} points)",
                    space.len()
                )));
            }
            if c == 0 {
                return Err(Error::InvalidArgument("replication counts must be >= 1".into()));
            }
            *map.entry(idx).or_insert(0) += c;
        }
        let n: usize = map.values().sum();
        if n == 0 {
            return Err(Error::InvalidArgument("design must contain at least one trial".into()));
        }
        Ok(Self { counts: map, n })
    }

    /// All trials at a single point.
    pub fn singleton(space: &DesignSpace, idx: usize, n: usize) -> Result<Self> {
        Self::from_counts(space, [(idx, n)])
    }

    /// One trial at every point of the space.
    pub fn all_points(space: &DesignSpace) -> Self {
        let counts: BTreeMap<usize, usize> = (0..space.len()).map(|i| (i, 1)).collect();
        let n = space.len();
        Self { counts, n }
    }

    /// Total number of trials.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of distinct support points.
    pub fn support_size(&self) -> usize {
        self.counts.len()
    }

    /// Support iteration in ascending point-index order.
    pub fn counts(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.counts.iter().map(|(&i, &c)| (i, c))
    }

    pub fn count(&self, idx: usize) -> usize {
        self.counts.get(&idx).copied().unwrap_or(0)
    }

    /// Expands to one point index per trial: ascending point index, replications
    /// contiguous. This fixed order makes downstream vectors reproducible.
    pub fn expand(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n);
        for (&idx, &c) in &self.counts {
            out.extend(std::iter::repeat(idx).take(c));
        }
        out
    }

    /// The `s`-fold replication of this design.
    pub fn replicate(&self, s: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::InvalidArgument("replication factor must be >= 1".into()));
        }
        let counts: BTreeMap<usize, usize> = self.counts.iter().map(|(&i, &c)| (i, c * s)).collect();
        Ok(Self { counts, n: self.n * s })
    }

    /// The multiset union of two designs over the same space.
    pub fn concat(&self, other: &Self) -> Self {
        let mut counts = self.counts.clone();
        for (&i, &c) in &other.counts {
            *counts.entry(i).or_insert(0) += c;
        }
        let n = self.n + other.n;
        Self { counts, n }
    }
}

/// A discrimination problem: two rival models with equal parameter dimension,
/// nominal parameter values, unit-cuboid half-widths, and a design space.
#[derive(Clone, Debug)]
pub struct DiscriminationProblem {
    model0: RegressionModel,
    model1: RegressionModel,
    space: DesignSpace,
    theta0_nom: Vec<f64>,
    theta1_nom: Vec<f64>,
    halfwidth0: Vec<f64>,
    halfwidth1: Vec<f64>,
}

impl DiscriminationProblem {
    pub fn new(
        model0: RegressionModel,
        model1: RegressionModel,
        space: DesignSpace,
        theta0_nom: Vec<f64>,
        theta1_nom: Vec<f64>,
        halfwidth0: Vec<f64>,
        halfwidth1: Vec<f64>,
    ) -> Result<Self> {
        let m = model0.param_dim();
        if model1.param_dim() != m {
            return Err(Error::InvalidArgument(
                "models must have equal parameter dimension".into(),
            ));
        }
        if theta0_nom.len() != m || theta1_nom.len() != m {
            return Err(Error::InvalidArgument("nominal parameter dimension mismatch".into()));
        }
        if halfwidth0.len() != m || halfwidth1.len() != m {
            return Err(Error::InvalidArgument("half-width dimension mismatch".into()));
        }
        if halfwidth0.iter().chain(&halfwidth1).any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::InvalidArgument("half-widths must be positive and finite".into()));
        }
        if !model0.strictly_inside(&theta0_nom) {
            return Err(Error::InvalidArgument(format!(
                "nominal parameters of {} must lie strictly inside its parameter box",
                model0.name()
            )));
        }
        if !model1.strictly_inside(&theta1_nom) {
            return Err(Error::InvalidArgument(format!(
                "nominal parameters of {} must lie strictly inside its parameter box",
                model1.name()
            )));
        }
        let problem = Self { model0, model1, space, theta0_nom, theta1_nom, halfwidth0, halfwidth1 };
        // Discriminability: the nominal mean surfaces must differ somewhere.
        let mut max_abs = 0.0f64;
        for i in 0..problem.space.len() {
            max_abs = max_abs.max(problem.delta_eta(i)?.abs());
        }
        if max_abs == 0.0 {
            return Err(Error::InvalidArgument(
                "discriminability violated: nominal mean values agree on the whole design space"
                    .into(),
            ));
        }
        Ok(problem)
    }

    pub fn model0(&self) -> &RegressionModel {
        &self.model0
    }

    pub fn model1(&self) -> &RegressionModel {
        &self.model1
    }

    pub fn model(&self, k: usize) -> &RegressionModel {
        match k {
            0 => &self.model0,
            1 => &self.model1,
            _ => panic!("model index must be 0 or 1"),
        }
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn param_dim(&self) -> usize {
        self.model0.param_dim()
    }

    pub fn theta_nom(&self, k: usize) -> &[f64] {
        match k {
            0 => &self.theta0_nom,
            1 => &self.theta1_nom,
            _ => panic!("model index must be 0 or 1"),
        }
    }

    pub fn halfwidth(&self, k: usize) -> &[f64] {
        match k {
            0 => &self.halfwidth0,
            1 => &self.halfwidth1,
            _ => panic!("model index must be 0 or 1"),
        }
    }

    /// Concatenated nominal vector `(theta0, theta1)` of length `2m`.
    pub fn theta_nom_stacked(&self) -> Vec<f64> {
        let mut v = self.theta0_nom.clone();
        v.extend_from_slice(&self.theta1_nom);
        v
    }

    /// Concatenated half-width vector of length `2m`.
    pub fn halfwidth_stacked(&self) -> Vec<f64> {
        let mut v = self.halfwidth0.clone();
        v.extend_from_slice(&self.halfwidth1);
        v
    }

    /// Nominal mean difference at space point `idx`.
    pub fn delta_eta(&self, idx: usize) -> Result<f64> {
        let x = self.space.point(idx);
        Ok(self.model0.mean(&self.theta0_nom, x)? - self.model1.mean(&self.theta1_nom, x)?)
    }

    /// The same problem over a different design space (used for designs whose
    /// support is not part of the original candidate grid).
    pub fn with_space(&self, space: DesignSpace) -> Result<Self> {
        Self::new(
            self.model0.clone(),
            self.model1.clone(),
            space,
            self.theta0_nom.clone(),
            self.theta1_nom.clone(),
            self.halfwidth0.clone(),
            self.halfwidth1.clone(),
        )
    }

    /// The problem with the two model roles exchanged.
    pub fn swapped(&self) -> Result<Self> {
        Self::new(
            self.model1.clone(),
            self.model0.clone(),
            self.space.clone(),
            self.theta1_nom.clone(),
            self.theta0_nom.clone(),
            self.halfwidth1.clone(),
            self.halfwidth0.clone(),
        )
    }
}

/// Stacks the mean values of `model` over the expanded trials of `design`.
///
/// Replicated points are expanded in ascending point-index order with
/// replications contiguous, so the result is byte-for-byte reproducible.
pub fn mean_vector(
    model: &RegressionModel,
    theta: &[f64],
    space: &DesignSpace,
    design: &ExactDesign,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(design.n());
    for (idx, c) in design.counts() {
        let v = model.mean(theta, space.point(idx))?;
        out.extend(std::iter::repeat(v).take(c));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Built-in models
// ---------------------------------------------------------------------------

/// Straight line through the origin, `eta(theta, x) = theta * x`.
pub fn linear_model() -> RegressionModel {
    RegressionModel::new(
        "linear",
        1,
        vec![-50.0],
        vec![50.0],
        Arc::new(|theta: &[f64], x: &[f64]| Ok(theta[0] * x[0])),
        Arc::new(|_theta: &[f64], x: &[f64]| Ok(vec![x[0]])),
    )
    .expect("static model definition")
}

/// Pure exponential growth, `eta(theta, x) = exp(theta * x)`.
pub fn exponential_model() -> RegressionModel {
    RegressionModel::new(
        "exponential",
        1,
        vec![-10.0],
        vec![10.0],
        Arc::new(|theta: &[f64], x: &[f64]| Ok((theta[0] * x[0]).exp())),
        Arc::new(|theta: &[f64], x: &[f64]| Ok(vec![x[0] * (theta[0] * x[0]).exp()])),
    )
    .expect("static model definition")
}

// Enzyme-kinetics parameter boxes: velocities are positive, inhibition and
// Michaelis constants bounded as in the source data analysis.
const ENZYME_LOWER: [f64; 3] = [1e-6, 1e-6, 1e-6];
const ENZYME_UPPER: [f64; 3] = [1e4, 60.0, 30.0];

/// Competitive-inhibition kinetics
/// `eta(theta, x) = theta1*x1 / (theta2*(1 + x2/theta3) + x1)`.
pub fn competitive_model() -> RegressionModel {
    RegressionModel::new(
        "competitive",
        3,
        ENZYME_LOWER.to_vec(),
        ENZYME_UPPER.to_vec(),
        Arc::new(|t: &[f64], x: &[f64]| {
            if t[2] == 0.0 {
                return Err(Error::NumericDomain("competitive: theta3 = 0".into()));
            }
            let den = t[1] * (1.0 + x[1] / t[2]) + x[0];
            if den == 0.0 {
                return Err(Error::NumericDomain("competitive: zero denominator".into()));
            }
            Ok(t[0] * x[0] / den)
        }),
        Arc::new(|t: &[f64], x: &[f64]| {
            if t[2] == 0.0 {
                return Err(Error::NumericDomain("competitive: theta3 = 0".into()));
            }
            let u = 1.0 + x[1] / t[2];
            let den = t[1] * u + x[0];
            if den == 0.0 {
                return Err(Error::NumericDomain("competitive: zero denominator".into()));
            }
            let d2 = den * den;
            Ok(vec![
                x[0] / den,
                -t[0] * x[0] * u / d2,
                t[0] * x[0] * t[1] * x[1] / (t[2] * t[2] * d2),
            ])
        }),
    )
    .expect("static model definition")
}

/// Noncompetitive-inhibition kinetics
/// `eta(theta, x) = theta1*x1 / ((theta2 + x1)*(1 + x2/theta3))`.
pub fn noncompetitive_model() -> RegressionModel {
    RegressionModel::new(
        "noncompetitive",
        3,
        ENZYME_LOWER.to_vec(),
        ENZYME_UPPER.to_vec(),
        Arc::new(|t: &[f64], x: &[f64]| {
            if t[2] == 0.0 {
                return Err(Error::NumericDomain("noncompetitive: theta3 = 0".into()));
            }
            let den = (t[1] + x[0]) * (1.0 + x[1] / t[2]);
            if den == 0.0 {
                return Err(Error::NumericDomain("noncompetitive: zero denominator".into()));
            }
            Ok(t[0] * x[0] / den)
        }),
        Arc::new(|t: &[f64], x: &[f64]| {
            if t[2] == 0.0 {
                return Err(Error::NumericDomain("noncompetitive: theta3 = 0".into()));
            }
            let u = 1.0 + x[1] / t[2];
            let den = (t[1] + x[0]) * u;
            if den == 0.0 {
                return Err(Error::NumericDomain("noncompetitive: zero denominator".into()));
            }
            let d2 = den * den;
            Ok(vec![
                x[0] / den,
                -t[0] * x[0] * u / d2,
                t[0] * x[0] * (t[1] + x[0]) * x[1] / (t[2] * t[2] * d2),
            ])
        }),
    )
    .expect("static model definition")
}

/// Mean of the encompassing kinetics model
/// `eta = theta1*x1 / (theta2*(1 + x2/theta3) + x1*(1 + (1-lambda)*x2/theta3))`.
///
/// `lambda = 1` reduces to the competitive model and `lambda = 0` to the
/// noncompetitive one.
pub fn encompassing_mean(theta2: &[f64], lambda: f64, x: &[f64]) -> Result<f64> {
    if theta2.len() != 3 {
        return Err(Error::InvalidArgument("encompassing model has 3 parameters".into()));
    }
    if theta2[2] == 0.0 {
        return Err(Error::NumericDomain("encompassing: theta3 = 0".into()));
    }
    let den = theta2[1] * (1.0 + x[1] / theta2[2]) + x[0] * (1.0 + (1.0 - lambda) * x[1] / theta2[2]);
    if den == 0.0 {
        return Err(Error::NumericDomain("encompassing: zero denominator".into()));
    }
    Ok(theta2[0] * x[0] / den)
}

/// The encompassing model with the mixing parameter held fixed.
pub fn encompassing_model(lambda: f64) -> RegressionModel {
    let name = format!("encompassing(lambda={lambda})");
    RegressionModel::new(
        name,
        3,
        ENZYME_LOWER.to_vec(),
        ENZYME_UPPER.to_vec(),
        Arc::new(move |t: &[f64], x: &[f64]| encompassing_mean(t, lambda, x)),
        Arc::new(move |t: &[f64], x: &[f64]| {
            if t[2] == 0.0 {
                return Err(Error::NumericDomain("encompassing: theta3 = 0".into()));
            }
            let u = 1.0 + x[1] / t[2];
            let v = 1.0 + (1.0 - lambda) * x[1] / t[2];
            let den = t[1] * u + x[0] * v;
            if den == 0.0 {
                return Err(Error::NumericDomain("encompassing: zero denominator".into()));
            }
            let d2 = den * den;
            Ok(vec![
                x[0] / den,
                -t[0] * x[0] * u / d2,
                t[0] * x[0] * x[1] * (t[1] + (1.0 - lambda) * x[0]) / (t[2] * t[2] * d2),
            ])
        }),
    )
    .expect("static model definition")
}

/// Looks a built-in model up by name.
///
/// Accepted names: `linear`, `exponential`, `competitive`, `noncompetitive`,
/// and `encompassing:<lambda>`.
pub fn model_by_name(name: &str) -> Result<RegressionModel> {
    match name {
        "linear" => Ok(linear_model()),
        "exponential" => Ok(exponential_model()),
        "competitive" => Ok(competitive_model()),
        "noncompetitive" => Ok(noncompetitive_model()),
        _ => {
            if let Some(rest) = name.strip_prefix("encompassing:") {
                let lambda: f64 = rest
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad lambda in model name {name:?}")))?;
                return Ok(encompassing_model(lambda));
            }
            Err(Error::NotFound(format!("no registered model named {name:?}")))
        }
    }
}

/// The linear-versus-exponential pair on the grid `{1.00, 1.01, ..., 2.00}`.
pub fn motivating_problem() -> Result<DiscriminationProblem> {
    let xs: Vec<f64> = (100..=200).map(|i| i as f64 / 100.0).collect();
    DiscriminationProblem::new(
        linear_model(),
        exponential_model(),
        DesignSpace::line(&xs)?,
        vec![std::f64::consts::E],
        vec![1.0],
        vec![1.0],
        vec![1.0],
    )
}

/// Nominal values for the competitive model (estimates / standard errors).
pub const ENZYME_THETA0: [f64; 3] = [7.298, 4.386, 2.582];
pub const ENZYME_HALFWIDTH0: [f64; 3] = [0.114, 0.233, 0.145];
/// Nominal values for the noncompetitive model (estimates / standard errors).
pub const ENZYME_THETA1: [f64; 3] = [8.696, 8.066, 12.057];
pub const ENZYME_HALFWIDTH1: [f64; 3] = [0.222, 0.488, 0.671];
/// Residual standard deviation of the joint fit underlying the nominal values.
pub const ENZYME_SIGMA: f64 = 0.1526;

/// The enzyme-kinetics pair on an `n1 x n2` grid over `[0,30] x [0,40]`.
pub fn enzyme_problem(n1: usize, n2: usize) -> Result<DiscriminationProblem> {
    if n1 < 2 || n2 < 2 {
        return Err(Error::InvalidArgument("enzyme grid needs at least 2 points per axis".into()));
    }
    let xs: Vec<f64> = (0..n1).map(|i| 30.0 * i as f64 / (n1 - 1) as f64).collect();
    let ys: Vec<f64> = (0..n2).map(|i| 40.0 * i as f64 / (n2 - 1) as f64).collect();
    DiscriminationProblem::new(
        competitive_model(),
        noncompetitive_model(),
        DesignSpace::grid2(&xs, &ys)?,
        ENZYME_THETA0.to_vec(),
        ENZYME_THETA1.to_vec(),
        ENZYME_HALFWIDTH0.to_vec(),
        ENZYME_HALFWIDTH1.to_vec(),
    )
}

/// Built-in discrimination problems by name: `motivating` or `enzyme`
/// (the enzyme pair uses the default 31 x 41 grid).
pub fn builtin_pair(name: &str) -> Result<DiscriminationProblem> {
    match name {
        "motivating" => motivating_problem(),
        "enzyme" => enzyme_problem(31, 41),
        _ => Err(Error::NotFound(format!("no built-in problem named {name:?}"))),
    }
}
