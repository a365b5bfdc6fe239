//! JSON configuration file and problem construction.
//!
//! Flags always override config keys. Schema (all keys optional):
//!
//! ```json
//! {
//!   "problem": {"builtin": "enzyme", "grid": [31, 41]},
//!   "n": 6,
//!   "r": "inf",
//!   "r_list": [0.01, 0.1],
//!   "restarts": 8,
//!   "seed": 1,
//!   "bound_method": "lp",
//!   "r_ini": 0.3,
//!   "q": 1.000001,
//!   "replicates": 10000,
//!   "c_list": [0, 1, 5],
//!   "error_kind": "normal",
//!   "sigma": 0.1526,
//!   "inflation": 2.0,
//!   "batches": 0,
//!   "batch_size": 100,
//!   "output": "out"
//! }
//! ```
//!
//! A problem can also be defined inline from registered models:
//!
//! ```json
//! {
//!   "problem": {
//!     "model0": "competitive",
//!     "model1": "noncompetitive",
//!     "theta0": [7.298, 4.386, 2.582],
//!     "theta1": [8.696, 8.066, 12.057],
//!     "halfwidth0": [0.114, 0.233, 0.145],
//!     "halfwidth1": [0.222, 0.488, 0.671],
//!     "space": {"points": [[0, 0], [30, 40]]}
//!   }
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use deltadesign::model::{builtin_pair, enzyme_problem, model_by_name, DesignSpace};
use deltadesign::{DiscriminationProblem, Error, Result, SearchConfig};

use crate::SearchArgs;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub problem: Option<ProblemSpec>,
    pub n: Option<usize>,
    pub r: Option<String>,
    pub r_list: Option<Vec<f64>>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub max_passes: Option<usize>,
    pub bound_method: Option<String>,
    pub r_ini: Option<f64>,
    pub q: Option<f64>,
    pub replicates: Option<usize>,
    pub c_list: Option<Vec<f64>>,
    pub error_kind: Option<String>,
    pub sigma: Option<f64>,
    pub inflation: Option<f64>,
    pub batches: Option<usize>,
    pub batch_size: Option<usize>,
    pub output: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn search_config(&self, n: usize, r: f64, args: &SearchArgs) -> SearchConfig {
        let mut config = SearchConfig::new(n, r);
        if let Some(restarts) = args.restarts.or(self.restarts) {
            config.restarts = restarts;
        }
        if let Some(seed) = args.seed.or(self.seed) {
            config.seed = seed;
        }
        if let Some(passes) = self.max_passes {
            config.max_passes = passes;
        }
        config
    }
}

/// Problem definition: builtin by name or inline from registered models.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ProblemSpec {
    Builtin {
        builtin: String,
        #[serde(default)]
        grid: Option<[usize; 2]>,
    },
    Inline {
        model0: String,
        model1: String,
        theta0: Vec<f64>,
        theta1: Vec<f64>,
        halfwidth0: Vec<f64>,
        halfwidth1: Vec<f64>,
        space: SpaceSpec,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    /// Axis-aligned grid: per axis `[lo, hi, count]`.
    #[serde(default)]
    pub grid: Option<Vec<[f64; 3]>>,
}

impl SpaceSpec {
    fn build(&self) -> Result<DesignSpace> {
        match (&self.points, &self.grid) {
            (Some(points), None) => DesignSpace::new(points.clone()),
            (None, Some(axes)) => {
                let mut lists: Vec<Vec<f64>> = Vec::new();
                for &[lo, hi, count] in axes {
                    let count = count as usize;
                    if count < 1 {
                        return Err(Error::Parse("grid axis count must be >= 1".into()));
                    }
                    let axis = if count == 1 {
                        vec![lo]
                    } else {
                        (0..count)
                            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                            .collect()
                    };
                    lists.push(axis);
                }
                let mut points = vec![Vec::new()];
                for axis in &lists {
                    let mut next = Vec::with_capacity(points.len() * axis.len());
                    for p in &points {
                        for &v in axis {
                            let mut q = p.clone();
                            q.push(v);
                            next.push(q);
                        }
                    }
                    points = next;
                }
                DesignSpace::new(points)
            }
            _ => Err(Error::Parse("space needs exactly one of `points` or `grid`".into())),
        }
    }
}

/// Resolves the problem from flags and config; flags win.
pub fn load_problem(
    file: &FileConfig,
    flag_problem: &Option<String>,
    flag_grid: &Option<String>,
) -> Result<DiscriminationProblem> {
    if let Some(name) = flag_problem {
        return builtin_with_grid(name, flag_grid.as_deref());
    }
    match &file.problem {
        Some(ProblemSpec::Builtin { builtin, grid }) => {
            let grid_str = flag_grid
                .clone()
                .or_else(|| grid.map(|[a, b]| format!("{a}x{b}")));
            builtin_with_grid(builtin, grid_str.as_deref())
        }
        Some(ProblemSpec::Inline {
            model0,
            model1,
            theta0,
            theta1,
            halfwidth0,
            halfwidth1,
            space,
        }) => DiscriminationProblem::new(
            model_by_name(model0)?,
            model_by_name(model1)?,
            space.build()?,
            theta0.clone(),
            theta1.clone(),
            halfwidth0.clone(),
            halfwidth1.clone(),
        ),
        None => Err(Error::InvalidArgument(
            "no problem given: use --problem or a config file".into(),
        )),
    }
}

fn builtin_with_grid(name: &str, grid: Option<&str>) -> Result<DiscriminationProblem> {
    match (name, grid) {
        ("enzyme", Some(g)) => {
            let (a, b) = g
                .split_once('x')
                .ok_or_else(|| Error::Parse(format!("bad grid {g:?}, expected like 31x41")))?;
            let n1 = a.parse().map_err(|_| Error::Parse(format!("bad grid {g:?}")))?;
            let n2 = b.parse().map_err(|_| Error::Parse(format!("bad grid {g:?}")))?;
            enzyme_problem(n1, n2)
        }
        (_, Some(_)) => Err(Error::InvalidArgument(format!(
            "--grid only applies to the enzyme problem, not {name:?}"
        ))),
        (_, None) => builtin_pair(name),
    }
}

/// Parses a radius: a nonnegative number or `inf`.
pub fn parse_radius(s: &str) -> Result<f64> {
    let r = match s.trim() {
        "inf" | "infinity" | "Inf" => f64::INFINITY,
        t => t.parse().map_err(|_| Error::Parse(format!("bad radius {t:?}")))?,
    };
    if r.is_nan() || r < 0.0 {
        return Err(Error::Parse(format!("radius must be >= 0, got {s:?}")));
    }
    Ok(r)
}
