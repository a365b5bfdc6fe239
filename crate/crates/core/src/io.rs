//! File formats of the command-line front end: design CSVs with JSON metadata
//! sidecars, hit-rate CSVs, and bound reports.
//!
//! Numeric CSV fields are written with 17 significant digits so every value
//! round-trips exactly.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundMethod, BoundResult};
use crate::model::{DesignSpace, ExactDesign};
use crate::sim::{BatchRates, HitRateCell};
use crate::{Error, Result};

/// 17-significant-digit rendering; round-trips through `f64` parsing.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v:.16e}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        t => t.parse().map_err(|_| Error::Parse(format!("bad number {t:?}"))),
    }
}

/// Sidecar metadata stored next to a design CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignMeta {
    pub r: f64,
    pub n: usize,
    pub value: f64,
    pub value_sq: f64,
    pub seed: u64,
}

/// Writes a design as CSV: one column per design-space coordinate plus a
/// `count` column, rows in ascending point order.
pub fn write_design_csv(path: &Path, space: &DesignSpace, design: &ExactDesign) -> Result<()> {
    let mut out = String::new();
    let dim = space.dim();
    let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    out.push_str(&header.join(","));
    out.push_str(",count\n");
    for (idx, c) in design.counts() {
        let coords: Vec<String> = space.point(idx).iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&coords.join(","));
        out.push_str(&format!(",{c}\n"));
    }
    write_atomic(path, out.as_bytes())
}

/// Reads a design CSV. Points are matched against `space` when given;
/// otherwise a dedicated space is built from the file's rows.
pub fn read_design_csv(path: &Path, space: Option<&DesignSpace>) -> Result<(DesignSpace, ExactDesign)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Parse("empty design file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.last() != Some(&"count") {
        return Err(Error::Parse("design CSV must end with a `count` column".into()));
    }
    let dim = cols.len() - 1;
    if dim == 0 {
        return Err(Error::Parse("design CSV needs at least one coordinate column".into()));
    }
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim + 1 {
            return Err(Error::Parse(format!(
                "line {}: expected {} fields, got {}",
                lineno + 2,
                dim + 1,
                fields.len()
            )));
        }
        let point: Vec<f64> = fields[..dim].iter().map(|f| parse_f64(f)).collect::<Result<_>>()?;
        let count: usize = fields[dim]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad count {:?}", lineno + 2, fields[dim])))?;
        points.push(point);
        counts.push(count);
    }
    if points.is_empty() {
        return Err(Error::Parse("design CSV has no rows".into()));
    }

    match space {
        Some(space) => {
            let mut map: BTreeMap<usize, usize> = BTreeMap::new();
            for (point, count) in points.iter().zip(&counts) {
                let idx = space
                    .points()
                    .iter()
                    .position(|p| {
                        p.len() == point.len()
                            && p.iter().zip(point).all(|(a, b)| (a - b).abs() <= 1e-12)
                    })
                    .ok_or_else(|| {
                        Error::Parse(format!("design point {point:?} is not in the design space"))
                    })?;
                *map.entry(idx).or_insert(0) += count;
            }
            let design = ExactDesign::from_counts(space, map)?;
            Ok((space.clone(), design))
        }
        None => {
            let own = DesignSpace::new(points)?;
            let design =
                ExactDesign::from_counts(&own, counts.iter().enumerate().map(|(i, &c)| (i, c)))?;
            Ok((own, design))
        }
    }
}

pub fn write_design_meta(path: &Path, meta: &DesignMeta) -> Result<()> {
    let json = serde_json::to_string_pretty(meta)
        .map_err(|e| Error::Parse(format!("meta serialization: {e}")))?;
    write_atomic(path, json.as_bytes())
}

/// Hit-rate table CSV: one row per (design, cell, true model).
pub fn write_hit_rate_csv(path: &Path, cells: &[HitRateCell]) -> Result<()> {
    let mut out = String::from(
        "design,c,inflation,true_model,hits,replicates,fit_failures,rate_excluding_failures,rate_total,status\n",
    );
    for cell in cells {
        for true_model in 0..2usize {
            match (&cell.report, &cell.failure) {
                (Some(rep), _) => {
                    let (hits, failures) = if true_model == 0 {
                        (rep.hits0, rep.fit_failures0)
                    } else {
                        (rep.hits1, rep.fit_failures1)
                    };
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{},ok\n",
                        cell.design,
                        fmt_f64(cell.perturbation_c),
                        fmt_f64(cell.inflation),
                        true_model,
                        hits,
                        rep.n,
                        failures,
                        fmt_f64(rep.hit_rate(true_model)),
                        fmt_f64(rep.hit_rate_total(true_model)),
                    ));
                }
                (None, failure) => {
                    out.push_str(&format!(
                        "{},{},{},{},,,,,,failed: {}\n",
                        cell.design,
                        fmt_f64(cell.perturbation_c),
                        fmt_f64(cell.inflation),
                        true_model,
                        failure.as_deref().unwrap_or("unknown"),
                    ));
                }
            }
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Per-batch rate CSV for distribution summaries.
pub fn write_batch_csv(path: &Path, batches: &[BatchRates]) -> Result<()> {
    let mut out = String::from("batch,rate_model0_true,rate_model1_true\n");
    for b in batches {
        out.push_str(&format!("{},{},{}\n", b.batch, fmt_f64(b.rate0), fmt_f64(b.rate1)));
    }
    write_atomic(path, out.as_bytes())
}

/// Structured text report of a bound computation.
pub fn render_bound_report(result: &BoundResult) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "method: {}\n",
        match result.method {
            BoundMethod::Iterative => "iterative",
            BoundMethod::Lp => "lp",
        }
    ));
    match result.r_star {
        Some(r) => out.push_str(&format!("r_star: {}\n", fmt_f64(r))),
        None => out.push_str(
            "r_star: none\nnote: the all-points equality system is inconsistent; no dilation \
             radius makes the linearized surfaces agree, so no vanishing bound exists along \
             this route\n",
        ),
    }
    out.push_str(&format!("design_computations: {}\n", result.design_computations));
    if let Some((t0, t1)) = &result.certificate {
        let f = |v: &[f64]| v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(", ");
        out.push_str(&format!("certificate_theta0: [{}]\n", f(t0)));
        out.push_str(&format!("certificate_theta1: [{}]\n", f(t1)));
    }
    out
}

pub fn write_bound_report(path: &Path, result: &BoundResult) -> Result<()> {
    write_atomic(path, render_bound_report(result).as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}
