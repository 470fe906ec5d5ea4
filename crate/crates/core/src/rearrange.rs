//! Distribution functions and decreasing rearrangements.

use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{ConeSpec, WeightedCone};
use crate::error::{Error, Result};
use crate::levels::PiecewiseFn;
use crate::profile::RadialProfile;
use crate::quadrature::gauss_legendre;

/// Nonnegative step function on `(0, ∞)`: value `values[i]` on `(ends[i-1], ends[i])`, with `ends[-1] = 0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepFunction1D {
    ends: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction1D {
    pub fn new(ends: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if ends.len() != values.len() {
            return Err(Error::Validation(format!("{} breakpoints but {} values", ends.len(), values.len())));
        }
        let mut prev = 0.0;
        for &e in &ends {
            if !(e > prev) || !e.is_finite() {
                return Err(Error::Validation(format!("breakpoints must increase from 0, got {e} after {prev}")));
            }
            prev = e;
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Validation(format!("step values must be finite and nonnegative, got {v}")));
        }
        Ok(StepFunction1D { ends, values })
    }

    /// Builds from consecutive `(length, value)` pieces.
    pub fn from_lengths(pieces: &[(f64, f64)]) -> Result<Self> {
        let mut ends = Vec::with_capacity(pieces.len());
        let mut acc = 0.0;
        for &(len, _) in pieces {
            acc += len;
            ends.push(acc);
        }
        StepFunction1D::new(ends, pieces.iter().map(|p| p.1).collect())
    }

    pub fn ends(&self) -> &[f64] {
        &self.ends
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.ends[i - 1]
        }
    }

    pub fn support_end(&self) -> f64 {
        self.ends.last().copied().unwrap_or(0.0)
    }

    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 || t >= self.support_end() {
            return 0.0;
        }
        self.values[self.ends.partition_point(|&e| e <= t)]
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }

    /// Lebesgue measure of `{f > tau}`.
    pub fn distribution_function(&self, tau: f64) -> Result<f64> {
        check_level(tau)?;
        Ok((0..self.len()).filter(|&i| self.values[i] > tau).map(|i| self.ends[i] - self.start(i)).sum())
    }

    pub fn rearrangement(&self) -> StepFunction1D {
        if self.is_nonincreasing() {
            let keep = self.values.iter().rposition(|&v| v > 0.0).map(|i| i + 1).unwrap_or(0);
            return StepFunction1D { ends: self.ends[..keep].to_vec(), values: self.values[..keep].to_vec() };
        }
        let cells: Vec<(f64, f64)> = (0..self.len()).map(|i| (self.ends[i] - self.start(i), self.values[i])).collect();
        sorted_steps(cells)
    }

    pub fn to_piecewise(&self) -> PiecewiseFn {
        let mut edges = Vec::with_capacity(self.len() + 1);
        edges.push(0.0);
        edges.extend_from_slice(&self.ends);
        PiecewiseFn::steps(&edges, &self.values)
    }

    /// `∫_0^∞ f g dt`, exact on the merged breakpoints.
    pub fn integral_product(&self, other: &StepFunction1D) -> f64 {
        let mut cuts: Vec<f64> = self.ends.iter().chain(other.ends.iter()).copied().collect();
        cuts.push(0.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                (w[1] - w[0]) * self.value(mid) * other.value(mid)
            })
            .sum()
    }

    /// CSV with header `t,value`, one row per step with its right end.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "value"])?;
        for (e, v) in self.ends.iter().zip(&self.values) {
            w.write_record([e.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let (mut ends, mut values) = (Vec::new(), Vec::new());
        for row in r.deserialize::<(f64, f64)>() {
            let (t, v) = row?;
            ends.push(t);
            values.push(v);
        }
        StepFunction1D::new(ends, values)
    }
}

fn check_level(tau: f64) -> Result<()> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("distribution threshold must be positive, got {tau}")));
    }
    Ok(())
}

/// Stable sort by value descending, dropping null cells, then accumulate measures.
fn sorted_steps(mut cells: Vec<(f64, f64)>) -> StepFunction1D {
    cells.retain(|c| c.0 > 0.0 && c.1 > 0.0);
    cells.par_sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut ends = Vec::with_capacity(cells.len());
    let mut acc = 0.0;
    for c in &cells {
        acc += c.0;
        ends.push(acc);
    }
    StepFunction1D { ends, values: cells.into_iter().map(|c| c.1).collect() }
}

/// Axis-aligned box split into a regular grid of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub shape: Vec<usize>,
}

impl GridBox {
    pub fn validate(&self, cone: &WeightedCone) -> Result<()> {
        let d = cone.d();
        if self.lower.len() != d || self.upper.len() != d || self.shape.len() != d {
            return Err(Error::Validation(format!("grid box must have {d} entries per axis")));
        }
        for k in 0..d {
            if !(self.upper[k] > self.lower[k]) || self.shape[k] == 0 {
                return Err(Error::Validation(format!("degenerate grid along axis {}", k + 1)));
            }
        }
        if !cone.contains_closure(&self.lower) {
            return Err(Error::Domain("grid box must lie inside the closed cone".into()));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn spacing(&self) -> Vec<f64> {
        (0..self.shape.len()).map(|k| (self.upper[k] - self.lower[k]) / self.shape[k] as f64).collect()
    }

    /// Cell diameter, the grid size entering discretization tolerances.
    pub fn diameter(&self) -> f64 {
        self.spacing().iter().map(|h| h * h).sum::<f64>().sqrt()
    }

    /// Per-axis multi-index of a row-major cell index (last axis fastest).
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.shape.len()];
        for k in (0..self.shape.len()).rev() {
            out[k] = idx % self.shape[k];
            idx /= self.shape[k];
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.shape).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(idx).iter().enumerate().map(|(k, &i)| self.lower[k] + (i as f64 + 0.5) * h[k]).collect()
    }
}

/// Cell-center samples of a function on a grid over the cone, with weighted cell measures.
#[derive(Debug, Clone)]
pub struct SampledField {
    cone: Arc<WeightedCone>,
    grid: GridBox,
    values: Vec<f64>,
    measures: Vec<f64>,
    gradients: Vec<f64>,
}

pub const DEFAULT_CELL_ORDER: usize = 4;

impl SampledField {
    pub fn from_values(cone: Arc<WeightedCone>, grid: GridBox, values: Vec<f64>, cell_order: usize) -> Result<Self> {
        grid.validate(&cone)?;
        if values.len() != grid.cell_count() {
            return Err(Error::Validation(format!("{} values for {} cells", values.len(), grid.cell_count())));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("field value {v} is not finite")));
        }
        if cell_order == 0 {
            return Err(Error::Validation("cell quadrature order must be positive".into()));
        }
        let measures = cell_measures(&cone, &grid, cell_order)?;
        let gradients = gradient_magnitudes(&grid, &values);
        Ok(SampledField { cone, grid, values, measures, gradients })
    }

    pub fn from_fn<F>(cone: Arc<WeightedCone>, grid: GridBox, f: F, cell_order: usize) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        grid.validate(&cone)?;
        let values = (0..grid.cell_count()).map(|i| f(&grid.center(i))).collect();
        SampledField::from_values(cone, grid, values, cell_order)
    }

    /// Field from a JSON header and CSV rows `x_1, ..., x_d, value`, one per cell.
    pub fn from_csv<R: Read>(header: &FieldHeader, reader: R) -> Result<Self> {
        let cone = Arc::new(WeightedCone::new(header.cone.clone())?);
        let grid = GridBox { lower: header.lower.clone(), upper: header.upper.clone(), shape: header.shape.clone() };
        grid.validate(&cone)?;
        let d = cone.d();
        let h = grid.spacing();
        let mut values = vec![f64::NAN; grid.cell_count()];
        let mut r = csv::ReaderBuilder::new().has_headers(header.csv_has_header).from_reader(reader);
        for (line, row) in r.records().enumerate() {
            let row = row?;
            if row.len() != d + 1 {
                return Err(Error::Validation(format!(
                    "row {} has {} columns, expected {}",
                    line + 1,
                    row.len(),
                    d + 1
                )));
            }
            let nums: Vec<f64> = row
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Validation(format!("row {}: {e}", line + 1)))?;
            let multi: Vec<usize> = (0..d)
                .map(|k| {
                    let x = ((nums[k] - grid.lower[k]) / h[k]).floor();
                    if x < 0.0 || x >= grid.shape[k] as f64 {
                        Err(Error::Validation(format!("row {} lies outside the grid box", line + 1)))
                    } else {
                        Ok(x as usize)
                    }
                })
                .collect::<Result<_>>()?;
            let idx = grid.flat_index(&multi);
            if !values[idx].is_nan() {
                return Err(Error::Validation(format!("row {} repeats a cell", line + 1)));
            }
            values[idx] = nums[d];
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Validation("CSV does not cover every grid cell".into()));
        }
        SampledField::from_values(cone, grid, values, header.cell_order.unwrap_or(DEFAULT_CELL_ORDER))
    }

    pub fn cone(&self) -> &Arc<WeightedCone> {
        &self.cone
    }

    pub fn grid(&self) -> &GridBox {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn gradients(&self) -> &[f64] {
        &self.gradients
    }

    pub fn total_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// `μ({|u| > tau})` summed over cells.
    pub fn distribution_function(&self, tau: f64) -> Result<f64> {
        check_level(tau)?;
        Ok(self.values.iter().zip(&self.measures).filter(|(v, _)| v.abs() > tau).map(|(_, m)| m).sum())
    }

    pub fn rearrangement(&self) -> StepFunction1D {
        sorted_steps(self.measures.iter().zip(&self.values).map(|(m, v)| (*m, v.abs())).collect())
    }

    pub fn gradient_rearrangement(&self) -> StepFunction1D {
        sorted_steps(self.measures.iter().zip(&self.gradients).map(|(m, g)| (*m, *g)).collect())
    }

    /// Cells laid end to end in index order: same distribution as `|u|`, not rearranged.
    pub fn to_piecewise(&self) -> PiecewiseFn {
        cells_in_order(&self.measures, &self.values)
    }

    pub fn gradient_piecewise(&self) -> PiecewiseFn {
        cells_in_order(&self.measures, &self.gradients)
    }

    pub fn radial_rearrangement(&self) -> Result<RadialRearrangement> {
        let steps = self.rearrangement();
        let spacing = self.grid.spacing().into_iter().fold(f64::INFINITY, f64::min);
        let interpolant = step_interpolant(self.cone.clone(), &steps, spacing)?;
        Ok(RadialRearrangement { steps, interpolant })
    }
}

fn cells_in_order(measures: &[f64], values: &[f64]) -> PiecewiseFn {
    let mut edges = Vec::with_capacity(measures.len() + 1);
    let mut acc = 0.0;
    edges.push(acc);
    let mut vals = Vec::with_capacity(values.len());
    for (&m, &v) in measures.iter().zip(values) {
        if m > 0.0 {
            acc += m;
            edges.push(acc);
            vals.push(v.abs());
        }
    }
    PiecewiseFn::steps(&edges, &vals)
}

/// Knots `(t_k, f(t_k))` at radii spaced by about `spacing`, closed by `(t_N, 0)`.
///
/// Sampling at the grid resolution rather than at every step keeps ties and
/// near-ties between cells from turning into spurious slopes.
pub fn interpolation_knots(cone: &WeightedCone, steps: &StepFunction1D, spacing: f64) -> Vec<(f64, f64)> {
    if steps.is_empty() {
        return Vec::new();
    }
    let end = steps.support_end();
    let radius = cone.radius_of_measure(end);
    let count = if spacing > 0.0 { (radius / spacing).ceil().max(1.0) as usize } else { steps.len() };
    let mut knots = Vec::with_capacity(count + 1);
    knots.push((0.0, steps.values()[0]));
    for k in 1..count {
        let t = cone.measure_coordinate(radius * k as f64 / count as f64);
        if t > knots[knots.len() - 1].0 && t < end {
            knots.push((t, steps.value(t)));
        }
    }
    knots.push((end, 0.0));
    knots
}

/// Piecewise-affine profile through [`interpolation_knots`] of a nonincreasing step function.
pub fn step_interpolant(cone: Arc<WeightedCone>, steps: &StepFunction1D, spacing: f64) -> Result<RadialProfile> {
    if steps.is_empty() {
        return Ok(RadialProfile::zero(cone));
    }
    let knots = interpolation_knots(&cone, steps, spacing);
    RadialProfile::from_knots(cone, &knots)
}

/// Decreasing rearrangement as steps plus a continuous interpolating profile.
#[derive(Debug, Clone)]
pub struct RadialRearrangement {
    pub steps: StepFunction1D,
    pub interpolant: RadialProfile,
}

/// JSON header accompanying a CSV field import.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub cone: ConeSpec,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub shape: Vec<usize>,
    #[serde(default)]
    pub cell_order: Option<usize>,
    #[serde(default)]
    pub csv_has_header: bool,
}

fn cell_measures(cone: &WeightedCone, grid: &GridBox, order: usize) -> Result<Vec<f64>> {
    let rule = gauss_legendre(order);
    let d = grid.shape.len();
    let h = grid.spacing();
    let n_nodes = rule.len().pow(d as u32);
    (0..grid.cell_count())
        .into_par_iter()
        .map(|idx| {
            let multi = grid.multi_index(idx);
            let mut total = 0.0;
            let mut x = vec![0.0; d];
            for node in 0..n_nodes {
                let mut rem = node;
                let mut weight = 1.0;
                for k in 0..d {
                    let (xi, wi) = rule[rem % rule.len()];
                    rem /= rule.len();
                    let lo = grid.lower[k] + multi[k] as f64 * h[k];
                    x[k] = lo + 0.5 * h[k] * (xi + 1.0);
                    weight *= 0.5 * h[k] * wi;
                }
                total += weight * cone.weight_eval(&x)?;
            }
            Ok(total)
        })
        .collect()
}

fn gradient_magnitudes(grid: &GridBox, values: &[f64]) -> Vec<f64> {
    let d = grid.shape.len();
    let h = grid.spacing();
    (0..values.len())
        .map(|idx| {
            let multi = grid.multi_index(idx);
            let mut sq = 0.0;
            for k in 0..d {
                let n = grid.shape[k];
                if n < 2 {
                    continue;
                }
                let at = |i: usize| {
                    let mut m = multi.clone();
                    m[k] = i;
                    values[grid.flat_index(&m)]
                };
                let i = multi[k];
                let deriv = if i == 0 {
                    (at(1) - at(0)) / h[k]
                } else if i == n - 1 {
                    (at(n - 1) - at(n - 2)) / h[k]
                } else {
                    (at(i + 1) - at(i - 1)) / (2.0 * h[k])
                };
                sq += deriv * deriv;
            }
            sq.sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halfplane() -> Arc<WeightedCone> {
        Arc::new(WeightedCone::builtin("halfplane-x1").unwrap())
    }

    #[test]
    fn step_distribution_examples() {
        let f = StepFunction1D::new(vec![1.0, 4.0], vec![3.0, 1.0]).unwrap();
        assert_eq!(f.distribution_function(2.0).unwrap(), 1.0);
        assert_eq!(f.distribution_function(5.0).unwrap(), 0.0);
        assert!(matches!(f.distribution_function(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn sort_oracle_example() {
        let f = StepFunction1D::from_lengths(&[(0.5, 1.0), (0.25, 3.0), (0.25, 2.0)]).unwrap();
        let r = f.rearrangement();
        assert_eq!(r.values(), &[3.0, 2.0, 1.0]);
        assert_eq!(r.ends(), &[0.25, 0.5, 1.0]);
        assert_eq!(r.rearrangement(), r);
    }

    #[test]
    fn field_measures_and_rearrangement() {
        let cone = halfplane();
        let grid = GridBox { lower: vec![0.0, -1.0], upper: vec![1.0, 1.0], shape: vec![8, 8] };
        // μ(box) = ∫_0^1 ∫_{-1}^1 x dy dx = 1.
        let f = SampledField::from_fn(cone.clone(), grid.clone(), |_| 1.0, 4).unwrap();
        assert!((f.total_measure() - 1.0).abs() < 1e-14);
        assert!((f.distribution_function(0.5).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(f.distribution_function(2.0).unwrap(), 0.0);
        let zero = SampledField::from_fn(cone, grid, |_| 0.0, 4).unwrap();
        assert!(zero.rearrangement().is_empty());
        assert!(zero.radial_rearrangement().unwrap().interpolant.is_zero());
    }

    #[test]
    fn gradients_of_linear_field() {
        let cone = halfplane();
        let grid = GridBox { lower: vec![0.0, -1.0], upper: vec![1.0, 1.0], shape: vec![5, 7] };
        let f = SampledField::from_fn(cone, grid, |x| 3.0 * x[0] - 4.0 * x[1], 2).unwrap();
        assert!(f.gradients().iter().all(|g| (g - 5.0).abs() < 1e-12));
    }

    #[test]
    fn csv_round_trips() {
        let f = StepFunction1D::new(vec![0.5, 2.0], vec![2.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert_eq!(StepFunction1D::read_csv(buf.as_slice()).unwrap(), f);

        let header = FieldHeader {
            cone: ConeSpec::builtin("halfplane-x1").unwrap(),
            lower: vec![0.0, -1.0],
            upper: vec![1.0, 1.0],
            shape: vec![2, 2],
            cell_order: None,
            csv_has_header: false,
        };
        let rows = "0.25,-0.5,1\n0.25,0.5,2\n0.75,-0.5,3\n0.75,0.5,4\n";
        let field = SampledField::from_csv(&header, rows.as_bytes()).unwrap();
        assert_eq!(field.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(SampledField::from_csv(&header, "0.25,-0.5,1\n".as_bytes()).is_err());
    }
}
