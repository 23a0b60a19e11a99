//! δ-hallucination verdicts and the regions around them.
//!
//! For a state `i` the high-conditional-density region is
//! `U_i^δ = {a : f_i(a) > δ}`; an estimate δ-hallucinates exactly when it lies
//! in none of them. For Gaussian states these sets are ellipsoids and are
//! handled analytically. Arbitrary densities get a grid treatment in one or
//! two dimensions and a density-quantile sampling treatment otherwise.

use std::io::Write;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{HalluError, Result};
use crate::mixture::{ComponentDoc, GaussianComponent, LatentMixture};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HallucinationVerdict {
    pub hallucinates: bool,
    pub delta: f64,
    /// Conditional density of each state at the estimate.
    pub per_state_density: Vec<f64>,
    /// `max_i per_state_density − δ`; nonpositive iff the estimate hallucinates.
    pub margin: f64,
}

impl HallucinationVerdict {
    pub fn from_densities(per_state_density: Vec<f64>, delta: f64) -> Self {
        let max = per_state_density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let margin = max - delta;
        Self { hallucinates: margin <= 0.0, delta, per_state_density, margin }
    }

    pub fn max_density(&self) -> f64 {
        self.margin + self.delta
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(HalluError::input(format!("delta must lie in (0, 1], got {delta}")));
    }
    Ok(())
}

/// Decide whether `estimate` δ-hallucinates under `mixture`: every conditional
/// density at the estimate is at most δ.
pub fn delta_hallucinates(mixture: &LatentMixture, estimate: &[f64], delta: f64) -> Result<HallucinationVerdict> {
    check_delta(delta)?;
    let dens = mixture.component_densities(estimate)?;
    Ok(HallucinationVerdict::from_densities(dens, delta))
}

/// `max_i f_i(point)`: the largest conditional density, as opposed to the
/// marginal density which averages the modes away.
pub fn max_conditional_density(mixture: &LatentMixture, point: &[f64]) -> Result<f64> {
    Ok(mixture
        .component_densities(point)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Radius of the smallest ball centered at the component mean that contains
/// `{a : f(a) > δ}`. Zero when that set is empty.
///
/// The set is the ellipsoid `(a−μ)ᵀΣ⁻¹(a−μ) < 2 ln(peak/δ)`, whose farthest
/// point from the center sits on the principal axis.
pub fn covering_radius(component: &GaussianComponent, delta: f64) -> f64 {
    if delta <= 0.0 {
        return f64::INFINITY;
    }
    let level = component.log_peak_density() - delta.ln();
    if level <= 0.0 {
        return 0.0;
    }
    (2.0 * level).sqrt() * component.max_eigenvalue().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringRadii {
    pub per_state: Vec<f64>,
    pub uniform: f64,
}

impl CoveringRadii {
    pub fn new(mixture: &LatentMixture, delta: f64) -> Self {
        let per_state: Vec<f64> = mixture.components().iter().map(|c| covering_radius(c, delta)).collect();
        let uniform = per_state.iter().cloned().fold(0.0, f64::max);
        Self { per_state, uniform }
    }
}

/// One axis of a regular grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Axis {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.width()
    }

    fn locate(&self, x: f64) -> Option<usize> {
        if x < self.lo || x >= self.hi {
            return None;
        }
        Some((((x - self.lo) / self.width()) as usize).min(self.cells - 1))
    }
}

/// Cell-wise membership over a 1-D or 2-D grid. Cells are stored with the
/// last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRegion {
    pub axes: Vec<Axis>,
    #[serde(skip)]
    pub density: Vec<f64>,
    #[serde(skip)]
    pub member: Vec<bool>,
}

impl GridRegion {
    pub fn len(&self) -> usize {
        self.member.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::width).product()
    }

    pub fn cell_center(&self, idx: usize) -> Vec<f64> {
        match self.axes.as_slice() {
            [a] => vec![a.center(idx)],
            [a, b] => vec![a.center(idx / b.cells), b.center(idx % b.cells)],
            _ => unreachable!("grids are 1-D or 2-D"),
        }
    }

    /// Whether the cell containing `point` is a member; points off the grid are not.
    pub fn contains(&self, point: &[f64]) -> bool {
        let idx = match (self.axes.as_slice(), point) {
            ([a], [x]) => a.locate(*x),
            ([a, b], [x, y]) => a.locate(*x).zip(b.locate(*y)).map(|(i, j)| i * b.cells + j),
            _ => None,
        };
        idx.is_some_and(|i| self.member[i])
    }

    pub fn member_count(&self) -> usize {
        self.member.iter().filter(|m| **m).count()
    }

    /// Every member cell of `self` is a member of `other` (same grid required).
    pub fn is_subset_of(&self, other: &GridRegion) -> bool {
        self.axes == other.axes && self.member.iter().zip(&other.member).all(|(a, b)| !a || *b)
    }

    /// Maximal runs of member cells along a 1-D grid, as `(lo edge, hi edge)`.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let [axis] = self.axes.as_slice() else {
            return Vec::new();
        };
        let w = axis.width();
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        for (k, m) in self.member.iter().enumerate() {
            match (m, start) {
                (true, None) => start = Some(k),
                (false, Some(s)) => {
                    out.push((axis.lo + s as f64 * w, axis.lo + k as f64 * w));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((axis.lo + s as f64 * w, axis.hi));
        }
        out
    }

    /// CSV with one row per cell: coordinates, density, membership flag (0/1).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = ["x", "y"][..self.axes.len()].to_vec();
        header.extend(["density", "member"]);
        w.write_record(&header)?;
        for idx in 0..self.len() {
            let mut row: Vec<String> = self.cell_center(idx).iter().map(|v| v.to_string()).collect();
            row.push(self.density[idx].to_string());
            row.push(u8::from(self.member[idx]).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityRegion {
    /// `{a : (a−c)ᵀΣ⁻¹(a−c) < 2·level}`; empty when `level ≤ 0`.
    AnalyticEllipsoid { center: Vec<f64>, level: f64, component: ComponentDoc },
    Grid(GridRegion),
    /// `{a : f(a) ≥ threshold}` for a referenced density.
    Threshold { threshold: f64 },
}

impl DensityRegion {
    pub fn is_empty(&self) -> bool {
        match self {
            DensityRegion::AnalyticEllipsoid { level, .. } => *level <= 0.0,
            DensityRegion::Grid(g) => g.member_count() == 0,
            DensityRegion::Threshold { .. } => false,
        }
    }
}

/// A density the HDR routines can evaluate and sample.
pub trait Density: Sync {
    fn dim(&self) -> usize;
    fn density_at(&self, point: &[f64]) -> f64;
    fn draw(&self, rng: &mut dyn RngCore) -> Vec<f64>;
    /// Axis-aligned box holding all but a negligible tail.
    fn bounding_box(&self, sigmas: f64) -> Vec<(f64, f64)>;
}

impl Density for GaussianComponent {
    fn dim(&self) -> usize {
        GaussianComponent::dim(self)
    }

    fn density_at(&self, point: &[f64]) -> f64 {
        self.density(point).expect("grid points match the density dimension")
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.sample(rng)
    }

    fn bounding_box(&self, sigmas: f64) -> Vec<(f64, f64)> {
        self.mean()
            .iter()
            .enumerate()
            .map(|(k, m)| (m - sigmas * self.axis_std(k), m + sigmas * self.axis_std(k)))
            .collect()
    }
}

impl Density for LatentMixture {
    fn dim(&self) -> usize {
        LatentMixture::dim(self)
    }

    fn density_at(&self, point: &[f64]) -> f64 {
        self.density(point).expect("grid points match the density dimension")
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.sample(rng).1
    }

    fn bounding_box(&self, sigmas: f64) -> Vec<(f64, f64)> {
        let mut bbox = self.components()[0].bounding_box(sigmas);
        for c in &self.components()[1..] {
            for (b, (lo, hi)) in bbox.iter_mut().zip(c.bounding_box(sigmas)) {
                b.0 = b.0.min(lo);
                b.1 = b.1.max(hi);
            }
        }
        bbox
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub cells_per_axis: usize,
    /// Half-width of the grid in standard deviations around each mean.
    pub sigmas: f64,
    /// Explicit bounds; overrides `sigmas` when set.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl GridSpec {
    pub fn for_dim(dim: usize) -> Self {
        let cells_per_axis = if dim == 1 { 65_536 } else { 512 };
        Self { cells_per_axis, sigmas: 8.0, bounds: None }
    }

    fn build(&self, density: &dyn Density) -> Result<Vec<Axis>> {
        let dim = density.dim();
        if !(1..=2).contains(&dim) {
            return Err(HalluError::input(format!(
                "grid method supports dimension 1 or 2, got {dim}"
            )));
        }
        if self.cells_per_axis == 0 {
            return Err(HalluError::input("grid needs at least one cell per axis"));
        }
        let bounds = match &self.bounds {
            Some(b) if b.len() == dim => b.clone(),
            Some(_) => return Err(HalluError::input("grid bounds do not match density dimension")),
            None => density.bounding_box(self.sigmas),
        };
        Ok(bounds
            .into_iter()
            .map(|(lo, hi)| Axis { lo, hi, cells: self.cells_per_axis })
            .collect())
    }
}

/// Evaluate `density` at every cell center.
pub fn evaluate_grid(density: &dyn Density, spec: &GridSpec) -> Result<GridRegion> {
    let axes = spec.build(density)?;
    let total: usize = axes.iter().map(|a| a.cells).product();
    let mut grid = GridRegion { axes, density: Vec::new(), member: vec![false; total] };
    grid.density = (0..total)
        .into_par_iter()
        .map(|idx| density.density_at(&grid.cell_center(idx)))
        .collect();
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub enum HdrMethod {
    Grid(GridSpec),
    /// Threshold at the `(1 − mass)` quantile of density values at draws from the density.
    Sampling { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HdrResult {
    pub threshold: f64,
    pub requested_mass: f64,
    pub achieved_mass: f64,
    /// Binomial standard error of `achieved_mass` (sampling method only).
    pub standard_error: Option<f64>,
    pub region: DensityRegion,
}

/// Highest density region of the given mass, reported as a density cutoff `t`
/// with `∫_{f ≥ t} f ≈ mass`.
pub fn hdr(density: &dyn Density, mass: f64, method: &HdrMethod) -> Result<HdrResult> {
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(HalluError::input(format!("HDR mass must lie in (0, 1], got {mass}")));
    }
    match method {
        HdrMethod::Grid(spec) => hdr_grid(density, mass, spec),
        HdrMethod::Sampling { samples, seed } => hdr_sampling(density, mass, *samples, *seed),
    }
}

fn hdr_grid(density: &dyn Density, mass: f64, spec: &GridSpec) -> Result<HdrResult> {
    let mut grid = evaluate_grid(density, spec)?;
    let vol = grid.cell_volume();
    let threshold = if mass >= 1.0 {
        0.0
    } else {
        let mut order: Vec<usize> = (0..grid.len()).collect();
        order.sort_by(|&a, &b| grid.density[b].total_cmp(&grid.density[a]));
        // Take the prefix whose mass is nearest the request, then put the
        // cutoff midway to the next density so the region edge falls on the
        // cell boundary rather than a cell center.
        let mut cum = 0.0;
        let mut cut = order.len() - 1;
        for (k, &idx) in order.iter().enumerate() {
            let next = cum + grid.density[idx] * vol;
            if next >= mass {
                cut = if (next - mass) <= (mass - cum) || k == 0 { k } else { k - 1 };
                break;
            }
            cum = next;
        }
        let inside = grid.density[order[cut]];
        match order.get(cut + 1) {
            Some(&nx) => 0.5 * (inside + grid.density[nx]),
            None => inside,
        }
    };
    let mut achieved = 0.0;
    for (m, f) in grid.member.iter_mut().zip(&grid.density) {
        *m = *f >= threshold;
        if *m {
            achieved += f * vol;
        }
    }
    Ok(HdrResult {
        threshold,
        requested_mass: mass,
        achieved_mass: achieved,
        standard_error: None,
        region: DensityRegion::Grid(grid),
    })
}

fn hdr_sampling(density: &dyn Density, mass: f64, samples: usize, seed: u64) -> Result<HdrResult> {
    if samples < 2 {
        return Err(HalluError::input("sampling HDR needs at least two samples"));
    }
    let mut draw_rng = rng::stream(seed, "hdr/threshold");
    let mut values: Vec<f64> = (0..samples)
        .map(|_| density.density_at(&density.draw(&mut draw_rng)))
        .collect();
    values.sort_by(f64::total_cmp);
    let threshold = if mass >= 1.0 {
        0.0
    } else {
        let rank = ((1.0 - mass) * samples as f64).floor() as usize;
        values[rank.min(samples - 1)]
    };
    // Independent draws for the achieved-mass estimate.
    let mut check_rng = rng::stream(seed, "hdr/check");
    let inside = (0..samples)
        .filter(|_| density.density_at(&density.draw(&mut check_rng)) >= threshold)
        .count();
    let achieved = inside as f64 / samples as f64;
    let se = (mass * (1.0 - mass) / samples as f64).sqrt();
    Ok(HdrResult {
        threshold,
        requested_mass: mass,
        achieved_mass: achieved,
        standard_error: Some(se),
        region: DensityRegion::Threshold { threshold },
    })
}

/// Exact HDR cutoff of a Gaussian: `peak · exp(−χ²_d(mass)/2)`.
pub fn gaussian_hdr_threshold(component: &GaussianComponent, mass: f64) -> Result<f64> {
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(HalluError::input(format!("HDR mass must lie in (0, 1], got {mass}")));
    }
    if mass >= 1.0 {
        return Ok(0.0);
    }
    let chi = ChiSquared::new(component.dim() as f64).map_err(|e| HalluError::Numerical(e.to_string()))?;
    let q = chi.inverse_cdf(mass);
    Ok((component.log_peak_density() - 0.5 * q).exp())
}

/// Per-state level of an HCDR. A single value is broadcast to all states.
#[derive(Debug, Clone, PartialEq)]
pub enum HcdrLevel {
    /// Density bound δ per state: regions are `U_i^δ`.
    Density(Vec<f64>),
    /// Probability mass per state, converted to each state's HDR cutoff.
    Mass(Vec<f64>),
}

impl HcdrLevel {
    fn per_state(&self, n: usize) -> Result<Vec<f64>> {
        let v = match self {
            HcdrLevel::Density(v) | HcdrLevel::Mass(v) => v,
        };
        match v.len() {
            1 => Ok(vec![v[0]; n]),
            k if k == n => Ok(v.clone()),
            k => Err(HalluError::input(format!("{k} levels given for {n} states"))),
        }
    }
}

/// Highest conditional density region: the union over states of per-state regions.
#[derive(Debug, Clone, Serialize)]
pub struct Hcdr {
    /// Density cutoff per state; membership in state `i` is `f_i(a) > thresholds[i]`.
    pub thresholds: Vec<f64>,
    pub regions: Vec<DensityRegion>,
    #[serde(skip)]
    mixture: LatentMixture,
}

impl Hcdr {
    /// Flags of the states whose region contains `point`.
    pub fn member_states(&self, point: &[f64]) -> Result<Vec<bool>> {
        let dens = self.mixture.component_densities(point)?;
        Ok(dens.iter().zip(&self.thresholds).map(|(f, t)| f > t).collect())
    }

    pub fn contains(&self, point: &[f64]) -> Result<bool> {
        Ok(self.member_states(point)?.into_iter().any(|m| m))
    }

    pub fn mixture(&self) -> &LatentMixture {
        &self.mixture
    }
}

pub fn hcdr(mixture: &LatentMixture, level: &HcdrLevel) -> Result<Hcdr> {
    let n = mixture.n_states();
    let levels = level.per_state(n)?;
    let thresholds = match level {
        HcdrLevel::Density(_) => {
            for d in &levels {
                if !(*d > 0.0) {
                    return Err(HalluError::input(format!("density bound must be positive, got {d}")));
                }
            }
            levels
        }
        HcdrLevel::Mass(_) => mixture
            .components()
            .iter()
            .zip(&levels)
            .map(|(c, m)| gaussian_hdr_threshold(c, *m))
            .collect::<Result<Vec<_>>>()?,
    };
    let regions = mixture
        .components()
        .iter()
        .zip(&thresholds)
        .map(|(c, t)| DensityRegion::AnalyticEllipsoid {
            center: c.mean().to_vec(),
            level: if *t > 0.0 { c.log_peak_density() - t.ln() } else { f64::INFINITY },
            component: ComponentDoc::from(c),
        })
        .collect();
    Ok(Hcdr { thresholds, regions, mixture: mixture.clone() })
}

/// Plot data comparing the marginal HDR with the per-state regions on a grid.
#[derive(Debug, Clone)]
pub struct RegionPlotData {
    pub marginal: HdrResult,
    pub grid: GridRegion,
    /// `per_state[i][cell]`.
    pub per_state: Vec<Vec<bool>>,
    pub hcdr: Vec<bool>,
}

impl RegionPlotData {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dims = self.grid.axes.len();
        let mut header: Vec<String> = ["x", "y"][..dims].iter().map(|s| s.to_string()).collect();
        header.push("density".into());
        header.push("in_hdr".into());
        for i in 0..self.per_state.len() {
            header.push(format!("in_state_{i}"));
        }
        header.push("in_hcdr".into());
        w.write_record(&header)?;
        let DensityRegion::Grid(marginal) = &self.marginal.region else {
            unreachable!("plot data uses the grid method");
        };
        for idx in 0..self.grid.len() {
            let mut row: Vec<String> = self.grid.cell_center(idx).iter().map(|v| v.to_string()).collect();
            row.push(self.grid.density[idx].to_string());
            row.push(u8::from(marginal.member[idx]).to_string());
            for s in &self.per_state {
                row.push(u8::from(s[idx]).to_string());
            }
            row.push(u8::from(self.hcdr[idx]).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Grid the marginal HDR at `marginal_mass` alongside the HCDR at `level`.
pub fn region_plot_data(
    mixture: &LatentMixture,
    marginal_mass: f64,
    level: &HcdrLevel,
    spec: &GridSpec,
) -> Result<RegionPlotData> {
    let marginal = hdr(mixture, marginal_mass, &HdrMethod::Grid(spec.clone()))?;
    let DensityRegion::Grid(grid) = &marginal.region else {
        unreachable!("grid method returns a grid region");
    };
    let grid = grid.clone();
    let regions = hcdr(mixture, level)?;
    let mut per_state = vec![vec![false; grid.len()]; mixture.n_states()];
    let mut union = vec![false; grid.len()];
    for idx in 0..grid.len() {
        let flags = regions.member_states(&grid.cell_center(idx))?;
        for (i, f) in flags.iter().enumerate() {
            per_state[i][idx] = *f;
        }
        union[idx] = flags.iter().any(|f| *f);
    }
    Ok(RegionPlotData { marginal, grid, per_state, hcdr: union })
}
