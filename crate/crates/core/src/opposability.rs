//! Voxel estimate of how much the thumb pulp workspace overlaps the
//! workspaces of the finger sites, and the indices derived from it.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{JointVector, SerialChain, SiteName};
use crate::hand::{Finger, HandModel};

/// Default cell edge (mm).
pub const DEFAULT_CELL_SIZE: f64 = 2.0;
/// Default joint-space sampling step (degrees per independent variable).
pub const DEFAULT_JOINT_RESOLUTION: f64 = 3.0;

/// Identifies one occupancy layer: the workspace of one site of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LayerKey {
    pub chain: Finger,
    pub site: SiteName,
}

impl LayerKey {
    pub fn new(chain: Finger, site: SiteName) -> Self {
        Self { chain, site }
    }

    pub fn thumb_pulp() -> Self {
        Self::new(Finger::Thumb, SiteName::Pulp)
    }
}

/// Dense bitset over the grid cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    bits: Vec<u64>,
}

impl Layer {
    fn new(cells: usize) -> Self {
        Self {
            bits: vec![0; cells.div_ceil(64)],
        }
    }

    fn set(&mut self, i: usize) {
        self.bits[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.bits[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn and_count(&self, other: &Layer) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    fn union_with(&mut self, other: &Layer) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }

    /// Indices of occupied cells in increasing order.
    pub fn occupied(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, word)| {
            let mut word = *word;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let b = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(w * 64 + b)
            })
        })
    }
}

/// Axis-aligned grid of cubic cells with one occupancy layer per
/// (chain, site).
#[derive(Debug, Clone, PartialEq)]
pub struct WorkspaceGrid {
    min: Vector3<f64>,
    cell: f64,
    dims: [usize; 3],
    layers: BTreeMap<LayerKey, Layer>,
}

impl WorkspaceGrid {
    /// Cells per axis: `ceil(extent / cell)`.
    pub fn new(min: Vector3<f64>, max: Vector3<f64>, cell: f64) -> Result<Self> {
        if !(cell > 0.0 && cell.is_finite()) {
            return invalid(format!("cell size {cell} must be positive"));
        }
        let extent = max - min;
        if extent.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return invalid("grid bounds must have positive finite extent");
        }
        let dims = [0, 1, 2].map(|a| ((extent[a] / cell).ceil() as usize).max(1));
        if dims.iter().product::<usize>() > 1 << 31 {
            return invalid("grid is too fine for its bounds");
        }
        Ok(Self {
            min,
            cell,
            dims,
            layers: BTreeMap::new(),
        })
    }

    /// Bounds covering every chain: base positions inflated by chain
    /// length, the largest site offset and sphere, and two extra cells.
    pub fn for_hand(hand: &HandModel, cell: f64) -> Result<Self> {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for finger in Finger::ALL {
            let chain = hand.chain(finger);
            let site_extra = chain
                .sites
                .iter()
                .map(|s| 2.0 * s.radius)
                .fold(0.0, f64::max);
            let reach = chain.length() + site_extra + 2.0 * cell;
            let base = chain.base.translation;
            lo = lo.inf(&(base - Vector3::repeat(reach)));
            hi = hi.sup(&(base + Vector3::repeat(reach)));
        }
        Self::new(lo, hi, cell)
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Volume of one cell (mm³).
    pub fn cell_volume(&self) -> f64 {
        self.cell.powi(3)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn cell_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn min_corner(&self) -> Vector3<f64> {
        self.min
    }

    fn linear(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn cell_center(&self, index: usize) -> Vector3<f64> {
        let i = index % self.dims[0];
        let j = (index / self.dims[0]) % self.dims[1];
        let k = index / (self.dims[0] * self.dims[1]);
        self.min + Vector3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.cell
    }

    pub fn layer(&self, key: LayerKey) -> Option<&Layer> {
        self.layers.get(&key)
    }

    pub fn layer_keys(&self) -> impl Iterator<Item = &LayerKey> {
        self.layers.keys()
    }

    fn empty_layer(&self) -> Layer {
        Layer::new(self.cell_count())
    }

    /// Makes sure `key` has a (possibly empty) layer.
    pub fn ensure_layer(&mut self, key: LayerKey) {
        let empty = self.empty_layer();
        self.layers.entry(key).or_insert(empty);
    }

    fn cell_range(&self, lo: f64, hi: f64, axis: usize) -> Result<(usize, usize)> {
        let a = ((lo - self.min[axis]) / self.cell).floor();
        let b = ((hi - self.min[axis]) / self.cell).floor();
        if a < 0.0 || b >= self.dims[axis] as f64 {
            return Err(Error::GridTooSmall(f64::NAN, f64::NAN, f64::NAN));
        }
        Ok((a as usize, (b as usize).min(self.dims[axis] - 1)))
    }

    /// Marks every cell the ball of `radius` around `center` intersects.
    fn rasterize_sphere(
        &self,
        layer: &mut Layer,
        center: &Vector3<f64>,
        radius: f64,
    ) -> Result<()> {
        let too_small = || Error::GridTooSmall(center.x, center.y, center.z);
        let mut ranges = [(0, 0); 3];
        for (axis, range) in ranges.iter_mut().enumerate() {
            *range = self
                .cell_range(center[axis] - radius, center[axis] + radius, axis)
                .map_err(|_| too_small())?;
        }
        let r2 = radius * radius;
        for k in ranges[2].0..=ranges[2].1 {
            let dz = axis_gap(center.z, self.min.z + k as f64 * self.cell, self.cell);
            for j in ranges[1].0..=ranges[1].1 {
                let dy = axis_gap(center.y, self.min.y + j as f64 * self.cell, self.cell);
                if dz * dz + dy * dy > r2 {
                    continue;
                }
                for i in ranges[0].0..=ranges[0].1 {
                    let dx = axis_gap(center.x, self.min.x + i as f64 * self.cell, self.cell);
                    if dx * dx + dy * dy + dz * dz <= r2 {
                        layer.set(self.linear(i, j, k));
                    }
                }
            }
        }
        Ok(())
    }

    /// Marks the cells intersected by a ball in layer `key`.
    pub fn mark_sphere(&mut self, key: LayerKey, center: &Vector3<f64>, radius: f64) -> Result<()> {
        let mut layer = self
            .layers
            .remove(&key)
            .unwrap_or_else(|| self.empty_layer());
        let r = self.rasterize_sphere(&mut layer, center, radius);
        self.layers.insert(key, layer);
        r
    }

    /// Marks the cells whose centers lie inside a ball (solid voxelization).
    pub fn fill_ball(&mut self, key: LayerKey, center: &Vector3<f64>, radius: f64) -> Result<()> {
        let mut layer = self
            .layers
            .remove(&key)
            .unwrap_or_else(|| self.empty_layer());
        let r2 = radius * radius;
        for idx in 0..self.cell_count() {
            if (self.cell_center(idx) - center).norm_squared() <= r2 {
                layer.set(idx);
            }
        }
        self.layers.insert(key, layer);
        Ok(())
    }

    /// Marks the single cell containing `point`.
    pub fn mark_cell(&mut self, key: LayerKey, point: &Vector3<f64>) -> Result<()> {
        self.mark_sphere(key, point, 0.0)
    }

    /// Volume (mm³) of the cells occupied in both layers.
    pub fn intersection_volume(&self, a: LayerKey, b: LayerKey) -> Result<f64> {
        let la = self.require(a)?;
        let lb = self.require(b)?;
        Ok(la.and_count(lb) as f64 * self.cell_volume())
    }

    fn require(&self, key: LayerKey) -> Result<&Layer> {
        self.layers.get(&key).ok_or_else(|| {
            Error::InvalidInput(format!("no sampled layer for {} {}", key.chain, key.site))
        })
    }
}

/// Distance along one axis from `c` to the interval `[lo, lo + h]`.
fn axis_gap(c: f64, lo: f64, h: f64) -> f64 {
    if c < lo {
        lo - c
    } else if c > lo + h {
        c - lo - h
    } else {
        0.0
    }
}

/// Values `lo, lo + step, …` up to `hi`, with `hi` itself always included.
fn joint_samples(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut v: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    if hi - v[n] > 1e-9 * step.max(1.0) {
        v.push(hi);
    }
    v
}

/// Enumerates the chain's independent joint space on a regular grid of
/// `joint_resolution_deg` and marks, for every configuration, the cells
/// intersected by the ball of the site's half-width centered at the site.
pub fn sample_workspace(
    grid: &mut WorkspaceGrid,
    hand: &HandModel,
    chain_id: Finger,
    site: SiteName,
    joint_resolution_deg: f64,
) -> Result<()> {
    if !(joint_resolution_deg > 0.0 && joint_resolution_deg.is_finite()) {
        return invalid(format!(
            "joint resolution {joint_resolution_deg}° must be positive"
        ));
    }
    let chain = hand.chain(chain_id);
    let radius = chain.site(site)?.radius;
    let layer = sample_layer(grid, chain, site, radius, joint_resolution_deg.to_radians())?;
    let key = LayerKey::new(chain_id, site);
    match grid.layers.get_mut(&key) {
        Some(existing) => existing.union_with(&layer),
        None => {
            grid.layers.insert(key, layer);
        }
    }
    Ok(())
}

fn sample_layer(
    grid: &WorkspaceGrid,
    chain: &SerialChain,
    site: SiteName,
    radius: f64,
    step: f64,
) -> Result<Layer> {
    let axes: Vec<Vec<f64>> = chain
        .driver_bounds()
        .into_iter()
        .map(|(lo, hi)| joint_samples(lo, hi, step))
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let configuration = |mut n: usize| {
        let mut q = Vec::with_capacity(axes.len());
        for values in axes.iter().rev() {
            q.push(values[n % values.len()]);
            n /= values.len();
        }
        q.reverse();
        JointVector(q)
    };

    // Occupancy is a union, so the merge order does not affect the result.
    (0..total)
        .into_par_iter()
        .try_fold(
            || grid.empty_layer(),
            |mut layer, n| -> Result<Layer> {
                let p = chain.site_position(&configuration(n), site)?;
                grid.rasterize_sphere(&mut layer, &p, radius)?;
                Ok(layer)
            },
        )
        .try_reduce(
            || grid.empty_layer(),
            |mut a, b| {
                a.union_with(&b);
                Ok(a)
            },
        )
}

/// Intersection volumes `v[i][j]` (mm³) between the thumb pulp layer and
/// site `j` (MCP, PIP, DIP, TIP) of finger `i` (index … little).
pub fn intersection_volumes(grid: &WorkspaceGrid) -> Result<[[f64; 4]; 4]> {
    let mut v = [[0.0; 4]; 4];
    for (i, finger) in Finger::OPPOSED.into_iter().enumerate() {
        for (j, site) in SiteName::KAPANDJI.into_iter().enumerate() {
            v[i][j] =
                grid.intersection_volume(LayerKey::thumb_pulp(), LayerKey::new(finger, site))?;
        }
    }
    Ok(v)
}

/// `I = (1 / d_t³) Σ_i Σ_j w_ij v_ij`.
pub fn opposability_index(v: &[[f64; 4]], w: &[[f64; 4]], thumb_length: f64) -> Result<f64> {
    if !(thumb_length > 0.0 && thumb_length.is_finite()) {
        return invalid(format!("thumb length {thumb_length} must be positive"));
    }
    if v.len() != w.len() {
        return invalid(format!(
            "{} volume rows but {} weight rows",
            v.len(),
            w.len()
        ));
    }
    if w.iter().flatten().any(|x| !(*x >= 0.0)) {
        return invalid("weights must be non-negative");
    }
    let sum: f64 = v
        .iter()
        .zip(w)
        .flat_map(|(vr, wr)| vr.iter().zip(wr).map(|(a, b)| a * b))
        .sum();
    Ok(sum / thumb_length.powi(3))
}

fn per_finger_moments(v: &[[f64; 4]]) -> Result<(f64, f64)> {
    if v.is_empty() {
        return invalid("at least one finger is required");
    }
    let totals: Vec<f64> = v.iter().map(|row| row.iter().sum()).collect();
    let k = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / k;
    if mean == 0.0 {
        return Err(Error::Undefined(
            "balance score of all-zero intersection volumes".into(),
        ));
    }
    let var = totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / k;
    Ok((mean, var))
}

/// `σ_r = σ² / v̄ · 100` over the per-finger totals `v_i = Σ_j v_ij`, with
/// the population variance `σ² = Σ_i (v_i − v̄)² / k`.
pub fn relative_std_dev(v: &[[f64; 4]]) -> Result<f64> {
    let (mean, var) = per_finger_moments(v)?;
    Ok(var / mean * 100.0)
}

/// `σ / v̄ · 100` over the per-finger totals.
pub fn coefficient_of_variation(v: &[[f64; 4]]) -> Result<f64> {
    let (mean, var) = per_finger_moments(v)?;
    Ok(var.sqrt() / mean * 100.0)
}

/// Which per-finger spread statistic gates candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpreadMeasure {
    /// [`relative_std_dev`]: variance over mean, percent.
    VarianceOverMean,
    /// [`coefficient_of_variation`]: standard deviation over mean, percent.
    #[default]
    CoefficientOfVariation,
}

impl SpreadMeasure {
    pub fn evaluate(self, v: &[[f64; 4]]) -> Result<f64> {
        match self {
            SpreadMeasure::VarianceOverMean => relative_std_dev(v),
            SpreadMeasure::CoefficientOfVariation => coefficient_of_variation(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpposabilityConfig {
    pub cell_size: f64,
    pub joint_resolution_deg: f64,
    /// `w[i][j]` for finger `i` (index … little) and site `j` (MCP … TIP).
    pub weights: [[f64; 4]; 4],
    pub spread: SpreadMeasure,
}

impl Default for OpposabilityConfig {
    fn default() -> Self {
        Self {
            cell_size: DEFAULT_CELL_SIZE,
            joint_resolution_deg: DEFAULT_JOINT_RESOLUTION,
            weights: [[1.0; 4]; 4],
            spread: SpreadMeasure::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpposabilityResult {
    /// Intersection volumes (mm³), rows index … little, columns MCP … TIP.
    pub v: [[f64; 4]; 4],
    pub index: f64,
    /// Percent; `None` when every volume is zero.
    pub sigma_r: Option<f64>,
    /// Thumb length `d_t` (mm).
    pub thumb_length: f64,
}

/// Samples the thumb pulp and every Kapandji site of every finger into a
/// grid sized for `hand`, and evaluates the opposability statistics.
pub fn evaluate_opposability(
    hand: &HandModel,
    cfg: &OpposabilityConfig,
) -> Result<(OpposabilityResult, WorkspaceGrid)> {
    let mut grid = WorkspaceGrid::for_hand(hand, cfg.cell_size)?;
    sample_workspace(
        &mut grid,
        hand,
        Finger::Thumb,
        SiteName::Pulp,
        cfg.joint_resolution_deg,
    )?;
    for finger in Finger::OPPOSED {
        for site in SiteName::KAPANDJI {
            sample_workspace(&mut grid, hand, finger, site, cfg.joint_resolution_deg)?;
        }
    }
    let v = intersection_volumes(&grid)?;
    let thumb_length = hand.thumb_length();
    let index = opposability_index(&v, &cfg.weights, thumb_length)?;
    let sigma_r = match cfg.spread.evaluate(&v) {
        Ok(s) => Some(s),
        Err(Error::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((
        OpposabilityResult {
            v,
            index,
            sigma_r,
            thumb_length,
        },
        grid,
    ))
}
