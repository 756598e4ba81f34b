//! Vacuum magnetic field of the resonator inductor, the spin-photon coupling
//! map g(x, y) and the ensemble coupling distribution ρ(g).
//!
//! Cross-section coordinates: the strip occupies |x| ≤ w/2, 0 ≤ y ≤ t and
//! carries current along +z (parallel to B0). The substrate is y < 0, so the
//! depth of a spin below the surface is −y.

use serde::{Deserialize, Serialize};

use crate::constants::{GAMMA_E, HBAR, MU0, TWO_PI};
use crate::thermal::ResonatorParams;
use crate::{par, Error, Result};

/// Current-density profile across the strip width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurrentModel {
    Uniform,
    /// Density ∝ 1/√(1 − (2x/w)²), held constant within `cutoff` (m) of each edge.
    EdgePeaked {
        cutoff: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireGeometry {
    /// m
    pub width: f64,
    /// m
    pub thickness: f64,
    pub current_model: CurrentModel,
    /// Ribbons across the width.
    pub filaments: usize,
    /// Sheets through the thickness.
    pub layers: usize,
}

impl Default for WireGeometry {
    fn default() -> Self {
        Self {
            width: 2e-6,
            thickness: 50e-9,
            current_model: CurrentModel::Uniform,
            filaments: 128,
            layers: 4,
        }
    }
}

/// Ribbon edges and current fractions.
struct Ribbon {
    x1: f64,
    x2: f64,
    y: f64,
    fraction: f64,
}

impl WireGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.thickness > 0.0) {
            return Err(Error::invalid("wire width and thickness must be positive"));
        }
        if self.filaments < 64 {
            return Err(Error::invalid("at least 64 filaments are required"));
        }
        if self.layers == 0 {
            return Err(Error::invalid("at least one layer is required"));
        }
        if let CurrentModel::EdgePeaked { cutoff } = self.current_model {
            if !(cutoff > 0.0 && cutoff < self.width / 2.0) {
                return Err(Error::invalid("edge cutoff must lie in (0, width/2)"));
            }
        }
        Ok(())
    }

    fn ribbons(&self) -> Vec<Ribbon> {
        let nf = self.filaments;
        let dx = self.width / nf as f64;
        let half = self.width / 2.0;
        let profile: Vec<f64> = (0..nf)
            .map(|j| {
                let xc = -half + (j as f64 + 0.5) * dx;
                match self.current_model {
                    CurrentModel::Uniform => 1.0,
                    CurrentModel::EdgePeaked { cutoff } => {
                        let xe = xc.abs().min(half - cutoff);
                        1.0 / (1.0 - (xe / half).powi(2)).sqrt()
                    }
                }
            })
            .collect();
        let total: f64 = profile.iter().sum::<f64>() * self.layers as f64;
        let dy = self.thickness / self.layers as f64;
        let mut out = Vec::with_capacity(nf * self.layers);
        for l in 0..self.layers {
            let y = (l as f64 + 0.5) * dy;
            for (j, p) in profile.iter().enumerate() {
                out.push(Ribbon {
                    x1: -half + j as f64 * dx,
                    x2: -half + (j + 1) as f64 * dx,
                    y,
                    fraction: p / total,
                });
            }
        }
        out
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x.abs() <= self.width / 2.0 && (0.0..=self.thickness).contains(&y)
    }
}

/// Current fluctuation amplitude 2πf0 √(ħ/2Z0), in ampere.
pub fn vacuum_current(res: &ResonatorParams) -> f64 {
    TWO_PI * res.omega0 * (HBAR / (2.0 * res.z0)).sqrt()
}

/// Field of a flat ribbon x1..x2 at height `yr` carrying `current` along +z.
fn ribbon_field(r: &Ribbon, current: f64, x: f64, y: f64) -> (f64, f64) {
    let k = MU0 * current / (TWO_PI * (r.x2 - r.x1));
    let dy = y - r.y;
    let bx = if dy == 0.0 {
        // In the ribbon plane only the endpoints contribute, and they cancel outside.
        0.0
    } else {
        -k * (((r.x2 - x) / dy).atan() - ((r.x1 - x) / dy).atan())
    };
    let by = 0.5 * k * (((x - r.x1).powi(2) + dy * dy) / ((x - r.x2).powi(2) + dy * dy)).ln();
    (bx, by)
}

struct Strip {
    ribbons: Vec<Ribbon>,
}

impl Strip {
    fn new(geom: &WireGeometry) -> Self {
        Self {
            ribbons: geom.ribbons(),
        }
    }

    fn field(&self, current: f64, x: f64, y: f64) -> (f64, f64) {
        self.ribbons.iter().fold((0.0, 0.0), |(bx, by), r| {
            let (dx, dy) = ribbon_field(r, current * r.fraction, x, y);
            (bx + dx, by + dy)
        })
    }
}

/// Field of the strip at one point, tesla.
pub fn field_at(geom: &WireGeometry, current: f64, x: f64, y: f64) -> (f64, f64) {
    Strip::new(geom).field(current, x, y)
}

/// Rectangular grid of cell centers. Row-major storage: index = iy·nx + ix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x_min: -4e-6,
            x_max: 4e-6,
            y_min: -1.5e-6,
            y_max: -5e-9,
            nx: 160,
            ny: 60,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || !(self.x_max > self.x_min) || !(self.y_max > self.y_min)
        {
            return Err(Error::invalid("grid needs positive extent and cell counts"));
        }
        Ok(())
    }

    pub fn xs(&self) -> Vec<f64> {
        let dx = (self.x_max - self.x_min) / self.nx as f64;
        (0..self.nx)
            .map(|i| self.x_min + (i as f64 + 0.5) * dx)
            .collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        let dy = (self.y_max - self.y_min) / self.ny as f64;
        (0..self.ny)
            .map(|i| self.y_min + (i as f64 + 0.5) * dy)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same extent with twice the cells along each axis.
    pub fn refined(&self) -> Self {
        Self {
            nx: 2 * self.nx,
            ny: 2 * self.ny,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldGrid {
    pub spec: GridSpec,
    pub geometry: WireGeometry,
    pub current: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub bx: Vec<f64>,
    pub by: Vec<f64>,
}

impl FieldGrid {
    pub fn magnitude(&self, idx: usize) -> f64 {
        self.bx[idx].hypot(self.by[idx])
    }

    /// (x, y) of cell `idx`.
    pub fn position(&self, idx: usize) -> (f64, f64) {
        (self.xs[idx % self.spec.nx], self.ys[idx / self.spec.nx])
    }

    /// ∮B·dl around a rectangle enclosing the strip divided by μ0·i.
    pub fn ampere_ratio(&self) -> f64 {
        let g = &self.geometry;
        circulation(
            g,
            self.current,
            g.width,
            10.0 * g.thickness.max(g.width / 10.0),
            4000,
        ) / (MU0 * self.current)
    }
}

/// Counter-clockwise ∮B·dl around the rectangle |x| ≤ half_w, |y − t/2| ≤ half_h.
pub fn circulation(geom: &WireGeometry, current: f64, half_w: f64, half_h: f64, n: usize) -> f64 {
    let strip = Strip::new(geom);
    let yc = geom.thickness / 2.0;
    let n = n + n % 2;
    // Simpson along each side, parametrized by s ∈ [0, 1].
    let side = |p0: (f64, f64), p1: (f64, f64)| -> f64 {
        let (dx, dy) = (p1.0 - p0.0, p1.1 - p0.1);
        let h = 1.0 / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let s = k as f64 * h;
            let (bx, by) = strip.field(current, p0.0 + s * dx, p0.1 + s * dy);
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * (bx * dx + by * dy);
        }
        acc * h / 3.0
    };
    let corners = [
        (-half_w, yc - half_h),
        (half_w, yc - half_h),
        (half_w, yc + half_h),
        (-half_w, yc + half_h),
    ];
    (0..4).map(|k| side(corners[k], corners[(k + 1) % 4])).sum()
}

/// Field of the strip on every grid cell, evaluated in parallel over rows.
pub fn field_map(geom: &WireGeometry, current: f64, grid: &GridSpec) -> Result<FieldGrid> {
    geom.validate()?;
    grid.validate()?;
    let xs = grid.xs();
    let ys = grid.ys();
    for &y in &ys {
        for &x in &xs {
            if geom.contains(x, y) {
                return Err(Error::GridOverlapsConductor { x, y });
            }
        }
    }
    let strip = Strip::new(geom);
    let rows = par::map(&ys, |&y| {
        xs.iter()
            .map(|&x| strip.field(current, x, y))
            .collect::<Vec<_>>()
    });
    let (bx, by) = rows.into_iter().flatten().unzip();
    Ok(FieldGrid {
        spec: *grid,
        geometry: *geom,
        current,
        xs,
        ys,
        bx,
        by,
    })
}

/// Per-cell coupling strength in Hz on the grid of the source field map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingMap {
    pub spec: GridSpec,
    pub g: Vec<f64>,
}

/// g = γe·|element|·|δB1| per cell. B0 lies along the wire, so the whole
/// in-plane field is transverse.
pub fn coupling_map(field: &FieldGrid, matrix_element: f64) -> Result<CouplingMap> {
    if !(matrix_element > 0.0 && matrix_element <= 0.5) {
        return Err(Error::invalid("matrix element must lie in (0, 0.5]"));
    }
    let g = (0..field.bx.len())
        .map(|i| GAMMA_E * matrix_element * field.magnitude(i))
        .collect();
    Ok(CouplingMap {
        spec: field.spec,
        g,
    })
}

/// Spin density versus depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImplantationProfile {
    /// Spins occupy depths 0 < −y ≤ cutoff_depth uniformly.
    pub cutoff_depth: f64,
}

impl Default for ImplantationProfile {
    fn default() -> Self {
        Self { cutoff_depth: 1e-6 }
    }
}

impl ImplantationProfile {
    /// Normalized weight per cell.
    pub fn cell_weights(&self, spec: &GridSpec) -> Result<Vec<f64>> {
        let ys = spec.ys();
        let mut w = Vec::with_capacity(spec.len());
        for &y in &ys {
            let inside = y < 0.0 && -y <= self.cutoff_depth;
            w.extend(std::iter::repeat_n(if inside { 1.0 } else { 0.0 }, spec.nx));
        }
        let total: f64 = w.iter().sum();
        if total == 0.0 {
            return Err(Error::EmptySupport);
        }
        Ok(w.into_iter().map(|v| v / total).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub count: usize,
    pub log: bool,
}

impl Default for Binning {
    fn default() -> Self {
        Self {
            count: 200,
            log: true,
        }
    }
}

/// Histogram of coupling strengths; weights sum to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingDistribution {
    /// Hz, ascending, `weights.len() + 1` entries.
    pub bin_edges: Vec<f64>,
    pub weights: Vec<f64>,
    /// Weighted mean of the underlying samples, Hz.
    pub mean: f64,
    log: bool,
}

impl CouplingDistribution {
    /// A single coupling value with unit weight.
    pub fn delta(g: f64) -> Self {
        Self {
            bin_edges: vec![g, g],
            weights: vec![1.0],
            mean: g,
            log: false,
        }
    }

    /// Probability density per Hz for each bin.
    pub fn density(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(w, e)| {
                if e[1] > e[0] {
                    w / (e[1] - e[0])
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|e| {
                if self.log {
                    (e[0] * e[1]).sqrt()
                } else {
                    0.5 * (e[0] + e[1])
                }
            })
            .collect()
    }

    pub fn max_g(&self) -> f64 {
        *self.bin_edges.last().expect("at least one edge")
    }

    /// Coupling at cumulative probability `q` ∈ [0, 1], interpolating within bins.
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let mut acc = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > 0.0 && acc + w >= q {
                let f = ((q - acc) / w).clamp(0.0, 1.0);
                let (a, b) = (self.bin_edges[i], self.bin_edges[i + 1]);
                return if self.log && a > 0.0 {
                    a * (b / a).powf(f)
                } else {
                    a + f * (b - a)
                };
            }
            acc += w;
        }
        self.max_g()
    }

    /// `n` equal-weight groups represented by their mid-quantile coupling.
    pub fn quantile_groups(&self, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| (self.quantile((k as f64 + 0.5) / n as f64), 1.0 / n as f64))
            .collect()
    }
}

/// Weighted histogram of coupling strengths pooled over several maps
/// (e.g. the two members of a transition pair) and the implantation profile.
pub fn coupling_distribution(
    maps: &[(&CouplingMap, f64)],
    profile: &ImplantationProfile,
    bins: &Binning,
) -> Result<CouplingDistribution> {
    let first = maps.first().ok_or(Error::EmptySupport)?;
    if maps.iter().any(|(m, _)| m.spec != first.0.spec) {
        return Err(Error::invalid("coupling maps must share a grid"));
    }
    if bins.count == 0 {
        return Err(Error::invalid("at least one bin is required"));
    }
    let cell_w = profile.cell_weights(&first.0.spec)?;
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for (map, mw) in maps {
        for (g, cw) in map.g.iter().zip(&cell_w) {
            let w = cw * mw;
            if w > 0.0 && *g > 0.0 {
                samples.push((*g, w));
            }
        }
    }
    let total: f64 = samples.iter().map(|s| s.1).sum();
    if samples.is_empty() || !(total > 0.0) {
        return Err(Error::EmptySupport);
    }
    let mean = samples.iter().map(|(g, w)| g * w).sum::<f64>() / total;
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    if hi <= lo * (1.0 + 1e-12) {
        return Ok(CouplingDistribution::delta(hi));
    }
    let n = bins.count;
    let edges: Vec<f64> = (0..=n)
        .map(|k| {
            let f = k as f64 / n as f64;
            if bins.log {
                lo * (hi / lo).powf(f)
            } else {
                lo + f * (hi - lo)
            }
        })
        .collect();
    let mut weights = vec![0.0; n];
    for (g, w) in samples {
        let f = if bins.log {
            (g / lo).ln() / (hi / lo).ln()
        } else {
            (g - lo) / (hi - lo)
        };
        let k = ((f * n as f64) as usize).min(n - 1);
        weights[k] += w / total;
    }
    Ok(CouplingDistribution {
        bin_edges: edges,
        weights,
        mean,
        log: bins.log,
    })
}
