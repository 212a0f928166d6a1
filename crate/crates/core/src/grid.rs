//! Uniform radial grids and radial densities on them.
//!
//! Cells are `[r_{i-1/2}, r_{i+1/2}]` with centres `r_i = (i + 1/2) Δr`.
//! Two measures are kept per cell. `volumes` are the exact shell volumes.
//! `weights` are the midpoint-rule weights `ω_d r_i^{d-1} Δr`, which are
//! used for every integral and as the finite-volume control mass.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Surface area of the unit sphere in `R^d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    match d {
        0 => 2.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI * unit_sphere_area(d - 2) / (d - 2) as f64,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    d: usize,
    r_max: f64,
    spacing: f64,
    centers: Vec<f64>,
    edges: Vec<f64>,
    volumes: Vec<f64>,
    weights: Vec<f64>,
    edge_areas: Vec<f64>,
}

impl RadialGrid {
    pub fn new(r_max: f64, n: usize, d: usize) -> Result<Self> {
        if d < 1 {
            return Err(Error::Grid("dimension must be at least 1".into()));
        }
        if !r_max.is_finite() || r_max <= 0.0 {
            return Err(Error::NonPositive {
                name: "r_max",
                value: r_max,
            });
        }
        if n == 0 {
            return Err(Error::Grid("need at least one cell".into()));
        }
        let h = r_max / n as f64;
        let omega = unit_sphere_area(d);
        let di = d as i32;
        let edges: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let centers: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        let volumes = (0..n)
            .map(|i| omega / d as f64 * (edges[i + 1].powi(di) - edges[i].powi(di)))
            .collect();
        let weights = centers.iter().map(|r| omega * r.powi(di - 1) * h).collect();
        let edge_areas = edges.iter().map(|r| omega * r.powi(di - 1)).collect();
        Ok(Self {
            d,
            r_max,
            spacing: h,
            centers,
            edges,
            volumes,
            weights,
            edge_areas,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Cell boundaries, `n + 1` values from 0 to `r_max`.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Exact volume of each spherical shell.
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Midpoint quadrature weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sphere area at each cell boundary.
    pub fn edge_areas(&self) -> &[f64] {
        &self.edge_areas
    }

    pub fn unit_sphere_area(&self) -> f64 {
        unit_sphere_area(self.d)
    }

    /// Same geometry (dimension, extent, cell count).
    pub fn same_shape(&self, other: &RadialGrid) -> bool {
        self.d == other.d && self.r_max == other.r_max && self.len() == other.len()
    }
}

/// A nonnegative radial density sampled at cell centres.
#[derive(Debug, Clone)]
pub struct Profile {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl Profile {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ProfileLength {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidDensity { index, value });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    /// Samples `f` at the cell centres.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.centers().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    /// `∫ f(u) dx` by the midpoint rule.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(&u, &w)| f(u) * w)
            .sum()
    }

    pub fn mass(&self) -> f64 {
        self.integrate(|u| u)
    }

    /// `L^q` norm; `q = f64::INFINITY` gives the maximum.
    pub fn lp_norm(&self, q: f64) -> Result<f64> {
        if q.is_nan() || q < 1.0 {
            return Err(Error::NormExponent(q));
        }
        if q.is_infinite() {
            return Ok(self.sup());
        }
        Ok(self.integrate(|u| u.powf(q)).powf(1.0 / q))
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `∫ |x|^2 u dx`.
    pub fn second_moment(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .zip(self.grid.centers())
            .map(|((&u, &w), &r)| r * r * u * w)
            .sum()
    }

    pub(crate) fn check_grid(&self, grid: &RadialGrid) -> Result<()> {
        if self.grid.same_shape(grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(unit_sphere_area(2), 2.0 * PI);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * PI);
        assert_relative_eq!(unit_sphere_area(4), 2.0 * PI * PI);
        assert_relative_eq!(unit_sphere_area(5), 8.0 * PI * PI / 3.0);
    }

    #[test]
    fn single_cell_ball() {
        let g = RadialGrid::new(1.0, 1, 3).unwrap();
        assert_eq!(g.centers(), &[0.5]);
        assert_relative_eq!(g.volumes()[0], 4.0 * PI / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn shell_volumes_sum_to_ball() {
        for (d, n) in [(3, 17), (4, 64), (5, 9)] {
            let g = RadialGrid::new(2.5, n, d).unwrap();
            let total: f64 = g.volumes().iter().sum();
            let ball = unit_sphere_area(d) * 2.5f64.powi(d as i32) / d as f64;
            assert_relative_eq!(total, ball, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(RadialGrid::new(0.0, 8, 3).is_err());
        assert!(RadialGrid::new(-1.0, 8, 3).is_err());
        assert!(RadialGrid::new(1.0, 0, 3).is_err());
        assert!(RadialGrid::new(f64::INFINITY, 8, 3).is_err());
    }

    #[test]
    fn integrate_constant_gives_volume() {
        let g = Arc::new(RadialGrid::new(60.0, 512, 3).unwrap());
        let p = Profile::from_fn(g, |_| 1.0).unwrap();
        let exact = 4.0 * PI * 60f64.powi(3) / 3.0;
        assert_relative_eq!(p.mass(), exact, max_relative = 1e-5);
    }

    #[test]
    fn profile_validation() {
        let g = Arc::new(RadialGrid::new(1.0, 4, 3).unwrap());
        assert!(matches!(
            Profile::new(g.clone(), vec![1.0; 3]),
            Err(Error::ProfileLength {
                expected: 4,
                got: 3
            })
        ));
        assert!(matches!(
            Profile::new(g.clone(), vec![1.0, -1e-300, 0.0, 0.0]),
            Err(Error::InvalidDensity { index: 1, .. })
        ));
        assert!(Profile::new(g.clone(), vec![1.0, f64::NAN, 0.0, 0.0]).is_err());
        let p = Profile::zeros(g);
        assert_eq!(p.lp_norm(2.0).unwrap(), 0.0);
        assert!(matches!(p.lp_norm(0.5), Err(Error::NormExponent(_))));
    }

    #[test]
    fn sup_norm_is_max() {
        let g = Arc::new(RadialGrid::new(1.0, 4, 3).unwrap());
        let p = Profile::new(g, vec![0.5, 2.0, 1.0, 0.0]).unwrap();
        assert_eq!(p.lp_norm(f64::INFINITY).unwrap(), 2.0);
    }
}
