//! Radial Riesz potential.
//!
//! For a radial density `u` the potential
//! `c(r) = ∫ u(y) |x - y|^{-β} / β dy` with `|x| = r` reduces to a radial
//! integral against the spherical mean of `|x - y|^{-β}/β` over the sphere of
//! radius `ρ`. `KernelMatrix` stores that mean at every pair of cell
//! centres, so `c_i = Σ_j K_ij u_j w_j`.

mod cache;
mod correction;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{unit_sphere_area, Profile, RadialGrid};
use crate::params::ModelParams;
use crate::quadrature::GaussLegendre;

pub use cache::{
    cache_file_name, default_cache_dir, load_or_assemble, read_kernel, write_kernel, CACHE_DIR_ENV,
};
pub use correction::midpoint_defect;

/// Angular quadrature for `angular_weight`.
///
/// Gauss–Legendre in θ on `[0, π]` with the `sin^{d-2}θ` factor folded into
/// the weights. The order is 64, doubled when `s < 1.1` where the
/// near-diagonal integrand is sharper.
#[derive(Debug, Clone)]
pub struct AngularRule {
    one_minus_cos: Vec<f64>,
    weights: Vec<f64>,
    half_beta: f64,
    eps2: f64,
}

impl AngularRule {
    pub fn new(params: &ModelParams) -> Self {
        let order = if params.s() < 1.1 { 128 } else { 64 };
        Self::with_order(params, order)
    }

    pub fn with_order(params: &ModelParams, order: usize) -> Self {
        let gl = GaussLegendre::new(order);
        let d = params.d() as i32;
        let scale = unit_sphere_area(params.d() - 1) / params.beta();
        let mut one_minus_cos = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        for (theta, w) in gl.mapped(0.0, std::f64::consts::PI) {
            let half = (0.5 * theta).sin();
            one_minus_cos.push(2.0 * half * half);
            weights.push(w * theta.sin().powi(d - 2) * scale);
        }
        Self {
            one_minus_cos,
            weights,
            half_beta: params.beta() / 2.0,
            eps2: params.epsilon() * params.epsilon(),
        }
    }

    /// `ω_{d-1} ∫_0^π (r² + ρ² - 2rρ cos θ + ε²)^{-β/2} sin^{d-2}θ dθ / β`.
    pub fn weight(&self, r: f64, rho: f64) -> f64 {
        let base = (r - rho) * (r - rho) + self.eps2;
        let two_r_rho = 2.0 * r * rho;
        self.one_minus_cos
            .iter()
            .zip(&self.weights)
            .map(|(omc, w)| w * (base + two_r_rho * omc).powf(-self.half_beta))
            .sum()
    }
}

/// Angular integral of the regularized kernel between spheres of radius
/// `r` and `rho`. Dividing by `ω_d` gives the spherical mean.
pub fn angular_weight(r: f64, rho: f64, params: &ModelParams) -> f64 {
    AngularRule::new(params).weight(r, rho)
}

#[derive(Debug, Clone)]
pub struct KernelMatrix {
    grid: Arc<RadialGrid>,
    params: ModelParams,
    entries: Vec<f64>,
    origin_row: Vec<f64>,
    origin_correction: f64,
    vanishing: bool,
}

impl KernelMatrix {
    /// Quadrature kernel with the diagonal cusp correction applied.
    pub fn assemble(grid: Arc<RadialGrid>, params: ModelParams) -> Result<Self> {
        let mut k = Self::assemble_uncorrected(grid, params)?;
        let h = k.grid.spacing();
        let n = k.len();
        for (i, &r) in k.grid.centers().iter().enumerate() {
            k.entries[i * n + i] += correction::diagonal_correction(&params, h, r);
        }
        k.origin_correction = correction::origin_correction(&params, h);
        Ok(k)
    }

    /// Plain angular quadrature, no cusp correction.
    pub fn assemble_uncorrected(grid: Arc<RadialGrid>, params: ModelParams) -> Result<Self> {
        check_dimension(&grid, &params)?;
        let n = grid.len();
        let mut entries = allocate(n)?;
        let rule = AngularRule::new(&params);
        let omega = unit_sphere_area(params.d());
        let centers = grid.centers();
        entries.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let r = centers[i];
            for j in i..n {
                row[j] = rule.weight(r, centers[j]) / omega;
            }
        });
        for i in 0..n {
            for j in 0..i {
                entries[i * n + j] = entries[j * n + i];
            }
        }
        Ok(Self::with_entries(grid, params, entries, 0.0))
    }

    /// A kernel of zeros: the model without attraction.
    pub fn zero(grid: Arc<RadialGrid>, params: ModelParams) -> Result<Self> {
        check_dimension(&grid, &params)?;
        let n = grid.len();
        let mut entries = allocate(n)?;
        entries.resize(n * n, 0.0);
        let mut k = Self::with_entries(grid, params, entries, 0.0);
        k.origin_row.iter_mut().for_each(|v| *v = 0.0);
        k.vanishing = true;
        Ok(k)
    }

    fn with_entries(
        grid: Arc<RadialGrid>,
        params: ModelParams,
        entries: Vec<f64>,
        origin_correction: f64,
    ) -> Self {
        let half_beta = params.beta() / 2.0;
        let eps2 = params.epsilon() * params.epsilon();
        let origin_row = grid
            .centers()
            .iter()
            .map(|rho| (rho * rho + eps2).powf(-half_beta) / params.beta())
            .collect();
        Self {
            grid,
            params,
            entries,
            origin_row,
            origin_correction,
            vanishing: false,
        }
    }

    /// True for the kernel built by [`KernelMatrix::zero`].
    pub fn is_zero(&self) -> bool {
        self.vanishing
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Row-major `n × n` entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.len() + j]
    }

    /// Kernel between the origin and each cell centre.
    pub fn origin_row(&self) -> &[f64] {
        &self.origin_row
    }

    /// `c = K (u w)` written into `out`. Raw slices, no validation.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(u.len(), n);
        debug_assert_eq!(out.len(), n);
        if self.vanishing {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let uw: Vec<f64> = u
            .iter()
            .zip(self.grid.weights())
            .map(|(a, b)| a * b)
            .collect();
        let dot = |row: &[f64]| -> f64 { row.iter().zip(&uw).map(|(k, v)| k * v).sum() };
        if n >= 128 {
            out.par_iter_mut()
                .zip(self.entries.par_chunks(n))
                .for_each(|(o, row)| *o = dot(row));
        } else {
            for (o, row) in out.iter_mut().zip(self.entries.chunks(n)) {
                *o = dot(row);
            }
        }
    }

    pub fn potential(&self, u: &Profile) -> Result<Profile> {
        u.check_grid(&self.grid)?;
        let mut out = vec![0.0; self.len()];
        self.apply(u.values(), &mut out);
        Profile::new(self.grid.clone(), out)
    }

    pub fn potential_at_origin(&self, u: &Profile) -> Result<f64> {
        u.check_grid(&self.grid)?;
        let sum: f64 = self
            .origin_row
            .iter()
            .zip(u.values())
            .zip(self.grid.weights())
            .map(|((k, u), w)| k * u * w)
            .sum();
        Ok(sum + self.origin_correction * u.values()[0])
    }

    /// `½ ∫ u c`.
    pub fn interaction_energy(&self, u: &Profile) -> Result<f64> {
        let c = self.potential(u)?;
        Ok(interaction_energy_with(u, &c))
    }
}

pub(crate) fn interaction_energy_with(u: &Profile, c: &Profile) -> f64 {
    0.5 * u
        .values()
        .iter()
        .zip(c.values())
        .zip(u.grid().weights())
        .map(|((a, b), w)| a * b * w)
        .sum::<f64>()
}

fn check_dimension(grid: &RadialGrid, params: &ModelParams) -> Result<()> {
    if grid.d() != params.d() {
        return Err(Error::Grid(format!(
            "grid dimension {} does not match model dimension {}",
            grid.d(),
            params.d()
        )));
    }
    Ok(())
}

fn allocate(n: usize) -> Result<Vec<f64>> {
    let len = n.checked_mul(n).ok_or(Error::Resource(usize::MAX))?;
    let mut v = Vec::new();
    v.try_reserve_exact(len).map_err(|_| Error::Resource(len))?;
    if len > 0 {
        v.resize(len, 0.0);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> ModelParams {
        ModelParams::new(3, 1.25).unwrap()
    }

    /// Spherical mean of `|x - y|^{-β}/β` in three dimensions.
    fn closed_form_3d(r: f64, rho: f64, beta: f64) -> f64 {
        let p = 2.0 - beta;
        ((r + rho).powf(p) - (r - rho).abs().powf(p)) / (2.0 * p * r * rho) / beta
    }

    #[test]
    fn origin_limit() {
        let p = reference();
        for rho in [0.1, 1.0, 7.5] {
            let w = angular_weight(0.0, rho, &p);
            assert_relative_eq!(
                w,
                4.0 * std::f64::consts::PI * rho.powf(-0.5) / 0.5,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn angular_weight_against_adaptive_oracle() {
        // Independent adaptive Simpson on the raw θ integral.
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
            let c = 0.5 * (a + b);
            let whole = (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b));
            let left = (c - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + c)) + f(c));
            let right = (b - c) / 6.0 * (f(c) + 4.0 * f(0.5 * (c + b)) + f(b));
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                simpson(f, a, c, tol / 2.0, depth - 1) + simpson(f, c, b, tol / 2.0, depth - 1)
            }
        }
        let p = reference();
        let f = |t: f64| (1.0 + 4.0 - 4.0 * t.cos()).powf(-0.25) * t.sin();
        let oracle =
            2.0 * std::f64::consts::PI * simpson(&f, 0.0, std::f64::consts::PI, 1e-13, 40) / 0.5;
        assert_relative_eq!(angular_weight(1.0, 2.0, &p), oracle, max_relative = 1e-10);
    }

    #[test]
    fn matches_closed_form_in_three_dimensions() {
        let p = reference();
        let grid = Arc::new(RadialGrid::new(10.0, 40, 3).unwrap());
        let k = KernelMatrix::assemble_uncorrected(grid.clone(), p).unwrap();
        let c = grid.centers();
        let mut worst: f64 = 0.0;
        for i in 0..40 {
            for j in 0..40 {
                let exact = closed_form_3d(c[i], c[j], 0.5);
                worst = worst.max((k.entry(i, j) - exact).abs() / exact);
            }
        }
        assert!(worst < 2e-6, "worst relative error {worst}");
    }

    #[test]
    fn symmetric_and_positive() {
        for params in [reference(), ModelParams::new(4, 1.75).unwrap()] {
            let grid = Arc::new(RadialGrid::new(5.0, 33, params.d()).unwrap());
            let k = KernelMatrix::assemble(grid, params).unwrap();
            for i in 0..33 {
                for j in 0..33 {
                    assert_eq!(k.entry(i, j), k.entry(j, i));
                    assert!(k.entry(i, j) > 0.0);
                }
            }
        }
    }

    #[test]
    fn potential_of_unit_ball_indicator() {
        // c(0) for the indicator of the unit ball is ω ∫_0^1 ρ^{2s-1}/β dρ.
        let p = reference();
        let grid = Arc::new(RadialGrid::new(2.0, 400, 3).unwrap());
        let k = KernelMatrix::assemble(grid.clone(), p).unwrap();
        let u = Profile::from_fn(grid, |r| if r < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let exact = 4.0 * std::f64::consts::PI / (2.5 * 0.5);
        assert_relative_eq!(
            k.potential_at_origin(&u).unwrap(),
            exact,
            max_relative = 1e-3
        );
    }

    #[test]
    fn potential_far_field_is_mass_over_distance() {
        let p = reference();
        let grid = Arc::new(RadialGrid::new(60.0, 600, 3).unwrap());
        let k = KernelMatrix::assemble(grid.clone(), p).unwrap();
        let u = Profile::from_fn(grid.clone(), |r| (-r * r).exp()).unwrap();
        let c = k.potential(&u).unwrap();
        let i = 550;
        let r = grid.centers()[i];
        assert_relative_eq!(
            c.values()[i],
            u.mass() * r.powf(-0.5) / 0.5,
            max_relative = 1e-4
        );
    }

    #[test]
    fn grid_mismatch_rejected() {
        let p = reference();
        let g1 = Arc::new(RadialGrid::new(5.0, 16, 3).unwrap());
        let g2 = Arc::new(RadialGrid::new(5.0, 17, 3).unwrap());
        let k = KernelMatrix::assemble(g1, p).unwrap();
        let u = Profile::zeros(g2);
        assert!(matches!(k.potential(&u), Err(Error::GridMismatch)));
    }

    #[test]
    fn zero_kernel_gives_zero_potential() {
        let p = reference();
        let g = Arc::new(RadialGrid::new(5.0, 16, 3).unwrap());
        let k = KernelMatrix::zero(g.clone(), p).unwrap();
        let u = Profile::from_fn(g, |r| 1.0 / (1.0 + r)).unwrap();
        assert_eq!(k.potential(&u).unwrap().sup(), 0.0);
        assert_eq!(k.potential_at_origin(&u).unwrap(), 0.0);
    }

    #[test]
    fn oversized_kernel_is_a_resource_error() {
        assert!(matches!(allocate(1 << 31), Err(Error::Resource(_))));
        assert!(matches!(allocate(usize::MAX), Err(Error::Resource(_))));
    }
}
