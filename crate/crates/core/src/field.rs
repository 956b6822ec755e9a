//! Uniform grids and sampled complex fields.
//!
//! A [`WaveField`] stores samples on nodes `(j − N/2)·d₀·scale` per axis,
//! where `d₀` is the position spacing `h = 2L/N` for the `Position` layout
//! and the dual spacing `π/L` for the `Frequency` layout. Dilations only
//! touch `scale`; the samples are never interpolated inside a factor chain.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    points: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, points: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in 1..=3")));
        }
        if points < 16 || !points.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "points per axis must be a power of two >= 16, got {points}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidParameter(format!("half-width must be positive, got {half_width}")));
        }
        Ok(Self {
            dim,
            points,
            half_width,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Position spacing `h = 2L/N`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Frequency spacing `2π/(2L)`.
    pub fn dual_spacing(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }

    /// Total number of samples, `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Signed node index `j − N/2`.
    pub fn node(&self, j: usize) -> f64 {
        j as f64 - (self.points / 2) as f64
    }

    /// Position nodes `x_j = −L + j h` at unit scale.
    pub fn positions(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points).map(|j| self.node(j) * h).collect()
    }

    /// Frequency nodes in symmetric order at unit scale.
    pub fn frequencies(&self) -> Vec<f64> {
        let d = self.dual_spacing();
        (0..self.points).map(|j| self.node(j) * d).collect()
    }

    /// Splits a flat row-major index into per-axis indices.
    pub fn unflatten(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.dim).rev() {
            out[a] = idx % self.points;
            idx /= self.points;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Representation {
    Position,
    Frequency,
}

impl Representation {
    pub fn name(&self) -> &'static str {
        match self {
            Representation::Position => "position",
            Representation::Frequency => "frequency",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "position" => Ok(Representation::Position),
            "frequency" => Ok(Representation::Frequency),
            other => Err(Error::Parse(format!("unknown representation '{other}'"))),
        }
    }

    pub fn dual(&self) -> Self {
        match self {
            Representation::Position => Representation::Frequency,
            Representation::Frequency => Representation::Position,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    grid: Grid,
    samples: Vec<Complex64>,
    representation: Representation,
    scale: f64,
}

impl WaveField {
    pub fn new(grid: Grid, samples: Vec<Complex64>, representation: Representation, scale: f64) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {}",
                samples.len(),
                grid.len()
            )));
        }
        if !(scale != 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be finite and nonzero, got {scale}")));
        }
        Ok(Self {
            grid,
            samples,
            representation,
            scale,
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.len()],
            representation: Representation::Position,
            scale: 1.0,
        }
    }

    /// Samples `f` at the physical position nodes (unit scale).
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut field = Self::zeros(grid);
        let h = grid.spacing();
        let mut x = [0.0; 3];
        for (idx, s) in field.samples.iter_mut().enumerate() {
            let ij = grid.unflatten(idx);
            for a in 0..grid.dim {
                x[a] = grid.node(ij[a]) * h;
            }
            *s = f(&x[..grid.dim]);
        }
        field
    }

    /// `e^{−|x−x₀|²/(2w²)} e^{i k·x}` with the same centre and momentum on every axis.
    pub fn gaussian(grid: Grid, width: f64, center: f64, momentum: f64) -> Self {
        Self::from_fn(grid, |x| {
            let r2: f64 = x.iter().map(|xi| (xi - center).powi(2)).sum();
            let phase: f64 = x.iter().map(|xi| momentum * xi).sum();
            Complex64::from_polar((-r2 / (2.0 * width * width)).exp(), phase)
        })
    }

    /// `Σ c_m ψ_m` over tensor-product Hermite functions; `coeffs` is indexed
    /// row-major by per-axis degree `0..=degree`.
    pub fn hermite_combination(grid: Grid, degree: usize, coeffs: &[Complex64]) -> Result<Self> {
        let per_axis = degree + 1;
        let needed = per_axis.pow(grid.dim as u32);
        if coeffs.len() != needed {
            return Err(Error::InvalidParameter(format!(
                "expected {needed} Hermite coefficients, got {}",
                coeffs.len()
            )));
        }
        let table: Vec<Vec<f64>> = grid
            .positions()
            .iter()
            .map(|&x| hermite_functions(x, degree))
            .collect();
        let mut field = Self::zeros(grid);
        for (idx, s) in field.samples.iter_mut().enumerate() {
            let ij = grid.unflatten(idx);
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, c) in coeffs.iter().enumerate() {
                let mut rem = m;
                let mut w = 1.0;
                for a in (0..grid.dim).rev() {
                    w *= table[ij[a]][rem % per_axis];
                    rem /= per_axis;
                }
                acc += c * w;
            }
            *s = acc;
        }
        Ok(field)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub(crate) fn set_layout(&mut self, representation: Representation, scale: f64) {
        self.representation = representation;
        self.scale = scale;
    }

    /// Spacing of the layout before scaling.
    pub fn base_spacing(&self) -> f64 {
        match self.representation {
            Representation::Position => self.grid.spacing(),
            Representation::Frequency => self.grid.dual_spacing(),
        }
    }

    /// Signed physical spacing `d₀·scale`.
    pub fn spacing(&self) -> f64 {
        self.base_spacing() * self.scale
    }

    /// Physical node coordinates along one axis.
    pub fn coordinates(&self) -> Vec<f64> {
        let d = self.spacing();
        (0..self.grid.points).map(|j| self.grid.node(j) * d).collect()
    }

    /// Volume element `|d|^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().abs().powi(self.grid.dim as i32)
    }

    /// `|x|²` at each flat index in physical coordinates.
    pub fn radius_squared(&self) -> Vec<f64> {
        let c = self.coordinates();
        let c2: Vec<f64> = c.iter().map(|v| v * v).collect();
        (0..self.grid.len())
            .map(|idx| {
                let ij = self.grid.unflatten(idx);
                (0..self.grid.dim).map(|a| c2[ij[a]]).sum()
            })
            .collect()
    }

    pub fn norm_sq(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn same_layout(&self, other: &WaveField) -> bool {
        self.grid == other.grid && self.representation == other.representation && self.scale == other.scale
    }

    fn require_same_layout(&self, other: &WaveField) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "layouts differ: ({:?}, {}) vs ({:?}, {})",
                self.representation, self.scale, other.representation, other.scale
            )))
        }
    }

    /// `⟨self, other⟩ = ∫ conj(self)·other`.
    pub fn inner(&self, other: &WaveField) -> Result<Complex64> {
        self.require_same_layout(other)?;
        let s: Complex64 = self.samples.iter().zip(&other.samples).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.cell_volume())
    }

    pub fn distance(&self, other: &WaveField) -> Result<f64> {
        self.require_same_layout(other)?;
        let s: f64 = self.samples.iter().zip(&other.samples).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((s * self.cell_volume()).sqrt())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> WaveField {
        let mut out = self.clone();
        out.samples.iter_mut().for_each(|z| *z = f(*z));
        out
    }

    pub fn scaled(&self, c: Complex64) -> WaveField {
        self.map(|z| z * c)
    }

    pub fn sub(&self, other: &WaveField) -> Result<WaveField> {
        self.require_same_layout(other)?;
        let mut out = self.clone();
        for (a, b) in out.samples.iter_mut().zip(&other.samples) {
            *a -= b;
        }
        Ok(out)
    }

    /// Multiplies by `e^{iβ|x|²}` in physical coordinates.
    pub fn chirp(&self, beta: f64) -> WaveField {
        if beta == 0.0 {
            return self.clone();
        }
        let r2 = self.radius_squared();
        let mut out = self.clone();
        for (z, r) in out.samples.iter_mut().zip(r2) {
            *z *= Complex64::from_polar(1.0, beta * r);
        }
        out
    }

    /// Fraction of `‖·‖²` carried by the outer 10% of nodes along any axis.
    pub fn edge_fraction(&self) -> f64 {
        let total: f64 = self.samples.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let n = self.grid.points;
        let cut = (0.45 * n as f64).ceil() as i64;
        let mut edge = 0.0;
        for (idx, z) in self.samples.iter().enumerate() {
            let ij = self.grid.unflatten(idx);
            if (0..self.grid.dim).any(|a| (ij[a] as i64 - (n / 2) as i64).abs() >= cut) {
                edge += z.norm_sqr();
            }
        }
        edge / total
    }
}

/// Normalized Hermite functions `ψ_0..ψ_degree` at `x`.
pub fn hermite_functions(x: f64, degree: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(degree + 1);
    let psi0 = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
    out.push(psi0);
    if degree >= 1 {
        out.push(std::f64::consts::SQRT_2 * x * psi0);
    }
    for m in 1..degree {
        let mf = m as f64;
        let next = (2.0 / (mf + 1.0)).sqrt() * x * out[m] - (mf / (mf + 1.0)).sqrt() * out[m - 1];
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1, 8, 1.0).is_err());
        assert!(Grid::new(1, 48, 1.0).is_err());
        assert!(Grid::new(4, 16, 1.0).is_err());
        assert!(Grid::new(1, 16, 0.0).is_err());
        let g = Grid::new(2, 16, 4.0).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.positions()[0], -4.0);
    }

    #[test]
    fn gaussian_l2_norm() {
        let g = Grid::new(1, 512, 20.0).unwrap();
        let f = WaveField::gaussian(g, 1.0, 0.0, 0.0);
        assert!((f.l2_norm() - std::f64::consts::PI.powf(0.25)).abs() < 1e-13);
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let g = Grid::new(1, 1024, 20.0).unwrap();
        let h = g.spacing();
        let tab: Vec<Vec<f64>> = g.positions().iter().map(|&x| hermite_functions(x, 6)).collect();
        for a in 0..=6 {
            for b in 0..=6 {
                let s: f64 = tab.iter().map(|r| r[a] * r[b]).sum::<f64>() * h;
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((s - expected).abs() < 1e-12, "({a},{b}) -> {s}");
            }
        }
    }

    #[test]
    fn chirp_is_phase_only() {
        let g = Grid::new(1, 64, 5.0).unwrap();
        let f = WaveField::gaussian(g, 1.0, 0.3, 0.0);
        let c = f.chirp(0.7);
        for (a, b) in f.samples().iter().zip(c.samples()) {
            assert!((a.norm() - b.norm()).abs() < 1e-15);
        }
        let back = c.chirp(-0.7);
        assert!(back.distance(&f).unwrap() < 1e-14);
    }
}
