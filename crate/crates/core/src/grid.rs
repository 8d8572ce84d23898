//! Periodic tensor grids on `[-L, L)^N` with FFT-based differentiation.
//!
//! All integrals are plain Riemann sums `h^N * sum(values)`, which are
//! spectrally accurate for smooth fields that decay inside the box.
//! Derivatives are Fourier multipliers; the wavenumber of index `j` is
//! `pi * j / L` for `j < M/2` and `pi * (j - M) / L` otherwise.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlannerScalar};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 8;

pub struct Grid {
    dim: usize,
    half_extent: f64,
    points: usize,
    spacing: f64,
    coordinates: Vec<f64>,
    wavenumbers: Vec<f64>,
    radius_sq: Vec<f64>,
    wavenumber_sq: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("half_extent", &self.half_extent)
            .field("points", &self.points)
            .finish()
    }
}

impl Grid {
    pub fn new(dim: usize, half_extent: f64, points: usize) -> Result<Arc<Grid>> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if !(half_extent.is_finite() && half_extent > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half extent must be positive, got {half_extent}"
            )));
        }
        if points < MIN_POINTS || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= {MIN_POINTS}, got {points}"
            )));
        }
        let spacing = 2.0 * half_extent / points as f64;
        let coordinates: Vec<f64> = (0..points)
            .map(|i| -half_extent + i as f64 * spacing)
            .collect();
        let wavenumbers: Vec<f64> = (0..points)
            .map(|j| {
                let j = if j < points / 2 {
                    j as f64
                } else {
                    j as f64 - points as f64
                };
                std::f64::consts::PI * j / half_extent
            })
            .collect();

        let len = points.pow(dim as u32);
        let mut radius_sq = Vec::with_capacity(len);
        let mut wavenumber_sq = Vec::with_capacity(len);
        for idx in 0..len {
            let (mut r2, mut k2) = (0.0, 0.0);
            for axis_index in multi_index(idx, dim, points).iter().take(dim) {
                r2 += coordinates[*axis_index].powi(2);
                k2 += wavenumbers[*axis_index].powi(2);
            }
            radius_sq.push(r2);
            wavenumber_sq.push(k2);
        }

        let mut planner = FftPlannerScalar::new();
        let forward = planner.plan_fft_forward(points);
        let inverse = planner.plan_fft_inverse(points);

        Ok(Arc::new(Grid {
            dim,
            half_extent,
            points,
            spacing,
            coordinates,
            wavenumbers,
            radius_sq,
            wavenumber_sq,
            forward,
            inverse,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Positions along one axis (identical for every axis).
    pub fn coordinates(&self) -> &[f64] {
        &self.coordinates
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Total number of cells, `M^N`.
    pub fn len(&self) -> usize {
        self.radius_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radius_sq.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.half_extent).powi(self.dim as i32)
    }

    /// `|x|^2` per cell.
    pub fn radius_sq(&self) -> &[f64] {
        &self.radius_sq
    }

    /// `|k|^2` per cell, in FFT ordering.
    pub fn wavenumber_sq(&self) -> &[f64] {
        &self.wavenumber_sq
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        multi_index(idx, self.dim, self.points)
    }

    /// Position of a cell; unused trailing axes are zero.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let mi = self.multi_index(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.coordinates[mi[a]];
        }
        x
    }

    /// Wavenumber vector of a cell in FFT ordering.
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let mi = self.multi_index(idx);
        let mut k = [0.0; 3];
        for a in 0..self.dim {
            k[a] = self.wavenumbers[mi[a]];
        }
        k
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other)
            || (self.dim == other.dim
                && self.points == other.points
                && self.half_extent == other.half_extent)
    }

    /// In-place unnormalized forward transform over all axes.
    pub fn fft_forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// In-place inverse transform, normalized so that it inverts [`Grid::fft_forward`].
    pub fn fft_inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len(), "buffer does not match grid");
        let m = self.points;
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        // Last axis is contiguous.
        fft.process_with_scratch(data, &mut scratch);
        if self.dim == 1 {
            return;
        }
        let mut lines = vec![Complex64::new(0.0, 0.0); data.len()];
        for axis in 0..self.dim - 1 {
            let stride = m.pow((self.dim - 1 - axis) as u32);
            let outer = data.len() / (m * stride);
            let mut line = 0;
            for o in 0..outer {
                let base = o * m * stride;
                for inner in 0..stride {
                    for j in 0..m {
                        lines[line * m + j] = data[base + inner + j * stride];
                    }
                    line += 1;
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            let mut line = 0;
            for o in 0..outer {
                let base = o * m * stride;
                for inner in 0..stride {
                    for j in 0..m {
                        data[base + inner + j * stride] = lines[line * m + j];
                    }
                    line += 1;
                }
            }
        }
    }

    /// Spectral gradient of a complex array, one array per axis. The Nyquist
    /// mode is dropped for these odd derivatives.
    pub fn gradient(&self, values: &[Complex64]) -> Vec<Vec<Complex64>> {
        let mut spectrum = values.to_vec();
        self.fft_forward(&mut spectrum);
        let nyquist = self.points / 2;
        (0..self.dim)
            .map(|axis| {
                let mut d: Vec<Complex64> = spectrum
                    .iter()
                    .enumerate()
                    .map(|(idx, &c)| {
                        let j = self.multi_index(idx)[axis];
                        if j == nyquist {
                            Complex64::new(0.0, 0.0)
                        } else {
                            c * Complex64::new(0.0, self.wavenumbers[j])
                        }
                    })
                    .collect();
                self.fft_inverse(&mut d);
                d
            })
            .collect()
    }

    /// Riemann sum `h^N * sum(values)` without validation.
    pub(crate) fn sum(&self, values: impl Iterator<Item = f64>) -> f64 {
        self.cell_volume() * values.sum::<f64>()
    }

    /// `int |grad f|^2` via Parseval on the spectrum of `values`.
    pub(crate) fn kinetic_sum(&self, values: &[Complex64]) -> f64 {
        let mut spectrum = values.to_vec();
        self.fft_forward(&mut spectrum);
        self.spectral_weighted_norm(&spectrum, &self.wavenumber_sq)
    }

    pub(crate) fn spectral_weighted_norm(&self, spectrum: &[Complex64], weight: &[f64]) -> f64 {
        let s: f64 = spectrum
            .iter()
            .zip(weight)
            .map(|(c, w)| w * c.norm_sqr())
            .sum();
        s * self.cell_volume() / self.len() as f64
    }

    /// `-Delta` applied to complex values.
    pub(crate) fn neg_laplacian(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut spectrum = values.to_vec();
        self.fft_forward(&mut spectrum);
        for (c, k2) in spectrum.iter_mut().zip(&self.wavenumber_sq) {
            *c *= *k2;
        }
        self.fft_inverse(&mut spectrum);
        spectrum
    }
}

fn multi_index(mut idx: usize, dim: usize, points: usize) -> [usize; 3] {
    let mut mi = [0usize; 3];
    for a in (0..dim).rev() {
        mi[a] = idx % points;
        idx /= points;
    }
    mi
}

/// Common surface of real and complex fields.
pub trait Field: Clone + Send + Sync {
    fn grid(&self) -> &Arc<Grid>;
    fn is_finite(&self) -> bool;
    /// `|f|^2` per cell.
    fn density(&self) -> Vec<f64>;
    fn modulus(&self) -> RealField;
    fn to_complex(&self) -> ComplexField;
    fn scaled(&self, factor: f64) -> Self;
    /// Spectral Laplacian (without the 1/2 kinetic factor).
    fn laplacian(&self) -> Self;
    /// Field of the same kind on the same grid; real fields keep the real part.
    fn with_values(&self, values: Vec<Complex64>) -> Self;
}

#[derive(Debug, Clone)]
pub struct RealField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl RealField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        RealField {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Arc<Grid>, value: f64) -> Self {
        RealField {
            grid: grid.clone(),
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("real field"));
        }
        Ok(RealField {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f(x)`; `x` has one entry per axis.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|idx| f(&grid.position(idx)[..dim]))
            .collect();
        RealField {
            grid: grid.clone(),
            values,
        }
    }

    pub(crate) fn from_raw(grid: &Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        RealField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl ComplexField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        ComplexField {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("complex field"));
        }
        Ok(ComplexField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|idx| f(&grid.position(idx)[..dim]))
            .collect();
        ComplexField {
            grid: grid.clone(),
            values,
        }
    }

    pub(crate) fn from_raw(grid: &Arc<Grid>, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ComplexField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn conj(&self) -> Self {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    /// Multiplies by `e^{i theta}`.
    pub fn rotated(&self, theta: f64) -> Self {
        let phase = Complex64::from_polar(1.0, theta);
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| v * phase).collect(),
        }
    }

    pub fn real_part(&self) -> RealField {
        RealField::from_raw(&self.grid, self.values.iter().map(|v| v.re).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

impl From<&RealField> for ComplexField {
    fn from(f: &RealField) -> Self {
        f.to_complex()
    }
}

impl Field for RealField {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v * v).collect()
    }

    fn modulus(&self) -> RealField {
        self.map(f64::abs)
    }

    fn to_complex(&self) -> ComplexField {
        ComplexField::from_raw(
            &self.grid,
            self.values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        )
    }

    fn scaled(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    fn laplacian(&self) -> Self {
        let out = self.grid.neg_laplacian(&self.to_complex().values);
        RealField::from_raw(&self.grid, out.iter().map(|c| -c.re).collect())
    }

    fn with_values(&self, values: Vec<Complex64>) -> Self {
        RealField::from_raw(&self.grid, values.iter().map(|c| c.re).collect())
    }
}

impl Field for ComplexField {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    fn modulus(&self) -> RealField {
        RealField::from_raw(&self.grid, self.values.iter().map(|v| v.norm()).collect())
    }

    fn to_complex(&self) -> ComplexField {
        self.clone()
    }

    fn scaled(&self, factor: f64) -> Self {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| v * factor).collect(),
        }
    }

    fn laplacian(&self) -> Self {
        let out = self.grid.neg_laplacian(&self.values);
        ComplexField::from_raw(&self.grid, out.into_iter().map(|c| -c).collect())
    }

    fn with_values(&self, values: Vec<Complex64>) -> Self {
        ComplexField::from_raw(&self.grid, values)
    }
}

/// Two components on a shared grid.
#[derive(Debug, Clone)]
pub struct FieldPair<F> {
    first: F,
    second: F,
}

pub type RealPair = FieldPair<RealField>;
pub type ComplexPair = FieldPair<ComplexField>;

impl<F: Field> FieldPair<F> {
    pub fn new(first: F, second: F) -> Result<Self> {
        if !first.grid().same_as(second.grid()) {
            return Err(Error::GridMismatch);
        }
        Ok(FieldPair { first, second })
    }

    pub fn first(&self) -> &F {
        &self.first
    }

    pub fn second(&self) -> &F {
        &self.second
    }

    pub fn component(&self, i: usize) -> &F {
        match i {
            0 => &self.first,
            1 => &self.second,
            _ => panic!("component index {i} out of range"),
        }
    }

    pub fn components(&self) -> [&F; 2] {
        [&self.first, &self.second]
    }

    pub fn into_parts(self) -> (F, F) {
        (self.first, self.second)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.first.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.first.is_finite() && self.second.is_finite()
    }

    pub fn masses(&self) -> [f64; 2] {
        [l2_norm_sq(&self.first), l2_norm_sq(&self.second)]
    }

    pub fn to_complex(&self) -> ComplexPair {
        FieldPair {
            first: self.first.to_complex(),
            second: self.second.to_complex(),
        }
    }

    pub fn modulus(&self) -> RealPair {
        FieldPair {
            first: self.first.modulus(),
            second: self.second.modulus(),
        }
    }

    /// Cartesian Sigma-norm squared: sum of the component norms.
    pub fn sigma_norm_sq(&self) -> Result<f64> {
        Ok(sigma_norm_sq(&self.first)? + sigma_norm_sq(&self.second)?)
    }
}

fn ensure_finite<F: Field>(f: &F, what: &'static str) -> Result<()> {
    if f.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Riemann-sum quadrature over the box.
pub fn integrate(f: &RealField) -> Result<f64> {
    if !f.is_finite() {
        return Err(Error::NonFinite("integrand"));
    }
    Ok(f.grid.sum(f.values.iter().copied()))
}

/// `int |f|^2`.
pub fn l2_norm_sq<F: Field>(f: &F) -> f64 {
    f.grid().sum(f.density().into_iter())
}

/// `int |x|^2 |f|^2`.
pub fn moment_sq<F: Field>(f: &F) -> f64 {
    let grid = f.grid();
    grid.sum(
        f.density()
            .iter()
            .zip(grid.radius_sq())
            .map(|(d, r2)| d * r2),
    )
}

/// `int |grad f|^2`, spectrally.
pub fn grad_norm_sq<F: Field>(f: &F) -> Result<f64> {
    ensure_finite(f, "gradient input")?;
    Ok(f.grid().kinetic_sum(f.to_complex().values()))
}

/// `|f|_2^2 + |grad f|_2^2 + ||x| f|_2^2`.
pub fn sigma_norm_sq<F: Field>(f: &F) -> Result<f64> {
    Ok(l2_norm_sq(f) + grad_norm_sq(f)? + moment_sq(f))
}

pub fn apply_laplacian<F: Field>(f: &F) -> Result<F> {
    ensure_finite(f, "laplacian input")?;
    Ok(f.laplacian())
}

/// `int |f|^2` evaluated on the transform side, `h^N / M^N * sum |F_k|^2`.
pub fn spectral_mass<F: Field>(f: &F) -> f64 {
    let grid = f.grid();
    let mut spectrum = f.to_complex().into_values();
    grid.fft_forward(&mut spectrum);
    let ones = vec![1.0; grid.len()];
    grid.spectral_weighted_norm(&spectrum, &ones)
}

/// `int a conj(b)`.
pub fn l2_inner<A: Field, B: Field>(a: &A, b: &B) -> Result<Complex64> {
    if !a.grid().same_as(b.grid()) {
        return Err(Error::GridMismatch);
    }
    let (a, b) = (a.to_complex(), b.to_complex());
    let s: Complex64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| x * y.conj())
        .sum();
    Ok(s * a.grid.cell_volume())
}

/// Sigma inner product `int (a conj(b) + grad a . conj(grad b) + |x|^2 a conj(b))`.
pub fn sigma_inner<A: Field, B: Field>(a: &A, b: &B) -> Result<Complex64> {
    if !a.grid().same_as(b.grid()) {
        return Err(Error::GridMismatch);
    }
    let grid = a.grid().clone();
    let (mut sa, mut sb) = (a.to_complex().values, b.to_complex().values);
    let local: Complex64 = sa
        .iter()
        .zip(&sb)
        .zip(grid.radius_sq())
        .map(|((x, y), r2)| x * y.conj() * (1.0 + r2))
        .sum::<Complex64>()
        * grid.cell_volume();
    grid.fft_forward(&mut sa);
    grid.fft_forward(&mut sb);
    let kinetic: Complex64 = sa
        .iter()
        .zip(&sb)
        .zip(grid.wavenumber_sq())
        .map(|((x, y), k2)| x * y.conj() * *k2)
        .sum::<Complex64>()
        * (grid.cell_volume() / grid.len() as f64);
    Ok(local + kinetic)
}

/// Normalized Gaussian `pi^{-N/4} exp(-|x|^2/2)` scaled to the given mass.
pub fn gaussian(grid: &Arc<Grid>, mass: f64) -> RealField {
    let n = grid.dim() as f64;
    let amp = mass.sqrt() * std::f64::consts::PI.powf(-n / 4.0);
    RealField::from_fn(grid, |x| {
        amp * (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp()
    })
}

/// Harmonic-oscillator ground state for trap frequency `gamma`, with the given mass.
pub fn oscillator_ground_state(grid: &Arc<Grid>, gamma: f64, mass: f64) -> RealField {
    let n = grid.dim() as f64;
    let amp = mass.sqrt() * (gamma / std::f64::consts::PI).powf(n / 4.0);
    RealField::from_fn(grid, |x| {
        amp * (-0.5 * gamma * x.iter().map(|v| v * v).sum::<f64>()).exp()
    })
}
