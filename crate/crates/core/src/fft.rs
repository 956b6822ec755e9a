//! Unitary Fourier transforms on centred grids and trigonometric resampling.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner, FftPlannerScalar};

use crate::error::{Error, Result};
use crate::field::{Representation, WaveField};

static STRICT_FP: AtomicBool = AtomicBool::new(false);

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static SCALAR_PLANNER: RefCell<FftPlannerScalar<f64>> = RefCell::new(FftPlannerScalar::new());
}

/// Restricts every transform to the portable scalar FFT kernels, so results
/// do not depend on which SIMD instruction set the host offers.
pub fn set_strict_fp(on: bool) {
    STRICT_FP.store(on, Ordering::SeqCst);
}

pub fn strict_fp() -> bool {
    STRICT_FP.load(Ordering::SeqCst)
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    if strict_fp() {
        return SCALAR_PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            if inverse {
                p.plan_fft_inverse(len)
            } else {
                p.plan_fft_forward(len)
            }
        });
    }
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Applies an unnormalized 1-D FFT along `axis` of a row-major `n^dim` array.
fn fft_axis(data: &mut [Complex64], n: usize, dim: usize, axis: usize, inverse: bool) {
    let fft = plan(n, inverse);
    let stride = n.pow((dim - 1 - axis) as u32);
    if stride == 1 {
        fft.process(data);
        return;
    }
    let block = stride * n;
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for chunk in data.chunks_mut(block) {
        for offset in 0..stride {
            for (k, v) in line.iter_mut().enumerate() {
                *v = chunk[offset + k * stride];
            }
            fft.process(&mut line);
            for (k, v) in line.iter().enumerate() {
                chunk[offset + k * stride] = *v;
            }
        }
    }
}

/// `(−1)^{Σ j_a}` checkerboard sign used to centre the DFT.
fn checkerboard(data: &mut [Complex64], n: usize, dim: usize) {
    if dim == 1 {
        data.iter_mut().skip(1).step_by(2).for_each(|z| *z = -*z);
        return;
    }
    for (idx, z) in data.iter_mut().enumerate() {
        let mut rem = idx;
        let mut parity = 0;
        for _ in 0..dim {
            parity += rem % n;
            rem /= n;
        }
        if parity % 2 == 1 {
            *z = -*z;
        }
    }
}

/// Unnormalized centred DFT in place: `checkerboard ∘ FFT ∘ checkerboard` on
/// every axis. Forward followed by inverse multiplies by `N^dim`, an exact
/// power of two.
pub(crate) fn centered_dft_in_place(data: &mut [Complex64], n: usize, dim: usize, inverse: bool) {
    checkerboard(data, n, dim);
    for axis in 0..dim {
        fft_axis(data, n, dim, axis, inverse);
    }
    checkerboard(data, n, dim);
}

/// Unitary transform with kernel `(2π)^{−n/2} e^{∓ix·ξ}` between dual layouts.
///
/// The output lives on the dual layout with scale `1/scale`. Requires
/// `N ≡ 0 mod 4` so that the centring phase `e^{∓iπN/2}` is one; every valid
/// grid satisfies this.
fn transform(field: &WaveField, inverse: bool) -> WaveField {
    let grid = *field.grid();
    let (n, dim) = (grid.points(), grid.dim());
    let mut data = field.samples().to_vec();
    centered_dft_in_place(&mut data, n, dim, inverse);
    let factor = (field.spacing().abs() / (2.0 * PI).sqrt()).powi(dim as i32);
    data.iter_mut().for_each(|z| *z *= factor);
    let rep = field.representation().dual();
    WaveField::new(grid, data, rep, 1.0 / field.scale()).expect("layout derived from a valid field")
}

/// `F`, kernel `(2π)^{−n/2} e^{−ix·ξ}`.
pub fn fourier(field: &WaveField) -> WaveField {
    transform(field, false)
}

/// `F⁻¹`, kernel `(2π)^{−n/2} e^{+ix·ξ}`.
pub fn inverse_fourier(field: &WaveField) -> WaveField {
    transform(field, true)
}

/// `e^{−ib|p|²}` via the Fourier side. Returns the result together with the
/// edge fraction of the intermediate spectrum.
pub fn free_flow(field: &WaveField, b: f64) -> (WaveField, f64) {
    let mut spec = fourier(field);
    let edge = spec.edge_fraction();
    if b != 0.0 {
        spec = spec.chirp(-b);
    }
    (inverse_fourier(&spec), edge)
}

/// Fourier multiplier `m(|ξ|²)` applied to a field on any layout.
pub fn fourier_multiplier(field: &WaveField, m: impl Fn(f64) -> Complex64) -> WaveField {
    let mut spec = fourier(field);
    let r2 = spec.radius_squared();
    for (z, r) in spec.samples_mut().iter_mut().zip(r2) {
        *z *= m(r);
    }
    inverse_fourier(&spec)
}

/// Chirp-z transform `X_m = Σ_k x_k e^{2πiαkm}` for `m < m_out` (Bluestein).
pub fn chirp_z(x: &[Complex64], alpha: f64, m_out: usize) -> Vec<Complex64> {
    let n = x.len();
    let len = (n + m_out - 1).next_power_of_two();
    // w^{j²/2} with w = e^{2πiα}
    let wpow = |j: f64| Complex64::from_polar(1.0, PI * alpha * j * j);
    let mut a = vec![Complex64::new(0.0, 0.0); len];
    for (k, v) in x.iter().enumerate() {
        a[k] = v * wpow(k as f64);
    }
    let mut b = vec![Complex64::new(0.0, 0.0); len];
    for j in 0..m_out.max(n) {
        let w = wpow(j as f64).conj();
        if j < m_out {
            b[j] = w;
        }
        if j > 0 && j < n {
            b[len - j] = w;
        }
    }
    let fwd = plan(len, false);
    let inv = plan(len, true);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= q;
    }
    inv.process(&mut a);
    let norm = 1.0 / len as f64;
    (0..m_out).map(|m| a[m] * norm * wpow(m as f64)).collect()
}

/// Trigonometric interpolation of one centred line from spacing `ds` onto
/// nodes `(m − N/2)·dt`. Targets outside the source window are zeroed.
fn resample_line(line: &[Complex64], ds: f64, dt: f64) -> Vec<Complex64> {
    let n = line.len();
    let half = (n / 2) as f64;
    let mut c: Vec<Complex64> = line.to_vec();
    for (j, z) in c.iter_mut().enumerate() {
        if j % 2 == 1 {
            *z = -*z;
        }
    }
    plan(n, false).process(&mut c);
    for (k, z) in c.iter_mut().enumerate() {
        if k % 2 == 1 {
            *z = -*z;
        }
    }
    // Split the Nyquist coefficient symmetrically.
    let nyq = c[0] * 0.5;
    c[0] = nyq;
    let r = dt / ds;
    let alpha = r / n as f64;
    // X_m = Σ_k C_k e^{2πiα(k−N/2)(m−N/2)}
    let pre: Vec<Complex64> = c
        .iter()
        .enumerate()
        .map(|(k, z)| z * Complex64::from_polar(1.0, -PI * alpha * k as f64 * n as f64))
        .collect();
    let mut out = chirp_z(&pre, alpha, n);
    for (m, z) in out.iter_mut().enumerate() {
        let mf = m as f64;
        let phase = 2.0 * PI * alpha * (half * half - mf * half);
        // Add the mirrored Nyquist half at k' = +N/2.
        let y = (mf - half) * r;
        let extra = nyq * Complex64::from_polar(1.0, PI * y);
        *z = (*z * Complex64::from_polar(1.0, phase) + extra) / n as f64;
        if y.abs() > half {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    out
}

/// Resamples `field` onto the layout `(representation, scale)` of the same
/// grid, interpreting both layouts as coordinates of the same variable.
pub fn resample(field: &WaveField, representation: Representation, scale: f64) -> Result<WaveField> {
    if !(scale != 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("target scale {scale} is invalid")));
    }
    let grid = *field.grid();
    let mut target = WaveField::new(grid, field.samples().to_vec(), representation, scale)?;
    if target.spacing() == field.spacing() {
        return Ok(target);
    }
    let (n, dim) = (grid.points(), grid.dim());
    let (ds, dt) = (field.spacing(), target.spacing());
    let data = target.samples_mut();
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        for chunk in data.chunks_mut(block) {
            for offset in 0..stride {
                for (k, v) in line.iter_mut().enumerate() {
                    *v = chunk[offset + k * stride];
                }
                let res = resample_line(&line, ds, dt);
                for (k, v) in res.iter().enumerate() {
                    chunk[offset + k * stride] = *v;
                }
            }
        }
    }
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;

    #[test]
    fn gaussian_is_a_fixed_point() {
        let g = Grid::new(1, 256, 16.0).unwrap();
        let f = WaveField::gaussian(g, 1.0, 0.0, 0.0);
        let fh = fourier(&f);
        assert_eq!(fh.representation(), Representation::Frequency);
        let xi = fh.coordinates();
        for (k, z) in fh.samples().iter().enumerate() {
            let exact = (-xi[k] * xi[k] / 2.0).exp();
            assert!((z.re - exact).abs() < 1e-13 && z.im.abs() < 1e-13);
        }
        assert!((fh.l2_norm() - f.l2_norm()).abs() < 1e-13);
    }

    #[test]
    fn round_trip_is_identity() {
        let g = Grid::new(2, 32, 6.0).unwrap();
        let f = WaveField::gaussian(g, 0.8, 0.4, 1.3);
        let back = inverse_fourier(&fourier(&f));
        assert!(back.same_layout(&f));
        assert!(back.distance(&f).unwrap() < 1e-13);
    }

    #[test]
    fn chirp_z_matches_direct_sum() {
        let x: Vec<Complex64> = (0..20).map(|k| Complex64::new(k as f64 * 0.1, (k as f64).sin())).collect();
        let alpha = 0.0371;
        let fast = chirp_z(&x, alpha, 13);
        for (m, v) in fast.iter().enumerate() {
            let direct: Complex64 = x
                .iter()
                .enumerate()
                .map(|(k, xk)| xk * Complex64::from_polar(1.0, 2.0 * PI * alpha * (k * m) as f64))
                .sum();
            assert!((v - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn resampling_reproduces_smooth_functions() {
        let g = Grid::new(1, 256, 12.0).unwrap();
        let f = WaveField::gaussian(g, 1.1, 0.5, 0.7);
        for &s in &[0.37, 0.8, 1.0, 1.9, -1.3] {
            let r = resample(&f, Representation::Position, s).unwrap();
            let x = r.coordinates();
            for (j, z) in r.samples().iter().enumerate() {
                let exact = if x[j].abs() <= 12.0 {
                    Complex64::from_polar((-(x[j] - 0.5f64).powi(2) / (2.0 * 1.21)).exp(), 0.7 * x[j])
                } else {
                    Complex64::new(0.0, 0.0)
                };
                assert!((z - exact).norm() < 1e-10, "s={s} x={}", x[j]);
            }
        }
    }

    #[test]
    fn free_flow_is_unitary_and_invertible() {
        let g = Grid::new(1, 512, 30.0).unwrap();
        let f = WaveField::gaussian(g, 1.0, 0.0, 0.5);
        let (u, edge) = free_flow(&f, 0.8);
        assert!(edge < 1e-12);
        assert!((u.l2_norm() - f.l2_norm()).abs() < 1e-12);
        let (back, _) = free_flow(&u, -0.8);
        assert!(back.distance(&f).unwrap() < 1e-12);
    }
}
