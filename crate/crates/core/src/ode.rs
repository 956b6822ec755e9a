//! Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! Fixed-size states only; the classical problem has five components.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 5_000_000,
        }
    }
}

/// One accepted step together with its interpolation coefficients.
#[derive(Debug, Clone)]
pub struct DenseStep<const D: usize> {
    pub t0: f64,
    pub h: f64,
    coeffs: [[f64; D]; 5],
}

impl<const D: usize> DenseStep<D> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> [f64; D] {
        self.coeffs[0]
    }

    pub fn end(&self) -> [f64; D] {
        let mut y = [0.0; D];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.coeffs[0][i] + self.coeffs[1][i];
        }
        y
    }

    /// Quartic continuous extension of the 5(4) pair.
    pub fn interpolate(&self, t: f64) -> [f64; D] {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let c = &self.coeffs;
        let mut y = [0.0; D];
        for i in 0..D {
            y[i] = c[0][i]
                + theta * (c[1][i] + theta1 * (c[2][i] + theta * (c[3][i] + theta1 * c[4][i])));
        }
        y
    }
}

/// Dense solution on one side of the initial time.
#[derive(Debug, Clone)]
pub struct DenseTrajectory<const D: usize> {
    pub t_start: f64,
    pub y_start: [f64; D],
    pub steps: Vec<DenseStep<D>>,
}

impl<const D: usize> DenseTrajectory<D> {
    pub fn t_end(&self) -> f64 {
        self.steps.last().map_or(self.t_start, DenseStep::t1)
    }

    fn forward(&self) -> bool {
        self.t_end() >= self.t_start
    }

    /// Index of the step containing `t`; `None` if `t` is outside.
    pub fn locate(&self, t: f64) -> Option<usize> {
        if self.steps.is_empty() {
            return None;
        }
        let (lo, hi) = if self.forward() {
            (self.t_start, self.t_end())
        } else {
            (self.t_end(), self.t_start)
        };
        if !(t >= lo && t <= hi) {
            return None;
        }
        let idx = if self.forward() {
            self.steps.partition_point(|s| s.t1() < t)
        } else {
            self.steps.partition_point(|s| s.t1() > t)
        };
        Some(idx.min(self.steps.len() - 1))
    }

    pub fn evaluate(&self, t: f64) -> Option<[f64; D]> {
        if t == self.t_start {
            return Some(self.y_start);
        }
        self.locate(t).map(|i| self.steps[i].interpolate(t))
    }
}

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

fn initial_step<const D: usize, F>(f: &F, t0: f64, y0: &[f64; D], k1: &[f64; D], dir: f64, tol: &Tolerances) -> f64
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let sk = |y: f64| tol.atol + tol.rtol * y.abs();
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..D {
        dnf += (k1[i] / sk(y0[i])).powi(2);
        dny += (y0[i] / sk(y0[i])).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * (dny / dnf).sqrt()
    };
    h *= dir;
    let y1 = axpy(y0, h, &[(1.0, k1)]);
    let f1 = f(t0 + h, &y1);
    let mut der2 = 0.0;
    for i in 0..D {
        der2 += ((f1[i] - k1[i]) / sk(y0[i])).powi(2);
    }
    der2 = der2.sqrt() / h.abs();
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h.abs() * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    dir * (100.0 * h.abs()).min(h1)
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (either direction).
pub fn integrate<const D: usize, F>(
    f: F,
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    tol: &Tolerances,
) -> Result<DenseTrajectory<D>>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let mut traj = DenseTrajectory {
        t_start: t0,
        y_start: y0,
        steps: Vec::new(),
    };
    if t_end == t0 {
        return Ok(traj);
    }
    let dir = (t_end - t0).signum();
    let safe = 0.9;
    let beta = 0.04;
    let expo1 = 0.2 - beta * 0.75;
    let (fac_min, fac_max) = (0.2, 10.0);
    let mut fac_old: f64 = 1e-4;

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = initial_step(&f, t, &y, &k1, dir, tol);
    let mut reject = false;

    while (t_end - t) * dir > 0.0 {
        if traj.steps.len() >= tol.max_steps {
            return Err(Error::TooManySteps(tol.max_steps));
        }
        if (h.abs()) < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeCollapse { t, step: h });
        }
        if (t + 1.01 * h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        let y2 = axpy(&y, h, &[(A21, &k1)]);
        let k2 = f(t + C2 * h, &y2);
        let y3 = axpy(&y, h, &[(A31, &k1), (A32, &k2)]);
        let k3 = f(t + C3 * h, &y3);
        let y4 = axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        let k4 = f(t + C4 * h, &y4);
        let y5 = axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        let k5 = f(t + C5 * h, &y5);
        let y6 = axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        let k6 = f(t + h, &y6);
        let y_new = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + h, &y_new);

        let mut err = 0.0;
        for i in 0..D {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sk).powi(2);
        }
        err = (err / D as f64).sqrt();

        let fac11 = err.powf(expo1);
        let fac = (fac11 / fac_old.powf(beta) / safe).clamp(1.0 / fac_max, 1.0 / fac_min);
        let mut h_new = h / fac;

        if err <= 1.0 {
            fac_old = err.max(1e-4);
            let mut coeffs = [[0.0; D]; 5];
            for i in 0..D {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                coeffs[0][i] = y[i];
                coeffs[1][i] = ydiff;
                coeffs[2][i] = bspl;
                coeffs[3][i] = ydiff - h * k7[i] - bspl;
                coeffs[4][i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            traj.steps.push(DenseStep { t0: t, h, coeffs });
            t += h;
            y = y_new;
            k1 = k7;
            if reject {
                h_new = dir * h_new.abs().min(h.abs());
            }
            reject = false;
        } else {
            h_new = h / (fac11 / safe).min(1.0 / fac_min);
            reject = true;
        }
        h = h_new;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_is_accurate() {
        let tol = Tolerances::default();
        let traj = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 5.0, &tol).unwrap();
        let y = traj.evaluate(5.0).unwrap()[0];
        assert!((y / 5f64.exp() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn backward_direction_and_dense_output() {
        let tol = Tolerances::default();
        let f = |_: f64, y: &[f64; 2]| [y[1], -y[0]];
        let traj = integrate(f, 0.0, [0.0, 1.0], -7.0, &tol).unwrap();
        for &t in &[-0.3, -1.234, -3.9, -6.99, -7.0] {
            let y = traj.evaluate(t).unwrap();
            assert!((y[0] - t.sin()).abs() < 1e-8, "t={t}");
        }
        assert!(traj.evaluate(0.5).is_none());
    }

    #[test]
    fn dense_output_matches_at_step_ends() {
        let tol = Tolerances::default();
        let f = |t: f64, y: &[f64; 1]| [t.cos() * y[0]];
        let traj = integrate(f, 0.0, [1.0], 3.0, &tol).unwrap();
        for s in &traj.steps {
            let a = s.interpolate(s.t1())[0];
            let b = s.end()[0];
            assert!((a - b).abs() < 1e-14);
        }
    }
}
