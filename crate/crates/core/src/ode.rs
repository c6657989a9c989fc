//! Adaptive Dormand-Prince 5(4) integrator that lands exactly on the
//! requested output times.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite derivative at t = {t}")]
    NonFinite { t: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
    #[error("output grid must be strictly monotone with at least two points")]
    BadGrid,
    #[error("right-hand side failed at t = {t}: {message}")]
    Rhs { t: f64, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rel: 1e-10, abs: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Dopri5 {
    pub tol: Tolerances,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { tol: Tolerances::default(), max_steps: 2_000_000, h_max: f64::INFINITY }
    }
}

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b_hat
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Right-hand side `rhs(t, y, dy)`.
pub trait OdeSystem {
    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), OdeError>;
}

impl<F> OdeSystem for F
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), OdeError>,
{
    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), OdeError> {
        self(t, y, dy)
    }
}

impl Dopri5 {
    pub fn with_tolerances(tol: Tolerances) -> Self {
        Self { tol, ..Self::default() }
    }

    /// Integrates from `times[0]` (where the state is `y0`) through every
    /// later entry of `times`, which may be increasing or decreasing.
    /// Returns one state per entry of `times`.
    pub fn solve<S: OdeSystem>(&self, sys: &mut S, times: &[f64], y0: &[f64]) -> Result<Vec<Vec<f64>>, OdeError> {
        let mut out = Vec::with_capacity(times.len());
        self.solve_with(sys, times, y0, |_, _, y| {
            out.push(y.to_vec());
            Ok(())
        })?;
        Ok(out)
    }

    /// Like [`Dopri5::solve`] but hands each output state to `observe`
    /// (index, time, state) instead of collecting it.
    pub fn solve_with<S, O>(&self, sys: &mut S, times: &[f64], y0: &[f64], mut observe: O) -> Result<(), OdeError>
    where
        S: OdeSystem,
        O: FnMut(usize, f64, &[f64]) -> Result<(), OdeError>,
    {
        if times.len() < 2 {
            return Err(OdeError::BadGrid);
        }
        let dir = (times[1] - times[0]).signum();
        if dir == 0.0 || times.windows(2).any(|w| (w[1] - w[0]) * dir <= 0.0) {
            return Err(OdeError::BadGrid);
        }
        let n = y0.len();
        let mut y = y0.to_vec();
        let mut t = times[0];
        observe(0, t, &y)?;

        let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
        let mut ytmp = vec![0.0; n];
        let mut ynew = vec![0.0; n];
        eval(sys, t, &y, &mut k[0])?;

        let span = (times[times.len() - 1] - times[0]).abs();
        let mut h = self.initial_step(sys, t, &y, &k[0], dir, span)?;
        let mut steps = 0usize;

        for (idx, &target) in times.iter().enumerate().skip(1) {
            while (target - t) * dir > 0.0 {
                if steps >= self.max_steps {
                    return Err(OdeError::TooManySteps { t, max_steps: self.max_steps });
                }
                steps += 1;
                let remaining = (target - t).abs();
                let mut hs = h.min(self.h_max).min(remaining);
                // avoid leaving a sliver before the grid point
                if remaining - hs < 1e-3 * hs {
                    hs = remaining;
                }
                let landing = hs == remaining;
                let hd = hs * dir;
                let err = self.step(sys, t, hd, &y, &mut k, &mut ytmp, &mut ynew)?;
                let eps = f64::EPSILON * t.abs().max(1.0);
                if err <= 1.0 {
                    t = if landing { target } else { t + hd };
                    std::mem::swap(&mut y, &mut ynew);
                    // FSAL: k[6] holds f(t + h, y_new)
                    let (first, rest) = k.split_at_mut(1);
                    first[0].copy_from_slice(&rest[5]);
                    let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    // a landing step is often artificially short; do not let it shrink h
                    h = if landing { h.max(hs * fac) } else { hs * fac };
                } else {
                    let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                    h = hs * fac;
                    if h < eps * 10.0 {
                        return Err(OdeError::StepSizeUnderflow { t, h });
                    }
                }
            }
            observe(idx, t, &y)?;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn step<S: OdeSystem>(
        &self,
        sys: &mut S,
        t: f64,
        h: f64,
        y: &[f64],
        k: &mut [Vec<f64>],
        ytmp: &mut [f64],
        ynew: &mut [f64],
    ) -> Result<f64, OdeError> {
        let n = y.len();
        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k[0][i];
        }
        eval(sys, t + C2 * h, ytmp, &mut k[1])?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
        }
        eval(sys, t + C3 * h, ytmp, &mut k[2])?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        eval(sys, t + C4 * h, ytmp, &mut k[3])?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        eval(sys, t + C5 * h, ytmp, &mut k[4])?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
        }
        eval(sys, t + h, ytmp, &mut k[5])?;
        for i in 0..n {
            ynew[i] = y[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
        }
        eval(sys, t + h, ynew, &mut k[6])?;
        let mut acc = 0.0;
        for i in 0..n {
            let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = self.tol.abs + self.tol.rel * y[i].abs().max(ynew[i].abs());
            acc += (e / sc).powi(2);
        }
        let err = (acc / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            return Ok(f64::INFINITY);
        }
        // k[6] is moved into k[0] by the caller on acceptance
        Ok(err)
    }

    fn initial_step<S: OdeSystem>(
        &self,
        sys: &mut S,
        t: f64,
        y: &[f64],
        f0: &[f64],
        dir: f64,
        span: f64,
    ) -> Result<f64, OdeError> {
        let n = y.len().max(1) as f64;
        let sc = |i: usize| self.tol.abs + self.tol.rel * y[i].abs();
        let d0 = (y.iter().enumerate().map(|(i, v)| (v / sc(i)).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (f0.iter().enumerate().map(|(i, v)| (v / sc(i)).powi(2)).sum::<f64>() / n).sqrt();
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span);
        let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + dir * h0 * b).collect();
        let mut f1 = vec![0.0; y.len()];
        eval(sys, t + dir * h0, &y1, &mut f1)?;
        let d2 =
            (f1.iter().zip(f0).enumerate().map(|(i, (a, b))| ((a - b) / sc(i)).powi(2)).sum::<f64>() / n).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        Ok((100.0 * h0).min(h1).min(span).max(f64::EPSILON * 100.0))
    }
}

fn eval<S: OdeSystem>(sys: &mut S, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), OdeError> {
    sys.rhs(t, y, dy)?;
    if dy.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::NonFinite { t });
    }
    Ok(())
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect(),
    }
}
