use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{Matrix, RandomSource};

use super::denoiser::Denoiser;
use super::schedule::NoiseSchedule;

/// ODE integrator for the probability-flow sampler.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    /// Second order: Euler proposal plus trapezoidal slope correction.
    Heun,
    /// First order.
    Euler,
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heun" => Ok(Solver::Heun),
            "euler" => Ok(Solver::Euler),
            other => Err(Error::Config(format!("unknown sampler `{other}` (expected heun or euler)"))),
        }
    }
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Heun => "heun",
            Solver::Euler => "euler",
        }
    }
}

/// Slope `dx/dt = (x - D(x; t)) / t` of the probability-flow ODE.
fn slope<D: Denoiser + ?Sized>(den: &D, x: &Matrix<f64>, t: f64) -> Result<Matrix<f64>> {
    let d = den.denoise(x, t)?;
    let mut g = x.clone();
    for (gv, dv) in g.as_mut_slice().iter_mut().zip(d.as_slice()) {
        *gv = (*gv - dv) / t;
    }
    Ok(g)
}

fn axpy(x: &Matrix<f64>, h: f64, g: &Matrix<f64>) -> Matrix<f64> {
    let mut out = x.clone();
    for (o, gv) in out.as_mut_slice().iter_mut().zip(g.as_slice()) {
        *o += h * gv;
    }
    out
}

/// Integrates the probability-flow ODE from `times[0]` down through `times`.
///
/// The Heun correction is skipped when stepping to `t = 0`, where the slope
/// is undefined; that final Euler step returns `D(x; t_{N-1})` exactly.
pub fn integrate<D: Denoiser + ?Sized>(
    den: &D,
    times: &[f64],
    mut x: Matrix<f64>,
    solver: Solver,
) -> Result<Matrix<f64>> {
    if x.cols() != den.width() {
        return Err(Error::shape(format!(
            "sampler state has {} features, denoiser expects {}",
            x.cols(),
            den.width()
        )));
    }
    if x.rows() == 0 {
        return Ok(x);
    }
    for w in times.windows(2) {
        let (t, t_next) = (w[0], w[1]);
        if t_next == 0.0 {
            // x + (0 - t)(x - D)/t, without the rounding of the round trip
            x = den.denoise(&x, t)?;
            continue;
        }
        let h = t_next - t;
        let g = slope(den, &x, t)?;
        let proposal = axpy(&x, h, &g);
        x = match solver {
            Solver::Heun => {
                let g_next = slope(den, &proposal, t_next)?;
                let mut next = x;
                for ((v, a), b) in next.as_mut_slice().iter_mut().zip(g.as_slice()).zip(g_next.as_slice()) {
                    *v += h * 0.5 * (a + b);
                }
                next
            }
            Solver::Euler => proposal,
        };
    }
    Ok(x)
}

/// Initial sampler state `x ~ N(0, sigma_max^2 I)`.
pub fn initial_noise(rng: &mut RandomSource, count: usize, width: usize, sigma_max: f64) -> Matrix<f64> {
    rng.gaussian_batch::<f64>(count, width).map(|v| v * sigma_max)
}

/// Rows integrated together; chunks run in parallel and are independent.
const SAMPLE_CHUNK: usize = 512;

/// Draws `count` raw samples (before post-processing).
///
/// All initial noise is drawn up front from `rng`, so the result does not
/// depend on the thread count.
pub fn sample<D: Denoiser + ?Sized>(
    den: &D,
    schedule: &NoiseSchedule,
    rng: &mut RandomSource,
    count: usize,
    solver: Solver,
) -> Result<Matrix<f64>> {
    schedule.validate()?;
    let width = den.width();
    let times = schedule.discretize();
    let noise = initial_noise(rng, count, width, schedule.sigma_max);
    if count <= SAMPLE_CHUNK {
        return integrate(den, &times, noise, solver);
    }
    let starts: Vec<usize> = (0..count).step_by(SAMPLE_CHUNK).collect();
    let chunks = starts
        .par_iter()
        .map(|&s| {
            let idx: Vec<usize> = (s..(s + SAMPLE_CHUNK).min(count)).collect();
            integrate(den, &times, noise.select_rows(&idx), solver)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut data = Vec::with_capacity(count * width);
    for c in chunks {
        data.extend(c.into_vec());
    }
    Matrix::from_vec(count, width, data)
}

pub fn heun_sample<D: Denoiser + ?Sized>(
    den: &D,
    schedule: &NoiseSchedule,
    rng: &mut RandomSource,
    count: usize,
) -> Result<Matrix<f64>> {
    sample(den, schedule, rng, count, Solver::Heun)
}

pub fn euler_sample<D: Denoiser + ?Sized>(
    den: &D,
    schedule: &NoiseSchedule,
    rng: &mut RandomSource,
    count: usize,
) -> Result<Matrix<f64>> {
    sample(den, schedule, rng, count, Solver::Euler)
}
