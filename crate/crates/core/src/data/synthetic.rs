//! Small in-memory stand-ins for the benchmark data: Darcy flow through a
//! two-phase random medium and decaying-forced vorticity on a torus.
//!
//! Every sample draws from its own ChaCha8 stream, so sample `i` is the same
//! whatever the total count.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fft::{Fft2Plan, C};
use crate::tensor::{Scalar, Tensor};

use super::dataset::{Dataset, Split};
use super::manifest::Windowing;
use super::normalize::NormPolicy;

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Signed frequency of index `p` on an `n`-point periodic axis.
fn frequency(p: usize, n: usize) -> f64 {
    if p <= n / 2 {
        p as f64
    } else {
        p as f64 - n as f64
    }
}

/// Zero-mean Gaussian random field with spectrum `(4 pi^2 |k|^2 + tau^2)^(-alpha/2)`.
pub fn gaussian_field(n: usize, alpha: f64, tau: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let plan = Fft2Plan::<f64>::new(n, n)?;
    let wh = plan.half_width();
    let mut spec = vec![C::new(0.0, 0.0); n * wh];
    for p in 0..n {
        for q in 0..wh {
            if p == 0 && q == 0 {
                continue;
            }
            let k2 = frequency(p, n).powi(2) + (q as f64).powi(2);
            let amp = (TAU * TAU * k2 + tau * tau).powf(-alpha / 2.0) * (n * n) as f64;
            let (re, im): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
            spec[p * wh + q] = C::new(re, im) * amp;
        }
    }
    let mut out = vec![0.0; n * n];
    plan.inverse_plane(&spec, &mut out);
    Ok(out)
}

/// Coefficient values of the two phases.
pub const DARCY_PHASES: (f64, f64) = (12.0, 3.0);

/// Piecewise-constant permeability: the high phase where a smooth random
/// field is non-negative.
pub fn darcy_coefficient(n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let field = gaussian_field(n, 2.0, 3.0, rng)?;
    Ok(field
        .into_iter()
        .map(|v| if v >= 0.0 { DARCY_PHASES.0 } else { DARCY_PHASES.1 })
        .collect())
}

/// Solve `-div(a grad u) = 1` on the unit square with `u = 0` on the
/// boundary, on the `n x n` node grid of `a`, using the five-point stencil
/// with harmonic face averages and Jacobi-preconditioned conjugate gradients.
pub fn darcy_solve(a: &[f64], n: usize) -> Result<Vec<f64>> {
    if n < 3 || a.len() != n * n {
        return Err(Error::Data(format!("Darcy solve needs an n x n coefficient with n >= 3, n = {n}")));
    }
    let m = n - 2;
    let h2 = 1.0 / ((n - 1) as f64).powi(2);
    let at = |i: usize, j: usize| a[i * n + j];
    let face = |x: f64, y: f64| 2.0 * x * y / (x + y);
    // Face coefficients of interior node (i, j): north, south, west, east.
    let faces: Vec<[f64; 4]> = (0..m * m)
        .map(|k| {
            let (i, j) = (k / m + 1, k % m + 1);
            let c = at(i, j);
            [
                face(c, at(i - 1, j)) / h2,
                face(c, at(i + 1, j)) / h2,
                face(c, at(i, j - 1)) / h2,
                face(c, at(i, j + 1)) / h2,
            ]
        })
        .collect();
    let diag: Vec<f64> = faces.iter().map(|f| f.iter().sum()).collect();
    let apply = |x: &[f64], out: &mut [f64]| {
        for k in 0..m * m {
            let (i, j) = (k / m, k % m);
            let f = &faces[k];
            let mut v = diag[k] * x[k];
            if i > 0 {
                v -= f[0] * x[k - m];
            }
            if i + 1 < m {
                v -= f[1] * x[k + m];
            }
            if j > 0 {
                v -= f[2] * x[k - 1];
            }
            if j + 1 < m {
                v -= f[3] * x[k + 1];
            }
            out[k] = v;
        }
    };
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();

    let len = m * m;
    let mut u = vec![0.0; len];
    let mut r = vec![1.0; len];
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; len];
    let mut rz = dot(&r, &z);
    let target = 1e-10 * dot(&r, &r).sqrt();
    for _ in 0..10 * len {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..len {
            u[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if dot(&r, &r).sqrt() <= target {
            break;
        }
        for k in 0..len {
            z[k] = r[k] / diag[k];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..len {
            p[k] = z[k] + beta * p[k];
        }
    }

    let mut out = vec![0.0; n * n];
    for k in 0..len {
        out[(k / m + 1) * n + k % m + 1] = u[k];
    }
    Ok(out)
}

/// `n` coefficient/pressure pairs on an `s x s` grid, each `(n, 1, s, s)`.
pub fn darcy_pairs(n: usize, s: usize, seed: u64) -> Result<(Tensor<f64>, Tensor<f64>)> {
    let (mut a_all, mut u_all) = (Vec::with_capacity(n * s * s), Vec::with_capacity(n * s * s));
    for i in 0..n {
        let a = darcy_coefficient(s, &mut sample_rng(seed, i))?;
        u_all.extend(darcy_solve(&a, s)?);
        a_all.extend(a);
    }
    Ok((
        Tensor::from_vec(&[n, 1, s, s], a_all)?,
        Tensor::from_vec(&[n, 1, s, s], u_all)?,
    ))
}

/// Darcy dataset with coordinate channels; train and test samples come from
/// disjoint streams.
pub fn darcy_dataset<T: Scalar>(n_train: usize, n_test: usize, s: usize, seed: u64) -> Result<Dataset<T>> {
    let (a, u) = darcy_pairs(n_train + n_test, s, seed)?;
    let all = Split::new(a.cast(), u.cast())?;
    let train = all.gather(&(0..n_train).collect::<Vec<_>>())?;
    let test = all.gather(&(n_train..n_train + n_test).collect::<Vec<_>>())?;
    Dataset::new("darcy-synthetic", train, test, NormPolicy::ZScore, true, None)
}

/// Vorticity solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsParams {
    pub resolution: usize,
    pub frames: usize,
    /// Simulated time between stored frames.
    pub interval: f64,
    pub dt: f64,
    pub viscosity: f64,
}

impl Default for NsParams {
    fn default() -> Self {
        Self {
            resolution: 64,
            frames: 20,
            interval: 1.0,
            dt: 2.5e-3,
            viscosity: 1e-3,
        }
    }
}

struct Vorticity {
    plan: Fft2Plan<f64>,
    n: usize,
    kx: Vec<f64>,
    ky: Vec<f64>,
    dealias: Vec<bool>,
    forcing: Vec<C<f64>>,
}

impl Vorticity {
    fn new(n: usize) -> Result<Self> {
        let plan = Fft2Plan::new(n, n)?;
        let wh = plan.half_width();
        let mut kx = vec![0.0; n * wh];
        let mut ky = vec![0.0; n * wh];
        let mut dealias = vec![false; n * wh];
        for p in 0..n {
            for q in 0..wh {
                let i = p * wh + q;
                let nyquist = n % 2 == 0 && (p == n / 2 || q == n / 2);
                if !nyquist {
                    kx[i] = TAU * frequency(p, n);
                    ky[i] = TAU * q as f64;
                }
                dealias[i] = frequency(p, n).abs() <= n as f64 / 3.0 && q as f64 <= n as f64 / 3.0;
            }
        }
        let f: Vec<f64> = (0..n * n)
            .map(|i| {
                let (x, y) = ((i / n) as f64 / n as f64, (i % n) as f64 / n as f64);
                0.1 * ((TAU * (x + y)).sin() + (TAU * (x + y)).cos())
            })
            .collect();
        let mut forcing = vec![C::new(0.0, 0.0); n * wh];
        plan.forward_plane(&f, &mut forcing);
        Ok(Self {
            plan,
            n,
            kx,
            ky,
            dealias,
            forcing,
        })
    }

    /// Spectrum of `f - u . grad(w)`, dealiased.
    fn tendency(&self, w_hat: &[C<f64>]) -> Vec<C<f64>> {
        let n = self.n;
        let i = C::new(0.0, 1.0);
        let real = |spec: Vec<C<f64>>| {
            let mut out = vec![0.0; n * n];
            self.plan.inverse_plane(&spec, &mut out);
            out
        };
        let k2 = |j: usize| self.kx[j].powi(2) + self.ky[j].powi(2);
        let psi: Vec<C<f64>> = (0..w_hat.len())
            .map(|j| if k2(j) > 0.0 { w_hat[j] / k2(j) } else { C::new(0.0, 0.0) })
            .collect();
        let ux = real(psi.iter().enumerate().map(|(j, &v)| i * self.ky[j] * v).collect());
        let uy = real(psi.iter().enumerate().map(|(j, &v)| -i * self.kx[j] * v).collect());
        let wx = real(w_hat.iter().enumerate().map(|(j, &v)| i * self.kx[j] * v).collect());
        let wy = real(w_hat.iter().enumerate().map(|(j, &v)| i * self.ky[j] * v).collect());
        let adv: Vec<f64> = (0..n * n).map(|j| ux[j] * wx[j] + uy[j] * wy[j]).collect();
        let mut adv_hat = vec![C::new(0.0, 0.0); w_hat.len()];
        self.plan.forward_plane(&adv, &mut adv_hat);
        adv_hat
            .iter()
            .enumerate()
            .map(|(j, &a)| if self.dealias[j] { self.forcing[j] - a } else { C::new(0.0, 0.0) })
            .collect()
    }

    /// Heun predictor-corrector for the explicit part, Crank-Nicolson for
    /// viscosity.
    fn step(&self, w_hat: &mut [C<f64>], dt: f64, nu: f64) {
        let cn = |w: &[C<f64>], g: &[C<f64>]| -> Vec<C<f64>> {
            (0..w.len())
                .map(|j| {
                    let d = 0.5 * dt * nu * (self.kx[j].powi(2) + self.ky[j].powi(2));
                    (w[j] * (1.0 - d) + g[j] * dt) / (1.0 + d)
                })
                .collect()
        };
        let g1 = self.tendency(w_hat);
        let predicted = cn(w_hat, &g1);
        let g2 = self.tendency(&predicted);
        let avg: Vec<C<f64>> = g1.iter().zip(&g2).map(|(a, b)| (a + b) * 0.5).collect();
        w_hat.copy_from_slice(&cn(w_hat, &avg));
    }
}

/// `n` vorticity trajectories as `(n, frames, s, s)`; frame `k` is the
/// state after `(k + 1) * interval` time units.
pub fn ns_trajectories(n: usize, params: &NsParams, seed: u64) -> Result<Tensor<f64>> {
    let s = params.resolution;
    if params.dt <= 0.0 || params.interval < params.dt || params.frames == 0 {
        return Err(Error::Config(format!("invalid vorticity solver settings {params:?}")));
    }
    let solver = Vorticity::new(s)?;
    let steps = (params.interval / params.dt).round() as usize;
    let mut out = Vec::with_capacity(n * params.frames * s * s);
    for i in 0..n {
        let w0 = gaussian_field(s, 2.5, 7.0, &mut sample_rng(seed, i))?;
        let scale = 7.0f64.powf(1.5) * 2.0f64.sqrt();
        let w0: Vec<f64> = w0.iter().map(|v| v * scale).collect();
        let mut w_hat = vec![C::new(0.0, 0.0); s * solver.plan.half_width()];
        solver.plan.forward_plane(&w0, &mut w_hat);
        for _ in 0..params.frames {
            for _ in 0..steps {
                solver.step(&mut w_hat, params.dt, params.viscosity);
            }
            let mut frame = vec![0.0; s * s];
            solver.plan.inverse_plane(&w_hat, &mut frame);
            if frame.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("vorticity trajectory {i}")));
            }
            out.extend(frame);
        }
    }
    Tensor::from_vec(&[n, params.frames, s, s], out)
}

/// Windowed trajectory dataset with scalar vorticity channels.
pub fn ns_dataset<T: Scalar>(
    n_train: usize,
    n_test: usize,
    params: &NsParams,
    windowing: Windowing,
    seed: u64,
) -> Result<Dataset<T>> {
    let traj = ns_trajectories(n_train + n_test, params, seed)?;
    let (n, t, s) = (n_train + n_test, params.frames, params.resolution);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        let one = Tensor::from_vec(&[1, t, s, s], traj.data()[i * t * s * s..(i + 1) * t * s * s].to_vec())?;
        let (x, y) = super::transform::ns_windows(&one, windowing.history, windowing.horizon)?;
        xs.extend(x.data().iter().map(|&v| T::of(v)));
        ys.extend(y.data().iter().map(|&v| T::of(v)));
    }
    let all = Split::new(
        Tensor::from_vec(&[n, windowing.history, s, s], xs)?,
        Tensor::from_vec(&[n, windowing.horizon, s, s], ys)?,
    )?;
    let train = all.gather(&(0..n_train).collect::<Vec<_>>())?;
    let test = all.gather(&(n_train..n).collect::<Vec<_>>())?;
    Dataset::new("ns-synthetic", train, test, NormPolicy::ZScore, false, Some(windowing))
}
