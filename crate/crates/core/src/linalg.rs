//! Small dense linear-algebra helpers shared across the lab: operator norms,
//! the phi-1 function of exponential integrators, and graded matrix-exponential
//! grids used by the semigroup envelopes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    assert_eq!(m.nrows(), m.ncols(), "abscissa needs a square matrix");
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// phi1(z) = (e^z - 1)/z with the series fallback near zero, so that
/// `h * phi1(lambda * h)` is the exact integral of e^(lambda s) over [0, h].
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

/// e^(A dt) via Pade scaling-and-squaring.
pub fn expm(a: &DMatrix<f64>, dt: f64) -> DMatrix<f64> {
    (a * dt).exp()
}

/// Applies e^(A dt) to a vector by plain Taylor summation. Only valid when
/// `|A| * dt` is small; callers keep it under ~0.5 so the series converges in
/// a handful of terms with no cancellation.
pub fn expm_apply_small(a: &DMatrix<f64>, dt: f64, v: &DVector<f64>) -> DVector<f64> {
    let mut term = v.clone();
    let mut sum = v.clone();
    for k in 1..=24 {
        term = a * &term * (dt / k as f64);
        sum += &term;
        if term.norm() <= 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

/// Least-squares slope of y over x.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - xm) * (y - ym);
        den += (x - xm) * (x - xm);
    }
    num / den
}

/// Uniformly random direction on the unit sphere.
pub fn random_unit_vector<R: Rng>(rng: &mut R, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Time grid for semigroup envelopes: a short geometric segment resolving the
/// fast transient of stiff generators, followed by a uniform segment on the
/// envelope's own timescale.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    pub times: Vec<f64>,
    pub fast_step: f64,
    pub slow_step: f64,
}

impl TimeGrid {
    /// `fast_scale` and `slow_scale` are rate magnitudes (1/time); steps are
    /// 0.005 of the corresponding timescale.
    pub fn graded(horizon: f64, fast_scale: f64, slow_scale: f64) -> Self {
        let fast_step = 0.005 / fast_scale.max(1.0);
        let slow_step = (0.005 / slow_scale.max(1e-2)).max(fast_step);
        let mut times = vec![0.0];
        let mut t = 0.0;
        let mut dt = fast_step;
        while t < horizon {
            t += dt;
            times.push(t.min(horizon));
            if t >= horizon {
                break;
            }
            if dt < slow_step {
                dt = (dt * 1.15).min(slow_step);
            }
        }
        Self {
            times,
            fast_step,
            slow_step,
        }
    }
}

/// Matrix-exponential snapshots e^(A t_i) on a graded grid, with their
/// spectral norms. Snapshots are chained products, so building costs one
/// dense exponential per distinct step size plus one multiplication per node.
#[derive(Debug, Clone)]
pub struct PropagatorGrid {
    pub generator: DMatrix<f64>,
    pub times: Vec<f64>,
    pub snapshots: Vec<DMatrix<f64>>,
    pub norms: Vec<f64>,
    pub generator_norm: f64,
}

impl PropagatorGrid {
    pub fn build(a: &DMatrix<f64>, horizon: f64, slow_scale: f64) -> Result<Self> {
        let dim = a.nrows();
        let a_norm = spectral_norm(a);
        let grid = TimeGrid::graded(horizon.max(0.0), a_norm, slow_scale);
        if grid.times.len() > 400_000 {
            return Err(Error::EnvelopeSearchStalled { cap: horizon });
        }
        let mut snapshots = Vec::with_capacity(grid.times.len());
        let mut norms = Vec::with_capacity(grid.times.len());
        snapshots.push(DMatrix::identity(dim, dim));
        norms.push(1.0);
        let mut cached_dt = -1.0f64;
        let mut cached_exp = DMatrix::identity(dim, dim);
        for i in 1..grid.times.len() {
            let dt = grid.times[i] - grid.times[i - 1];
            if (dt - cached_dt).abs() > 1e-15 * dt.max(1e-300) {
                cached_exp = expm(a, dt);
                cached_dt = dt;
            }
            let next = &cached_exp * &snapshots[i - 1];
            norms.push(spectral_norm(&next));
            snapshots.push(next);
        }
        Ok(Self {
            generator: a.clone(),
            times: grid.times,
            snapshots,
            norms,
            generator_norm: a_norm,
        })
    }
}
