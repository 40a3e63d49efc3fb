//! Finite-rank stabilizing feedback on the unstable modal block, lifted to the
//! full truncation.
//!
//! The gain is synthesized by solving the continuous algebraic Riccati
//! equation `A'X + XA - XBB'X + rho I = 0` (matrix-sign-function method) and
//! bisecting on the state weight `rho` until the closed-loop spectral
//! abscissa of the unstable block sits at or below the requested margin.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::linalg::{spectral_abscissa, spectral_norm};
use crate::spectral::ModalModel;
use crate::{Error, Result};

/// Gain on the unstable block together with its lift `F w = K (w_1..w_n)`.
#[derive(Debug, Clone)]
pub struct FeedbackGain {
    /// m x n gain on the unstable block.
    pub gain: DMatrix<f64>,
    /// Operator norm of the lifted feedback (= spectral norm of K).
    pub norm: f64,
    /// Closed-loop abscissa of the unstable block under this gain.
    pub block_abscissa: f64,
    /// State weight at which the Riccati design met the margin.
    pub state_weight: f64,
}

impl FeedbackGain {
    /// Number of modes the feedback acts on.
    pub fn n_modes(&self) -> usize {
        self.gain.ncols()
    }

    pub fn n_inputs(&self) -> usize {
        self.gain.nrows()
    }

    /// Applies the lifted feedback `F w = K (w_1..w_n)` to a full modal state.
    pub fn apply(&self, state: &DVector<f64>) -> DVector<f64> {
        let n = self.n_modes();
        if n == 0 {
            return DVector::zeros(self.n_inputs());
        }
        &self.gain * state.rows(0, n)
    }

    /// The lifted m x J map `[K 0]`.
    pub fn lifted(&self, dim: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_inputs(), dim);
        out.view_mut((0, 0), (self.n_inputs(), self.n_modes()))
            .copy_from(&self.gain);
        out
    }
}

/// Rank test of the controllability matrix `[B AB .. A^(n-1)B]`; on failure
/// the most deficient mode (smallest PBH singular value) is reported.
fn check_controllable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    if n == 0 {
        return Ok(());
    }
    let m = b.ncols();
    let mut ctrb = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        ctrb.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * &block;
    }
    let sv = ctrb.svd(false, false).singular_values;
    let tol = sv.max() * (n.max(n * m) as f64) * f64::EPSILON;
    let rank = sv.iter().filter(|&&s| s > tol.max(1e-300)).count();
    if rank == n {
        return Ok(());
    }
    // PBH diagnosis: find the eigenvalue whose [A - lambda I, B] pencil is
    // closest to rank deficiency
    let eigs = a.complex_eigenvalues();
    let mut worst = (0usize, f64::INFINITY);
    for (i, lam) in eigs.iter().enumerate() {
        let mut pencil = DMatrix::zeros(n, n + m);
        let mut shifted = a.clone();
        for d in 0..n {
            shifted[(d, d)] -= lam.re;
        }
        pencil.view_mut((0, 0), (n, n)).copy_from(&shifted);
        pencil.view_mut((0, n), (n, m)).copy_from(b);
        let smin = pencil
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if smin < worst.1 {
            worst = (i, smin);
        }
    }
    Err(Error::Uncontrollable {
        mode_index: worst.0,
        eigenvalue: eigs[worst.0].re,
    })
}

/// Solves `A'X + XA - XBB'X + Q = 0` (R = I) by the scaled matrix-sign
/// iteration on the Hamiltonian.
fn solve_care(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let bbt = b * b.transpose();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&bbt));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let mut z = h;
    for _ in 0..120 {
        let lu = z.clone().lu();
        // determinant scaling via sum of log |u_ii|
        let mut log_det = 0.0;
        for i in 0..2 * n {
            log_det += lu.u()[(i, i)].abs().max(1e-300).ln();
        }
        let mu = (-log_det / (2 * n) as f64).exp().clamp(1e-4, 1e4);
        let inv = match lu.try_inverse() {
            Some(inv) => inv,
            None => {
                return Err(Error::MarginUnachievable {
                    requested: f64::NAN,
                    achieved: f64::NAN,
                })
            }
        };
        let next = (&z * mu + inv / mu) * 0.5;
        let delta = (&next - &z).norm();
        let scale = next.norm();
        z = next;
        if delta <= 1e-14 * scale {
            break;
        }
    }

    // stable invariant subspace = range of (I - sign(H)) / 2
    let proj = (DMatrix::identity(2 * n, 2 * n) - &z) * 0.5;
    let qr = proj.col_piv_qr();
    let qmat = qr.q();
    let u1 = qmat.view((0, 0), (n, n)).into_owned();
    let u2 = qmat.view((n, 0), (n, n)).into_owned();
    let x_t = u1
        .transpose()
        .lu()
        .solve(&u2.transpose())
        .ok_or(Error::MarginUnachievable {
            requested: f64::NAN,
            achieved: f64::NAN,
        })?;
    let x = x_t.transpose();
    Ok((&x + x.transpose()) * 0.5)
}

fn gain_for_weight(a: &DMatrix<f64>, b: &DMatrix<f64>, rho: f64) -> Result<(DMatrix<f64>, f64)> {
    let n = a.nrows();
    let q = DMatrix::identity(n, n) * rho;
    let x = solve_care(a, b, &q)?;
    let k = -(b.transpose() * x);
    let abscissa = spectral_abscissa(&(a + b * &k));
    Ok((k, abscissa))
}

/// Designs `u = K z` on the unstable block `(A, B)` so that the closed-loop
/// abscissa is at or below `-target_margin`.
pub fn design_gain(
    block: &DMatrix<f64>,
    inputs: &DMatrix<f64>,
    target_margin: f64,
) -> Result<FeedbackGain> {
    if !(target_margin > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "target margin must be positive, got {target_margin}"
        )));
    }
    let n = block.nrows();
    let m = inputs.ncols();
    if n == 0 {
        return Ok(FeedbackGain {
            gain: DMatrix::zeros(m, 0),
            norm: 0.0,
            block_abscissa: f64::NEG_INFINITY,
            state_weight: 0.0,
        });
    }
    check_controllable(block, inputs)?;

    // grow the state weight geometrically until the margin holds, then bisect
    // back toward the smallest passing weight
    let mut rho = 1.0;
    let mut best: Option<(DMatrix<f64>, f64, f64)> = None;
    let mut rho_fail = None;
    for _ in 0..16 {
        let (k, abscissa) = gain_for_weight(block, inputs, rho)?;
        if abscissa <= -target_margin {
            best = Some((k, abscissa, rho));
            break;
        }
        rho_fail = Some(rho);
        rho *= 10.0;
    }
    let (mut k, mut abscissa, mut rho_pass) = best.ok_or_else(|| {
        let achieved = gain_for_weight(block, inputs, rho / 10.0)
            .map(|(_, a)| a)
            .unwrap_or(f64::NAN);
        Error::MarginUnachievable {
            requested: target_margin,
            achieved,
        }
    })?;
    if let Some(mut lo) = rho_fail {
        for _ in 0..40 {
            if rho_pass / lo <= 1.05 {
                break;
            }
            let mid = (lo * rho_pass).sqrt();
            let (km, am) = gain_for_weight(block, inputs, mid)?;
            if am <= -target_margin {
                k = km;
                abscissa = am;
                rho_pass = mid;
            } else {
                lo = mid;
            }
        }
    }
    Ok(FeedbackGain {
        norm: spectral_norm(&k),
        gain: k,
        block_abscissa: abscissa,
        state_weight: rho_pass,
    })
}

/// Wraps an externally supplied gain matrix (e.g. re-imported from CSV),
/// verifying that it actually stabilizes the given unstable block.
pub fn gain_from_matrix(
    k: DMatrix<f64>,
    block: &DMatrix<f64>,
    inputs: &DMatrix<f64>,
) -> Result<FeedbackGain> {
    assert_eq!(k.ncols(), block.nrows(), "gain/block mismatch");
    assert_eq!(k.nrows(), inputs.ncols(), "gain/input mismatch");
    let abscissa = if block.nrows() == 0 {
        f64::NEG_INFINITY
    } else {
        spectral_abscissa(&(block + inputs * &k))
    };
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz {
            real_part: abscissa,
        });
    }
    Ok(FeedbackGain {
        norm: spectral_norm(&k),
        gain: k,
        block_abscissa: abscissa,
        state_weight: f64::NAN,
    })
}

/// Full truncated closed-loop matrix `diag(lambda) + B_full [K 0]`, verified
/// Hurwitz (the spillover check of the finite-rank design).
pub fn closed_loop_matrix(model: &ModalModel, gain: &FeedbackGain) -> Result<DMatrix<f64>> {
    assert_eq!(gain.n_modes(), model.n_unstable, "gain/model mismatch");
    assert_eq!(gain.n_inputs(), model.n_inputs(), "gain/model mismatch");
    let a_cl = model.generator() + &model.input_matrix * gain.lifted(model.dim());
    let abscissa = spectral_abscissa(&a_cl);
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz {
            real_part: abscissa,
        });
    }
    Ok(a_cl)
}

/// Design summary written into run reports.
#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub n_unstable: usize,
    pub gain_norm: f64,
    pub block_abscissa: f64,
    pub closed_loop_abscissa: f64,
    pub state_weight: f64,
    pub gain: Vec<Vec<f64>>,
}

impl DesignReport {
    pub fn new(model: &ModalModel, gain: &FeedbackGain, a_cl: &DMatrix<f64>) -> Self {
        Self {
            n_unstable: model.n_unstable,
            gain_norm: gain.norm,
            block_abscissa: gain.block_abscissa,
            closed_loop_abscissa: spectral_abscissa(a_cl),
            state_weight: gain.state_weight,
            gain: (0..gain.n_inputs())
                .map(|r| gain.gain.row(r).iter().copied().collect())
                .collect(),
        }
    }
}
