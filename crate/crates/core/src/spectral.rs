//! Modal truncation of the 1-D reaction-diffusion operator
//! `A = d²/dx² + c(x)·` with Dirichlet ends on `(0, L)`.
//!
//! The operator is discretized by symmetric second differences on a uniform
//! grid and diagonalized densely. Raw finite-difference eigenvalues carry the
//! well-known `O((j pi h)^2)` dispersion error of the discrete Laplacian, so
//! the returned eigenvalues are corrected by the constant-coefficient
//! dispersion gap `(j pi / L)^2 - (4/h^2) sin^2(j pi h / (2L))`, which is
//! exact for constant `c` and improves the variable-`c` error to be uniform
//! in the mode index. The raw values stay available for convergence studies.
//!
//! Eigenfunctions are sampled on the grid (zero at both ends), orthonormal in
//! the trapezoid-rule inner product, and sign-normalized so their first
//! nonzero sample is positive.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use crate::{Error, Result};

/// Spatial problem data sampled on a uniform grid over `[0, L]`, endpoints
/// included.
#[derive(Debug, Clone)]
pub struct SpatialProblem {
    pub length: f64,
    pub reaction: Vec<f64>,
    pub input_shapes: Vec<Vec<f64>>,
}

impl SpatialProblem {
    pub fn new(length: f64, reaction: Vec<f64>, input_shapes: Vec<Vec<f64>>) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "domain length must be positive and finite, got {length}"
            )));
        }
        if reaction.len() < 16 {
            return Err(Error::InvalidConfig(format!(
                "need at least 16 grid points, got {}",
                reaction.len()
            )));
        }
        if let Some(i) = reaction.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample {
                what: "reaction coefficient",
                index: i,
            });
        }
        for shape in &input_shapes {
            if shape.len() != reaction.len() {
                return Err(Error::GridMismatch {
                    expected: reaction.len(),
                    got: shape.len(),
                });
            }
            if let Some(i) = shape.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteSample {
                    what: "input shape",
                    index: i,
                });
            }
        }
        Ok(Self {
            length,
            reaction,
            input_shapes,
        })
    }

    pub fn n_grid(&self) -> usize {
        self.reaction.len()
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.n_grid() - 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_grid()).map(|i| i as f64 * h).collect()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_shapes.len()
    }
}

/// Leading eigenpairs of the discretized operator, sorted by decreasing
/// eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub length: f64,
    /// Dispersion-corrected eigenvalues (strictly decreasing).
    pub eigenvalues: Vec<f64>,
    /// Uncorrected second-difference eigenvalues; O(h^2) convergent.
    pub raw_eigenvalues: Vec<f64>,
    /// Grid samples of each eigenfunction, endpoints included (both zero).
    pub eigenfunctions: Vec<DVector<f64>>,
}

impl EigenSystem {
    pub fn count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_grid(&self) -> usize {
        self.eigenfunctions[0].len()
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.n_grid() - 1) as f64
    }

    /// Trapezoid-rule L2 inner product of two grid-sampled functions.
    pub fn l2_inner(&self, f: &[f64], g: &[f64]) -> f64 {
        trapezoid_inner(f, g, self.spacing())
    }

    /// max |<e_i, e_j> - delta_ij| under trapezoid quadrature.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.count() {
            for j in i..self.count() {
                let ip = self.l2_inner(
                    self.eigenfunctions[i].as_slice(),
                    self.eigenfunctions[j].as_slice(),
                );
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }
}

fn trapezoid_inner(f: &[f64], g: &[f64], h: f64) -> f64 {
    assert_eq!(f.len(), g.len());
    let n = f.len();
    let mut acc = 0.5 * (f[0] * g[0] + f[n - 1] * g[n - 1]);
    for i in 1..n - 1 {
        acc += f[i] * g[i];
    }
    acc * h
}

/// Solves for the `count` leading eigenpairs of `d²/dx² + c(x)·` with
/// Dirichlet conditions. Needs `n_grid >= 4 * count` to resolve the highest
/// requested mode.
pub fn solve_eigensystem(problem: &SpatialProblem, count: usize) -> Result<EigenSystem> {
    if count < 1 {
        return Err(Error::InvalidConfig(
            "truncation order must be at least 1".into(),
        ));
    }
    let n_grid = problem.n_grid();
    if n_grid < 4 * count {
        return Err(Error::GridTooCoarse {
            n_grid,
            requested: count,
        });
    }
    let h = problem.spacing();
    let interior = n_grid - 2;
    let mut op = DMatrix::<f64>::zeros(interior, interior);
    let inv_h2 = 1.0 / (h * h);
    for i in 0..interior {
        op[(i, i)] = -2.0 * inv_h2 + problem.reaction[i + 1];
        if i + 1 < interior {
            op[(i, i + 1)] = inv_h2;
            op[(i + 1, i)] = inv_h2;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(op);

    // indices sorted by decreasing eigenvalue
    let mut order: Vec<usize> = (0..interior).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let inv_sqrt_h = 1.0 / h.sqrt();
    let mut raw = Vec::with_capacity(count);
    let mut corrected = Vec::with_capacity(count);
    let mut functions = Vec::with_capacity(count);
    for (mode, &col) in order.iter().take(count).enumerate() {
        let lam_raw = eig.eigenvalues[col];
        let j = (mode + 1) as f64;
        let wave = j * PI / problem.length;
        let discrete = 4.0 * inv_h2 * (0.5 * wave * h).sin().powi(2);
        raw.push(lam_raw);
        corrected.push(lam_raw + (discrete - wave * wave));

        let v = eig.eigenvectors.column(col);
        let scale = v.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
        let sign = v
            .iter()
            .find(|x| x.abs() > 1e-8 * scale)
            .map(|x| x.signum())
            .unwrap_or(1.0);
        let mut samples = DVector::zeros(n_grid);
        for i in 0..interior {
            samples[i + 1] = sign * v[i] * inv_sqrt_h;
        }
        functions.push(samples);
    }

    // simple Sturm-Liouville spectrum: reordering after correction means the
    // grid cannot separate the requested modes
    if corrected.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::GridTooCoarse {
            n_grid,
            requested: count,
        });
    }

    Ok(EigenSystem {
        length: problem.length,
        eigenvalues: corrected,
        raw_eigenvalues: raw,
        eigenfunctions: functions,
    })
}

/// Modal input coefficients `b_jk = <b_k, e_j>` under trapezoid quadrature;
/// returns a J x m matrix.
pub fn project_inputs(problem: &SpatialProblem, eig: &EigenSystem) -> Result<DMatrix<f64>> {
    if problem.n_grid() != eig.n_grid() {
        return Err(Error::GridMismatch {
            expected: eig.n_grid(),
            got: problem.n_grid(),
        });
    }
    let j = eig.count();
    let m = problem.n_inputs();
    let mut out = DMatrix::zeros(j, m);
    for (k, shape) in problem.input_shapes.iter().enumerate() {
        for row in 0..j {
            out[(row, k)] = eig.l2_inner(shape, eig.eigenfunctions[row].as_slice());
        }
    }
    Ok(out)
}

/// Unstable/stable splitting of a modal system.
#[derive(Debug, Clone)]
pub struct UnstableSplit {
    /// Number of nonnegative eigenvalues.
    pub n_unstable: usize,
    /// Spectral margin eta with `lambda_(n+1) < -eta < 0`.
    pub margin: f64,
    /// Diagonal unstable block (n x n).
    pub unstable_block: DMatrix<f64>,
    /// First n rows of the input matrix (n x m).
    pub unstable_inputs: DMatrix<f64>,
}

/// Splits the spectrum at zero. `margin_fraction` in (0, 1) places
/// `eta = margin_fraction * (-lambda_(n+1))` inside the admissible gap.
pub fn split_unstable(
    eigenvalues: &[f64],
    inputs: &DMatrix<f64>,
    margin_fraction: f64,
) -> Result<UnstableSplit> {
    if !(margin_fraction > 0.0 && margin_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "margin fraction must lie in (0, 1), got {margin_fraction}"
        )));
    }
    let count = eigenvalues.len();
    if count == 0 || *eigenvalues.last().unwrap() >= 0.0 {
        return Err(Error::AllModesUnstable { count });
    }
    let n = eigenvalues.iter().take_while(|&&l| l >= 0.0).count();
    let margin = margin_fraction * (-eigenvalues[n]);
    let unstable_block =
        DMatrix::from_diagonal(&DVector::from_iterator(n, eigenvalues[..n].iter().copied()));
    let unstable_inputs = inputs.rows(0, n).into_owned();
    Ok(UnstableSplit {
        n_unstable: n,
        margin,
        unstable_block,
        unstable_inputs,
    })
}

/// Truncated modal realization: eigen system, modal input matrix, and the
/// unstable-block data.
#[derive(Debug, Clone)]
pub struct ModalModel {
    pub eigen: EigenSystem,
    /// J x m modal input matrix.
    pub input_matrix: DMatrix<f64>,
    pub n_unstable: usize,
    /// Spectral margin eta.
    pub margin: f64,
}

impl ModalModel {
    /// Synthetic modal system from explicit eigenvalues and input rows, for
    /// reduced loops that need no spatial problem. Eigenfunctions are left
    /// empty placeholders; state reconstruction is not available.
    pub fn from_modal_data(
        eigenvalues: Vec<f64>,
        input_matrix: DMatrix<f64>,
        margin_fraction: f64,
    ) -> Result<Self> {
        if input_matrix.nrows() != eigenvalues.len() {
            return Err(Error::GridMismatch {
                expected: eigenvalues.len(),
                got: input_matrix.nrows(),
            });
        }
        let split = split_unstable(&eigenvalues, &input_matrix, margin_fraction)?;
        let count = eigenvalues.len();
        let eigen = EigenSystem {
            length: 1.0,
            raw_eigenvalues: eigenvalues.clone(),
            eigenvalues,
            eigenfunctions: vec![DVector::zeros(2); count],
        };
        Ok(Self {
            eigen,
            input_matrix,
            n_unstable: split.n_unstable,
            margin: split.margin,
        })
    }

    /// Requires at least 4 stable tail modes beyond the unstable block so the
    /// truncation can stand in for the infinite part.
    pub fn build(
        problem: &SpatialProblem,
        truncation: usize,
        margin_fraction: f64,
    ) -> Result<Self> {
        let eigen = solve_eigensystem(problem, truncation)?;
        let input_matrix = project_inputs(problem, &eigen)?;
        let split = split_unstable(&eigen.eigenvalues, &input_matrix, margin_fraction)?;
        let tail = truncation - split.n_unstable;
        if tail < 4 {
            return Err(Error::StableTailTooShort {
                truncation,
                stable_tail: tail,
                required: 4,
            });
        }
        debug_assert!(*eigen.eigenvalues.last().unwrap() < -split.margin);
        Ok(Self {
            eigen,
            input_matrix,
            n_unstable: split.n_unstable,
            margin: split.margin,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigen.count()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_matrix.ncols()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.eigenvalues
    }

    /// diag(lambda_1..lambda_J).
    pub fn generator(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim(),
            self.eigen.eigenvalues.iter().copied(),
        ))
    }

    /// Diagonal unstable block (n x n).
    pub fn unstable_block(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.n_unstable,
            self.eigen.eigenvalues[..self.n_unstable].iter().copied(),
        ))
    }

    /// First n rows of the input matrix (n x m).
    pub fn unstable_inputs(&self) -> DMatrix<f64> {
        self.input_matrix.rows(0, self.n_unstable).into_owned()
    }
}

/// Reconstructs `w(t, .) = sum_j w_j e_j(.)` on the grid.
pub fn evaluate_state(eig: &EigenSystem, modal: &DVector<f64>) -> DVector<f64> {
    assert_eq!(modal.len(), eig.count());
    let mut out = DVector::zeros(eig.n_grid());
    for (j, func) in eig.eigenfunctions.iter().enumerate() {
        out.axpy(modal[j], func, 1.0);
    }
    out
}

/// Same reconstruction at arbitrary points via linear interpolation of the
/// sampled eigenfunctions.
pub fn evaluate_state_at(eig: &EigenSystem, modal: &DVector<f64>, points: &[f64]) -> Vec<f64> {
    let grid_values = evaluate_state(eig, modal);
    let h = eig.spacing();
    let n = eig.n_grid();
    points
        .iter()
        .map(|&x| {
            let clamped = x.clamp(0.0, eig.length);
            let cell = ((clamped / h).floor() as usize).min(n - 2);
            let frac = (clamped - cell as f64 * h) / h;
            grid_values[cell] * (1.0 - frac) + grid_values[cell + 1] * frac
        })
        .collect()
}
