//! Objectives for the SGD engine.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A differentiable objective. Objectives with a constant Hessian expose it,
/// which is what the exact-expectation oracle needs.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, w: &DVector<f64>) -> Result<f64>;
    fn gradient(&self, w: &DVector<f64>) -> Result<DVector<f64>>;

    /// `(H, w_star)` when `grad f(w) = H (w - w_star)` for all `w`.
    fn linear_gradient(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        None
    }
}

/// `f(w) = 1/2 |A w - b|^2` with `A w_star = b`.
#[derive(Clone, Debug)]
pub struct QuadraticObjective {
    a: DMatrix<f64>,
    b: DVector<f64>,
    w_star: DVector<f64>,
    hessian: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl QuadraticObjective {
    /// Builds the objective from a square, nonsingular `A`.
    pub fn from_matrix(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::domain(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.len() != a.nrows() {
            return Err(Error::Dimension {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        let w_star = a
            .clone()
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::domain("A is singular; the objective is not strongly convex"))?;
        Self::assemble(a, b, w_star)
    }

    /// Diagonal `A = diag(sqrt(lambda_i))`, so `A^T A` has the given
    /// eigenvalues, with minimizer `w_star`.
    pub fn from_spectrum(eigenvalues: &[f64], w_star: DVector<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::domain("spectrum must be nonempty"));
        }
        if w_star.len() != eigenvalues.len() {
            return Err(Error::Dimension {
                expected: eigenvalues.len(),
                got: w_star.len(),
            });
        }
        if eigenvalues.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::domain("eigenvalues must be finite and positive"));
        }
        let a = DMatrix::from_diagonal(&DVector::from_iterator(
            eigenvalues.len(),
            eigenvalues.iter().map(|l| l.sqrt()),
        ));
        let b = &a * &w_star;
        Self::assemble(a, b, w_star)
    }

    fn assemble(a: DMatrix<f64>, b: DVector<f64>, w_star: DVector<f64>) -> Result<Self> {
        let hessian = a.transpose() * &a;
        let mut eigenvalues: Vec<f64> = hessian
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eigenvalues.sort_by(f64::total_cmp);
        if eigenvalues.first().is_none_or(|l| *l <= 0.0) {
            return Err(Error::domain("A^T A must be positive definite"));
        }
        Ok(Self {
            a,
            b,
            w_star,
            hessian,
            eigenvalues,
        })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn w_star(&self) -> &DVector<f64> {
        &self.w_star
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    /// Eigenvalues of `A^T A`, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn condition_number(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1] / self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    fn check_dim(&self, w: &DVector<f64>) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: w.len(),
            });
        }
        Ok(())
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.w_star.len()
    }

    fn value(&self, w: &DVector<f64>) -> Result<f64> {
        self.check_dim(w)?;
        Ok(0.5 * (&self.a * w - &self.b).norm_squared())
    }

    fn gradient(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(w)?;
        Ok(&self.hessian * (w - &self.w_star))
    }

    fn linear_gradient(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        Some((&self.hessian, &self.w_star))
    }
}

/// JSON description of a quadratic objective: either an explicit matrix
/// `{"matrix": [[..], ..], "b": [..]}` or a spectrum
/// `{"eigenvalues": [..], "w_star": [..]}` (`w_star` defaults to zero).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObjectiveSpec {
    Matrix {
        matrix: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    Spectrum {
        eigenvalues: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w_star: Option<Vec<f64>>,
    },
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<QuadraticObjective> {
        match self {
            ObjectiveSpec::Matrix { matrix, b } => {
                let n = matrix.len();
                if n == 0 || matrix.iter().any(|row| row.len() != n) {
                    return Err(Error::domain("matrix must be square and nonempty"));
                }
                let a = DMatrix::from_row_iterator(n, n, matrix.iter().flatten().copied());
                QuadraticObjective::from_matrix(a, DVector::from_column_slice(b))
            }
            ObjectiveSpec::Spectrum {
                eigenvalues,
                w_star,
            } => {
                let w_star = match w_star {
                    Some(w) => DVector::from_column_slice(w),
                    None => DVector::zeros(eigenvalues.len()),
                };
                QuadraticObjective::from_spectrum(eigenvalues, w_star)
            }
        }
    }
}

/// `n` eigenvalues evenly spaced on `[1, q]` (just `[1]` when `n == 1`).
pub fn linear_spectrum(n: usize, q: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n)
            .map(|i| 1.0 + (q - 1.0) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `n` eigenvalues log-spaced on `[1, q]`.
pub fn log_spectrum(n: usize, q: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n)
            .map(|i| q.powf(i as f64 / (n - 1) as f64))
            .collect(),
    }
}
