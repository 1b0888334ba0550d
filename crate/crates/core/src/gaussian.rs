//! Covariance-matrix types and Gaussian-state linear algebra.
//!
//! All quadratures are in vacuum-noise units (vacuum variance = 1). Matrices
//! use the interleaved mode order `(x1, p1, x2, p2, ...)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on `|S - S^T|` accepted by [`GeneralCm::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative tolerance for matching the `±iν` pairs of `ΩΣ`.
pub const PAIRING_TOL: f64 = 1e-9;
/// Symplectic eigenvalues below `1 - PHYSICAL_TOL` are rejected as
/// unphysical; values in `[1 - PHYSICAL_TOL, 1]` are rounding noise around a
/// pure mode and count as exactly 1.
pub const PHYSICAL_TOL: f64 = 1e-6;

/// Block-form two-mode covariance matrix `[[a I, c Z], [c Z, b I]]`,
/// mode order `(x_A, p_A, x_B, p_B)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeCm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl TwoModeCm {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub const fn vacuum() -> Self {
        Self::new(1.0, 1.0, 0.0)
    }

    pub fn det(&self) -> f64 {
        let d = self.a * self.b - self.c * self.c;
        d * d
    }

    /// Closed-form symplectic eigenvalues `(ν+, ν-)`.
    pub fn symplectic_pair(&self) -> (f64, f64) {
        let delta = self.a * self.a + self.b * self.b - 2.0 * self.c * self.c;
        let disc = (delta * delta - 4.0 * self.det()).max(0.0).sqrt();
        let plus = ((delta + disc) / 2.0).max(0.0).sqrt();
        let minus = ((delta - disc) / 2.0).max(0.0).sqrt();
        (plus, minus)
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.a > 0.0 && self.b > 0.0 && self.symplectic_pair().1 >= 1.0 - tol
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let Self { a, b, c } = *self;
        DMatrix::from_row_slice(
            4,
            4,
            &[
                a, 0.0, c, 0.0, //
                0.0, a, 0.0, -c, //
                c, 0.0, b, 0.0, //
                0.0, -c, 0.0, b,
            ],
        )
    }

    pub fn to_general(&self) -> GeneralCm {
        GeneralCm {
            matrix: self.to_matrix(),
        }
    }
}

/// Symmetric `2n x 2n` covariance matrix for `n` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralCm {
    matrix: DMatrix<f64>,
}

impl GeneralCm {
    /// Wraps `matrix`, checking the shape and symmetry. The matrix is
    /// symmetrized exactly so downstream solvers see a symmetric input.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols || rows == 0 || rows % 2 != 0 {
            return Err(Error::BadShape { rows, cols });
        }
        let asymmetry = (&matrix - matrix.transpose()).amax();
        if !(asymmetry <= SYMMETRY_TOL) {
            return Err(Error::NonSymmetric { asymmetry });
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Ok(Self { matrix })
    }

    pub fn identity(n_modes: usize) -> Self {
        Self {
            matrix: DMatrix::identity(2 * n_modes, 2 * n_modes),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix[(row, col)]
    }

    /// Reduced CM of the listed modes, in the given order.
    pub fn submatrix(&self, modes: &[usize]) -> Result<GeneralCm> {
        let n = self.n_modes();
        if let Some(&index) = modes.iter().find(|&&m| m >= n) {
            return Err(Error::ModeOutOfRange { index, modes: n });
        }
        let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.matrix[(idx[i], idx[j])]);
        Ok(GeneralCm { matrix: sub })
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix.clone().symmetric_eigenvalues().min()
    }
}

impl From<TwoModeCm> for GeneralCm {
    fn from(cm: TwoModeCm) -> Self {
        cm.to_general()
    }
}

/// Symplectic eigenvalues, sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticSpectrum(Vec<f64>);

impl SymplecticSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.last().copied().unwrap_or(f64::NAN)
    }

    /// Von Neumann entropy `Σ g(ν_k)` in bits.
    pub fn entropy(&self) -> Result<f64> {
        self.0
            .iter()
            .try_fold(0.0, |acc, &v| Ok(acc + entropy_g(v)?))
    }
}

/// Symplectic form `Ω = ⊕ [[0, 1], [-1, 0]]` for `n` modes.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Symplectic eigenvalues of `cm` from the spectrum of `ΩΣ`, whose
/// eigenvalues are the purely imaginary pairs `±iν_k`.
pub fn symplectic_eigenvalues(cm: &GeneralCm) -> Result<SymplecticSpectrum> {
    let sigma = cm.matrix();
    if sigma.clone().cholesky().is_none() {
        return Err(Error::UnphysicalCm {
            min_eigenvalue: cm.min_eigenvalue(),
        });
    }
    let n = cm.n_modes();
    let product = symplectic_form(n) * sigma;
    let mut moduli: Vec<f64> = product
        .complex_eigenvalues()
        .iter()
        .map(|z| z.im.abs())
        .collect();
    moduli.sort_by(|x, y| y.total_cmp(x));

    let values = moduli
        .chunks_exact(2)
        .map(|pair| {
            let (first, second) = (pair[0], pair[1]);
            if (first - second).abs() > PAIRING_TOL * first.max(1.0) {
                Err(Error::SpectrumPairing { first, second })
            } else {
                Ok(0.5 * (first + second))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SymplecticSpectrum(values))
}

/// Entropy of a single-mode thermal state with symplectic eigenvalue `x`:
/// `g(x) = (x+1)/2 log2((x+1)/2) - (x-1)/2 log2((x-1)/2)`.
pub fn entropy_g(x: f64) -> Result<f64> {
    if !(x >= 1.0 - PHYSICAL_TOL) {
        return Err(Error::UnphysicalSymplecticEigenvalue(x));
    }
    if x <= 1.0 {
        return Ok(0.0);
    }
    let plus = 0.5 * (x + 1.0);
    let minus = 0.5 * (x - 1.0);
    Ok(plus * plus.log2() - minus * minus.log2())
}

/// Homodyne quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Quadrature {
    #[default]
    X,
    P,
}

impl Quadrature {
    fn offset(self) -> usize {
        match self {
            Quadrature::X => 0,
            Quadrature::P => 1,
        }
    }
}

/// CM of the remaining modes after a homodyne measurement of `quadrature`
/// on `measured_mode`: `Σ_rest - Γ (X Σ_m X)^+ Γ^T`.
pub fn homodyne_condition(
    cm: &GeneralCm,
    measured_mode: usize,
    quadrature: Quadrature,
) -> Result<GeneralCm> {
    let n = cm.n_modes();
    if measured_mode >= n {
        return Err(Error::ModeOutOfRange {
            index: measured_mode,
            modes: n,
        });
    }
    if n < 2 {
        return Err(Error::ModeOutOfRange {
            index: measured_mode,
            modes: n,
        });
    }
    let sigma = cm.matrix();
    let q = 2 * measured_mode + quadrature.offset();
    let variance = sigma[(q, q)];
    if !(variance > 0.0) {
        return Err(Error::DegenerateMeasurement(variance));
    }
    let rest: Vec<usize> = (0..2 * n).filter(|&i| i / 2 != measured_mode).collect();
    let gamma = DVector::from_iterator(rest.len(), rest.iter().map(|&i| sigma[(i, q)]));
    let mut conditional =
        DMatrix::from_fn(rest.len(), rest.len(), |i, j| sigma[(rest[i], rest[j])]);
    conditional -= &gamma * gamma.transpose() / variance;
    GeneralCm::new(conditional)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn epr(r: f64) -> TwoModeCm {
        TwoModeCm::new((2.0 * r).cosh(), (2.0 * r).cosh(), (2.0 * r).sinh())
    }

    #[test]
    fn vacuum_has_unit_spectrum() {
        for n in 1..=4 {
            let sp = symplectic_eigenvalues(&GeneralCm::identity(n)).unwrap();
            assert_eq!(sp.len(), n);
            for v in sp.values() {
                assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn epr_is_pure() {
        for r in [0.0, 0.1, 0.7, 1.5, 2.5] {
            let sp = symplectic_eigenvalues(&epr(r).to_general()).unwrap();
            for v in sp.values() {
                assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-9);
            }
            let (p, m) = epr(r).symplectic_pair();
            assert_abs_diff_eq!(p, 1.0, epsilon = 1e-7);
            assert_abs_diff_eq!(m, 1.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn closed_form_matches_eigen_route() {
        let cm = TwoModeCm::new(3.0, 3.0, 2.0);
        // Δ = 10, det = 25: ν² = (10 ± √0)/2 = 5.
        let (p, m) = cm.symplectic_pair();
        assert_abs_diff_eq!(p, 5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(m, 5f64.sqrt(), epsilon = 1e-12);
        let sp = symplectic_eigenvalues(&cm.to_general()).unwrap();
        assert_abs_diff_eq!(sp.values()[0], p, epsilon = 1e-10);
        assert_abs_diff_eq!(sp.values()[1], m, epsilon = 1e-10);

        let cm = TwoModeCm::new(4.0, 2.5, 1.7);
        let (p, m) = cm.symplectic_pair();
        let sp = symplectic_eigenvalues(&cm.to_general()).unwrap();
        assert_abs_diff_eq!(sp.values()[0], p, epsilon = 1e-10);
        assert_abs_diff_eq!(sp.values()[1], m, epsilon = 1e-10);
    }

    #[test]
    fn rejects_non_positive_definite() {
        let bad = TwoModeCm::new(1.0, 1.0, 2.0).to_general();
        match symplectic_eigenvalues(&bad) {
            Err(Error::UnphysicalCm { min_eigenvalue }) => assert!(min_eigenvalue < 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_asymmetric_and_odd_shapes() {
        let mut m = DMatrix::identity(4, 4);
        m[(0, 1)] = 1e-6;
        assert!(matches!(GeneralCm::new(m), Err(Error::NonSymmetric { .. })));
        assert!(matches!(
            GeneralCm::new(DMatrix::identity(3, 3)),
            Err(Error::BadShape { .. })
        ));
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy_g(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(entropy_g(3.0).unwrap(), 2.0, epsilon = 1e-15);
        // 1.25 log2(1.25) - 0.25 log2(0.25), evaluated with mpmath at 50 digits.
        assert_abs_diff_eq!(
            entropy_g(1.5).unwrap(),
            0.902_410_118_609_202_9,
            epsilon = 1e-15
        );
        assert_eq!(entropy_g(1.0 - 5e-10).unwrap(), 0.0);
        assert!(matches!(
            entropy_g(0.99),
            Err(Error::UnphysicalSymplecticEigenvalue(_))
        ));
        assert!(entropy_g(f64::NAN).is_err());
    }

    #[test]
    fn entropy_is_increasing() {
        let xs: Vec<f64> = (0..100)
            .map(|i| 1.001 + (20.0 - 1.001) * i as f64 / 99.0)
            .collect();
        for w in xs.windows(2) {
            let slope = (entropy_g(w[1]).unwrap() - entropy_g(w[0]).unwrap()) / (w[1] - w[0]);
            assert!(slope > 0.0);
        }
    }

    #[test]
    fn conditioning_uncorrelated_mode_is_noop() {
        let mut m = DMatrix::identity(4, 4);
        m[(0, 0)] = 2.0;
        m[(1, 1)] = 3.0;
        m[(2, 2)] = 5.0;
        let cm = GeneralCm::new(m).unwrap();
        let cond = homodyne_condition(&cm, 1, Quadrature::X).unwrap();
        assert_eq!(
            cond.matrix(),
            &DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))
        );
    }

    #[test]
    fn conditioning_epr_gives_schur_complement() {
        let r = 1.0_f64;
        let cond = homodyne_condition(&epr(r).to_general(), 1, Quadrature::X).unwrap();
        assert_abs_diff_eq!(cond.get(0, 0), 1.0 / (2.0 * r).cosh(), epsilon = 1e-12);
        assert_abs_diff_eq!(cond.get(1, 1), (2.0 * r).cosh(), epsilon = 1e-12);
        let cond_p = homodyne_condition(&epr(r).to_general(), 1, Quadrature::P).unwrap();
        assert_abs_diff_eq!(cond_p.get(1, 1), 1.0 / (2.0 * r).cosh(), epsilon = 1e-12);
    }

    #[test]
    fn conditioning_errors() {
        let cm = GeneralCm::identity(2);
        assert!(matches!(
            homodyne_condition(&cm, 2, Quadrature::X),
            Err(Error::ModeOutOfRange { .. })
        ));
        let mut m = DMatrix::identity(4, 4);
        m[(2, 2)] = 0.0;
        let cm = GeneralCm::new(m).unwrap();
        assert!(matches!(
            homodyne_condition(&cm, 1, Quadrature::X),
            Err(Error::DegenerateMeasurement(_))
        ));
    }
}
