//! Lorentzian linear algebra on a single chart.
//!
//! Vectors are plain `DVector<f64>` with the first coordinate as the time
//! component and the remaining `n − 1` coordinates as the spatial part. The
//! signature convention is `+−−…−`: a vector `v ≠ 0` is timelike when
//! `g(v,v) > 0`, null when `g(v,v) = 0`, spacelike when `g(v,v) < 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tolerances;

/// Causal type of a vector with respect to a Lorentzian form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalClass {
    Timelike,
    Null,
    Spacelike,
    Zero,
}

/// Time component of a vector (its first coordinate).
pub fn time_component(v: &DVector<f64>) -> f64 {
    v[0]
}

/// Euclidean norm of the spatial part of a vector.
pub fn spatial_norm(v: &DVector<f64>) -> f64 {
    v.rows(1, v.len() - 1).norm()
}

/// Standard Minkowski product `u_t v_t − u_x · v_x`.
pub fn minkowski_product(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let mut s = u[0] * v[0];
    for i in 1..u.len() {
        s -= u[i] * v[i];
    }
    s
}

/// Minkowski norm `sqrt(|<v,v>|)`.
pub fn minkowski_norm(v: &DVector<f64>) -> f64 {
    minkowski_product(v, v).abs().sqrt()
}

/// A symmetric bilinear form of Lorentzian signature.
///
/// Construction fails unless the matrix is exactly symmetric and has exactly
/// one positive and `n − 1` negative eigenvalues (each separated from zero by
/// [`tolerances::SIGNATURE_EIGEN_TOL`]).
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearForm {
    mat: DMatrix<f64>,
}

impl BilinearForm {
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                got: mat.ncols(),
            });
        }
        let defect = (&mat - mat.transpose()).abs().max();
        if defect > 0.0 {
            return Err(Error::NotSymmetric { defect });
        }
        check_lorentzian(&mat)?;
        Ok(Self { mat })
    }

    /// The standard Minkowski product `diag(1, −1, …, −1)` in dimension `n`.
    pub fn minkowski(n: usize) -> Self {
        assert!(n >= 2, "Lorentzian forms need dimension >= 2");
        let mut mat = DMatrix::from_element(n, n, 0.0);
        mat[(0, 0)] = 1.0;
        for i in 1..n {
            mat[(i, i)] = -1.0;
        }
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// `u^T M v`; symmetric in its arguments.
    pub fn apply(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        if u.len() != self.dim() || v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: if u.len() != self.dim() { u.len() } else { v.len() },
            });
        }
        Ok(quadratic(&self.mat, u, v))
    }

    /// Lorentzian norm `sqrt(|g(v,v)|)`.
    pub fn norm(&self, v: &DVector<f64>) -> Result<f64> {
        Ok(self.apply(v, v)?.abs().sqrt())
    }

    /// Causal classification with an explicit tolerance.
    ///
    /// `timelike` if `g(v,v) > tol`, `spacelike` if `g(v,v) < −tol`, `zero`
    /// if `||v|| <= tol`, otherwise `null`.
    pub fn classify(&self, v: &DVector<f64>, tol: f64) -> Result<CausalClass> {
        let q = self.apply(v, v)?;
        Ok(if v.norm() <= tol {
            CausalClass::Zero
        } else if q > tol {
            CausalClass::Timelike
        } else if q < -tol {
            CausalClass::Spacelike
        } else {
            CausalClass::Null
        })
    }

    /// Causal classification at the default scale-aware tolerance.
    pub fn classify_default(&self, v: &DVector<f64>) -> Result<CausalClass> {
        self.classify(v, tolerances::classify_tol(v))
    }

    /// Eigenvalues of the matrix, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .mat
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }
}

/// Raw quadratic-form evaluation `u^T M v` without dimension checks.
pub(crate) fn quadratic(mat: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let n = mat.nrows();
    let mut s = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += mat[(i, j)] * v[j];
        }
        s += u[i] * row;
    }
    s
}

/// Signature check: exactly one positive and `n − 1` negative eigenvalues.
pub(crate) fn check_lorentzian(mat: &DMatrix<f64>) -> Result<()> {
    let n = mat.nrows();
    let eig = mat.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let tol = tolerances::SIGNATURE_EIGEN_TOL * scale;
    let positive = eig.eigenvalues.iter().filter(|&&l| l > tol).count();
    let negative = eig.eigenvalues.iter().filter(|&&l| l < -tol).count();
    if positive == 1 && negative == n - 1 {
        Ok(())
    } else {
        Err(Error::NotLorentzian {
            dim: n,
            positive,
            negative,
        })
    }
}

/// The cone-widened comparison product `g^h(v,w) = <v,w> + 4·L·h·v_t·w_t`.
///
/// For `L` the Lipschitz constant of a field normalized to the Minkowski
/// product at the chart origin, every vector causal for the field within the
/// ball of radius `h` is `g^h`-causal.
pub fn widened_metric(n: usize, lipschitz_l: f64, h: f64) -> Result<BilinearForm> {
    if h <= 0.0 {
        return Err(Error::NotPositive {
            what: "widening radius h",
            value: h,
        });
    }
    if lipschitz_l < 0.0 {
        return Err(Error::NotPositive {
            what: "Lipschitz constant L",
            value: lipschitz_l,
        });
    }
    let mut form = BilinearForm::minkowski(n);
    form.mat[(0, 0)] = 1.0 + 4.0 * lipschitz_l * h;
    Ok(form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lvec;

    #[test]
    fn minkowski_products_on_axis_vectors() {
        let g = BilinearForm::minkowski(2);
        let u = lvec(&[1.0, 0.0]);
        assert_eq!(g.apply(&u, &u).unwrap(), 1.0);
        let null = lvec(&[1.0, 1.0]);
        assert_eq!(g.apply(&null, &null).unwrap(), 0.0);
    }

    #[test]
    fn product_of_unit_time_and_boosted_vector() {
        // 1*1 - 0*0.6 - 0*0 = 1
        let g = BilinearForm::minkowski(3);
        let u = lvec(&[1.0, 0.0, 0.0]);
        let v = lvec(&[1.0, 0.6, 0.0]);
        assert_eq!(g.apply(&u, &v).unwrap(), 1.0);
        assert_eq!(g.apply(&v, &u).unwrap(), 1.0);
    }

    #[test]
    fn norm_of_boosted_vector() {
        // sqrt(1 - 0.36) = 0.8
        let g = BilinearForm::minkowski(3);
        let v = lvec(&[1.0, 0.6, 0.0]);
        assert!((g.norm(&v).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(g.norm(&lvec(&[1.0, 0.0, 0.0])).unwrap(), 1.0);
        assert_eq!(g.norm(&lvec(&[1.0, 1.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn classification_cases() {
        let g = BilinearForm::minkowski(2);
        let tol = 1e-12;
        assert_eq!(
            g.classify(&lvec(&[1.0, 0.0]), tol).unwrap(),
            CausalClass::Timelike
        );
        assert_eq!(
            g.classify(&lvec(&[1.0, 1.0]), tol).unwrap(),
            CausalClass::Null
        );
        // 0.25 - 1 < 0
        assert_eq!(
            g.classify(&lvec(&[0.5, 1.0]), tol).unwrap(),
            CausalClass::Spacelike
        );
        assert_eq!(
            g.classify(&lvec(&[0.0, 0.0]), tol).unwrap(),
            CausalClass::Zero
        );
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let g = BilinearForm::minkowski(2);
        assert!(matches!(
            g.apply(&lvec(&[1.0, 0.0, 0.0]), &lvec(&[1.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn signature_check_rejects_euclidean() {
        let mat = DMatrix::identity(3, 3);
        assert!(matches!(
            BilinearForm::new(mat),
            Err(Error::NotLorentzian { .. })
        ));
    }

    #[test]
    fn widened_metric_values() {
        // L=1, h=0.1, v=(1,1): 0 + 4*1*0.1*1 = 0.4, null becomes timelike.
        let gh = widened_metric(2, 1.0, 0.1).unwrap();
        let v = lvec(&[1.0, 1.0]);
        assert!((gh.apply(&v, &v).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(gh.classify(&v, 1e-12).unwrap(), CausalClass::Timelike);

        // L=0: plain Minkowski.
        let g0 = widened_metric(2, 0.0, 0.3).unwrap();
        assert_eq!(g0.matrix(), BilinearForm::minkowski(2).matrix());

        // L=2, h=0.05, v=(1,0): 1 + 4*2*0.05 = 1.4.
        let gh = widened_metric(2, 2.0, 0.05).unwrap();
        let v = lvec(&[1.0, 0.0]);
        assert!((gh.apply(&v, &v).unwrap() - 1.4).abs() < 1e-15);
    }

    #[test]
    fn widened_metric_rejects_nonpositive_h() {
        assert!(widened_metric(2, 1.0, 0.0).is_err());
        assert!(widened_metric(2, 1.0, -0.1).is_err());
    }
}
