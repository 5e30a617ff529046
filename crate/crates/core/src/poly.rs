//! Real polynomials with ascending coefficients, just enough for closed-loop
//! pole computations.

use nalgebra::{Complex, DMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.0.get(i).copied().unwrap_or(0.0)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly((0..n).map(|i| self.coeff(i) - other.coeff(i)).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.0.is_empty() || other.0.is_empty() {
            return Poly(Vec::new());
        }
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    /// Drop trailing coefficients at or below `tol` in magnitude.
    pub fn trimmed(mut self, tol: f64) -> Poly {
        while self.0.len() > 1 && self.0.last().is_some_and(|c| c.abs() <= tol) {
            self.0.pop();
        }
        self
    }

    /// Roots from the eigenvalues of the companion matrix.
    pub fn roots(&self) -> Vec<Complex<f64>> {
        let deg = self.degree();
        if deg == 0 {
            return Vec::new();
        }
        let lead = self.0[deg];
        let mut companion = DMatrix::zeros(deg, deg);
        for i in 1..deg {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..deg {
            companion[(i, deg - 1)] = -self.0[i] / lead;
        }
        companion.complex_eigenvalues().iter().copied().collect()
    }
}

/// `det(sI − A)` by the Faddeev-LeVerrier recursion.
pub fn characteristic_polynomial(a: &DMatrix<f64>) -> Poly {
    let n = a.nrows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut m = DMatrix::<f64>::zeros(n, n);
    let identity = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        m = a * &m + &identity * coeffs[n - k + 1];
        coeffs[n - k] = -(a * &m).trace() / k as f64;
    }
    Poly(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_roots() {
        // (s + 2)² = s² + 4s + 4
        let roots = Poly(vec![4.0, 4.0, 1.0]).roots();
        for r in roots {
            assert!((r.re + 2.0).abs() < 1e-6 && r.im.abs() < 1e-6);
        }
    }

    #[test]
    fn char_poly_of_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -2.0, 3.0]));
        let p = characteristic_polynomial(&a);
        // (s−1)(s+2)(s−3) = s³ − 2s² − 5s + 6
        let expected = [6.0, -5.0, -2.0, 1.0];
        for (a, b) in p.0.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn char_poly_of_empty_matrix_is_one() {
        assert_eq!(characteristic_polynomial(&DMatrix::zeros(0, 0)).0, vec![1.0]);
    }

    #[test]
    fn product_and_trim() {
        let p = Poly(vec![1.0, 1.0]).mul(&Poly(vec![-1.0, 1.0]));
        assert_eq!(p.0, vec![-1.0, 0.0, 1.0]);
        assert_eq!(Poly(vec![1.0, 2.0, 0.0, 0.0]).trimmed(0.0).0, vec![1.0, 2.0]);
    }
}
