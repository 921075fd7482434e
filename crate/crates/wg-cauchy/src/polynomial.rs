//! Dense bivariate polynomials in graded monomial order.
//!
//! Monomials `x^a y^b` are enumerated degree by degree, with `x`-major order
//! inside each degree block: `1, x, y, x^2, xy, y^2, x^3, ...`. The same
//! ordering is used for the scaled monomial cell bases in [`crate::polyspace`].

/// Number of monomials of total degree <= `k` in two variables.
pub fn space_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Flat index of the monomial `x^a y^b`.
pub fn monomial_index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

/// Exponents `(a, b)` of the monomial at flat index `i`.
pub fn monomial_exponents(i: usize) -> (usize, usize) {
    let mut d = 0usize;
    while (d + 1) * (d + 2) / 2 <= i {
        d += 1;
    }
    let b = i - d * (d + 1) / 2;
    (d - b, b)
}

/// Bivariate polynomial with coefficients in graded monomial order.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly2 {
    pub coeffs: Vec<f64>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Poly2 { coeffs: vec![0.0] }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "empty coefficient list");
        Poly2 { coeffs }
    }

    /// The monomial `c * x^a y^b`.
    pub fn monomial(a: usize, b: usize, c: f64) -> Self {
        let mut coeffs = vec![0.0; monomial_index(a, b) + 1];
        *coeffs.last_mut().unwrap() = c;
        Poly2 { coeffs }
    }

    /// Smallest `k` with all coefficients of degree > `k` equal to zero.
    pub fn degree(&self) -> usize {
        for i in (0..self.coeffs.len()).rev() {
            if self.coeffs[i] != 0.0 {
                return monomial_exponents(i).0 + monomial_exponents(i).1;
            }
        }
        0
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                let (a, b) = monomial_exponents(i);
                acc += c * x.powi(a as i32) * y.powi(b as i32);
            }
        }
        acc
    }

    pub fn dx(&self) -> Poly2 {
        let mut out = vec![0.0; self.coeffs.len().max(1)];
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                let (a, b) = monomial_exponents(i);
                if a > 0 {
                    out[monomial_index(a - 1, b)] += c * a as f64;
                }
            }
        }
        Poly2 { coeffs: out }
    }

    pub fn dy(&self) -> Poly2 {
        let mut out = vec![0.0; self.coeffs.len().max(1)];
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                let (a, b) = monomial_exponents(i);
                if b > 0 {
                    out[monomial_index(a, b - 1)] += c * b as f64;
                }
            }
        }
        Poly2 { coeffs: out }
    }

    pub fn laplacian(&self) -> Poly2 {
        let xx = self.dx().dx();
        let yy = self.dy().dy();
        let n = xx.coeffs.len().max(yy.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, &c) in xx.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, &c) in yy.coeffs.iter().enumerate() {
            out[i] += c;
        }
        Poly2 { coeffs: out }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        for i in 0..45 {
            let (a, b) = monomial_exponents(i);
            assert_eq!(monomial_index(a, b), i);
        }
        assert_eq!(monomial_index(0, 0), 0);
        assert_eq!(monomial_index(1, 0), 1);
        assert_eq!(monomial_index(0, 1), 2);
        assert_eq!(monomial_index(2, 0), 3);
        assert_eq!(monomial_index(1, 1), 4);
        assert_eq!(monomial_index(0, 2), 5);
    }

    #[test]
    fn derivatives() {
        // u = 1 + 2x + 3y - x^2 + xy
        let u = Poly2::from_coeffs(vec![1.0, 2.0, 3.0, -1.0, 1.0, 0.0]);
        assert_eq!(u.degree(), 2);
        let (x, y) = (0.3, -0.7);
        assert!((u.eval(x, y) - (1.0 + 2.0 * x + 3.0 * y - x * x + x * y)).abs() < 1e-15);
        assert!((u.dx().eval(x, y) - (2.0 - 2.0 * x + y)).abs() < 1e-15);
        assert!((u.dy().eval(x, y) - (3.0 + x)).abs() < 1e-15);
        assert!((u.laplacian().eval(x, y) + 2.0).abs() < 1e-15);
    }
}
