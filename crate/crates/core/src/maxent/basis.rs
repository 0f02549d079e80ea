//! Polynomial feature bases: `phi_k(y) = sum_j coeffs[k][j] y^j`, `k = 0..=M`.

/// Row `k` holds the monomial coefficients of `phi_k`, lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    coeffs: Vec<Vec<f64>>,
}

impl Basis {
    /// Orthonormal probabilists' Hermite polynomials `He_k / sqrt(k!)`.
    pub fn hermite(m: usize) -> Self {
        let mut he: Vec<Vec<f64>> = vec![vec![1.0]];
        if m >= 1 {
            he.push(vec![0.0, 1.0]);
        }
        for k in 1..m {
            // He_{k+1} = y He_k - k He_{k-1}
            let mut next = vec![0.0; k + 2];
            for (j, &c) in he[k].iter().enumerate() {
                next[j + 1] += c;
            }
            for (j, &c) in he[k - 1].iter().enumerate() {
                next[j] -= k as f64 * c;
            }
            he.push(next);
        }
        let mut fact = 1.0;
        for (k, row) in he.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            let norm = fact.sqrt();
            row.iter_mut().for_each(|c| *c /= norm);
            row.resize(m + 1, 0.0);
        }
        Basis { coeffs: he }
    }

    /// Plain monomials `y^k`.
    pub fn monomial(m: usize) -> Self {
        let coeffs = (0..=m)
            .map(|k| {
                let mut row = vec![0.0; m + 1];
                row[k] = 1.0;
                row
            })
            .collect();
        Basis { coeffs }
    }

    /// Highest degree `M`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    /// `phi_1(y)..phi_M(y)` written into `out`.
    pub fn eval_into(&self, y: f64, out: &mut [f64]) {
        let m = self.order();
        let mut pw = vec![1.0; m + 1];
        for j in 1..=m {
            pw[j] = pw[j - 1] * y;
        }
        for (k, o) in out.iter_mut().enumerate().take(m) {
            *o = self.coeffs[k + 1].iter().zip(&pw).map(|(c, p)| c * p).sum();
        }
    }

    /// Monomial coefficients of `sum_k lambda_k phi_k` (`lambda` indexed from 1).
    pub fn combine(&self, lambda: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.order() + 1];
        for (k, l) in lambda.iter().enumerate() {
            for (pj, c) in p.iter_mut().zip(&self.coeffs[k + 1]) {
                *pj += l * c;
            }
        }
        p
    }

    /// Expectations `E[phi_k]`, `k = 1..=M`, from raw moments `nu_0..nu_M`.
    pub fn project_moments(&self, nu: &[f64]) -> Vec<f64> {
        self.coeffs[1..]
            .iter()
            .map(|row| row.iter().zip(nu).map(|(c, v)| c * v).sum())
            .collect()
    }

    /// Coordinates of the monomial polynomial `p` (degree ≤ M) in this basis,
    /// dropping the constant component. Returns `(lambda_1..lambda_M, constant)`.
    pub fn decompose(&self, p: &[f64]) -> (Vec<f64>, f64) {
        let m = self.order();
        let mut rest = p.to_vec();
        rest.resize(m + 1, 0.0);
        let mut lambda = vec![0.0; m];
        for k in (1..=m).rev() {
            let lead = self.coeffs[k][k];
            let l = rest[k] / lead;
            lambda[k - 1] = l;
            for (r, c) in rest.iter_mut().zip(&self.coeffs[k]) {
                *r -= l * c;
            }
        }
        (lambda, rest[0] / self.coeffs[0][0])
    }
}

/// Horner evaluation of `sum_j p[j] y^j`.
pub fn poly_eval(p: &[f64], y: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * y + c)
}

/// Derivative coefficients.
pub fn poly_deriv(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(j, c)| j as f64 * c).collect()
}
