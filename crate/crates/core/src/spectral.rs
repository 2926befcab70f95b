//! Eigendecomposition `Lambda = U D U^-1` of a generator, in complex
//! arithmetic so that conjugate eigenvalue pairs are handled uniformly.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::generator::Generator;

/// Default cap on the condition number of the eigenvector matrix.
pub const DEFAULT_CONDITION_CAP: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct Spectral {
    values: Vec<Complex64>,
    vectors: DMatrix<Complex64>,
    inverse: DMatrix<Complex64>,
    condition: f64,
}

impl Spectral {
    /// Decomposes `g`, failing when the eigenvector matrix is singular or
    /// its condition number exceeds `condition_cap`.
    pub fn new(g: &Generator, condition_cap: f64) -> Result<Self> {
        let n = g.n_states();
        let scale = g.mu().max(1.0);
        let eigen = g.rates().clone().complex_eigenvalues();
        let clusters = cluster(eigen.iter().copied().collect(), 1e-6 * scale);

        let a = g.rates().map(|x| Complex64::new(x, 0.0));
        let mut values = Vec::with_capacity(n);
        let mut columns: Vec<nalgebra::DVector<Complex64>> = Vec::with_capacity(n);
        for (center, multiplicity) in clusters {
            let shifted = &a - DMatrix::<Complex64>::identity(n, n) * center;
            let svd = shifted.svd(false, true);
            let v_t = svd.v_t.ok_or(Error::SingularSolve(
                "SVD did not produce right singular vectors",
            ))?;
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
            for &k in order.iter().take(multiplicity) {
                if svd.singular_values[k] > 1e-6 * scale {
                    // Fewer independent eigenvectors than the multiplicity.
                    return Err(Error::NotDiagonalizable {
                        condition: f64::INFINITY,
                    });
                }
                let v = v_t.row(k).transpose().map(|z| z.conj());
                values.push(center);
                columns.push(v);
            }
        }
        let vectors = DMatrix::from_columns(&columns);
        let svd = vectors.clone().svd(false, false);
        let s_max = svd.singular_values.max();
        let s_min = svd.singular_values.min();
        let condition = if s_min > 0.0 {
            s_max / s_min
        } else {
            f64::INFINITY
        };
        if !(condition <= condition_cap) {
            return Err(Error::NotDiagonalizable { condition });
        }
        let inverse = vectors
            .clone()
            .try_inverse()
            .ok_or(Error::NotDiagonalizable {
                condition: f64::INFINITY,
            })?;
        Ok(Self {
            values,
            vectors,
            inverse,
            condition,
        })
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.values
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn vectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    pub fn inverse(&self) -> &DMatrix<Complex64> {
        &self.inverse
    }

    /// `p_ij(t)` from the spectral form, clamped to `[0, 1]`.
    pub fn transition(&self, i: usize, j: usize, t: f64) -> f64 {
        let v: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(k, d)| (self.vectors[(i, k)] * (d * t).exp() * self.inverse[(k, j)]).re)
            .sum();
        v.clamp(0.0, 1.0)
    }
}

fn cluster(mut values: Vec<Complex64>, tol: f64) -> Vec<(Complex64, usize)> {
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut groups: Vec<(Complex64, usize)> = Vec::new();
    for v in values {
        match groups.iter_mut().find(|(c, _)| (*c - v).norm() <= tol) {
            Some((c, m)) => {
                *c = (*c * (*m as f64) + v) / (*m as f64 + 1.0);
                *m += 1;
            }
            None => groups.push((v, 1)),
        }
    }
    // Real input: snap near-real centers onto the real axis.
    for (c, _) in groups.iter_mut() {
        if c.im.abs() <= tol {
            c.im = 0.0;
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::transition_matrix;

    fn check_against_expm(g: &Generator) {
        let s = Spectral::new(g, DEFAULT_CONDITION_CAP).unwrap();
        for &t in &[0.0, 0.05, 0.7, 3.0] {
            let p = transition_matrix(g, t).unwrap();
            for i in 0..g.n_states() {
                for j in 0..g.n_states() {
                    assert!(
                        (s.transition(i, j, t) - p.get(i, j)).abs() < 1e-10,
                        "t={t} ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn matches_matrix_exponential() {
        check_against_expm(
            &Generator::from_rows(&[&[-2.0, 1.0, 1.0], &[0.0, -10.0, 10.0], &[4.0, 1.0, -5.0]])
                .unwrap(),
        );
        check_against_expm(
            &Generator::from_rows(&[
                &[-4.0, 2.0, 1.0, 1.0],
                &[0.0, -3.0, 2.0, 1.0],
                &[1.0, 0.0, -3.0, 2.0],
                &[2.0, 1.0, 1.0, -4.0],
            ])
            .unwrap(),
        );
        // Repeated eigenvalue -n/(n-1) with multiplicity n-1.
        let n = 6;
        let off = 1.0 / (n as f64 - 1.0);
        let u = Generator::new(DMatrix::from_fn(
            n,
            n,
            |i, j| if i == j { -1.0 } else { off },
        ))
        .unwrap();
        check_against_expm(&u);
        // Rotation-like cycle with complex eigenvalues.
        check_against_expm(
            &Generator::from_rows(&[&[-1.0, 1.0, 0.0], &[0.0, -1.0, 1.0], &[1.0, 0.0, -1.0]])
                .unwrap(),
        );
    }

    #[test]
    fn defective_generator_is_rejected() {
        // Eigenvalue -3 has algebraic multiplicity 2 but a single eigenvector.
        let g = Generator::from_rows(&[&[-1.0, 1.0, 0.0], &[0.0, -1.0, 1.0], &[4.0, 0.0, -4.0]])
            .unwrap();
        assert!(matches!(
            Spectral::new(&g, DEFAULT_CONDITION_CAP),
            Err(Error::NotDiagonalizable { .. })
        ));
    }
}
