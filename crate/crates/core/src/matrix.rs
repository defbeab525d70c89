use crate::error::{Error, Result};

/// Dense square matrix of `f64`, used for symmetric dissimilarities.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn filled(n: usize, v: f64) -> Self {
        SymMatrix {
            n,
            data: vec![v; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Set both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.set(i, j, v);
        self.set(j, i, v);
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// Add `delta` to every off-diagonal entry.
    pub fn shift_off_diagonal(&mut self, delta: f64) {
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    self.data[i * self.n + j] += delta;
                }
            }
        }
    }

    pub fn min_off_diagonal(&self) -> f64 {
        let mut min = f64::INFINITY;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    min = min.min(self.get(i, j));
                }
            }
        }
        min
    }

    /// Check symmetry, zero diagonal, and non-negative entries.
    pub fn validate_dissimilarity(&self) -> Result<()> {
        for i in 0..self.n {
            if self.get(i, i) != 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "distance matrix has nonzero diagonal at {i}"
                )));
            }
            for j in (i + 1)..self.n {
                let a = self.get(i, j);
                let b = self.get(j, i);
                if a != b {
                    return Err(Error::InvalidConfig(format!(
                        "distance matrix not symmetric at ({i}, {j})"
                    )));
                }
                if a < 0.0 || !a.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "distance matrix entry ({i}, {j}) = {a} is not a finite non-negative value"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_asymmetry_and_negatives() {
        let mut m = SymMatrix::zeros(3);
        m.set_sym(0, 1, 2.0);
        m.set_sym(1, 2, 1.0);
        assert!(m.validate_dissimilarity().is_ok());

        m.set(0, 2, 5.0);
        assert!(m.validate_dissimilarity().is_err());
        m.set(2, 0, 5.0);
        assert!(m.validate_dissimilarity().is_ok());

        m.set_sym(1, 2, -1.0);
        assert!(m.validate_dissimilarity().is_err());
    }

    #[test]
    fn shift_leaves_diagonal_alone() {
        let mut m = SymMatrix::filled(3, 1.0);
        for i in 0..3 {
            m.set(i, i, 0.0);
        }
        m.shift_off_diagonal(2.0);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.min_off_diagonal(), 3.0);
    }
}
