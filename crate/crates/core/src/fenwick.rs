/// Fenwick tree (binary indexed tree) over `f64` weights, 0-based interface.
#[derive(Debug, Clone)]
pub(crate) struct Fenwick {
    data: Vec<f64>,
    total: f64,
}

impl Fenwick {
    pub fn new(n: usize) -> Self {
        Fenwick {
            data: vec![0.0; n + 1],
            total: 0.0,
        }
    }

    /// Add `w` at position `i`.
    pub fn add(&mut self, mut i: usize, w: f64) {
        i += 1;
        while i < self.data.len() {
            self.data[i] += w;
            i += i & i.wrapping_neg();
        }
        self.total += w;
    }

    /// Sum over [0, i].
    pub fn prefix(&self, mut i: usize) -> f64 {
        let mut s = 0.0;
        i += 1;
        while i > 0 {
            s += self.data[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    /// Sum over (i, n), i.e. everything strictly above position `i`.
    pub fn above(&self, i: usize) -> f64 {
        self.total - self.prefix(i)
    }
}
