/// Tridiagonal matrix stored by bands. `lower[i]` couples row `i + 1` to
/// column `i`, `upper[i]` couples row `i` to column `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Self {
        debug_assert_eq!(lower.len() + 1, diag.len().max(1));
        debug_assert_eq!(upper.len(), lower.len());
        Tridiagonal { lower, diag, upper }
    }

    /// `tridiag(−1, 2, −1)` of size `n`.
    pub fn second_difference(n: usize) -> Self {
        let off = n.saturating_sub(1);
        Tridiagonal::new(vec![-1.0; off], vec![2.0; n], vec![-1.0; off])
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Adds `s` to every diagonal entry after scaling the matrix by `a`.
    pub fn scaled_shift(&self, a: f64, s: f64) -> Self {
        Tridiagonal {
            lower: self.lower.iter().map(|v| a * v).collect(),
            diag: self.diag.iter().map(|v| a * v + s).collect(),
            upper: self.upper.iter().map(|v| a * v).collect(),
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        solve_tridiagonal(&self.lower, &self.diag, &self.upper, rhs)
    }
}

/// Thomas algorithm. Intended for diagonally dominant or SPD systems.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    if n == 0 {
        return Vec::new();
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    c[0] = if n > 1 { upper[0] / beta } else { 0.0 };
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i - 1] * c[i - 1];
        if i + 1 < n {
            c[i] = upper[i] / beta;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / beta;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    x
}
