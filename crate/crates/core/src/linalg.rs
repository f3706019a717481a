//! Tridiagonal kernels shared by the time stepper, the threshold solver and
//! the stationary solver.
//!
//! Everything here works on interior unknowns only; Dirichlet rows are
//! eliminated by the callers.

/// Pre-factored general tridiagonal matrix (Thomas algorithm without pivoting).
///
/// Only safe for matrices that are diagonally dominant or symmetric positive
/// definite, which is all this crate ever builds.
#[derive(Debug, Clone)]
pub struct TridiagLu {
    lower: Vec<f64>,
    upper_mod: Vec<f64>,
    pivot: Vec<f64>,
}

impl TridiagLu {
    /// `lower[i]` is entry `(i, i-1)` (ignored for `i = 0`), `upper[i]` is
    /// entry `(i, i+1)` (ignored for the last row).
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Self {
        let n = diag.len();
        assert!(lower.len() == n && upper.len() == n, "band length mismatch");
        let mut upper_mod = vec![0.0; n];
        let mut pivot = vec![0.0; n];
        if n == 0 {
            return Self {
                lower: Vec::new(),
                upper_mod,
                pivot,
            };
        }
        pivot[0] = diag[0];
        upper_mod[0] = upper[0] / pivot[0];
        for i in 1..n {
            pivot[i] = diag[i] - lower[i] * upper_mod[i - 1];
            upper_mod[i] = if i + 1 < n { upper[i] / pivot[i] } else { 0.0 };
        }
        Self {
            lower: lower.to_vec(),
            upper_mod,
            pivot,
        }
    }

    pub fn len(&self) -> usize {
        self.pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivot.is_empty()
    }

    /// Solves in place.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        if n == 0 {
            return;
        }
        rhs[0] /= self.pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / self.pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper_mod[i] * rhs[i + 1];
        }
    }
}

/// One-shot tridiagonal solve.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let lu = TridiagLu::new(lower, diag, upper);
    let mut x = rhs.to_vec();
    lu.solve_in_place(&mut x);
    x
}

/// Symmetric tridiagonal matrix: `diag[i]` and `off[i]` = entry `(i, i+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(
            off.len() + 1 == diag.len() || (diag.is_empty() && off.is_empty()),
            "off-diagonal must be one shorter than the diagonal"
        );
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    /// Factorisation usable for solves with `self` (assumed positive definite).
    pub fn factor(&self) -> TridiagLu {
        let n = self.len();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n.saturating_sub(1) {
            upper[i] = self.off[i];
            lower[i + 1] = self.off[i];
        }
        TridiagLu::new(&lower, &self.diag, &upper)
    }

    /// Number of eigenvalues of the pencil `(self, diag(weight))` strictly
    /// below `sigma` (Sylvester inertia of `self - sigma * W`).
    pub fn count_below(&self, sigma: f64, weight: Option<&[f64]>) -> usize {
        let n = self.len();
        let mut count = 0;
        let mut d = 0.0_f64;
        for i in 0..n {
            let w = weight.map_or(1.0, |w| w[i]);
            let mut di = self.diag[i] - sigma * w;
            if i > 0 {
                let b = self.off[i - 1];
                di -= b * b / d;
            }
            if di == 0.0 {
                di = -f64::EPSILON * (self.diag[i].abs() + sigma.abs() * w + f64::MIN_POSITIVE);
            }
            if di < 0.0 {
                count += 1;
            }
            d = di;
        }
        count
    }

    /// Gershgorin enclosure of the pencil spectrum.
    fn spectrum_bounds(&self, weight: Option<&[f64]>) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let wi = weight.map_or(1.0, |w| w[i]);
            let mut radius = 0.0;
            if i > 0 {
                let wj = weight.map_or(1.0, |w| w[i - 1]);
                radius += self.off[i - 1].abs() / (wi * wj).sqrt();
            }
            if i + 1 < n {
                let wj = weight.map_or(1.0, |w| w[i + 1]);
                radius += self.off[i].abs() / (wi * wj).sqrt();
            }
            let c = self.diag[i] / wi;
            lo = lo.min(c - radius);
            hi = hi.max(c + radius);
        }
        (lo, hi)
    }

    /// Smallest eigenvalue of the pencil `self x = sigma W x` by Sturm
    /// bisection, accurate to roughly machine precision.
    pub fn smallest_eigenvalue(&self, weight: Option<&[f64]>) -> f64 {
        assert!(!self.is_empty(), "empty matrix has no spectrum");
        let (mut lo, mut hi) = self.spectrum_bounds(weight);
        let pad = 1e-12 * (lo.abs() + hi.abs()) + f64::MIN_POSITIVE;
        lo -= pad;
        hi += pad;
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid, weight) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for an (already accurate) eigenvalue by inverse iteration,
    /// normalised to unit max-norm with a positive largest entry.
    pub fn eigenvector(&self, sigma: f64, weight: Option<&[f64]>) -> Vec<f64> {
        let n = self.len();
        let scale = self
            .diag
            .iter()
            .map(|d| d.abs())
            .fold(sigma.abs(), f64::max)
            .max(1.0);
        // Shift just below the eigenvalue keeps the shifted matrix definite.
        let shift = sigma - 1e-10 * scale;
        let diag: Vec<f64> = (0..n)
            .map(|i| self.diag[i] - shift * weight.map_or(1.0, |w| w[i]))
            .collect();
        let shifted = SymTridiag::new(diag, self.off.clone());
        let lu = shifted.factor();
        let mut v = vec![1.0; n];
        for _ in 0..8 {
            let mut next: Vec<f64> = match weight {
                Some(w) => v.iter().zip(w).map(|(a, b)| a * b).collect(),
                None => v.clone(),
            };
            lu.solve_in_place(&mut next);
            normalize_max(&mut next);
            let change = next
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            v = next;
            if change < 1e-14 {
                break;
            }
        }
        v
    }
}

/// Scales to unit max-norm, flipping sign so the entry of largest magnitude
/// is positive. Leaves an all-zero vector untouched.
pub fn normalize_max(v: &mut [f64]) {
    let (mut best, mut idx) = (0.0_f64, 0);
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    if best == 0.0 {
        return;
    }
    let s = v[idx].signum() / best;
    v.iter_mut().for_each(|x| *x *= s);
}

/// Non-symmetric tridiagonal matrix whose off-diagonal products are positive,
/// so it is diagonally similar to a symmetric one.
#[derive(Debug, Clone)]
pub struct SignSymmetricTridiag {
    /// Entry `(i, i-1)`; index 0 unused.
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    /// Entry `(i, i+1)`; last index unused.
    pub upper: Vec<f64>,
}

impl SignSymmetricTridiag {
    /// Returns the symmetric similar matrix and the similarity scaling `s`
    /// (eigenvector of `self` = `s .* eigenvector of symmetric`), or `None`
    /// if some product `upper[i] * lower[i+1]` is not positive.
    pub fn symmetrize(&self) -> Option<(SymTridiag, Vec<f64>)> {
        let n = self.diag.len();
        let mut off = Vec::with_capacity(n.saturating_sub(1));
        let mut log_s = vec![0.0; n];
        for i in 0..n.saturating_sub(1) {
            let c = self.upper[i];
            let a = self.lower[i + 1];
            if !(c * a > 0.0) {
                return None;
            }
            off.push(c.signum() * (c * a).sqrt());
            log_s[i + 1] = log_s[i] + 0.5 * (a / c).ln();
        }
        let max_log = log_s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s = log_s.iter().map(|l| (l - max_log).exp()).collect();
        Some((SymTridiag::new(self.diag.clone(), off), s))
    }
}
