//! Interpolation on uniform node sets.

/// Samples `values[i]` at `start + i * spacing`.
#[derive(Debug, Clone, Copy)]
pub struct UniformSamples<'a> {
    pub start: f64,
    pub spacing: f64,
    pub values: &'a [f64],
}

impl<'a> UniformSamples<'a> {
    pub fn new(start: f64, spacing: f64, values: &'a [f64]) -> Self {
        Self {
            start,
            spacing,
            values,
        }
    }

    pub fn end(&self) -> f64 {
        self.start + self.spacing * (self.values.len() - 1) as f64
    }

    /// Fractional node coordinate, or `None` outside the sampled range.
    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let n = self.values.len();
        if n < 2 {
            return None;
        }
        let s = (x - self.start) / self.spacing;
        let last = (n - 1) as f64;
        // Accept points a hair outside from round-off in the node map.
        if !(s >= -1e-9 && s <= last + 1e-9) {
            return None;
        }
        let s = s.clamp(0.0, last);
        let k = (s.floor() as usize).min(n - 2);
        Some((k, s - k as f64))
    }

    pub fn linear(&self, x: f64) -> Option<f64> {
        let (k, t) = self.locate(x)?;
        Some(self.values[k] * (1.0 - t) + self.values[k + 1] * t)
    }

    /// Four-point Lagrange interpolation on the stencil nearest `x`
    /// (one-sided next to the ends).
    pub fn cubic(&self, x: f64) -> Option<f64> {
        let (k, t) = self.locate(x)?;
        let n = self.values.len();
        let v = self.values;
        if n < 4 {
            return Some(v[k] * (1.0 - t) + v[k + 1] * t);
        }
        let j = k.saturating_sub(1).min(n - 4);
        let u = t + (k - j) as f64;
        let (a, b, c, d) = (v[j], v[j + 1], v[j + 2], v[j + 3]);
        Some(
            -a * (u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0 + b * u * (u - 2.0) * (u - 3.0) / 2.0
                - c * u * (u - 1.0) * (u - 3.0) / 2.0
                + d * u * (u - 1.0) * (u - 2.0) / 6.0,
        )
    }
}
