//! Truncated Taylor arithmetic: `f(λ + h) = Σ_{k≤4} c_k h^k`.
//!
//! Used for the third and fourth derivatives of `φ`, where finite
//! differences of `φ''` lose all significant digits once `φ` is close to
//! linear.

pub(crate) const ORDER: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Series(pub [f64; ORDER + 1]);

impl Series {
    /// The identity `λ ↦ λ` expanded at `x`.
    pub fn variable(x: f64) -> Self {
        let mut c = [0.0; ORDER + 1];
        c[0] = x;
        c[1] = 1.0;
        Series(c)
    }

    pub fn shift(mut self, v: f64) -> Self {
        self.0[0] += v;
        self
    }

    /// Replaces the constant term, e.g. with a more accurate evaluation.
    pub fn with_value(mut self, v: f64) -> Self {
        self.0[0] = v;
        self
    }

    /// `f^p` for `f₀ > 0`, by `n f₀ g_n = Σ_{k=1}^{n} ((p+1)k − n) f_k g_{n−k}`.
    pub fn powf(self, p: f64) -> Self {
        let f = self.0;
        let mut g = [0.0; ORDER + 1];
        g[0] = f[0].powf(p);
        for n in 1..=ORDER {
            let s: f64 = (1..=n).map(|k| ((p + 1.0) * k as f64 - n as f64) * f[k] * g[n - k]).sum();
            g[n] = s / (n as f64 * f[0]);
        }
        Series(g)
    }

    /// `ln(1 + f)`, by `u₀ g_n = f_n − (1/n) Σ_{k=1}^{n−1} k g_k u_{n−k}` with
    /// `u = 1 + f`.
    pub fn ln_1p(self) -> Self {
        let f = self.0;
        let u0 = 1.0 + f[0];
        let mut g = [0.0; ORDER + 1];
        g[0] = f[0].ln_1p();
        for n in 1..=ORDER {
            let s: f64 = (1..n).map(|k| k as f64 * g[k] * f[n - k]).sum();
            g[n] = (f[n] - s / n as f64) / u0;
        }
        Series(g)
    }

    /// `[f, f', f'', f''', f'''']` at the expansion point.
    pub fn derivatives(self) -> [f64; ORDER + 1] {
        let mut d = self.0;
        let mut fact = 1.0;
        for (k, v) in d.iter_mut().enumerate().skip(1) {
            fact *= k as f64;
            *v *= fact;
        }
        d
    }
}
