/// Running integral `I(x) = ∫_0^x g` of a function tabulated on a uniform grid,
/// trapezoid rule between nodes.
#[derive(Clone, Debug)]
pub struct CumulativeIntegral {
    h: f64,
    g: Vec<f64>,
    cum: Vec<f64>,
}

impl CumulativeIntegral {
    /// Tabulates `g` on `cells + 1` nodes over `[0, hi]`.
    pub fn new(hi: f64, cells: usize, g: impl Fn(f64) -> f64) -> Self {
        let cells = cells.max(1);
        let h = if hi > 0.0 { hi / cells as f64 } else { 1.0 };
        let g: Vec<f64> = (0..=cells).map(|k| g(k as f64 * h)).collect();
        let mut cum = vec![0.0; cells + 1];
        for k in 1..=cells {
            cum[k] = cum[k - 1] + 0.5 * h * (g[k - 1] + g[k]);
        }
        Self { h, g, cum }
    }

    /// Interpolated integrand.
    pub fn g_at(&self, x: f64) -> f64 {
        let last = self.g.len() - 1;
        if x <= 0.0 {
            return self.g[0];
        }
        let s = x / self.h;
        let k = (s.floor() as usize).min(last);
        if k >= last {
            return self.g[last];
        }
        let w = s - k as f64;
        self.g[k] + w * (self.g[k + 1] - self.g[k])
    }

    pub fn integral(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let last = self.g.len() - 1;
        let s = x / self.h;
        let k = (s.floor() as usize).min(last);
        if k >= last {
            return self.cum[last] + self.g[last] * (x - last as f64 * self.h);
        }
        let dx = x - k as f64 * self.h;
        self.cum[k] + 0.5 * dx * (self.g[k] + self.g_at(x))
    }
}
