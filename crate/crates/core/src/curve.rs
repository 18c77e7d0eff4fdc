//! Sampled causal curves.
//!
//! A [`SampledCurve`] stores ordered `(parameter, point)` samples, optionally
//! with explicit velocities (integrator output); otherwise velocities are
//! derived by central differences. Curves are treated as polygonal for
//! length and causality purposes and as piecewise-cubic for resampling.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::field::MetricField;
use crate::tolerances;

#[derive(Debug, Clone)]
pub struct SampledCurve {
    params: Vec<f64>,
    points: Vec<DVector<f64>>,
    velocities: Option<Vec<DVector<f64>>>,
}

impl SampledCurve {
    pub fn new(params: Vec<f64>, points: Vec<DVector<f64>>) -> Result<Self> {
        if params.len() != points.len() {
            return Err(Error::InvalidCurve(format!(
                "{} parameters vs {} points",
                params.len(),
                points.len()
            )));
        }
        if params.len() < 2 {
            return Err(Error::InvalidCurve("need at least two samples".into()));
        }
        if params.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidCurve("parameters must strictly increase".into()));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) || points.iter().flatten().any(|c| !c.is_finite())
        {
            return Err(Error::InvalidCurve("points must be finite and of equal dimension".into()));
        }
        Ok(Self {
            params,
            points,
            velocities: None,
        })
    }

    pub fn with_velocities(mut self, velocities: Vec<DVector<f64>>) -> Result<Self> {
        if velocities.len() != self.params.len() {
            return Err(Error::InvalidCurve("one velocity per sample required".into()));
        }
        self.velocities = Some(velocities);
        Ok(self)
    }

    /// Straight segment between two points sampled at `m + 1` nodes.
    pub fn line(from: &DVector<f64>, to: &DVector<f64>, m: usize) -> Self {
        let m = m.max(1);
        let params = (0..=m).map(|i| i as f64 / m as f64).collect();
        let points = (0..=m)
            .map(|i| {
                let s = i as f64 / m as f64;
                from * (1.0 - s) + to * s
            })
            .collect();
        Self {
            params,
            points,
            velocities: None,
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &DVector<f64> {
        &self.points[i]
    }

    pub fn param_range(&self) -> (f64, f64) {
        (self.params[0], *self.params.last().unwrap())
    }

    pub fn has_velocities(&self) -> bool {
        self.velocities.is_some()
    }

    pub fn velocities(&self) -> Option<&[DVector<f64>]> {
        self.velocities.as_deref()
    }

    /// Velocity at sample `i`: explicit if present, otherwise central
    /// differences (one-sided at the boundary).
    pub fn velocity(&self, i: usize) -> DVector<f64> {
        if let Some(vs) = &self.velocities {
            return vs[i].clone();
        }
        let last = self.len() - 1;
        let (lo, hi) = if i == 0 {
            (0, 1)
        } else if i == last {
            (last - 1, last)
        } else {
            (i - 1, i + 1)
        };
        (&self.points[hi] - &self.points[lo]) / (self.params[hi] - self.params[lo])
    }

    /// Slope of segment `i` (between samples `i` and `i + 1`).
    pub fn segment_slope(&self, i: usize) -> DVector<f64> {
        (&self.points[i + 1] - &self.points[i]) / (self.params[i + 1] - self.params[i])
    }

    pub fn segment_midpoint(&self, i: usize) -> DVector<f64> {
        (&self.points[i + 1] + &self.points[i]) * 0.5
    }

    /// Polygonal Euclidean length.
    pub fn euclidean_length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (&w[1] - &w[0]).norm())
            .sum()
    }

    /// Linear interpolation of the position at parameter `t`.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        let (a, b) = self.param_range();
        if t <= a {
            return self.points[0].clone();
        }
        if t >= b {
            return self.points.last().unwrap().clone();
        }
        let i = match self
            .params
            .binary_search_by(|p| p.partial_cmp(&t).unwrap())
        {
            Ok(i) => return self.points[i].clone(),
            Err(i) => i - 1,
        };
        let w = (t - self.params[i]) / (self.params[i + 1] - self.params[i]);
        &self.points[i] * (1.0 - w) + &self.points[i + 1] * w
    }

    /// Checks that every segment slope is causal at the segment midpoint:
    /// `g(slope, slope) >= -null_tol * scale`.
    pub fn check_causal(&self, field: &MetricField) -> Result<()> {
        for i in 0..self.len() - 1 {
            let slope = self.segment_slope(i);
            let mid = self.segment_midpoint(i);
            let q = field.eval_quadratic(&mid, &slope);
            if q < -tolerances::NULL_TOL * (1.0 + slope.norm_squared()) {
                return Err(Error::NotCausal {
                    segment: i,
                    value: q,
                });
            }
        }
        Ok(())
    }

    /// Worst bilipschitz defect against constant `c` over sample pairs:
    /// returns the largest value of `|t2 − t1| / (c ||p2 − p1||)`. A curve
    /// parametrized by arclength in a normalized chart stays below 1.
    pub fn bilipschitz_defect(&self, c: f64) -> f64 {
        let mut worst: f64 = 0.0;
        let stride = (self.len() / 64).max(1);
        for i in (0..self.len()).step_by(stride) {
            for j in ((i + 1)..self.len()).step_by(stride) {
                let dt = self.params[j] - self.params[i];
                let dp = (&self.points[j] - &self.points[i]).norm();
                if dp > 1e-300 {
                    worst = worst.max(dt / (c * dp));
                }
            }
        }
        worst
    }

    /// Largest deviation of the sample spacing from Euclidean arclength.
    pub fn arclength_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() - 1 {
            let dt = self.params[i + 1] - self.params[i];
            let dp = (&self.points[i + 1] - &self.points[i]).norm();
            worst = worst.max((dp / dt - 1.0).abs());
        }
        worst
    }

    /// Resample the curve by cumulative chord length using monotone cubic
    /// (Fritsch-Carlson) interpolation of each coordinate, returning an
    /// arclength-parametrized curve with `samples` nodes on `[0, S]`.
    pub fn arclength_reparametrized(&self, samples: usize) -> Result<SampledCurve> {
        let samples = samples.max(2);
        // Cumulative chord lengths. Chords far below the mean spacing carry
        // slopes dominated by rounding and would poison the interpolant, so
        // those samples are dropped.
        let total_estimate: f64 = self
            .points
            .windows(2)
            .map(|w| (&w[1] - &w[0]).norm())
            .sum();
        let mean_chord = total_estimate / (self.len() - 1) as f64;
        let chord_floor = (1e-6 * mean_chord).max(1e-300);
        let mut s = Vec::with_capacity(self.len());
        let mut kept: Vec<usize> = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        s.push(0.0);
        kept.push(0);
        for i in 1..self.len() {
            let d = (&self.points[i] - &self.points[kept[kept.len() - 1]]).norm();
            if d <= chord_floor {
                continue;
            }
            acc += d;
            s.push(acc);
            kept.push(i);
        }
        if s.len() < 2 {
            return Err(Error::InvalidCurve("curve has zero Euclidean length".into()));
        }
        let total = acc;
        let dim = self.dim();
        let coords: Vec<Vec<f64>> = (0..dim)
            .map(|d| kept.iter().map(|&i| self.points[i][d]).collect())
            .collect();
        let splines: Vec<Pchip> = coords.iter().map(|c| Pchip::new(&s, c)).collect();

        let mut params = Vec::with_capacity(samples);
        let mut points = Vec::with_capacity(samples);
        let mut velocities = Vec::with_capacity(samples);
        for k in 0..samples {
            let t = total * k as f64 / (samples - 1) as f64;
            params.push(t);
            let mut p = DVector::zeros(dim);
            let mut v = DVector::zeros(dim);
            for (d, spline) in splines.iter().enumerate() {
                let (val, der) = spline.eval_with_derivative(t);
                p[d] = val;
                v[d] = der;
            }
            points.push(p);
            velocities.push(v);
        }
        SampledCurve::new(params, points)?.with_velocities(velocities)
    }

    /// Sup distance to another curve over a shared uniform parameter grid of
    /// `checks` points (both curves evaluated by linear interpolation after
    /// affinely mapping their parameter ranges onto [0, 1]).
    pub fn sup_distance(&self, other: &SampledCurve, checks: usize) -> f64 {
        let (a0, b0) = self.param_range();
        let (a1, b1) = other.param_range();
        let mut worst: f64 = 0.0;
        for k in 0..checks {
            let s = k as f64 / (checks - 1) as f64;
            let p = self.eval(a0 + s * (b0 - a0));
            let q = other.eval(a1 + s * (b1 - a1));
            worst = worst.max((p - q).norm());
        }
        worst
    }
}

/// Monotone cubic Hermite interpolant (Fritsch-Carlson slope limiting).
pub(crate) struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: &[f64], ys: &[f64]) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n);
        let mut d = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            d.push((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]));
        }
        let mut slopes = vec![0.0; n];
        slopes[0] = d[0];
        slopes[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            if d[i - 1] * d[i] <= 0.0 {
                slopes[i] = 0.0;
            } else {
                // Weighted harmonic mean keeps the interpolant monotone.
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                slopes[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            slopes,
        }
    }

    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let n = self.xs.len();
        let i = if x <= self.xs[0] {
            0
        } else if x >= self.xs[n - 1] {
            n - 2
        } else {
            match self.xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
                Ok(i) => i.min(n - 2),
                Err(i) => i - 1,
            }
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        let deriv = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1)
            / h;
        (value, deriv)
    }
}
