use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One period of measured inlet flow.
#[derive(Debug, Clone, PartialEq)]
pub struct InletFlow {
    /// Strictly increasing sample times in [0, T).
    pub times: Vec<f64>,
    /// mL/s
    pub values: Vec<f64>,
    pub period: f64,
}

impl InletFlow {
    pub fn new(times: Vec<f64>, values: Vec<f64>, period: f64) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidInput("inlet flow needs matching, nonempty times and values".into()));
        }
        if !(period > 0.0) {
            return Err(Error::InvalidInput("inlet period must be positive".into()));
        }
        if times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) || *times.last().unwrap() >= period {
            return Err(Error::InvalidInput("inlet times must be strictly increasing within [0, T)".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("inlet flow values must be finite".into()));
        }
        Ok(Self { times, values, period })
    }

    /// Steady flow.
    pub fn constant(q: f64, period: f64) -> Self {
        Self {
            times: vec![0.0],
            values: vec![q],
            period,
        }
    }

    /// Builds from samples that may repeat the first point at t = T.
    pub fn from_samples(times: Vec<f64>, values: Vec<f64>, period: f64) -> Result<Self> {
        let (mut t, mut v) = (times, values);
        if t.len() > 1 && (t[t.len() - 1] - period).abs() <= 1e-9 * period {
            t.pop();
            v.pop();
        }
        Self::new(t, v, period)
    }

    pub fn spline(&self) -> Result<PeriodicSpline> {
        PeriodicSpline::new(&self.times, &self.values, self.period)
    }
}

/// Periodic cubic spline interpolant.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
    period: f64,
}

impl PeriodicSpline {
    pub fn new(times: &[f64], values: &[f64], period: f64) -> Result<Self> {
        let n = times.len();
        if n < 3 {
            // Too few knots to pin curvature; fall back to mean-preserving linear.
            return Ok(Self {
                knots: times.to_vec(),
                values: values.to_vec(),
                second: vec![0.0; n],
                period,
            });
        }
        let h = |i: usize| {
            if i + 1 < n {
                times[i + 1] - times[i]
            } else {
                times[0] + period - times[n - 1]
            }
        };
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let next = (i + 1) % n;
            let (hp, hn) = (h(prev), h(i));
            a[(i, prev)] += hp;
            a[(i, i)] += 2.0 * (hp + hn);
            a[(i, next)] += hn;
            rhs[i] = 6.0 * ((values[next] - values[i]) / hn - (values[i] - values[prev]) / hp);
        }
        let second = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular periodic spline system".into()))?;
        Ok(Self {
            knots: times.to_vec(),
            values: values.to_vec(),
            second: second.iter().copied().collect(),
            period,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.knots.len();
        if n == 1 {
            return self.values[0];
        }
        let t0 = self.knots[0];
        let mut x = (t - t0).rem_euclid(self.period) + t0;
        if x >= t0 + self.period {
            x = t0;
        }
        let i = match self.knots.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let next = (i + 1) % n;
        let x1 = self.knots[i];
        let x2 = if next == 0 { self.knots[0] + self.period } else { self.knots[next] };
        let h = x2 - x1;
        let a = (x2 - x) / h;
        let b = (x - x1) / h;
        a * self.values[i]
            + b * self.values[next]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[next]) * h * h / 6.0
    }

    /// Exact period-mean of the interpolant.
    pub fn mean(&self) -> f64 {
        let n = self.knots.len();
        if n == 1 {
            return self.values[0];
        }
        let mut total = 0.0;
        for i in 0..n {
            let next = (i + 1) % n;
            let x2 = if next == 0 { self.knots[0] + self.period } else { self.knots[next] };
            let h = x2 - self.knots[i];
            total += h * (self.values[i] + self.values[next]) / 2.0
                - h.powi(3) * (self.second[i] + self.second[next]) / 24.0;
        }
        total / self.period
    }
}
