//! Prescribed shape trajectories `t ↦ (s(t), ṡ(t))`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::Error;

pub trait ShapePath: Sync {
    fn dof(&self) -> usize;

    /// Time span `[0, duration]` covered by the path.
    fn duration(&self) -> f64;

    /// Shape and shape rate at time `t`.
    fn eval(&self, t: f64) -> (DVector<f64>, DVector<f64>);

    /// Gap between the endpoints in shape space.
    fn closure_gap(&self) -> f64 {
        let (a, _) = self.eval(0.0);
        let (b, _) = self.eval(self.duration());
        (a - b).amax()
    }
}

/// `s₁ = (3π/2)(cos(2πt/T) − 1)`, `s₂ = (π/2) sin(2πt/T)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sinusoid {
    pub period: f64,
}

impl Sinusoid {
    pub fn new(period: f64) -> Self {
        Self { period }
    }
}

impl ShapePath for Sinusoid {
    fn dof(&self) -> usize {
        2
    }

    fn duration(&self) -> f64 {
        self.period
    }

    fn eval(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let w = 2.0 * PI / self.period;
        let (sin, cos) = (w * t).sin_cos();
        let s = DVector::from_vec(vec![1.5 * PI * (cos - 1.0), 0.5 * PI * sin]);
        let sdot = DVector::from_vec(vec![-1.5 * PI * w * sin, 0.5 * PI * w * cos]);
        (s, sdot)
    }

    fn closure_gap(&self) -> f64 {
        0.0
    }
}

/// Constant shape held for `duration` seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantShape {
    pub s: DVector<f64>,
    pub duration: f64,
}

impl ShapePath for ConstantShape {
    fn dof(&self) -> usize {
        self.s.len()
    }

    fn duration(&self) -> f64 {
        self.duration
    }

    fn eval(&self, _t: f64) -> (DVector<f64>, DVector<f64>) {
        (self.s.clone(), DVector::zeros(self.s.len()))
    }
}

/// Closed loop `s(t) = center + Σ_k a_k sin(kωt) + b_k (cos(kωt) − 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierLoop {
    pub start: DVector<f64>,
    /// `n_J × K` sine amplitudes.
    pub sin: DMatrix<f64>,
    /// `n_J × K` cosine amplitudes.
    pub cos: DMatrix<f64>,
    pub period: f64,
}

impl ShapePath for FourierLoop {
    fn dof(&self) -> usize {
        self.start.len()
    }

    fn duration(&self) -> f64 {
        self.period
    }

    fn eval(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let w = 2.0 * PI / self.period;
        let mut s = self.start.clone();
        let mut sdot = DVector::zeros(s.len());
        for k in 0..self.sin.ncols() {
            let kw = (k + 1) as f64 * w;
            let (sn, cs) = (kw * t).sin_cos();
            for i in 0..s.len() {
                let (a, b) = (self.sin[(i, k)], self.cos[(i, k)]);
                s[i] += a * sn + b * (cs - 1.0);
                sdot[i] += kw * (a * cs - b * sn);
            }
        }
        (s, sdot)
    }
}

/// Piecewise cubic Hermite interpolation of sampled shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledShapePath {
    times: Vec<f64>,
    shapes: Vec<DVector<f64>>,
    rates: Vec<DVector<f64>>,
}

impl SampledShapePath {
    /// Builds from samples; missing rates are estimated by central differences
    /// (one-sided at the ends).
    pub fn new(
        times: Vec<f64>,
        shapes: Vec<DVector<f64>>,
        rates: Option<Vec<DVector<f64>>>,
    ) -> Result<Self, Error> {
        if times.len() < 2 || shapes.len() != times.len() {
            return Err(Error::Trajectory("need at least two samples".into()));
        }
        if times.windows(2).any(|w| w[1].is_nan() || w[1] <= w[0]) {
            return Err(Error::Trajectory(
                "times must be strictly increasing".into(),
            ));
        }
        let rates = match rates {
            Some(r) if r.len() == times.len() => r,
            Some(_) => return Err(Error::Trajectory("rate column count mismatch".into())),
            None => {
                let last = times.len() - 1;
                (0..times.len())
                    .map(|k| {
                        let (a, b) = (k.saturating_sub(1), (k + 1).min(last));
                        (&shapes[b] - &shapes[a]) / (times[b] - times[a])
                    })
                    .collect()
            }
        };
        Ok(Self {
            times,
            shapes,
            rates,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

impl ShapePath for SampledShapePath {
    fn dof(&self) -> usize {
        self.shapes[0].len()
    }

    fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    fn eval(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let t = (t + self.times[0]).clamp(self.times[0], self.times[self.times.len() - 1]);
        let k = match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            i => (i - 1).min(self.times.len() - 2),
        };
        let h = self.times[k + 1] - self.times[k];
        let u = (t - self.times[k]) / h;
        let (p0, p1) = (&self.shapes[k], &self.shapes[k + 1]);
        let (m0, m1) = (&self.rates[k] * h, &self.rates[k + 1] * h);
        let (u2, u3) = (u * u, u * u * u);
        let s = p0 * (2.0 * u3 - 3.0 * u2 + 1.0)
            + &m0 * (u3 - 2.0 * u2 + u)
            + p1 * (-2.0 * u3 + 3.0 * u2)
            + &m1 * (u3 - u2);
        let ds = p0 * (6.0 * u2 - 6.0 * u)
            + &m0 * (3.0 * u2 - 4.0 * u + 1.0)
            + p1 * (-6.0 * u2 + 6.0 * u)
            + &m1 * (3.0 * u2 - 2.0 * u);
        (s, ds / h)
    }
}

/// Reads `t, s_1..s_n[, sdot_1..sdot_n]` rows. A non-numeric first row is
/// treated as a header; `#` starts a comment line.
pub fn parse_trajectory(text: &str, dof: usize) -> Result<SampledShapePath, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut times = Vec::new();
    let mut shapes = Vec::new();
    let mut rates = Vec::new();
    let mut with_rates = None;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Trajectory(e.to_string()))?;
        let values: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match values {
            Ok(v) => v,
            Err(_) if row == 0 => continue,
            Err(e) => return Err(Error::Trajectory(format!("row {}: {e}", row + 1))),
        };
        let has = match values.len() {
            n if n == 1 + dof => false,
            n if n == 1 + 2 * dof => true,
            n => {
                return Err(Error::Trajectory(format!(
                    "row {}: expected {} or {} columns, got {n}",
                    row + 1,
                    1 + dof,
                    1 + 2 * dof
                )))
            }
        };
        if *with_rates.get_or_insert(has) != has {
            return Err(Error::Trajectory(format!(
                "row {}: inconsistent column count",
                row + 1
            )));
        }
        times.push(values[0]);
        shapes.push(DVector::from_row_slice(&values[1..1 + dof]));
        if has {
            rates.push(DVector::from_row_slice(&values[1 + dof..]));
        }
    }
    SampledShapePath::new(times, shapes, (with_rates == Some(true)).then_some(rates))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_endpoints_and_rates() {
        let p = Sinusoid::new(10.0);
        let (s0, _) = p.eval(0.0);
        let (s1, _) = p.eval(10.0);
        assert_eq!(s0, DVector::zeros(2));
        assert!((s1 - s0).amax() < 1e-12);
        let (s, sd) = p.eval(2.5);
        assert!((s[0] + 1.5 * PI).abs() < 1e-12);
        assert!((s[1] - 0.5 * PI).abs() < 1e-12);
        let h = 1e-6;
        let fd = (p.eval(3.3 + h).0 - p.eval(3.3 - h).0) / (2.0 * h);
        assert!((fd - p.eval(3.3).1).amax() < 1e-7);
        assert!(sd[1].abs() < 1e-12);
    }

    #[test]
    fn fourier_loop_closes() {
        let p = FourierLoop {
            start: DVector::from_vec(vec![0.3, -0.2]),
            sin: DMatrix::from_row_slice(2, 2, &[0.5, 0.1, -0.3, 0.2]),
            cos: DMatrix::from_row_slice(2, 2, &[0.2, -0.4, 0.7, 0.05]),
            period: 4.0,
        };
        assert!(p.closure_gap() < 1e-12);
        let h = 1e-6;
        let fd = (p.eval(1.1 + h).0 - p.eval(1.1 - h).0) / (2.0 * h);
        assert!((fd - p.eval(1.1).1).amax() < 1e-7);
    }

    #[test]
    fn parses_with_and_without_rates() {
        let text = "t,s1,s2\n0,0,0\n0.5,0.25,1\n1,1,2\n";
        let p = parse_trajectory(text, 2).unwrap();
        assert_eq!(p.duration(), 1.0);
        let (s, _) = p.eval(0.5);
        assert!((s - DVector::from_vec(vec![0.25, 1.0])).amax() < 1e-15);

        let text = "# rates given\n0,0,1\n1,1,1\n";
        let p = parse_trajectory(text, 1).unwrap();
        let (s, sd) = p.eval(0.5);
        assert!((s[0] - 0.5).abs() < 1e-15);
        assert!((sd[0] - 1.0).abs() < 1e-15);

        assert!(parse_trajectory("0,1,2,3\n", 2).is_err());
        assert!(parse_trajectory("0,1\n0,2\n", 1).is_err());
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |t: f64| t * t * t - 2.0 * t;
        let df = |t: f64| 3.0 * t * t - 2.0;
        let times = vec![0.0, 0.4, 1.0];
        let p = SampledShapePath::new(
            times.clone(),
            times
                .iter()
                .map(|&t| DVector::from_element(1, f(t)))
                .collect(),
            Some(
                times
                    .iter()
                    .map(|&t| DVector::from_element(1, df(t)))
                    .collect(),
            ),
        )
        .unwrap();
        for t in [0.1, 0.55, 0.93] {
            let (s, sd) = p.eval(t);
            assert!((s[0] - f(t)).abs() < 1e-14);
            assert!((sd[0] - df(t)).abs() < 1e-13);
        }
    }
}
