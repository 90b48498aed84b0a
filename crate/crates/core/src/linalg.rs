//! Small dense helpers shared by the numeric modules.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{dim, param, Result};

/// Order of an ℓp norm, `1 <= p <= ∞`. Serialized as a number, or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormOrder(pub f64);

impl NormOrder {
    pub const ONE: NormOrder = NormOrder(1.0);
    pub const TWO: NormOrder = NormOrder(2.0);
    pub const INF: NormOrder = NormOrder(f64::INFINITY);

    pub fn check(self) -> Result<Self> {
        if self.0.is_nan() || self.0 < 1.0 {
            return Err(param(format!("norm order must satisfy 1 <= p <= inf, got {}", self.0)));
        }
        Ok(self)
    }

    /// Hölder conjugate: 1/p + 1/p* = 1.
    pub fn conjugate(self) -> NormOrder {
        let p = self.0;
        if p == 1.0 {
            NormOrder::INF
        } else if p.is_infinite() {
            NormOrder::ONE
        } else {
            NormOrder(p / (p - 1.0))
        }
    }

    pub fn is_inf(self) -> bool {
        self.0.is_infinite()
    }
}

impl From<f64> for NormOrder {
    fn from(p: f64) -> Self {
        NormOrder(p)
    }
}

impl Serialize for NormOrder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for NormOrder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Ok(NormOrder(p)),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => {
                Ok(NormOrder::INF)
            }
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad norm order {t:?}"))),
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(x: &[f64], p: NormOrder) -> f64 {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let p = p.0;
    if p.is_infinite() {
        m
    } else if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        m * x.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt()
    } else {
        m * x.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Unit vector `u` in the conjugate norm with `<u, x> = ||x||_p`. Zero for `x = 0`.
pub fn dual_vector(x: &[f64], p: NormOrder) -> Vec<f64> {
    let n = norm(x, p);
    if n == 0.0 {
        return vec![0.0; x.len()];
    }
    let sign = |v: f64| {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    if p.is_inf() {
        let k = argmax_by(x, |v| v.abs());
        let mut u = vec![0.0; x.len()];
        u[k] = sign(x[k]);
        u
    } else if p.0 == 1.0 {
        x.iter().map(|&v| sign(v)).collect()
    } else {
        x.iter().map(|&v| sign(v) * (v.abs() / n).powf(p.0 - 1.0)).collect()
    }
}

/// First index attaining the maximum of `f`.
pub fn argmax_by(x: &[f64], f: impl Fn(f64) -> f64) -> usize {
    let mut best = 0;
    let mut bv = f64::NEG_INFINITY;
    for (i, &v) in x.iter().enumerate() {
        let fv = f(v);
        if fv > bv {
            bv = fv;
            best = i;
        }
    }
    best
}

pub fn argmax(x: &[f64]) -> usize {
    argmax_by(x, |v| v)
}

pub fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m.is_infinite() {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Normalizes log-weights into a distribution.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// `x ln x` with the continuous extension at 0.
pub fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k as f64 + 1.0);
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

pub fn check_distribution(x: &[f64], tol: f64, what: &str) -> Result<()> {
    if x.is_empty() {
        return Err(dim(format!("{what} is empty")));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite() || **v < -tol) {
        return Err(param(format!("{what} has entry {v}")));
    }
    let s: f64 = x.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(param(format!("{what} sums to {s}")));
    }
    Ok(())
}

pub fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if r == 0 || c == 0 || rows.iter().any(|x| x.len() != c) {
            return Err(dim("matrix rows must be non-empty and of equal length"));
        }
        Ok(Mat { rows: r, cols: c, data: rows.concat() })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn outer(x: &[f64], y: &[f64]) -> Self {
        Mat::from_fn(x.len(), y.len(), |i, j| x[i] * y[j])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// `M y`
    pub fn mul_vec(&self, y: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), y)).collect()
    }

    /// `Mᵀ x`
    pub fn tmul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o += xi * m;
            }
        }
        out
    }

    /// `xᵀ M y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul_vec(y))
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scale(&self, c: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &Mat) -> f64 {
        dot(&self.data, &other.data)
    }
}

/// Solves `A z = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `1e-12` relative to the matrix scale.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f == 0.0 {
                continue;
            }
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut z = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * z[k]).sum();
        z[r] = (b[r] - s) / a[r][r];
    }
    Some(z)
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while hi - lo > tol * (1.0 + lo.abs() + hi.abs()) && iters < 300 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        iters += 1;
    }
    let candidates = [(lo, f(lo)), (x1, f1), (x2, f2), (hi, f(hi))];
    candidates.into_iter().fold((lo, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
}
