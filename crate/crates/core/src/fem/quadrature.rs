use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuadratureError {
    #[error("unsupported quadrature degree {0} (supported: 1..=10)")]
    UnsupportedDegree(usize),
}

/// Quadrature on the reference triangle `(0,0), (1,0), (0,1)`.
///
/// Points are barycentric triples `(1 - x - y, x, y)`; weights sum to the
/// reference area `1/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Iterates `(barycentric point, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = ([f64; 3], f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`, nodes ascending.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        // Newton iteration on P_m starting from the Tricomi estimate.
        let mut x = math::cos(PI * (i as f64 + 0.75) / (m as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if math::abs(dx) < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes.push(0.5 * (1.0 - x));
        weights.push(0.5 * w);
    }
    (nodes, weights)
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Collapsed (conical product) Gauss rule exact for total degree `degree`.
///
/// The square `(u, v) in [0,1]^2` is mapped onto the triangle by
/// `x = u, y = (1 - u) v`, so the Jacobian `(1 - u)` raises the degree in `u`
/// by one.
pub fn quadrature_rule(degree: usize) -> Result<QuadRule, QuadratureError> {
    if !(1..=10).contains(&degree) {
        return Err(QuadratureError::UnsupportedDegree(degree));
    }
    let mu = (degree + 2).div_ceil(2);
    let mv = (degree + 1).div_ceil(2);
    let (xu, wu) = gauss_legendre(mu);
    let (xv, wv) = gauss_legendre(mv);
    let mut points = Vec::with_capacity(mu * mv);
    let mut weights = Vec::with_capacity(mu * mv);
    for (&u, &a) in xu.iter().zip(&wu) {
        for (&v, &b) in xv.iter().zip(&wv) {
            let x = u;
            let y = (1.0 - u) * v;
            points.push([1.0 - x - y, x, y]);
            weights.push(a * b * (1.0 - u));
        }
    }
    Ok(QuadRule {
        points,
        weights,
        degree,
    })
}
