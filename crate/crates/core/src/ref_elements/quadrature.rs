//! Quadrature on the reference triangle `{x ≥ 0, y ≥ 0, x + y ≤ 1}` and on
//! the unit interval.

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 10;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    /// Weights sum to the reference area `1/2`.
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(*p))
            .sum()
    }
}

/// Triangle rule exact for polynomials of total degree `order`.
///
/// Orders 1 and 2 use the symmetric centroid and edge-interior rules; higher
/// orders use a collapsed (Duffy) Gauss–Legendre product rule.
pub fn quadrature_rule(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::Unsupported(format!(
            "triangle quadrature of order {order} (supported: 1..={MAX_ORDER})"
        )));
    }
    if order == 1 {
        return Ok(QuadratureRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
            order,
        });
    }
    if order == 2 {
        let (a, b) = (1.0 / 6.0, 2.0 / 3.0);
        return Ok(QuadratureRule {
            points: vec![[a, a], [b, a], [a, b]],
            weights: vec![1.0 / 6.0; 3],
            order,
        });
    }
    // x = u, y = (1 - u) v, dx dy = (1 - u) du dv
    let n = (order + 2).div_ceil(2);
    let (gx, gw) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (u, wu) in gx.iter().zip(&gw) {
        for (v, wv) in gx.iter().zip(&gw) {
            points.push([*u, (1.0 - u) * v]);
            weights.push(wu * wv * (1.0 - u));
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        order,
    })
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Value and derivative of the Legendre polynomial `P_n` on `[-1, 1]`.
pub fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = if (1.0 - z * z).abs() < 1e-300 {
        0.5 * (n * (n + 1)) as f64 * z.powi(n as i32 + 1)
    } else {
        n as f64 * (p0 - z * p1) / (1.0 - z * z)
    };
    (p1, d)
}

/// Legendre polynomial of degree `j` shifted to `[0, 1]`.
pub fn shifted_legendre(j: usize, s: f64) -> f64 {
    legendre_with_derivative(j, 2.0 * s - 1.0).0
}
