//! Composite Gauss-Legendre quadrature on a bounded interval.
//!
//! A p-point Gauss-Legendre panel integrates polynomials of degree up to
//! 2p - 1 exactly; the composite rule on P equal panels inherits that
//! exactness panel-wise. Weights are positive and sum to the interval length.

use crate::error::{Error, Result};

/// Nodes and weights of the `order`-point Gauss-Legendre rule on [-1, 1],
/// nodes ascending.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone)]
pub struct Quadrature {
    a: f64,
    b: f64,
    order: usize,
    panels: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    // barycentric weights of the reference panel nodes
    bary: Vec<f64>,
    reference: Vec<f64>,
}

impl Quadrature {
    /// `panels` equal panels of `order`-point Gauss-Legendre on [a, b].
    pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Result<Self> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "quadrature interval [{a}, {b}] is empty or not finite"
            )));
        }
        if panels == 0 || order == 0 {
            return Err(Error::InvalidArgument(
                "quadrature needs at least one panel and one node".into(),
            ));
        }
        let (reference, ref_weights) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (x, w) in reference.iter().zip(&ref_weights) {
                nodes.push(lo + 0.5 * h * (x + 1.0));
                weights.push(0.5 * h * w);
            }
        }
        let bary = (0..order)
            .map(|j| {
                1.0 / (0..order)
                    .filter(|&k| k != j)
                    .map(|k| reference[j] - reference[k])
                    .product::<f64>()
            })
            .collect();
        Ok(Self {
            a,
            b,
            order,
            panels,
            nodes,
            weights,
            bary,
            reference,
        })
    }

    /// Composite rule with exactly `count` nodes, using the largest panel
    /// order in {8, 4, 2, 1} that divides `count`.
    pub fn with_node_count(a: f64, b: f64, count: usize) -> Result<Self> {
        let order = [8, 4, 2, 1]
            .into_iter()
            .find(|o| count.is_multiple_of(*o))
            .unwrap_or(1);
        Self::composite(a, b, count / order.max(1), order)
    }

    /// Enough `order`-point panels that a sinusoid of angular frequency
    /// `max_omega` gets at least 8 nodes per period.
    pub fn resolving(a: f64, b: f64, max_omega: f64, order: usize) -> Result<Self> {
        let periods = (b - a) * max_omega / (2.0 * std::f64::consts::PI);
        let panels = ((8.0 * periods) / order as f64).ceil().max(1.0) as usize;
        Self::composite(a, b, panels, order)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    /// Weighted sum of pre-sampled values.
    pub fn sum(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    fn panel_bounds(&self, p: usize) -> (f64, f64) {
        let h = (self.b - self.a) / self.panels as f64;
        (self.a + p as f64 * h, self.a + (p + 1) as f64 * h)
    }

    /// Double integral over [a,b]² of a kernel that is smooth on either side
    /// of the diagonal `s = t` but may have a kink there. Diagonal panel
    /// squares are split into two triangles, each integrated with a collapsed
    /// tensor Gauss-Legendre rule.
    pub fn double_integral_split<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        let p = self.order;
        let (ref_x, ref_w) = (&self.reference, {
            let (_, w) = gauss_legendre(p);
            w
        });
        let mut total = 0.0;
        for ps in 0..self.panels {
            for pt in 0..self.panels {
                if ps != pt {
                    for i in 0..p {
                        let (s, ws) = (self.nodes[ps * p + i], self.weights[ps * p + i]);
                        for j in 0..p {
                            let (t, wt) = (self.nodes[pt * p + j], self.weights[pt * p + j]);
                            total += ws * wt * f(s, t);
                        }
                    }
                    continue;
                }
                let (lo, hi) = self.panel_bounds(ps);
                for i in 0..p {
                    let (s, ws) = (self.nodes[ps * p + i], self.weights[ps * p + i]);
                    // t in [lo, s] and t in [s, hi]
                    for (t0, t1) in [(lo, s), (s, hi)] {
                        let half = 0.5 * (t1 - t0);
                        for j in 0..p {
                            let t = t0 + half * (ref_x[j] + 1.0);
                            total += ws * half * ref_w[j] * f(s, t);
                        }
                    }
                }
            }
        }
        total
    }

    /// Barycentric Lagrange interpolation of node samples within the panel
    /// containing `t`. Off-node values are an approximation of polynomial
    /// degree `order - 1` per panel.
    pub fn interpolate(&self, values: &[f64], t: f64) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::Dimension(format!(
                "expected {} samples, got {}",
                self.len(),
                values.len()
            )));
        }
        Ok(self.interpolate_with(t, |i| values[i]))
    }

    pub(crate) fn interpolate_with<T, F>(&self, t: f64, sample: F) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
        F: Fn(usize) -> T,
    {
        let h = (self.b - self.a) / self.panels as f64;
        let p = (((t - self.a) / h).floor().max(0.0) as usize).min(self.panels - 1);
        let (lo, hi) = self.panel_bounds(p);
        let x = 2.0 * (t - lo) / (hi - lo) - 1.0;
        let base = p * self.order;
        if let Some(j) = self.reference.iter().position(|&r| r == x) {
            return sample(base + j);
        }
        let mut num = T::default();
        let mut den = 0.0;
        for j in 0..self.order {
            let c = self.bary[j] / (x - self.reference[j]);
            num = num + sample(base + j) * c;
            den += c;
        }
        num * (1.0 / den)
    }
}
