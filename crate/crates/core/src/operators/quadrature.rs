//! Quadrature rules on the unit interval and on triangles.

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like starting guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
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
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A quadrature rule on a triangle in barycentric coordinates.
///
/// Weights sum to one; multiply by the triangle area to integrate.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// One-point centroid rule (degree 1).
    pub fn centroid() -> Self {
        Self {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![1.0],
        }
    }

    /// Symmetric three-point interior rule (degree 2).
    pub fn gauss3() -> Self {
        let a = 2.0 / 3.0;
        let b = 1.0 / 6.0;
        Self {
            points: vec![[a, b, b], [b, a, b], [b, b, a]],
            weights: vec![1.0 / 3.0; 3],
        }
    }

    /// Seven-point rule exact for polynomials of degree 5.
    pub fn dunavant7() -> Self {
        let (a1, b1, w1) = (0.059_715_871_789_770, 0.470_142_064_105_115, 0.132_394_152_788_506);
        let (a2, b2, w2) = (0.797_426_985_353_087, 0.101_286_507_323_456, 0.125_939_180_544_827);
        Self {
            points: vec![
                [1.0 / 3.0; 3],
                [a1, b1, b1],
                [b1, a1, b1],
                [b1, b1, a1],
                [a2, b2, b2],
                [b2, a2, b2],
                [b2, b2, a2],
            ],
            weights: vec![0.225, w1, w1, w1, w2, w2, w2],
        }
    }

    /// Collapsed Gauss-Legendre product rule with `n * n` points, exact to degree `2n - 2`.
    pub fn collapsed(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (xi, wi) in x.iter().zip(&w) {
            for (eta, we) in x.iter().zip(&w) {
                let l1 = *xi;
                let l2 = eta * (1.0 - xi);
                points.push([1.0 - l1 - l2, l1, l2]);
                weights.push(2.0 * wi * we * (1.0 - xi));
            }
        }
        Self { points, weights }
    }

    /// Rule obtained by splitting the triangle into `s * s` congruent children
    /// and applying `self` on each.
    pub fn refined(&self, s: usize) -> Self {
        assert!(s >= 1);
        let sf = s as f64;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let child_w = 1.0 / (sf * sf);
        let mut push_child = |c: [[f64; 3]; 3]| {
            for (p, w) in self.points.iter().zip(&self.weights) {
                let mut q = [0.0; 3];
                for (k, qk) in q.iter_mut().enumerate() {
                    *qk = p[0] * c[0][k] + p[1] * c[1][k] + p[2] * c[2][k];
                }
                points.push(q);
                weights.push(w * child_w);
            }
        };
        // Lattice points (i, j) map to barycentric (1 - (i+j)/s, i/s, j/s).
        let bary = |i: usize, j: usize| {
            let u = i as f64 / sf;
            let v = j as f64 / sf;
            [1.0 - u - v, u, v]
        };
        for i in 0..s {
            for j in 0..s - i {
                push_child([bary(i, j), bary(i + 1, j), bary(i, j + 1)]);
                if i + j + 1 < s {
                    push_child([bary(i + 1, j), bary(i + 1, j + 1), bary(i, j + 1)]);
                }
            }
        }
        Self { points, weights }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_exact(a: u32, b: u32) -> f64 {
        // Integral of l1^a l2^b over the reference triangle divided by its area.
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        2.0 * fact(a) * fact(b) / fact(a + b + 2)
    }

    fn check_degree(rule: &TriangleRule, degree: u32) {
        for a in 0..=degree {
            for b in 0..=degree - a {
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                    .sum();
                let e = monomial_exact(a, b);
                assert!((q - e).abs() < 1e-13, "a={a} b={b} q={q} e={e}");
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) as i32 {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn rules_reach_their_degree() {
        check_degree(&TriangleRule::centroid(), 1);
        check_degree(&TriangleRule::gauss3(), 2);
        check_degree(&TriangleRule::dunavant7(), 5);
        for n in 1..8 {
            check_degree(&TriangleRule::collapsed(n), 2 * n as u32 - 2);
        }
    }

    #[test]
    fn refined_rule_keeps_degree() {
        for s in 1..5 {
            let r = TriangleRule::dunavant7().refined(s);
            assert_eq!(r.len(), 7 * s * s);
            check_degree(&r, 5);
        }
    }
}
