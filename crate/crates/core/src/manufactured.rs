//! Manufactured solutions with closed-form derivatives.
//!
//! Every field here is a sum of separable products `s·X(x)Y(y)Z(z)` whose
//! one-dimensional factors are trigonometric sums or polynomials, so all
//! partial derivatives are evaluated exactly by differentiating the factors.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Matrix3;

use crate::element::FieldSample;
use crate::mesh::Point;

/// One-dimensional factor.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    /// `Σ c·sin(ω t + φ)` with terms `(c, ω, φ)`.
    Trig(Vec<(f64, f64, f64)>),
    /// Polynomial, coefficients in increasing degree.
    Poly(Vec<f64>),
}

impl Factor {
    /// `k`-th derivative at `t`.
    pub fn deriv(&self, k: usize, t: f64) -> f64 {
        match self {
            Factor::Trig(terms) => terms
                .iter()
                .map(|&(c, w, phi)| c * w.powi(k as i32) * (w * t + phi + k as f64 * FRAC_PI_2).sin())
                .sum(),
            Factor::Poly(c) => {
                let mut acc = 0.0;
                for (n, &cn) in c.iter().enumerate().skip(k).rev() {
                    let falling: f64 = (n + 1 - k..=n).map(|m| m as f64).product();
                    acc = acc * t + cn * falling;
                }
                acc
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.deriv(0, t)
    }
}

/// `scale · X(x) Y(y) Z(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableTerm {
    pub scale: f64,
    pub factors: [Factor; 3],
}

/// Vector field whose components are sums of separable terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableField {
    pub components: [Vec<SeparableTerm>; 3],
}

type Multi = [usize; 3];

/// Highest derivative order needed by any evaluator.
pub const MAX_ORDER: usize = 4;

fn unit(i: usize) -> Multi {
    let mut m = [0; 3];
    m[i] = 1;
    m
}

fn add(a: Multi, b: Multi) -> Multi {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

impl Factor {
    /// Derivatives `0..=MAX_ORDER` at `t`.
    pub fn jet(&self, t: f64) -> [f64; MAX_ORDER + 1] {
        let mut out = [0.0; MAX_ORDER + 1];
        match self {
            Factor::Trig(terms) => {
                for &(c, w, phi) in terms {
                    let (s, co) = (w * t + phi).sin_cos();
                    let cycle = [s, co, -s, -co];
                    let mut wk = c;
                    for (k, o) in out.iter_mut().enumerate() {
                        *o += wk * cycle[k % 4];
                        wk *= w;
                    }
                }
            }
            Factor::Poly(_) => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = self.deriv(k, t);
                }
            }
        }
        out
    }
}

impl SeparableField {
    /// All partial derivatives up to `MAX_ORDER` per direction at `x`.
    pub fn jet(&self, x: &Point) -> FieldJet {
        let terms = self.components.each_ref().map(|c| {
            c.iter()
                .map(|t| (t.scale, [t.factors[0].jet(x.x), t.factors[1].jet(x.y), t.factors[2].jet(x.z)]))
                .collect()
        });
        FieldJet { terms }
    }

    pub fn value(&self, x: &Point) -> Point {
        self.jet(x).value()
    }

    pub fn curl(&self, x: &Point) -> Point {
        self.jet(x).curl()
    }

    pub fn grad_curl(&self, x: &Point) -> Matrix3<f64> {
        self.jet(x).grad_curl()
    }

    pub fn divergence(&self, x: &Point) -> f64 {
        self.jet(x).divergence()
    }

    pub fn curl_curl(&self, x: &Point) -> Point {
        self.jet(x).curl_curl()
    }

    pub fn curl_laplace_curl(&self, x: &Point) -> Point {
        self.jet(x).curl_laplace_curl()
    }

    pub fn sample(&self, x: &Point) -> FieldSample {
        self.jet(x).sample()
    }
}

type TermJet = (f64, [[f64; MAX_ORDER + 1]; 3]);

/// Factor derivatives of a separable field frozen at one point.
#[derive(Debug, Clone)]
pub struct FieldJet {
    terms: [Vec<TermJet>; 3],
}

impl FieldJet {
    /// `∂^α u_i`.
    pub fn partial(&self, i: usize, alpha: Multi) -> f64 {
        self.terms[i].iter().map(|(s, d)| s * d[0][alpha[0]] * d[1][alpha[1]] * d[2][alpha[2]]).sum()
    }

    pub fn value(&self) -> Point {
        Point::from_fn(|i, _| self.partial(i, [0; 3]))
    }

    /// `∂^α (∇×u)_a`.
    fn curl_partial(&self, a: usize, alpha: Multi) -> f64 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        self.partial(c, add(alpha, unit(b))) - self.partial(b, add(alpha, unit(c)))
    }

    pub fn curl(&self) -> Point {
        Point::from_fn(|a, _| self.curl_partial(a, [0; 3]))
    }

    /// `G_ab = ∂_b (∇×u)_a`.
    pub fn grad_curl(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|a, b| self.curl_partial(a, unit(b)))
    }

    pub fn divergence(&self) -> f64 {
        (0..3).map(|i| self.partial(i, unit(i))).sum()
    }

    /// `∂^α ((∇×)²u)_i = ∂^α (∂_i ∇·u − Δu_i)`.
    fn curl_curl_partial(&self, i: usize, alpha: Multi) -> f64 {
        (0..3)
            .map(|j| {
                self.partial(j, add(alpha, add(unit(i), unit(j)))) - self.partial(i, add(alpha, add(unit(j), unit(j))))
            })
            .sum()
    }

    pub fn curl_curl(&self) -> Point {
        Point::from_fn(|i, _| self.curl_curl_partial(i, [0; 3]))
    }

    /// `∇×Δ∇×u = Δ(∇×)²u`.
    pub fn curl_laplace_curl(&self) -> Point {
        Point::from_fn(|i, _| (0..3).map(|k| self.curl_curl_partial(i, add(unit(k), unit(k)))).sum())
    }

    pub fn sample(&self) -> FieldSample {
        FieldSample { value: self.value(), curl: self.curl(), grad_curl: self.grad_curl() }
    }
}

/// What the reference field represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// Exact solution of the perturbed problem.
    ExactU,
    /// Solution of the reduced (ε = 0) problem.
    ReducedU,
}

/// Reference field and load of a test problem.
#[derive(Debug, Clone)]
pub struct ManufacturedSolution {
    pub name: &'static str,
    pub epsilon: f64,
    pub reference: SeparableField,
    pub divergence_free: bool,
    pub reference_kind: ReferenceKind,
    /// Weight of the fourth-order part of the load.
    source_eps: f64,
}

impl ManufacturedSolution {
    pub fn u(&self, x: &Point) -> Point {
        self.reference.value(x)
    }

    pub fn curl(&self, x: &Point) -> Point {
        self.reference.curl(x)
    }

    pub fn grad_curl(&self, x: &Point) -> Matrix3<f64> {
        self.reference.grad_curl(x)
    }

    pub fn sample(&self, x: &Point) -> FieldSample {
        self.reference.sample(x)
    }

    /// `f = −ε²∇×Δ∇×u + (∇×)²u`, with ε = 0 for the reduced reference.
    pub fn source(&self, x: &Point) -> Point {
        let jet = self.reference.jet(x);
        let cc = jet.curl_curl();
        if self.source_eps == 0.0 {
            cc
        } else {
            cc - self.source_eps * self.source_eps * jet.curl_laplace_curl()
        }
    }
}

fn sin_cubed() -> Factor {
    // sin³(πt) = (3 sin πt − sin 3πt)/4
    Factor::Trig(vec![(0.75, PI, 0.0), (-0.25, 3.0 * PI, 0.0)])
}

fn sin_sq_cos() -> Factor {
    // sin²(πt) cos(πt) = (cos πt − cos 3πt)/4
    Factor::Trig(vec![(0.25, PI, FRAC_PI_2), (-0.25, 3.0 * PI, FRAC_PI_2)])
}

/// Smooth solution
/// `u = (sin³πx sin²πy cosπy sin²πz cosπz, …, −2 sin²πx cosπx sin²πy cosπy sin³πz)`.
pub fn example1(epsilon: f64) -> ManufacturedSolution {
    let (a, b) = (sin_cubed(), sin_sq_cos());
    let term = |scale: f64, f: [&Factor; 3]| SeparableTerm { scale, factors: f.map(Clone::clone) };
    let reference = SeparableField {
        components: [
            vec![term(1.0, [&a, &b, &b])],
            vec![term(1.0, [&b, &a, &b])],
            vec![term(-2.0, [&b, &b, &a])],
        ],
    };
    ManufacturedSolution {
        name: "example1",
        epsilon,
        reference,
        divergence_free: true,
        reference_kind: ReferenceKind::ExactU,
        source_eps: epsilon,
    }
}

/// Default ε of the boundary-layer example.
pub const EXAMPLE2_EPSILON: f64 = 1e-6;

/// Boundary-layer problem: load `f = (∇×)²ū` with the polynomial reduced
/// solution `ū = (0, −X(x)P(y)P'(z)/8, X(x)P'(y)P(z)/8)`,
/// `X = P = t²(t−1)³`. Errors are measured against `ū`.
pub fn example2() -> ManufacturedSolution {
    // t²(t−1)³ = −t² + 3t³ − 3t⁴ + t⁵
    let p = vec![0.0, 0.0, -1.0, 3.0, -3.0, 1.0];
    let dp = vec![0.0, -2.0, 9.0, -12.0, 5.0];
    let (p, dp) = (Factor::Poly(p), Factor::Poly(dp));
    let reference = SeparableField {
        components: [
            vec![],
            vec![SeparableTerm { scale: -0.125, factors: [p.clone(), p.clone(), dp.clone()] }],
            vec![SeparableTerm { scale: 0.125, factors: [p.clone(), dp, p] }],
        ],
    };
    ManufacturedSolution {
        name: "example2",
        epsilon: EXAMPLE2_EPSILON,
        reference,
        divergence_free: true,
        reference_kind: ReferenceKind::ReducedU,
        source_eps: 0.0,
    }
}

/// Central finite-difference oracles used to validate the closed forms.
pub mod oracle {
    use super::*;

    /// Fourth-order central difference of `g` along axis `k`.
    pub fn d1<G: Fn(&Point) -> f64>(g: &G, k: usize, x: &Point, h: f64) -> f64 {
        let e = Point::from_fn(|i, _| if i == k { h } else { 0.0 });
        (-g(&(x + 2.0 * e)) + 8.0 * g(&(x + e)) - 8.0 * g(&(x - e)) + g(&(x - 2.0 * e))) / (12.0 * h)
    }

    /// Fourth-order central second difference along axis `k`.
    pub fn d2<G: Fn(&Point) -> f64>(g: &G, k: usize, x: &Point, h: f64) -> f64 {
        let e = Point::from_fn(|i, _| if i == k { h } else { 0.0 });
        (-g(&(x + 2.0 * e)) + 16.0 * g(&(x + e)) - 30.0 * g(x) + 16.0 * g(&(x - e)) - g(&(x - 2.0 * e)))
            / (12.0 * h * h)
    }

    /// `Δ g` by fourth-order differences.
    pub fn laplacian<G: Fn(&Point) -> f64>(g: &G, x: &Point, h: f64) -> f64 {
        (0..3).map(|k| d2(g, k, x, h)).sum()
    }

    /// Curl of `u` by differences.
    pub fn curl<U: Fn(&Point) -> Point>(u: &U, x: &Point, h: f64) -> Point {
        Point::from_fn(|a, _| {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            d1(&|y: &Point| u(y)[c], b, x, h) - d1(&|y: &Point| u(y)[b], c, x, h)
        })
    }

    /// `−ε²∇×Δ∇×u + (∇×)²u`, differencing the closed-form curl once more
    /// for the curl-curl part and twice more for the fourth-order part.
    pub fn source(sol: &ManufacturedSolution, eps: f64, x: &Point, h: f64) -> Point {
        let w = |y: &Point| sol.curl(y);
        let cc = curl(&w, x, h);
        let lap_w = |y: &Point| Point::from_fn(|i, _| laplacian(&|z: &Point| w(z)[i], y, h));
        let clc = curl(&lap_w, x, h);
        cc - eps * eps * clc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_factor_derivatives() {
        let p = Factor::Poly(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.deriv(0, 2.0), 1.0 + 4.0 + 12.0 + 32.0);
        assert_eq!(p.deriv(1, 2.0), 2.0 + 12.0 + 48.0);
        assert_eq!(p.deriv(2, 2.0), 6.0 + 48.0);
        assert_eq!(p.deriv(3, 2.0), 24.0);
        assert_eq!(p.deriv(4, 2.0), 0.0);
    }

    #[test]
    fn trig_factors_match_products() {
        for t in [0.1, 0.37, 0.8] {
            let s = (PI * t).sin();
            let c = (PI * t).cos();
            assert!((sin_cubed().value(t) - s.powi(3)).abs() < 1e-14);
            assert!((sin_sq_cos().value(t) - s * s * c).abs() < 1e-14);
            // d/dt sin³ = 3π sin² cos
            assert!((sin_cubed().deriv(1, t) - 3.0 * PI * s * s * c).abs() < 1e-12);
        }
    }

    #[test]
    fn center_value_vanishes() {
        let u = example1(1.0).u(&Point::new(0.5, 0.5, 0.5));
        assert!(u.norm() < 1e-15);
    }

    #[test]
    fn example2_matches_direct_formula() {
        let sol = example2();
        let p = |t: f64| t * t * (t - 1.0).powi(3);
        let dp = |t: f64| 2.0 * t * (t - 1.0).powi(3) + 3.0 * t * t * (t - 1.0).powi(2);
        let x = Point::new(0.3, 0.6, 0.45);
        let u = sol.u(&x);
        assert_eq!(u.x, 0.0);
        assert!((u.y + p(x.x) * p(x.y) * dp(x.z) / 8.0).abs() < 1e-16);
        assert!((u.z - p(x.x) * dp(x.y) * p(x.z) / 8.0).abs() < 1e-16);
    }
}
