//! Truncated multivariate Taylor expansions ("jets") up to third order.
//!
//! A jet carries the value of a scalar field at a point together with all of
//! its partial derivatives up to `order`. Second and third partials are stored
//! once per sorted index tuple and mirrored on read, so the symmetric arrays
//! are symmetric by construction.
//!
//! Arithmetic follows the multivariate Leibniz and Faà di Bruno rules, which
//! makes every derivative of a composed expression exact up to round-off.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Highest supported derivative order.
pub const MAX_ORDER: u8 = 3;

#[inline]
fn pair_index(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    b * (b + 1) / 2 + a
}

#[inline]
fn triple_index(i: usize, j: usize, k: usize) -> usize {
    let mut s = [i, j, k];
    s.sort_unstable();
    s[2] * (s[2] + 1) * (s[2] + 2) / 6 + s[1] * (s[1] + 1) / 2 + s[0]
}

fn pair_count(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

fn triple_count(dim: usize) -> usize {
    dim * (dim + 1) * (dim + 2) / 6
}

fn storage_len(dim: usize, order: u8) -> usize {
    let mut len = 1;
    if order >= 1 {
        len += dim;
    }
    if order >= 2 {
        len += pair_count(dim);
    }
    if order >= 3 {
        len += triple_count(dim);
    }
    len
}

#[derive(Clone, PartialEq)]
pub struct Jet {
    dim: usize,
    order: u8,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("value", &self.value())
            .field("d1", &self.gradient())
            .finish()
    }
}

impl Jet {
    pub fn constant(dim: usize, order: u8, value: f64) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut coeffs = vec![0.0; storage_len(dim, order)];
        coeffs[0] = value;
        Jet { dim, order, coeffs }
    }

    /// The coordinate function `x_index` expanded at `value`.
    pub fn variable(dim: usize, order: u8, index: usize, value: f64) -> Self {
        assert!(index < dim, "variable index {index} out of range for dimension {dim}");
        let mut jet = Jet::constant(dim, order, value);
        if order >= 1 {
            jet.coeffs[1 + index] = 1.0;
        }
        jet
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    fn off2(&self) -> usize {
        1 + self.dim
    }

    fn off3(&self) -> usize {
        1 + self.dim + pair_count(self.dim)
    }

    /// First partial derivative; zero beyond the stored order.
    pub fn d1(&self, i: usize) -> f64 {
        if self.order < 1 {
            return 0.0;
        }
        self.coeffs[1 + i]
    }

    pub fn d2(&self, i: usize, j: usize) -> f64 {
        if self.order < 2 {
            return 0.0;
        }
        self.coeffs[self.off2() + pair_index(i, j)]
    }

    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        if self.order < 3 {
            return 0.0;
        }
        self.coeffs[self.off3() + triple_index(i, j, k)]
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.d1(i)).collect()
    }

    /// Drops every derivative above `order`.
    pub fn truncate(&self, order: u8) -> Jet {
        if order >= self.order {
            return self.clone();
        }
        Jet {
            dim: self.dim,
            order,
            coeffs: self.coeffs[..storage_len(self.dim, order)].to_vec(),
        }
    }

    /// The jet of `∂f/∂x_i`, one order lower.
    pub fn partial(&self, i: usize) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let d = self.dim;
        let order = self.order - 1;
        let mut out = Jet::constant(d, order, self.d1(i));
        if order >= 1 {
            for j in 0..d {
                out.coeffs[1 + j] = self.d2(i, j);
            }
        }
        if order >= 2 {
            let off = out.off2();
            for k in 0..d {
                for j in 0..=k {
                    out.coeffs[off + pair_index(j, k)] = self.d3(i, j, k);
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            dim: self.dim,
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    fn zip_linear(&self, other: &Jet, a: f64, b: f64) -> Jet {
        assert_eq!(self.dim, other.dim, "jet dimension mismatch");
        let order = self.order.min(other.order);
        let len = storage_len(self.dim, order);
        let coeffs = self.coeffs[..len]
            .iter()
            .zip(&other.coeffs[..len])
            .map(|(x, y)| a * x + b * y)
            .collect();
        Jet {
            dim: self.dim,
            order,
            coeffs,
        }
    }

    fn product(&self, other: &Jet) -> Jet {
        assert_eq!(self.dim, other.dim, "jet dimension mismatch");
        let d = self.dim;
        let order = self.order.min(other.order);
        let (f, g) = (self, other);
        let (f0, g0) = (f.value(), g.value());
        let mut out = Jet::constant(d, order, f0 * g0);
        if order >= 1 {
            for i in 0..d {
                out.coeffs[1 + i] = f.d1(i) * g0 + f0 * g.d1(i);
            }
        }
        if order >= 2 {
            let off = out.off2();
            for j in 0..d {
                for i in 0..=j {
                    out.coeffs[off + pair_index(i, j)] =
                        f.d2(i, j) * g0 + f0 * g.d2(i, j) + f.d1(i) * g.d1(j) + f.d1(j) * g.d1(i);
                }
            }
        }
        if order >= 3 {
            let off = out.off3();
            for k in 0..d {
                for j in 0..=k {
                    for i in 0..=j {
                        out.coeffs[off + triple_index(i, j, k)] = f.d3(i, j, k) * g0
                            + f0 * g.d3(i, j, k)
                            + f.d2(i, j) * g.d1(k)
                            + f.d2(i, k) * g.d1(j)
                            + f.d2(j, k) * g.d1(i)
                            + f.d1(i) * g.d2(j, k)
                            + f.d1(j) * g.d2(i, k)
                            + f.d1(k) * g.d2(i, j);
                    }
                }
            }
        }
        out
    }

    /// Composes a univariate function with this jet, given the function's
    /// value and first three derivatives at `self.value()`.
    pub fn compose(&self, phi: [f64; 4]) -> Jet {
        let d = self.dim;
        let f = self;
        let mut out = Jet::constant(d, self.order, phi[0]);
        if self.order >= 1 {
            for i in 0..d {
                out.coeffs[1 + i] = phi[1] * f.d1(i);
            }
        }
        if self.order >= 2 {
            let off = out.off2();
            for j in 0..d {
                for i in 0..=j {
                    out.coeffs[off + pair_index(i, j)] = phi[2] * f.d1(i) * f.d1(j) + phi[1] * f.d2(i, j);
                }
            }
        }
        if self.order >= 3 {
            let off = out.off3();
            for k in 0..d {
                for j in 0..=k {
                    for i in 0..=j {
                        out.coeffs[off + triple_index(i, j, k)] = phi[3] * f.d1(i) * f.d1(j) * f.d1(k)
                            + phi[2] * (f.d2(i, j) * f.d1(k) + f.d2(i, k) * f.d1(j) + f.d2(j, k) * f.d1(i))
                            + phi[1] * f.d3(i, j, k);
                    }
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let x = self.value();
        let r = 1.0 / x;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn powi(&self, k: i32) -> Jet {
        let x = self.value();
        let kf = k as f64;
        // A zero coefficient must not multiply x^(negative) at x = 0.
        let term = |c: f64, e: i32| if c == 0.0 { 0.0 } else { c * x.powi(e) };
        self.compose([
            x.powi(k),
            term(kf, k - 1),
            term(kf * (kf - 1.0), k - 2),
            term(kf * (kf - 1.0) * (kf - 2.0), k - 3),
        ])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose([e, e, e, e])
    }

    pub fn ln(&self) -> Jet {
        let x = self.value();
        let r = 1.0 / x;
        self.compose([x.ln(), r, -r * r, 2.0 * r * r * r])
    }

    pub fn sqrt(&self) -> Jet {
        let x = self.value();
        let s = x.sqrt();
        self.compose([s, 0.5 / s, -0.25 / (s * x), 0.375 / (s * x * x)])
    }

    pub fn atan(&self) -> Jet {
        let x = self.value();
        let w = 1.0 / (1.0 + x * x);
        self.compose([x.atan(), w, -2.0 * x * w * w, (6.0 * x * x - 2.0) * w * w * w])
    }
}

impl Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip_linear(rhs, 1.0, 1.0)
    }
}

impl Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip_linear(rhs, 1.0, -1.0)
    }
}

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.product(rhs)
    }
}

impl Div<&Jet> for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.product(&rhs.recip())
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
