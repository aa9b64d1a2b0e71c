//! Forward-mode automatic differentiation on dual numbers.
//!
//! Model functions (costs, dynamics, constraints) are written once, generic
//! over [`Real`], and evaluated with three scalar types: plain `f64` for
//! values, [`Dual`] for gradients, and [`Dual2`] for gradients plus Hessians.
//! The second-order type exists because a Newton step on a stationarity
//! system needs curvature of the underlying Lagrangian terms; no general
//! higher-order API is exposed.
//!
//! Nonsmooth primitives (`abs`, hard `min`/`max`) are deliberately absent
//! from [`Real`]; smooth surrogates such as log-sum-exp must be used instead
//! so that Newton Jacobians stay well defined.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdError {
    /// A primitive was evaluated outside its domain (log/sqrt of a negative
    /// number, division by zero) and produced a non-finite value.
    #[error("domain error: {0} produced a non-finite value")]
    Domain(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Scalar field for generic model functions.
///
/// Implemented by `f64`, [`Dual`] and [`Dual2`]. Constants enter via
/// [`Real::from_f64`] or mixed arithmetic with `f64` on the right-hand side.
pub trait Real:
    Clone
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn from_f64(c: f64) -> Self;
    /// The primal value carried by this scalar.
    fn value(&self) -> f64;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
}

impl Real for f64 {
    fn from_f64(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
}

/// First-order dual number with a batched seed vector.
///
/// `partials` holds one entry per seed direction. An empty vector denotes a
/// constant (zero in every direction) so that constants never need to know
/// the seed width.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub partials: Vec<f64>,
}

impl Dual {
    pub fn constant(value: f64) -> Self {
        Dual {
            value,
            partials: Vec::new(),
        }
    }

    /// Variable seeded with the unit direction `e_seat` of `width` total.
    pub fn seeded(value: f64, seat: usize, width: usize) -> Self {
        let mut partials = vec![0.0; width];
        partials[seat] = 1.0;
        Dual { value, partials }
    }

    fn chain(&self, value: f64, dvalue: f64) -> Self {
        Dual {
            value,
            partials: self.partials.iter().map(|p| p * dvalue).collect(),
        }
    }
}

// Combines a*x + b*y where empty slices broadcast as zeros.
fn axpby(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    match (x.is_empty(), y.is_empty()) {
        (true, true) => Vec::new(),
        (false, true) => x.iter().map(|v| a * v).collect(),
        (true, false) => y.iter().map(|v| b * v).collect(),
        (false, false) => {
            debug_assert_eq!(x.len(), y.len(), "dual seed widths diverged");
            x.iter().zip(y).map(|(xv, yv)| a * xv + b * yv).collect()
        }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual {
            value: self.value + rhs.value,
            partials: axpby(1.0, &self.partials, 1.0, &rhs.partials),
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual {
            value: self.value - rhs.value,
            partials: axpby(1.0, &self.partials, -1.0, &rhs.partials),
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual {
            value: self.value * rhs.value,
            partials: axpby(rhs.value, &self.partials, self.value, &rhs.partials),
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, rhs: Dual) -> Dual {
        let inv = 1.0 / rhs.value;
        Dual {
            value: self.value * inv,
            partials: axpby(inv, &self.partials, -self.value * inv * inv, &rhs.partials),
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            value: -self.value,
            partials: self.partials.iter().map(|p| -p).collect(),
        }
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    fn add(mut self, rhs: f64) -> Dual {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for Dual {
    type Output = Dual;
    fn sub(mut self, rhs: f64) -> Dual {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, rhs: f64) -> Dual {
        Dual {
            value: self.value * rhs,
            partials: self.partials.iter().map(|p| p * rhs).collect(),
        }
    }
}

impl Div<f64> for Dual {
    type Output = Dual;
    fn div(self, rhs: f64) -> Dual {
        self * (1.0 / rhs)
    }
}

impl Real for Dual {
    fn from_f64(c: f64) -> Self {
        Dual::constant(c)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn sin(&self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }
    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }
    fn ln(&self) -> Self {
        self.chain(self.value.ln(), 1.0 / self.value)
    }
    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn powi(&self, n: i32) -> Self {
        self.chain(
            self.value.powi(n),
            f64::from(n) * self.value.powi(n - 1),
        )
    }
}

/// Second-order forward scalar: value, gradient and dense Hessian w.r.t. the
/// seed directions. The Hessian is stored row-major at the seed width and is
/// kept symmetric by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual2 {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Dual2 {
    pub fn constant(value: f64) -> Self {
        Dual2 {
            value,
            grad: Vec::new(),
            hess: Vec::new(),
        }
    }

    pub fn seeded(value: f64, seat: usize, width: usize) -> Self {
        let mut grad = vec![0.0; width];
        grad[seat] = 1.0;
        Dual2 {
            value,
            grad,
            hess: vec![0.0; width * width],
        }
    }

    /// Unary chain rule with first and second derivative of the outer map.
    fn chain(&self, value: f64, d1: f64, d2: f64) -> Self {
        let n = self.grad.len();
        let mut hess = axpby(d1, &self.hess, 0.0, &[]);
        if n > 0 {
            if hess.is_empty() {
                hess = vec![0.0; n * n];
            }
            for i in 0..n {
                for j in 0..n {
                    hess[i * n + j] += d2 * self.grad[i] * self.grad[j];
                }
            }
        }
        Dual2 {
            value,
            grad: self.grad.iter().map(|g| g * d1).collect(),
            hess,
        }
    }
}

impl Add for Dual2 {
    type Output = Dual2;
    fn add(self, rhs: Dual2) -> Dual2 {
        Dual2 {
            value: self.value + rhs.value,
            grad: axpby(1.0, &self.grad, 1.0, &rhs.grad),
            hess: axpby(1.0, &self.hess, 1.0, &rhs.hess),
        }
    }
}

impl Sub for Dual2 {
    type Output = Dual2;
    fn sub(self, rhs: Dual2) -> Dual2 {
        Dual2 {
            value: self.value - rhs.value,
            grad: axpby(1.0, &self.grad, -1.0, &rhs.grad),
            hess: axpby(1.0, &self.hess, -1.0, &rhs.hess),
        }
    }
}

impl Mul for Dual2 {
    type Output = Dual2;
    fn mul(self, rhs: Dual2) -> Dual2 {
        let mut hess = axpby(rhs.value, &self.hess, self.value, &rhs.hess);
        let n = self.grad.len().max(rhs.grad.len());
        if !self.grad.is_empty() && !rhs.grad.is_empty() {
            if hess.is_empty() {
                hess = vec![0.0; n * n];
            }
            for i in 0..n {
                for j in 0..n {
                    hess[i * n + j] +=
                        self.grad[i] * rhs.grad[j] + rhs.grad[i] * self.grad[j];
                }
            }
        }
        Dual2 {
            value: self.value * rhs.value,
            grad: axpby(rhs.value, &self.grad, self.value, &rhs.grad),
            hess,
        }
    }
}

impl Div for Dual2 {
    type Output = Dual2;
    fn div(self, rhs: Dual2) -> Dual2 {
        let x = rhs.value;
        let recip = rhs.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x));
        self * recip
    }
}

impl Neg for Dual2 {
    type Output = Dual2;
    fn neg(self) -> Dual2 {
        Dual2 {
            value: -self.value,
            grad: self.grad.iter().map(|g| -g).collect(),
            hess: self.hess.iter().map(|h| -h).collect(),
        }
    }
}

impl Add<f64> for Dual2 {
    type Output = Dual2;
    fn add(mut self, rhs: f64) -> Dual2 {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for Dual2 {
    type Output = Dual2;
    fn sub(mut self, rhs: f64) -> Dual2 {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for Dual2 {
    type Output = Dual2;
    fn mul(self, rhs: f64) -> Dual2 {
        Dual2 {
            value: self.value * rhs,
            grad: self.grad.iter().map(|g| g * rhs).collect(),
            hess: self.hess.iter().map(|h| h * rhs).collect(),
        }
    }
}

impl Div<f64> for Dual2 {
    type Output = Dual2;
    fn div(self, rhs: f64) -> Dual2 {
        self * (1.0 / rhs)
    }
}

impl Real for Dual2 {
    fn from_f64(c: f64) -> Self {
        Dual2::constant(c)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }
    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }
    fn ln(&self) -> Self {
        let x = self.value;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }
    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * s * s))
    }
    fn powi(&self, n: i32) -> Self {
        let x = self.value;
        self.chain(
            x.powi(n),
            f64::from(n) * x.powi(n - 1),
            f64::from(n) * f64::from(n - 1) * x.powi(n - 2),
        )
    }
}

/// A scalar-valued model function written generically over [`Real`].
pub trait ScalarMap: Send + Sync {
    /// Number of inputs.
    fn arity(&self) -> usize;
    fn eval<S: Real>(&self, x: &[S]) -> S;
    /// Affine maps have zero curvature; the assembler skips their Hessians.
    fn is_affine(&self) -> bool {
        false
    }
    /// Superset of the structurally nonzero Hessian entries; `None` means
    /// treat the Hessian as dense.
    fn hess_sparsity(&self) -> Option<Vec<(usize, usize)>> {
        None
    }
}

/// A vector-valued model function written generically over [`Real`].
pub trait VectorMap: Send + Sync {
    fn arity(&self) -> usize;
    /// Number of outputs.
    fn codim(&self) -> usize;
    fn eval<S: Real>(&self, x: &[S], out: &mut [S]);
    fn is_affine(&self) -> bool {
        false
    }
    /// Superset of the structurally nonzero entries of any output-weighted
    /// Hessian; `None` means treat it as dense.
    fn hess_sparsity(&self) -> Option<Vec<(usize, usize)>> {
        None
    }
}

/// Object-safe view of a [`ScalarMap`] with derivative entry points.
pub trait DiffScalarFn: Send + Sync {
    fn arity(&self) -> usize;
    fn is_affine(&self) -> bool;
    fn hess_sparsity(&self) -> Option<Vec<(usize, usize)>>;
    fn value(&self, x: &[f64]) -> f64;
    /// Writes the gradient into `grad` (length `arity`) and returns the value.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
    /// Writes gradient and row-major `arity × arity` Hessian; returns the value.
    fn value_grad_hess(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64;
}

/// Object-safe view of a [`VectorMap`] with derivative entry points.
pub trait DiffVectorFn: Send + Sync {
    fn arity(&self) -> usize;
    fn codim(&self) -> usize;
    fn is_affine(&self) -> bool;
    fn hess_sparsity(&self) -> Option<Vec<(usize, usize)>>;
    fn values(&self, x: &[f64], out: &mut [f64]);
    /// Writes outputs and the row-major `codim × arity` Jacobian.
    fn values_jac(&self, x: &[f64], out: &mut [f64], jac: &mut [f64]);
    /// Gradient and Hessian of the contraction `w · F(x)`, used for the
    /// curvature of multiplier-weighted constraint terms.
    fn weighted_hess(&self, x: &[f64], w: &[f64], grad: &mut [f64], hess: &mut [f64]);
}

fn seed_duals(x: &[f64]) -> Vec<Dual> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| Dual::seeded(v, i, x.len()))
        .collect()
}

fn seed_dual2(x: &[f64]) -> Vec<Dual2> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| Dual2::seeded(v, i, x.len()))
        .collect()
}

fn spread(src: &[f64], dst: &mut [f64]) {
    if src.is_empty() {
        dst.fill(0.0);
    } else {
        dst.copy_from_slice(src);
    }
}

impl<M: ScalarMap> DiffScalarFn for M {
    fn arity(&self) -> usize {
        ScalarMap::arity(self)
    }
    fn is_affine(&self) -> bool {
        ScalarMap::is_affine(self)
    }
    fn hess_sparsity(&self) -> Option<Vec<(usize, usize)>> {
        ScalarMap::hess_sparsity(self)
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let out = self.eval(&seed_duals(x));
        spread(&out.partials, grad);
        out.value
    }
    fn value_grad_hess(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        if ScalarMap::is_affine(self) {
            hess.fill(0.0);
            return self.value_grad(x, grad);
        }
        let out = self.eval(&seed_dual2(x));
        spread(&out.grad, grad);
        spread(&out.hess, hess);
        out.value
    }
}

impl<M: VectorMap> DiffVectorFn for M {
    fn arity(&self) -> usize {
        VectorMap::arity(self)
    }
    fn codim(&self) -> usize {
        VectorMap::codim(self)
    }
    fn is_affine(&self) -> bool {
        VectorMap::is_affine(self)
    }
    fn hess_sparsity(&self) -> Option<Vec<(usize, usize)>> {
        VectorMap::hess_sparsity(self)
    }
    fn values(&self, x: &[f64], out: &mut [f64]) {
        self.eval(x, out);
    }
    fn values_jac(&self, x: &[f64], out: &mut [f64], jac: &mut [f64]) {
        let n = x.len();
        let seeds = seed_duals(x);
        let mut buf = vec![Dual::constant(0.0); VectorMap::codim(self)];
        self.eval(&seeds, &mut buf);
        for (row, d) in buf.iter().enumerate() {
            out[row] = d.value;
            spread(&d.partials, &mut jac[row * n..(row + 1) * n]);
        }
    }
    fn weighted_hess(&self, x: &[f64], w: &[f64], grad: &mut [f64], hess: &mut [f64]) {
        if VectorMap::is_affine(self) {
            hess.fill(0.0);
            let mut out = vec![0.0; VectorMap::codim(self)];
            let mut jac = vec![0.0; VectorMap::codim(self) * x.len()];
            self.values_jac(x, &mut out, &mut jac);
            for (g, col) in grad.iter_mut().enumerate() {
                *col = (0..w.len()).map(|r| w[r] * jac[r * x.len() + g]).sum();
            }
            return;
        }
        let seeds = seed_dual2(x);
        let mut buf = vec![Dual2::constant(0.0); VectorMap::codim(self)];
        self.eval(&seeds, &mut buf);
        let mut acc = Dual2::constant(0.0);
        for (row, d) in buf.iter().enumerate() {
            acc = acc + d.clone() * w[row];
        }
        spread(&acc.grad, grad);
        spread(&acc.hess, hess);
    }
}

fn finite_or(err: &'static str, values: &[f64]) -> Result<(), AdError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(AdError::Domain(err))
    }
}

/// Gradient of a scalar function at `x` in a single batched forward pass.
pub fn gradient(f: &dyn DiffScalarFn, x: &[f64]) -> Result<Vec<f64>, AdError> {
    if x.len() != f.arity() {
        return Err(AdError::DimensionMismatch {
            expected: f.arity(),
            got: x.len(),
        });
    }
    let mut grad = vec![0.0; x.len()];
    let value = f.value_grad(x, &mut grad);
    finite_or("gradient", &[value])?;
    finite_or("gradient", &grad)?;
    Ok(grad)
}

/// Dense row-major Jacobian of a vector function at `x`.
pub fn jacobian(f: &dyn DiffVectorFn, x: &[f64]) -> Result<Vec<Vec<f64>>, AdError> {
    if x.len() != f.arity() {
        return Err(AdError::DimensionMismatch {
            expected: f.arity(),
            got: x.len(),
        });
    }
    let m = f.codim();
    let mut out = vec![0.0; m];
    let mut jac = vec![0.0; m * x.len()];
    f.values_jac(x, &mut out, &mut jac);
    finite_or("jacobian", &out)?;
    finite_or("jacobian", &jac)?;
    Ok(jac.chunks(x.len()).map(|r| r.to_vec()).collect())
}

/// Conservative sparsity probe: column `j` of the Jacobian is flagged nonzero
/// if perturbing the seed of input `j` moves any output partial. The result
/// is a superset of the true pattern for the functions used here.
pub fn jacobian_pattern(f: &dyn DiffVectorFn, x: &[f64]) -> Vec<Vec<bool>> {
    let m = f.codim();
    let n = f.arity();
    let mut out = vec![0.0; m];
    let mut jac = vec![0.0; m * n];
    f.values_jac(x, &mut out, &mut jac);
    (0..m)
        .map(|r| (0..n).map(|c| jac[r * n + c] != 0.0).collect())
        .collect()
}

/// Central finite difference of a scalar function, used as an independent
/// oracle in tests and verification tooling.
pub fn central_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        probe[j] = x[j] + step;
        let hi = f(&probe);
        probe[j] = x[j] - step;
        let lo = f(&probe);
        probe[j] = x[j];
        grad[j] = (hi - lo) / (2.0 * step);
    }
    grad
}
