//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] stores the Taylor coefficients of a scalar field around a point,
//! for every monomial of total degree at most `order` in `arity` variables.
//! Monomials are keyed by their sorted variable-index multiset, so a mixed
//! partial such as `∂₀∂₁` and `∂₁∂₀` resolve to the same stored cell.
//!
//! Coefficients are kept in Taylor form (`∂^α f / α!`); [`Jet::partial`]
//! converts back to plain partial derivatives.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

/// Highest supported truncation order.
pub const MAX_ORDER: usize = 5;

/// Default central-difference step for [`central_difference_gradient`].
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("unsupported jet order {0}; supported orders are 1..={MAX_ORDER}")]
    UnsupportedOrder(usize),
    #[error("a jet needs at least one seeded variable")]
    NoVariables,
    #[error("{op} is undefined at {value}")]
    Domain { op: &'static str, value: f64 },
}

/// Monomial bookkeeping shared by every jet with the same `(arity, order)`.
struct Layout {
    arity: usize,
    order: usize,
    /// Sorted variable-index multisets, graded by degree.
    monomials: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
    /// `(a, b, c)` with `a <= b` and `monomial[a] * monomial[b] == monomial[c]`.
    products: Vec<(u32, u32, u32)>,
    /// `α!` for each monomial.
    weights: Vec<f64>,
}

impl Layout {
    fn build(arity: usize, order: usize) -> Self {
        let mut monomials: Vec<Vec<usize>> = vec![Vec::new()];
        let mut previous_start = 0;
        for _ in 0..order {
            let previous_end = monomials.len();
            for m in previous_start..previous_end {
                let first = monomials[m].last().copied().unwrap_or(0);
                for v in first..arity {
                    let mut next = monomials[m].clone();
                    next.push(v);
                    monomials.push(next);
                }
            }
            previous_start = previous_end;
        }

        let index: HashMap<Vec<usize>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();

        let mut products = Vec::new();
        for (a, ma) in monomials.iter().enumerate() {
            for (b, mb) in monomials.iter().enumerate().skip(a) {
                if ma.len() + mb.len() > order {
                    continue;
                }
                let mut merged: Vec<usize> = ma.iter().chain(mb.iter()).copied().collect();
                merged.sort_unstable();
                products.push((a as u32, b as u32, index[&merged] as u32));
            }
        }

        let weights = monomials.iter().map(|m| multi_factorial(m)).collect();

        Layout {
            arity,
            order,
            monomials,
            index,
            products,
            weights,
        }
    }

    fn len(&self) -> usize {
        self.monomials.len()
    }
}

fn multi_factorial(sorted: &[usize]) -> f64 {
    let mut weight = 1.0;
    let mut run = 0usize;
    for (i, v) in sorted.iter().enumerate() {
        if i > 0 && sorted[i - 1] == *v {
            run += 1;
        } else {
            run = 1;
        }
        weight *= run as f64;
    }
    weight
}

/// Layouts keyed by `(arity, order)`.
type LayoutCache = Mutex<HashMap<(usize, usize), Arc<Layout>>>;

fn layout(arity: usize, order: usize) -> Arc<Layout> {
    static CACHE: OnceLock<LayoutCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("jet layout cache poisoned");
    guard
        .entry((arity, order))
        .or_insert_with(|| Arc::new(Layout::build(arity, order)))
        .clone()
}

/// A truncated Taylor expansion: value plus all partials up to `order`.
#[derive(Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("arity", &self.layout.arity)
            .field("order", &self.layout.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.layout.arity == other.layout.arity
            && self.layout.order == other.layout.order
            && self.coeffs == other.coeffs
    }
}

/// Seeds one jet per coordinate of `point`: jet `i` has value `point[i]` and
/// unit first derivative along variable `i`.
pub fn seed(point: &[f64], order: usize) -> Result<Vec<Jet>, JetError> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(JetError::UnsupportedOrder(order));
    }
    if point.is_empty() {
        return Err(JetError::NoVariables);
    }
    Ok(point
        .iter()
        .enumerate()
        .map(|(i, &v)| Jet::variable(v, i, point.len(), order))
        .collect())
}

impl Jet {
    /// A jet with no dependence on any variable. Order 0 is allowed here.
    pub fn constant(value: f64, arity: usize, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let layout = layout(arity, order);
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Jet { layout, coeffs }
    }

    pub fn variable(value: f64, index: usize, arity: usize, order: usize) -> Self {
        assert!(index < arity, "variable {index} out of range for arity {arity}");
        let mut jet = Jet::constant(value, arity, order);
        if order >= 1 {
            jet.coeffs[1 + index] = 1.0;
        }
        jet
    }

    /// A constant sharing this jet's `(arity, order)`.
    pub fn lift(&self, value: f64) -> Self {
        Jet::constant(value, self.layout.arity, self.layout.order)
    }

    pub fn zero_like(&self) -> Self {
        self.lift(0.0)
    }

    pub fn arity(&self) -> usize {
        self.layout.arity
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Mixed partial derivative for the given multi-index, in any index order.
    /// Returns zero above the truncation order.
    pub fn partial(&self, indices: &[usize]) -> f64 {
        let mut key = indices.to_vec();
        key.sort_unstable();
        assert!(
            key.iter().all(|&i| i < self.layout.arity),
            "partial index out of range"
        );
        match self.layout.index.get(&key) {
            Some(&slot) => self.coeffs[slot] * self.layout.weights[slot],
            None => 0.0,
        }
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.layout.arity).map(|i| self.partial(&[i])).collect()
    }

    /// Raw Taylor coefficients, graded by monomial degree.
    pub fn taylor_coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// `∂f/∂x_var` as a jet of one lower order.
    pub fn derivative(&self, var: usize) -> Jet {
        assert!(self.layout.order >= 1, "cannot differentiate an order-0 jet");
        assert!(var < self.layout.arity);
        let target = layout(self.layout.arity, self.layout.order - 1);
        let mut coeffs = vec![0.0; target.len()];
        for (slot, mono) in target.monomials.iter().enumerate() {
            let mut raised = mono.clone();
            let pos = raised.partition_point(|&v| v <= var);
            raised.insert(pos, var);
            let multiplicity = raised.iter().filter(|&&v| v == var).count() as f64;
            coeffs[slot] = self.coeffs[self.layout.index[&raised]] * multiplicity;
        }
        Jet {
            layout: target,
            coeffs,
        }
    }

    /// Drops every term above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        assert!(order <= self.layout.order);
        let target = layout(self.layout.arity, order);
        let coeffs = self.coeffs[..target.len()].to_vec();
        Jet {
            layout: target,
            coeffs,
        }
    }

    /// Re-expresses the jet over `arity` variables, sending variable `i` to
    /// `mapping[i]`. Used to lift base-manifold jets onto the tangent bundle.
    pub fn embed(&self, arity: usize, mapping: &[usize]) -> Jet {
        assert_eq!(mapping.len(), self.layout.arity);
        let target = layout(arity, self.layout.order);
        let mut coeffs = vec![0.0; target.len()];
        for (slot, mono) in self.layout.monomials.iter().enumerate() {
            let mut moved: Vec<usize> = mono.iter().map(|&v| mapping[v]).collect();
            moved.sort_unstable();
            coeffs[target.index[&moved]] += self.coeffs[slot];
        }
        Jet {
            layout: target,
            coeffs,
        }
    }

    /// Composes this jet (a field expanded around `args[k].value()`) with the
    /// jets `args`, giving the expansion of `f(args(t))` in the variables of
    /// `args`. The orders must agree.
    pub fn compose(&self, args: &[Jet]) -> Jet {
        assert_eq!(args.len(), self.layout.arity, "compose arity mismatch");
        let out_arity = args[0].arity();
        let order = self.layout.order;
        assert!(args
            .iter()
            .all(|a| a.arity() == out_arity && a.order() == order));
        let deltas: Vec<Jet> = args
            .iter()
            .map(|a| {
                let mut d = a.clone();
                d.coeffs[0] = 0.0;
                d
            })
            .collect();
        // Monomials are graded, so each one's prefix has already been formed.
        let mut powers: Vec<Jet> = Vec::with_capacity(self.layout.len());
        let mut result = Jet::constant(self.coeffs[0], out_arity, order);
        powers.push(Jet::constant(1.0, out_arity, order));
        for (slot, mono) in self.layout.monomials.iter().enumerate().skip(1) {
            let prefix = self.layout.index[&mono[..mono.len() - 1]];
            let power = &powers[prefix] * &deltas[*mono.last().unwrap()];
            if self.coeffs[slot] != 0.0 {
                result = result + &power * self.coeffs[slot];
            }
            powers.push(power);
        }
        result
    }

    fn assert_compatible(&self, other: &Jet) {
        assert!(
            self.layout.arity == other.layout.arity && self.layout.order == other.layout.order,
            "jet shape mismatch: (arity {}, order {}) vs (arity {}, order {})",
            self.layout.arity,
            self.layout.order,
            other.layout.arity,
            other.layout.order
        );
    }

    fn map_coeffs(&self, f: impl Fn(f64) -> f64) -> Jet {
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|&c| f(c)).collect(),
        }
    }

    fn product(&self, other: &Jet) -> Jet {
        self.assert_compatible(other);
        let mut out = vec![0.0; self.coeffs.len()];
        let (a, b) = (&self.coeffs, &other.coeffs);
        for &(i, j, k) in &self.layout.products {
            let (i, j) = (i as usize, j as usize);
            out[k as usize] += if i == j {
                a[i] * b[i]
            } else {
                a[i] * b[j] + a[j] * b[i]
            };
        }
        Jet {
            layout: self.layout.clone(),
            coeffs: out,
        }
    }

    /// Applies a univariate function given its derivatives
    /// `f(a₀), f'(a₀), …, f⁽ᵠ⁾(a₀)` at the jet's value.
    pub fn apply_univariate(&self, derivatives: &[f64]) -> Jet {
        let order = self.layout.order;
        assert!(derivatives.len() > order);
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut factorial = (1..=order).map(|k| k as f64).product::<f64>();
        let mut acc = self.lift(derivatives[order] / factorial);
        for k in (0..order).rev() {
            factorial /= (k + 1) as f64;
            acc = acc.product(&delta);
            acc.coeffs[0] += derivatives[k] / factorial;
        }
        acc
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let d: Vec<f64> = (0..=self.order()).map(|k| cycle[k % 4]).collect();
        self.apply_univariate(&d)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let d: Vec<f64> = (0..=self.order()).map(|k| cycle[k % 4]).collect();
        self.apply_univariate(&d)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.apply_univariate(&vec![e; self.order() + 1])
    }

    pub fn tanh(&self) -> Jet {
        // d/dx P(t) = P'(t) (1 - t²) with t = tanh x; track P as a polynomial in t.
        let t = self.value().tanh();
        let mut poly = vec![0.0, 1.0];
        let mut d = Vec::with_capacity(self.order() + 1);
        for _ in 0..=self.order() {
            d.push(poly.iter().rev().fold(0.0, |acc, c| acc * t + c));
            let mut next = vec![0.0; poly.len() + 2];
            for (p, &c) in poly.iter().enumerate().skip(1) {
                let dc = c * p as f64;
                next[p - 1] += dc;
                next[p + 1] -= dc;
            }
            poly = next;
        }
        self.apply_univariate(&d)
    }

    pub fn ln(&self) -> Result<Jet, JetError> {
        let a = self.value();
        if !(a > 0.0) {
            return Err(JetError::Domain { op: "log", value: a });
        }
        let mut d = vec![a.ln()];
        let mut coeff = 1.0;
        for k in 1..=self.order() {
            d.push(coeff / a.powi(k as i32));
            coeff *= -(k as f64);
        }
        Ok(self.apply_univariate(&d))
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        let a = self.value();
        if !(a > 0.0) {
            return Err(JetError::Domain { op: "sqrt", value: a });
        }
        let mut d = vec![a.sqrt()];
        let mut falling = 0.5;
        for k in 1..=self.order() {
            d.push(falling * a.sqrt() / a.powi(k as i32));
            falling *= 0.5 - k as f64;
        }
        Ok(self.apply_univariate(&d))
    }

    /// `self^exponent` for a constant exponent. Integer exponents accept any
    /// base except zero with a negative power; other exponents need a positive base.
    pub fn powf(&self, exponent: f64) -> Result<Jet, JetError> {
        let a = self.value();
        let integral = exponent.fract() == 0.0 && exponent.abs() < i32::MAX as f64;
        if integral {
            if a == 0.0 && exponent < 0.0 {
                return Err(JetError::Domain { op: "pow", value: a });
            }
        } else if !(a > 0.0) {
            return Err(JetError::Domain { op: "pow", value: a });
        }
        let mut d = Vec::with_capacity(self.order() + 1);
        let mut falling = 1.0;
        for k in 0..=self.order() {
            if falling == 0.0 {
                d.push(0.0);
            } else if integral {
                d.push(falling * a.powi(exponent as i32 - k as i32));
            } else {
                d.push(falling * a.powf(exponent - k as f64));
            }
            falling *= exponent - k as f64;
        }
        Ok(self.apply_univariate(&d))
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let a = self.value();
        if a == 0.0 {
            return Err(JetError::Domain { op: "division", value: a });
        }
        Ok(self.recip_unchecked())
    }

    fn recip_unchecked(&self) -> Jet {
        let a = self.value();
        let mut d = Vec::with_capacity(self.order() + 1);
        let mut coeff = 1.0;
        for k in 0..=self.order() {
            d.push(coeff / a.powi(k as i32 + 1));
            coeff *= -((k + 1) as f64);
        }
        self.apply_univariate(&d)
    }

    pub fn checked_div(&self, rhs: &Jet) -> Result<Jet, JetError> {
        Ok(self.product(&rhs.recip()?))
    }

    /// Largest absolute Taylor coefficient.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.assert_compatible(rhs);
        Jet {
            layout: self.layout.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.assert_compatible(rhs);
        Jet {
            layout: self.layout.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.product(rhs)
    }
}

/// Division without a zero check; a zero denominator yields non-finite
/// coefficients. Use [`Jet::checked_div`] when the caller needs an error.
impl<'a> Div<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.product(&rhs.recip_unchecked())
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.map_coeffs(|c| -c)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.map_coeffs(|c| c * rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        &self * rhs
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += rhs;
        out
    }
}

macro_rules! forward_owned {
    ($trait:ident, $method:ident) => {
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl<'a> $trait<Jet> for &'a Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

/// Central-difference gradient `(f(x + h eᵢ) - f(x - h eᵢ)) / 2h`.
///
/// This is the independent oracle for jet derivatives; it shares no code
/// with the jet arithmetic.
pub fn central_difference_gradient<F>(f: F, point: &[f64], step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = point.to_vec();
    (0..point.len())
        .map(|i| {
            probe[i] = point[i] + step;
            let forward = f(&probe);
            probe[i] = point[i] - step;
            let backward = f(&probe);
            probe[i] = point[i];
            (forward - backward) / (2.0 * step)
        })
        .collect()
}
