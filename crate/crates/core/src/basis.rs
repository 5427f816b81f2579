//! Power-series output basis and the resulting affine-in-parameter
//! state and input polynomials.
//!
//! Every polynomial is stored in the normalized time `s = t / T`:
//! `p(t) = sum_i (c_i0 + c_i' alpha) (t / T)^i`. Coefficients then stay O(1)
//! for short horizons.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::lti::FlatMap;
use crate::{Error, Result, MAX_DEGREE};

/// A value together with whether it was taken outside `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T> {
    pub value: T,
    pub extrapolated: bool,
}

/// Polynomial in `t / T` whose coefficients are affine in the free parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePoly {
    horizon: f64,
    offset: DVector<f64>,
    linear: DMatrix<f64>,
}

impl AffinePoly {
    /// `offset[i]` and `linear.row(i)` form the coefficient of `(t / T)^i`.
    pub fn new(horizon: f64, offset: DVector<f64>, linear: DMatrix<f64>) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter("horizon must be positive"));
        }
        if offset.is_empty() {
            return Err(Error::InvalidParameter("polynomial needs at least one coefficient"));
        }
        if linear.nrows() != offset.len() {
            return Err(Error::DimensionMismatch {
                what: "affine coefficient rows",
                expected: offset.len(),
                found: linear.nrows(),
            });
        }
        Ok(Self {
            horizon,
            offset,
            linear,
        })
    }

    pub fn zero(degree: usize, n_params: usize, horizon: f64) -> Self {
        Self {
            horizon,
            offset: DVector::zeros(degree + 1),
            linear: DMatrix::zeros(degree + 1, n_params),
        }
    }

    pub fn degree(&self) -> usize {
        self.offset.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.linear.ncols()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Parameter-independent part of the normalized coefficients.
    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    /// Parameter sensitivity of the normalized coefficients, one row per power.
    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    fn check_params(&self, alpha: &DVector<f64>) -> Result<()> {
        if alpha.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: self.n_params(),
                found: alpha.len(),
            });
        }
        Ok(())
    }

    /// Normalized coefficients resolved at `alpha`.
    pub fn coefficients(&self, alpha: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_params(alpha)?;
        Ok(&self.offset + &self.linear * alpha)
    }

    /// Coefficients of the raw powers `t^i`.
    pub fn raw_coefficients(&self, alpha: &DVector<f64>) -> Result<DVector<f64>> {
        let mut c = self.coefficients(alpha)?;
        let mut scale = 1.0;
        for ci in c.iter_mut() {
            *ci /= scale;
            scale *= self.horizon;
        }
        Ok(c)
    }

    /// Horner evaluation at `alpha` and time `t` (seconds).
    pub fn evaluate(&self, alpha: &DVector<f64>, t: f64) -> Result<Evaluation<f64>> {
        let c = self.coefficients(alpha)?;
        Ok(Evaluation {
            value: horner(c.as_slice(), t / self.horizon),
            extrapolated: !(0.0..=self.horizon).contains(&t),
        })
    }

    /// `p(t) = value + gradient' alpha`.
    pub fn affine_at(&self, t: f64) -> (f64, DVector<f64>) {
        let s = t / self.horizon;
        let mut value = 0.0;
        let mut gradient = DVector::zeros(self.n_params());
        for i in (0..self.offset.len()).rev() {
            value = value * s + self.offset[i];
            gradient *= s;
            gradient += self.linear.row(i).transpose();
        }
        (value, gradient)
    }

    /// Time derivative, kept at the same stored degree (top coefficient zero).
    pub fn derivative(&self) -> Self {
        let len = self.offset.len();
        let mut offset = DVector::zeros(len);
        let mut linear = DMatrix::zeros(len, self.n_params());
        for i in 0..len - 1 {
            let w = (i + 1) as f64 / self.horizon;
            offset[i] = w * self.offset[i + 1];
            linear.row_mut(i).copy_from(&(self.linear.row(i + 1) * w));
        }
        Self {
            horizon: self.horizon,
            offset,
            linear,
        }
    }

    /// Antiderivative vanishing at `t = 0`; the stored degree grows by one.
    pub fn antiderivative(&self) -> Self {
        let len = self.offset.len() + 1;
        let mut offset = DVector::zeros(len);
        let mut linear = DMatrix::zeros(len, self.n_params());
        for i in 1..len {
            let w = self.horizon / i as f64;
            offset[i] = w * self.offset[i - 1];
            linear.row_mut(i).copy_from(&(self.linear.row(i - 1) * w));
        }
        Self {
            horizon: self.horizon,
            offset,
            linear,
        }
    }

    /// `self += w * other`; both must share degree, parameters and horizon.
    pub fn add_scaled(&mut self, w: f64, other: &AffinePoly) -> Result<()> {
        if other.offset.len() != self.offset.len() {
            return Err(Error::DimensionMismatch {
                what: "polynomial degree",
                expected: self.degree(),
                found: other.degree(),
            });
        }
        if other.n_params() != self.n_params() {
            return Err(Error::DimensionMismatch {
                what: "parameter count",
                expected: self.n_params(),
                found: other.n_params(),
            });
        }
        if w != 0.0 {
            self.offset.axpy(w, &other.offset, 1.0);
            self.linear.zip_apply(&other.linear, |a, b| *a += w * b);
        }
        Ok(())
    }

    pub fn add_constant(&mut self, c: f64) {
        self.offset[0] += c;
    }
}

pub(crate) fn horner(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * s + ci)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyRole {
    Output,
    State,
    Input,
    Constraint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinePolyVector {
    pub components: Vec<AffinePoly>,
    pub role: PolyRole,
}

impl AffinePolyVector {
    pub fn new(components: Vec<AffinePoly>, role: PolyRole) -> Result<Self> {
        if let Some(first) = components.first() {
            for c in &components[1..] {
                if c.degree() != first.degree() || c.n_params() != first.n_params() {
                    return Err(Error::DimensionMismatch {
                        what: "component shape",
                        expected: first.degree(),
                        found: c.degree(),
                    });
                }
            }
        }
        Ok(Self { components, role })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.components.first().map_or(0, AffinePoly::degree)
    }

    pub fn n_params(&self) -> usize {
        self.components.first().map_or(0, AffinePoly::n_params)
    }

    pub fn horizon(&self) -> f64 {
        self.components.first().map_or(0.0, AffinePoly::horizon)
    }

    pub fn evaluate(&self, alpha: &DVector<f64>, t: f64) -> Result<Evaluation<DVector<f64>>> {
        let mut value = DVector::zeros(self.len());
        let mut extrapolated = false;
        for (i, c) in self.components.iter().enumerate() {
            let e = c.evaluate(alpha, t)?;
            value[i] = e.value;
            extrapolated |= e.extrapolated;
        }
        Ok(Evaluation {
            value,
            extrapolated,
        })
    }
}

/// Degree, horizon and the coefficients pinned by the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    pub degree: usize,
    pub horizon: f64,
    pub relative_degrees: Vec<usize>,
    /// `fixed[i][k]` is the coefficient of `(t / T)^k` in output `i`, `k < r_i`.
    pub fixed: Vec<Vec<f64>>,
}

impl BasisSpec {
    /// `m (N + 1) - n`.
    pub fn n_free(&self) -> usize {
        self.relative_degrees
            .iter()
            .map(|&r| self.degree + 1 - r)
            .sum()
    }

    pub fn m(&self) -> usize {
        self.relative_degrees.len()
    }

    /// Position of output `i`'s first free coefficient inside `alpha`.
    pub fn free_offset(&self, i: usize) -> usize {
        self.relative_degrees[..i]
            .iter()
            .map(|&r| self.degree + 1 - r)
            .sum()
    }

    /// Degrees above 12 are numerically delicate for power series.
    pub fn poorly_conditioned(&self) -> bool {
        self.degree > 12
    }
}

/// Pins the `n` coefficients determined by `x(0) = x0`.
pub fn apply_initial_conditions(
    flat: &FlatMap,
    x0: &DVector<f64>,
    degree: usize,
    horizon: f64,
) -> Result<BasisSpec> {
    if x0.len() != flat.n() {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: flat.n(),
            found: x0.len(),
        });
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter("horizon must be positive"));
    }
    let required = flat.max_relative_degree();
    if degree < required {
        return Err(Error::DegreeTooLow { degree, required });
    }
    if degree > MAX_DEGREE {
        return Err(Error::DegreeOutOfRange {
            degree,
            max: MAX_DEGREE,
        });
    }
    let z0 = flat.canonical_state(x0);
    let mut fixed = Vec::with_capacity(flat.m());
    for (i, &r) in flat.relative_degrees.iter().enumerate() {
        let start = flat.chain_start(i);
        // y^(k)(0) = a_k k! / T^k
        let mut scale = 1.0;
        let coeffs = (0..r)
            .map(|k| {
                if k > 0 {
                    scale *= horizon / k as f64;
                }
                z0[start + k] * scale
            })
            .collect();
        fixed.push(coeffs);
    }
    Ok(BasisSpec {
        degree,
        horizon,
        relative_degrees: flat.relative_degrees.clone(),
        fixed,
    })
}

/// Flat outputs and their time derivatives, `order(k)` holding `d^k y / dt^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputDerivatives {
    orders: Vec<AffinePolyVector>,
}

impl OutputDerivatives {
    pub fn order(&self, k: usize) -> &AffinePolyVector {
        &self.orders[k]
    }

    pub fn max_order(&self) -> usize {
        self.orders.len() - 1
    }
}

/// Output polynomials `y_i(t) = sum_j a_ij (t / T)^j` and derivatives up to
/// the largest relative degree.
pub fn parameterize_outputs(basis: &BasisSpec) -> OutputDerivatives {
    let n_free = basis.n_free();
    let len = basis.degree + 1;
    let mut outputs = Vec::with_capacity(basis.m());
    for (i, &r) in basis.relative_degrees.iter().enumerate() {
        let mut offset = DVector::zeros(len);
        let mut linear = DMatrix::zeros(len, n_free);
        for (k, &a) in basis.fixed[i].iter().enumerate() {
            offset[k] = a;
        }
        let base = basis.free_offset(i);
        for j in r..len {
            linear[(j, base + j - r)] = 1.0;
        }
        outputs.push(AffinePoly {
            horizon: basis.horizon,
            offset,
            linear,
        });
    }
    let max_r = basis.relative_degrees.iter().copied().max().unwrap_or(0);
    let mut orders = Vec::with_capacity(max_r + 1);
    let mut current = outputs;
    for k in 0..=max_r {
        let next = if k < max_r {
            current.iter().map(AffinePoly::derivative).collect()
        } else {
            Vec::new()
        };
        orders.push(AffinePolyVector {
            components: current,
            role: PolyRole::Output,
        });
        current = next;
    }
    OutputDerivatives { orders }
}

/// `x(t) = Gamma_x(alpha, t)` and `u(t) = Gamma_u(alpha, t)`.
pub fn parameterize_states_inputs(
    flat: &FlatMap,
    basis: &BasisSpec,
) -> Result<(AffinePolyVector, AffinePolyVector)> {
    if basis.relative_degrees != flat.relative_degrees {
        return Err(Error::DimensionMismatch {
            what: "relative degree list",
            expected: flat.m(),
            found: basis.m(),
        });
    }
    let outputs = parameterize_outputs(basis);
    let (n, m) = (flat.n(), flat.m());
    let (deg, n_free, horizon) = (basis.degree, basis.n_free(), basis.horizon);

    // z entries as polynomials, in canonical order
    let mut chain = Vec::with_capacity(n);
    for (i, &r) in flat.relative_degrees.iter().enumerate() {
        for k in 0..r {
            chain.push(&outputs.order(k).components[i]);
        }
    }

    let mut states = Vec::with_capacity(n);
    for a in 0..n {
        let mut p = AffinePoly::zero(deg, n_free, horizon);
        for (col, z) in chain.iter().enumerate() {
            p.add_scaled(flat.xi_x[(a, col)], z)?;
        }
        p.add_constant(flat.x_off[a]);
        states.push(p);
    }

    let mut inputs = Vec::with_capacity(m);
    for b in 0..m {
        let mut p = AffinePoly::zero(deg, n_free, horizon);
        for (col, z) in chain.iter().enumerate() {
            p.add_scaled(flat.xi_u_z[(b, col)], z)?;
        }
        for (i, &r) in flat.relative_degrees.iter().enumerate() {
            p.add_scaled(flat.xi_u_top[(b, i)], &outputs.order(r).components[i])?;
        }
        p.add_constant(flat.u_off[b]);
        inputs.push(p);
    }

    Ok((
        AffinePolyVector {
            components: states,
            role: PolyRole::State,
        },
        AffinePolyVector {
            components: inputs,
            role: PolyRole::Input,
        },
    ))
}
