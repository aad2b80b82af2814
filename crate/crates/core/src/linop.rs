//! Block wave generator on the finite element subspace, its exponential,
//! and the discrete energy.
//!
//! States are stacked coefficient vectors `y = (u, v)` of length `2N`. The
//! semi-discrete linear wave equation is `y' = A_h y` with
//! `A_h = [[0, I], [-M⁻¹K, 0]]`, and the energy inner product is
//! `⟨y, z⟩_E = uᵀ K ū + vᵀ M v̄`.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};
use crate::mesh::SpatialOperators;

/// Displacement and velocity coefficients stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    y: DVector<f64>,
}

impl State {
    pub fn new(u: &DVector<f64>, v: &DVector<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                got: v.len(),
            });
        }
        let n = u.len();
        let mut y = DVector::zeros(2 * n);
        y.rows_mut(0, n).copy_from(u);
        y.rows_mut(n, n).copy_from(v);
        Ok(State { y })
    }

    pub fn zeros(n: usize) -> Self {
        State {
            y: DVector::zeros(2 * n),
        }
    }

    pub fn from_stacked(y: DVector<f64>) -> Self {
        debug_assert!(y.len().is_multiple_of(2));
        State { y }
    }

    /// Number of spatial degrees of freedom `N`.
    pub fn dim(&self) -> usize {
        self.y.len() / 2
    }

    pub fn u(&self) -> DVectorView<'_, f64> {
        self.y.rows(0, self.dim())
    }

    pub fn v(&self) -> DVectorView<'_, f64> {
        let n = self.dim();
        self.y.rows(n, n)
    }

    pub fn u_slice(&self) -> &[f64] {
        &self.y.as_slice()[..self.dim()]
    }

    pub fn v_slice(&self) -> &[f64] {
        &self.y.as_slice()[self.dim()..]
    }

    pub fn stacked(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn into_stacked(self) -> DVector<f64> {
        self.y
    }

    pub fn scale(&self, c: f64) -> State {
        State { y: &self.y * c }
    }

    pub fn sub(&self, other: &State) -> State {
        State { y: &self.y - &other.y }
    }

    /// Linear interpolation `(1 - s) self + s other`.
    pub fn lerp(&self, other: &State, s: f64) -> State {
        State {
            y: &self.y * (1.0 - s) + &other.y * s,
        }
    }
}

/// `⟨y, z⟩_E = uᵀ K ū + vᵀ M v̄`
pub fn energy_inner(ops: &SpatialOperators, y: &State, z: &State) -> f64 {
    ops.stiffness.bilinear(y.u_slice(), z.u_slice()) + ops.mass.bilinear(y.v_slice(), z.v_slice())
}

/// Discrete order-0 energy `½ uᵀKu + ½ vᵀMv`.
pub fn energy(ops: &SpatialOperators, y: &State) -> f64 {
    0.5 * energy_inner(ops, y, y)
}

/// `‖y‖_E`, the finite-energy norm (so `‖y‖_E² = 2 E`).
pub fn energy_norm(ops: &SpatialOperators, y: &State) -> f64 {
    energy_inner(ops, y, y).max(0.0).sqrt()
}

/// The restriction of the linear wave generator to the FE space.
#[derive(Debug, Clone)]
pub struct BlockGenerator {
    ops: SpatialOperators,
    dense: DMatrix<f64>,
}

impl BlockGenerator {
    pub fn new(ops: &SpatialOperators) -> Self {
        let n = ops.dim();
        // -M⁻¹K, column by column through the tridiagonal factor
        let k = ops.stiffness.to_dense();
        let mut minv_k = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut col: Vec<f64> = k.column(j).iter().copied().collect();
            ops.solve_mass_in_place(&mut col);
            for i in 0..n {
                minv_k[(i, j)] = -col[i];
            }
        }
        let mut dense = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            dense[(i, n + i)] = 1.0;
        }
        dense.view_mut((n, 0), (n, n)).copy_from(&minv_k);
        BlockGenerator {
            ops: ops.clone(),
            dense,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.ops.dim()
    }

    pub fn operators(&self) -> &SpatialOperators {
        &self.ops
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.dense
    }

    /// `(u, v) ↦ (v, -M⁻¹K u)` without forming the dense matrix.
    pub fn apply(&self, y: &State) -> State {
        let n = self.ops.dim();
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&y.v());
        let mut ku = vec![0.0; n];
        self.ops.stiffness.apply(y.u_slice(), &mut ku);
        self.ops.solve_mass_in_place(&mut ku);
        for i in 0..n {
            out[n + i] = -ku[i];
        }
        State::from_stacked(out)
    }
}

/// Largest `|τ|` accepted by [`Propagator::new`] unless overridden.
pub const DEFAULT_MAX_STEP: f64 = 100.0;

/// Cached powers `P^j ≈ exp(jτ A_h)` for `j = 1..=count`.
#[derive(Debug, Clone)]
pub struct Propagator {
    tau: f64,
    powers: Vec<DMatrix<f64>>,
}

impl Propagator {
    pub fn new(gen: &BlockGenerator, tau: f64, count: usize) -> Result<Self> {
        Self::with_max_step(gen, tau, count, DEFAULT_MAX_STEP)
    }

    pub fn with_max_step(gen: &BlockGenerator, tau: f64, count: usize, max_step: f64) -> Result<Self> {
        if !tau.is_finite() || tau.abs() > max_step {
            return Err(Error::ExpOverflow(format!(
                "step {tau} outside the configured bound {max_step}"
            )));
        }
        let p = expm(&(gen.dense() * tau))?;
        let mut powers = Vec::with_capacity(count.max(1));
        powers.push(p.clone());
        for j in 1..count {
            let next = &powers[j - 1] * &p;
            powers.push(next);
        }
        Ok(Propagator { tau, powers })
    }

    pub fn step(&self) -> f64 {
        self.tau
    }

    pub fn count(&self) -> usize {
        self.powers.len()
    }

    /// `P^j`, with `j = 0` meaning the identity is not stored.
    pub fn power(&self, j: usize) -> &DMatrix<f64> {
        &self.powers[j - 1]
    }

    pub fn apply(&self, j: usize, y: &State) -> State {
        if j == 0 {
            return y.clone();
        }
        State::from_stacked(self.power(j) * y.stacked())
    }

    /// `P^j (0, f)` using only the velocity columns.
    pub fn apply_velocity_block(&self, j: usize, f: &DVector<f64>, out: &mut DVector<f64>, scale: f64) {
        let n = f.len();
        if j == 0 {
            let mut tail = out.rows_mut(n, n);
            tail.axpy(scale, f, 1.0);
            return;
        }
        let cols = self.power(j).columns(n, n);
        out.gemv(scale, &cols, f, 1.0);
    }
}

/// Matrix exponential by scaling and squaring with a truncated Taylor
/// series.
///
/// The scaling brings `‖A‖₁ / 2^s` to at most one half; the Taylor degree is
/// then the smallest one whose remainder bound drops under `2⁻⁵⁶`.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::ExpOverflow(format!("non-finite norm {norm}")));
    }
    let theta = 0.5;
    let squarings = if norm <= theta {
        0
    } else {
        (norm / theta).log2().ceil() as u32
    };
    if squarings > 1000 {
        return Err(Error::ExpOverflow(format!("norm {norm:e} needs {squarings} squarings")));
    }
    let scaled = a / 2f64.powi(squarings as i32);
    let scaled_norm = norm / 2f64.powi(squarings as i32);

    // remainder of the degree-q series is bounded by θ^(q+1)/(q+1)! · e^θ
    let tol = 2f64.powi(-56);
    let mut degree = 1usize;
    let mut term_bound = scaled_norm;
    while term_bound * scaled_norm.exp() > tol && degree < 40 {
        degree += 1;
        term_bound *= scaled_norm / degree as f64;
    }

    // Horner: I + A(I + A/2(I + A/3(...)))
    let eye = DMatrix::<f64>::identity(n, n);
    let mut acc = eye.clone();
    for k in (1..=degree).rev() {
        acc = &eye + (&scaled * acc) / k as f64;
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    if acc.iter().any(|x| !x.is_finite()) {
        return Err(Error::ExpOverflow("squaring produced non-finite entries".into()));
    }
    Ok(acc)
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
