//! Piecewise-linear finite element space on (0, 1) with homogeneous
//! Dirichlet conditions.
//!
//! Only interior nodes carry degrees of freedom, so every operator here is
//! indexed by `0..n` where index `i` is the hat function centred at
//! `x = (i + 1) h`.

use nalgebra::DVector;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Result};
use crate::quadrature::GaussRule;

/// Uniform mesh of `n + 1` elements of length `h = 1 / (n + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    n: usize,
    h: f64,
}

impl Mesh {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("mesh needs at least one interior node");
        }
        Ok(Mesh {
            n,
            h: 1.0 / (n as f64 + 1.0),
        })
    }

    /// Mesh whose element length is closest to `h`.
    pub fn with_element_size(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return invalid(format!("element size {h} must lie in (0, 1)"));
        }
        let elements = (1.0 / h).round() as usize;
        Self::new(elements.saturating_sub(1))
    }

    pub fn interior_nodes(&self) -> usize {
        self.n
    }

    pub fn element_size(&self) -> f64 {
        self.h
    }

    pub fn elements(&self) -> usize {
        self.n + 1
    }

    /// Coordinate of interior node `i` (zero based).
    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Nodal values of `g` at the interior nodes.
    pub fn sample(&self, g: impl Fn(f64) -> f64) -> DVector<f64> {
        DVector::from_iterator(self.n, (0..self.n).map(|i| g(self.node(i))))
    }

    /// End-point coefficients of element `e` (0 ..= n) with the Dirichlet
    /// zeros filled in.
    #[inline]
    pub fn element_coeffs(&self, c: &[f64], e: usize) -> (f64, f64) {
        let left = if e == 0 { 0.0 } else { c[e - 1] };
        let right = if e == self.n { 0.0 } else { c[e] };
        (left, right)
    }

    /// Evaluate the finite element function with coefficients `c` at `x`.
    pub fn evaluate(&self, c: &[f64], x: f64) -> f64 {
        let pos = (x / self.h).clamp(0.0, self.elements() as f64);
        let e = (pos.floor() as usize).min(self.n);
        let s = pos - e as f64;
        let (l, r) = self.element_coeffs(c, e);
        l * (1.0 - s) + r * s
    }
}

/// Symmetric tridiagonal matrix stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            out[i] = s;
        }
    }

    pub fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.apply(x.as_slice(), out.as_mut_slice());
        out
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.diag.len();
        let mut s = 0.0;
        for i in 0..n {
            s += x[i] * self.diag[i] * y[i];
            if i + 1 < n {
                s += self.off[i] * (x[i] * y[i + 1] + x[i + 1] * y[i]);
            }
        }
        s
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }

    /// Cholesky factor `L Lᵀ`; `None` unless positive definite.
    pub fn cholesky(&self) -> Option<TridiagCholesky> {
        let n = self.dim();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut a = self.diag[i];
            if i > 0 {
                l[i - 1] = self.off[i - 1] / d[i - 1];
                a -= l[i - 1] * l[i - 1];
            }
            if !(a > 0.0) {
                return None;
            }
            d[i] = a.sqrt();
        }
        Some(TridiagCholesky { d, l })
    }
}

/// Lower bidiagonal Cholesky factor of an SPD tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagCholesky {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TridiagCholesky {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n {
            if i > 0 {
                b[i] -= self.l[i - 1] * b[i - 1];
            }
            b[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                b[i] -= self.l[i] * b[i + 1];
            }
            b[i] /= self.d[i];
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }
}

/// The sparse tensor `C_pqrs = ∫ φ_p φ_q φ_r φ_s dx`.
///
/// Only three distinct nonzero values occur: all four indices equal,
/// a 3+1 split over neighbouring nodes, and a 2+2 split over neighbouring
/// nodes. Anything spanning more than one element is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticTensor {
    n: usize,
    /// `[C_pppp, C_pppq, C_ppqq]`
    values: [f64; 3],
}

impl QuarticTensor {
    pub fn new(mesh: &Mesh) -> Self {
        let h = mesh.element_size();
        QuarticTensor {
            n: mesh.interior_nodes(),
            values: [2.0 * h / 5.0, h / 20.0, h / 30.0],
        }
    }

    pub fn distinct_values(&self) -> [f64; 3] {
        self.values
    }

    /// Entry `C_pqrs` via the index-pattern classifier.
    pub fn entry(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let idx = [p, q, r, s];
        if idx.iter().any(|&i| i >= self.n) {
            return 0.0;
        }
        let lo = *idx.iter().min().unwrap();
        let hi = *idx.iter().max().unwrap();
        match hi - lo {
            0 => self.values[0],
            1 => match idx.iter().filter(|&&i| i == lo).count() {
                2 => self.values[2],
                _ => self.values[1],
            },
            _ => 0.0,
        }
    }

    /// One-element moments `∫ L^j R^(4-j)` for `j = 0..=4`, where `L`, `R`
    /// are the two local hat functions.
    fn element_moments(&self) -> [f64; 5] {
        let [diag, three_one, two_two] = self.values;
        let half = 0.5 * diag;
        [half, three_one, two_two, three_one, half]
    }

    /// `B_p = Σ_qrs C_pqrs a_q b_r c_s`, accumulated element by element.
    pub fn contract(&self, a: &[f64], b: &[f64], c: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        self.contract_into(a, b, c, out.as_mut_slice());
        out
    }

    pub fn contract_into(&self, a: &[f64], b: &[f64], c: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mom = self.element_moments();
        out.iter_mut().for_each(|x| *x = 0.0);
        let get = |v: &[f64], i: isize| -> f64 {
            if i < 0 || i as usize >= n {
                0.0
            } else {
                v[i as usize]
            }
        };
        for e in 0..=n {
            let li = e as isize - 1;
            let ri = e as isize;
            let av = [get(a, li), get(a, ri)];
            let bv = [get(b, li), get(b, ri)];
            let cv = [get(c, li), get(c, ri)];
            // position 0 = left hat, 1 = right hat
            let mut to_left = 0.0;
            let mut to_right = 0.0;
            for (i, &ai) in av.iter().enumerate() {
                for (j, &bj) in bv.iter().enumerate() {
                    let ab = ai * bj;
                    if ab == 0.0 {
                        continue;
                    }
                    for (k, &ck) in cv.iter().enumerate() {
                        let lefts = (i == 0) as usize + (j == 0) as usize + (k == 0) as usize;
                        let prod = ab * ck;
                        to_left += prod * mom[lefts + 1];
                        to_right += prod * mom[lefts];
                    }
                }
            }
            if li >= 0 {
                out[li as usize] += to_left;
            }
            if (ri as usize) < n {
                out[ri as usize] += to_right;
            }
        }
    }
}

/// Mass, stiffness and quartic operators on a mesh, plus factorisations.
#[derive(Debug, Clone)]
pub struct SpatialOperators {
    pub mesh: Mesh,
    pub mass: SymTridiagonal,
    pub stiffness: SymTridiagonal,
    pub quartic: QuarticTensor,
    mass_factor: TridiagCholesky,
    stiffness_factor: TridiagCholesky,
}

impl SpatialOperators {
    /// Assemble by exact integration of products of hat functions.
    pub fn assemble(mesh: &Mesh) -> Self {
        let n = mesh.interior_nodes();
        let h = mesh.element_size();
        let mass = SymTridiagonal {
            diag: vec![2.0 * h / 3.0; n],
            off: vec![h / 6.0; n - 1],
        };
        let stiffness = SymTridiagonal {
            diag: vec![2.0 / h; n],
            off: vec![-1.0 / h; n - 1],
        };
        let mass_factor = mass.cholesky().expect("mass matrix is SPD");
        let stiffness_factor = stiffness.cholesky().expect("stiffness matrix is SPD");
        SpatialOperators {
            mesh: *mesh,
            mass,
            stiffness,
            quartic: QuarticTensor::new(mesh),
            mass_factor,
            stiffness_factor,
        }
    }

    pub fn dim(&self) -> usize {
        self.mesh.interior_nodes()
    }

    pub fn solve_mass(&self, b: &DVector<f64>) -> DVector<f64> {
        self.mass_factor.solve(b)
    }

    pub fn solve_mass_in_place(&self, b: &mut [f64]) {
        self.mass_factor.solve_in_place(b)
    }

    pub fn solve_stiffness(&self, b: &DVector<f64>) -> DVector<f64> {
        self.stiffness_factor.solve(b)
    }

    /// `|u|₀ = sqrt(uᵀ M u)`
    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        self.mass.bilinear(u, u).max(0.0).sqrt()
    }

    /// `|u|₁ = sqrt(uᵀ K u)`
    pub fn h1_seminorm(&self, u: &[f64]) -> f64 {
        self.stiffness.bilinear(u, u).max(0.0).sqrt()
    }

    /// Load vector `(g, φ_i)` by per-element Gauss quadrature.
    pub fn load_vector(&self, g: impl Fn(f64) -> f64, rule: &GaussRule) -> DVector<f64> {
        let n = self.dim();
        let h = self.mesh.element_size();
        let mut load = DVector::zeros(n);
        for e in 0..=n {
            let x0 = e as f64 * h;
            let (mut to_left, mut to_right) = (0.0, 0.0);
            for (s, w) in rule.nodes.iter().zip(&rule.weights) {
                let gv = g(x0 + s * h) * w * h;
                to_left += gv * (1.0 - s);
                to_right += gv * s;
            }
            if e > 0 {
                load[e - 1] += to_left;
            }
            if e < n {
                load[e] += to_right;
            }
        }
        load
    }

    /// Elliptic (H¹₀) Ritz projection: solve `K c = ((g', φ_i'))`.
    ///
    /// The hat derivatives are piecewise constant, so the load only needs
    /// nodal values of `g`. In 1D the result coincides with nodal
    /// interpolation.
    pub fn ritz_project_h1(&self, g: impl Fn(f64) -> f64) -> DVector<f64> {
        let n = self.dim();
        let h = self.mesh.element_size();
        let vals: Vec<f64> = (0..=n + 1).map(|i| g(i as f64 * h)).collect();
        let load = DVector::from_iterator(n, (1..=n).map(|i| (2.0 * vals[i] - vals[i - 1] - vals[i + 1]) / h));
        self.solve_stiffness(&load)
    }

    /// L² projection with a 4-point Gauss load.
    pub fn l2_project(&self, g: impl Fn(f64) -> f64) -> DVector<f64> {
        let load = self.load_vector(g, &GaussRule::new(4));
        self.solve_mass(&load)
    }

    /// Continuous `|g - u_h|₀` by per-element Gauss quadrature.
    pub fn l2_error(&self, c: &[f64], g: impl Fn(f64) -> f64) -> f64 {
        let rule = GaussRule::new(6);
        let h = self.mesh.element_size();
        let mut s = 0.0;
        for e in 0..self.mesh.elements() {
            let (l, r) = self.mesh.element_coeffs(c, e);
            let x0 = e as f64 * h;
            s += rule.integrate(x0, x0 + h, |x| {
                let t = (x - x0) / h;
                let d = g(x) - (l * (1.0 - t) + r * t);
                d * d
            });
        }
        s.sqrt()
    }

    /// Continuous `|g - u_h|₁` given the exact derivative `dg`.
    pub fn h1_error(&self, c: &[f64], dg: impl Fn(f64) -> f64) -> f64 {
        let rule = GaussRule::new(6);
        let h = self.mesh.element_size();
        let mut s = 0.0;
        for e in 0..self.mesh.elements() {
            let (l, r) = self.mesh.element_coeffs(c, e);
            let slope = (r - l) / h;
            let x0 = e as f64 * h;
            s += rule.integrate(x0, x0 + h, |x| {
                let d = dg(x) - slope;
                d * d
            });
        }
        s.sqrt()
    }
}

/// Laplacian eigenvalue `k²π²`.
pub fn eigenvalue(k: usize) -> f64 {
    let kf = k as f64;
    kf * kf * PI * PI
}

/// Eigenfunction `E_k(x) = √2 sin(kπx)`.
pub fn eigenfunction(k: usize, x: f64) -> f64 {
    SQRT_2 * (k as f64 * PI * x).sin()
}

/// `(λ_k, E_k at the interior nodes)`.
pub fn eigenpair(mesh: &Mesh, k: usize) -> Result<(f64, DVector<f64>)> {
    if k == 0 {
        return invalid("eigenpair index starts at 1");
    }
    Ok((eigenvalue(k), mesh.sample(|x| eigenfunction(k, x))))
}

/// Eigenvalue of `K v = λ M v` belonging to the nodal sine vector of mode
/// `k`; on a uniform mesh those vectors are exact generalised eigenvectors.
pub fn galerkin_eigenvalue(h: f64, k: usize) -> f64 {
    let c = (k as f64 * PI * h).cos();
    6.0 * (1.0 - c) / (h * h * (2.0 + c))
}
