//! P1 finite-element algebra on a 1D mesh: tridiagonal assembly and solves,
//! quadrature loads, nodal vectors and sampled sup-norms.

use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::scalar::Real;

/// Default number of subdivisions per element for sampled sup-norms
/// (samples at `x_{i-1} + r h_i / 7`, `r = 0..=7`).
pub const DEFAULT_SUP_SAMPLES: usize = 7;

/// Mesh nodes `a = x_0 < x_1 < ... < x_N = b`. Elements are indexed
/// `0..N`, element `e` spanning `(x_e, x_{e+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh<S: Real> {
    nodes: Vec<S>,
}

impl<S: Real> SpatialMesh<S> {
    /// Uniform mesh with `n` elements on `[a, b]`.
    pub fn uniform(a: S, b: S, n: usize) -> Self {
        assert!(n >= 2 && a < b);
        let width = b - a;
        let nodes = (0..=n)
            .map(|i| a + width * S::of_usize(i) / S::of_usize(n))
            .collect();
        SpatialMesh { nodes }
    }

    pub fn from_nodes(nodes: Vec<S>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::invalid("spatial mesh", "needs at least two elements"));
        }
        if !nodes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("spatial mesh", "nodes must be strictly increasing"));
        }
        Ok(SpatialMesh { nodes })
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of interior nodes (degrees of freedom).
    pub fn n_interior(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn node(&self, i: usize) -> S {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[S] {
        &self.nodes
    }

    /// Size `h_e = x_{e+1} - x_e` of element `e`.
    pub fn h(&self, e: usize) -> S {
        self.nodes[e + 1] - self.nodes[e]
    }

    /// Element containing `x` (clamped to the first/last element).
    pub fn element_of(&self, x: S) -> usize {
        let n = self.n_elements();
        if x <= self.nodes[0] {
            return 0;
        }
        if x >= self.nodes[n] {
            return n - 1;
        }
        // Uniform-mesh guess; exact there, one comparison pair to confirm on
        // graded meshes, binary search as the fallback.
        let width = self.nodes[n] - self.nodes[0];
        let guess = ((x - self.nodes[0]) / width * S::of_usize(n))
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(n - 1);
        if self.nodes[guess] <= x && x < self.nodes[guess + 1] {
            return guess;
        }
        // partition_point returns the first index with node > x.
        let idx = self.nodes.partition_point(|&v| v <= x);
        (idx - 1).min(n - 1)
    }
}

/// Values of a P1 function at the interior nodes; the boundary values are
/// implicitly zero (homogeneous Dirichlet).
#[derive(Debug, Clone, PartialEq)]
pub struct NodalVector<S: Real> {
    values: Vec<S>,
}

impl<S: Real> NodalVector<S> {
    pub fn zeros(n: usize) -> Self {
        NodalVector {
            values: vec![S::zero(); n],
        }
    }

    pub fn from_values(values: Vec<S>) -> Self {
        NodalVector { values }
    }

    /// Interior-node values of `f`, i.e. the nodal interpolant.
    pub fn interpolate(mesh: &SpatialMesh<S>, f: impl Fn(S) -> S) -> Self {
        let values = (1..mesh.n_elements()).map(|i| f(mesh.node(i))).collect();
        NodalVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.values
    }

    /// Value at interior node `i` (1-based over mesh nodes); `0` and `N`
    /// return the boundary value zero.
    pub fn node_value(&self, i: usize) -> S {
        if i == 0 || i == self.values.len() + 1 {
            S::zero()
        } else {
            self.values[i - 1]
        }
    }

    /// P1 evaluation at an arbitrary point of the mesh.
    pub fn eval(&self, mesh: &SpatialMesh<S>, x: S) -> S {
        let e = mesh.element_of(x);
        let xl = mesh.node(e);
        let h = mesh.h(e);
        let vl = self.node_value(e);
        let vr = self.node_value(e + 1);
        vl + (vr - vl) * (x - xl) / h
    }

    /// Largest absolute nodal value. P1 functions attain their sup-norm at a
    /// node, so this is the exact max-norm of the represented function.
    pub fn nodal_max_abs(&self) -> S {
        self.values
            .iter()
            .fold(S::zero(), |acc, v| acc.max(v.abs()))
    }

    /// `self + c * other`.
    pub fn scaled_add(&self, c: S, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a + c * b)
            .collect();
        NodalVector { values }
    }

    pub fn scale(&self, c: S) -> Self {
        NodalVector {
            values: self.values.iter().map(|&a| a * c).collect(),
        }
    }

    /// Difference quotient `(self - other) / tau`.
    pub fn difference_quotient(&self, other: &Self, tau: S) -> Self {
        debug_assert_eq!(self.len(), other.len());
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b) / tau)
            .collect();
        NodalVector { values }
    }
}

/// Symmetric-profile tridiagonal matrix: `sub`/`sup` of length `n - 1`,
/// `diag` of length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriDiagMatrix<S: Real> {
    pub sub: Vec<S>,
    pub diag: Vec<S>,
    pub sup: Vec<S>,
}

impl<S: Real> TriDiagMatrix<S> {
    pub fn zeros(n: usize) -> Self {
        TriDiagMatrix {
            sub: vec![S::zero(); n.saturating_sub(1)],
            diag: vec![S::zero(); n],
            sup: vec![S::zero(); n.saturating_sub(1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        m.diag.iter_mut().for_each(|d| *d = S::one());
        m
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, v: &NodalVector<S>) -> NodalVector<S> {
        let n = self.size();
        debug_assert_eq!(v.len(), n);
        let x = v.as_slice();
        let mut out = vec![S::zero(); n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc = acc + self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc = acc + self.sup[i] * x[i + 1];
            }
            out[i] = acc;
        }
        NodalVector::from_values(out)
    }

    /// `ca * a + cb * b`.
    pub fn lin_comb(a: &Self, ca: S, b: &Self, cb: S) -> Self {
        debug_assert_eq!(a.size(), b.size());
        let comb = |u: &[S], v: &[S]| -> Vec<S> {
            u.iter().zip(v).map(|(&x, &y)| ca * x + cb * y).collect()
        };
        TriDiagMatrix {
            sub: comb(&a.sub, &b.sub),
            diag: comb(&a.diag, &b.diag),
            sup: comb(&a.sup, &b.sup),
        }
    }

    /// Thomas factorisation; reusable across right-hand sides.
    pub fn factor(&self) -> Result<TriDiagFactor<S>> {
        let n = self.size();
        let mut denom = vec![S::zero(); n];
        let mut csup = vec![S::zero(); n.saturating_sub(1)];
        let mut prev_c = S::zero();
        for i in 0..n {
            let d = if i == 0 {
                self.diag[0]
            } else {
                self.diag[i] - self.sub[i - 1] * prev_c
            };
            let scale = self.diag[i].abs()
                + if i > 0 { self.sub[i - 1].abs() } else { S::zero() }
                + S::one();
            if d.abs() <= S::epsilon() * scale {
                return Err(Error::SingularSystem { row: i });
            }
            denom[i] = d;
            if i + 1 < n {
                csup[i] = self.sup[i] / d;
                prev_c = csup[i];
            }
        }
        Ok(TriDiagFactor {
            sub: self.sub.clone(),
            denom,
            csup,
        })
    }

    /// One-shot solve.
    pub fn solve(&self, rhs: &NodalVector<S>) -> Result<NodalVector<S>> {
        Ok(self.factor()?.solve(rhs))
    }
}

/// Prefactored Thomas data for repeated solves with the same matrix.
#[derive(Debug, Clone)]
pub struct TriDiagFactor<S: Real> {
    sub: Vec<S>,
    denom: Vec<S>,
    csup: Vec<S>,
}

impl<S: Real> TriDiagFactor<S> {
    pub fn solve(&self, rhs: &NodalVector<S>) -> NodalVector<S> {
        let n = self.denom.len();
        debug_assert_eq!(rhs.len(), n);
        let b = rhs.as_slice();
        let mut y = vec![S::zero(); n];
        for i in 0..n {
            let num = if i == 0 {
                b[0]
            } else {
                b[i] - self.sub[i - 1] * y[i - 1]
            };
            y[i] = num / self.denom[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            y[i] = y[i] - self.csup[i] * y[i + 1];
        }
        NodalVector::from_values(y)
    }
}

/// General banded matrix with LU partial pivoting; used for the coupled
/// two-stage Runge-Kutta step whose block system is banded but not
/// tridiagonal. Storage follows the LAPACK band layout with `kl` extra
/// rows of fill for pivoting.
#[derive(Debug, Clone)]
pub struct BandedMatrix<S: Real> {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major `(2 kl + ku + 1) x n`: entry `(i, j)` lives at
    /// `band(kl + ku + i - j, j)`.
    data: Vec<S>,
}

impl<S: Real> BandedMatrix<S> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandedMatrix {
            n,
            kl,
            ku,
            data: vec![S::zero(); (2 * kl + ku + 1) * n],
        }
    }

    #[inline]
    fn idx(&self, band_row: usize, j: usize) -> usize {
        band_row * self.n + j
    }

    pub fn add(&mut self, i: usize, j: usize, v: S) {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(j <= i + self.ku && i <= j + self.kl);
        let r = self.kl + self.ku + i - j;
        let at = self.idx(r, j);
        self.data[at] = self.data[at] + v;
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        if j > i + self.ku || i > j + self.kl {
            return S::zero();
        }
        self.data[self.idx(self.kl + self.ku + i - j, j)]
    }

    /// LU factorisation with row partial pivoting, in place.
    #[allow(clippy::needless_range_loop)]
    pub fn factor(mut self) -> Result<BandedFactor<S>> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let kv = kl + ku; // effective upper bandwidth after pivoting
        let mut pivots = vec![0usize; n];
        for col in 0..n {
            // Pivot among rows col..=col+kl.
            let last = (col + kl).min(n - 1);
            let mut piv = col;
            let mut piv_abs = self.get(col, col).abs();
            for r in (col + 1)..=last {
                let a = self.get(r, col).abs();
                if a > piv_abs {
                    piv_abs = a;
                    piv = r;
                }
            }
            if piv_abs <= S::min_positive_value() {
                return Err(Error::SingularSystem { row: col });
            }
            pivots[col] = piv;
            if piv != col {
                // Swap rows within the band (columns col..=col+kv).
                let jmax = (col + kv).min(n - 1);
                for j in col..=jmax {
                    let a = self.band_get(col, j);
                    let b = self.band_get(piv, j);
                    self.band_set(col, j, b);
                    self.band_set(piv, j, a);
                }
            }
            let pivot = self.band_get(col, col);
            for r in (col + 1)..=last {
                let factor = self.band_get(r, col) / pivot;
                self.band_set(r, col, factor);
                let jmax = (col + kv).min(n - 1);
                for j in (col + 1)..=jmax {
                    let v = self.band_get(r, j) - factor * self.band_get(col, j);
                    self.band_set(r, j, v);
                }
            }
        }
        Ok(BandedFactor {
            mat: self,
            pivots,
        })
    }

    #[inline]
    fn band_get(&self, i: usize, j: usize) -> S {
        if j > i + self.kl + self.ku || i > j + self.kl {
            return S::zero();
        }
        self.data[self.idx(self.kl + self.ku + i - j, j)]
    }

    #[inline]
    fn band_set(&mut self, i: usize, j: usize, v: S) {
        debug_assert!(j <= i + self.kl + self.ku && i <= j + self.kl);
        let at = self.idx(self.kl + self.ku + i - j, j);
        self.data[at] = v;
    }
}

/// Factored banded matrix.
#[derive(Debug, Clone)]
pub struct BandedFactor<S: Real> {
    mat: BandedMatrix<S>,
    pivots: Vec<usize>,
}

impl<S: Real> BandedFactor<S> {
    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, rhs: &[S]) -> Vec<S> {
        let n = self.mat.n;
        let kl = self.mat.kl;
        let kv = kl + self.mat.ku;
        debug_assert_eq!(rhs.len(), n);
        let mut x = rhs.to_vec();
        // Forward: apply permutation and L.
        for col in 0..n {
            let piv = self.pivots[col];
            if piv != col {
                x.swap(col, piv);
            }
            let last = (col + kl).min(n - 1);
            for r in (col + 1)..=last {
                let factor = self.mat.band_get(r, col);
                x[r] = x[r] - factor * x[col];
            }
        }
        // Back substitution with U.
        for row in (0..n).rev() {
            let jmax = (row + kv).min(n - 1);
            let mut acc = x[row];
            for j in (row + 1)..=jmax {
                acc = acc - self.mat.band_get(row, j) * x[j];
            }
            x[row] = acc / self.mat.band_get(row, row);
        }
        x
    }
}

/// Mass form variant for the discrete scalar product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassMode {
    Consistent,
    Lumped,
}

impl MassMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "consistent" => Some(MassMode::Consistent),
            "lumped" => Some(MassMode::Lumped),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MassMode::Consistent => "consistent",
            MassMode::Lumped => "lumped",
        }
    }
}

// Gauss-Legendre 2-point rule on [xl, xr]: exact through cubics.
#[inline]
fn gauss2<S: Real>(xl: S, xr: S) -> [(S, S); 2] {
    let h = xr - xl;
    let mid = (xl + xr) * S::half();
    let off = h * S::half() / S::of(3.0).sqrt();
    let w = h * S::half();
    [(mid - off, w), (mid + off, w)]
}

/// Stiffness matrix of `a_h(u, v) = sum_e d(mid_e) int u' v' + int r u v`
/// over interior hat functions: diffusion integrated exactly with the
/// midpoint-evaluated coefficient, reaction by the 2-point Gauss rule.
pub fn assemble_stiffness<S: Real>(p: &Problem<S>, mesh: &SpatialMesh<S>) -> TriDiagMatrix<S> {
    let n = mesh.n_interior();
    let mut a = TriDiagMatrix::zeros(n);
    for e in 0..mesh.n_elements() {
        let xl = mesh.node(e);
        let xr = mesh.node(e + 1);
        let h = xr - xl;
        let d_mid = p.diffusion((xl + xr) * S::half());
        let k = d_mid / h;
        // Local reaction integrals int r phi_a phi_b over the element.
        let mut r_ll = S::zero();
        let mut r_lr = S::zero();
        let mut r_rr = S::zero();
        for (x, w) in gauss2(xl, xr) {
            let pl = (xr - x) / h;
            let pr = (x - xl) / h;
            let rw = p.reaction(x) * w;
            r_ll = r_ll + rw * pl * pl;
            r_lr = r_lr + rw * pl * pr;
            r_rr = r_rr + rw * pr * pr;
        }
        // Global indices of the element's endpoints among interior nodes.
        let left = e; // mesh node e -> interior index e - 1
        let right = e + 1;
        if left >= 1 {
            a.diag[left - 1] = a.diag[left - 1] + k + r_ll;
        }
        if right <= n {
            a.diag[right - 1] = a.diag[right - 1] + k + r_rr;
        }
        if left >= 1 && right <= n {
            a.sub[left - 1] = a.sub[left - 1] + (r_lr - k);
            a.sup[left - 1] = a.sup[left - 1] + (r_lr - k);
        }
    }
    a
}

/// Mass matrix of the discrete scalar product on interior hat functions:
/// consistent (exact P1) or lumped (row sums).
pub fn assemble_mass<S: Real>(mesh: &SpatialMesh<S>, mode: MassMode) -> TriDiagMatrix<S> {
    let n = mesh.n_interior();
    let mut m = TriDiagMatrix::zeros(n);
    let third = S::one() / S::of(3.0);
    let sixth = S::one() / S::of(6.0);
    for e in 0..mesh.n_elements() {
        let h = mesh.h(e);
        let left = e;
        let right = e + 1;
        match mode {
            MassMode::Consistent => {
                if left >= 1 {
                    m.diag[left - 1] = m.diag[left - 1] + h * third;
                }
                if right <= n {
                    m.diag[right - 1] = m.diag[right - 1] + h * third;
                }
                if left >= 1 && right <= n {
                    m.sub[left - 1] = m.sub[left - 1] + h * sixth;
                    m.sup[left - 1] = m.sup[left - 1] + h * sixth;
                }
            }
            MassMode::Lumped => {
                if left >= 1 {
                    m.diag[left - 1] = m.diag[left - 1] + h * S::half();
                }
                if right <= n {
                    m.diag[right - 1] = m.diag[right - 1] + h * S::half();
                }
            }
        }
    }
    m
}

/// Load vector `<g, phi_i>` over interior hat functions, 2-point Gauss
/// per element (the same rule used in assembly).
pub fn assemble_load<S: Real>(mesh: &SpatialMesh<S>, g: impl Fn(S) -> S) -> NodalVector<S> {
    let n = mesh.n_interior();
    let mut load = vec![S::zero(); n];
    for e in 0..mesh.n_elements() {
        let xl = mesh.node(e);
        let xr = mesh.node(e + 1);
        let h = xr - xl;
        let mut fl = S::zero();
        let mut fr = S::zero();
        for (x, w) in gauss2(xl, xr) {
            let gv = g(x) * w;
            fl = fl + gv * (xr - x) / h;
            fr = fr + gv * (x - xl) / h;
        }
        if e >= 1 {
            load[e - 1] = load[e - 1] + fl;
        }
        if e < n {
            load[e] = load[e] + fr;
        }
    }
    NodalVector::from_values(load)
}

/// Sampled sup-norm: max of `|f|` at `x_{e} + r h_e / samples_per_element`,
/// `r = 0..=samples_per_element`, over all elements.
pub fn supnorm_sampled<S: Real>(
    mesh: &SpatialMesh<S>,
    samples_per_element: usize,
    f: impl Fn(S) -> S,
) -> S {
    assert!(samples_per_element >= 2);
    let mut sup = S::zero();
    for e in 0..mesh.n_elements() {
        let xl = mesh.node(e);
        let h = mesh.h(e);
        for r in 0..=samples_per_element {
            let x = xl + h * S::of_usize(r) / S::of_usize(samples_per_element);
            sup = sup.max(f(x).abs());
        }
    }
    sup
}
