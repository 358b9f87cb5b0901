//! Final-time maximum-norm error bound: weights, components and report.
//!
//! The bound at `t = T` for a split index `K` is
//!
//! ```text
//! eta^{M,K} = eta_init + eta_ell^{M,K} + eta_f + eta_dpsi + eta_Psi
//! ```
//!
//! with weights `sigma_j = e^{-gamma (T - t_j)}`,
//! `mu_j = int_{I_j} (kappa1/(T-s) + kappa1') ds` and
//! `chi_j = min{ kappa0 tau_j^2/4, int_{I_j} (t_j-s)(s-t_{j-1})/2 (kappa1/(T-s) + kappa1') ds }`.

use crate::error::{Error, Result};
use crate::fem1d::{supnorm_sampled, NodalVector, SpatialMesh, DEFAULT_SUP_SAMPLES};
use crate::problem::{GreenBounds, Problem, TimeMesh};
use crate::reconstruction::ReconstructionData;
use crate::scalar::Real;

/// Per-level weights of the final-time bound. `sigma` is indexed by the time
/// level `0..=M`; `mu` and `chi` by the step `1..=M` (slot 0 unused).
/// `mu[M]` is the `+inf` sentinel: it never enters the bound since the
/// weighted sum stops at `j <= K <= M-1`.
#[derive(Debug, Clone)]
pub struct EstimatorWeights<S: Real> {
    sigma: Vec<S>,
    mu: Vec<S>,
    chi: Vec<S>,
}

impl<S: Real> EstimatorWeights<S> {
    pub fn sigma(&self, j: usize) -> S {
        self.sigma[j]
    }

    pub fn mu(&self, j: usize) -> S {
        debug_assert!(j >= 1);
        self.mu[j]
    }

    pub fn chi(&self, j: usize) -> S {
        debug_assert!(j >= 1);
        self.chi[j]
    }
}

/// `(b^2 - a^2)/2 - a b ln(b/a)` for `b = a + tau`, evaluated stably.
///
/// Takes the exact interval length `tau` rather than recovering it from the
/// endpoints (forming both `a` and `b` as distances to the final time loses
/// the digits of `tau` when `tau << a`). For narrow intervals the two terms
/// cancel almost completely; the difference is the odd series
/// `4 m^2 sum_k u^{2k+1} / (4k^2 - 1)` in `u = tau/(2m)`, which converges
/// fast exactly where the direct expression loses digits.
fn kernel_bracket<S: Real>(a: S, tau: S) -> S {
    debug_assert!(S::zero() <= a && S::zero() < tau);
    if a == S::zero() {
        return tau * tau * S::half();
    }
    let mid = a + tau * S::half();
    let u = tau / (S::two() * mid);
    if u >= S::of(0.25) {
        return tau * mid - (mid * mid - tau * tau * S::of(0.25)) * (tau / a).ln_1p();
    }
    let u2 = u * u;
    let mut term = u * u2;
    let mut sum = S::zero();
    let mut k = 1usize;
    loop {
        let denom = S::of_usize(4 * k * k - 1);
        let contribution = term / denom;
        sum = sum + contribution;
        if contribution <= S::epsilon() * sum || k > 80 {
            break;
        }
        term = term * u2;
        k += 1;
    }
    S::of(4.0) * mid * mid * sum
}

/// Closed-form weights for the given kernel constants and time mesh.
pub fn weights<S: Real>(gb: &GreenBounds<S>, tm: &TimeMesh<S>) -> EstimatorWeights<S> {
    let m = tm.steps();
    let t_end = tm.final_time();
    let mut sigma = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let lag = (t_end - tm.node(j)).max(S::zero());
        sigma.push((-gb.gamma * lag).exp());
    }
    let mut mu = vec![S::zero(); m + 1];
    let mut chi = vec![S::zero(); m + 1];
    let twelfth = S::one() / S::of(12.0);
    for j in 1..=m {
        let tau = tm.tau(j);
        let a = (t_end - tm.node(j)).max(S::zero());
        mu[j] = if j == m {
            S::infinity()
        } else {
            gb.kappa1 * (tau / a).ln_1p() + gb.kappa1_prime * tau
        };
        let integral = gb.kappa1 * S::half() * kernel_bracket(a, tau)
            + gb.kappa1_prime * tau * tau * tau * twelfth;
        chi[j] = (gb.kappa0 * tau * tau / S::of(4.0)).min(integral);
    }
    EstimatorWeights { sigma, mu, chi }
}

/// Initial-data component `kappa0 sigma_0 ||u0 - u_h^0||_inf`, the sup-norm
/// sampled on an element subgrid.
pub fn eta_init<S: Real>(
    gb: &GreenBounds<S>,
    tm: &TimeMesh<S>,
    p: &Problem<S>,
    mesh: &SpatialMesh<S>,
    u_h0: &NodalVector<S>,
    samples_per_element: usize,
) -> S {
    let sigma0 = (-gb.gamma * tm.final_time()).exp();
    let sup = supnorm_sampled(mesh, samples_per_element, |x| {
        p.initial(x) - u_h0.eval(mesh, x)
    });
    gb.kappa0 * sigma0 * sup
}

/// Source-interpolation component: Simpson's rule reduces each step's
/// integral to `tau_j/3 ||f^j - 2 f^{j-1/2} + f^{j-1}||_inf`. Returns the
/// total and the per-step terms.
pub fn eta_f<S: Real>(
    gb: &GreenBounds<S>,
    tm: &TimeMesh<S>,
    p: &Problem<S>,
    mesh: &SpatialMesh<S>,
    w: &EstimatorWeights<S>,
    samples_per_element: usize,
) -> (S, Vec<S>) {
    let third = S::one() / S::of(3.0);
    let mut terms = Vec::with_capacity(tm.steps());
    let mut total = S::zero();
    for j in 1..=tm.steps() {
        let t0 = tm.node(j - 1);
        let t1 = tm.node(j);
        let tm_half = (t0 + t1) * S::half();
        let bracket = supnorm_sampled(mesh, samples_per_element, |x| {
            p.source(x, t1) - S::two() * p.source(x, tm_half) + p.source(x, t0)
        });
        let term = w.sigma(j) * gb.kappa0 * tm.tau(j) * third * bracket;
        terms.push(term);
        total = total + term;
    }
    (total, terms)
}

/// Elliptic component: `kappa0 (eta_ell^M + sigma_K eta_ell^K +
/// sum_{j>K} sigma_j tau_j eta_{ell,d}^j) + sum_{j<=K} sigma_j mu_j
/// max{eta_ell^j, eta_ell^{j-1}}`. Returns the total and the per-step terms
/// of the two sums.
pub fn eta_ell_mk<S: Real>(
    gb: &GreenBounds<S>,
    tm: &TimeMesh<S>,
    w: &EstimatorWeights<S>,
    k: usize,
    eta_ell: &[S],
    eta_ell_delta: &[S],
) -> Result<(S, Vec<S>)> {
    let m = tm.steps();
    if k > m.saturating_sub(1) {
        return Err(Error::SplitIndexOutOfRange { k, max: m - 1 });
    }
    debug_assert_eq!(eta_ell.len(), m + 1);
    debug_assert_eq!(eta_ell_delta.len(), m);
    let mut terms = Vec::with_capacity(m);
    let mut total = gb.kappa0 * (eta_ell[m] + w.sigma(k) * eta_ell[k]);
    for j in 1..=m {
        let term = if j <= k {
            w.sigma(j) * w.mu(j) * eta_ell[j].max(eta_ell[j - 1])
        } else {
            gb.kappa0 * w.sigma(j) * tm.tau(j) * eta_ell_delta[j - 1]
        };
        terms.push(term);
        total = total + term;
    }
    Ok((total, terms))
}

/// Defect-rate and step-residual components
/// `sum_j sigma_j chi_j ||d_t psi^j||` and `kappa0 sum_j sigma_j tau_j ||Psi^j||`
/// from the per-step nodal sup-norms (P1 functions attain their extrema at
/// nodes). Returns totals and per-step terms.
pub fn eta_delta_psi_and_big_psi<S: Real>(
    gb: &GreenBounds<S>,
    tm: &TimeMesh<S>,
    w: &EstimatorWeights<S>,
    delta_psi_norms: &[S],
    big_psi_norms: &[S],
) -> ((S, Vec<S>), (S, Vec<S>)) {
    let m = tm.steps();
    debug_assert_eq!(delta_psi_norms.len(), m);
    debug_assert_eq!(big_psi_norms.len(), m);
    let mut dpsi_terms = Vec::with_capacity(m);
    let mut bpsi_terms = Vec::with_capacity(m);
    let mut dpsi_total = S::zero();
    let mut bpsi_total = S::zero();
    for j in 1..=m {
        let dpsi = w.sigma(j) * w.chi(j) * delta_psi_norms[j - 1];
        let bpsi = gb.kappa0 * w.sigma(j) * tm.tau(j) * big_psi_norms[j - 1];
        dpsi_terms.push(dpsi);
        bpsi_terms.push(bpsi);
        dpsi_total = dpsi_total + dpsi;
        bpsi_total = bpsi_total + bpsi;
    }
    ((dpsi_total, dpsi_terms), (bpsi_total, bpsi_terms))
}

/// One step's weights and contributions, for component tables.
#[derive(Debug, Clone)]
pub struct StepContribution<S: Real> {
    pub j: usize,
    pub t: S,
    pub sigma: S,
    pub mu: S,
    pub chi: S,
    pub eta_ell: S,
    pub eta_ell_delta: S,
    pub f_term: S,
    pub delta_psi_term: S,
    pub big_psi_term: S,
    pub ell_term: S,
}

/// Assembled final-time bound with its component decomposition.
#[derive(Debug, Clone)]
pub struct EstimatorReport<S: Real> {
    pub k: usize,
    pub eta_init: S,
    pub eta_ell_mk: S,
    pub eta_f: S,
    pub eta_delta_psi: S,
    pub eta_big_psi: S,
    /// Exact fixed-order sum of the five components.
    pub total: S,
    pub steps: Vec<StepContribution<S>>,
}

/// Combines the component values and per-step arrays into a report.
/// The total is the exact sum of the five components in declaration order.
#[allow(clippy::too_many_arguments)]
pub fn assemble_report<S: Real>(
    tm: &TimeMesh<S>,
    w: &EstimatorWeights<S>,
    eta_ell_levels: &[S],
    eta_ell_delta_levels: &[S],
    k: usize,
    eta_init: S,
    ell: (S, Vec<S>),
    f: (S, Vec<S>),
    dpsi: (S, Vec<S>),
    bpsi: (S, Vec<S>),
) -> EstimatorReport<S> {
    let m = tm.steps();
    let (eta_ell_mk, ell_terms) = ell;
    let (eta_f, f_terms) = f;
    let (eta_delta_psi, dpsi_terms) = dpsi;
    let (eta_big_psi, bpsi_terms) = bpsi;
    let total = eta_init + eta_ell_mk + eta_f + eta_delta_psi + eta_big_psi;
    let steps = (1..=m)
        .map(|j| StepContribution {
            j,
            t: tm.node(j),
            sigma: w.sigma(j),
            mu: w.mu(j),
            chi: w.chi(j),
            eta_ell: eta_ell_levels[j],
            eta_ell_delta: eta_ell_delta_levels[j - 1],
            f_term: f_terms[j - 1],
            delta_psi_term: dpsi_terms[j - 1],
            big_psi_term: bpsi_terms[j - 1],
            ell_term: ell_terms[j - 1],
        })
        .collect();
    EstimatorReport {
        k,
        eta_init,
        eta_ell_mk,
        eta_f,
        eta_delta_psi,
        eta_big_psi,
        total,
        steps,
    }
}

/// Full bound for a swept trajectory and its reconstruction data.
pub fn estimate_final_time<S: Real>(
    p: &Problem<S>,
    gb: &GreenBounds<S>,
    mesh: &SpatialMesh<S>,
    tm: &TimeMesh<S>,
    state0: &NodalVector<S>,
    recon: &ReconstructionData<S>,
    k: usize,
) -> Result<EstimatorReport<S>> {
    let w = weights(gb, tm);
    let init = eta_init(gb, tm, p, mesh, state0, DEFAULT_SUP_SAMPLES);
    let ell = eta_ell_mk(gb, tm, &w, k, &recon.eta_ell, &recon.eta_ell_delta)?;
    let f = eta_f(gb, tm, p, mesh, &w, DEFAULT_SUP_SAMPLES);
    let dpsi_norms: Vec<S> = recon.delta_psi.iter().map(|v| v.nodal_max_abs()).collect();
    let bpsi_norms: Vec<S> = recon.big_psi.iter().map(|v| v.nodal_max_abs()).collect();
    let (dpsi, bpsi) = eta_delta_psi_and_big_psi(gb, tm, &w, &dpsi_norms, &bpsi_norms);
    Ok(assemble_report(
        tm,
        &w,
        &recon.eta_ell,
        &recon.eta_ell_delta,
        k,
        init,
        ell,
        f,
        dpsi,
        bpsi,
    ))
}

/// Evaluates the elliptic component for every admissible split index and
/// returns the minimiser `(K, eta_ell^{M,K})`. The bound holds for each `K`,
/// so the minimum over `K` is also a bound.
pub fn scan_split_index<S: Real>(
    gb: &GreenBounds<S>,
    tm: &TimeMesh<S>,
    w: &EstimatorWeights<S>,
    eta_ell: &[S],
    eta_ell_delta: &[S],
) -> (usize, S) {
    let m = tm.steps();
    // Suffix sums of sigma_j tau_j eta_delta (kappa0 enters once below) and
    // prefix sums of sigma_j mu_j max-pairs.
    let mut suffix = vec![S::zero(); m + 1];
    for j in (1..=m).rev() {
        suffix[j - 1] = suffix[j] + w.sigma(j) * tm.tau(j) * eta_ell_delta[j - 1];
    }
    let mut best_k = 0;
    let mut best = S::infinity();
    let mut prefix = S::zero();
    for k in 0..=m.saturating_sub(1) {
        if k >= 1 {
            prefix = prefix + w.sigma(k) * w.mu(k) * eta_ell[k].max(eta_ell[k - 1]);
        }
        let value = gb.kappa0 * (eta_ell[m] + w.sigma(k) * eta_ell[k] + suffix[k]) + prefix;
        if value < best {
            best = value;
            best_k = k;
        }
    }
    (best_k, best)
}
