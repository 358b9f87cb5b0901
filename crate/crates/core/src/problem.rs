//! Parabolic problem data: coefficients, source, initial datum, kernel bounds
//! for the evolution operator, and the time mesh.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Coefficient function of the spatial variable.
pub type CoefficientFn<S> = Box<dyn Fn(S) -> S + Send + Sync>;
/// Source function of space and time.
pub type SourceFn<S> = Box<dyn Fn(S, S) -> S + Send + Sync>;

/// Number of sample points used for construction-time coefficient checks.
const VALIDATION_SAMPLES: usize = 257;

/// One-dimensional linear parabolic problem
///
/// ```text
/// u_t - (d(x) u')' + r(x) u = f(x, t)   on (a, b) x (0, T],
/// u(a, t) = u(b, t) = 0,                u(x, 0) = u0(x),
/// ```
///
/// with `d > 0` and `r >= 0`. Coefficients are plain callables; the library
/// only ever needs point evaluations and quadrature.
pub struct Problem<S: Real> {
    domain_left: S,
    domain_right: S,
    diffusion: CoefficientFn<S>,
    reaction: CoefficientFn<S>,
    source: SourceFn<S>,
    initial: CoefficientFn<S>,
    final_time: S,
}

impl<S: Real> Problem<S> {
    /// Validates the data by sampling: `d > 0`, `r >= 0` on `[a, b]`, the
    /// initial datum compatible with the boundary condition, and `T > 0`.
    /// Negated comparisons so NaN coefficients are rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(
        domain_left: S,
        domain_right: S,
        diffusion: CoefficientFn<S>,
        reaction: CoefficientFn<S>,
        source: SourceFn<S>,
        initial: CoefficientFn<S>,
        final_time: S,
    ) -> Result<Self> {
        if !(domain_left < domain_right) {
            return Err(Error::invalid("domain", "requires a < b"));
        }
        if !(final_time > S::zero()) {
            return Err(Error::invalid("final_time", "requires T > 0"));
        }
        let width = domain_right - domain_left;
        let mut initial_scale = S::zero();
        for k in 0..VALIDATION_SAMPLES {
            let x = domain_left + width * S::of_usize(k) / S::of_usize(VALIDATION_SAMPLES - 1);
            if !(diffusion(x) > S::zero()) {
                return Err(Error::invalid("diffusion", format!("d({x}) <= 0")));
            }
            if initial(x).abs() > initial_scale {
                initial_scale = initial(x).abs();
            }
            if reaction(x) < S::zero() {
                return Err(Error::invalid("reaction", format!("r({x}) < 0")));
            }
        }
        // Compatibility of the initial datum, up to rounding of the supplied
        // closure at the endpoints (scaled with the scalar's precision).
        let tol = S::epsilon() * S::of(100.0) * (S::one() + initial_scale);
        for x in [domain_left, domain_right] {
            if initial(x).abs() > tol {
                return Err(Error::invalid(
                    "initial",
                    format!("u0({x}) = {} does not vanish on the boundary", initial(x)),
                ));
            }
        }
        Ok(Problem {
            domain_left,
            domain_right,
            diffusion,
            reaction,
            source,
            initial,
            final_time,
        })
    }

    pub fn domain_left(&self) -> S {
        self.domain_left
    }

    pub fn domain_right(&self) -> S {
        self.domain_right
    }

    pub fn domain_width(&self) -> S {
        self.domain_right - self.domain_left
    }

    pub fn final_time(&self) -> S {
        self.final_time
    }

    pub fn diffusion(&self, x: S) -> S {
        (self.diffusion)(x)
    }

    pub fn reaction(&self, x: S) -> S {
        (self.reaction)(x)
    }

    pub fn source(&self, x: S, t: S) -> S {
        (self.source)(x, t)
    }

    pub fn initial(&self, x: S) -> S {
        (self.initial)(x)
    }
}

/// Constants of the kernel bounds for the evolution operator:
/// `phi0(t) = kappa0 e^{-gamma t}` dominates the kernel's spatial L1 norm and
/// `phi1(t) = (kappa1/t + kappa1') e^{-gamma t}` its time derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenBounds<S: Real> {
    pub kappa0: S,
    pub kappa1: S,
    pub kappa1_prime: S,
    pub gamma: S,
}

impl<S: Real> GreenBounds<S> {
    // Negated comparisons so NaN constants are rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(kappa0: S, kappa1: S, kappa1_prime: S, gamma: S) -> Result<Self> {
        if !(kappa0 > S::zero()) {
            return Err(Error::invalid("kappa0", "must be positive"));
        }
        for (name, v) in [("kappa1", kappa1), ("kappa1_prime", kappa1_prime), ("gamma", gamma)] {
            if !(v >= S::zero()) {
                return Err(Error::invalid("kernel bound constant", format!("{name} < 0")));
            }
        }
        Ok(GreenBounds {
            kappa0,
            kappa1,
            kappa1_prime,
            gamma,
        })
    }

    /// `phi0(t) = kappa0 e^{-gamma t}`, valid for `t >= 0`.
    pub fn phi0(&self, t: S) -> S {
        debug_assert!(t >= S::zero());
        self.kappa0 * (-self.gamma * t).exp()
    }

    /// `phi1(t) = (kappa1/t + kappa1') e^{-gamma t}`; unbounded at `t = 0`
    /// when `kappa1 > 0`.
    pub fn phi1(&self, t: S) -> Result<S> {
        if t <= S::zero() && self.kappa1 > S::zero() {
            return Err(Error::Phi1AtZero);
        }
        let rational = if self.kappa1 > S::zero() {
            self.kappa1 / t + self.kappa1_prime
        } else {
            self.kappa1_prime
        };
        Ok(rational * (-self.gamma * t).exp())
    }
}

/// Strictly increasing time levels `t_0 = 0 < t_1 < ... < t_M = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMesh<S: Real> {
    nodes: Vec<S>,
}

impl<S: Real> TimeMesh<S> {
    /// Uniform mesh with `m` steps of size `T/m`.
    pub fn uniform(final_time: S, m: usize) -> Self {
        assert!(m >= 1 && final_time > S::zero());
        let nodes = (0..=m)
            .map(|j| final_time * S::of_usize(j) / S::of_usize(m))
            .collect();
        TimeMesh { nodes }
    }

    /// Arbitrary (e.g. graded) levels; checks ordering and `t_0 = 0`.
    pub fn from_nodes(nodes: Vec<S>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::invalid("time mesh", "needs at least one step"));
        }
        if nodes[0] != S::zero() {
            return Err(Error::invalid("time mesh", "must start at t = 0"));
        }
        if !nodes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("time mesh", "levels must be strictly increasing"));
        }
        Ok(TimeMesh { nodes })
    }

    /// Number of steps `M`.
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn node(&self, j: usize) -> S {
        self.nodes[j]
    }

    pub fn nodes(&self) -> &[S] {
        &self.nodes
    }

    /// Step size `tau_j = t_j - t_{j-1}`, `j = 1..=M`.
    pub fn tau(&self, j: usize) -> S {
        debug_assert!(j >= 1 && j <= self.steps());
        self.nodes[j] - self.nodes[j - 1]
    }

    pub fn final_time(&self) -> S {
        *self.nodes.last().unwrap()
    }
}

/// The built-in reaction-diffusion benchmark on `(-1, 1) x (0, 1]`:
/// diffusion 1, reaction `5x + 6`, source `e^{-4t} + cos(pi (x+t)^2)`,
/// initial `sin(pi (1+x) / 2)`, together with its kernel bound constants
/// `kappa0 = 1`, `gamma = 1/2`, `kappa1 = 3/2^{3/2}`, `kappa1' = 0`.
pub fn builtin_test_problem<S: Real>() -> (Problem<S>, GreenBounds<S>) {
    let problem = Problem::new(
        S::of(-1.0),
        S::one(),
        Box::new(|_| S::one()),
        Box::new(|x| S::of(5.0) * x + S::of(6.0)),
        Box::new(|x: S, t: S| {
            let arg = S::PI() * (x + t) * (x + t);
            (S::of(-4.0) * t).exp() + arg.cos()
        }),
        Box::new(|x: S| (S::PI() * (S::one() + x) / S::two()).sin()),
        S::one(),
    )
    .expect("built-in problem data is valid");
    let bounds = GreenBounds::new(
        S::one(),
        S::of(3.0) / S::two().powf(S::of(1.5)),
        S::zero(),
        S::half(),
    )
    .expect("built-in kernel constants are valid");
    (problem, bounds)
}

/// Problems selectable by name from the command line.
pub fn problem_by_name<S: Real>(name: &str) -> Option<(Problem<S>, GreenBounds<S>)> {
    match name {
        "paper" => Some(builtin_test_problem()),
        _ => None,
    }
}
