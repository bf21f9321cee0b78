use super::config::ExperimentKind;

/// What an experiment exercises and the acceptance window it targets.
pub fn describe(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Simulate => "\
simulate: Euler-Maruyama integration of the mean-field Langevin particle
system (squared loss, Gaussian confinement at temperature lambda, muP
initialization). Writes particle snapshots and the held-out L2 risk.
Targets: a relu network trains a linear target (d=2, N=256) to risk below
0.05 of the target norm; with the risk disabled, per-coordinate variance
relaxes to 1 within 3 Monte Carlo standard errors (N=4096, T=20, lambda=0.1).
",
        ExperimentKind::Couple => "\
couple: synchronous coupling of the N-particle system with N nonlinear
copies driven by a width-N_ref reference system, sharing initial points,
Brownian increments and batches. Reports the synchronous squared
displacement and the exact assignment W2^2 at every recorded time.
Targets: propagation-of-chaos slope of the mean synchronous bound against N
in [-1.35, -0.65] with r^2 >= 0.9 (relu, linear, d=2, lambda=0.05, T=0.5,
N in 16..256, N_ref=4096, 8 repetitions); exact W2^2 never above the
synchronous bound by more than 1e-12; weighted moment norm (w*, orders <= 4)
never above 3 times its initial value.
",
        ExperimentKind::Moments => "\
moments: exact even moments of the initial law, the moment-growth sequence
g0(n), the reciprocal weights w*(n) = 1/g0(n), submultiplicativity, and the
maximality witness for a candidate weight.
Targets: Gaussian moments equal (2n-1)!! for one coordinate; w*(n) sqrt(n)
within [0.3, 3] for n <= 12; divergence flagged for constant weights and
not for w*.
",
        ExperimentKind::Dictionary => "\
dictionary: normalized Hermite expansion of a one-dimensional link or
activation, thresholding at c_sigma * lambda, the sparse depth S_up and the
tail-plus-entropy quantity kappa.
Targets: orthonormality within 1e-10 up to degree 12; z^2 expands to
(1, sqrt 2) within 1e-8; Parseval residual within 1e-6; retained count for
exponentially decaying coefficients equals 1 + floor(log(A/(c lambda))/tau).
",
        ExperimentKind::Invariants => "\
invariants: the architecture table of effective dimension, orbit depth,
sparse depth and residual for relu, tanh and monomial activations against
linear, piecewise-linear, analytic, polynomial, high-degree Hermite and
multi-index targets, with the per-atom statistical factor d_eff + 2 - D_orb.
Targets: canonicalization idempotent; features invariant under relu
rescaling, tanh sign flip and monomial homogeneity within 1e-10.
",
        ExperimentKind::Decompose => "\
decompose: estimates the four components of the error decomposition
(propagation of chaos over widths, optimization decay over time,
statistical excess over sample sizes, sparse tail over lambda), the
cross-term bookkeeping bound and the schedule clauses.
Targets: chaos slope in [-1.35, -0.65]; statistical slope in [-1.4, -0.5]
with r^2 >= 0.85; optimization decay rate positive with r^2 >= 0.8;
kappa of exponential coefficients shaped like lambda^2 + lambda log(1/lambda).
",
        ExperimentKind::Rates => "\
rates: evaluates the predicted component rates for the balanced,
polynomial-tail, sigmoid exponential-tail and bounded-activation regimes,
and checks schedules against the compatibility clauses (entropy horizon,
statistical, contraction).
Targets: agreement with direct substitution to 1e-12; example schedules
reproduce their pass/fail patterns.
",
        ExperimentKind::Floor => "\
floor: trains a monomial(k) network on the degree-m Hermite target. For
m > k the target is orthogonal to every feature and no width, sample size
or training time gets below the non-realizability floor ||f*||^2 = 1.
Targets: k=2, m=4 stalls at risk >= 0.8; k=3, m=3 is realizable and reaches
risk < 0.3.
",
    }
}
