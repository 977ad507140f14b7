#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "awpo/policy.hpp"
#include "json.hpp"

namespace awpo {

// Score covariance of an enumerable policy. The softmax blocks make the raw
// matrix rank-deficient (adding a constant to a block's logits changes
// nothing), so the inverse square root is built from the regularized matrix.
struct FisherBundle {
  Eigen::MatrixXd fisher;     // unregularized E[Z Z^T]
  double lambda_max = 0.0;    // top eigenvalue of the unregularized matrix
  Eigen::MatrixXd inv_sqrt;   // (fisher + lambda_reg I)^{-1/2}
  double lambda_reg = 1e-8;
};

struct TheoryConfig {
  double smoothness = 0.0;        // curvature constant; 0 requests an estimate
  double smoothness_safety = 2.0; // multiplier on the estimated curvature
  int batch_size = 8;             // B in the mini-batch gradient estimator
  double learning_rate = 0.05;    // step size in the improvement bound
  long mc_samples = 100000;       // Monte Carlo draw count
  double tolerance = 1e-9;        // slack for exact-enumeration inequalities
  double lambda_reg = 1e-8;
  long trials = 100;              // randomized audit trials
  std::uint64_t seed = 2025;

  void validate() const;  // throws ConfigError naming the offending field
};

struct BoundReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;
  double margin = 0.0;  // rhs - lhs; for aggregates, the minimum over trials
  long trials = 0;

  nlohmann::json to_json() const;
};

// Fixed per-(prompt, action) advantage values; blocks match the policy's.
using AdvantageTable = std::vector<std::vector<double>>;

FisherBundle fisher(const TabularPolicy& policy, double lambda_reg = 1e-8);

// J(theta) = E[adv], with expectation over uniform prompts and policy actions.
double expected_value(const TabularPolicy& policy, const AdvantageTable& adv);
// grad J = E[Z adv], exact for a fixed table.
std::vector<double> reinforce_gradient(const TabularPolicy& policy,
                                       const AdvantageTable& adv);
// V = E[adv^2]
double advantage_variance(const TabularPolicy& policy, const AdvantageTable& adv);
// max over (prompt, action) of the score vector norm
double score_norm_bound(const TabularPolicy& policy);
// Var of the B-sample mini-batch estimator, exact: (E|Z adv|^2 - |grad|^2) / B
double gradient_noise_variance(const TabularPolicy& policy,
                               const AdvantageTable& adv, int batch_size);

// |E[U adv]| / sqrt(d V) with U the regularized-whitened score. Throws
// DegenerateAdvantageError when V is zero.
double rho(const TabularPolicy& policy, const AdvantageTable& adv,
           const FisherBundle& bundle);

// adv(g,a) = <Z(g,a), top eigenvector>; makes the gradient-norm bound nearly
// tight, which the tests use as a worst-case probe.
AdvantageTable advantage_aligned_with_fisher(const TabularPolicy& policy,
                                             const FisherBundle& bundle);

// Curvature estimate: spectral norms of finite-difference Hessians at the
// current point and along sampled update segments, times the safety factor.
double estimate_smoothness(const TabularPolicy& policy, const AdvantageTable& adv,
                           const TheoryConfig& cfg, Rng& rng);

// One-step improvement bound, Monte Carlo over update draws. lhs is the mean
// observed improvement; rhs carries a 3-sigma statistical allowance.
BoundReport check_lemma1(const TabularPolicy& policy, const AdvantageTable& adv,
                         const TheoryConfig& cfg, Rng& rng);

// Per-draw descent-lemma residuals. A violation means the observed improvement
// exceeded what the curvature constant allows along that segment, so failures
// indict the smoothness estimate; the relaxed count doubles it.
struct SmoothnessAudit {
  long draws = 0;
  long violations = 0;
  long violations_relaxed = 0;
  double smoothness = 0.0;
  double worst_excess = 0.0;
};
SmoothnessAudit audit_pointwise_smoothness(const TabularPolicy& policy,
                                           const AdvantageTable& adv,
                                           const TheoryConfig& cfg, Rng& rng,
                                           long draws, double relax_factor = 2.0);

// Second-moment identity |grad|^2 + Var = E|X|^2, both sides enumerated by
// independent routes (B = 1).
BoundReport check_variance_identity(const TabularPolicy& policy,
                                    const AdvantageTable& adv,
                                    const TheoryConfig& cfg);
// Same identity at the configured batch size, Monte Carlo within 3 sigma.
BoundReport check_variance_mc(const TabularPolicy& policy,
                              const AdvantageTable& adv, const TheoryConfig& cfg,
                              Rng& rng);

// |grad J|^2 <= (lambda_max + lambda_reg) d rho^2 V
BoundReport check_lemma2(const TabularPolicy& policy, const AdvantageTable& adv,
                         const TheoryConfig& cfg);
// Var(ghat) <= G_inf^2 V / B
BoundReport check_lemma3(const TabularPolicy& policy, const AdvantageTable& adv,
                         const TheoryConfig& cfg);
// smoothness form of the improvement bound chained through the two bounds above
BoundReport check_theorem1(const TabularPolicy& policy, const AdvantageTable& adv,
                           const TheoryConfig& cfg);
// Upper-bound difference between two advantage tables; must be positive when
// rho_b^2 V_b > rho_a^2 V_a and V_b >= V_a. satisfied is also true (trials = 0)
// when the pair does not meet the precondition.
BoundReport check_theorem2_pair(const TabularPolicy& policy,
                                const AdvantageTable& adv_a,
                                const AdvantageTable& adv_b,
                                const TheoryConfig& cfg);

struct AuditResult {
  std::vector<BoundReport> reports;
  long skipped_degenerate = 0;

  bool all_exact_satisfied() const;
  nlohmann::json to_json() const;
};

// Randomized audit over small random policies and advantage tables: every
// exact-enumeration bound above plus the Monte Carlo checks, aggregated into
// per-bound minimum margins. Deterministic given cfg.seed.
AuditResult run_bounds_audit(const TheoryConfig& cfg);

// Random policy with dimension at most max_dim (blocks of 2..4 actions).
TabularPolicy random_policy(Rng& rng, std::size_t max_dim = 12);
AdvantageTable random_advantage_table(const TabularPolicy& policy, Rng& rng);

}  // namespace awpo
