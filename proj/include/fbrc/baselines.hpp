#pragma once

// CQL critic penalty and the CQL-as-KL identity. The BRAC and SAC actors live
// in actors.hpp; full baseline runs go through run_baseline in harness.hpp.

#include "fbrc/critics.hpp"

#include <Eigen/Dense>

namespace fbrc {

enum class CqlProposal { kUniform, kPolicy, kMixed };

std::string to_string(CqlProposal p);
CqlProposal cql_proposal_from_string(const std::string& s);

struct CqlConfig {
  double weight = 5.0;
  int samples = 16;  // per proposal and state
  CqlProposal proposal = CqlProposal::kMixed;

  void validate() const;
};

/// Mean over the batch of [log-integral of exp Q over the action box - Q(s,
/// a_data)], the log-integral estimated by importance sampling. "mixed" draws
/// `samples` actions from each of uniform and pi and weights both halves by
/// 1/2. Averaged over the twin critics. Unweighted.
ad::Var cql_penalty(const CriticPair& critic, const Batch& batch, const PolicyModel& policy,
                    const CqlConfig& config, Rng& rng);

/// Importance-sampled log of the integral of exp(Q(s, .)) for one critic.
/// `actions` holds `n` rows per state (state-major); `log_proposal` the
/// matching proposal log-densities.
ad::Var cql_log_integral(const CriticPair& critic, QSelect which, const ad::Matrix& states,
                         const ad::Matrix& actions, const ad::Matrix& log_proposal, int n);

struct KlIdentity {
  double kl = 0.0;        // KL(mu || softmax Q), enumerated
  double expanded = 0.0;  // logsumexp(Q) - E_mu Q + E_mu log mu
  double value_residual = 0.0;
  double gradient_residual = 0.0;  // max |dKL/dQ - d[lse(Q) - E_mu Q]/dQ|
};

/// Grid check of KL(mu || exp Q / Z) = lse(Q) - E_mu[Q] + E_mu[log mu]; mu
/// must be positive and sum to 1.
KlIdentity cql_kl_identity_check(const Eigen::VectorXd& q, const Eigen::VectorXd& mu);

}  // namespace fbrc
