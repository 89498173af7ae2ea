#include "fbrc/baselines.hpp"

#include <cmath>

namespace fbrc {

using ad::Matrix;
using ad::Var;

std::string to_string(CqlProposal p) {
  switch (p) {
    case CqlProposal::kUniform: return "uniform";
    case CqlProposal::kPolicy: return "policy";
    case CqlProposal::kMixed: return "mixed";
  }
  return "mixed";
}

CqlProposal cql_proposal_from_string(const std::string& s) {
  if (s == "uniform") return CqlProposal::kUniform;
  if (s == "policy") return CqlProposal::kPolicy;
  if (s == "mixed") return CqlProposal::kMixed;
  throw std::invalid_argument("unknown CQL proposal '" + s + "'");
}

void CqlConfig::validate() const {
  if (!(weight >= 0)) throw std::invalid_argument("CqlConfig: weight must be >= 0");
  if (samples < 1) throw std::invalid_argument("CqlConfig: samples must be >= 1");
}

namespace {

// Row i*n + j holds state i.
Matrix repeat_each(const Matrix& m, int n) {
  Matrix out(m.rows() * n, m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.middleRows(i * n, n).rowwise() = m.row(i);
  return out;
}

struct Proposal {
  Matrix actions;      // (B*n) x d
  Matrix log_density;  // (B*n) x 1
};

Proposal draw_uniform(Eigen::Index rows, Eigen::Index d, Rng& rng) {
  return {uniform(rows, d, -1.0, 1.0, rng),
          Matrix::Constant(rows, 1, -static_cast<double>(d) * std::log(2.0))};
}

Proposal draw_policy(const PolicyModel& policy, const Matrix& reps, Rng& rng) {
  auto [a, lp] = policy.sample_with_log_prob(reps, rng);
  return {a, lp};
}

}  // namespace

Var cql_log_integral(const CriticPair& critic, QSelect which, const Matrix& states,
                     const Matrix& actions, const Matrix& log_proposal, int n) {
  if (!log_proposal.allFinite()) {
    throw std::domain_error("cql_penalty: zero proposal density at a sampled action");
  }
  const Eigen::Index b = states.rows();
  if (actions.rows() != b * n) throw ad::ShapeError("cql_log_integral: expected B*n actions");
  Var q = critic.q_value(ad::constant(repeat_each(states, n)), ad::constant(actions), which);
  Var w = ad::sub(q, ad::constant(log_proposal));
  return ad::add_scalar(ad::logsumexp_cols(ad::reshape(w, b, n)), -std::log(double(n)));
}

Var cql_penalty(const CriticPair& critic, const Batch& batch, const PolicyModel& policy,
                const CqlConfig& config, Rng& rng) {
  config.validate();
  const int n = config.samples;
  const Eigen::Index b = batch.s.rows();
  const Eigen::Index d = batch.a.cols();
  const Matrix reps = repeat_each(batch.s, n);

  Matrix actions, log_q;
  int per_state = n;
  switch (config.proposal) {
    case CqlProposal::kUniform: {
      auto u = draw_uniform(b * n, d, rng);
      actions = u.actions;
      log_q = u.log_density;
      break;
    }
    case CqlProposal::kPolicy: {
      auto p = draw_policy(policy, reps, rng);
      actions = p.actions;
      log_q = p.log_density;
      break;
    }
    case CqlProposal::kMixed: {
      auto u = draw_uniform(b * n, d, rng);
      auto p = draw_policy(policy, reps, rng);
      // Interleave per state: n uniform rows then n policy rows. Each half is
      // an IS estimate; averaging them halves every weight.
      per_state = 2 * n;
      actions.resize(b * per_state, d);
      log_q.resize(b * per_state, 1);
      for (Eigen::Index i = 0; i < b; ++i) {
        actions.middleRows(i * per_state, n) = u.actions.middleRows(i * n, n);
        actions.middleRows(i * per_state + n, n) = p.actions.middleRows(i * n, n);
        log_q.middleRows(i * per_state, n) = u.log_density.middleRows(i * n, n);
        log_q.middleRows(i * per_state + n, n) = p.log_density.middleRows(i * n, n);
      }
      break;
    }
  }

  Var s = ad::constant(batch.s);
  Var a = ad::constant(batch.a);
  Var total;
  for (QSelect which : {QSelect::kOnline1, QSelect::kOnline2}) {
    Var lse = cql_log_integral(critic, which, batch.s, actions, log_q, per_state);
    Var gap = ad::mean(ad::sub(lse, critic.q_value(s, a, which)));
    total = total.defined() ? ad::add(total, gap) : gap;
  }
  return ad::scale(total, 0.5);
}

KlIdentity cql_kl_identity_check(const Eigen::VectorXd& q, const Eigen::VectorXd& mu) {
  if (q.size() != mu.size() || q.size() < 1) throw std::invalid_argument("KL check: sizes");
  if ((mu.array() <= 0).any()) throw std::invalid_argument("KL check: mu must be positive");
  const Eigen::Index n = q.size();
  Var qv = ad::input(Matrix(q.transpose()), true);  // 1 x n
  Var m = ad::constant(Matrix(mu.transpose()));
  Var log_m = ad::constant(Matrix(mu.array().log().matrix().transpose()));

  // KL(mu || softmax Q), enumerated term by term.
  Var log_softmax = ad::sub(qv, ad::broadcast_to(ad::logsumexp_cols(qv), 1, n));
  Var kl = ad::sum(ad::mul(m, ad::sub(log_m, log_softmax)));
  // The CQL form; E_mu[log mu] is a constant in Q.
  Var cql = ad::sub(ad::logsumexp_cols(qv), ad::sum(ad::mul(m, qv)));
  const double entropy_term = (mu.array() * mu.array().log()).sum();

  KlIdentity out;
  out.kl = kl.item();
  out.expanded = cql.item() + entropy_term;
  out.value_residual = std::abs(out.kl - out.expanded);
  Matrix g_kl = ad::grad(kl, qv).value();
  Matrix g_cql = ad::grad(cql, qv).value();
  out.gradient_residual = (g_kl - g_cql).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace fbrc
