#include "fbrc/behavior.hpp"

#include "fbrc/adam.hpp"
#include "fbrc/binary_io.hpp"

#include <algorithm>
#include <cmath>

namespace fbrc {

using ad::Matrix;
using ad::Var;

void BCConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("BCConfig: steps must be positive");
  if (!(base_lr > 0)) throw std::invalid_argument("BCConfig: base_lr must be positive");
  if (!(decay_factor > 1)) throw std::invalid_argument("BCConfig: decay_factor must exceed 1");
  if (batch_size < 1) throw std::invalid_argument("BCConfig: batch_size must be positive");
  if (components < 1) throw std::invalid_argument("BCConfig: components must be positive");
  double prev = 0.0;
  for (double m : lr_milestones) {
    if (!(m > prev && m < 1.0)) {
      throw std::invalid_argument("BCConfig: milestones must be strictly increasing in (0, 1)");
    }
    prev = m;
  }
}

double BCConfig::lr_at(long step) const {
  double lr = base_lr;
  for (double m : lr_milestones) {
    if (static_cast<double>(step) >= m * static_cast<double>(steps)) lr /= decay_factor;
  }
  return lr;
}

BehaviorModel BehaviorModel::mixture(const MlpArch& arch, int components, int action_dim,
                                     ParameterSet trunk) {
  if (arch.output != components * (1 + 2 * action_dim)) {
    throw std::invalid_argument("mixture head width does not match K and action dim");
  }
  BehaviorModel m;
  m.family_ = BehaviorFamily::kMixture;
  m.arch_ = arch;
  m.components_ = components;
  m.action_dim_ = action_dim;
  m.trunk_ = std::move(trunk);
  return m;
}

BehaviorModel BehaviorModel::laplace(dist::LaplaceParams params) {
  if (!(params.scale > 0)) throw std::invalid_argument("Laplace scale must be positive");
  BehaviorModel m;
  m.family_ = BehaviorFamily::kLaplace;
  m.components_ = 0;
  m.action_dim_ = 1;
  m.laplace_ = params;
  return m;
}

dist::MixtureParams BehaviorModel::mixture_params(const Var& states) const {
  if (family_ != BehaviorFamily::kMixture) throw std::logic_error("not a mixture model");
  Var head = mlp_apply(trunk_, states, arch_);
  const int k = components_;
  const int kd = k * action_dim_;
  dist::MixtureParams p;
  p.components = k;
  p.action_dim = action_dim_;
  p.logits = ad::slice_cols(head, 0, k);
  p.means = ad::slice_cols(head, k, kd);
  p.log_stds = dist::bound_log_std(ad::slice_cols(head, k + kd, kd));
  return p;
}

Var BehaviorModel::log_prob(const Var& states, const Var& actions) const {
  if (actions.cols() != action_dim_) throw ad::ShapeError("behavior log_prob: action width");
  if (family_ == BehaviorFamily::kLaplace) return dist::log_prob(laplace_, actions);
  return dist::log_prob(mixture_params(states), actions);
}

Matrix BehaviorModel::log_prob_values(const Matrix& states, const Matrix& actions) const {
  ad::NoGradGuard no_grad;
  return log_prob(ad::constant(states), ad::constant(actions)).value();
}

Matrix BehaviorModel::mode(const Matrix& states) const {
  ad::NoGradGuard no_grad;
  if (family_ == BehaviorFamily::kLaplace) {
    return Matrix::Constant(states.rows(), 1, std::clamp(laplace_.location, -1.0, 1.0));
  }
  auto p = mixture_params(ad::constant(states));
  const int d = action_dim_;
  Matrix best(states.rows(), d);
  Eigen::VectorXd best_ll = Eigen::VectorXd::Constant(states.rows(), -INFINITY);
  for (int c = 0; c < components_; ++c) {
    Matrix cand = p.means.value().middleCols(c * d, d).array().tanh().matrix();
    Matrix ll = dist::log_prob(p, ad::constant(cand)).value();
    for (Eigen::Index i = 0; i < states.rows(); ++i) {
      if (ll(i, 0) > best_ll(i)) {
        best_ll(i) = ll(i, 0);
        best.row(i) = cand.row(i);
      }
    }
  }
  return best;
}

void BehaviorModel::freeze() { trunk_ = trunk_.frozen(); }

std::vector<CheckpointSection> BehaviorModel::to_sections() const {
  if (family_ == BehaviorFamily::kMixture) {
    return {network_section("BHVM", arch_, trunk_, static_cast<std::uint32_t>(components_))};
  }
  CheckpointSection s;
  s.tag = "BHVL";
  s.values = {laplace_.location, laplace_.scale, laplace_.truncated ? 1.0 : 0.0};
  return {s};
}

BehaviorModel BehaviorModel::from_sections(const std::vector<CheckpointSection>& sections) {
  if (has_section(sections, "BHVL")) {
    const auto& s = find_section(sections, "BHVL");
    if (s.values.size() != 3) throw io::FormatError("BHVL section must hold 3 values");
    return laplace({s.values[0], s.values[1], s.values[2] != 0.0});
  }
  const auto& s = find_section(sections, "BHVM");
  MlpArch arch = arch_of(s);
  const int k = static_cast<int>(s.components);
  if (k < 1 || arch.output % k != 0 || (arch.output / k - 1) % 2 != 0) {
    throw io::FormatError("BHVM section: head width inconsistent with K");
  }
  const int d = (arch.output / k - 1) / 2;
  Rng unused(0);
  ParameterSet trunk = init_mlp(arch, unused);
  trunk.assign(s.values);
  auto m = mixture(arch, k, d, std::move(trunk));
  m.freeze();
  return m;
}

void BehaviorModel::save(const std::filesystem::path& path) const {
  write_checkpoint(path, to_sections());
}

BehaviorModel BehaviorModel::load(const std::filesystem::path& path) {
  return from_sections(read_checkpoint(path));
}

BehaviorModel train_bc(const Dataset& data, const BCConfig& config, std::uint64_t seed) {
  config.validate();
  data.validate();
  const int n = data.info.state_dim;
  const int d = data.info.action_dim;
  const int k = config.components;
  Rng rng(seed);

  MlpArch arch;
  arch.input = n;
  arch.hidden = config.hidden;
  arch.output = k * (1 + 2 * d);
  arch.activation = Activation::kRelu;
  BehaviorModel model = BehaviorModel::mixture(arch, k, d, init_mlp(arch, rng));
  model.config = config;

  const double target = config.target_entropy.value_or(-static_cast<double>(d));
  ParameterSet log_alpha;
  log_alpha.add("log_alpha", Matrix::Constant(1, 1, std::log(config.initial_temperature)));
  Adam opt({.lr = config.base_lr});
  Adam alpha_opt({.lr = config.base_lr});

  // Fixed evaluation subset for the log-likelihood trace.
  std::vector<std::size_t> eval_idx;
  for (std::size_t i = 0; i < std::min<std::size_t>(data.size(), 2048); ++i) {
    eval_idx.push_back(i * data.size() / std::min<std::size_t>(data.size(), 2048));
  }
  const Batch eval_batch = make_batch(data, eval_idx);
  auto eval_loglik = [&] {
    ad::NoGradGuard no_grad;
    return model.log_prob(ad::constant(eval_batch.s), ad::constant(eval_batch.a)).value().mean();
  };

  const long every = std::max<long>(1, config.steps / std::max(1, config.checkpoints));
  double running = 0.0;
  long running_n = 0;
  try {
    model.loglik_trace.push_back(eval_loglik());
    for (long step = 0; step < config.steps; ++step) {
      const double lr = config.lr_at(step);
      opt.set_lr(lr);
      alpha_opt.set_lr(lr);
      model.lr_trace.push_back(lr);

      Batch batch = sample_batch(data, config.batch_size, rng);
      Var s = ad::constant(batch.s);
      auto mp = model.mixture_params(s);
      Var nll = ad::neg(ad::mean(dist::log_prob(mp, ad::constant(batch.a))));
      Var sampled = dist::sample_mixture(mp, rng);
      Var sample_logp = ad::mean(dist::log_prob(mp, sampled));
      const double alpha = std::exp(log_alpha[0].value()(0, 0));
      Var loss = ad::add(nll, ad::scale(sample_logp, alpha));
      opt.step(model.trunk(), gradient_values(loss, model.trunk()));

      const double entropy = -sample_logp.value()(0, 0);
      // d/d(log alpha) of alpha * (entropy - target)
      alpha_opt.step(log_alpha, {Matrix::Constant(1, 1, alpha * (entropy - target))});
      model.temperature_trace.push_back(alpha);

      if (step == 0) model.loss_trace.push_back(loss.value()(0, 0));
      running += loss.value()(0, 0);
      ++running_n;
      if ((step + 1) % every == 0 || step + 1 == config.steps) {
        model.loss_trace.push_back(running / static_cast<double>(running_n));
        model.loglik_trace.push_back(eval_loglik());
        running = 0.0;
        running_n = 0;
      }
    }
  } catch (const ad::NonFiniteError& e) {
    throw BCDivergenceError(std::string("behavior cloning diverged: ") + e.what());
  } catch (const std::runtime_error& e) {
    if (std::string(e.what()).find("non-finite") != std::string::npos) {
      throw BCDivergenceError(std::string("behavior cloning diverged: ") + e.what());
    }
    throw;
  }
  model.freeze();
  return model;
}

BehaviorModel fit_laplace(const Dataset& data) {
  data.validate();
  if (data.info.action_dim != 1) throw std::invalid_argument("fit_laplace needs 1-D actions");
  std::vector<double> a;
  a.reserve(data.size());
  for (const auto& t : data.transitions) a.push_back(t.a[0]);
  std::sort(a.begin(), a.end());
  const std::size_t n = a.size();
  const double median = n % 2 ? a[n / 2] : 0.5 * (a[n / 2 - 1] + a[n / 2]);
  double mad = 0.0;
  for (double v : a) mad += std::abs(v - median);
  mad /= static_cast<double>(n);
  return BehaviorModel::laplace({median, std::max(mad, 1e-6), true});
}

double bc_eval_loglik(const BehaviorModel& model, const Dataset& data) {
  double total = 0.0;
  constexpr std::size_t kChunk = 4096;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(data.size(), start + kChunk); ++i) idx.push_back(i);
    Batch b = make_batch(data, idx);
    total += model.log_prob_values(b.s, b.a).sum();
  }
  return total / static_cast<double>(data.size());
}

}  // namespace fbrc
