// End-to-end acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,2,...] [--work DIR]
//
// Exit status is non-zero when any selected criterion fails.

#include "fbrc/critics.hpp"
#include "fbrc/harness.hpp"
#include "fbrc/online_sac.hpp"
#include "test_util.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>

using namespace fbrc;
using ad::Matrix;
using ad::Var;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

// ---- 1. Fisher identity ----

// Central difference of a grid function; used so the divergence side never
// sees the autodiff offset gradient.
oracle::GridFn fd_score(oracle::GridFn f, double h = 1e-5) {
  return [f, h](const Eigen::VectorXd& x) {
    Eigen::VectorXd up = x.array() + h, down = x.array() - h;
    return Eigen::VectorXd((f(up) - f(down)) / (2 * h));
  };
}

Verdict fisher_identity() {
  const auto grid = oracle::Grid1D::action_box(4001);
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    auto c = test_util::FisherCase::random(rng);
    // log pi_ebm = O + log mu - log Z; the constant drops out of the difference.
    oracle::GridFn q = [&](const Eigen::VectorXd& a) { return Eigen::VectorXd(c.o(a) + c.log_mu(a)); };
    oracle::GridFn log_mu = [&](const Eigen::VectorXd& a) { return c.log_mu(a); };
    auto r = oracle::fisher_identity_check(q, fd_score(q), fd_score(log_mu),
                                           [&](const Eigen::VectorXd& a) { return c.o_grad(a); }, grid);
    worst = std::max(worst, r.residual);
  }
  return {worst < 1e-6,
          fmt("max |D_F(pi_ebm || mu) - E_pi_ebm[O'^2]| = %.3g over 50 cases (scores by differences)", worst)};
}

// ---- 2. CQL as KL ----

Verdict kl_identity() {
  Rng rng(102);
  double value = 0.0, gradient = 0.0;
  for (int i = 0; i < 50; ++i) {
    std::uniform_int_distribution<int> size(2, 201);
    const int n = size(rng);
    Eigen::VectorXd q = 3.0 * standard_normal(n, 1, rng);
    Eigen::VectorXd mu = oracle::boltzmann_on_grid(2.0 * standard_normal(n, 1, rng));
    auto r = cql_kl_identity_check(q, mu);
    value = std::max(value, r.value_residual);
    gradient = std::max(gradient, r.gradient_residual);
  }
  return {value < 1e-10 && gradient < 1e-10,
          fmt("max value residual %.3g, max Q-gradient residual %.3g over 50 grids", value, gradient)};
}

// ---- 3 and 4. Toy bandit landscapes ----

const std::vector<std::uint64_t> kSeeds{0, 1, 2, 3, 4};

double value_at(const Landscape& l, const Eigen::VectorXd& col, double a) {
  Eigen::Index best = 0;
  (l.actions.array() - a).abs().minCoeff(&best);
  return col(best);
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt("%+.3f", x);
  return s;
}

Verdict bandit_fisher(const fs::path& work) {
  const auto grid = oracle::Grid1D(-1.0, 1.0, 2001);
  int ok = 0, total = 0;
  std::string detail;
  for (double lambda : {0.1, 1.0}) {
    for (auto seed : kSeeds) {
      Dataset data = env::gen_bandit_dataset(seed);
      RunConfig c;
      c.seed = seed;
      c.steps = default_steps(env::EnvId::kBandit);
      c.critic.lambda = lambda;
      // The toy fit penalizes the offset under a uniform action distribution.
      c.critic.penalty_source = PenaltySource::kUniform;
      c.out_dir = (work / fmt("bandit_fbrc_l%g_s%d", lambda, int(seed))).string();
      RunResult r = run_training(c, data);
      ++total;
      if (r.status != RunStatus::kCompleted) {
        detail += fmt(" [l=%g s=%d collapsed]", lambda, int(seed));
        continue;
      }
      Landscape l = export_landscape(*r.behavior, grid, {{Algo::kFisherBrc, lambda, r.critic}});
      l.write_csv(fs::path(c.out_dir) / "landscape.csv");
      const auto& col = l.columns.back();
      auto maxima = argmax_actions(l.actions, col);
      bool good = true;
      for (double a : maxima) good = good && std::abs(a) >= 0.20 - 1e-9 && std::abs(a) <= 0.30 + 1e-9;
      good = good && value_at(l, col, 0.75) < value_at(l, col, 0.25) &&
             value_at(l, col, -0.75) < value_at(l, col, -0.25);
      ok += good;
      detail += fmt(" [l=%g s=%d argmax %s]", lambda, int(seed), join(maxima).c_str());
    }
  }
  return {ok == total, fmt("%d/%d runs with maxima at |a| in [0.20, 0.30];", ok, total) + detail};
}

Verdict bandit_brac(const fs::path& work) {
  const auto grid = oracle::Grid1D(-1.0, 1.0, 2001);
  const std::vector<double> alphas{0.03, 0.1, 0.3, 1.0, 3.0, 10.0};
  int ok = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    Dataset data = env::gen_bandit_dataset(seed);
    RunConfig c;
    c.algo = Algo::kBrac;
    c.seed = seed;
    c.steps = default_steps(env::EnvId::kBandit);
    c.out_dir = (work / fmt("bandit_brac_s%d", int(seed))).string();
    RunResult r = run_training(c, data);
    if (r.status != RunStatus::kCompleted) {
      detail += fmt(" [s=%d collapsed]", int(seed));
      continue;
    }
    std::vector<LandscapeVariant> variants;
    for (double a : alphas) variants.push_back({Algo::kBrac, a, r.critic});
    Landscape l = export_landscape(*r.behavior, grid, variants);
    l.write_csv(fs::path(c.out_dir) / "landscape.csv");
    std::string extrapolating, regularized;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      auto maxima = argmax_actions(l.actions, l.columns[2 + k]);
      bool outside = true, central = true;
      for (double a : maxima) {
        outside = outside && std::abs(a) > 0.25;
        central = central && std::abs(a) < 0.15;
      }
      if (outside) extrapolating += fmt(" %g", alphas[k]);
      if (central) regularized += fmt(" %g", alphas[k]);
    }
    const bool good = !extrapolating.empty() && !regularized.empty();
    ok += good;
    detail += fmt(" [s=%d outside:%s central:%s]", int(seed), extrapolating.c_str(), regularized.c_str());
  }
  return {ok == int(kSeeds.size()), fmt("%d/%d seeds show both regimes;", ok, int(kSeeds.size())) + detail};
}

// ---- 5. Gradient correctness ----

MlpArch random_arch(Rng& rng, int output) {
  std::uniform_int_distribution<int> in(1, 4), width(2, 12), depth(1, 2), act(0, 1);
  MlpArch arch;
  arch.input = in(rng);
  arch.hidden.clear();
  for (int i = depth(rng); i > 0; --i) arch.hidden.push_back(width(rng));
  arch.output = output;
  arch.activation = act(rng) ? Activation::kTanh : Activation::kSoftplus;
  return arch;
}

Verdict gradients() {
  Rng rng(105);
  double first = 0.0, second = 0.0;
  for (int i = 0; i < 100; ++i) {
    // sum(w * f(x)) with respect to the input and every parameter tensor.
    MlpArch arch = random_arch(rng, 3);
    ParameterSet p = init_mlp(arch, rng);
    const Matrix x0 = standard_normal(4, arch.input, rng);
    const Matrix w = standard_normal(4, 3, rng);
    auto loss = [&](const ParameterSet& params, const Var& x) {
      return ad::sum(ad::mul(mlp_apply(params, x, arch), ad::constant(w)));
    };
    Var x = ad::input(x0);
    std::vector<Var> wrt = p.vars();
    wrt.push_back(x);
    auto g = ad::grad(loss(p, x), wrt);
    for (std::size_t k = 0; k < p.tensor_count(); ++k) {
      Matrix fd = test_util::fd_matrix(
          [&](const Matrix& m) {
            ParameterSet q = p.clone();
            q[k].mutable_value() = m;
            return loss(q, ad::constant(x0)).item();
          },
          p[k].value());
      first = std::max(first, test_util::rel_err(g[k].value(), fd));
    }
    Matrix fdx = test_util::fd_matrix([&](const Matrix& m) { return loss(p, ad::constant(m)).item(); }, x0);
    first = std::max(first, test_util::rel_err(g.back().value(), fdx));
  }
  for (int i = 0; i < 100; ++i) {
    // Gradient-penalty pattern: d/dtheta mean ||d f / d a||^2.
    MlpArch arch = random_arch(rng, 1);
    ParameterSet p = init_mlp(arch, rng);
    const Matrix a0 = standard_normal(5, arch.input, rng);
    auto penalty = [&](const ParameterSet& params) {
      Var a = ad::input(a0);
      Var g = ad::grad(ad::sum(mlp_apply(params, a, arch)), a, true);
      return ad::mean(ad::sum_cols(ad::square(g)));
    };
    auto grads = ad::grad(penalty(p), p.vars());
    for (std::size_t k = 0; k < p.tensor_count(); ++k) {
      Matrix fd = test_util::fd_matrix(
          [&](const Matrix& m) {
            ParameterSet q = p.clone();
            q[k].mutable_value() = m;
            return penalty(q).item();
          },
          p[k].value());
      second = std::max(second, test_util::rel_err(grads[k].value(), fd));
    }
  }
  return {first < 1e-5 && second < 1e-4,
          fmt("max relative error %.3g first order, %.3g second order (100 cases each)", first, second)};
}

// ---- 6. Survival bonus ----

Verdict survival_bonus() {
  Rng rng(106);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    std::uniform_int_distribution<int> dim(1, 4), width(4, 24);
    const int n = dim(rng), d = dim(rng);
    MlpArch bh{.input = n, .hidden = {width(rng)}, .output = 3 * (1 + 2 * d)};
    auto mu = BehaviorModel::mixture(bh, 3, d, init_mlp(bh, rng));
    mu.freeze();
    auto behavior = std::make_shared<const BehaviorModel>(std::move(mu));
    PolicyModel policy(n, d, PolicyConfig{.hidden = {16}}, rng);

    CriticConfig cfg;
    cfg.hidden = {width(rng), width(rng)};
    cfg.use_offset = i % 2 == 0;
    CriticPair plain(n, d, cfg, cfg.use_offset ? behavior : nullptr, rng);
    MlpArch arch = plain.arch();
    arch.zero_final = false;
    for (int k = 0; k < 2; ++k) {
      plain.online(k).assign(init_mlp(arch, rng).flatten());
      plain.target(k).assign(init_mlp(arch, rng).flatten());
    }
    CriticPair shifted(n, d, cfg, plain.behavior_ptr(), rng);
    shifted.load_sections(plain.to_sections());
    const double bonus = uniform(1, 1, -5, 5, rng)(0, 0);
    shifted.config().reward_bonus = bonus;

    Batch b;
    const int rows = 32;
    b.s = standard_normal(rows, n, rng);
    b.a = uniform(rows, d, -0.95, 0.95, rng);
    b.r = standard_normal(rows, 1, rng);
    b.s_next = standard_normal(rows, n, rng);
    b.done = Matrix::Constant(rows, 1, i % 4 < 2 ? 0.0 : 1.0);

    Rng r1(i), r2(i);
    Var s = ad::constant(b.s), a = ad::constant(b.a);
    Var linear = ad::sub(td_loss(plain, b, policy, r1),
                         ad::scale(ad::add(ad::mean(plain.q_value(s, a, QSelect::kOnline1)),
                                           ad::mean(plain.q_value(s, a, QSelect::kOnline2))),
                                   bonus));
    Var shift = td_loss(shifted, b, policy, r2);
    for (int k = 0; k < 2; ++k) {
      auto g1 = ad::grad(linear, plain.online(k).vars());
      auto g2 = ad::grad(shift, shifted.online(k).vars());
      for (std::size_t j = 0; j < g1.size(); ++j) {
        worst = std::max(worst, (g1[j].value() - g2[j].value()).cwiseAbs().maxCoeff());
      }
    }
  }
  return {worst < 1e-10, fmt("max theta-gradient residual %.3g over 20 networks", worst)};
}

// ---- 7. Density normalization ----

// Knots along one action coordinate: a uniform base grid plus, for each
// mixture component, a dense window tanh(m +- 10 sigma) so that nearly
// deterministic components are resolved.
Eigen::VectorXd knots(const dist::MixtureParams* p, int dim) {
  constexpr double kEdge = 1.0 - 1e-6;
  std::vector<double> x;
  for (int i = 0; i <= 2000; ++i) x.push_back(-kEdge + 2 * kEdge * i / 2000.0);
  if (p) {
    for (int k = 0; k < p->components; ++k) {
      const double m = p->means.value()(0, k * p->action_dim + dim);
      const double sd = std::exp(p->log_stds.value()(0, k * p->action_dim + dim));
      for (int i = 0; i <= 400; ++i) {
        const double a = std::tanh(m + sd * (-10.0 + 20.0 * i / 400.0));
        if (std::abs(a) < kEdge) x.push_back(a);
      }
    }
  }
  std::sort(x.begin(), x.end());
  x.erase(std::unique(x.begin(), x.end()), x.end());
  return Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

// Iterated 1-D trapezoid of the density at one state.
double mass_at_state(const BehaviorModel& m, const Matrix& state) {
  ad::NoGradGuard no_grad;
  if (m.family() == BehaviorFamily::kLaplace) {
    const Eigen::VectorXd x = knots(nullptr, 0);
    Matrix lp = m.log_prob_values(Matrix::Zero(x.size(), 1), Matrix(x));
    return oracle::trapezoid(x, Eigen::VectorXd(lp.col(0).array().exp()));
  }
  auto p = m.mixture_params(ad::constant(state));
  auto rows = [&](Eigen::Index g) {
    return dist::MixtureParams{ad::constant(p.logits.value().replicate(g, 1)),
                               ad::constant(p.means.value().replicate(g, 1)),
                               ad::constant(p.log_stds.value().replicate(g, 1)), p.components,
                               p.action_dim};
  };
  if (p.action_dim == 1) {
    const Eigen::VectorXd x = knots(&p, 0);
    Eigen::VectorXd dens = dist::log_prob(rows(x.size()), ad::constant(Matrix(x))).value().col(0).array().exp();
    return oracle::trapezoid(x, dens);
  }
  if (p.action_dim != 2) throw std::invalid_argument("mass_at_state: 1-D or 2-D actions only");
  const Eigen::VectorXd x0 = knots(&p, 0), x1 = knots(&p, 1);
  const auto rep = rows(x1.size());
  Eigen::VectorXd inner(x0.size());
  Matrix a(x1.size(), 2);
  a.col(1) = x1;
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    a.col(0).setConstant(x0(i));
    Eigen::VectorXd dens = dist::log_prob(rep, ad::constant(a)).value().col(0).array().exp();
    inner(i) = oracle::trapezoid(x1, dens);
  }
  return oracle::trapezoid(x0, inner);
}

// ---- 8 and 9. Point mass ----

struct PointMassRuns {
  PointMassSuite suite;
  std::shared_ptr<const BehaviorModel> medium_bc, expert_bc;
  std::map<std::string, std::vector<RunResult>> runs;  // "<variant>@<tier>"
};

RunConfig pointmass_config() {
  RunConfig c;
  c.steps = 5000;
  c.eval_interval = 1000;
  return c;
}

PointMassSuite make_suite(const fs::path& work) {
  OnlineSacConfig sac;
  sac.steps = 30000;
  PointMassSuite s = gen_pointmass_suite(50000, 0, sac);
  fs::create_directories(work / "pointmass");
  for (Tier t : {Tier::kRandom, Tier::kMedium, Tier::kExpert, Tier::kMixed}) {
    write_dataset(work / "pointmass" / (to_string(t) + ".ofrl"), s.tier(t));
  }
  return s;
}

const std::vector<RunResult>& runs_of(PointMassRuns& pm, const fs::path& work, const std::string& name,
                                      Tier tier, const std::function<void(RunConfig&)>& tweak) {
  const std::string key = name + "@" + to_string(tier);
  auto it = pm.runs.find(key);
  if (it != pm.runs.end()) return it->second;
  const Dataset& data = pm.suite.tier(tier);
  auto behavior = tier == Tier::kExpert ? pm.expert_bc : pm.medium_bc;
  std::vector<RunResult> out;
  for (auto seed : kSeeds) {
    RunConfig c = pointmass_config();
    tweak(c);
    c.seed = seed;
    c.out_dir = (work / "pointmass" / fmt("%s_%s_s%d", name.c_str(), to_string(tier).c_str(), int(seed))).string();
    out.push_back(run_training(c, data, behavior));
  }
  return pm.runs[key] = std::move(out);
}

struct Score {
  double mean = 0.0;
  int collapses = 0;
};

Score score(const std::vector<RunResult>& runs) {
  std::vector<double> v;
  int collapses = 0;
  for (const auto& r : runs) {
    if (r.final_eval) {
      v.push_back(r.final_eval->normalized_return);
    } else {
      ++collapses;
    }
  }
  return {mean_of(v), collapses};
}

std::string describe(const std::string& name, const Score& s) {
  return fmt("%s %.1f", name.c_str(), s.mean) + (s.collapses ? fmt(" (%d collapsed)", s.collapses) : "");
}

auto set_lambda(double lambda) {
  return [lambda](RunConfig& c) { c.critic.lambda = lambda; };
}

Verdict pointmass_ordering(PointMassRuns& pm, const fs::path& work) {
  Score fbrc = score(runs_of(pm, work, "fisher-brc-l0.1", Tier::kMedium, set_lambda(0.1)));
  Score bc = score(runs_of(pm, work, "bc", Tier::kMedium, [](RunConfig& c) { c.algo = Algo::kBc; }));
  Score sac = score(runs_of(pm, work, "sac", Tier::kMedium, [](RunConfig& c) { c.algo = Algo::kSac; }));
  Score e01 = score(runs_of(pm, work, "fisher-brc-l0.1", Tier::kExpert, set_lambda(0.1)));
  Score e1 = score(runs_of(pm, work, "fisher-brc-l1", Tier::kExpert, set_lambda(1.0)));
  const bool no_collapse = fbrc.collapses + e01.collapses + e1.collapses == 0;
  const bool vs_bc = bc.collapses < 5 && fbrc.mean >= bc.mean + 5;
  const bool vs_sac = sac.collapses == 5 || (fbrc.mean >= sac.mean + 5);
  const bool expert = e1.mean >= e01.mean - 5;
  return {no_collapse && vs_bc && vs_sac && expert,
          fmt("medium: %s, %s, %s [vs BC %s, vs SAC %s]; expert: %s, %s [%s]",
              describe("fisher-brc(0.1)", fbrc).c_str(), describe("bc", bc).c_str(),
              describe("sac", sac).c_str(), vs_bc ? "ok" : "short", vs_sac ? "ok" : "short",
              describe("fisher-brc(1.0)", e1).c_str(), describe("fisher-brc(0.1)", e01).c_str(),
              expert ? "ok" : "short")};
}

Verdict pointmass_ablation(PointMassRuns& pm, const fs::path& work) {
  std::string detail;
  bool lambda_ok = false;
  for (Tier t : {Tier::kMedium, Tier::kExpert}) {
    Score base = score(runs_of(pm, work, "fisher-brc-l0.1", t, set_lambda(0.1)));
    Score zero = score(runs_of(pm, work, "fisher-brc-l0", t, set_lambda(0.0)));
    const bool hit = zero.collapses > 0 || base.mean - zero.mean >= 30;
    lambda_ok = lambda_ok || hit;
    detail += fmt("%s: %s vs %s; ", to_string(t).c_str(), describe("lambda=0", zero).c_str(),
                  describe("lambda=0.1", base).c_str());
  }
  Score fbrc = score(pm.runs.at("fisher-brc-l0.1@medium"));
  Score plain = score(runs_of(pm, work, "plain-gp", Tier::kMedium, [](RunConfig& c) {
    c.critic.use_offset = false;
    c.critic.lambda = 0.1;
  }));
  const bool plain_ok = plain.collapses > 0 || plain.mean <= fbrc.mean;
  detail += fmt("medium: %s vs %s", describe("plain critic + GP", plain).c_str(),
                describe("fisher-brc", fbrc).c_str());
  return {lambda_ok && plain_ok,
          fmt("[lambda=0 %s, plain GP %s] ", lambda_ok ? "ok" : "short", plain_ok ? "ok" : "short") + detail};
}

Verdict densities(PointMassRuns& pm) {
  double worst = 0.0;
  std::string where;
  int count = 0;
  auto check = [&](const BehaviorModel& m, const Matrix& state, const std::string& name) {
    const double err = std::abs(mass_at_state(m, state) - 1.0);
    if (err >= worst) {
      worst = err;
      where = name;
    }
    ++count;
  };
  for (auto seed : kSeeds) {
    check(fit_laplace(env::gen_bandit_dataset(seed)), Matrix::Zero(1, 1), fmt("bandit laplace s=%d", int(seed)));
  }
  {
    RunConfig c;
    c.behavior = BehaviorChoice::kMixture;
    check(fit_behavior(c, env::gen_bandit_dataset(0)), Matrix::Zero(1, 1), "bandit mixture");
  }
  for (Tier t : {Tier::kMedium, Tier::kExpert}) {
    const Dataset& data = pm.suite.tier(t);
    const auto& m = t == Tier::kMedium ? pm.medium_bc : pm.expert_bc;
    for (std::size_t i = 0; i < 5; ++i) {
      const auto& tr = data.transitions[i * data.size() / 5];
      Matrix s(1, static_cast<Eigen::Index>(tr.s.size()));
      for (std::size_t j = 0; j < tr.s.size(); ++j) s(0, static_cast<Eigen::Index>(j)) = tr.s[j];
      check(*m, s, fmt("%s mixture state %d", to_string(t).c_str(), int(i)));
    }
  }
  return {worst < 1e-3, fmt("max |mass - 1| = %.3g over %d fitted densities (worst: %s)", worst, count, where.c_str())};
}

// ---- 10. Determinism and persistence ----

Verdict determinism(const fs::path& work, const PointMassRuns* pm) {
  std::vector<std::string> problems;
  auto twice = [&](const std::string& name, RunConfig c, const Dataset& data,
                   std::shared_ptr<const BehaviorModel> behavior) {
    std::string bytes[2], ckpt[2];
    for (int k = 0; k < 2; ++k) {
      c.out_dir = (work / fmt("det_%s_%d", name.c_str(), k)).string();
      fs::remove_all(c.out_dir);
      run_training(c, data, behavior);
      bytes[k] = slurp(fs::path(c.out_dir) / "metrics.csv");
      ckpt[k] = slurp(fs::path(c.out_dir) / "checkpoint.fbck");
    }
    if (bytes[0].empty() || bytes[0] != bytes[1]) problems.push_back(name + " metrics differ");
    if (ckpt[0].empty() || ckpt[0] != ckpt[1]) problems.push_back(name + " checkpoints differ");
    const fs::path p = fs::path(c.out_dir) / "checkpoint.fbck";
    const fs::path q = work / fmt("det_%s_resaved.fbck", name.c_str());
    write_checkpoint(q, read_checkpoint(p));
    if (slurp(q) != ckpt[1]) problems.push_back(name + " checkpoint round trip differs");
  };

  Dataset bandit = env::gen_bandit_dataset(7);
  for (Algo a : {Algo::kFisherBrc, Algo::kBrac, Algo::kCql, Algo::kSac, Algo::kBc}) {
    RunConfig c;
    c.algo = a;
    c.seed = 3;
    c.steps = 300;
    c.eval_interval = 100;
    c.bc.steps = 300;
    twice("bandit_" + to_string(a), c, bandit, nullptr);
  }
  std::vector<std::pair<std::string, const Dataset*>> datasets{{"bandit", &bandit}};
  if (pm) {
    RunConfig c = pointmass_config();
    c.seed = 3;
    c.steps = 300;
    c.eval_interval = 100;
    twice("pointmass_fisher-brc", c, pm->suite.medium, pm->medium_bc);
    for (Tier t : {Tier::kRandom, Tier::kMedium, Tier::kExpert, Tier::kMixed}) {
      datasets.emplace_back("pointmass_" + to_string(t), &pm->suite.tier(t));
    }
  }
  for (const auto& [name, data] : datasets) {
    const fs::path p = work / ("det_" + name + ".ofrl"), q = work / ("det_" + name + "_resaved.ofrl");
    write_dataset(p, *data);
    Dataset back = read_dataset(p);
    write_dataset(q, back);
    bool same = back.size() == data->size() && slurp(p) == slurp(q);
    for (std::size_t i = 0; same && i < back.size(); ++i) {
      const auto &x = back.transitions[i], &y = data->transitions[i];
      same = x.s == y.s && x.a == y.a && x.r == y.r && x.s_next == y.s_next && x.done == y.done;
    }
    if (!same) problems.push_back(name + " dataset round trip differs");
  }
  std::string detail = fmt("%d configs run twice, %d datasets round-tripped", pm ? 6 : 5, int(datasets.size()));
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string work_dir = (fs::temp_directory_path() / "fbrc_acceptance").string();
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--work", work_dir, "Scratch directory for datasets and runs");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}
                                              : std::set<int>(only.begin(), only.end());
  const fs::path work(work_dir);
  fs::create_directories(work);

  const std::map<int, std::string> names{
      {1, "Fisher identity"},       {2, "CQL-as-KL identity"},     {3, "bandit Fisher-BRC landscape"},
      {4, "bandit BRAC regimes"},   {5, "autodiff vs differences"}, {6, "survival-bonus identity"},
      {7, "density normalization"}, {8, "point-mass ordering"},    {9, "point-mass ablations"},
      {10, "determinism and persistence"}};

  std::unique_ptr<PointMassRuns> pm;
  auto pointmass = [&]() -> PointMassRuns& {
    if (!pm) {
      pm = std::make_unique<PointMassRuns>();
      const auto t0 = Clock::now();
      pm->suite = make_suite(work);
      RunConfig c = pointmass_config();
      pm->medium_bc = std::make_shared<const BehaviorModel>(fit_behavior(c, pm->suite.medium));
      pm->expert_bc = std::make_shared<const BehaviorModel>(fit_behavior(c, pm->suite.expert));
      std::cout << fmt("(point-mass datasets and behavior models: %.0f s)",
                       std::chrono::duration<double>(Clock::now() - t0).count())
                << std::endl;
    }
    return *pm;
  };
  const bool needs_pointmass = selected.count(7) || selected.count(8) || selected.count(9);

  int failures = 0;
  for (int id : selected) {
    if (!names.count(id)) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    const auto t0 = Clock::now();
    Verdict v;
    try {
      switch (id) {
        case 1: v = fisher_identity(); break;
        case 2: v = kl_identity(); break;
        case 3: v = bandit_fisher(work); break;
        case 4: v = bandit_brac(work); break;
        case 5: v = gradients(); break;
        case 6: v = survival_bonus(); break;
        case 7: v = densities(pointmass()); break;
        case 8: v = pointmass_ordering(pointmass(), work); break;
        case 9: v = pointmass_ablation(pointmass(), work); break;
        case 10: v = determinism(work, needs_pointmass ? &pointmass() : nullptr); break;
      }
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    failures += !v.pass;
    std::cout << fmt("criterion %d (%s): %s  %s  [%.1f s]", id, names.at(id).c_str(),
                     v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs)
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
