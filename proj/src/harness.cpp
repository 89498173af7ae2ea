#include "fbrc/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace fbrc {

using ad::Matrix;
using nlohmann::json;

std::string to_string(Algo a) {
  switch (a) {
    case Algo::kFisherBrc: return "fisher-brc";
    case Algo::kBrac: return "brac";
    case Algo::kCql: return "cql";
    case Algo::kSac: return "sac";
    case Algo::kBc: return "bc";
  }
  return "fisher-brc";
}

Algo algo_from_string(const std::string& s) {
  if (s == "fisher-brc") return Algo::kFisherBrc;
  if (s == "brac") return Algo::kBrac;
  if (s == "cql") return Algo::kCql;
  if (s == "sac") return Algo::kSac;
  if (s == "bc") return Algo::kBc;
  throw std::invalid_argument("unknown algorithm '" + s + "'");
}

std::string to_string(BehaviorChoice b) {
  switch (b) {
    case BehaviorChoice::kAuto: return "auto";
    case BehaviorChoice::kMixture: return "mixture";
    case BehaviorChoice::kLaplace: return "laplace";
  }
  return "auto";
}

BehaviorChoice behavior_choice_from_string(const std::string& s) {
  if (s == "auto") return BehaviorChoice::kAuto;
  if (s == "mixture") return BehaviorChoice::kMixture;
  if (s == "laplace") return BehaviorChoice::kLaplace;
  throw std::invalid_argument("unknown behavior family '" + s + "'");
}

void RunConfig::validate() const {
  if (steps < 0) throw std::invalid_argument("RunConfig: steps must be >= 0");
  if (eval_interval < 1) throw std::invalid_argument("RunConfig: eval_interval must be >= 1");
  if (eval_episodes < 1) throw std::invalid_argument("RunConfig: eval_episodes must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("RunConfig: batch_size must be >= 1");
  if (!(brac_alpha >= 0)) throw std::invalid_argument("RunConfig: brac_alpha must be >= 0");
  critic.validate();
  cql.validate();
  if (bc_path.empty()) bc.validate();
}

json RunConfig::to_json() const {
  json j;
  j["algo"] = to_string(algo);
  j["dataset_path"] = dataset_path;
  j["bc_path"] = bc_path;
  j["out_dir"] = out_dir;
  j["seed"] = seed;
  j["steps"] = steps;
  j["eval_interval"] = eval_interval;
  j["eval_episodes"] = eval_episodes;
  j["batch_size"] = batch_size;
  j["behavior"] = to_string(behavior);
  j["bc"] = {{"steps", bc.steps},
             {"base_lr", bc.base_lr},
             {"lr_milestones", bc.lr_milestones},
             {"decay_factor", bc.decay_factor},
             {"batch_size", bc.batch_size},
             {"target_entropy", bc.target_entropy ? json(*bc.target_entropy) : json(nullptr)},
             {"components", bc.components},
             {"hidden", bc.hidden},
             {"initial_temperature", bc.initial_temperature},
             {"checkpoints", bc.checkpoints}};
  j["critic"] = {{"lambda", critic.lambda},
                 {"gamma", critic.gamma},
                 {"tau", critic.tau},
                 {"reward_bonus", critic.reward_bonus},
                 {"lr", critic.lr},
                 {"use_offset", critic.use_offset},
                 {"penalty_source", to_string(critic.penalty_source)},
                 {"soft_targets", critic.soft_targets},
                 {"penalty_samples", critic.penalty_samples},
                 {"penalty_sum_twins", critic.penalty_sum_twins},
                 {"penalty_diagnostics", critic.penalty_diagnostics},
                 {"hidden", critic.hidden}};
  j["cql"] = {{"weight", cql.weight},
              {"samples", cql.samples},
              {"proposal", to_string(cql.proposal)}};
  j["policy"] = {
      {"hidden", policy.hidden},
      {"lr", policy.lr},
      {"temperature_lr", policy.temperature_lr},
      {"initial_temperature", policy.initial_temperature},
      {"fixed_temperature", policy.fixed_temperature},
      {"target_entropy", policy.target_entropy ? json(*policy.target_entropy) : json(nullptr)}};
  j["brac_alpha"] = brac_alpha;
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  c.algo = algo_from_string(j.at("algo").get<std::string>());
  c.dataset_path = j.at("dataset_path").get<std::string>();
  c.bc_path = j.at("bc_path").get<std::string>();
  c.out_dir = j.at("out_dir").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.steps = j.at("steps").get<long>();
  c.eval_interval = j.at("eval_interval").get<long>();
  c.eval_episodes = j.at("eval_episodes").get<int>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.behavior = behavior_choice_from_string(j.at("behavior").get<std::string>());
  const auto& b = j.at("bc");
  c.bc.steps = b.at("steps").get<long>();
  c.bc.base_lr = b.at("base_lr").get<double>();
  c.bc.lr_milestones = b.at("lr_milestones").get<std::vector<double>>();
  c.bc.decay_factor = b.at("decay_factor").get<double>();
  c.bc.batch_size = b.at("batch_size").get<std::size_t>();
  if (!b.at("target_entropy").is_null()) c.bc.target_entropy = b.at("target_entropy").get<double>();
  c.bc.components = b.at("components").get<int>();
  c.bc.hidden = b.at("hidden").get<std::vector<int>>();
  c.bc.initial_temperature = b.at("initial_temperature").get<double>();
  c.bc.checkpoints = b.at("checkpoints").get<int>();
  const auto& cr = j.at("critic");
  c.critic.lambda = cr.at("lambda").get<double>();
  c.critic.gamma = cr.at("gamma").get<double>();
  c.critic.tau = cr.at("tau").get<double>();
  c.critic.reward_bonus = cr.at("reward_bonus").get<double>();
  c.critic.lr = cr.at("lr").get<double>();
  c.critic.use_offset = cr.at("use_offset").get<bool>();
  c.critic.penalty_source = penalty_source_from_string(cr.at("penalty_source").get<std::string>());
  c.critic.soft_targets = cr.at("soft_targets").get<bool>();
  c.critic.penalty_samples = cr.at("penalty_samples").get<int>();
  c.critic.penalty_sum_twins = cr.at("penalty_sum_twins").get<bool>();
  c.critic.penalty_diagnostics = cr.at("penalty_diagnostics").get<bool>();
  c.critic.hidden = cr.at("hidden").get<std::vector<int>>();
  const auto& q = j.at("cql");
  c.cql.weight = q.at("weight").get<double>();
  c.cql.samples = q.at("samples").get<int>();
  c.cql.proposal = cql_proposal_from_string(q.at("proposal").get<std::string>());
  const auto& p = j.at("policy");
  c.policy.hidden = p.at("hidden").get<std::vector<int>>();
  c.policy.lr = p.at("lr").get<double>();
  c.policy.temperature_lr = p.at("temperature_lr").get<double>();
  c.policy.initial_temperature = p.at("initial_temperature").get<double>();
  c.policy.fixed_temperature = p.at("fixed_temperature").get<bool>();
  if (!p.at("target_entropy").is_null()) c.policy.target_entropy = p.at("target_entropy").get<double>();
  c.brac_alpha = j.at("brac_alpha").get<double>();
  return c;
}

long default_steps(env::EnvId env) { return env == env::EnvId::kBandit ? 5000 : 50000; }

// ---- metrics ----

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

std::string format_metrics_row(const MetricsRow& r) {
  return std::to_string(r.step) + "," + fmt(r.mean_return) + "," + fmt(r.normalized_return) +
         "," + fmt(r.critic_td) + "," + fmt(r.penalty) + "," + fmt(r.actor_loss) + "," +
         fmt(r.temperature) + "," + fmt(r.grad_norm_sq) + "," + fmt(r.behavior_loglik);
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << kMetricsHeader << "\n";
  for (const auto& r : rows) out << format_metrics_row(r) << "\n";
}

// ---- training ----

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kBcStream = 2;
constexpr std::uint64_t kEvalStream = 3;

bool needs_behavior(const RunConfig& c) {
  switch (c.algo) {
    case Algo::kFisherBrc: return c.critic.use_offset;
    case Algo::kBrac:
    case Algo::kBc: return true;
    case Algo::kCql:
    case Algo::kSac: return false;
  }
  return false;
}

// Per-algorithm critic settings on top of the user's critic config.
CriticConfig effective_critic(const RunConfig& c) {
  CriticConfig cc = c.critic;
  if (c.algo != Algo::kFisherBrc) {
    cc.use_offset = false;
    cc.lambda = 0.0;
  }
  return cc;
}

struct Window {
  double td = 0, penalty = 0, actor = 0, grad_sq = 0;
  long n = 0;
  void add(const CriticDiagnostics& c, const ActorDiagnostics& a, double lambda) {
    td += c.td;
    penalty += lambda * c.penalty + c.extra;
    actor += a.loss;
    grad_sq += c.penalty;
    ++n;
  }
};

void write_summary(const std::filesystem::path& dir, const RunConfig& config,
                   const RunResult& r, const std::string& behavior_family) {
  json s;
  s["status"] = r.status == RunStatus::kCompleted ? "completed" : "collapsed";
  s["algo"] = to_string(config.algo);
  s["steps_completed"] = r.steps_completed;
  s["collapse_step"] = r.collapse_step ? json(*r.collapse_step) : json(nullptr);
  s["collapse_reason"] = r.collapse_reason;
  s["eval_seed"] = r.eval_seed;
  s["eval_episodes"] = config.eval_episodes;
  s["behavior_family"] = behavior_family;
  if (r.final_eval) {
    s["final_mean_return"] = r.final_eval->mean_return;
    s["final_normalized_return"] = r.final_eval->normalized_return;
    s["final_returns"] = r.final_eval->returns;
    s["out_of_support_episodes"] = r.final_eval->out_of_support;
  } else {
    s["final_mean_return"] = nullptr;
    s["final_normalized_return"] = nullptr;
  }
  std::ofstream(dir / "summary.json", std::ios::trunc) << s.dump(2) << "\n";
}

}  // namespace

BehaviorModel fit_behavior(const RunConfig& config, const Dataset& data) {
  BehaviorChoice choice = config.behavior;
  if (choice == BehaviorChoice::kAuto) {
    choice = data.info.spec_id == "bandit" ? BehaviorChoice::kLaplace : BehaviorChoice::kMixture;
  }
  if (choice == BehaviorChoice::kLaplace) return fit_laplace(data);
  return train_bc(data, config.bc, derive_seed(config.seed, kBcStream));
}

RunResult run_training(const RunConfig& config) {
  if (config.dataset_path.empty()) throw std::invalid_argument("run_training: no dataset path");
  Dataset data = read_dataset(config.dataset_path);
  std::shared_ptr<const BehaviorModel> behavior;
  if (!config.bc_path.empty()) {
    behavior = std::make_shared<BehaviorModel>(BehaviorModel::load(config.bc_path));
  }
  return run_training(config, data, behavior);
}

RunResult run_training(const RunConfig& config, const Dataset& data,
                       std::shared_ptr<const BehaviorModel> behavior) {
  config.validate();
  data.validate();
  const env::EnvId env_id = env::env_from_spec_id(data.info.spec_id);
  const env::References refs =
      env_id == env::EnvId::kBandit ? env::bandit_references() : env::references_of(data.info);
  const int n = data.info.state_dim;
  const int d = data.info.action_dim;

  std::filesystem::path out;
  if (!config.out_dir.empty()) {
    out = config.out_dir;
    std::filesystem::create_directories(out);
    std::ofstream(out / "config.json", std::ios::trunc) << config.to_json().dump(2) << "\n";
  }

  if (!behavior && needs_behavior(config)) {
    if (!config.bc_path.empty()) {
      behavior = std::make_shared<BehaviorModel>(BehaviorModel::load(config.bc_path));
    } else {
      behavior = std::make_shared<BehaviorModel>(fit_behavior(config, data));
      if (!out.empty()) behavior->save(out / "behavior.fbck");
    }
  }
  if (behavior && behavior->action_dim() != d) {
    throw std::invalid_argument("behavior model action dim does not match the dataset");
  }
  const std::string family =
      !behavior ? "none"
                : (behavior->family() == BehaviorFamily::kLaplace ? "laplace" : "mixture");

  RunResult result;
  result.behavior = behavior;
  result.eval_seed = derive_seed(config.seed, kEvalStream);

  auto behavior_loglik = [&](const Matrix& states, const Matrix& actions) -> std::optional<double> {
    if (!behavior) return std::nullopt;
    return behavior->log_prob_values(states, actions).mean();
  };
  const Batch probe = make_batch(data, [&] {
    std::vector<std::size_t> idx;
    const std::size_t m = std::min<std::size_t>(data.size(), 256);
    for (std::size_t i = 0; i < m; ++i) idx.push_back(i * data.size() / m);
    return idx;
  }());

  if (config.algo == Algo::kBc) {
    auto act = [&](const Matrix& s) { return behavior->mode(s); };
    auto ev = env::evaluate_policy(act, env_id, config.eval_episodes, result.eval_seed, refs);
    MetricsRow row;
    row.step = 0;
    row.mean_return = ev.mean_return;
    row.normalized_return = ev.normalized_return;
    row.behavior_loglik = behavior_loglik(probe.s, behavior->mode(probe.s));
    result.metrics.push_back(row);
    result.final_eval = ev;
    if (!out.empty()) {
      write_metrics_csv(out / "metrics.csv", result.metrics);
      write_checkpoint(out / "checkpoint.fbck", behavior->to_sections());
      write_summary(out, config, result, family);
    }
    return result;
  }

  Rng init_rng(derive_seed(config.seed, kInitStream));
  Rng rng(derive_seed(config.seed, kTrainStream));
  const CriticConfig cc = effective_critic(config);
  auto policy = std::make_shared<PolicyModel>(n, d, config.policy, init_rng);
  auto critic = std::make_shared<CriticPair>(n, d, cc, behavior, init_rng);
  result.policy = policy;
  result.critic = critic;
  ActorOptimizers actor_opt(config.policy);

  ActorKind kind = ActorKind::kSac;
  if (config.algo == Algo::kFisherBrc && cc.use_offset) kind = ActorKind::kFisherBrc;
  if (config.algo == Algo::kBrac) kind = ActorKind::kBrac;
  ExtraCriticTerm extra;
  if (config.algo == Algo::kCql && config.cql.weight > 0) {
    extra = [&](const CriticPair& c, const Batch& b, const PolicyModel& p, Rng& r) {
      return ad::scale(cql_penalty(c, b, p, config.cql, r), config.cql.weight);
    };
  }

  auto evaluate = [&] {
    auto act = [&](const Matrix& s) { return policy->act_deterministic(s); };
    return env::evaluate_policy(act, env_id, config.eval_episodes, result.eval_seed, refs);
  };

  Window w;
  try {
    for (long step = 1; step <= config.steps; ++step) {
      Batch batch = sample_batch(data, config.batch_size, rng);
      CriticDiagnostics cd = critic_update(*critic, batch, *policy, rng, nullptr, extra);
      ActorDiagnostics ad_ =
          actor_update(*policy, *critic, batch.s, kind, actor_opt, rng, config.brac_alpha);
      w.add(cd, ad_, cc.lambda);
      result.steps_completed = step;
      if (step % config.eval_interval == 0 || step == config.steps) {
        auto ev = evaluate();
        MetricsRow row;
        row.step = step;
        row.mean_return = ev.mean_return;
        row.normalized_return = ev.normalized_return;
        const double k = static_cast<double>(w.n);
        row.critic_td = w.td / k;
        row.penalty = w.penalty / k;
        row.actor_loss = w.actor / k;
        row.temperature = policy->temperature();
        if (cc.lambda > 0 || cc.penalty_diagnostics) row.grad_norm_sq = w.grad_sq / k;
        row.behavior_loglik = behavior_loglik(probe.s, policy->act_deterministic(probe.s));
        result.metrics.push_back(row);
        w = Window{};
        if (step == config.steps) result.final_eval = ev;
      }
    }
    if (config.steps == 0) result.final_eval = evaluate();
  } catch (const TrainingCollapse& e) {
    result.status = RunStatus::kCollapsed;
    result.collapse_step = result.steps_completed + 1;
    result.collapse_reason = e.what();
    result.final_eval.reset();
  } catch (const ad::NonFiniteError& e) {
    // Weights that overflowed inside an update can first surface during the
    // evaluation that follows it; the step that produced them is the collapse.
    result.status = RunStatus::kCollapsed;
    result.collapse_step = result.steps_completed;
    result.collapse_reason = std::string("evaluation after the update collapsed: ") + e.what();
    result.final_eval.reset();
  }

  if (!out.empty()) {
    write_metrics_csv(out / "metrics.csv", result.metrics);
    if (result.status == RunStatus::kCompleted) {
      std::vector<CheckpointSection> sections;
      if (behavior) sections = behavior->to_sections();
      for (auto& s : critic->to_sections()) sections.push_back(std::move(s));
      for (auto& s : policy->to_sections()) sections.push_back(std::move(s));
      write_checkpoint(out / "checkpoint.fbck", sections);
    }
    write_summary(out, config, result, family);
  }
  return result;
}

RunResult run_baseline(Algo algo, const Dataset& data, RunConfig config, std::uint64_t seed,
                       std::shared_ptr<const BehaviorModel> behavior) {
  if (algo == Algo::kFisherBrc) throw std::invalid_argument("run_baseline: not a baseline");
  config.algo = algo;
  config.seed = seed;
  return run_training(config, data, std::move(behavior));
}

// ---- landscapes ----

const Eigen::VectorXd& Landscape::column(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return columns[i];
  }
  throw std::out_of_range("landscape has no column '" + name + "'");
}

void Landscape::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "action";
  for (const auto& n : names) out << "," << n;
  out << "\n";
  for (Eigen::Index i = 0; i < actions.size(); ++i) {
    out << fmt(actions(i));
    for (const auto& c : columns) out << "," << fmt(c(i));
    out << "\n";
  }
}

Landscape export_landscape(const BehaviorModel& behavior, const oracle::Grid1D& grid,
                           const std::vector<LandscapeVariant>& variants) {
  if (behavior.action_dim() != 1) throw std::invalid_argument("landscapes need 1-D actions");
  ad::NoGradGuard no_grad;
  Landscape l;
  l.actions = grid.points();
  const Eigen::Index g = l.actions.size();
  const Matrix a = l.actions;
  const Matrix log_mu =
      behavior.log_prob_values(Matrix::Zero(g, std::max(1, behavior.state_dim())), a);
  l.names.push_back("log_mu");
  l.columns.push_back(log_mu.col(0));
  Eigen::VectorXd reward(g);
  for (Eigen::Index i = 0; i < g; ++i) reward(i) = env::bandit_reward_synthetic(a(i, 0));
  l.names.push_back("reward_synthetic");
  l.columns.push_back(reward);

  for (const auto& v : variants) {
    if (!v.critic) throw std::invalid_argument("landscape variant without a critic");
    const auto& c = *v.critic;
    if (c.arch().input - 1 < 1) throw std::invalid_argument("landscape critic must be 1-D");
    const int state_dim = c.arch().input - 1;
    ad::Var s = ad::constant(Matrix::Zero(g, state_dim));
    ad::Var av = ad::constant(a);
    Eigen::VectorXd col;
    std::string name;
    char coef[32];
    std::snprintf(coef, sizeof coef, "%g", v.coefficient);
    if (v.method == Algo::kFisherBrc) {
      ad::Var lm = ad::constant(log_mu);
      col = c.q_value(s, av, QSelect::kOnlineMin, c.config().use_offset ? &lm : nullptr)
                .value()
                .col(0);
      name = std::string("fisher-brc:") + coef;
    } else if (v.method == Algo::kBrac) {
      Eigen::VectorXd r = ad::minimum(c.network(0, s, av), c.network(1, s, av)).value().col(0);
      col = r + v.coefficient * log_mu.col(0);
      name = std::string("brac:") + coef;
    } else {
      throw std::invalid_argument("landscape variants must be fisher-brc or brac");
    }
    if (!col.allFinite()) throw std::domain_error("landscape column " + name + " is not finite");
    l.names.push_back(name);
    l.columns.push_back(col);
  }
  return l;
}

std::vector<double> argmax_actions(const Eigen::VectorXd& actions, const Eigen::VectorXd& values) {
  const double best = values.maxCoeff();
  std::vector<double> out;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) >= best - 1e-12) out.push_back(actions(i));
  }
  return out;
}

// ---- ablations ----

std::vector<std::pair<std::string, RunConfig>> ablation_variants(const std::string& suite,
                                                                 const RunConfig& base) {
  std::vector<std::pair<std::string, RunConfig>> out;
  if (suite == "lambda-sweep") {
    for (double lambda : {0.0, 0.1, 1.0}) {
      RunConfig c = base;
      c.algo = Algo::kFisherBrc;
      c.critic.use_offset = true;
      c.critic.lambda = lambda;
      out.emplace_back("fisher-brc lambda=" + fmt(lambda), c);
    }
  } else if (suite == "no-offset-gp") {
    RunConfig with = base;
    with.algo = Algo::kFisherBrc;
    with.critic.use_offset = true;
    out.emplace_back("fisher-brc", with);
    RunConfig without = with;
    without.critic.use_offset = false;
    out.emplace_back("plain critic + gradient penalty", without);
  } else {
    throw std::invalid_argument("unknown ablation suite '" + suite + "'");
  }
  return out;
}

std::vector<AblationRow> run_ablation(const AblationConfig& config) {
  if (config.seeds < 1) throw std::invalid_argument("ablation needs at least one seed");
  auto variants = ablation_variants(config.suite, config.base);
  std::map<Tier, std::string> datasets = config.datasets;
  if (config.suite == "no-offset-gp" && datasets.count(Tier::kMedium)) {
    datasets = {{Tier::kMedium, config.datasets.at(Tier::kMedium)}};
  }
  if (datasets.empty()) throw std::invalid_argument("ablation has no datasets");
  std::filesystem::path out = config.out_dir;
  if (!out.empty()) std::filesystem::create_directories(out);

  std::vector<AblationRow> rows;
  for (const auto& [tier, path] : datasets) {
    Dataset data = read_dataset(path);
    // One behavior model per dataset, shared by every variant and seed.
    std::shared_ptr<const BehaviorModel> behavior;
    if (!config.base.bc_path.empty()) {
      behavior = std::make_shared<BehaviorModel>(BehaviorModel::load(config.base.bc_path));
    } else {
      behavior = std::make_shared<BehaviorModel>(fit_behavior(config.base, data));
      if (!out.empty()) behavior->save(out / ("behavior_" + to_string(tier) + ".fbck"));
    }
    for (const auto& [name, base] : variants) {
      AblationRow row;
      row.variant = name;
      row.tier = tier;
      for (int s = 0; s < config.seeds; ++s) {
        RunConfig c = base;
        c.dataset_path = path;
        c.seed = static_cast<std::uint64_t>(s);
        c.out_dir.clear();
        if (!out.empty()) {
          std::string dir = name;
          for (char& ch : dir) {
            if (ch == ' ' || ch == '=' || ch == '+') ch = '_';
          }
          c.out_dir = (out / to_string(tier) / dir / ("seed" + std::to_string(s))).string();
        }
        RunResult r = run_training(c, data, behavior);
        ++row.runs;
        if (r.status == RunStatus::kCollapsed) {
          ++row.collapses;
        } else {
          row.final_normalized.push_back(r.final_eval->normalized_return);
        }
      }
      if (!row.final_normalized.empty()) {
        double sum = 0;
        for (double v : row.final_normalized) sum += v;
        row.mean = sum / static_cast<double>(row.final_normalized.size());
        double var = 0;
        for (double v : row.final_normalized) var += (v - row.mean) * (v - row.mean);
        row.stddev = std::sqrt(var / static_cast<double>(row.final_normalized.size()));
      } else {
        row.mean = row.stddev = std::nan("");
      }
      rows.push_back(row);
    }
  }
  if (!out.empty()) {
    std::ofstream csv(out / "summary.csv", std::ios::trunc);
    csv << "variant,tier,runs,collapses,mean_normalized_return,stddev_normalized_return\n";
    for (const auto& r : rows) {
      csv << r.variant << "," << to_string(r.tier) << "," << r.runs << "," << r.collapses << ","
          << fmt(r.mean) << "," << fmt(r.stddev) << "\n";
    }
  }
  return rows;
}

}  // namespace fbrc
