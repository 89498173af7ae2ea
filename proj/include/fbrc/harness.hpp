#pragma once

// Reproducible runs: configuration, the alternating critic/actor loop,
// metrics, checkpoints, the 1-D landscape exporter and ablation suites.

#include "fbrc/actors.hpp"
#include "fbrc/baselines.hpp"
#include "fbrc/envs.hpp"
#include "fbrc/oracles.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>

namespace fbrc {

enum class Algo { kFisherBrc, kBrac, kCql, kSac, kBc };

std::string to_string(Algo a);
Algo algo_from_string(const std::string& s);

enum class BehaviorChoice { kAuto, kMixture, kLaplace };

std::string to_string(BehaviorChoice b);
BehaviorChoice behavior_choice_from_string(const std::string& s);

struct RunConfig {
  Algo algo = Algo::kFisherBrc;
  std::string dataset_path;
  std::string bc_path;  // pretrained behavior model; trained in the run when empty
  std::string out_dir;
  std::uint64_t seed = 0;
  long steps = 50000;
  long eval_interval = 1000;
  int eval_episodes = env::kDefaultEvalEpisodes;
  std::size_t batch_size = 256;
  // auto: Laplace for the bandit, mixture otherwise.
  BehaviorChoice behavior = BehaviorChoice::kAuto;
  BCConfig bc;
  CriticConfig critic;
  CqlConfig cql;
  PolicyConfig policy;
  double brac_alpha = 0.1;

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

/// Step defaults per environment: 50k point mass, 5k bandit.
long default_steps(env::EnvId env);

struct MetricsRow {
  long step = 0;
  double mean_return = 0.0;
  double normalized_return = 0.0;
  std::optional<double> critic_td;
  std::optional<double> penalty;  // weighted regularizer in the critic loss
  std::optional<double> actor_loss;
  std::optional<double> temperature;
  std::optional<double> grad_norm_sq;  // mean ||grad_a O||^2 at the penalty actions
  std::optional<double> behavior_loglik;  // mean log mu of the evaluation actions
};

inline constexpr const char* kMetricsHeader =
    "step,mean_return,normalized_return,critic_td,penalty,actor_loss,temperature,grad_norm_sq,"
    "behavior_loglik";

std::string format_metrics_row(const MetricsRow& row);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

enum class RunStatus { kCompleted, kCollapsed };

struct RunResult {
  RunStatus status = RunStatus::kCompleted;
  long steps_completed = 0;
  std::optional<long> collapse_step;  // the update step that produced non-finite values
  std::string collapse_reason;
  std::vector<MetricsRow> metrics;
  std::optional<env::EvalResult> final_eval;  // absent after a collapse
  std::uint64_t eval_seed = 0;
  std::shared_ptr<const BehaviorModel> behavior;
  std::shared_ptr<CriticPair> critic;
  std::shared_ptr<PolicyModel> policy;
};

/// Loads the dataset (and behavior model when bc_path is set), trains and,
/// when out_dir is set, writes config.json, metrics.csv, checkpoint.fbck and
/// summary.json there.
RunResult run_training(const RunConfig& config);
/// Same with an in-memory dataset; `behavior` overrides bc_path when given.
RunResult run_training(const RunConfig& config, const Dataset& data,
                       std::shared_ptr<const BehaviorModel> behavior = nullptr);

/// Baseline entry point: cql, brac, sac or bc with the shared metrics schema.
RunResult run_baseline(Algo algo, const Dataset& data, RunConfig config, std::uint64_t seed,
                       std::shared_ptr<const BehaviorModel> behavior = nullptr);

/// Fits the behavior model a run would use.
BehaviorModel fit_behavior(const RunConfig& config, const Dataset& data);

// ---- landscapes (1-D actions) ----

struct LandscapeVariant {
  Algo method = Algo::kFisherBrc;  // kFisherBrc: O + log mu; kBrac: R + coefficient * log mu
  double coefficient = 0.0;
  std::shared_ptr<const CriticPair> critic;
};

struct Landscape {
  Eigen::VectorXd actions;
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> columns;

  const Eigen::VectorXd& column(const std::string& name) const;
  void write_csv(const std::filesystem::path& path) const;
};

/// Columns: log_mu, reward_synthetic (the true bandit reward, -1e6 outside
/// the data support), then one "<method>:<coefficient>" column per variant.
/// Every critic is evaluated at the all-zero state.
Landscape export_landscape(const BehaviorModel& behavior, const oracle::Grid1D& grid,
                           const std::vector<LandscapeVariant>& variants);

/// Grid actions attaining the maximum of `values` (ties within 1e-12).
std::vector<double> argmax_actions(const Eigen::VectorXd& actions, const Eigen::VectorXd& values);

// ---- ablations ----

struct AblationConfig {
  std::string suite;  // lambda-sweep | no-offset-gp
  std::map<Tier, std::string> datasets;
  RunConfig base;
  int seeds = 5;
  std::string out_dir;
};

struct AblationRow {
  std::string variant;
  Tier tier = Tier::kMedium;
  std::vector<double> final_normalized;  // completed runs only
  int collapses = 0;
  int runs = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

/// Runs every variant over `seeds` seeds per dataset; collapses are counted
/// and the suite continues. Writes summary.csv when out_dir is set.
std::vector<AblationRow> run_ablation(const AblationConfig& config);
std::vector<std::pair<std::string, RunConfig>> ablation_variants(const std::string& suite,
                                                                 const RunConfig& base);

}  // namespace fbrc
