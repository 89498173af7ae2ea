#include "fbrc/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

using namespace fbrc;
using ad::Matrix;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path fresh_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("fbrc_harness_" + name);
  fs::remove_all(d);
  return d;
}

const fs::path& bandit_path() {
  static const fs::path p = [] {
    fs::path path = fs::temp_directory_path() / "fbrc_harness_bandit.ofrl";
    write_dataset(path, env::gen_bandit_dataset(0));
    return path;
  }();
  return p;
}

RunConfig tiny(Algo algo = Algo::kFisherBrc) {
  RunConfig c;
  c.algo = algo;
  c.dataset_path = bandit_path().string();
  c.steps = 60;
  c.eval_interval = 20;
  c.batch_size = 32;
  c.critic.hidden = {16, 16};
  c.policy.hidden = {16, 16};
  c.bc.steps = 50;
  c.bc.hidden = {16};
  c.bc.components = 2;
  return c;
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c = tiny(Algo::kCql);
  c.seed = 17;
  c.critic.lambda = 0.7;
  c.critic.penalty_source = PenaltySource::kUniform;
  c.critic.reward_bonus = 5.0;
  c.cql.proposal = CqlProposal::kPolicy;
  c.policy.target_entropy = -3.0;
  c.bc.target_entropy = -2.0;
  c.behavior = BehaviorChoice::kMixture;
  c.brac_alpha = 0.3;
  EXPECT_EQ(RunConfig::from_json(c.to_json()).to_json(), c.to_json());
}

TEST(RunConfig, Validation) {
  RunConfig c = tiny();
  c.eval_interval = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny();
  c.critic.lambda = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(algo_from_string("bcq"), std::invalid_argument);
  for (Algo a : {Algo::kFisherBrc, Algo::kBrac, Algo::kCql, Algo::kSac, Algo::kBc}) {
    EXPECT_EQ(algo_from_string(to_string(a)), a);
  }
  EXPECT_EQ(default_steps(env::EnvId::kBandit), 5000);
  EXPECT_EQ(default_steps(env::EnvId::kPointMass), 50000);
}

TEST(Metrics, RowFormatting) {
  MetricsRow r;
  r.step = 3;
  r.mean_return = -1.5;
  r.normalized_return = 25.0;
  r.temperature = 0.1;
  EXPECT_EQ(format_metrics_row(r), "3,-1.5,25,,,,0.1,,");
}

TEST(RunTraining, SameSeedGivesIdenticalMetrics) {
  RunConfig a = tiny(), b = tiny();
  a.out_dir = fresh_dir("det_a").string();
  b.out_dir = fresh_dir("det_b").string();
  RunResult ra = run_training(a), rb = run_training(b);
  EXPECT_EQ(ra.status, RunStatus::kCompleted);
  const std::string ma = slurp(fs::path(a.out_dir) / "metrics.csv");
  EXPECT_EQ(ma, slurp(fs::path(b.out_dir) / "metrics.csv"));
  EXPECT_EQ(slurp(fs::path(a.out_dir) / "checkpoint.fbck"), slurp(fs::path(b.out_dir) / "checkpoint.fbck"));
  EXPECT_EQ(count_lines(ma), 1 + 3);
  EXPECT_EQ(ma.substr(0, ma.find('\n')), kMetricsHeader);

  RunConfig c = tiny();
  c.seed = 1;
  EXPECT_NE(run_training(c).metrics.back().actor_loss, ra.metrics.back().actor_loss);
}

TEST(RunTraining, ConfigEchoReplaysTheRun) {
  RunConfig a = tiny(Algo::kBrac);
  a.seed = 4;
  a.out_dir = fresh_dir("replay_a").string();
  run_training(a);
  auto echoed = nlohmann::json::parse(slurp(fs::path(a.out_dir) / "config.json"));
  RunConfig b = RunConfig::from_json(echoed);
  b.out_dir = fresh_dir("replay_b").string();
  run_training(b);
  EXPECT_EQ(slurp(fs::path(a.out_dir) / "metrics.csv"), slurp(fs::path(b.out_dir) / "metrics.csv"));
}

TEST(RunTraining, MetricStepsAreMonotone) {
  RunConfig c = tiny();
  c.steps = 50;
  RunResult r = run_training(c);
  std::vector<long> steps;
  for (const auto& m : r.metrics) steps.push_back(m.step);
  EXPECT_EQ(steps, (std::vector<long>{20, 40, 50}));
  ASSERT_TRUE(r.final_eval.has_value());
  EXPECT_EQ(r.final_eval->mean_return, r.metrics.back().mean_return);
}

TEST(RunTraining, BcModeEvaluatesTheBehaviorMode) {
  RunConfig c = tiny(Algo::kBc);
  c.out_dir = fresh_dir("bc").string();
  c.behavior = BehaviorChoice::kMixture;
  RunResult r = run_training(c);
  ASSERT_EQ(r.metrics.size(), 1u);
  EXPECT_FALSE(r.critic);
  EXPECT_FALSE(r.metrics[0].critic_td.has_value());
  EXPECT_FALSE(r.metrics[0].actor_loss.has_value());
  auto direct = env::evaluate_policy([&](const Matrix& s) { return r.behavior->mode(s); },
                                     env::EnvId::kBandit, c.eval_episodes, r.eval_seed,
                                     env::bandit_references());
  EXPECT_EQ(r.final_eval->mean_return, direct.mean_return);
  // Fitting separately with the same config gives the same model.
  EXPECT_EQ(fit_behavior(c, read_dataset(bandit_path())).trunk().flatten(), r.behavior->trunk().flatten());
  const std::string m = slurp(fs::path(c.out_dir) / "metrics.csv");
  EXPECT_EQ(m.substr(0, m.find('\n')), kMetricsHeader);
}

TEST(RunTraining, BanditDefaultsToLaplaceBehavior) {
  RunResult r = run_training(tiny());
  ASSERT_TRUE(r.behavior);
  EXPECT_EQ(r.behavior->family(), BehaviorFamily::kLaplace);
}

TEST(RunTraining, PretrainedBehaviorIsLoaded) {
  RunConfig c = tiny();
  c.behavior = BehaviorChoice::kMixture;
  BehaviorModel m = fit_behavior(c, read_dataset(bandit_path()));
  fs::path p = fresh_dir("bcload");
  fs::create_directories(p);
  m.save(p / "bc.fbck");
  c.bc_path = (p / "bc.fbck").string();
  RunResult r = run_training(c);
  EXPECT_EQ(r.behavior->trunk().flatten(), m.trunk().flatten());
}

TEST(RunTraining, BaselinesShareTheSchema) {
  Dataset d = read_dataset(bandit_path());
  for (Algo a : {Algo::kCql, Algo::kBrac, Algo::kSac}) {
    RunConfig c = tiny();
    c.out_dir = fresh_dir("baseline_" + to_string(a)).string();
    RunResult r = run_baseline(a, d, c, 2);
    EXPECT_EQ(r.status, RunStatus::kCompleted) << to_string(a);
    EXPECT_FALSE(r.critic->config().use_offset);
    EXPECT_EQ(r.critic->config().lambda, 0.0);
    const std::string m = slurp(fs::path(c.out_dir) / "metrics.csv");
    EXPECT_EQ(m.substr(0, m.find('\n')), kMetricsHeader);
    EXPECT_TRUE(r.metrics.back().penalty.has_value());
  }
  EXPECT_THROW(run_baseline(Algo::kFisherBrc, d, tiny(), 0), std::invalid_argument);
}

TEST(RunTraining, CollapseIsRecordedWithPartialMetrics) {
  RunConfig c = tiny(Algo::kSac);
  c.critic.lr = 1e300;  // the first Adam step overflows
  c.eval_interval = 1;
  c.out_dir = fresh_dir("collapse").string();
  RunResult r = run_training(c);
  EXPECT_EQ(r.status, RunStatus::kCollapsed);
  ASSERT_TRUE(r.collapse_step.has_value());
  EXPECT_GE(*r.collapse_step, r.steps_completed);
  EXPECT_LE(*r.collapse_step, r.steps_completed + 1);
  // Rows before the failing step are kept.
  EXPECT_EQ(static_cast<long>(r.metrics.size()), *r.collapse_step - 1);
  EXPECT_FALSE(r.final_eval.has_value());
  EXPECT_FALSE(fs::exists(fs::path(c.out_dir) / "checkpoint.fbck"));
  auto summary = nlohmann::json::parse(slurp(fs::path(c.out_dir) / "summary.json"));
  EXPECT_EQ(summary["status"], "collapsed");
}

TEST(RunTraining, CheckpointHoldsEveryModel) {
  RunConfig c = tiny();
  c.out_dir = fresh_dir("ckpt").string();
  RunResult r = run_training(c);
  auto sections = read_checkpoint(fs::path(c.out_dir) / "checkpoint.fbck");
  PolicyModel p = PolicyModel::from_sections(sections);
  EXPECT_EQ(p.trunk().flatten(), r.policy->trunk().flatten());
  Rng rng(0);
  CriticPair critic(1, 1, r.critic->config(), r.behavior, rng);
  critic.load_sections(sections);
  for (int k = 0; k < 2; ++k) EXPECT_EQ(critic.online(k).flatten(), r.critic->online(k).flatten());
  BehaviorModel b = BehaviorModel::from_sections(sections);
  EXPECT_EQ(b.laplace_params().scale, r.behavior->laplace_params().scale);
}

TEST(Landscape, ZeroOffsetColumnEqualsLogMu) {
  Dataset d = read_dataset(bandit_path());
  auto mu = std::make_shared<const BehaviorModel>(fit_laplace(d));
  Rng rng(0);
  auto critic = std::make_shared<CriticPair>(1, 1, CriticConfig{}, mu, rng);
  auto l = export_landscape(*mu, oracle::Grid1D::action_box(201),
                            {{Algo::kFisherBrc, 0.1, critic}, {Algo::kBrac, 0.0, critic}});
  EXPECT_EQ(l.names, (std::vector<std::string>{"log_mu", "reward_synthetic", "fisher-brc:0.1", "brac:0"}));
  EXPECT_EQ(l.column("fisher-brc:0.1"), l.column("log_mu"));
  EXPECT_EQ(l.column("brac:0"), Eigen::VectorXd::Zero(201));
  EXPECT_THROW(l.column("nope"), std::out_of_range);
}

TEST(Landscape, BracColumnAddsScaledLogMu) {
  Dataset d = read_dataset(bandit_path());
  auto mu = std::make_shared<const BehaviorModel>(fit_laplace(d));
  Rng rng(1);
  auto critic = std::make_shared<CriticPair>(1, 1, CriticConfig{.use_offset = false}, mu, rng);
  MlpArch arch = critic->arch();
  arch.zero_final = false;
  critic->online(0).assign(init_mlp(arch, rng).flatten());
  critic->online(1).assign(init_mlp(arch, rng).flatten());
  oracle::Grid1D g = oracle::Grid1D::action_box(101);
  auto l = export_landscape(*mu, g, {{Algo::kBrac, 0.0, critic}, {Algo::kBrac, 3.0, critic}});
  Eigen::VectorXd diff = l.column("brac:3") - l.column("brac:0");
  EXPECT_LT((diff - 3.0 * l.column("log_mu")).cwiseAbs().maxCoeff(), 1e-12);
  // The plain critic's Fisher-BRC view is the raw min-twin network.
  auto l2 = export_landscape(*mu, g, {{Algo::kFisherBrc, 0.0, critic}});
  EXPECT_EQ(l2.column("fisher-brc:0"), l.column("brac:0"));
}

TEST(Landscape, WritesCsv) {
  Dataset d = read_dataset(bandit_path());
  auto mu = std::make_shared<const BehaviorModel>(fit_laplace(d));
  auto l = export_landscape(*mu, oracle::Grid1D(-1, 1, 5), {});
  fs::path p = fresh_dir("land.csv");
  l.write_csv(p);
  std::string text = slurp(p);
  EXPECT_EQ(text.substr(0, text.find('\n')), "action,log_mu,reward_synthetic");
  EXPECT_EQ(count_lines(text), 6);
}

TEST(Landscape, RequiresOneDimensionalActions) {
  MlpArch arch{.input = 2, .hidden = {4}, .output = 1 * (1 + 2 * 2)};
  Rng rng(0);
  BehaviorModel m = BehaviorModel::mixture(arch, 1, 2, init_mlp(arch, rng));
  EXPECT_THROW(export_landscape(m, oracle::Grid1D(-1, 1, 5), {}), std::invalid_argument);
}

TEST(Landscape, ArgmaxReportsTies) {
  Eigen::VectorXd a(5), v(5);
  a << -1, -0.5, 0, 0.5, 1;
  v << 0, 2, 1, 2, -3;
  EXPECT_EQ(argmax_actions(a, v), (std::vector<double>{-0.5, 0.5}));
}

TEST(Ablation, VariantSets) {
  RunConfig base = tiny();
  auto sweep = ablation_variants("lambda-sweep", base);
  ASSERT_EQ(sweep.size(), 3u);
  EXPECT_EQ(sweep[0].second.critic.lambda, 0.0);
  EXPECT_EQ(sweep[1].second.critic.lambda, 0.1);
  EXPECT_EQ(sweep[2].second.critic.lambda, 1.0);
  auto gp = ablation_variants("no-offset-gp", base);
  ASSERT_EQ(gp.size(), 2u);
  EXPECT_TRUE(gp[0].second.critic.use_offset);
  EXPECT_FALSE(gp[1].second.critic.use_offset);
  EXPECT_GT(gp[1].second.critic.lambda, 0.0);
  EXPECT_THROW(ablation_variants("everything", base), std::invalid_argument);
}

TEST(Ablation, RunsEveryVariantAndSeed) {
  AblationConfig cfg;
  cfg.suite = "lambda-sweep";
  cfg.datasets[Tier::kMedium] = bandit_path().string();
  cfg.base = tiny();
  cfg.base.steps = 20;
  cfg.seeds = 2;
  cfg.out_dir = fresh_dir("ablation").string();
  auto rows = run_ablation(cfg);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.runs, 2);
    EXPECT_EQ(static_cast<int>(r.final_normalized.size()) + r.collapses, 2);
  }
  std::string summary = slurp(fs::path(cfg.out_dir) / "summary.csv");
  EXPECT_EQ(count_lines(summary), 4);
}
