// Command-line front end: data generation, behavior cloning, training,
// landscapes, ablations and evaluation.

#include "fbrc/harness.hpp"
#include "fbrc/online_sac.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace fbrc;

namespace {

int gen_data(const std::string& env_name, const std::string& tier, std::uint64_t seed,
             const std::string& out, std::size_t size, long sac_steps) {
  if (env_name == "bandit") {
    Dataset d = env::gen_bandit_dataset(seed, size ? static_cast<int>(size) : env::kBanditDatasetSize);
    write_dataset(out, d);
    std::cout << "wrote " << d.size() << " bandit transitions to " << out << "\n";
    return 0;
  }
  if (env_name != "pointmass") throw std::invalid_argument("unknown env '" + env_name + "'");
  OnlineSacConfig sac;
  if (sac_steps > 0) sac.steps = sac_steps;
  const std::size_t n = size ? size : 100000;
  if (tier == "all") {
    PointMassSuite suite = gen_pointmass_suite(n, seed, sac);
    std::filesystem::create_directories(out);
    for (Tier t : {Tier::kRandom, Tier::kMedium, Tier::kExpert, Tier::kMixed}) {
      auto path = std::filesystem::path(out) / (to_string(t) + ".ofrl");
      write_dataset(path, suite.tier(t));
      std::cout << "wrote " << suite.tier(t).size() << " transitions to " << path.string() << "\n";
    }
    return 0;
  }
  Dataset d = gen_pointmass_dataset(tier_from_string(tier), n, seed, sac);
  write_dataset(out, d);
  std::cout << "wrote " << d.size() << " " << tier << " transitions to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline RL lab: Fisher-BRC, BRAC, CQL, SAC and BC on small tasks"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate an offline dataset");
  std::string gen_env = "bandit", gen_tier = "random", gen_out;
  std::uint64_t gen_seed = 0;
  std::size_t gen_size = 0;
  long gen_sac_steps = 0;
  gen->add_option("--env", gen_env, "bandit | pointmass")->check(CLI::IsMember({"bandit", "pointmass"}));
  gen->add_option("--tier", gen_tier, "random | medium | expert | mixed | all (point mass)");
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out, "Output file (directory for --tier all)")->required();
  gen->add_option("--size", gen_size, "Transitions (default 1000 bandit, 100000 point mass)");
  gen->add_option("--sac-steps", gen_sac_steps, "Online SAC steps for the point-mass expert");

  // train-bc
  auto* tbc = app.add_subcommand("train-bc", "Fit a behavior model");
  std::string bc_data, bc_out, bc_family = "auto";
  long bc_steps = 0;
  std::uint64_t bc_seed = 0;
  tbc->add_option("--data", bc_data)->required();
  tbc->add_option("--out", bc_out)->required();
  tbc->add_option("--steps", bc_steps);
  tbc->add_option("--seed", bc_seed);
  tbc->add_option("--family", bc_family, "auto | mixture | laplace");

  // train
  auto* train = app.add_subcommand("train", "Train an agent on an offline dataset");
  RunConfig rc;
  std::string algo = "fisher-brc", penalty_source = "policy", config_path;
  bool no_offset = false;
  long train_steps = -1;
  train->add_option("--config", config_path, "Replay a config.json (other options override it)");
  train->add_option("--algo", algo)->check(CLI::IsMember({"fisher-brc", "brac", "cql", "sac", "bc"}));
  train->add_option("--data", rc.dataset_path);
  train->add_option("--bc", rc.bc_path);
  train->add_option("--lambda", rc.critic.lambda);
  train->add_option("--seed", rc.seed);
  train->add_option("--out", rc.out_dir);
  train->add_flag("--no-offset", no_offset);
  train->add_option("--penalty-source", penalty_source)->check(CLI::IsMember({"policy", "data", "uniform"}));
  train->add_option("--reward-bonus", rc.critic.reward_bonus);
  train->add_option("--steps", train_steps);
  train->add_option("--eval-interval", rc.eval_interval);
  train->add_option("--batch-size", rc.batch_size);
  train->add_option("--brac-alpha", rc.brac_alpha);
  train->add_option("--cql-weight", rc.cql.weight);
  train->add_option("--bc-steps", rc.bc.steps);

  // landscape
  auto* land = app.add_subcommand("landscape", "Export a 1-D critic landscape as CSV");
  std::vector<std::string> models;
  int grid_n = 2001;
  std::string land_out;
  land->add_option("--models", models, "Run directories, optionally DIR:coefficient")->required();
  land->add_option("--grid", grid_n, "Odd number of grid points");
  land->add_option("--out", land_out)->required();

  // ablate
  auto* abl = app.add_subcommand("ablate", "Run an ablation suite");
  std::string suite, abl_out;
  std::vector<std::string> abl_data;
  int abl_seeds = 5;
  long abl_steps = -1;
  abl->add_option("--suite", suite)->required()->check(CLI::IsMember({"lambda-sweep", "no-offset-gp"}));
  abl->add_option("--out", abl_out)->required();
  abl->add_option("--data", abl_data, "Dataset files (the tier is read from each file)")->required();
  abl->add_option("--seeds", abl_seeds);
  abl->add_option("--steps", abl_steps);

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a saved policy");
  std::string policy_path, eval_data;
  int episodes = env::kDefaultEvalEpisodes;
  std::uint64_t eval_seed = 0;
  ev->add_option("--policy", policy_path, "Checkpoint holding a policy")->required();
  ev->add_option("--episodes", episodes);
  ev->add_option("--data", eval_data, "Dataset whose reference scores normalize the return");
  ev->add_option("--seed", eval_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return gen_data(gen_env, gen_tier, gen_seed, gen_out, gen_size, gen_sac_steps);

    if (*tbc) {
      Dataset d = read_dataset(bc_data);
      RunConfig c;
      c.behavior = behavior_choice_from_string(bc_family);
      c.seed = bc_seed;
      if (bc_steps > 0) c.bc.steps = bc_steps;
      BehaviorModel m = fit_behavior(c, d);
      m.save(bc_out);
      std::cout << "mean log-likelihood " << bc_eval_loglik(m, d) << "\n";
      return 0;
    }

    if (*train) {
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open " + config_path);
        RunConfig from = RunConfig::from_json(nlohmann::json::parse(in));
        // Explicit options win over the replayed file.
        auto given = [&](const char* name) { return train->count(name) > 0; };
        if (!given("--data")) rc.dataset_path = from.dataset_path;
        if (!given("--out")) rc.out_dir = from.out_dir;
        RunConfig merged = from;
        merged.dataset_path = rc.dataset_path;
        merged.out_dir = rc.out_dir;
        if (given("--seed")) merged.seed = rc.seed;
        if (given("--algo")) merged.algo = algo_from_string(algo);
        if (given("--lambda")) merged.critic.lambda = rc.critic.lambda;
        if (given("--steps")) merged.steps = train_steps;
        rc = merged;
      } else {
        rc.algo = algo_from_string(algo);
        rc.critic.use_offset = !no_offset;
        rc.critic.penalty_source = penalty_source_from_string(penalty_source);
        if (rc.dataset_path.empty()) throw std::invalid_argument("--data is required");
        if (train_steps >= 0) {
          rc.steps = train_steps;
        } else {
          Dataset d = read_dataset(rc.dataset_path);
          rc.steps = default_steps(env::env_from_spec_id(d.info.spec_id));
        }
      }
      RunResult r = run_training(rc);
      if (r.status == RunStatus::kCollapsed) {
        std::cout << "collapsed at step " << *r.collapse_step << ": " << r.collapse_reason << "\n";
        return 2;
      }
      std::cout << "final mean return " << r.final_eval->mean_return << ", normalized "
                << r.final_eval->normalized_return << "\n";
      return 0;
    }

    if (*land) {
      std::vector<LandscapeVariant> variants;
      std::shared_ptr<const BehaviorModel> behavior;
      for (const auto& spec : models) {
        std::string dir = spec;
        std::optional<double> coef;
        if (auto pos = spec.rfind(':'); pos != std::string::npos) {
          dir = spec.substr(0, pos);
          coef = std::stod(spec.substr(pos + 1));
        }
        std::ifstream in(std::filesystem::path(dir) / "config.json");
        if (!in) throw std::runtime_error("no config.json in " + dir);
        RunConfig c = RunConfig::from_json(nlohmann::json::parse(in));
        auto sections = read_checkpoint(std::filesystem::path(dir) / "checkpoint.fbck");
        auto mu = std::make_shared<BehaviorModel>(BehaviorModel::from_sections(sections));
        if (!behavior) behavior = mu;
        CriticConfig cc = c.critic;
        if (c.algo != Algo::kFisherBrc) cc.use_offset = false;
        Rng unused(0);
        const int state_dim = arch_of(find_section(sections, "OFF1")).input - mu->action_dim();
        auto critic = std::make_shared<CriticPair>(state_dim, mu->action_dim(), cc, mu, unused);
        critic->load_sections(sections);
        LandscapeVariant v;
        v.method = c.algo == Algo::kBrac ? Algo::kBrac : Algo::kFisherBrc;
        v.coefficient = coef.value_or(v.method == Algo::kBrac ? c.brac_alpha : c.critic.lambda);
        v.critic = critic;
        variants.push_back(v);
      }
      Landscape l = export_landscape(*behavior, oracle::Grid1D::action_box(grid_n), variants);
      l.write_csv(land_out);
      std::cout << "wrote " << l.actions.size() << " rows to " << land_out << "\n";
      return 0;
    }

    if (*abl) {
      AblationConfig ac;
      ac.suite = suite;
      ac.seeds = abl_seeds;
      ac.out_dir = abl_out;
      for (const auto& p : abl_data) ac.datasets[read_dataset(p).info.tier] = p;
      Dataset first = read_dataset(abl_data.front());
      ac.base.steps = abl_steps >= 0 ? abl_steps : default_steps(env::env_from_spec_id(first.info.spec_id));
      auto rows = run_ablation(ac);
      for (const auto& r : rows) {
        std::cout << r.variant << " [" << to_string(r.tier) << "] " << r.mean << " +- " << r.stddev
                  << " (" << r.collapses << "/" << r.runs << " collapsed)\n";
      }
      return 0;
    }

    if (*ev) {
      PolicyModel p = PolicyModel::from_sections(read_checkpoint(policy_path));
      env::EnvId id = p.action_dim() == 1 ? env::EnvId::kBandit : env::EnvId::kPointMass;
      env::References refs = env::bandit_references();
      if (!eval_data.empty()) {
        Dataset d = read_dataset(eval_data);
        id = env::env_from_spec_id(d.info.spec_id);
        refs = id == env::EnvId::kBandit ? env::bandit_references() : env::references_of(d.info);
      } else if (id == env::EnvId::kPointMass) {
        throw std::invalid_argument("point-mass evaluation needs --data for reference scores");
      }
      auto r = env::evaluate_policy([&](const ad::Matrix& s) { return p.act_deterministic(s); },
                                    id, episodes, eval_seed, refs);
      std::cout << "mean return " << r.mean_return << ", normalized " << r.normalized_return << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
