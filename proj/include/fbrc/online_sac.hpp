#pragma once

// Online SAC on the point mass, used only to produce behavior policies of
// graded quality for the offline datasets.

#include "fbrc/actors.hpp"
#include "fbrc/envs.hpp"

namespace fbrc {

struct OnlineSacConfig {
  long steps = 100000;
  long warmup = 2000;  // uniform-random actions before learning starts
  long checkpoint_every = 1000;
  std::size_t batch_size = 256;
  std::vector<int> hidden{64, 64};
  int eval_episodes = env::kDefaultEvalEpisodes;
  int reference_episodes = 100;
  // The expert must close this fraction of the gap between the random
  // policy's return and zero (the unreachable perfect score).
  double expert_threshold = 0.5;
  double medium_fraction = 0.5;  // normalized-return fraction for the medium tier
  env::PointMassSpec env;
};

class ExpertTrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointScore {
  long step = 0;
  double mean_return = 0.0;
};

struct ExpertRun {
  PolicyModel expert;
  PolicyModel medium;
  long expert_step = 0;
  long medium_step = 0;
  env::References refs;
  double medium_return = 0.0;
  std::vector<CheckpointScore> checkpoints;
  std::vector<Transition> replay;
};

/// Trains online SAC. The expert is the best-scoring checkpoint; the medium
/// policy is the first checkpoint whose normalized return reaches
/// 100 * medium_fraction. Throws ExpertTrainingError when the expert misses
/// the threshold.
ExpertRun train_pointmass_expert(const OnlineSacConfig& config, std::uint64_t seed);

/// Stochastic rollouts of `act` truncated to `size` transitions.
std::vector<Transition> rollout_transitions(const env::ActionFn& act, std::size_t size,
                                            std::uint64_t seed, const env::PointMassSpec& spec);

struct PointMassSuite {
  Dataset random, medium, expert, mixed;
  const Dataset& tier(Tier t) const;
};

/// All four tiers from one expert training run.
PointMassSuite gen_pointmass_suite(std::size_t size, std::uint64_t seed,
                                   const OnlineSacConfig& config = {});
/// Same from a finished expert run (its replay buffer is consumed).
PointMassSuite gen_pointmass_suite(ExpertRun run, std::size_t size, std::uint64_t seed,
                                   const env::PointMassSpec& spec = {});
Dataset gen_pointmass_dataset(Tier tier, std::size_t size, std::uint64_t seed,
                              const OnlineSacConfig& config = {});

}  // namespace fbrc
