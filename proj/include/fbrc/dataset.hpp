#pragma once

#include "fbrc/autodiff.hpp"
#include "fbrc/random.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fbrc {

struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  double r = 0.0;
  std::vector<double> s_next;
  bool done = false;
};

enum class Tier : std::uint8_t { kRandom = 0, kMedium = 1, kExpert = 2, kMixed = 3 };

std::string to_string(Tier t);
Tier tier_from_string(const std::string& s);

struct DatasetInfo {
  std::string spec_id;  // "bandit" or "pointmass"
  Tier tier = Tier::kRandom;
  std::uint64_t seed = 0;
  std::string behavior;
  int state_dim = 0;
  int action_dim = 0;
  // Reference returns for score normalization; recorded at generation.
  std::optional<double> random_score;
  std::optional<double> expert_score;
};

struct Dataset {
  DatasetInfo info;
  std::vector<Transition> transitions;

  std::size_t size() const { return transitions.size(); }
  /// Throws std::invalid_argument when empty or a transition violates the
  /// declared dimensions or has a non-finite field.
  void validate() const;
};

/// Stacked minibatch; rows are transitions.
struct Batch {
  ad::Matrix s, a, r, s_next, done;
  std::vector<std::size_t> indices;
};

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices);
Batch sample_batch(const Dataset& data, std::size_t batch_size, Rng& rng);
Batch full_batch(const Dataset& data);

/// Binary format: "OFRL", u32 version, u32 state_dim, u32 action_dim, u64
/// count, u8 tier, then `count` records of f64 [s, a, r, s', done];
/// little-endian. Metadata that the format cannot carry goes to a JSON
/// sidecar at `path + ".json"`.
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);
void export_csv(const std::filesystem::path& path, const Dataset& data);

inline constexpr std::uint32_t kDatasetVersion = 1;

}  // namespace fbrc
