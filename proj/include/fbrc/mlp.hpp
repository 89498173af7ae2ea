#pragma once

#include "fbrc/autodiff.hpp"
#include "fbrc/parameters.hpp"
#include "fbrc/random.hpp"

#include <string>
#include <vector>

namespace fbrc {

enum class Activation { kRelu, kTanh, kSoftplus, kNone };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct MlpArch {
  int input = 1;
  std::vector<int> hidden{64, 64};
  int output = 1;
  Activation activation = Activation::kRelu;
  // Zero final layer: the network outputs exactly 0 at initialization.
  bool zero_final = false;

  std::vector<int> layer_sizes() const;
  bool operator==(const MlpArch&) const = default;
};

/// Hidden layers use uniform fan-in scaling U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
ParameterSet init_mlp(const MlpArch& arch, Rng& rng);

/// Applies the network to a batch (rows = samples). Throws ShapeError when the
/// input width or parameter shapes disagree with `arch`.
ad::Var mlp_apply(const ParameterSet& params, const ad::Var& input, const MlpArch& arch);

}  // namespace fbrc
