#include "fbrc/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace fbrc {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSoftplus: return "softplus";
    case Activation::kNone: return "none";
  }
  return "none";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "softplus") return Activation::kSoftplus;
  if (s == "none") return Activation::kNone;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

std::vector<int> MlpArch::layer_sizes() const {
  std::vector<int> sizes{input};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output);
  return sizes;
}

ParameterSet init_mlp(const MlpArch& arch, Rng& rng) {
  const auto sizes = arch.layer_sizes();
  ParameterSet params;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const bool last = l + 2 == sizes.size();
    if (last && arch.zero_final) {
      params.add("w" + std::to_string(l), ad::Matrix::Zero(fan_in, fan_out));
      params.add("b" + std::to_string(l), ad::Matrix::Zero(1, fan_out));
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    params.add("w" + std::to_string(l), uniform(fan_in, fan_out, -bound, bound, rng));
    params.add("b" + std::to_string(l), uniform(1, fan_out, -bound, bound, rng));
  }
  return params;
}

namespace {

ad::Var activate(const ad::Var& x, Activation a) {
  switch (a) {
    case Activation::kRelu: return ad::relu(x);
    case Activation::kTanh: return ad::tanh(x);
    case Activation::kSoftplus: return ad::softplus(x);
    case Activation::kNone: return x;
  }
  return x;
}

}  // namespace

ad::Var mlp_apply(const ParameterSet& params, const ad::Var& input, const MlpArch& arch) {
  const auto sizes = arch.layer_sizes();
  const std::size_t layers = sizes.size() - 1;
  if (params.tensor_count() != 2 * layers) {
    throw ad::ShapeError("mlp_apply: parameter set does not match architecture");
  }
  if (input.cols() != arch.input) {
    throw ad::ShapeError("mlp_apply: input width " + std::to_string(input.cols()) +
                         " but architecture expects " + std::to_string(arch.input));
  }
  ad::Var h = input;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& w = params[2 * l];
    const auto& b = params[2 * l + 1];
    if (w.rows() != sizes[l] || w.cols() != sizes[l + 1] || b.cols() != sizes[l + 1]) {
      throw ad::ShapeError("mlp_apply: layer " + std::to_string(l) + " has wrong shape");
    }
    h = ad::add(ad::matmul(h, w), b);
    if (l + 1 < layers) h = activate(h, arch.activation);
  }
  return h;
}

}  // namespace fbrc
