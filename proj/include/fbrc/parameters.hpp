#pragma once

#include "fbrc/autodiff.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fbrc {

/// Named collection of trainable leaves. The number of scalars is fixed at
/// construction; values change only through element-wise affine updates.
class ParameterSet {
 public:
  ParameterSet() = default;

  void add(std::string name, ad::Matrix value);

  std::size_t tensor_count() const { return params_.size(); }
  std::size_t scalar_count() const;
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<ad::Var>& vars() const { return params_; }
  const ad::Var& operator[](std::size_t i) const { return params_[i]; }
  ad::Var& operator[](std::size_t i) { return params_[i]; }

  std::vector<double> flatten() const;
  /// Overwrites all values from a flat array (same order as flatten()).
  void assign(std::span<const double> flat);

  /// Deep copy with fresh leaves (no shared storage).
  ParameterSet clone() const;
  /// Same values as constants; use to evaluate a network without recording
  /// gradients for its weights.
  ParameterSet frozen() const;

  /// this = (1 - tau) * this + tau * source, element-wise.
  void polyak_update(const ParameterSet& source, double tau);

  /// FNV-1a over the raw bytes of every value.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> names_;
  std::vector<ad::Var> params_;
};

}  // namespace fbrc
