#include "fbrc/parameters.hpp"

#include <cstring>
#include <stdexcept>

namespace fbrc {

void ParameterSet::add(std::string name, ad::Matrix value) {
  names_.push_back(std::move(name));
  params_.push_back(ad::parameter(std::move(value)));
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value().size());
  return n;
}

std::vector<double> ParameterSet::flatten() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& p : params_) {
    const auto& m = p.value();
    out.insert(out.end(), m.data(), m.data() + m.size());
  }
  return out;
}

void ParameterSet::assign(std::span<const double> flat) {
  if (flat.size() != scalar_count()) {
    throw std::invalid_argument("parameter count mismatch: expected " +
                                std::to_string(scalar_count()) + ", got " +
                                std::to_string(flat.size()));
  }
  std::size_t at = 0;
  for (auto& p : params_) {
    auto& m = p.mutable_value();
    std::memcpy(m.data(), flat.data() + at, sizeof(double) * static_cast<std::size_t>(m.size()));
    at += static_cast<std::size_t>(m.size());
  }
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (std::size_t i = 0; i < params_.size(); ++i) out.add(names_[i], params_[i].value());
  return out;
}

ParameterSet ParameterSet::frozen() const {
  ParameterSet out;
  out.names_ = names_;
  for (const auto& p : params_) out.params_.push_back(ad::constant(p.value()));
  return out;
}

void ParameterSet::polyak_update(const ParameterSet& source, double tau) {
  if (source.params_.size() != params_.size()) {
    throw std::invalid_argument("polyak_update: structure mismatch");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& t = params_[i].mutable_value();
    const auto& s = source.params_[i].value();
    if (t.rows() != s.rows() || t.cols() != s.cols()) {
      throw std::invalid_argument("polyak_update: shape mismatch in " + names_[i]);
    }
    t = (1.0 - tau) * t + tau * s;
  }
}

std::uint64_t ParameterSet::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params_) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.value().data());
    const auto n = sizeof(double) * static_cast<std::size_t>(p.value().size());
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace fbrc
