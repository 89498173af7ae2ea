#include "fbrc/dataset.hpp"

#include "fbrc/binary_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace fbrc {

std::string to_string(Tier t) {
  switch (t) {
    case Tier::kRandom: return "random";
    case Tier::kMedium: return "medium";
    case Tier::kExpert: return "expert";
    case Tier::kMixed: return "mixed";
  }
  return "random";
}

Tier tier_from_string(const std::string& s) {
  if (s == "random") return Tier::kRandom;
  if (s == "medium") return Tier::kMedium;
  if (s == "expert") return Tier::kExpert;
  if (s == "mixed") return Tier::kMixed;
  throw std::invalid_argument("unknown tier '" + s + "'");
}

void Dataset::validate() const {
  if (transitions.empty()) throw std::invalid_argument("dataset is empty");
  const auto n = static_cast<std::size_t>(info.state_dim);
  const auto m = static_cast<std::size_t>(info.action_dim);
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto& t = transitions[i];
    if (t.s.size() != n || t.s_next.size() != n || t.a.size() != m) {
      throw std::invalid_argument("transition " + std::to_string(i) + " has wrong dimensions");
    }
    auto finite = [](const std::vector<double>& v) {
      for (double x : v)
        if (!std::isfinite(x)) return false;
      return true;
    };
    if (!std::isfinite(t.r) || !finite(t.s) || !finite(t.a) || !finite(t.s_next)) {
      throw std::invalid_argument("transition " + std::to_string(i) + " is not finite");
    }
  }
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  const auto b = static_cast<Eigen::Index>(indices.size());
  const int n = data.info.state_dim;
  const int m = data.info.action_dim;
  Batch out;
  out.s.resize(b, n);
  out.a.resize(b, m);
  out.r.resize(b, 1);
  out.s_next.resize(b, n);
  out.done.resize(b, 1);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& t = data.transitions.at(indices[static_cast<std::size_t>(i)]);
    for (int j = 0; j < n; ++j) {
      out.s(i, j) = t.s[j];
      out.s_next(i, j) = t.s_next[j];
    }
    for (int j = 0; j < m; ++j) out.a(i, j) = t.a[j];
    out.r(i, 0) = t.r;
    out.done(i, 0) = t.done ? 1.0 : 0.0;
  }
  out.indices.assign(indices.begin(), indices.end());
  return out;
}

Batch sample_batch(const Dataset& data, std::size_t batch_size, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = pick(rng);
  return make_batch(data, idx);
}

Batch full_batch(const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(data, idx);
}

namespace {

std::filesystem::path sidecar(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

std::string infer_spec(int state_dim, int action_dim) {
  if (state_dim == 1 && action_dim == 1) return "bandit";
  if (state_dim == 4 && action_dim == 2) return "pointmass";
  return "unknown";
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  data.validate();
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write("OFRL", 4);
    io::write_le<std::uint32_t>(out, kDatasetVersion);
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.info.state_dim));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.info.action_dim));
    io::write_le<std::uint64_t>(out, data.transitions.size());
    io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(data.info.tier));
    for (const auto& t : data.transitions) {
      for (double v : t.s) io::write_f64(out, v);
      for (double v : t.a) io::write_f64(out, v);
      io::write_f64(out, t.r);
      for (double v : t.s_next) io::write_f64(out, v);
      io::write_f64(out, t.done ? 1.0 : 0.0);
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
  }
  nlohmann::json meta;
  meta["spec_id"] = data.info.spec_id;
  meta["tier"] = to_string(data.info.tier);
  meta["seed"] = data.info.seed;
  meta["behavior"] = data.info.behavior;
  if (data.info.random_score) meta["random_score"] = *data.info.random_score;
  if (data.info.expert_score) meta["expert_score"] = *data.info.expert_score;
  std::ofstream js(sidecar(path), std::ios::trunc);
  js << std::setprecision(17) << meta.dump(2) << "\n";
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "OFRL") {
    throw io::FormatError(path.string() + ": not a dataset file (bad magic)");
  }
  const auto version = io::read_le<std::uint32_t>(in, "version");
  if (version != kDatasetVersion) {
    throw io::FormatError(path.string() + ": unsupported dataset version " +
                          std::to_string(version));
  }
  Dataset data;
  data.info.state_dim = static_cast<int>(io::read_le<std::uint32_t>(in, "state dim"));
  data.info.action_dim = static_cast<int>(io::read_le<std::uint32_t>(in, "action dim"));
  if (data.info.state_dim <= 0 || data.info.action_dim <= 0) {
    throw io::FormatError(path.string() + ": invalid dimensions");
  }
  const auto count = io::read_le<std::uint64_t>(in, "record count");
  const auto tier = io::read_le<std::uint8_t>(in, "tier");
  if (tier > 3) throw io::FormatError(path.string() + ": unknown tier tag");
  data.info.tier = static_cast<Tier>(tier);
  data.transitions.resize(count);
  const int n = data.info.state_dim;
  const int m = data.info.action_dim;
  for (auto& t : data.transitions) {
    t.s.resize(n);
    t.a.resize(m);
    t.s_next.resize(n);
    for (auto& v : t.s) v = io::read_f64(in, "record");
    for (auto& v : t.a) v = io::read_f64(in, "record");
    t.r = io::read_f64(in, "record");
    for (auto& v : t.s_next) v = io::read_f64(in, "record");
    t.done = io::read_f64(in, "record") != 0.0;
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw io::FormatError(path.string() + ": record count in header (" + std::to_string(count) +
                          ") does not match file length");
  }
  data.info.spec_id = infer_spec(n, m);
  if (std::ifstream js(sidecar(path)); js) {
    auto meta = nlohmann::json::parse(js);
    data.info.spec_id = meta.value("spec_id", data.info.spec_id);
    data.info.seed = meta.value("seed", std::uint64_t{0});
    data.info.behavior = meta.value("behavior", std::string{});
    if (meta.contains("random_score")) data.info.random_score = meta["random_score"].get<double>();
    if (meta.contains("expert_score")) data.info.expert_score = meta["expert_score"].get<double>();
  }
  return data;
}

void export_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  const int n = data.info.state_dim;
  const int m = data.info.action_dim;
  for (int j = 0; j < n; ++j) out << "s" << j << ",";
  for (int j = 0; j < m; ++j) out << "a" << j << ",";
  out << "r,";
  for (int j = 0; j < n; ++j) out << "s_next" << j << ",";
  out << "done\n";
  out << std::setprecision(17);
  for (const auto& t : data.transitions) {
    for (double v : t.s) out << v << ",";
    for (double v : t.a) out << v << ",";
    out << t.r << ",";
    for (double v : t.s_next) out << v << ",";
    out << (t.done ? 1 : 0) << "\n";
  }
}

}  // namespace fbrc
