#include "fbrc/checkpoint.hpp"

#include "fbrc/binary_io.hpp"

#include <fstream>

namespace fbrc {

void write_checkpoint(const std::filesystem::path& path,
                      const std::vector<CheckpointSection>& sections) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write("FBCK", 4);
  io::write_le<std::uint32_t>(out, kCheckpointVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(sections.size()));
  for (const auto& s : sections) {
    if (s.tag.size() != 4) throw std::invalid_argument("checkpoint tag must be 4 chars: " + s.tag);
    out.write(s.tag.data(), 4);
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.layer_sizes.size()));
    for (int v : s.layer_sizes) io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
    io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(s.activation));
    io::write_le<std::uint32_t>(out, s.components);
    io::write_le<std::uint64_t>(out, s.values.size());
    for (double v : s.values) io::write_f64(out, v);
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<CheckpointSection> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "FBCK") {
    throw io::FormatError(path.string() + ": not a checkpoint (bad magic)");
  }
  const auto version = io::read_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw io::FormatError(path.string() + ": unsupported checkpoint version " +
                          std::to_string(version));
  }
  const auto count = io::read_le<std::uint32_t>(in, "section count");
  std::vector<CheckpointSection> out(count);
  for (auto& s : out) {
    char tag[4];
    if (!in.read(tag, 4)) throw io::FormatError(path.string() + ": truncated section tag");
    s.tag.assign(tag, 4);
    const auto n_sizes = io::read_le<std::uint32_t>(in, "layer count");
    if (n_sizes > 64) throw io::FormatError(path.string() + ": implausible layer count");
    for (std::uint32_t i = 0; i < n_sizes; ++i) {
      s.layer_sizes.push_back(static_cast<int>(io::read_le<std::uint32_t>(in, "layer size")));
    }
    const auto act = io::read_le<std::uint8_t>(in, "activation");
    if (act > static_cast<std::uint8_t>(Activation::kNone)) {
      throw io::FormatError(path.string() + ": unknown activation tag");
    }
    s.activation = static_cast<Activation>(act);
    s.components = io::read_le<std::uint32_t>(in, "components");
    const auto n = io::read_le<std::uint64_t>(in, "value count");
    s.values.resize(n);
    for (auto& v : s.values) v = io::read_f64(in, "parameter values");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw io::FormatError(path.string() + ": trailing bytes after last section");
  }
  return out;
}

const CheckpointSection& find_section(const std::vector<CheckpointSection>& sections,
                                      const std::string& tag) {
  for (const auto& s : sections)
    if (s.tag == tag) return s;
  throw io::FormatError("checkpoint has no section '" + tag + "'");
}

bool has_section(const std::vector<CheckpointSection>& sections, const std::string& tag) {
  for (const auto& s : sections)
    if (s.tag == tag) return true;
  return false;
}

CheckpointSection network_section(std::string tag, const MlpArch& arch, const ParameterSet& params,
                                  std::uint32_t components) {
  CheckpointSection s;
  s.tag = std::move(tag);
  s.layer_sizes = arch.layer_sizes();
  s.activation = arch.activation;
  s.components = components;
  s.values = params.flatten();
  return s;
}

MlpArch arch_of(const CheckpointSection& section) {
  if (section.layer_sizes.size() < 2) {
    throw io::FormatError("section '" + section.tag + "' has no network architecture");
  }
  MlpArch arch;
  arch.input = section.layer_sizes.front();
  arch.output = section.layer_sizes.back();
  arch.hidden.assign(section.layer_sizes.begin() + 1, section.layer_sizes.end() - 1);
  arch.activation = section.activation;
  return arch;
}

}  // namespace fbrc
