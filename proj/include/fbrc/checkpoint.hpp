#pragma once

#include "fbrc/mlp.hpp"
#include "fbrc/parameters.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fbrc {

/// One tagged block of a checkpoint container: architecture header plus a flat
/// f64 parameter array.
struct CheckpointSection {
  std::string tag;               // exactly 4 ASCII characters
  std::vector<int> layer_sizes;  // empty for non-network sections
  Activation activation = Activation::kNone;
  std::uint32_t components = 0;  // mixture K (0 when not a mixture)
  std::vector<double> values;
};

/// Container: "FBCK", u32 version, u32 section count, then per section: tag[4],
/// u32 n_sizes, u32 sizes..., u8 activation, u32 K, u64 n_values, f64
/// values...; little-endian.
void write_checkpoint(const std::filesystem::path& path,
                      const std::vector<CheckpointSection>& sections);
std::vector<CheckpointSection> read_checkpoint(const std::filesystem::path& path);

const CheckpointSection& find_section(const std::vector<CheckpointSection>& sections,
                                      const std::string& tag);
bool has_section(const std::vector<CheckpointSection>& sections, const std::string& tag);

CheckpointSection network_section(std::string tag, const MlpArch& arch, const ParameterSet& params,
                                  std::uint32_t components = 0);
/// Rebuilds an architecture from a section's header.
MlpArch arch_of(const CheckpointSection& section);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace fbrc
