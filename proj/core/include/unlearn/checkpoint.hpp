#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "unlearn/model.hpp"

namespace unlearn {

inline constexpr std::uint32_t kArchiveFormatVersion = 1;

// Versioned container of named float32 tensor tables plus string metadata.
//
// Layout: 8-byte magic "UNLRNARC", u32 format version, u64 header length,
// UTF-8 JSON header (section/tensor names and shapes, metadata), then every
// tensor's raw little-endian float32 data in header order.
struct TensorArchive {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, ParamTable<float>>> sections;

  const ParamTable<float>* section(const std::string& name) const;
};

void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
// Throws InputError on missing file, bad magic, unsupported version or
// truncated payload.
TensorArchive read_archive(const std::filesystem::path& path);

struct Checkpoint {
  ArchitectureSpec spec;
  std::uint64_t seed = 0;
  ParamTable<float> params;
  ParamTable<float> buffers;
  std::optional<ParamTable<float>> momentum;
  std::map<std::string, std::string> info;

  Classifier to_classifier() const;
};

void save_checkpoint(const std::filesystem::path& path, const Classifier& model,
                     const SgdOptimizer<float>* optimizer = nullptr,
                     const std::map<std::string, std::string>& info = {});
Checkpoint read_checkpoint(const std::filesystem::path& path);
Classifier load_classifier(const std::filesystem::path& path);

}  // namespace unlearn
