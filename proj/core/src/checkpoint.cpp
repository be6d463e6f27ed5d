#include "unlearn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace unlearn {

static_assert(std::endian::native == std::endian::little,
              "archive payload is written in host order; big-endian hosts unsupported");

namespace {

constexpr char kMagic[8] = {'U', 'N', 'L', 'R', 'N', 'A', 'R', 'C'};

using nlohmann::ordered_json;

template <typename V>
void write_pod(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& is, const std::filesystem::path& path) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(V))) {
    throw InputError("truncated archive header: " + path.string());
  }
  return v;
}

ordered_json spec_to_json(const ArchitectureSpec& spec) {
  return ordered_json{{"name", to_string(spec.name)},
                      {"num_classes", spec.num_classes},
                      {"feature_dim", spec.feature_dim},
                      {"base_width", spec.base_width}};
}

ArchitectureSpec spec_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ArchitectureSpec spec;
  spec.name = parse_architecture(j.at("name").get<std::string>());
  spec.num_classes = j.at("num_classes").get<int>();
  spec.feature_dim = j.at("feature_dim").get<int>();
  spec.base_width = j.at("base_width").get<int>();
  spec.validate();
  return spec;
}

}  // namespace

const ParamTable<float>* TensorArchive::section(const std::string& name) const {
  for (const auto& [n, table] : sections) {
    if (n == name) return &table;
  }
  return nullptr;
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  ordered_json header;
  header["format_version"] = kArchiveFormatVersion;
  header["meta"] = archive.meta;
  ordered_json sections = ordered_json::array();
  for (const auto& [name, table] : archive.sections) {
    ordered_json tensors = ordered_json::array();
    for (const auto& e : table) tensors.push_back({{"name", e.name}, {"shape", e.value.shape()}});
    sections.push_back({{"name", name}, {"tensors", std::move(tensors)}});
  }
  header["sections"] = std::move(sections);
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(os, kArchiveFormatVersion);
  write_pod<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, table] : archive.sections) {
    for (const auto& e : table) {
      os.write(reinterpret_cast<const char*>(e.value.data()),
               static_cast<std::streamsize>(e.value.size() * sizeof(float)));
    }
  }
  if (!os) throw InputError("write failed: " + path.string());
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open archive: " + path.string());
  char magic[sizeof(kMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw InputError("not an archive (bad magic): " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(is, path);
  if (version != kArchiveFormatVersion) {
    throw InputError("unsupported archive version " + std::to_string(version) + ": " +
                     path.string());
  }
  const auto header_len = read_pod<std::uint64_t>(is, path);
  std::string text(header_len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw InputError("truncated archive header: " + path.string());
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("corrupt archive header in " + path.string() + ": " + e.what());
  }

  TensorArchive archive;
  archive.meta = header.at("meta").get<std::map<std::string, std::string>>();
  for (const auto& sec : header.at("sections")) {
    ParamTable<float> table;
    for (const auto& t : sec.at("tensors")) {
      Tensor<float> value(t.at("shape").get<Shape>());
      if (!is.read(reinterpret_cast<char*>(value.data()),
                   static_cast<std::streamsize>(value.size() * sizeof(float)))) {
        throw InputError("truncated archive payload: " + path.string());
      }
      table.add(t.at("name").get<std::string>(), std::move(value));
    }
    archive.sections.emplace_back(sec.at("name").get<std::string>(), std::move(table));
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw InputError("trailing bytes after archive payload: " + path.string());
  }
  return archive;
}

Classifier Checkpoint::to_classifier() const {
  return Classifier::from_tables(spec, seed, params, buffers);
}

void save_checkpoint(const std::filesystem::path& path, const Classifier& model,
                     const SgdOptimizer<float>* optimizer,
                     const std::map<std::string, std::string>& info) {
  TensorArchive archive;
  archive.meta = info;
  archive.meta["kind"] = "checkpoint";
  archive.meta["architecture"] = spec_to_json(model.spec()).dump();
  archive.meta["seed"] = std::to_string(model.seed());
  archive.sections.emplace_back("params", model.params());
  archive.sections.emplace_back("buffers", model.buffers());
  if (optimizer != nullptr && !optimizer->momentum_buffers().empty()) {
    archive.sections.emplace_back("momentum", optimizer->momentum_buffers());
  }
  write_archive(path, archive);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  TensorArchive archive = read_archive(path);
  auto kind = archive.meta.find("kind");
  if (kind == archive.meta.end() || kind->second != "checkpoint") {
    throw InputError("archive is not a model checkpoint: " + path.string());
  }
  Checkpoint ckpt;
  try {
    ckpt.spec = spec_from_json(archive.meta.at("architecture"));
    ckpt.seed = std::stoull(archive.meta.at("seed"));
  } catch (const std::exception& e) {
    throw InputError("bad checkpoint metadata in " + path.string() + ": " + e.what());
  }
  const auto* params = archive.section("params");
  const auto* buffers = archive.section("buffers");
  if (params == nullptr || buffers == nullptr) {
    throw InputError("checkpoint missing params/buffers: " + path.string());
  }
  ckpt.params = *params;
  ckpt.buffers = *buffers;
  if (const auto* momentum = archive.section("momentum")) ckpt.momentum = *momentum;
  for (auto& [k, v] : archive.meta) {
    if (k != "kind" && k != "architecture" && k != "seed") ckpt.info[k] = v;
  }
  return ckpt;
}

Classifier load_classifier(const std::filesystem::path& path) {
  return read_checkpoint(path).to_classifier();
}

}  // namespace unlearn
