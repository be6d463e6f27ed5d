#include "unlearn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "unlearn/random.hpp"

namespace unlearn {

namespace fs = std::filesystem;

constexpr std::size_t kPlane = kImageSide * kImageSide;

Normalization compute_normalization(std::span<const std::uint8_t> pixels) {
  if (pixels.empty() || pixels.size() % kImagePixels != 0) {
    throw InputError("pixel buffer is not a whole number of images");
  }
  const std::size_t n = pixels.size() / kImagePixels;
  Normalization norm;
  for (std::size_t c = 0; c < kImageChannels; ++c) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint8_t* p = pixels.data() + i * kImagePixels + c * kPlane;
      for (std::size_t j = 0; j < kPlane; ++j) {
        const double v = p[j] / 255.0;
        sum += v;
        sq += v * v;
      }
    }
    const double count = static_cast<double>(n * kPlane);
    const double mean = sum / count;
    norm.mean[c] = static_cast<float>(mean);
    norm.std[c] = static_cast<float>(std::sqrt(std::max(sq / count - mean * mean, 1e-12)));
  }
  return norm;
}

LabeledDataset::LabeledDataset(std::string name, int num_classes,
                               std::vector<std::uint8_t> pixels, std::vector<int> labels,
                               Normalization normalization)
    : name_(std::move(name)),
      num_classes_(num_classes),
      pixels_(std::move(pixels)),
      labels_(std::move(labels)),
      normalization_(normalization) {
  if (labels_.empty()) throw InputError("dataset '" + name_ + "' is empty");
  if (num_classes_ < 2) throw InputError("dataset needs at least two classes");
  if (pixels_.size() != labels_.size() * kImagePixels) {
    throw InputError("dataset '" + name_ + "': pixel buffer size does not match label count");
  }
  for (const int l : labels_) {
    if (l < 0 || l >= num_classes_) {
      throw InputError("dataset '" + name_ + "': label " + std::to_string(l) +
                       " outside [0," + std::to_string(num_classes_) + ")");
    }
  }
}

std::span<const std::uint8_t> LabeledDataset::image(std::size_t i) const {
  if (i >= size()) throw UsageError("sample index out of range");
  return std::span<const std::uint8_t>(pixels_).subspan(i * kImagePixels, kImagePixels);
}

void normalize_into(std::span<const std::uint8_t> pixels, const Normalization& norm,
                    std::span<float> out) {
  for (std::size_t c = 0; c < kImageChannels; ++c) {
    const float scale = 1.0f / (255.0f * norm.std[c]);
    const float shift = norm.mean[c] / norm.std[c];
    for (std::size_t j = 0; j < kPlane; ++j) {
      out[c * kPlane + j] = static_cast<float>(pixels[c * kPlane + j]) * scale - shift;
    }
  }
}

Tensor<float> LabeledDataset::batch(std::span<const std::size_t> indices) const {
  Tensor<float> out({indices.size(), kImageChannels, kImageSide, kImageSide});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    normalize_into(image(indices[b]), normalization_, out.row(b));
  }
  return out;
}

std::vector<int> LabeledDataset::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (const auto i : indices) out.push_back(label(i));
  return out;
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes_), 0);
  for (const int l : labels_) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices,
                                      std::string name) const {
  std::vector<std::uint8_t> pixels;
  pixels.reserve(indices.size() * kImagePixels);
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (const auto i : indices) {
    const auto img = image(i);
    pixels.insert(pixels.end(), img.begin(), img.end());
    labels.push_back(labels_[i]);
  }
  return LabeledDataset(std::move(name), num_classes_, std::move(pixels), std::move(labels),
                        normalization_);
}

DecodedBatch decode_cifar_bytes(std::span<const std::uint8_t> bytes, CifarLayout layout,
                                const std::string& source) {
  const std::size_t record =
      layout == CifarLayout::cifar10 ? kCifar10RecordBytes : kCifar100RecordBytes;
  const std::size_t header = record - kImagePixels;
  if (bytes.empty() || bytes.size() % record != 0) {
    throw InputError(source + ": size " + std::to_string(bytes.size()) +
                     " is not a positive multiple of the " + std::to_string(record) +
                     "-byte record size");
  }
  const std::size_t n = bytes.size() / record;
  DecodedBatch out;
  out.pixels.resize(n * kImagePixels);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = bytes.data() + i * record;
    // CIFAR-100 records are (coarse, fine, pixels); the fine label is used.
    out.labels[i] = rec[header - 1];
    std::copy_n(rec + header, kImagePixels, out.pixels.data() + i * kImagePixels);
  }
  return out;
}

DecodedBatch read_cifar_file(const fs::path& file, CifarLayout layout) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw InputError("missing CIFAR batch file: " + file.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  return decode_cifar_bytes(bytes, layout, file.string());
}

std::vector<std::uint8_t> encode_cifar_record(std::span<const std::uint8_t> pixels, int label,
                                              CifarLayout layout, int coarse_label) {
  if (pixels.size() != kImagePixels) throw UsageError("record needs exactly 3072 pixel bytes");
  std::vector<std::uint8_t> out;
  out.reserve(kCifar100RecordBytes);
  if (layout == CifarLayout::cifar100) out.push_back(static_cast<std::uint8_t>(coarse_label));
  out.push_back(static_cast<std::uint8_t>(label));
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

namespace {

fs::path resolve_dir(const fs::path& dir, const std::string& nested, const std::string& probe) {
  if (fs::exists(dir / probe)) return dir;
  if (fs::exists(dir / nested / probe)) return dir / nested;
  return dir;
}

LabeledDataset concat_files(const std::vector<fs::path>& files, CifarLayout layout,
                            std::string name, int num_classes,
                            const Normalization* normalization) {
  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;
  for (const auto& f : files) {
    DecodedBatch b = read_cifar_file(f, layout);
    pixels.insert(pixels.end(), b.pixels.begin(), b.pixels.end());
    labels.insert(labels.end(), b.labels.begin(), b.labels.end());
  }
  const Normalization norm =
      normalization != nullptr ? *normalization : compute_normalization(pixels);
  return LabeledDataset(std::move(name), num_classes, std::move(pixels), std::move(labels),
                        norm);
}

}  // namespace

bool has_cifar10(const fs::path& dir) {
  const fs::path d = resolve_dir(dir, "cifar-10-batches-bin", "data_batch_1.bin");
  return fs::exists(d / "data_batch_1.bin") && fs::exists(d / "test_batch.bin");
}

bool has_cifar100(const fs::path& dir) {
  const fs::path d = resolve_dir(dir, "cifar-100-binary", "train.bin");
  return fs::exists(d / "train.bin") && fs::exists(d / "test.bin");
}

DatasetPair load_cifar10(const fs::path& dir) {
  const fs::path d = resolve_dir(dir, "cifar-10-batches-bin", "data_batch_1.bin");
  std::vector<fs::path> train_files;
  for (int i = 1; i <= 5; ++i) train_files.push_back(d / ("data_batch_" + std::to_string(i) + ".bin"));
  return DatasetPair{
      concat_files(train_files, CifarLayout::cifar10, "cifar10-train", 10, &kCifar10Normalization),
      concat_files({d / "test_batch.bin"}, CifarLayout::cifar10, "cifar10-test", 10,
                   &kCifar10Normalization)};
}

DatasetPair load_cifar100(const fs::path& dir) {
  const fs::path d = resolve_dir(dir, "cifar-100-binary", "train.bin");
  LabeledDataset train =
      concat_files({d / "train.bin"}, CifarLayout::cifar100, "cifar100-train", 100, nullptr);
  const Normalization norm = train.normalization();
  LabeledDataset test =
      concat_files({d / "test.bin"}, CifarLayout::cifar100, "cifar100-test", 100, &norm);
  return DatasetPair{std::move(train), std::move(test)};
}

std::string to_string(SplitMode mode) {
  return mode == SplitMode::random ? "random" : "class";
}

SplitMode parse_split_mode(const std::string& name) {
  if (name == "random") return SplitMode::random;
  if (name == "class") return SplitMode::class_wise;
  throw ConfigError("unknown split mode: " + name);
}

ForgetSplit make_forget_split(const LabeledDataset& dataset, const SplitSpec& spec) {
  if (spec.seed < 0) throw ConfigError("split seed must be >= 0");
  const std::size_t n = dataset.size();
  ForgetSplit split;
  split.dataset = dataset.name();
  split.num_samples = n;
  split.spec = spec;
  std::vector<char> forget(n, 0);
  if (spec.mode == SplitMode::random) {
    if (!(spec.fraction >= 0.0 && spec.fraction <= 1.0)) {
      throw ConfigError("forget fraction must be in [0,1]");
    }
    const auto count = static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(n)));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(static_cast<std::uint64_t>(spec.seed));
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < count; ++i) forget[perm[i]] = 1;
  } else {
    if (spec.target_class < 0 || spec.target_class >= dataset.num_classes()) {
      throw ConfigError("target class " + std::to_string(spec.target_class) +
                        " outside [0," + std::to_string(dataset.num_classes()) + ")");
    }
    for (std::size_t i = 0; i < n; ++i) forget[i] = dataset.label(i) == spec.target_class;
  }
  for (std::size_t i = 0; i < n; ++i) {
    (forget[i] ? split.forget_indices : split.retain_indices).push_back(i);
  }
  return split;
}

void write_split_manifest(const fs::path& path, const ForgetSplit& split) {
  nlohmann::ordered_json j;
  j["format_version"] = kSplitManifestVersion;
  j["dataset"] = split.dataset;
  j["num_samples"] = split.num_samples;
  j["mode"] = to_string(split.spec.mode);
  if (split.spec.mode == SplitMode::random) {
    j["fraction"] = split.spec.fraction;
  } else {
    j["class"] = split.spec.target_class;
  }
  j["seed"] = split.spec.seed;
  j["forget_indices"] = split.forget_indices;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot write split manifest: " + path.string());
  os << j.dump() << '\n';
}

ForgetSplit read_split_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("missing split manifest: " + path.string());
  ForgetSplit split;
  try {
    const auto j = nlohmann::json::parse(is);
    if (j.at("format_version").get<int>() != kSplitManifestVersion) {
      throw InputError("unsupported split manifest version in " + path.string());
    }
    split.dataset = j.at("dataset").get<std::string>();
    split.num_samples = j.at("num_samples").get<std::size_t>();
    split.spec.mode = parse_split_mode(j.at("mode").get<std::string>());
    if (split.spec.mode == SplitMode::random) {
      split.spec.fraction = j.at("fraction").get<double>();
    } else {
      split.spec.target_class = j.at("class").get<int>();
    }
    split.spec.seed = j.at("seed").get<std::int64_t>();
    split.forget_indices = j.at("forget_indices").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError("corrupt split manifest " + path.string() + ": " + e.what());
  }
  std::vector<char> forget(split.num_samples, 0);
  for (const auto i : split.forget_indices) {
    if (i >= split.num_samples || forget[i]) {
      throw InputError("split manifest has invalid or duplicate index: " + path.string());
    }
    forget[i] = 1;
  }
  std::sort(split.forget_indices.begin(), split.forget_indices.end());
  for (std::size_t i = 0; i < split.num_samples; ++i) {
    if (!forget[i]) split.retain_indices.push_back(i);
  }
  return split;
}

std::vector<std::uint8_t> augment_image(std::span<const std::uint8_t> pixels,
                                        const AugmentationPolicy& policy, std::mt19937_64& rng) {
  if (pixels.size() != kImagePixels) throw UsageError("augment expects a 3x32x32 image");
  const int pad = std::max(policy.crop_padding, 0);
  std::uniform_int_distribution<int> offset(0, 2 * pad);
  const int dy = offset(rng) - pad;
  const int dx = offset(rng) - pad;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const bool flip = coin(rng) < policy.hflip_prob;

  std::vector<std::uint8_t> out(kImagePixels, 0);
  const int side = static_cast<int>(kImageSide);
  for (std::size_t c = 0; c < kImageChannels; ++c) {
    for (int y = 0; y < side; ++y) {
      const int sy = y + dy;
      if (sy < 0 || sy >= side) continue;
      for (int x = 0; x < side; ++x) {
        const int cx = flip ? side - 1 - x : x;
        const int sx = cx + dx;
        if (sx < 0 || sx >= side) continue;
        out[c * kPlane + static_cast<std::size_t>(y * side + x)] =
            pixels[c * kPlane + static_cast<std::size_t>(sy * side + sx)];
      }
    }
  }
  return out;
}

PositivePair augment_positive_pair(const ImageSample& sample, const AugmentationPolicy& policy,
                                   std::uint64_t seed) {
  PositivePair pair;
  pair.x.resize(kImagePixels);
  pair.x_prime.resize(kImagePixels);
  normalize_into(sample.pixels, policy.normalization, pair.x);
  std::mt19937_64 rng(seed);
  const auto augmented = augment_image(sample.pixels, policy, rng);
  normalize_into(augmented, policy.normalization, pair.x_prime);
  return pair;
}

BatchIterator::BatchIterator(std::vector<std::size_t> indices, std::size_t batch_size,
                             std::uint64_t shuffle_seed, bool drop_last, bool shuffle)
    : indices_(std::move(indices)),
      batch_size_(batch_size),
      seed_(shuffle_seed),
      drop_last_(drop_last),
      shuffle_(shuffle) {
  if (batch_size_ == 0) throw ConfigError("batch size must be >= 1");
  if (indices_.empty()) throw UsageError("batch iterator over an empty index set");
  if (drop_last_ && batch_size_ > indices_.size()) {
    throw UsageError("batch size " + std::to_string(batch_size_) + " exceeds subset size " +
                     std::to_string(indices_.size()) + " with drop_last; no batches");
  }
}

std::size_t BatchIterator::batches_per_epoch() const {
  return drop_last_ ? indices_.size() / batch_size_
                    : (indices_.size() + batch_size_ - 1) / batch_size_;
}

std::vector<std::vector<std::size_t>> BatchIterator::epoch(std::size_t epoch) const {
  std::vector<std::size_t> order = indices_;
  if (shuffle_) {
    std::mt19937_64 rng(derive_seed(seed_, {epoch}));
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::size_t>> batches;
  const std::size_t count = batches_per_epoch();
  batches.reserve(count);
  for (std::size_t b = 0; b < count; ++b) {
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(b * batch_size_);
    const auto last = order.begin() + static_cast<std::ptrdiff_t>(
                                           std::min(order.size(), (b + 1) * batch_size_));
    batches.emplace_back(first, last);
  }
  return batches;
}

std::vector<std::size_t> stratified_subset(const LabeledDataset& dataset, std::size_t n,
                                           std::uint64_t seed) {
  const auto k = static_cast<std::size_t>(dataset.num_classes());
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    by_class[static_cast<std::size_t>(dataset.label(i))].push_back(i);
  }
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t want = n / k + (c < n % k ? 1 : 0);
    auto& members = by_class[c];
    if (want > members.size()) {
      throw ConfigError("class " + std::to_string(c) + " has only " +
                        std::to_string(members.size()) + " samples; subset needs " +
                        std::to_string(want));
    }
    std::mt19937_64 rng(derive_seed(seed, {c}));
    std::shuffle(members.begin(), members.end(), rng);
    out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(want));
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

struct Prototype {
  std::vector<float> values;  // 3 x 32 x 32, zero mean, unit std
};

Prototype make_prototype(std::mt19937_64& rng) {
  Prototype p;
  p.values.assign(kImagePixels, 0.0f);
  std::uniform_int_distribution<int> freq(0, 3);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> amp(0.5, 1.0);
  std::normal_distribution<double> colour(0.0, 1.0);
  for (int comp = 0; comp < 4; ++comp) {
    int fx = freq(rng), fy = freq(rng);
    if (fx == 0 && fy == 0) fx = 1;
    const double ph = phase(rng), a = amp(rng);
    const double w[3] = {colour(rng), colour(rng), colour(rng)};
    for (std::size_t c = 0; c < kImageChannels; ++c) {
      for (std::size_t y = 0; y < kImageSide; ++y) {
        for (std::size_t x = 0; x < kImageSide; ++x) {
          const double arg = 2.0 * std::numbers::pi * (fx * x + fy * y) / kImageSide + ph;
          p.values[c * kPlane + y * kImageSide + x] += static_cast<float>(a * w[c] * std::cos(arg));
        }
      }
    }
  }
  double sum = 0.0, sq = 0.0;
  for (const float v : p.values) {
    sum += v;
    sq += static_cast<double>(v) * v;
  }
  const double mean = sum / kImagePixels;
  const double sd = std::sqrt(std::max(sq / kImagePixels - mean * mean, 1e-12));
  for (auto& v : p.values) v = static_cast<float>((v - mean) / sd);
  return p;
}

void render_sample(const std::vector<Prototype>& protos, int cls, std::mt19937_64& rng,
                   double noise_sd, std::uint8_t* out) {
  const int k = static_cast<int>(protos.size());
  std::uniform_int_distribution<int> shift(-4, 4);
  std::uniform_real_distribution<double> contrast(0.6, 1.4);
  std::uniform_real_distribution<double> mix(0.0, 0.6);
  std::uniform_int_distribution<int> other(1, k - 1);
  std::normal_distribution<double> brightness(0.0, 15.0);
  std::normal_distribution<double> noise(0.0, noise_sd);
  const int sx = shift(rng), sy = shift(rng);
  const double alpha = 40.0 * contrast(rng);
  const int distractor = (cls + other(rng)) % k;
  const double beta = 40.0 * mix(rng);
  const double base = 128.0 + brightness(rng);
  const int side = static_cast<int>(kImageSide);
  const auto& main = protos[static_cast<std::size_t>(cls)].values;
  const auto& dist = protos[static_cast<std::size_t>(distractor)].values;
  for (std::size_t c = 0; c < kImageChannels; ++c) {
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const std::size_t src = c * kPlane + static_cast<std::size_t>(((y + sy + side) % side) * side +
                                                                      (x + sx + side) % side);
        const std::size_t dst = c * kPlane + static_cast<std::size_t>(y * side + x);
        const double v = base + alpha * main[src] + beta * dist[dst] + noise(rng);
        out[dst] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
}

LabeledDataset render_split(const std::vector<Prototype>& protos, std::size_t per_class,
                            const SyntheticCifarOptions& options, std::uint64_t stream,
                            std::string name) {
  const auto k = static_cast<std::size_t>(options.num_classes);
  std::vector<int> classes;
  for (std::size_t c = 0; c < k; ++c) classes.insert(classes.end(), per_class, static_cast<int>(c));
  std::mt19937_64 rng(derive_seed(options.seed, {stream}));
  std::shuffle(classes.begin(), classes.end(), rng);
  std::vector<std::uint8_t> pixels(classes.size() * kImagePixels);
  std::vector<int> labels(classes.size());
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> other(1, options.num_classes - 1);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    render_sample(protos, classes[i], rng, options.noise_stddev, pixels.data() + i * kImagePixels);
    labels[i] = coin(rng) < options.label_noise ? (classes[i] + other(rng)) % options.num_classes
                                                : classes[i];
  }
  return LabeledDataset(std::move(name), options.num_classes, std::move(pixels),
                        std::move(labels), kCifar10Normalization);
}

}  // namespace

DatasetPair make_synthetic_cifar(const SyntheticCifarOptions& options) {
  if (options.num_classes < 2 || options.num_classes > 256) {
    throw ConfigError("synthetic dataset needs 2..256 classes");
  }
  if (options.train_per_class == 0 || options.test_per_class == 0) {
    throw ConfigError("synthetic dataset needs at least one sample per class");
  }
  std::mt19937_64 rng(derive_seed(options.seed, {0}));
  std::vector<Prototype> protos;
  for (int c = 0; c < options.num_classes; ++c) protos.push_back(make_prototype(rng));
  return DatasetPair{
      render_split(protos, options.train_per_class, options, 1, "synthetic-train"),
      render_split(protos, options.test_per_class, options, 2, "synthetic-test")};
}

void write_synthetic_cifar10(const fs::path& dir, const SyntheticCifarOptions& options) {
  if (options.num_classes != 10) throw ConfigError("CIFAR-10 layout needs 10 classes");
  const DatasetPair data = make_synthetic_cifar(options);
  fs::create_directories(dir);
  auto write = [](const fs::path& file, const LabeledDataset& ds, std::size_t first,
                  std::size_t last) {
    std::ofstream os(file, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot write " + file.string());
    for (std::size_t i = first; i < last; ++i) {
      const auto rec = encode_cifar_record(ds.image(i), ds.label(i), CifarLayout::cifar10);
      os.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
    }
  };
  const std::size_t n = data.train.size();
  for (std::size_t b = 0; b < 5; ++b) {
    write(dir / ("data_batch_" + std::to_string(b + 1) + ".bin"), data.train, n * b / 5,
          n * (b + 1) / 5);
  }
  write(dir / "test_batch.bin", data.test, 0, data.test.size());
}

}  // namespace unlearn
