#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "unlearn/model.hpp"

namespace unlearn {

struct Normalization {
  std::array<float, 3> mean{};
  std::array<float, 3> std{1.0f, 1.0f, 1.0f};
};

inline constexpr Normalization kCifar10Normalization{{0.4914f, 0.4822f, 0.4465f},
                                                     {0.2470f, 0.2435f, 0.2616f}};

// Per-channel mean/std of raw [0,255] pixels rescaled to [0,1].
Normalization compute_normalization(std::span<const std::uint8_t> pixels);

struct ImageSample {
  std::span<const std::uint8_t> pixels;  // 3072 bytes: R plane, G plane, B plane
  int label = 0;
};

// Immutable labelled image set. Pixels are kept as the source bytes; float
// batches are produced on demand with the dataset's normalisation.
class LabeledDataset {
 public:
  LabeledDataset(std::string name, int num_classes, std::vector<std::uint8_t> pixels,
                 std::vector<int> labels, Normalization normalization);

  const std::string& name() const { return name_; }
  int num_classes() const { return num_classes_; }
  std::size_t size() const { return labels_.size(); }
  const std::vector<int>& labels() const { return labels_; }
  int label(std::size_t i) const { return labels_.at(i); }
  std::span<const std::uint8_t> image(std::size_t i) const;
  ImageSample sample(std::size_t i) const { return {image(i), label(i)}; }
  std::span<const std::uint8_t> pixels() const { return pixels_; }
  const Normalization& normalization() const { return normalization_; }

  // Normalised float batch [B,3,32,32] for the given indices.
  Tensor<float> batch(std::span<const std::size_t> indices) const;
  std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> class_counts() const;

  LabeledDataset subset(std::span<const std::size_t> indices, std::string name) const;

 private:
  std::string name_;
  int num_classes_;
  std::vector<std::uint8_t> pixels_;
  std::vector<int> labels_;
  Normalization normalization_;
};

struct DatasetPair {
  LabeledDataset train;
  LabeledDataset test;
};

enum class CifarLayout { cifar10, cifar100 };

inline constexpr std::size_t kCifar10RecordBytes = 1 + kImagePixels;
inline constexpr std::size_t kCifar100RecordBytes = 2 + kImagePixels;

struct DecodedBatch {
  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;
};

// Decodes one binary batch. `source` names the file in error messages.
DecodedBatch decode_cifar_bytes(std::span<const std::uint8_t> bytes, CifarLayout layout,
                                const std::string& source);
DecodedBatch read_cifar_file(const std::filesystem::path& file, CifarLayout layout);
// CIFAR-100 records carry a coarse label too; writing uses coarse = 0 when
// none is supplied.
std::vector<std::uint8_t> encode_cifar_record(std::span<const std::uint8_t> pixels,
                                              int label, CifarLayout layout,
                                              int coarse_label = 0);

// Accept either the extracted batch directory itself or its parent.
DatasetPair load_cifar10(const std::filesystem::path& dir);
DatasetPair load_cifar100(const std::filesystem::path& dir);
bool has_cifar10(const std::filesystem::path& dir);
bool has_cifar100(const std::filesystem::path& dir);

enum class SplitMode { random, class_wise };

struct SplitSpec {
  SplitMode mode = SplitMode::random;
  double fraction = 0.1;  // random mode
  int target_class = 0;   // class mode
  std::int64_t seed = 0;
};

std::string to_string(SplitMode mode);
SplitMode parse_split_mode(const std::string& name);

struct ForgetSplit {
  std::string dataset;
  std::size_t num_samples = 0;
  SplitSpec spec;
  std::vector<std::size_t> forget_indices;  // ascending
  std::vector<std::size_t> retain_indices;  // ascending
};

// Random mode draws round(fraction * N) indices uniformly without
// replacement; class mode forgets exactly the samples of the target class.
ForgetSplit make_forget_split(const LabeledDataset& dataset, const SplitSpec& spec);

inline constexpr int kSplitManifestVersion = 1;
void write_split_manifest(const std::filesystem::path& path, const ForgetSplit& split);
ForgetSplit read_split_manifest(const std::filesystem::path& path);

struct AugmentationPolicy {
  int crop_padding = 4;
  double hflip_prob = 0.5;
  Normalization normalization = kCifar10Normalization;
};

// Random crop from a zero-padded canvas followed by an optional horizontal
// flip. Output has the input's shape.
std::vector<std::uint8_t> augment_image(std::span<const std::uint8_t> pixels,
                                        const AugmentationPolicy& policy,
                                        std::mt19937_64& rng);

struct PositivePair {
  std::vector<float> x;        // normalised original
  std::vector<float> x_prime;  // normalised augmented draw
};

PositivePair augment_positive_pair(const ImageSample& sample, const AugmentationPolicy& policy,
                                   std::uint64_t seed);

void normalize_into(std::span<const std::uint8_t> pixels, const Normalization& norm,
                    std::span<float> out);

// Deterministic mini-batching over an index subset. Batches for a given epoch
// come from a permutation seeded by (shuffle_seed, epoch).
class BatchIterator {
 public:
  BatchIterator(std::vector<std::size_t> indices, std::size_t batch_size,
                std::uint64_t shuffle_seed, bool drop_last, bool shuffle = true);

  std::size_t batches_per_epoch() const;
  std::vector<std::vector<std::size_t>> epoch(std::size_t epoch) const;
  const std::vector<std::size_t>& indices() const { return indices_; }

 private:
  std::vector<std::size_t> indices_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  bool drop_last_;
  bool shuffle_;
};

// Stratified deterministic subsample with n / K samples per class (the first
// n % K classes get one extra). Indices are returned ascending.
std::vector<std::size_t> stratified_subset(const LabeledDataset& dataset, std::size_t n,
                                           std::uint64_t seed);

// Procedurally generated class-conditional images in the CIFAR-10 binary
// layout. Used when the real files are unavailable; the generator has a
// tunable label-noise rate so that models can memorise a training split.
struct SyntheticCifarOptions {
  int num_classes = 10;
  std::size_t train_per_class = 5000;
  std::size_t test_per_class = 1000;
  double label_noise = 0.1;
  double noise_stddev = 40.0;
  std::uint64_t seed = 2024;
};

DatasetPair make_synthetic_cifar(const SyntheticCifarOptions& options);
// Writes data_batch_1..5.bin and test_batch.bin (CIFAR-10 layout) into dir.
void write_synthetic_cifar10(const std::filesystem::path& dir,
                             const SyntheticCifarOptions& options);

}  // namespace unlearn
