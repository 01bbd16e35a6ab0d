#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "anda/attack.hpp"
#include "anda/dataset.hpp"
#include "json.hpp"

namespace anda {

// ---- IDX ------------------------------------------------------------------
// Big-endian header: magic 0x00000803 (u8 images, dims count/rows/cols) or
// 0x00000801 (u8 labels, dim count). Pixels are scaled to [0, 1] by /255 and
// returned as (1, rows, cols) tensors.

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

std::vector<ImageTensor> parse_idx_images(std::string_view bytes, const std::string& context = "idx images");
std::vector<std::size_t> parse_idx_labels(std::string_view bytes, const std::string& context = "idx labels");
std::vector<ImageTensor> read_idx_images(const std::string& path);
std::vector<std::size_t> read_idx_labels(const std::string& path);

// Pixels are quantized with round(255 * v); labels must fit in a byte.
std::string encode_idx_images(const std::vector<ImageTensor>& images);
std::string encode_idx_labels(const std::vector<std::size_t>& labels);

// Pairs an image file with a label file; classes = max label + 1 unless given.
Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path, std::size_t classes = 0);

// ---- synthetic generators -------------------------------------------------

enum class SyntheticKind { GaussBlobs, Rings };

std::string to_string(SyntheticKind kind);
SyntheticKind parse_synthetic_kind(const std::string& name);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::GaussBlobs;
  std::size_t count = 0;
  std::size_t side = 16;
  std::size_t classes = 8;
  std::uint64_t seed = 0;
  double contrast = 0.6;    // peak amplitude of the class pattern
  double noise = 0.1;       // std-dev of additive pixel noise
  std::size_t jitter = 2;   // max random shift of the class pattern, pixels
  double blob_width = 3.0;  // blob std-dev (ring width is half), in pixels per 16 pixels of side
};

// Class-structured single-channel images. The class prototypes depend only on
// (kind, side, classes); the seed drives placement, amplitude and noise, so
// train and test splits drawn with different seeds share one task.
Dataset generate_synthetic(const SyntheticSpec& spec);

// ---- adversary archives ---------------------------------------------------
// "ANDAPERT" | u8 version | u64 json length | json config snapshot |
// u64 record count | records. A record is u64 label, original tensor,
// adversary tensor, u64 sample count, sample tensors. A tensor is u32 rank,
// rank x u64 dims, then f64 values. Little-endian throughout.

// The JSON config block stored in an archive header.
nlohmann::json archive_config_json(const AdversaryBatch& batch);

std::string encode_adversary_archive(const AdversaryBatch& batch);
AdversaryBatch decode_adversary_archive(std::string_view bytes, bool validate = true,
                                        const std::string& context = "archive");

// Validates the eps-ball invariant before writing; throws InvariantError.
void write_adversary_archive(const AdversaryBatch& batch, const std::string& path);
AdversaryBatch read_adversary_archive(const std::string& path, bool validate = true);

}  // namespace anda
