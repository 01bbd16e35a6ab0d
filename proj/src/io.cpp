#include "anda/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "anda/error.hpp"
#include "anda/rng.hpp"
#include "binary.hpp"
#include "json.hpp"

namespace anda {

namespace detail {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to '" + path + "'");
}

}  // namespace detail

// ---- Dataset --------------------------------------------------------------

void Dataset::validate() const {
  if (images.size() != labels.size()) {
    throw DataError(name + ": " + std::to_string(images.size()) + " images but " + std::to_string(labels.size()) +
                    " labels");
  }
  if (images.empty()) return;
  const Shape& shape = images.front().shape();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape() != shape) throw DataError(name + ": image " + std::to_string(i) + " has a different shape");
    if (labels[i] >= classes) {
      throw DataError(name + ": label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                      " exceeds class count " + std::to_string(classes));
    }
    for (double v : images[i].values()) {
      if (!(v >= 0.0 && v <= 1.0))
        throw DataError(name + ": image " + std::to_string(i) + " has a pixel outside [0,1]");
    }
  }
}

Dataset Dataset::head(std::size_t count) const {
  Dataset out;
  out.name = name;
  out.provenance = provenance;
  out.classes = classes;
  count = std::min(count, images.size());
  out.images.assign(images.begin(), images.begin() + static_cast<std::ptrdiff_t>(count));
  out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

// ---- IDX ------------------------------------------------------------------

namespace {

std::uint32_t read_be32(detail::ByteReader& in) {
  auto b = in.bytes(4);
  std::uint32_t v = 0;
  for (char c : b) v = (v << 8) | static_cast<std::uint8_t>(c);
  return v;
}

void write_be32(std::string& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::string hex32(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace

std::vector<ImageTensor> parse_idx_images(std::string_view bytes, const std::string& context) {
  detail::ByteReader in(bytes, context);
  const std::uint32_t magic = read_be32(in);
  if (magic != kIdxImageMagic) in.fail("wrong IDX magic " + hex32(magic) + " (expected 0x00000803)");
  const std::uint32_t count = read_be32(in);
  const std::uint32_t rows = read_be32(in);
  const std::uint32_t cols = read_be32(in);
  const std::uint64_t pixels = static_cast<std::uint64_t>(count) * rows * cols;
  if (in.remaining() != pixels) {
    in.fail("payload has " + std::to_string(in.remaining()) + " bytes, header declares " + std::to_string(pixels));
  }
  std::vector<ImageTensor> images;
  images.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto raw = in.bytes(static_cast<std::size_t>(rows) * cols);
    std::vector<double> px(raw.size());
    for (std::size_t j = 0; j < raw.size(); ++j) px[j] = static_cast<std::uint8_t>(raw[j]) / 255.0;
    images.emplace_back(Shape{1, rows, cols}, std::move(px));
  }
  return images;
}

std::vector<std::size_t> parse_idx_labels(std::string_view bytes, const std::string& context) {
  detail::ByteReader in(bytes, context);
  const std::uint32_t magic = read_be32(in);
  if (magic != kIdxLabelMagic) in.fail("wrong IDX magic " + hex32(magic) + " (expected 0x00000801)");
  const std::uint32_t count = read_be32(in);
  if (in.remaining() != count) {
    in.fail("payload has " + std::to_string(in.remaining()) + " bytes, header declares " + std::to_string(count));
  }
  std::vector<std::size_t> labels(count);
  for (auto& l : labels) l = in.u8();
  return labels;
}

std::vector<ImageTensor> read_idx_images(const std::string& path) {
  return parse_idx_images(detail::read_file(path), path);
}

std::vector<std::size_t> read_idx_labels(const std::string& path) {
  return parse_idx_labels(detail::read_file(path), path);
}

std::string encode_idx_images(const std::vector<ImageTensor>& images) {
  std::string out;
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(images.size()));
  const Shape shape = images.empty() ? Shape{1, 0, 0} : images.front().shape();
  if (shape.size() != 3 || shape[0] != 1) throw ShapeError("IDX images must be single-channel (1,H,W)");
  write_be32(out, static_cast<std::uint32_t>(shape[1]));
  write_be32(out, static_cast<std::uint32_t>(shape[2]));
  for (const auto& img : images) {
    if (img.shape() != shape) throw ShapeError("IDX images must share one shape");
    for (double v : img.values()) {
      out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
    }
  }
  return out;
}

std::string encode_idx_labels(const std::vector<std::size_t>& labels) {
  std::string out;
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (std::size_t l : labels) {
    if (l > 255) throw DataError("IDX label " + std::to_string(l) + " does not fit in a byte");
    out.push_back(static_cast<char>(l));
  }
  return out;
}

Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path, std::size_t classes) {
  Dataset ds;
  ds.name = images_path;
  ds.provenance = "idx:" + images_path + "," + labels_path;
  ds.images = read_idx_images(images_path);
  ds.labels = read_idx_labels(labels_path);
  if (classes == 0) {
    classes = ds.labels.empty() ? 0 : *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  }
  ds.classes = classes;
  ds.validate();
  return ds;
}

// ---- synthetic ------------------------------------------------------------

std::string to_string(SyntheticKind kind) { return kind == SyntheticKind::GaussBlobs ? "gauss_blobs" : "rings"; }

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "gauss_blobs" || name == "blobs") return SyntheticKind::GaussBlobs;
  if (name == "rings") return SyntheticKind::Rings;
  throw ConfigError("unknown synthetic dataset '" + name + "' (expected gauss_blobs or rings)");
}

namespace {

struct Blob {
  double cx, cy, amplitude;
};

constexpr std::uint64_t kPrototypeSeed = 0x5eedb10b5ULL;
constexpr std::size_t kBlobsPerClass = 3;

// Blob layout for one class, independent of the sampling seed.
std::vector<Blob> blob_prototype(std::size_t side, std::size_t classes, std::size_t cls) {
  Rng rng = make_rng(kPrototypeSeed, {side, classes, cls});
  const double s = static_cast<double>(side);
  std::uniform_real_distribution<double> pos(0.25 * s, 0.75 * s);
  std::uniform_real_distribution<double> amp(0.6, 1.0);
  std::vector<Blob> blobs(kBlobsPerClass);
  for (auto& b : blobs) b = {pos(rng), pos(rng), amp(rng)};
  return blobs;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.count == 0) throw ConfigError("synthetic dataset count must be positive");
  if (spec.classes < 2) throw ConfigError("synthetic dataset needs at least 2 classes");
  if (spec.side < 4) throw ConfigError("synthetic image side must be at least 4");
  if (!(spec.noise >= 0.0)) throw ConfigError("synthetic noise must be >= 0");
  if (!(spec.contrast > 0.0 && spec.contrast <= 1.0)) throw ConfigError("synthetic contrast must lie in (0, 1]");
  if (!(spec.blob_width > 0.0)) throw ConfigError("synthetic blob_width must be positive");

  Dataset ds;
  ds.name = to_string(spec.kind);
  ds.provenance = to_string(spec.kind) + ":count=" + std::to_string(spec.count) + ",side=" + std::to_string(spec.side) +
                  ",classes=" + std::to_string(spec.classes) + ",seed=" + std::to_string(spec.seed);
  ds.classes = spec.classes;
  ds.images.reserve(spec.count);
  ds.labels.reserve(spec.count);

  std::vector<std::vector<Blob>> prototypes;
  for (std::size_t c = 0; c < spec.classes; ++c) prototypes.push_back(blob_prototype(spec.side, spec.classes, c));

  const double s = static_cast<double>(spec.side);
  const double scale = s / 16.0;
  const double blob_sigma = spec.blob_width * scale;
  const double ring_sigma = 0.5 * spec.blob_width * scale;
  const auto jitter = static_cast<long>(spec.jitter);

  Rng rng = make_rng(spec.seed, {static_cast<std::uint64_t>(spec.kind)});
  std::uniform_int_distribution<std::size_t> pick_class(0, spec.classes - 1);
  std::uniform_int_distribution<long> shift(-jitter, jitter);
  std::uniform_real_distribution<double> gain(0.7, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  for (std::size_t n = 0; n < spec.count; ++n) {
    const std::size_t cls = pick_class(rng);
    const double dx = static_cast<double>(shift(rng));
    const double dy = static_cast<double>(shift(rng));
    const double g = gain(rng);
    ImageTensor img(Shape{1, spec.side, spec.side});
    for (std::size_t y = 0; y < spec.side; ++y) {
      for (std::size_t x = 0; x < spec.side; ++x) {
        const double px = static_cast<double>(x) - dx;
        const double py = static_cast<double>(y) - dy;
        double v = 0.0;
        if (spec.kind == SyntheticKind::GaussBlobs) {
          for (const Blob& b : prototypes[cls]) {
            const double r2 = (px - b.cx) * (px - b.cx) + (py - b.cy) * (py - b.cy);
            v += b.amplitude * std::exp(-r2 / (2.0 * blob_sigma * blob_sigma));
          }
        } else {
          const double radius = s * (0.12 + 0.26 * static_cast<double>(cls) / static_cast<double>(spec.classes - 1));
          const double c0 = (s - 1.0) / 2.0;
          const double r = std::hypot(px - c0, py - c0);
          v = std::exp(-(r - radius) * (r - radius) / (2.0 * ring_sigma * ring_sigma));
        }
        img[y * spec.side + x] = std::clamp(spec.contrast * g * v + spec.noise * noise(rng), 0.0, 1.0);
      }
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(cls);
  }
  return ds;
}

// ---- archives -------------------------------------------------------------

namespace {

constexpr std::string_view kArchiveMagic = "ANDAPERT";
constexpr std::uint8_t kArchiveVersion = 1;

}  // namespace

nlohmann::json archive_config_json(const AdversaryBatch& b) {
  const AttackConfig& c = b.config;
  nlohmann::json j;
  j["attack"] = to_string(b.kind);
  j["source"] = b.source;
  j["epsilon"] = c.epsilon;
  j["steps"] = c.steps;
  j["step_size"] = c.step_size ? nlohmann::json(*c.step_size) : nlohmann::json(nullptr);
  j["aug_count"] = c.aug_count;
  j["augmax"] = c.augmax;
  j["include_identity"] = c.include_identity;
  j["ensemble_k"] = c.ensemble_k;
  j["init_radius"] = c.init_radius;
  j["sample_count"] = c.sample_count;
  j["strategy"] = to_string(c.strategy);
  j["seed"] = c.seed;
  j["accumulate"] = c.accumulate;
  return j;
}

namespace {

void config_from_json(const nlohmann::json& j, AdversaryBatch& b) {
  AttackConfig& c = b.config;
  b.kind = parse_attack_kind(j.at("attack").get<std::string>());
  b.source = j.at("source").get<std::string>();
  c.epsilon = j.at("epsilon").get<double>();
  c.steps = j.at("steps").get<std::size_t>();
  if (j.at("step_size").is_null()) {
    c.step_size.reset();
  } else {
    c.step_size = j.at("step_size").get<double>();
  }
  c.aug_count = j.at("aug_count").get<std::size_t>();
  c.augmax = j.at("augmax").get<double>();
  c.include_identity = j.at("include_identity").get<bool>();
  c.ensemble_k = j.at("ensemble_k").get<std::size_t>();
  c.init_radius = j.at("init_radius").get<double>();
  c.sample_count = j.at("sample_count").get<std::size_t>();
  c.strategy = parse_strategy(j.at("strategy").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.accumulate = j.at("accumulate").get<bool>();
}

}  // namespace

std::string encode_adversary_archive(const AdversaryBatch& batch) {
  detail::ByteWriter out;
  out.bytes(kArchiveMagic);
  out.u8(kArchiveVersion);
  const std::string cfg = archive_config_json(batch).dump();
  out.u64(cfg.size());
  out.bytes(cfg);
  out.u64(batch.records.size());
  for (const auto& r : batch.records) {
    out.u64(r.label);
    out.tensor(r.original);
    out.tensor(r.adversary);
    out.u64(r.samples.size());
    for (const auto& s : r.samples) out.tensor(s);
  }
  return out.str();
}

AdversaryBatch decode_adversary_archive(std::string_view bytes, bool validate, const std::string& context) {
  detail::ByteReader in(bytes, context);
  if (in.remaining() < kArchiveMagic.size() || in.bytes(kArchiveMagic.size()) != kArchiveMagic) {
    in.fail("bad magic (expected ANDAPERT)");
  }
  if (const auto v = in.u8(); v != kArchiveVersion) in.fail("unsupported archive version " + std::to_string(v));

  AdversaryBatch batch;
  const std::uint64_t cfg_len = in.u64();
  if (cfg_len > in.remaining()) in.fail("truncated config block");
  try {
    config_from_json(nlohmann::json::parse(in.bytes(static_cast<std::size_t>(cfg_len))), batch);
  } catch (const nlohmann::json::exception& e) {
    in.fail(std::string("malformed config block: ") + e.what());
  }

  const std::uint64_t count = in.u64();
  if (count > in.remaining()) in.fail("record count exceeds payload");
  batch.records.resize(static_cast<std::size_t>(count));
  for (auto& r : batch.records) {
    r.label = static_cast<std::size_t>(in.u64());
    r.original = in.tensor();
    r.adversary = in.tensor();
    const std::uint64_t samples = in.u64();
    if (samples > in.remaining()) in.fail("sample count exceeds payload");
    r.samples.reserve(static_cast<std::size_t>(samples));
    for (std::uint64_t s = 0; s < samples; ++s) r.samples.push_back(in.tensor());
  }
  if (!in.at_end()) in.fail("trailing bytes after records");
  if (validate) validate_batch(batch);
  return batch;
}

void write_adversary_archive(const AdversaryBatch& batch, const std::string& path) {
  validate_batch(batch);
  detail::write_file(path, encode_adversary_archive(batch));
}

AdversaryBatch read_adversary_archive(const std::string& path, bool validate) {
  return decode_adversary_archive(detail::read_file(path), validate, path);
}

}  // namespace anda
