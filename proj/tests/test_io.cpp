#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "anda/error.hpp"
#include "anda/io.hpp"
#include "anda/zoo.hpp"
#include "test_support.hpp"

namespace anda {
namespace {

std::string bytes(std::initializer_list<int> v) {
  std::string s;
  for (int b : v) s.push_back(static_cast<char>(b));
  return s;
}

TEST(Idx, TwoImagesOfTwoByTwo) {
  const std::string file = bytes({0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 0, 51, 102, 255, 1, 2, 3, 4});
  const auto images = parse_idx_images(file);
  ASSERT_EQ(images.size(), 2u);
  EXPECT_EQ(images[0].shape(), (Shape{1, 2, 2}));
  EXPECT_EQ(images[0][0], 0.0);
  EXPECT_EQ(images[0][1], 51.0 / 255.0);
  EXPECT_EQ(images[0][3], 1.0);
  EXPECT_EQ(images[1][3], 4.0 / 255.0);
}

TEST(Idx, WrongMagicIsRejected) {
  const std::string labels = bytes({0, 0, 8, 1, 0, 0, 0, 2, 3, 7});
  EXPECT_THROW(parse_idx_images(labels), DataError);
  EXPECT_THROW(parse_idx_labels(bytes({0, 0, 8, 3, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 1})), DataError);
}

TEST(Idx, TruncationIsRejected) {
  EXPECT_THROW(parse_idx_images(bytes({0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2, 3})), DataError);
  EXPECT_THROW(parse_idx_images(bytes({0, 0, 8})), DataError);
  EXPECT_THROW(parse_idx_labels(bytes({0, 0, 8, 1, 0, 0, 0, 3, 1, 2})), DataError);
}

TEST(Idx, LabelsPassThrough) {
  EXPECT_EQ(parse_idx_labels(bytes({0, 0, 8, 1, 0, 0, 0, 3, 9, 0, 255})), (std::vector<std::size_t>{9, 0, 255}));
}

TEST(Idx, FileRoundTripAndDataset) {
  test::TempDir dir("idx");
  std::vector<ImageTensor> images;
  for (int i = 0; i < 5; ++i) images.emplace_back(Shape{1, 3, 4}, static_cast<double>(i * 50) / 255.0);
  const std::vector<std::size_t> labels{0, 2, 1, 2, 0};
  {
    std::ofstream(dir.str("x.idx"), std::ios::binary) << encode_idx_images(images);
    std::ofstream(dir.str("y.idx"), std::ios::binary) << encode_idx_labels(labels);
  }
  EXPECT_EQ(read_idx_images(dir.str("x.idx")), images);
  const Dataset ds = load_idx_dataset(dir.str("x.idx"), dir.str("y.idx"));
  EXPECT_EQ(ds.classes, 3u);
  EXPECT_EQ(ds.labels, labels);
  EXPECT_THROW(load_idx_dataset(dir.str("x.idx"), dir.str("y.idx"), 2), DataError);
  std::ofstream(dir.str("short.idx"), std::ios::binary) << encode_idx_labels({0, 1});
  EXPECT_THROW(load_idx_dataset(dir.str("x.idx"), dir.str("short.idx")), DataError);
  EXPECT_THROW(read_idx_images(dir.str("missing.idx")), DataError);
}

TEST(Synthetic, SameSeedIsIdentical) {
  for (SyntheticKind kind : {SyntheticKind::GaussBlobs, SyntheticKind::Rings}) {
    SyntheticSpec spec{.kind = kind, .count = 50, .seed = 3};
    const Dataset a = generate_synthetic(spec);
    const Dataset b = generate_synthetic(spec);
    EXPECT_EQ(a.images, b.images);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_NO_THROW(a.validate());
    spec.seed = 4;
    EXPECT_NE(generate_synthetic(spec).images, a.images);
  }
}

TEST(Synthetic, RejectsBadSpecs) {
  EXPECT_THROW(generate_synthetic({.count = 0}), ConfigError);
  EXPECT_THROW(generate_synthetic({.count = 5, .classes = 1}), ConfigError);
  EXPECT_THROW(generate_synthetic({.count = 5, .contrast = 0.0}), ConfigError);
  EXPECT_THROW(parse_synthetic_kind("moons"), ConfigError);
}

TEST(Synthetic, TwoClassBlobsAreLinearlyLearnable) {
  const SyntheticSpec train{.count = 600, .classes = 2, .seed = 1};
  SyntheticSpec test = train;
  test.count = 400;
  test.seed = 2;
  const Dataset tr = generate_synthetic(train), te = generate_synthetic(test);
  const auto r = train_classifier(tr, te, {ArchKind::SoftmaxLinear, {1, 16, 16}, 2, {}}, {.epochs = 5, .seed = 1});
  EXPECT_GT(r.checkpoint.meta.test_accuracy, 0.95);
}

AdversaryBatch sample_batch(std::size_t records, std::size_t samples) {
  std::mt19937_64 rng(5);
  AdversaryBatch b;
  b.kind = AttackKind::MultiAnda;
  b.source = "mlp";
  b.config.strategy = samples > 0 ? Strategy::S2 : Strategy::S1;
  b.config.sample_count = samples;
  b.config.step_size = 2.0;
  b.config.seed = 123456789012345ULL;
  for (std::size_t i = 0; i < records; ++i) {
    AdversaryRecord r;
    r.original = test::random_tensor({1, 4, 4}, rng, 0.1, 0.9);
    r.label = i % 3;
    const auto near = [&] {
      ImageTensor a = r.original;
      for (auto& v : a.values()) v += test::random_vector(1, rng, -0.05, 0.05)[0];
      return a;
    };
    r.adversary = near();
    for (std::size_t m = 0; m < samples; ++m) r.samples.push_back(near());
    b.records.push_back(std::move(r));
  }
  return b;
}

TEST(Archive, RoundTripIsIdentity) {
  test::TempDir dir("arch");
  const AdversaryBatch b = sample_batch(4, 3);
  write_adversary_archive(b, dir.str("a.andapert"));
  const AdversaryBatch back = read_adversary_archive(dir.str("a.andapert"));
  EXPECT_EQ(back, b);
  EXPECT_EQ(encode_adversary_archive(back), encode_adversary_archive(b));
  EXPECT_EQ(archive_config_json(b)["attack"], "multianda");
}

TEST(Archive, EmptyBatchIsValid) {
  const AdversaryBatch b = sample_batch(0, 0);
  const AdversaryBatch back = decode_adversary_archive(encode_adversary_archive(b));
  EXPECT_TRUE(back.records.empty());
  EXPECT_EQ(back, b);
}

TEST(Archive, TamperedEpsilonIsFlagged) {
  const AdversaryBatch b = sample_batch(3, 0);
  std::string bytes = encode_adversary_archive(b);
  // Shrink epsilon in the JSON block; the stored perturbations now exceed it.
  const std::string from = "\"epsilon\":16.0";
  const auto at = bytes.find(from);
  ASSERT_NE(at, std::string::npos) << bytes.substr(0, 200);
  bytes.replace(at, from.size(), "\"epsilon\": 1.0");
  EXPECT_THROW(decode_adversary_archive(bytes), InvariantError);
  const AdversaryBatch loose = decode_adversary_archive(bytes, false);
  EXPECT_EQ(loose.config.epsilon, 1.0);
  EXPECT_GT(count_violations(loose), 0u);
}

TEST(Archive, RejectsMalformedBytes) {
  const std::string bytes = encode_adversary_archive(sample_batch(2, 1));
  std::string bad = bytes;
  bad[3] = 'x';
  EXPECT_THROW(decode_adversary_archive(bad), DataError);
  bad = bytes;
  bad[8] = 7;
  EXPECT_THROW(decode_adversary_archive(bad), DataError);
  EXPECT_THROW(decode_adversary_archive(bytes.substr(0, bytes.size() - 1)), DataError);
  EXPECT_THROW(decode_adversary_archive(bytes + "!"), DataError);
}

TEST(Archive, WriterRefusesViolations) {
  test::TempDir dir("arch_bad");
  AdversaryBatch b = sample_batch(1, 0);
  b.records[0].adversary[0] = b.records[0].original[0] + 0.5;
  EXPECT_THROW(write_adversary_archive(b, dir.str("a.andapert")), InvariantError);
  EXPECT_FALSE(std::filesystem::exists(dir.str("a.andapert")));
}

}  // namespace
}  // namespace anda
