// Desk-scale ablation sweep through the command layer (about a minute).

#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "../test_support.hpp"
#include "anda/commands.hpp"

namespace anda {
namespace {

// Mean black-box ASR per sweep value, read back from ablation_<axis>.csv.
std::map<std::string, double> black_box_by_value(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::map<std::string, double> sum;
  std::map<std::string, int> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() < 5 || f[4].empty()) continue;
    sum[f[1]] += std::stod(f[4]);
    ++rows[f[1]];
  }
  for (auto& [k, v] : sum) v /= rows[k];
  return sum;
}

TEST(DeskAblation, EvenGridSidesDipWithoutIdentity) {
  test::TempDir dir("sweep");
  RunConfig config;
  config.set("out", dir.str());
  config.set("attack.include_identity", "false");
  config.set("ablate.axis", "n");
  config.set("ablate.values", "9,16,25,36,49");
  std::ostringstream log;
  cmd_train(config, log);
  cmd_ablate(config, log);
  const auto asr = black_box_by_value(dir.str("ablation_n.csv"));
  ASSERT_EQ(asr.size(), 5u) << log.str();
  // Grids with an even side never evaluate the untranslated image.
  EXPECT_LT(asr.at("16"), asr.at("9")) << log.str();
  EXPECT_LT(asr.at("16"), asr.at("25")) << log.str();
  EXPECT_LT(asr.at("36"), asr.at("25")) << log.str();
  EXPECT_LT(asr.at("36"), asr.at("49")) << log.str();
}

}  // namespace
}  // namespace anda
