#include <gtest/gtest.h>

#include "anda/config.hpp"
#include "anda/error.hpp"

namespace anda {
namespace {

TEST(RunConfig, DefaultsResolve) {
  const Experiment e = resolve(RunConfig{});
  EXPECT_EQ(e.models.size(), 3u);
  EXPECT_EQ(e.model("cnn").arch, ArchKind::SmallCnn);
  EXPECT_EQ(e.model("cnn").layers, (std::vector<std::size_t>{8, 16}));
  AttackConfig want;
  want.seed = e.attack.seed;
  EXPECT_EQ(e.attack, want);
  EXPECT_EQ(e.inputs, 200u);
  EXPECT_EQ(e.dataset.train.count, 2000u);
  EXPECT_EQ(e.dataset.test.count, 500u);
  EXPECT_NE(e.dataset.train.seed, e.dataset.test.seed);
  EXPECT_FALSE(e.correct_only);
  EXPECT_THROW(e.model("vgg"), ConfigError);
}

TEST(RunConfig, ParsesCommentsListsAndWhitespace) {
  const RunConfig c = RunConfig::parse(
      "# run\n"
      "seed = 7\n"
      "\n"
      "models = a, b   # two models\n"
      "model.a.arch = mlp\n"
      "model.a.layers = 5,6\n"
      "model.b.arch=softmax_linear\n");
  const Experiment e = resolve(c);
  EXPECT_EQ(e.seed, 7u);
  ASSERT_EQ(e.models.size(), 2u);
  EXPECT_EQ(e.models[0].layers, (std::vector<std::size_t>{5, 6}));
  EXPECT_EQ(e.models[1].arch, ArchKind::SoftmaxLinear);
  EXPECT_NE(e.models[0].seed, e.models[1].seed);
}

TEST(RunConfig, UnknownKeysAreRejected) {
  EXPECT_THROW(RunConfig::parse("attack.epsilonn = 4\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("no equals sign\n"), ConfigError);
  RunConfig c;
  EXPECT_THROW(c.set("train.learning_rate", "0.1"), ConfigError);
  EXPECT_THROW(c.set_assignment("seed"), ConfigError);
  EXPECT_THROW(c.set("model.x.widths", "3"), ConfigError);
  EXPECT_FALSE(is_known_key("eval.target"));
  EXPECT_TRUE(is_known_key("model.anything.arch"));
}

TEST(RunConfig, LaterAssignmentsWin) {
  RunConfig c = RunConfig::parse("attack.epsilon = 8\n");
  c.set_assignment("attack.epsilon=4");
  EXPECT_EQ(c.get("attack.epsilon"), "4");
  EXPECT_EQ(resolve(c).attack.epsilon, 4.0);
}

TEST(Resolve, SemanticErrors) {
  const auto bad = [](const std::string& key, const std::string& value) {
    RunConfig c;
    c.set(key, value);
    return c;
  };
  EXPECT_THROW(resolve(bad("model.cnn.arch", "resnet")), ConfigError);
  EXPECT_THROW(resolve(bad("attack.kind", "pgd")), ConfigError);
  EXPECT_THROW(resolve(bad("attack.aug_count", "10")), ConfigError);
  EXPECT_THROW(resolve(bad("attack.epsilon", "-1")), ConfigError);
  EXPECT_THROW(resolve(bad("attack.steps", "ten")), ConfigError);
  EXPECT_THROW(resolve(bad("attack.sources", "vgg")), ConfigError);
  EXPECT_THROW(resolve(bad("eval.targets", "vgg")), ConfigError);
  EXPECT_THROW(resolve(bad("dataset.kind", "moons")), ConfigError);
  EXPECT_THROW(resolve(bad("dataset.kind", "idx")), ConfigError);  // paths missing
  EXPECT_THROW(resolve(bad("ablate.axis", "depth")), ConfigError);
  EXPECT_THROW(resolve(bad("eval.correct_only", "maybe")), ConfigError);
  EXPECT_THROW(resolve(bad("model.extra.arch", "mlp")), ConfigError);  // not declared in `models`

  RunConfig s2_bim;
  s2_bim.set("attack.kind", "bim");
  s2_bim.set("attack.strategy", "s2");
  EXPECT_THROW(resolve(s2_bim), ConfigError);

  RunConfig k;
  k.set("ablate.axis", "k");
  k.set("ablate.values", "1,0");
  EXPECT_THROW(resolve(k), ConfigError);
}

TEST(Resolve, AblationDefaults) {
  RunConfig c;
  c.set("ablate.axis", "n");
  EXPECT_EQ(resolve(c).ablate_values, (std::vector<std::string>{"1", "4", "9", "16", "25", "36", "49"}));
  c.set("ablate.axis", "k");
  EXPECT_EQ(resolve(c).ablate_values, (std::vector<std::string>{"1", "2", "4"}));
  EXPECT_EQ(parse_ablation_axis(to_string(AblationAxis::Accumulation)), AblationAxis::Accumulation);
}

TEST(Resolve, SnapshotRoundTrips) {
  RunConfig c;
  c.set("seed", "11");
  c.set("attack.kind", "multianda");
  const RunConfig back = RunConfig::parse(c.resolved_text());
  EXPECT_EQ(back.values(), c.values());
}

}  // namespace
}  // namespace anda
