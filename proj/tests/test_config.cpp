#include <gtest/gtest.h>

#include "navgym/config.hpp"

using namespace navgym;

TEST(Config, DefaultsMatchDocumentedValues) {
  const RunConfig c;
  EXPECT_EQ(c.train.num_agents, 32);
  EXPECT_EQ(c.train.num_trainers, 8);
  EXPECT_EQ(c.train.t_max, 5);
  EXPECT_EQ(c.train.gamma, 0.99);
  EXPECT_EQ(c.env.robot.radius, 0.177);
  EXPECT_EQ(c.env.scanner.num_beams, 1081);
  EXPECT_EQ(c.net.hidden, 256);
  EXPECT_EQ(c.optim.learning_rate, 3e-4);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParsesPartialDocument) {
  const RunConfig c = parse_config(R"({"train": {"num_agents": 4, "seed": 9}, "robot": {"dt": 0.25}})");
  EXPECT_EQ(c.train.num_agents, 4);
  EXPECT_EQ(c.train.seed, 9u);
  EXPECT_EQ(c.env.robot.dt, 0.25);
  EXPECT_EQ(c.train.num_trainers, 8);
}

TEST(Config, UnknownKeyNamed) {
  try {
    parse_config(R"({"train": {"num_agnets": 4}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.num_agnets"), std::string::npos);
  }
  EXPECT_THROW(parse_config(R"({"bogus": 1})"), ConfigError);
}

TEST(Config, WrongTypeRejected) {
  EXPECT_THROW(parse_config(R"({"train": {"num_agents": "four"}})"), ConfigError);
  EXPECT_THROW(parse_config("{not json"), ConfigError);
}

TEST(Config, InvalidValuesRejected) {
  EXPECT_THROW(parse_config(R"({"robot": {"radius": -1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scanner": {"num_beams": 1000}})"), ConfigError);
}

TEST(Config, HashIsCanonical) {
  const RunConfig a = parse_config(R"({"train": {"seed": 3, "num_agents": 2}})");
  const RunConfig b = parse_config(R"({"train": {"num_agents": 2, "seed": 3}})");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), RunConfig{}.hash());
  // Training-only settings leave the model hash alone.
  EXPECT_EQ(a.model_hash(), RunConfig{}.model_hash());
  EXPECT_NE(parse_config(R"({"robot": {"dt": 0.25}})").model_hash(), RunConfig{}.model_hash());
}

TEST(Config, JsonRoundTrip) {
  const RunConfig a = parse_config(R"({"train": {"maps": [{"path": "x.map", "weight": 2}], "curriculum": [{"from_episode": 10, "weights": [1]}]}})");
  const RunConfig b = parse_config(a.to_json().dump());
  EXPECT_EQ(a.canonical(), b.canonical());
  ASSERT_EQ(b.map_specs.size(), 1u);
  EXPECT_EQ(b.map_specs[0].weight, 2.0);
  ASSERT_EQ(b.curriculum_specs.size(), 1u);
  EXPECT_EQ(b.curriculum_specs[0].from_episode, 10u);
}

TEST(Config, Overrides) {
  const RunConfig c = apply_overrides(RunConfig{}, {"train.num_agents=3", "output_dir=runs/x", "network.learning_rate=1e-3"});
  EXPECT_EQ(c.train.num_agents, 3);
  EXPECT_EQ(c.output_dir, "runs/x");
  EXPECT_EQ(c.optim.learning_rate, 1e-3);
  EXPECT_THROW(apply_overrides(RunConfig{}, {"train.nope=1"}), ConfigError);
  EXPECT_THROW(apply_overrides(RunConfig{}, {"no_equals"}), ConfigError);
}

TEST(Config, ShippedDefaultMatchesBuiltIn) {
  RunConfig c = load_config_file(std::string(NAVGYM_SOURCE_DIR) + "/configs/default.json");
  EXPECT_EQ(c.canonical(), RunConfig{}.canonical());
  EXPECT_NO_THROW(c.load_maps());
  ASSERT_EQ(c.train.maps.size(), 1u);
  EXPECT_EQ(c.train.maps[0].name, "simple_room");
}

TEST(Config, MissingMapIsConfigError) {
  RunConfig c = apply_overrides(RunConfig{}, {R"(train.maps=[{"path": "nowhere.map", "weight": 1}])"});
  EXPECT_THROW(c.load_maps(), ConfigError);
}
