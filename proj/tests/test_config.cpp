#include <gtest/gtest.h>

#include <json.hpp>

#include "core/config.hpp"
#include "core/error.hpp"
#include "core/io.hpp"
#include "support/oracles.hpp"

namespace mlada {
namespace {

using testing::TempDir;

std::string usage_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const UsageError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, EmptyFileGivesDefaults) {
  TempDir dir("config");
  write_text_file(dir / "empty.cfg", "");
  const RunConfig cfg = parse_config(dir / "empty.cfg");
  EXPECT_EQ(cfg.train.gamma, 0.08);
  EXPECT_EQ(cfg.train.lambda, 0.1);
  EXPECT_EQ(cfg.train.alpha0, 5.0);
  EXPECT_EQ(cfg.train.momentum, 0.9);
  EXPECT_EQ(cfg.train.batch_size, 32u);
  EXPECT_FALSE(cfg.train.mu.has_value());
  EXPECT_EQ(cfg.classes, 3u);
  EXPECT_EQ(cfg.n_per_class, 100u);
  EXPECT_EQ(cfg.rotation_deg, 35.0);
  EXPECT_EQ(cfg.intensities, (std::vector<double>{0.0, 3.5, 5.0}));
  EXPECT_EQ(cfg.margin_sweep, (std::vector<double>{1.0, 5.0, 10.0, 20.0}));
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, ParsesKeyValueLinesWithCommentsAndSpaces) {
  TempDir dir("config");
  write_text_file(dir / "a.cfg",
                  "# comment\n\n  gamma = 0.2   # trailing\nmax_iters=50\nreversal_schedule = dann_ramp\n"
                  "intensities = 0, 1.5,2\nmu = 7\nenable_entropy = false\n");
  const RunConfig cfg = parse_config(dir / "a.cfg");
  EXPECT_EQ(cfg.train.gamma, 0.2);
  EXPECT_EQ(cfg.train.max_iters, 50u);
  EXPECT_EQ(cfg.train.reversal_schedule, ReversalSchedule::dann_ramp);
  EXPECT_EQ(cfg.intensities, (std::vector<double>{0.0, 1.5, 2.0}));
  EXPECT_EQ(cfg.train.mu, 7.0);
  EXPECT_FALSE(cfg.train.enable_entropy);
}

TEST(Config, TypeErrorNamesTheKey) {
  TempDir dir("config");
  write_text_file(dir / "bad.cfg", "gamma = abc\n");
  const std::string msg = usage_message([&] { parse_config(dir / "bad.cfg"); });
  EXPECT_NE(msg.find("'gamma'"), std::string::npos) << msg;
  EXPECT_NE(msg.find(":1:"), std::string::npos) << msg;
}

TEST(Config, OtherMalformedValuesNameTheirKeys) {
  RunConfig cfg;
  for (const auto& [key, value] : std::vector<std::pair<std::string, std::string>>{
           {"batch_size", "-3"}, {"max_iters", "1.5"}, {"enable_domain", "maybe"},
           {"margin_mode", "sometimes"}, {"intensities", "1,x"}, {"lambda", "inf"}}) {
    const std::string msg = usage_message([&] { cfg.set(key, value); });
    EXPECT_NE(msg.find("'" + key + "'"), std::string::npos) << key << ": " << msg;
  }
}

TEST(Config, UnknownKeyRejected) {
  TempDir dir("config");
  write_text_file(dir / "u.cfg", "gama = 0.1\n");
  const std::string msg = usage_message([&] { parse_config(dir / "u.cfg"); });
  EXPECT_NE(msg.find("unknown config key 'gama'"), std::string::npos) << msg;
}

TEST(Config, LineWithoutEqualsRejected) {
  TempDir dir("config");
  write_text_file(dir / "l.cfg", "gamma 0.1\n");
  EXPECT_THROW(parse_config(dir / "l.cfg"), UsageError);
}

TEST(Config, MissingFileIsDescriptive) {
  TempDir dir("config");
  const std::string msg = usage_message([&] { parse_config(dir / "nope.cfg"); });
  EXPECT_NE(msg.find("nope.cfg"), std::string::npos) << msg;
}

TEST(Config, LaterAssignmentsOverrideFileValues) {
  TempDir dir("config");
  write_text_file(dir / "a.cfg", "gamma = 0.5\nlambda = 0.3\n");
  RunConfig cfg = parse_config(dir / "a.cfg");
  cfg.set("gamma", "0.2");
  EXPECT_EQ(cfg.train.gamma, 0.2);
  EXPECT_EQ(cfg.train.lambda, 0.3);
}

TEST(Config, GetRoundTripsEveryKey) {
  RunConfig cfg;
  cfg.set("mu", "2.5");
  cfg.set("translation", "1,-2");
  for (const std::string& key : config_keys()) {
    RunConfig copy;
    copy.set(key, cfg.get(key));
    EXPECT_EQ(copy.get(key), cfg.get(key)) << key;
  }
}

TEST(Config, ValidateChecksDataSourceAndLists) {
  RunConfig only_source;
  only_source.set("source_csv", "s.csv");
  EXPECT_THROW(only_source.validate(), UsageError);

  RunConfig both;
  both.set("source_csv", "s.csv");
  both.set("target_csv", "t.csv");
  EXPECT_NO_THROW(both.validate());
  both.set("rotation_deg", "10");
  EXPECT_THROW(both.validate(), UsageError);

  RunConfig bad;
  bad.set("intensities", "0,-1");
  EXPECT_THROW(bad.validate(), UsageError);
  RunConfig zero_sweep;
  zero_sweep.set("margin_sweep", "0");
  EXPECT_THROW(zero_sweep.validate(), UsageError);
  RunConfig bad_momentum;
  bad_momentum.set("momentum", "1");
  EXPECT_THROW(bad_momentum.validate(), UsageError);
}

TEST(Manifest, CarriesCommandSeedAndResolvedConfig) {
  RunConfig cfg;
  cfg.set("seed", "17");
  cfg.set("gamma", "0.25");
  cfg.set("out_dir", "somewhere");
  const nlohmann::json j = nlohmann::json::parse(manifest_json(cfg, "train"));
  EXPECT_EQ(j.at("command"), "train");
  EXPECT_EQ(j.at("seed"), 17);
  EXPECT_EQ(j.at("config").at("gamma"), "0.25");
  EXPECT_EQ(j.at("config").at("rotation_deg"), "35");
  EXPECT_FALSE(j.at("config").contains("out_dir"));
  EXPECT_FALSE(j.at("config").contains("source_csv"));
}

TEST(Manifest, ReplayReproducesEveryValue) {
  TempDir dir("config");
  RunConfig cfg;
  cfg.set("seed", "3");
  cfg.set("gamma", "0.1234567890123456");
  cfg.set("reversal_schedule", "dann_ramp");
  cfg.set("intensities", "0,0.1,7");
  cfg.set("mu", "4");
  write_text_file(dir / "manifest.json", manifest_json(cfg, "train"));

  RunConfig replay;
  load_config_file(replay, dir / "manifest.json");
  EXPECT_EQ(manifest_json(replay, "train"), manifest_json(cfg, "train"));
  EXPECT_EQ(replay.train.gamma, cfg.train.gamma);
  EXPECT_EQ(replay.train.mu, cfg.train.mu);
}

TEST(Manifest, CsvRunsRecordPathsInsteadOfBlobKeys) {
  RunConfig cfg;
  cfg.set("source_csv", "s.csv");
  cfg.set("target_csv", "t.csv");
  const nlohmann::json j = nlohmann::json::parse(manifest_json(cfg, "train"));
  EXPECT_EQ(j.at("config").at("source_csv"), "s.csv");
  EXPECT_FALSE(j.at("config").contains("rotation_deg"));
}

TEST(Manifest, MalformedJsonRejected) {
  TempDir dir("config");
  write_text_file(dir / "m.json", "{ not json");
  RunConfig cfg;
  EXPECT_THROW(load_config_file(cfg, dir / "m.json"), UsageError);
  write_text_file(dir / "n.json", "{\"tool\": \"mlada\"}");
  EXPECT_THROW(load_config_file(cfg, dir / "n.json"), UsageError);
}

}  // namespace
}  // namespace mlada
