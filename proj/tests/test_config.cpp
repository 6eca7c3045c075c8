#include <doctest.h>

#include <cstdlib>

#include "semcom/common.hpp"
#include "semcom/config.hpp"

using namespace semcom;

TEST_CASE("config text parses keys, comments, and reports line numbers") {
  const std::string text =
      "# experiment\n"
      "task = SEGMENT\n"
      "seed = 99\n"
      "\n"
      "channel.snr_db = 7.5   # inline comment\n"
      "model.extractor.embed_dim = 32\n"
      "eval.snr_list = 0, 6, 12\n"
      "train.snr_policy = fixed\n";
  const ExperimentConfig cfg = parse_config_text(text, "inline");
  CHECK(cfg.task == "SEGMENT");
  CHECK(cfg.seed == 99);
  CHECK(cfg.channel_snr_db == doctest::Approx(7.5));
  CHECK(cfg.extractor.embed_dim == 32);
  CHECK(cfg.eval_snr_list == std::vector<double>{0.0, 6.0, 12.0});
  CHECK(cfg.snr_policy == "fixed");

  try {
    (void)parse_config_text("task = RECONSTRUCT\nbogus.key = 3\n", "inline");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("inline:2") != std::string::npos);
    CHECK(msg.find("bogus.key") != std::string::npos);
  }

  CHECK_THROWS_AS((void)parse_config_text("train.lr = fast\n", "inline"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("just a line\n", "inline"), ConfigError);
}

TEST_CASE("serialize/parse round-trip preserves every key") {
  ExperimentConfig cfg;
  cfg.task = "RECONSTRUCT";
  cfg.seed = 1234;
  cfg.lr = 3.5e-4;
  cfg.encoder.strides = {2, 2};
  cfg.extractor.depths = {1, 2, 1};
  cfg.eval_snr_list = {1.5, 2.5};
  cfg.kb_memory_file = "mem.tsv";
  const std::string text = serialize_config(cfg);
  const ExperimentConfig back = parse_config_text(text, "roundtrip");
  CHECK(serialize_config(back) == text);
  CHECK(back.lr == cfg.lr);
  CHECK(back.encoder.strides == cfg.encoder.strides);
  CHECK(back.extractor.depths == cfg.extractor.depths);
}

TEST_CASE("environment overrides use the SEMCOM_ prefix with __ for dots") {
  ExperimentConfig cfg;
  ::setenv("SEMCOM_CHANNEL__SNR_DB", "3.25", 1);
  ::setenv("SEMCOM_TRAIN__EPOCHS", "5", 1);
  apply_env_overrides(cfg);
  CHECK(cfg.channel_snr_db == doctest::Approx(3.25));
  CHECK(cfg.epochs == 5);
  ::setenv("SEMCOM_TRAIN__EPOCHS", "not_a_number", 1);
  CHECK_THROWS_AS(apply_env_overrides(cfg), ConfigError);
  ::unsetenv("SEMCOM_CHANNEL__SNR_DB");
  ::unsetenv("SEMCOM_TRAIN__EPOCHS");
}

TEST_CASE("the model hash tracks architecture keys only") {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.lr = 123.0;
  b.epochs = 999;
  b.channel_snr_db = -4;
  CHECK(config_hash(a) == config_hash(b));

  ExperimentConfig c = a;
  c.extractor.embed_dim = 32;
  CHECK(config_hash(a) != config_hash(c));
  ExperimentConfig d = a;
  d.encoder.out_channels = 16;
  CHECK(config_hash(a) != config_hash(d));
  ExperimentConfig e = a;
  e.image_size = 64;
  CHECK(config_hash(a) != config_hash(e));
}

TEST_CASE("key catalog is sorted in the canonical dump") {
  const auto names = config_key_names();
  CHECK(names.size() > 30);
  const std::string dump = serialize_config(ExperimentConfig{});
  // every registered key appears
  for (const auto& n : names) {
    CHECK(dump.find(n + " = ") != std::string::npos);
  }
}
