#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rankgauntlet/config.hpp"
#include "rankgauntlet/error.hpp"

using namespace rankgauntlet;

TEST_CASE("defaults convert to the built-in experiment") {
  const auto cfg = to_experiment(default_config());
  const ExperimentConfig def;
  CHECK(cfg.seed == def.seed);
  CHECK(cfg.total_clients == 30);
  CHECK(cfg.per_round == 10);
  CHECK(cfg.rounds == 100);
  CHECK(cfg.k_percent == 50.0);
  CHECK(cfg.attack == AttackKind::kNone);
  CHECK(cfg.defense == DefenseKind::kNone);
  CHECK(cfg.attack_params.sinkhorn.iterations == 50);
  CHECK(cfg.attack_params.sinkhorn.learning_rate == 0.1);
}

TEST_CASE("ini sections flatten to dotted keys") {
  std::istringstream is("[experiment]\nseed = 9\n# comment\n[attack]\nname = vem\nzeta = 0.5\n");
  const auto m = parse_config(is);
  CHECK(m.at("experiment.seed") == "9");
  CHECK(m.at("attack.name") == "vem");
  CHECK(m.at("attack.zeta") == "0.5");
}

TEST_CASE("precedence: defaults, file, environment, overrides") {
  const auto path = std::filesystem::temp_directory_path() / "rankgauntlet_precedence.ini";
  {
    std::ofstream os(path);
    os << "[experiment]\nseed = 3\nrounds = 7\n";
  }
  auto cfg = resolve_config(path.string(), {}, nullptr);
  CHECK(cfg.at("experiment.seed") == "3");
  CHECK(cfg.at("experiment.rounds") == "7");
  cfg = resolve_config(path.string(), {}, "11");
  CHECK(cfg.at("experiment.seed") == "11");
  cfg = resolve_config(path.string(), {"experiment.seed=12"}, "11");
  CHECK(cfg.at("experiment.seed") == "12");
  std::filesystem::remove(path);
}

TEST_CASE("unknown keys and bad values are rejected") {
  auto cfg = default_config();
  CHECK_THROWS_AS(apply_override(cfg, "attack.zetta=0.5"), Error);
  CHECK_THROWS_AS(apply_override(cfg, "attack.zeta"), Error);
  apply_override(cfg, "experiment.rounds=ten");
  CHECK_THROWS_AS(to_experiment(cfg), Error);
  cfg = default_config();
  apply_override(cfg, "attack.name=nonsense");
  CHECK_THROWS_AS(to_experiment(cfg), Error);
  cfg = default_config();
  apply_override(cfg, "experiment.k_percent=0");
  CHECK_THROWS_AS(to_experiment(cfg), Error);

  const auto path = std::filesystem::temp_directory_path() / "rankgauntlet_unknown.ini";
  {
    std::ofstream os(path);
    os << "[experiment]\nsede = 3\n";
  }
  try {
    resolve_config(path.string(), {}, nullptr);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidConfig);
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(resolve_config(std::string("/nonexistent/x.ini"), {}, nullptr), Error);
}

TEST_CASE("hash is stable and sensitive") {
  auto a = default_config();
  auto b = default_config();
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  apply_override(b, "experiment.seed=2");
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("written config reads back identically") {
  auto cfg = default_config();
  apply_override(cfg, "attack.name=vem");
  std::stringstream ss;
  write_config(ss, cfg);
  CHECK(parse_config(ss) == cfg);
}
