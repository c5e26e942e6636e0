#include <doctest.h>

#include <nlohmann/json.hpp>

#include "bess/config.hpp"

using namespace bess;
using nlohmann::json;

TEST_SUITE("config") {

TEST_CASE("minimal config takes defaults") {
  const auto cfg = parse_config(json{{"seed", 3}});
  CHECK(cfg.seed == 3);
  CHECK(cfg.cluster_count == 100);
  CHECK(cfg.plant.clusters.size() == 100);
  CHECK(cfg.plant.soc_min == 0.03);
  CHECK(cfg.plant.soc_max == 0.97);
  CHECK(cfg.allocator.mode == AllocationMode::balanced);
  CHECK(cfg.allocator.pso.rng_seed == 3);
  CHECK(cfg.load.kind == LoadSourceKind::synthetic);
  CHECK(cfg.load_seed() == 3);
}

TEST_CASE("seed is required") {
  try {
    parse_config(json::object());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "seed");
  }
}

TEST_CASE("inverted soc band names the field") {
  try {
    parse_config(json{{"seed", 1}, {"schedule", {{"soc_min", 0.5}, {"soc_max", 0.4}}}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "schedule.soc_min");
  }
}

TEST_CASE("unknown keys and wrong types are rejected") {
  auto field_of = [](const json& j) {
    try {
      parse_config(j);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("none");
  };
  CHECK(field_of({{"seed", 1}, {"plant", {{"clusters", 3}}}}) == "plant.clusters");
  CHECK(field_of({{"seed", 1}, {"plant", {{"cluster_count", "many"}}}}) == "plant.cluster_count");
  CHECK(field_of({{"seed", 1}, {"allocator", {{"mode", "random"}}}}) == "allocator.mode");
  CHECK(field_of({{"seed", 1}, {"schedule", {{"power_depth_w", 6e6}}}}) == "schedule.power_depth_w");
  CHECK(field_of({{"seed", 1}, {"sweep", {{"depths_w", {1e6, 1.01e6 + 7}}}}}) == "sweep.depths_w");
  CHECK(field_of({{"seed", 1}, {"load", {{"source", "csv"}}}}) == "load.path");
  CHECK(field_of({{"seed", 1}, {"horizon", {{"start_date", "2024-02-30"}}}}) == "horizon.start_date");
  CHECK(field_of({{"seed", 1}, {"output", {{"formats", {"xml"}}}}}) == "output.formats");
}

TEST_CASE("overrides and nested values") {
  const json doc = {{"seed", 7},
                    {"plant", {{"cluster_count", 4}, {"dt_s", 300}, {"initial_soc", 0.4}}},
                    {"schedule", {{"method", "original"}, {"power_depth_w", 150000}}},
                    {"allocator", {{"mode", "pso"}, {"pso", {{"particles", 12}, {"seed", 99}}}}},
                    {"load", {{"synthetic", {{"days", 2}}}, {"seed", 11}}}};
  const auto cfg = parse_config(doc);
  CHECK(cfg.plant.dt_s == 300);
  CHECK(cfg.plant.initial_soc == 0.4);
  CHECK(cfg.schedule.method == PlanMethod::original);
  CHECK(*cfg.schedule.power_depth_w == 150000);
  CHECK(cfg.allocator.pso.particles == 12);
  CHECK(cfg.allocator.pso.rng_seed == 99);
  CHECK(cfg.load.synthetic.days == 2);
  CHECK(cfg.load.synthetic.dt_s == 300);
  CHECK(cfg.load_seed() == 11);
  const auto load = resolve_load(cfg);
  CHECK(load.size() == 2 * 288);
}

TEST_CASE("horizon slices whole days") {
  const json doc = {{"seed", 7},
                    {"load", {{"synthetic", {{"days", 5}}}}},
                    {"horizon", {{"start_date", "2024-01-02"}, {"end_date", "2024-01-03"}}}};
  const auto cfg = parse_config(doc);
  const auto load = resolve_load(cfg);
  CHECK(load.size() == 2 * 1440);
  CHECK(load.start_time == "2024-01-02T00:00:00Z");
}

TEST_CASE("config hash tracks content") {
  const json a = {{"seed", 1}};
  const json b = {{"seed", 2}};
  CHECK(config_hash(a) == config_hash(json::parse(a.dump())));
  CHECK(config_hash(a) != config_hash(b));
}

} // TEST_SUITE
