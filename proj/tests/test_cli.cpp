#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  std::random_device rd;
  auto p = fs::temp_directory_path() / ("bess_cli_" + name + "_" + std::to_string(rd()));
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream o;
  o << f.rdbuf();
  return o.str();
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

int run(const std::string& args, const fs::path& err_file) {
  const std::string cmd = std::string(BESS_CLI_PATH) + " " + args + " >/dev/null 2>" + err_file.string();
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json small_config(const fs::path& out) {
  return {{"seed", 5},
          {"plant", {{"cluster_count", 4}}},
          {"schedule", {{"power_depth_w", 200000}}},
          {"load", {{"synthetic", {{"days", 2}, {"base_w", 1e6}, {"valley_depth_w", 3e5}, {"morning_peak_w", 2e5}, {"evening_peak_w", 3e5}}}}},
          {"output", {{"directory", out.string()}}}};
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("invalid soc band exits 2 with error json") {
  const auto dir = scratch("invalid");
  write(dir / "bad.json", json{{"seed", 1}, {"schedule", {{"soc_min", 0.5}, {"soc_max", 0.4}}}}.dump());
  CHECK(run("validate-config -c " + (dir / "bad.json").string(), dir / "err.txt") == 2);
  const auto err = json::parse(slurp(dir / "err.txt"));
  CHECK(err.at("error").at("code") == "config_invalid");
  CHECK(err.at("error").at("field") == "schedule.soc_min");
  CHECK(err.at("error").at("message").is_string());
  fs::remove_all(dir);
}

TEST_CASE("usage errors exit 2") {
  const auto dir = scratch("usage");
  CHECK(run("simulate", dir / "err.txt") == 2);
  CHECK(json::parse(slurp(dir / "err.txt")).at("error").at("code") == "usage");
  CHECK(run("simulate -c " + (dir / "missing.json").string(), dir / "err.txt") == 2);
  fs::remove_all(dir);
}

TEST_CASE("bad load file exits 1") {
  const auto dir = scratch("ingest");
  write(dir / "load.csv", "timestamp,load_w\n2024-01-01T00:00:00Z,-1\n");
  write(dir / "c.json", json{{"seed", 1}, {"load", {{"source", "csv"}, {"path", "load.csv"}}}}.dump());
  CHECK(run("simulate -c " + (dir / "c.json").string() + " --out " + (dir / "o").string(), dir / "err.txt") == 1);
  CHECK(json::parse(slurp(dir / "err.txt")).at("error").at("code") == "load_ingest");
  fs::remove_all(dir);
}

TEST_CASE("simulate writes a manifest and identical bytes twice") {
  const auto dir = scratch("det");
  write(dir / "c.json", small_config(dir / "unused").dump());
  for (const char* o : {"a", "b"})
    REQUIRE(run("simulate -c " + (dir / "c.json").string() + " --out " + (dir / o).string(), dir / "err.txt") == 0);
  const auto manifest = json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(manifest.at("seed") == 5);
  CHECK(manifest.contains("config_hash"));
  REQUIRE(manifest.at("files").size() > 0);
  for (const auto& f : manifest.at("files")) {
    const std::string name = f.at("name");
    CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
    CHECK(f.at("bytes") == fs::file_size(dir / "a" / name));
  }
  CHECK(fs::exists(dir / "a" / "metrics.csv"));
  for (const auto& e : fs::directory_iterator(dir / "a"))
    CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("output directory falls back to the configured one and the environment") {
  const auto dir = scratch("outdir");
  write(dir / "c.json", small_config(dir / "configured").dump());
  REQUIRE(run("gen-load -c " + (dir / "c.json").string(), dir / "err.txt") == 0);
  CHECK(fs::exists(dir / "configured" / "load.csv"));

  auto cfg = small_config(dir);
  cfg.erase("output");
  write(dir / "c2.json", cfg.dump());
  const std::string env = "BESS_OUTPUT_DIR=" + (dir / "env").string() + " ";
  const std::string cmd = env + BESS_CLI_PATH + " gen-load -c " + (dir / "c2.json").string() + " >/dev/null 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(dir / "env" / "load.csv"));
  fs::remove_all(dir);
}

TEST_CASE("seed flag overrides the config") {
  const auto dir = scratch("seed");
  write(dir / "c.json", small_config(dir).dump());
  REQUIRE(run("gen-load -c " + (dir / "c.json").string() + " --out " + (dir / "a").string(), dir / "e") == 0);
  REQUIRE(run("gen-load -c " + (dir / "c.json").string() + " --seed 6 --out " + (dir / "b").string(), dir / "e") == 0);
  CHECK(slurp(dir / "a" / "load.csv") != slurp(dir / "b" / "load.csv"));
  CHECK(json::parse(slurp(dir / "b" / "manifest.json")).at("seed") == 6);
  fs::remove_all(dir);
}

} // TEST_SUITE
