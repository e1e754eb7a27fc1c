#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace {

namespace fs = std::filesystem;

std::string cli_path() {
  const char* p = std::getenv("MICROLOCAL_CLI");
  return p ? p : "";
}

int run(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("cli runs, validates configs, and reproduces byte-identical outputs") {
  if (cli_path().empty()) {
    MESSAGE("MICROLOCAL_CLI not set; skipping CLI tests");
    return;
  }
  const fs::path base = fs::temp_directory_path() / "microlocal_cli_test";
  fs::remove_all(base);
  fs::create_directories(base);

  SUBCASE("classify exits 0 and writes a certificate") {
    const fs::path out = base / "classify";
    REQUIRE(run("classify --chart model_c0 --out " + out.string()) == 0);
    CHECK(fs::exists(out / "summary.json"));
    CHECK(fs::exists(out / "certificate.json"));
    CHECK(slurp(out / "summary.json").find("\"pass\": true") != std::string::npos);
  }

  SUBCASE("fold control chart exits 1") {
    const fs::path out = base / "fold_control";
    CHECK(run("classify --chart curve_r3 --out " + out.string()) == 1);
  }

  SUBCASE("malformed config exits 2 without artifacts") {
    const fs::path cfg = base / "bad.json";
    std::ofstream(cfg) << "{\"bogus_key\": 1}";
    const fs::path out = base / "bad_out";
    CHECK(run("classify --config " + cfg.string() + " --out " + out.string()) == 2);
    CHECK_FALSE(fs::exists(out / "summary.json"));

    const fs::path cfg2 = base / "bad2.json";
    std::ofstream(cfg2) << "{\"containment_tol\": -1}";
    CHECK(run("compose --config " + cfg2.string() + " --out " + out.string()) == 2);

    const fs::path cfg3 = base / "bad3.json";
    std::ofstream(cfg3) << "not json";
    CHECK(run("compose --config " + cfg3.string() + " --out " + out.string()) == 2);
  }

  SUBCASE("identical config and seed give byte-identical outputs") {
    const fs::path a = base / "rep_a", b = base / "rep_b", c = base / "rep_c";
    REQUIRE(run("compose --seeds 40 --seed 9 --out " + a.string()) == 0);
    REQUIRE(run("compose --seeds 40 --seed 9 --out " + b.string()) == 0);
    REQUIRE(run("compose --seeds 40 --seed 10 --out " + c.string()) == 0);
    CHECK(slurp(a / "cloud.csv") == slurp(b / "cloud.csv"));
    CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
    CHECK(slurp(a / "cloud.csv") != slurp(c / "cloud.csv"));
    CHECK(!slurp(a / "cloud.csv").empty());
  }
}

TEST_SUITE_END();
