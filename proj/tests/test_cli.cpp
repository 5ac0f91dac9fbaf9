#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <map>
#include <string>

#include "lamina/cli.hpp"

using namespace lamina;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("lamina_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::map<std::string, std::string> read_artifacts(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    files[entry.path().filename().string()] = read_text_file(entry.path().string());
  return files;
}

// identical configs must produce byte-identical artifact sets
void require_deterministic(RunConfig cfg, const std::string& tag, int expect) {
  TempDir d1(tag + "_a"), d2(tag + "_b");
  cfg.emit_dir = d1.str();
  REQUIRE(dispatch(cfg) == expect);
  cfg.emit_dir = d2.str();
  REQUIRE(dispatch(cfg) == expect);
  auto a = read_artifacts(d1.path);
  auto b = read_artifacts(d2.path);
  REQUIRE(!a.empty());
  REQUIRE(a == b);
}

}  // namespace

TEST_CASE("cli zero-det") {
  SECTION("verify pass, deterministic artifacts") {
    RunConfig cfg;
    cfg.command = "zero-det";
    cfg.matrix_arg = "[[-1,0],[0,1]]";
    cfg.levels = 6;
    cfg.verify_p = 1.5;
    require_deterministic(cfg, "zerodet", 0);
  }

  SECTION("positive determinant input errors") {
    TempDir dir("zerodet_err");
    RunConfig cfg;
    cfg.command = "zero-det";
    cfg.matrix_arg = "[[1,0],[0,1]]";
    cfg.emit_dir = dir.str();
    CHECK(dispatch(cfg) == 1);
  }

  SECTION("underflow truncation is a failing check") {
    TempDir dir("zerodet_trunc");
    RunConfig cfg;
    cfg.command = "zero-det";
    cfg.matrix_arg = "[[-1e-150,0],[0,1e-150]]";
    cfg.levels = 3;
    cfg.verify_p = 1.5;
    cfg.emit_dir = dir.str();
    CHECK(dispatch(cfg) == 2);
  }

  SECTION("scan emits the moment table") {
    TempDir dir("zerodet_scan");
    RunConfig cfg;
    cfg.command = "zero-det";
    cfg.matrix_arg = "[[-1,0],[0,1]]";
    cfg.levels = 2;
    cfg.scan_p = {1.5, 2.0};
    cfg.scan_levels = {2, 3, 4};
    cfg.emit_dir = dir.str();
    CHECK(dispatch(cfg) == 0);
    CHECK(fs::exists(dir.path / "rigidity_scan.csv"));
  }
}

TEST_CASE("cli delta-shift") {
  SECTION("verify pass") {
    RunConfig cfg;
    cfg.command = "delta-shift";
    cfg.matrix_arg = "[[0,0],[0,0]]";
    cfg.delta = 1.0;
    cfg.verify_p = 2.0;
    require_deterministic(cfg, "delta", 0);
  }

  SECTION("nonpositive delta errors") {
    TempDir dir("delta_err");
    RunConfig cfg;
    cfg.command = "delta-shift";
    cfg.matrix_arg = "[[1,0],[0,1]]";
    cfg.delta = -0.5;
    cfg.emit_dir = dir.str();
    CHECK(dispatch(cfg) == 1);
  }
}

TEST_CASE("cli repair commands") {
  SECTION("weak repair on a generated field") {
    RunConfig cfg;
    cfg.command = "repair";
    cfg.gen = "constant";
    cfg.matrix_arg = "[[-1,0],[0,1]]";
    cfg.n = 2;
    cfg.p = 1.5;
    cfg.l_max = 1;
    require_deterministic(cfg, "repair", 0);
  }

  SECTION("weak repair rejects p >= d") {
    TempDir dir("repair_err");
    RunConfig cfg;
    cfg.command = "repair";
    cfg.gen = "constant";
    cfg.matrix_arg = "[[-1,0],[0,1]]";
    cfg.n = 2;
    cfg.p = 2.0;
    cfg.emit_dir = dir.str();
    CHECK(dispatch(cfg) == 1);
  }

  SECTION("strict repair pipeline") {
    RunConfig cfg;
    cfg.command = "strict-repair";
    cfg.gen = "constant";
    cfg.matrix_arg = "[[0,0],[0,0]]";
    cfg.n = 2;
    cfg.p = 1.5;
    cfg.strict_l_max = 2;
    require_deterministic(cfg, "strict", 0);
  }

  SECTION("strict repair rejects negative fields") {
    TempDir dir("strict_err");
    RunConfig cfg;
    cfg.command = "strict-repair";
    cfg.gen = "constant";
    cfg.matrix_arg = "[[-1,0],[0,1]]";
    cfg.n = 2;
    cfg.emit_dir = dir.str();
    CHECK(dispatch(cfg) == 1);
  }

  SECTION("random generator round trips through repair") {
    TempDir dir("repair_random");
    RunConfig cfg;
    cfg.command = "repair";
    cfg.gen = "random";
    cfg.d = 2;
    cfg.n = 4;
    cfg.seed = 11;
    cfg.mix = 0.4;
    cfg.p = 1.5;
    cfg.l_max = 1;
    cfg.emit_dir = dir.str();
    REQUIRE(dispatch(cfg) == 0);
    auto j = json::parse(read_text_file((dir.path / "repaired_field.json").string()));
    GradientField g = field_from_json(j);
    CHECK(field_stats(g, 1.5).neg_mass == 0.0);
  }
}

TEST_CASE("cli rigidity-scan") {
  SECTION("pass") {
    RunConfig cfg;
    cfg.command = "rigidity-scan";
    cfg.matrix_arg = "[[-1,0],[0,1]]";
    cfg.scan_p = {1.5, 2.0};
    cfg.scan_levels = {2, 3, 4, 5};
    require_deterministic(cfg, "scan", 0);
  }

  SECTION("positive determinant errors") {
    TempDir dir("scan_err");
    RunConfig cfg;
    cfg.command = "rigidity-scan";
    cfg.matrix_arg = "[[1,0],[0,1]]";
    cfg.scan_p = {1.5};
    cfg.scan_levels = {2};
    cfg.emit_dir = dir.str();
    CHECK(dispatch(cfg) == 1);
  }
}

TEST_CASE("cli realize") {
  SECTION("realize a saved laminate") {
    TempDir pre("realize_pre");
    {
      RunConfig cfg;
      cfg.command = "zero-det";
      cfg.matrix_arg = "[[-1,0],[0,1]]";
      cfg.levels = 1;
      cfg.emit_dir = pre.str();
      REQUIRE(dispatch(cfg) == 0);
    }
    RunConfig cfg;
    cfg.command = "realize";
    cfg.laminate_arg = (pre.path / "zero_det_laminate.json").string();
    cfg.epsilon = 0.1;
    cfg.depth = 2;
    cfg.periods = 4;
    cfg.grid_samples = 16;
    require_deterministic(cfg, "realize", 0);
  }

  SECTION("invalid laminate file errors") {
    TempDir dir("realize_err");
    auto bad = dir.path / "bad.json";
    write_text_file(bad.string(), "{\"d\": 2}");
    RunConfig cfg;
    cfg.command = "realize";
    cfg.laminate_arg = bad.string();
    cfg.emit_dir = dir.str();
    CHECK(dispatch(cfg) == 1);
  }
}

TEST_CASE("cli energy") {
  RunConfig cfg;
  cfg.command = "energy";
  cfg.gen = "constant";
  cfg.matrix_arg = "[[-1,0],[0,1]]";
  cfg.n = 2;
  cfg.p = 1.5;
  cfg.l_max = 1;
  cfg.strict_l_max = 1;
  cfg.j_inner = 0;
  cfg.integrand = "pnorm:2";
  require_deterministic(cfg, "energy", 0);

  SECTION("unknown integrand errors") {
    TempDir dir("energy_err");
    cfg.integrand = "mystery:1";
    cfg.emit_dir = dir.str();
    CHECK(dispatch(cfg) == 1);
  }
}

TEST_CASE("cli config validation") {
  TempDir dir("cfg_err");
  RunConfig cfg;
  cfg.command = "repair";
  cfg.emit_dir = dir.str();
  // neither --field nor --gen
  CHECK(dispatch(cfg) == 1);

  cfg.command = "zero-det";
  cfg.matrix_arg = "[[1,2],[3,4],[5,6]]";  // not square
  CHECK(dispatch(cfg) == 1);

  cfg.matrix_arg = "not json";
  CHECK(dispatch(cfg) == 1);

  cfg.command = "nonsense";
  CHECK(dispatch(cfg) == 1);
}
