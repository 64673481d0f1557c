#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "stokeshom/config.hpp"
#include "stokeshom/errors.hpp"
#include "stokeshom/pipeline.hpp"

using namespace stokeshom;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> diagnostics(const std::string& text) {
  try {
    validate_config_text(text);
  } catch (const ConfigError& e) {
    return e.diagnostics;
  }
  return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("stokeshom_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("empty config resolves documented defaults") {
    RunConfig c = validate_config_text("{}");
    CHECK(c.grid == 256);
    CHECK(c.kappa == std::vector<double>{1e2, 1e3, 1e4});
    CHECK(c.tol == 1e-8);
    CHECK(c.boundary_points == 256);
    CHECK(validate_config_text("").grid == 256);
    RunConfig d3 = validate_config_text(R"({"dim": 3})");
    CHECK(d3.grid == 64);
    CHECK(d3.boundary_points == 1024);
  }

  TEST_CASE("unknown keys come with a suggestion") {
    auto d = diagnostics(R"({"kapa": [100, 1000]})");
    REQUIRE(d.size() == 1);
    CHECK(any_contains(d, "'kapa'"));
    CHECK(any_contains(d, "did you mean 'kappa'"));
    CHECK(any_contains(diagnostics(R"({"zzzzzzzzzz": 1})"), "unknown key 'zzzzzzzzzz'"));
    CHECK(edit_distance("kapa", "kappa") == 1);
    CHECK(edit_distance("", "abc") == 3);
  }

  TEST_CASE("every violation is listed") {
    auto d = diagnostics(R"({"delta": -0.1, "dim": 4, "grid": 8, "kappa": [1000, 100], "tol": "small"})");
    CHECK(d.size() >= 5);
    CHECK(any_contains(d, "'delta'"));
    CHECK(any_contains(d, "'dim'"));
    CHECK(any_contains(d, "'grid'"));
    CHECK(any_contains(d, "'kappa'"));
    CHECK(any_contains(d, "'tol'"));
    CHECK(any_contains(diagnostics("{\n  \"dim\": 2,\n  oops\n}"), "line 3"));
    CHECK(any_contains(diagnostics("[1, 2]"), "object"));
    CHECK(any_contains(diagnostics(R"({"fault_injection": {"fail_seed": [1]}})"), "fault_injection.fail_seed"));
  }

  TEST_CASE("emit and validate round trip") {
    for (const char* text : {"{}", R"({"dim": 3, "seeds": [4, 5], "kappa": 1000})",
                             R"({"radius_law": "uniform", "radius_min": 0.2, "radius_max": 0.3, "eps": [0.25, 0.125]})",
                             R"({"fault_injection": {"fail_seeds": [2]}, "tol": 1e-9, "moment": false})"}) {
      RunConfig c = validate_config_text(text);
      CHECK(validate_config_text(emit_config(c)) == c);
      CHECK(emit_config(validate_config_text(emit_config(c))) == emit_config(c));
    }
    RunConfig k = validate_config_text(R"({"kappa": 1000})");
    CHECK(k.kappa == std::vector<double>{1000});
  }

  TEST_CASE("particle CSV round trip") {
    auto dir = scratch("csv");
    auto c = generate_rsa(3, 2, 4.0, Target::fraction(0.1), Law::uniform(0.2, 0.3), Law::constant(0.02));
    write_particles_csv((dir / "p.csv").string(), c);
    auto back = read_particles_csv((dir / "p.csv").string(), 2, 4.0, c.delta);
    REQUIRE(back.size() == c.size());
    for (std::size_t n = 0; n < c.size(); ++n) {
      CHECK((back.particles[n].center.array() == c.particles[n].center.array()).all());
      CHECK(back.particles[n].radius == c.particles[n].radius);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0 / 3) == "0.3333333333333333");
    fs::remove_all(dir);
  }

  TEST_CASE("negative delta is rejected by run") {
    auto dir = scratch("bad");
    std::ofstream(dir / "c.json") << R"({"delta": -1})";
    RunSpec s;
    s.subcommand = "gen";
    s.config_path = (dir / "c.json").string();
    s.out_dir = (dir / "out").string();
    try {
      run(s);
      CHECK(false);
    } catch (const ConfigError& e) {
      CHECK(e.kind() == ErrorKind::ConfigInvalid);
      CHECK(any_contains(e.diagnostics, "'delta'"));
    }
    s.subcommand = "frobnicate";
    CHECK_THROWS_AS(run(s), ConfigError);
    fs::remove_all(dir);
  }

  TEST_CASE("gen then gaps through files") {
    auto dir = scratch("stages");
    RunSpec g;
    g.subcommand = "gen";
    g.out_dir = (dir / "gen").string();
    g.seeds = std::vector<std::uint64_t>{4};
    auto r = run(g);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(dir / "gen" / "particles_seed4.csv"));
    CHECK(fs::exists(dir / "gen" / "manifest.json"));

    std::ofstream(dir / "c.json") << R"({"particles": ")" + (dir / "gen" / "particles_seed4.csv").string() + "\"}";
    RunSpec q;
    q.subcommand = "gaps";
    q.config_path = (dir / "c.json").string();
    q.out_dir = (dir / "gaps").string();
    q.seeds = std::vector<std::uint64_t>{4};
    CHECK(run(q).exit_code == 0);
    std::string csv = slurp(dir / "gaps" / "gaps_seed4.csv");
    CHECK(csv.rfind("n,rho_circ,rho_refined,nearest\n", 0) == 0);

    auto man = nlohmann::json::parse(slurp(dir / "gaps" / "manifest.json"));
    CHECK(man["parameters"]["particles"].get<std::string>().find("particles_seed4.csv") != std::string::npos);
    for (const auto& a : man["artifacts"]) CHECK(fs::exists(dir / "gaps" / a.get<std::string>()));
    CHECK(man["steps"][0]["status"] == "ok");
    fs::remove_all(dir);
  }

  TEST_CASE("cutoff-verify writes its reports") {
    auto dir = scratch("cut");
    std::ofstream(dir / "c.json") << R"({"cutoff_dims": [2], "cutoff_rs": [4], "cutoff_kinds": ["grad"]})";
    RunSpec s;
    s.subcommand = "cutoff-verify";
    s.config_path = (dir / "c.json").string();
    s.out_dir = (dir / "out").string();
    auto r = run(s);
    CHECK(r.exit_code == 0);
    auto rep = nlohmann::json::parse(slurp(dir / "out" / "scaling.json"));
    REQUIRE(rep.size() == 1);
    CHECK(rep[0]["abs_error"].get<double>() < 0.05);
    CHECK(slurp(dir / "out" / "scaling.csv").rfind("d,r,kind,rho,norm\n", 0) == 0);
    fs::remove_all(dir);
  }

  TEST_CASE("effective: failure injection and determinism") {
    auto dir = scratch("eff");
    std::ofstream(dir / "c.json") << R"({"grid": 64, "fault_injection": {"fail_seeds": [2]}})";
    RunSpec s;
    s.subcommand = "effective";
    s.config_path = (dir / "c.json").string();
    s.seeds = std::vector<std::uint64_t>{1, 2, 3};
    s.out_dir = (dir / "a").string();
    auto a = run(s);
    CHECK(a.exit_code != 0);
    std::string csv = slurp(dir / "a" / "effective.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 rows
    int failed = 0;
    for (const auto& st : a.manifest.steps) failed += !st.ok;
    CHECK(failed == 1);
    auto man = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
    bool seen = false;
    for (const auto& st : man["steps"])
      if (st["status"] == "failed") seen = st["message"].get<std::string>().find("StepFailed") != std::string::npos;
    CHECK(seen);

    s.out_dir = (dir / "b").string();
    run(s);
    for (const auto& e : fs::directory_iterator(dir / "a")) {
      const auto name = e.path().filename().string();
      if (name == "manifest.json") continue;
      CHECK(slurp(e.path()) == slurp(dir / "b" / name));
    }
    fs::remove_all(dir);
  }

  TEST_CASE("overrides are validated like file input") {
    RunSpec s;
    s.subcommand = "gen";
    s.grid = 4;
    CHECK_THROWS_AS(resolve_config(s), ConfigError);
    s.grid = 128;
    s.dim = 3;
    s.kappa_ladder = std::vector<double>{10, 100, 1000};
    RunConfig c = resolve_config(s);
    CHECK(c.grid == 128);
    CHECK(c.dim == 3);
    CHECK(c.kappa.front() == 10);
  }
}
