#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "support.hpp"
#include "xsection/cli.hpp"
#include "xsection/error.hpp"
#include "xsection/report.hpp"

using namespace xs;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void put(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string pointer_error(const json& doc) {
  try {
    parse_run_config(doc);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidConfig);
    return e.what();
  }
  FAIL("expected a config error");
  return {};
}

json small_run(const fs::path& out) {
  return json{{"synth", {{"n_stocks", 30}, {"n_months", 30}, {"seed", 3}}},
              {"train_window", 3},
              {"mlp", {{"epochs", 2}}},
              {"models", {"NN3_1", "RF_mf5_md3_n5", {{"type", "svr"}, {"C", 1.0}, {"gamma", 0.01}, {"epsilon", 0.1}},
                          "ensemble:[NN3_1,RF_mf5_md3_n5]"}},
              {"seed", 4},
              {"output_dir", out.string()}};
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(XSECTION_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config schema errors name the offending value") {
  CHECK(pointer_error(json{{"synth", json::object()}, {"models", {"NN3_1"}}, {"bogus", 1}}).find("/bogus") !=
        std::string::npos);
  CHECK(pointer_error(json{{"synth", json::object()},
                           {"models", {"NN3_1", {{"type", "svr"}, {"C", 1}, {"gamma", "x"}, {"epsilon", 0.1}}}}})
            .find("/models/1/gamma") != std::string::npos);
  CHECK(pointer_error(json{{"models", {"NN3_1"}}}).find("panel") != std::string::npos);
  CHECK(pointer_error(json{{"synth", json::object()}, {"models", {"NN3_9"}}}).find("/models/0") != std::string::npos);
  CHECK(pointer_error(json{{"synth", json::object()}, {"models", {"NN3_1", "NN3_1"}}}).find("NN3_1") !=
        std::string::npos);
  CHECK(pointer_error(json{{"synth", {{"n_stocks", "many"}}}, {"models", {"NN3_1"}}}).find("/synth/n_stocks") !=
        std::string::npos);
}

TEST_CASE("model entries expand to the documented families") {
  const mlp::TrainConfig t;
  CHECK(expand_model_entry("table3", t, "/models/0").size() == 16);
  CHECK(expand_model_entry("svr_grid", t, "/models/0").size() == 24);
  CHECK(expand_model_entry("rf_grid", t, "/models/0").size() == 37);
  const auto rf = expand_model_entry("RF_mf25_md7", t, "/models/0");
  REQUIRE(rf.size() == 1);
  CHECK(std::get<forest::ForestHyper>(rf[0].kind).n_estimators == 1000);
  const auto sv = expand_model_entry("SVR_C0.1_g0.01_e0.1", t, "/models/0");
  CHECK(sv[0].name == "SVR_C0.1_g0.01_e0.1");
  const auto ens = expand_model_entry("ensemble:[DNN8_3,RF_mf25_md7,SVR_C0.1_g0.01_e0.1]", t, "/models/0");
  REQUIRE(ens.size() == 1);
  CHECK(ens[0].name == "Ensemble[DNN8_3+RF_mf25_md7+SVR_C0.1_g0.01_e0.1]");
  CHECK(std::get<EnsembleSpec>(ens[0].kind).members.size() == 3);
  CHECK(file_stem("Ensemble[a+b]").find('[') == std::string::npos);
}

TEST_CASE("resolved config round trips") {
  xs::testing::TempDir tmp("cli_resolved");
  auto doc = small_run(tmp.path() / "out");
  auto config = parse_run_config(doc);
  materialize_panel(config);
  CHECK(*config.eval_start == MonthId{2001, 5});
  CHECK(*config.eval_end == MonthId{2002, 7});
  const auto resolved = resolved_config_json(config);
  auto again = parse_run_config(resolved);
  materialize_panel(again);
  CHECK(resolved_config_json(again) == resolved);
  CHECK(walk_forward_configs(again).size() == 4);
}

TEST_CASE("run writes identical artifacts twice and report renders them") {
  xs::testing::TempDir tmp("cli_run");
  put(tmp.path() / "config.json", small_run(tmp.path() / "a").dump());
  std::ostringstream out, err;
  CommandOptions o;
  o.config_path = (tmp.path() / "config.json").string();
  REQUIRE(cmd_run(o, out, err) == kExitOk);
  o.out_dir = (tmp.path() / "b").string();
  REQUIRE(cmd_run(o, out, err) == kExitOk);

  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(tmp.path() / "a")) {
    const auto name = entry.path().filename();
    CAPTURE(name.string());
    ++files;
    REQUIRE(fs::exists(tmp.path() / "b" / name));
    if (name != "resolved_config.json") CHECK(slurp(entry.path()) == slurp(tmp.path() / "b" / name));
  }
  CHECK(files == 4 + 2 * 4);
  CHECK(out.str().find("Ensemble[NN3_1+RF_mf5_md3_n5]") != std::string::npos);

  CommandOptions r;
  r.target = (tmp.path() / "a").string();
  r.out_dir = (tmp.path() / "rep").string();
  std::ostringstream table;
  REQUIRE(cmd_report(r, table, err) == kExitOk);
  CHECK(slurp(tmp.path() / "rep" / "table.txt") == table.str());
  CHECK(table.str().find("CORR") != std::string::npos);
  std::istringstream cum(slurp(tmp.path() / "rep" / "cumulative_ls.csv"));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(cum, line)) ++lines;
  CHECK(lines == 1 + 15);

  const auto report = report_from_json(json::parse(slurp(tmp.path() / "a" / "report.json")));
  CHECK(report.rows.size() == 4);
  CHECK(report.rows[0].months == 15);
}

TEST_CASE("failure modes") {
  xs::testing::TempDir tmp("cli_fail");
  std::ostringstream out, err;

  SUBCASE("missing panel leaves no output directory") {
    json doc{{"panel", (tmp.path() / "nope.csv").string()}, {"models", {"NN3_1"}},
             {"output_dir", (tmp.path() / "run").string()}};
    put(tmp.path() / "c.json", doc.dump());
    CommandOptions o;
    o.config_path = (tmp.path() / "c.json").string();
    CHECK(cmd_run(o, out, err) == kExitConfigError);
    CHECK_FALSE(fs::exists(tmp.path() / "run"));
    CHECK(run_binary("run --config " + *o.config_path) == kExitConfigError);
    CHECK_FALSE(fs::exists(tmp.path() / "run"));
  }
  SUBCASE("report on an empty directory") {
    fs::create_directories(tmp.path() / "empty");
    CommandOptions o;
    o.target = (tmp.path() / "empty").string();
    CHECK(cmd_report(o, out, err) == kExitConfigError);
    CHECK(err.str().find("MissingRunArtifacts") != std::string::npos);
    CHECK(run_binary("report " + *o.target) == kExitConfigError);
  }
  SUBCASE("unwritable synth destination") {
    put(tmp.path() / "file", "x");
    CHECK(run_binary("synth --out " + (tmp.path() / "file" / "sub").string()) == kExitConfigError);
  }
  SUBCASE("a capped solver still succeeds") {
    auto doc = small_run(tmp.path() / "run");
    doc["models"] = {"RF_mf5_md3_n5", {{"type", "svr"}, {"C", 1.0}, {"gamma", 0.01}, {"epsilon", 0.1},
                                       {"max_iterations", 1}}};
    doc["eval_start"] = "2001-05";
    doc["eval_end"] = "2001-06";
    put(tmp.path() / "c.json", doc.dump());
    CommandOptions o;
    o.config_path = (tmp.path() / "c.json").string();
    const int code = cmd_run(o, out, err);
    // a capped solver is a diagnostic, not a failure
    CHECK(code == kExitOk);
  }
  SUBCASE("unknown subcommand") { CHECK(run_binary("frobnicate") != kExitOk); }
}

TEST_CASE("synth and validate commands") {
  xs::testing::TempDir tmp("cli_synth");
  put(tmp.path() / "s.json", json{{"n_stocks", 12}, {"n_months", 15}}.dump());
  REQUIRE(run_binary("synth --config " + (tmp.path() / "s.json").string() + " --seed 9 --out " +
                     (tmp.path() / "p").string()) == kExitOk);
  CHECK(fs::exists(tmp.path() / "p" / "panel.csv"));
  const auto echoed = json::parse(slurp(tmp.path() / "p" / "synth_config.json"));
  CHECK(echoed.at("seed") == 9);
  CHECK(run_binary("validate " + (tmp.path() / "p" / "panel.csv").string()) == kExitOk);
  std::ostringstream out, err;
  CommandOptions v;
  v.target = (tmp.path() / "p" / "panel.csv").string();
  CHECK(cmd_validate(v, out, err) == kExitOk);
  CHECK(out.str().find("180 records") != std::string::npos);
}
