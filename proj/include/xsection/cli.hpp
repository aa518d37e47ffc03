#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "xsection/pipeline.hpp"
#include "xsection/synth.hpp"

namespace xs {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPatternFailed = 1;
inline constexpr int kExitConfigError = 2;

struct RunConfig {
  std::optional<std::string> panel_path;  // exactly one of panel_path / synth
  std::optional<SynthConfig> synth;
  std::optional<MonthId> eval_start;      // defaults: earliest feasible month
  std::optional<MonthId> eval_end;        // defaults: one month past the panel end
  int train_window = 120;
  int retrain_every = 1;
  mlp::TrainConfig mlp_train;             // applies to every network pattern without its own settings
  std::vector<ModelSpec> models;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string output_dir = "run";
};

// Validates `doc` against the RunConfig schema. Errors are InvalidConfig with
// a JSON pointer to the offending value, e.g. "/models/2/gamma: expected a number".
RunConfig parse_run_config(const nlohmann::json& doc);

SynthConfig parse_synth_config(const nlohmann::json& doc, const std::string& pointer = "");
nlohmann::json synth_config_json(const SynthConfig& config);

// Model pattern entries: a preset name, "table3", "svr_grid", "rf_grid",
// "ensemble:[a,b,...]", "RF_mf<k>_md<d>", "SVR_C<c>_g<g>_e<e>", or an object.
std::vector<ModelSpec> expand_model_entry(const nlohmann::json& entry, const mlp::TrainConfig& train,
                                          const std::string& pointer);

// Every default made explicit; eval range filled in once the panel is known.
nlohmann::json resolved_config_json(const RunConfig& config);
nlohmann::json model_json(const ModelSpec& spec);

// Loads or generates the panel and fills in the eval range defaults.
FactorPanel materialize_panel(RunConfig& config);
std::vector<WalkForwardConfig> walk_forward_configs(const RunConfig& config);

// File-system safe variant of a pattern name.
std::string file_stem(const std::string& name);

struct CommandOptions {
  std::optional<std::string> config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> target;  // positional argument (run dir or panel path)
};

int cmd_synth(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_run(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_report(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_validate(const CommandOptions& options, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace xs
