#include "xsection/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <regex>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "xsection/error.hpp"
#include "xsection/report.hpp"
#include "xsection/text_io.hpp"

namespace xs {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string escape_pointer_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

std::string child(const std::string& pointer, const std::string& key) {
  return pointer + "/" + escape_pointer_token(key);
}

std::string child(const std::string& pointer, std::size_t index) { return pointer + "/" + std::to_string(index); }

[[noreturn]] void fail(const std::string& pointer, const std::string& message) {
  throw Error(ErrorKind::InvalidConfig, (pointer.empty() ? std::string("/") : pointer) + ": " + message);
}

// Typed, pointer-aware access to one JSON object with a closed key set.
class Fields {
 public:
  Fields(const json& j, std::string pointer, std::initializer_list<const char*> allowed)
      : j_(j), pointer_(std::move(pointer)) {
    if (!j.is_object()) fail(pointer_, "expected an object");
    std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items()) {
      if (!keys.count(k)) fail(child(pointer_, k), "unknown key");
    }
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& at(const char* key) const { return j_.at(key); }
  std::string ptr(const char* key) const { return child(pointer_, key); }

  int get_int(const char* key, int fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) fail(ptr(key), "expected an integer");
    const auto x = v.get<std::int64_t>();
    if (x < INT32_MIN || x > INT32_MAX) fail(ptr(key), "integer out of range");
    return static_cast<int>(x);
  }

  std::int64_t get_i64(const char* key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_number_integer()) fail(ptr(key), "expected an integer");
    return j_.at(key).get<std::int64_t>();
  }

  std::uint64_t get_u64(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    fail(ptr(key), "expected a non-negative integer");
  }

  double get_double(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_number()) fail(ptr(key), "expected a number");
    return j_.at(key).get<double>();
  }

  bool get_bool(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) fail(ptr(key), "expected a boolean");
    return j_.at(key).get<bool>();
  }

  std::optional<std::string> get_string(const char* key) const {
    if (!has(key)) return std::nullopt;
    if (!j_.at(key).is_string()) fail(ptr(key), "expected a string");
    return j_.at(key).get<std::string>();
  }

  std::optional<MonthId> get_month(const char* key) const {
    auto s = get_string(key);
    if (!s) return std::nullopt;
    try {
      return MonthId::parse(*s);
    } catch (const Error&) {
      fail(ptr(key), "expected a month formatted YYYY-MM");
    }
  }

 private:
  const json& j_;
  std::string pointer_;
};

// Re-raises validate() failures of a parsed block at its pointer.
template <typename Fn>
void validate_at(const std::string& pointer, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    fail(pointer, e.what());
  }
}

mlp::TrainConfig parse_train(const json& j, const std::string& pointer, mlp::TrainConfig base) {
  Fields f(j, pointer, {"epochs", "learning_rate", "beta1", "beta2", "epsilon"});
  base.epochs = f.get_int("epochs", base.epochs);
  base.learning_rate = f.get_double("learning_rate", base.learning_rate);
  base.beta1 = f.get_double("beta1", base.beta1);
  base.beta2 = f.get_double("beta2", base.beta2);
  base.epsilon = f.get_double("epsilon", base.epsilon);
  validate_at(pointer, [&] { base.validate(); });
  return base;
}

json train_json(const mlp::TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"learning_rate", t.learning_rate},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"epsilon", t.epsilon}};
}

std::optional<ModelSpec> model_from_name(const std::string& name, const mlp::TrainConfig& train) {
  for (const auto& a : mlp::table3_presets()) {
    if (a.name == name) return mlp_model(name, train);
  }
  static const std::regex rf_re(R"(RF_mf(\d+)_md(\d+)(?:_n(\d+))?)");
  static const std::regex svr_re(R"(SVR_C([^_]+)_g([^_]+)_e([^_]+))");
  std::smatch m;
  if (std::regex_match(name, m, rf_re)) {
    forest::ForestHyper h;
    h.max_features = std::stoi(m[1]);
    h.max_depth = std::stoi(m[2]);
    if (m[3].matched) h.n_estimators = std::stoi(m[3]);
    h.validate(static_cast<int>(kFeatureDim));
    return forest_model(h);
  }
  if (std::regex_match(name, m, svr_re)) {
    auto c = parse_double(m[1].str());
    auto g = parse_double(m[2].str());
    auto e = parse_double(m[3].str());
    if (!c || !g || !e) return std::nullopt;
    svr::SvrHyper h;
    h.C = *c;
    h.gamma = *g;
    h.epsilon = *e;
    h.validate();
    return svr_model(h);
  }
  return std::nullopt;
}

std::string ensemble_name(const std::vector<ModelSpec>& members) {
  std::string name = "Ensemble[";
  for (std::size_t i = 0; i < members.size(); ++i) name += (i ? "+" : "") + members[i].name;
  return name + "]";
}

std::vector<ModelSpec> expand_string(const std::string& s, const mlp::TrainConfig& train, const std::string& pointer) {
  std::vector<ModelSpec> out;
  if (s == "table3") {
    for (const auto& a : mlp::table3_presets()) out.push_back(mlp_model(a.name, train));
    return out;
  }
  if (s == "svr_grid") {
    for (const auto& h : svr::svr_grid()) out.push_back(svr_model(h));
    return out;
  }
  if (s == "rf_grid") {
    for (const auto& h : forest::rf_grid()) out.push_back(forest_model(h));
    return out;
  }
  if (s.rfind("ensemble:", 0) == 0) {
    std::string list = s.substr(9);
    if (list.size() < 2 || list.front() != '[' || list.back() != ']') {
      fail(pointer, "expected ensemble:[name,name,...]");
    }
    list = list.substr(1, list.size() - 2);
    std::vector<ModelSpec> members;
    for (auto token : split_fields(list, ',')) {
      std::string name(token);
      name.erase(0, name.find_first_not_of(' '));
      name.erase(name.find_last_not_of(' ') + 1);
      std::optional<ModelSpec> spec;
      validate_at(pointer, [&] { spec = model_from_name(name, train); });
      if (!spec) fail(pointer, "unknown ensemble member '" + name + "'");
      members.push_back(std::move(*spec));
    }
    if (members.size() < 2) fail(pointer, "an ensemble needs at least 2 members");
    auto name = ensemble_name(members);
    out.push_back(ensemble_model(name, std::move(members)));
    return out;
  }
  std::optional<ModelSpec> spec;
  validate_at(pointer, [&] { spec = model_from_name(s, train); });
  if (!spec) fail(pointer, "unknown model pattern '" + s + "'");
  out.push_back(std::move(*spec));
  return out;
}

std::vector<ModelSpec> expand_object(const json& j, const mlp::TrainConfig& train, const std::string& pointer) {
  if (!j.contains("type") || !j.at("type").is_string()) fail(child(pointer, "type"), "expected mlp, rf, svr or ensemble");
  const auto type = j.at("type").get<std::string>();
  if (type == "mlp") {
    Fields f(j, pointer, {"type", "name", "preset", "train"});
    auto preset = f.get_string("preset");
    if (!preset) fail(f.ptr("preset"), "required");
    bool known = false;
    for (const auto& a : mlp::table3_presets()) known = known || a.name == *preset;
    if (!known) fail(f.ptr("preset"), "unknown preset '" + *preset + "'");
    auto t = f.has("train") ? parse_train(f.at("train"), f.ptr("train"), train) : train;
    auto spec = mlp_model(*preset, t);
    if (auto n = f.get_string("name")) spec.name = *n;
    return {spec};
  }
  if (type == "rf") {
    Fields f(j, pointer, {"type", "name", "n_estimators", "max_features", "max_depth"});
    forest::ForestHyper h;
    h.n_estimators = f.get_int("n_estimators", h.n_estimators);
    h.max_features = f.get_int("max_features", h.max_features);
    h.max_depth = f.get_int("max_depth", h.max_depth);
    validate_at(pointer, [&] { h.validate(static_cast<int>(kFeatureDim)); });
    auto spec = forest_model(h);
    if (auto n = f.get_string("name")) spec.name = *n;
    return {spec};
  }
  if (type == "svr") {
    Fields f(j, pointer, {"type", "name", "C", "gamma", "epsilon", "tolerance", "max_iterations", "cache_mb"});
    svr::SvrHyper h;
    h.C = f.get_double("C", h.C);
    h.gamma = f.get_double("gamma", h.gamma);
    h.epsilon = f.get_double("epsilon", h.epsilon);
    h.tolerance = f.get_double("tolerance", h.tolerance);
    h.max_iterations = f.get_i64("max_iterations", h.max_iterations);
    h.cache_bytes = static_cast<std::size_t>(f.get_u64("cache_mb", h.cache_bytes >> 20)) << 20;
    validate_at(pointer, [&] { h.validate(); });
    auto spec = svr_model(h);
    if (auto n = f.get_string("name")) spec.name = *n;
    return {spec};
  }
  if (type == "ensemble") {
    Fields f(j, pointer, {"type", "name", "members", "rank_average"});
    if (!f.has("members") || !f.at("members").is_array()) fail(f.ptr("members"), "expected an array");
    std::vector<ModelSpec> members;
    const auto& arr = f.at("members");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      for (auto& m : expand_model_entry(arr[i], train, child(f.ptr("members"), i))) members.push_back(std::move(m));
    }
    if (members.size() < 2) fail(f.ptr("members"), "an ensemble needs at least 2 members");
    auto name = f.get_string("name").value_or(ensemble_name(members));
    auto spec = ensemble_model(name, std::move(members));
    std::get<EnsembleSpec>(spec.kind).rank_average = f.get_bool("rank_average", false);
    return {spec};
  }
  fail(child(pointer, "type"), "expected mlp, rf, svr or ensemble");
}

std::string now_json(const json& j) { return j.dump(2) + "\n"; }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, dir + ": " + ec.message());
}

json load_json_file(const std::string& path) {
  const auto text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, path + ": " + e.what());
  }
}

}  // namespace

std::vector<ModelSpec> expand_model_entry(const json& entry, const mlp::TrainConfig& train,
                                          const std::string& pointer) {
  if (entry.is_string()) return expand_string(entry.get<std::string>(), train, pointer);
  if (entry.is_object()) return expand_object(entry, train, pointer);
  fail(pointer, "expected a model name or object");
}

SynthConfig parse_synth_config(const json& doc, const std::string& pointer) {
  Fields f(doc, pointer,
           {"n_stocks", "n_months", "start", "signal_strength", "signal_factor", "signal_sigma", "noise_sigma",
            "factor_rho", "missing_rate", "seed"});
  SynthConfig c;
  c.n_stocks = f.get_int("n_stocks", c.n_stocks);
  c.n_months = f.get_int("n_months", c.n_months);
  c.start = f.get_month("start").value_or(c.start);
  c.signal_strength = f.get_double("signal_strength", c.signal_strength);
  c.signal_factor = f.get_int("signal_factor", c.signal_factor);
  c.signal_sigma = f.get_double("signal_sigma", c.signal_sigma);
  c.noise_sigma = f.get_double("noise_sigma", c.noise_sigma);
  c.factor_rho = f.get_double("factor_rho", c.factor_rho);
  c.missing_rate = f.get_double("missing_rate", c.missing_rate);
  c.seed = f.get_u64("seed", c.seed);
  validate_at(pointer, [&] { c.validate(); });
  return c;
}

json synth_config_json(const SynthConfig& c) {
  return {{"n_stocks", c.n_stocks},         {"n_months", c.n_months},
          {"start", c.start.to_string()},   {"signal_strength", c.signal_strength},
          {"signal_factor", c.signal_factor}, {"signal_sigma", c.signal_sigma},
          {"noise_sigma", c.noise_sigma},   {"factor_rho", c.factor_rho},
          {"missing_rate", c.missing_rate}, {"seed", c.seed}};
}

RunConfig parse_run_config(const json& doc) {
  Fields f(doc, "",
           {"panel", "synth", "eval_start", "eval_end", "train_window", "retrain_every", "mlp", "models", "seed",
            "threads", "output_dir"});
  RunConfig c;
  c.panel_path = f.get_string("panel");
  if (f.has("synth")) c.synth = parse_synth_config(f.at("synth"), "/synth");
  if (c.panel_path.has_value() == c.synth.has_value()) fail("/panel", "exactly one of panel and synth is required");
  c.eval_start = f.get_month("eval_start");
  c.eval_end = f.get_month("eval_end");
  if (c.eval_start && c.eval_end && *c.eval_end < *c.eval_start) fail("/eval_end", "precedes eval_start");
  c.train_window = f.get_int("train_window", c.train_window);
  if (c.train_window < 1) fail("/train_window", "must be >= 1");
  c.retrain_every = f.get_int("retrain_every", c.retrain_every);
  if (c.retrain_every < 1) fail("/retrain_every", "must be >= 1");
  if (f.has("mlp")) c.mlp_train = parse_train(f.at("mlp"), "/mlp", c.mlp_train);
  c.seed = f.get_u64("seed", c.seed);
  c.threads = f.get_int("threads", c.threads);
  if (c.threads < 1) fail("/threads", "must be >= 1");
  c.output_dir = f.get_string("output_dir").value_or(c.output_dir);

  if (!f.has("models") || !f.at("models").is_array()) fail("/models", "expected an array");
  std::set<std::string> names;
  const auto& models = f.at("models");
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (auto& spec : expand_model_entry(models[i], c.mlp_train, child("/models", i))) {
      if (!names.insert(spec.name).second) fail(child("/models", i), "duplicate pattern '" + spec.name + "'");
      c.models.push_back(std::move(spec));
    }
  }
  return c;
}

json model_json(const ModelSpec& spec) {
  if (const auto* m = std::get_if<MlpModelSpec>(&spec.kind)) {
    return {{"type", "mlp"}, {"name", spec.name}, {"preset", m->arch.name}, {"train", train_json(m->train)}};
  }
  if (const auto* h = std::get_if<forest::ForestHyper>(&spec.kind)) {
    return {{"type", "rf"},
            {"name", spec.name},
            {"n_estimators", h->n_estimators},
            {"max_features", h->max_features},
            {"max_depth", h->max_depth}};
  }
  if (const auto* h = std::get_if<svr::SvrHyper>(&spec.kind)) {
    return {{"type", "svr"},         {"name", spec.name},
            {"C", h->C},             {"gamma", h->gamma},
            {"epsilon", h->epsilon}, {"tolerance", h->tolerance},
            {"max_iterations", h->max_iterations}, {"cache_mb", h->cache_bytes >> 20}};
  }
  const auto& e = std::get<EnsembleSpec>(spec.kind);
  json members = json::array();
  for (const auto& m : e.members) members.push_back(model_json(m));
  return {{"type", "ensemble"}, {"name", spec.name}, {"members", members}, {"rank_average", e.rank_average}};
}

json resolved_config_json(const RunConfig& c) {
  json doc;
  if (c.panel_path) doc["panel"] = *c.panel_path;
  if (c.synth) doc["synth"] = synth_config_json(*c.synth);
  if (c.eval_start) doc["eval_start"] = c.eval_start->to_string();
  if (c.eval_end) doc["eval_end"] = c.eval_end->to_string();
  doc["train_window"] = c.train_window;
  doc["retrain_every"] = c.retrain_every;
  doc["mlp"] = train_json(c.mlp_train);
  json models = json::array();
  for (const auto& m : c.models) models.push_back(model_json(m));
  doc["models"] = models;
  doc["seed"] = c.seed;
  doc["threads"] = c.threads;
  doc["output_dir"] = c.output_dir;
  return doc;
}

FactorPanel materialize_panel(RunConfig& c) {
  FactorPanel panel = c.panel_path ? load_panel(*c.panel_path) : generate_panel(*c.synth);
  // the earliest month whose first fit has N months plus the lag history
  if (!c.eval_start) c.eval_start = panel.first_month().plus_months(c.train_window + kMaxLag + 1);
  if (!c.eval_end) c.eval_end = panel.last_month().plus_months(1);
  if (*c.eval_end < *c.eval_start) {
    fail("/eval_start", "evaluation range " + c.eval_start->to_string() + ".." + c.eval_end->to_string() +
                            " is empty for this panel and train_window");
  }
  return panel;
}

std::vector<WalkForwardConfig> walk_forward_configs(const RunConfig& c) {
  std::vector<WalkForwardConfig> out;
  for (const auto& m : c.models) {
    WalkForwardConfig w;
    w.train_window = c.train_window;
    w.retrain_every = c.retrain_every;
    w.eval_start = c.eval_start.value();
    w.eval_end = c.eval_end.value();
    w.model = m;
    w.master_seed = c.seed;
    // with several patterns the parallelism goes across configs instead
    w.threads = c.models.size() == 1 ? c.threads : 1;
    out.push_back(std::move(w));
  }
  return out;
}

std::string file_stem(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == '+';
    out += keep ? c : '_';
  }
  return out;
}

namespace {

RunConfig load_run_config(const CommandOptions& o) {
  if (!o.config_path) throw Error(ErrorKind::InvalidConfig, "--config is required");
  auto c = parse_run_config(load_json_file(*o.config_path));
  if (o.seed) c.seed = *o.seed;
  if (o.threads) {
    if (*o.threads < 1) throw Error(ErrorKind::InvalidConfig, "--threads must be >= 1");
    c.threads = *o.threads;
  }
  if (o.out_dir) c.output_dir = *o.out_dir;
  return c;
}

std::string fits_csv(const std::vector<ExperimentResult>& results) {
  std::ostringstream out;
  out << "pattern,member,fit_month,examples,train_mse,solver_cap_hit\n";
  for (const auto& r : results) {
    if (!r.ok()) continue;
    for (const auto& f : r.report->fits) {
      out << r.name << ',' << f.member << ',' << f.fit_month.to_string() << ',' << f.examples << ','
          << format_double(f.train_mse) << ',' << (f.solver_cap_hit ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

}  // namespace

int cmd_synth(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    SynthConfig config;
    if (o.config_path) {
      const auto doc = load_json_file(*o.config_path);
      config = doc.is_object() && doc.contains("synth") ? parse_synth_config(doc.at("synth"), "/synth")
                                                        : parse_synth_config(doc);
    }
    if (o.seed) config.seed = *o.seed;
    const auto panel = generate_panel(config);
    const std::string dir = o.out_dir.value_or(".");
    ensure_dir(dir);
    const auto path = (fs::path(dir) / "panel.csv").string();
    save_panel(panel, path);
    write_file((fs::path(dir) / "synth_config.json").string(), now_json(synth_config_json(config)));
    out << "wrote " << path << " (" << panel.records().size() << " rows)\n";
    return kExitOk;
  });
}

int cmd_run(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto config = load_run_config(o);
    const auto panel = materialize_panel(config);
    const auto configs = walk_forward_configs(config);
    out << "running " << configs.size() << " pattern(s) over " << config.eval_start->to_string() << ".."
        << config.eval_end->to_string() << " with N=" << config.train_window << '\n';
    const auto results = run_experiment(panel, configs, config.threads);
    const auto report = make_report(results);

    const fs::path dir(config.output_dir);
    ensure_dir(dir.string());
    write_file((dir / "resolved_config.json").string(), now_json(resolved_config_json(config)));
    write_file((dir / "report.json").string(), now_json(report_to_json(report)));
    write_file((dir / "report.csv").string(), report_csv(report));
    write_file((dir / "fits.csv").string(), fits_csv(results));
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (!results[i].ok()) continue;
      const auto stem = file_stem(results[i].name);
      write_file((dir / ("scores_" + stem + ".csv")).string(), scores_csv(results[i].report->scores));
      write_file((dir / ("monthly_" + stem + ".csv")).string(), monthly_csv(report.rows[i]));
    }
    out << render_table(report);
    bool failed = false;
    for (const auto& r : results) {
      if (!r.ok()) {
        err << "pattern " << r.name << " failed: " << r.error << '\n';
        failed = true;
      }
    }
    return failed ? kExitPatternFailed : kExitOk;
  });
}

int cmd_report(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!o.target) throw Error(ErrorKind::InvalidConfig, "report needs a run directory");
    const fs::path run(*o.target);
    const auto path = run / "report.json";
    if (!fs::is_regular_file(path)) throw Error(ErrorKind::MissingRunArtifacts, path.string() + " not found");
    const auto report = report_from_json(load_json_file(path.string()));
    const fs::path dest = o.out_dir ? fs::path(*o.out_dir) : run;
    ensure_dir(dest.string());
    const auto table = render_table(report);
    write_file((dest / "table.txt").string(), table);
    write_file((dest / "cumulative_ls.csv").string(), cumulative_ls_csv(report));
    out << table;
    return kExitOk;
  });
}

int cmd_validate(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    FactorPanel panel;
    if (o.config_path) {
      auto config = load_run_config(o);
      panel = materialize_panel(config);
      for (const auto& w : walk_forward_configs(config)) w.validate();
      if (!config.models.empty()) {
        auto w = walk_forward_configs(config).front();
        if (w.history_start() < panel.first_month() || w.eval_end.minus_months(1) > panel.last_month()) {
          throw Error(ErrorKind::InsufficientHistory,
                      "evaluation " + w.eval_start.to_string() + ".." + w.eval_end.to_string() +
                          " needs panel months " + w.history_start().to_string() + ".." +
                          w.eval_end.minus_months(1).to_string());
        }
      }
      out << now_json(resolved_config_json(config));
    } else if (o.target) {
      panel = load_panel(*o.target);
    } else {
      throw Error(ErrorKind::InvalidConfig, "validate needs --config or a panel path");
    }
    const auto v = validate_panel(panel);
    out << "panel " << panel.first_month().to_string() << ".." << panel.last_month().to_string() << ", "
        << panel.records().size() << " records\n";
    for (const auto& w : v.warnings) out << "warning: " << w << '\n';
    out << (v.clean() ? "ok\n" : "ok with warnings\n");
    return kExitOk;
  });
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Cross-sectional stock return prediction backtester"};
  app.require_subcommand(1);
  CommandOptions o;
  std::string config, out_dir, target;
  std::uint64_t seed = 0;
  int threads = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON config file");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "master seed override");
    sub->add_option("--threads", threads, "worker threads");
  };
  auto* synth = app.add_subcommand("synth", "generate a synthetic factor panel");
  auto* run = app.add_subcommand("run", "walk-forward backtest of the configured patterns");
  auto* report = app.add_subcommand("report", "render a completed run");
  auto* validate = app.add_subcommand("validate", "check a config or a panel CSV");
  for (auto* sub : {synth, run, report, validate}) add_common(sub);
  report->add_option("run_dir", target, "run directory");
  validate->add_option("panel", target, "panel CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  auto* sub = app.get_subcommands().front();
  if (!config.empty()) o.config_path = config;
  if (!out_dir.empty()) o.out_dir = out_dir;
  if (sub->count("--seed")) o.seed = seed;
  if (sub->count("--threads")) o.threads = threads;
  if (!target.empty()) o.target = target;

  if (sub == synth) return cmd_synth(o, std::cout, std::cerr);
  if (sub == run) return cmd_run(o, std::cout, std::cerr);
  if (sub == report) return cmd_report(o, std::cout, std::cerr);
  return cmd_validate(o, std::cout, std::cerr);
}

}  // namespace xs
