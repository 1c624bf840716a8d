#include "eegtl/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "eegtl/binary_io.hpp"

namespace eegtl::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& ctx) {
  if (!obj.is_object()) throw ValidationError("config: " + ctx + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      throw ValidationError("config: unknown key '" + key + "' in " + ctx);
    }
  }
}

template <class T>
void read_opt(const json& obj, const char* key, T& into, const std::string& ctx) {
  if (!obj.contains(key)) return;
  try {
    into = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("config: " + ctx + "." + key + " has the wrong type (" + e.what() + ")");
  }
}

template <class T>
void read_opt(const json& obj, const char* key, std::optional<T>& into, const std::string& ctx) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  T value{};
  read_opt(obj, key, value, ctx);
  into = value;
}

json synth_to_json(const SynthConfig& s) {
  return json{{"n_subjects", s.n_subjects}, {"n_trials", s.n_trials},       {"n_channels", s.n_channels},
              {"n_samples", s.n_samples},   {"n_classes", s.n_classes},     {"sample_rate_hz", s.sample_rate_hz},
              {"difficulty", s.difficulty}, {"seed", s.seed},               {"class_channels", s.class_channels},
              {"channel_names", s.channel_names}};
}

SynthConfig synth_from_json(const json& doc, std::uint64_t default_seed) {
  check_keys(doc,
             {"n_subjects", "n_trials", "n_channels", "n_samples", "n_classes", "sample_rate_hz", "difficulty", "seed",
              "class_channels", "channel_names"},
             "data.synth");
  SynthConfig s;
  s.seed = default_seed;
  const std::string ctx = "data.synth";
  read_opt(doc, "n_subjects", s.n_subjects, ctx);
  read_opt(doc, "n_trials", s.n_trials, ctx);
  read_opt(doc, "n_channels", s.n_channels, ctx);
  read_opt(doc, "n_samples", s.n_samples, ctx);
  read_opt(doc, "n_classes", s.n_classes, ctx);
  read_opt(doc, "sample_rate_hz", s.sample_rate_hz, ctx);
  read_opt(doc, "difficulty", s.difficulty, ctx);
  read_opt(doc, "seed", s.seed, ctx);
  read_opt(doc, "class_channels", s.class_channels, ctx);
  read_opt(doc, "channel_names", s.channel_names, ctx);
  return s;
}

json architecture_overrides_to_json(const ArchitectureOverrides& a) {
  json out = json::object();
  auto put = [&](const char* key, const auto& v) {
    if (v) out[key] = *v;
  };
  put("temporal_filters", a.temporal_filters);
  put("depth_multiplier", a.depth_multiplier);
  put("separable_filters", a.separable_filters);
  put("temporal_kernel_len", a.temporal_kernel_len);
  put("separable_kernel_len", a.separable_kernel_len);
  put("pool1", a.pool1);
  put("pool2", a.pool2);
  put("dropout_rate", a.dropout_rate);
  return out;
}

ArchitectureOverrides architecture_overrides_from_json(const json& doc) {
  check_keys(doc,
             {"temporal_filters", "depth_multiplier", "separable_filters", "temporal_kernel_len",
              "separable_kernel_len", "pool1", "pool2", "dropout_rate"},
             "architecture");
  ArchitectureOverrides a;
  const std::string ctx = "architecture";
  read_opt(doc, "temporal_filters", a.temporal_filters, ctx);
  read_opt(doc, "depth_multiplier", a.depth_multiplier, ctx);
  read_opt(doc, "separable_filters", a.separable_filters, ctx);
  read_opt(doc, "temporal_kernel_len", a.temporal_kernel_len, ctx);
  read_opt(doc, "separable_kernel_len", a.separable_kernel_len, ctx);
  read_opt(doc, "pool1", a.pool1, ctx);
  read_opt(doc, "pool2", a.pool2, ctx);
  read_opt(doc, "dropout_rate", a.dropout_rate, ctx);
  return a;
}

json plan_to_json(const TrainingPlan& p) {
  json out{{"strategy", to_string(p.strategy)},
           {"freeze_depth", to_string(p.freeze_depth)},
           {"epochs", p.epochs},
           {"retrain_epochs", p.phase2_epochs()},
           {"batch_size", p.batch_size},
           {"lr", p.lr},
           {"retrain_lr", p.phase2_lr()},
           {"patience", p.patience},
           {"validation_fraction", p.validation_fraction},
           {"standardize", p.standardize},
           {"pretrained", p.pretrained ? json(p.pretrained->string()) : json(nullptr)}};
  return out;
}

TrainingPlan plan_from_json(const json& doc) {
  check_keys(doc,
             {"strategy", "freeze_depth", "epochs", "retrain_epochs", "batch_size", "lr", "retrain_lr", "patience",
              "validation_fraction", "standardize", "pretrained"},
             "plan");
  TrainingPlan p;
  const std::string ctx = "plan";
  std::string text;
  if (doc.contains("strategy")) read_opt(doc, "strategy", text, ctx), p.strategy = parse_strategy(text);
  if (doc.contains("freeze_depth")) read_opt(doc, "freeze_depth", text, ctx), p.freeze_depth = parse_freeze_depth(text);
  read_opt(doc, "epochs", p.epochs, ctx);
  read_opt(doc, "retrain_epochs", p.retrain_epochs, ctx);
  read_opt(doc, "batch_size", p.batch_size, ctx);
  read_opt(doc, "lr", p.lr, ctx);
  read_opt(doc, "retrain_lr", p.retrain_lr, ctx);
  read_opt(doc, "patience", p.patience, ctx);
  read_opt(doc, "validation_fraction", p.validation_fraction, ctx);
  read_opt(doc, "standardize", p.standardize, ctx);
  std::optional<std::string> pretrained;
  read_opt(doc, "pretrained", pretrained, ctx);
  if (pretrained) p.pretrained = *pretrained;
  return p;
}

std::string now_utc() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

/// Keeps run_manifest.json in step with the run: written up front, finalized at the end.
class RunManifest {
 public:
  RunManifest(std::string command, const ExperimentConfig& config)
      : dir_(config.out), start_(std::chrono::steady_clock::now()) {
    fs::create_directories(dir_);
    doc_ = json{{"command", std::move(command)},
                {"status", "running"},
                {"started_at", now_utc()},
                {"config", config.to_json()},
                {"versions", {{"eegtl", kVersion}, {"checkpoint_format", kCheckpointFormatVersion}, {"epoch_format", 1}}},
                {"artifacts", json::array()},
                {"timings_s", json::object()}};
    flush();
  }

  template <class F>
  auto stage(const std::string& name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        record_time(name, t0);
      } else {
        auto result = body();
        record_time(name, t0);
        return result;
      }
    } catch (const StageError& e) {
      fail(e.what());
      throw;
    } catch (const ValidationError& e) {
      fail("stage '" + name + "': " + e.what());
      throw;
    } catch (const std::exception& e) {
      fail("stage '" + name + "': " + e.what());
      throw StageError(name, e.what());
    }
  }

  void artifact(const fs::path& path) {
    doc_["artifacts"].push_back(fs::relative(path, dir_).generic_string());
  }

  void succeed() {
    doc_["status"] = "succeeded";
    doc_["finished_at"] = now_utc();
    doc_["timings_s"]["total"] = elapsed(start_);
    flush();
  }

 private:
  static double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  void record_time(const std::string& name, std::chrono::steady_clock::time_point t0) {
    doc_["timings_s"][name] = elapsed(t0);
    flush();
  }
  void fail(const std::string& message) {
    doc_["status"] = "failed";
    doc_["error"] = message;
    doc_["finished_at"] = now_utc();
    flush();
  }
  void flush() { io::write_json(dir_ / "run_manifest.json", doc_); }

  fs::path dir_;
  std::chrono::steady_clock::time_point start_;
  json doc_;
};

std::string subject_dir(int subject) { return "subject" + std::to_string(subject); }

json keys_json(const std::vector<SessionKey>& keys) {
  json out = json::array();
  for (const auto& k : keys) out.push_back({k.subject, k.session});
  return out;
}

/// Per-subject reports, histories and checkpoints plus the aggregate report.json.
void write_results(const std::map<int, TrainResult>& results, const ExperimentConfig& config, RunManifest& manifest) {
  const fs::path& out = config.out;
  const bool shared = config.plan.strategy == Strategy::distributed;
  json subjects = json::object();
  double acc_sum = 0.0, kappa_sum = 0.0;
  std::size_t n_classes = 0;
  for (const auto& [u, r] : results) {
    const fs::path dir = out / subject_dir(u);
    json extra{{"subject", u},
               {"strategy", to_string(config.plan.strategy)},
               {"test", keys_json(r.split.test.size() == 1 ? r.split.test : std::vector<SessionKey>{r.test_key})},
               {"train", keys_json(r.split.train)},
               {"retrain", keys_json(r.split.retrain)},
               {"epochs_run", r.history.size()}};
    write_report(r.report, dir, extra);
    write_history(r.history, dir / "history.csv");
    manifest.artifact(dir / "report.json");
    manifest.artifact(dir / "confusion.csv");
    for (std::size_t k = 0; k < r.report.pr_curves.size(); ++k) {
      if (r.report.pr_curves[k]) manifest.artifact(dir / ("pr_class" + std::to_string(k) + ".csv"));
    }
    manifest.artifact(dir / "history.csv");
    const fs::path ckpt_dir = shared ? out / "checkpoint" : dir / "checkpoint";
    if (!shared || !fs::exists(ckpt_dir / "manifest.json")) {
      save_checkpoint(r.checkpoint, ckpt_dir);
      manifest.artifact(ckpt_dir / "manifest.json");
    }
    subjects[std::to_string(u)] = {{"accuracy", r.report.accuracy},
                                   {"kappa", r.report.kappa},
                                   {"n_test", r.report.n_test},
                                   {"report", fs::path(subject_dir(u)) / "report.json"},
                                   {"checkpoint", fs::relative(ckpt_dir, out).generic_string()}};
    acc_sum += r.report.accuracy;
    kappa_sum += r.report.kappa;
    n_classes = r.report.class_names.size();
  }
  const double n = static_cast<double>(results.size());
  json doc{{"strategy", to_string(config.plan.strategy)},
           {"freeze_depth", to_string(config.plan.freeze_depth)},
           {"kappa_mode", to_string(config.plan.kappa_mode)},
           {"seed", config.seed},
           {"n_classes", n_classes},
           {"subjects", subjects},
           {"mean_accuracy", acc_sum / n},
           {"mean_kappa", kappa_sum / n}};
  io::write_json(out / "report.json", doc);
  manifest.artifact(out / "report.json");
}

}  // namespace

void configure_logging() {
  if (const char* level = std::getenv("EEGTL_LOG_LEVEL")) {
    const auto parsed = spdlog::level::from_str(level);
    if (parsed == spdlog::level::off && std::string_view(level) != "off") {
      spdlog::warn("EEGTL_LOG_LEVEL '{}' not recognised; keeping {}", level,
                   spdlog::level::to_string_view(spdlog::get_level()));
      return;
    }
    spdlog::set_level(parsed);
  }
}

void ExperimentConfig::validate(bool needs_data) const {
  if (needs_data) {
    if (data_path.has_value() == synth.has_value()) {
      throw ValidationError("config: data needs exactly one of 'path' or 'synth'");
    }
    if (data_path && !fs::is_directory(*data_path)) {
      throw ValidationError("config: data.path " + data_path->string() + " does not exist");
    }
    if (synth) synth->validate();
  }
  if (plan.pretrained && !fs::exists(*plan.pretrained / "manifest.json")) {
    throw ValidationError("config: plan.pretrained " + plan.pretrained->string() + " is not a checkpoint directory");
  }
  for (const auto& run : report_runs) {
    if (!fs::exists(run / "report.json")) throw ValidationError("config: report run " + run.string() + " has no report.json");
  }
  plan.validate();
  search.validate();
  if (folds < 2) throw ValidationError("config: hypersearch.folds must be at least 2");
}

json ExperimentConfig::to_json() const {
  json data = json::object();
  if (data_path) data["path"] = data_path->string();
  if (synth) data["synth"] = synth_to_json(*synth);
  json search_doc{{"folds", folds}, {"dropout_grid", search.dropout_grid}, {"filter_options", search.filter_options}};
  json sets = json::array();
  for (auto s : search.channel_sets) sets.push_back(std::string(to_string(s)));
  search_doc["channel_sets"] = sets;
  json runs = json::array();
  for (const auto& r : report_runs) runs.push_back(r.string());
  return json{{"seed", seed},
              {"out", out.string()},
              {"data", data},
              {"channels", channels},
              {"filter", filter ? json{{"cutoff_hz", filter->cutoff_hz}, {"order", filter->order}} : json(nullptr)},
              {"search_filter", {{"cutoff_hz", search.filter.cutoff_hz}, {"order", search.filter.order}}},
              {"plan", plan_to_json(plan)},
              {"architecture", architecture_overrides_to_json(plan.architecture)},
              {"kappa", to_string(plan.kappa_mode)},
              {"hypersearch", search_doc},
              {"report", {{"runs", runs}}}};
}

ExperimentConfig ExperimentConfig::from_json(const json& doc, const fs::path&) {
  check_keys(doc,
             {"seed", "out", "data", "channels", "filter", "search_filter", "plan", "architecture", "kappa",
              "hypersearch", "report"},
             "config");
  ExperimentConfig c;
  read_opt(doc, "seed", c.seed, "config");
  std::string out;
  read_opt(doc, "out", out, "config");
  if (!out.empty()) c.out = out;
  if (doc.contains("data")) {
    const json& data = doc.at("data");
    check_keys(data, {"path", "synth"}, "data");
    if (data.contains("path") && !data.at("path").is_null()) c.data_path = data.at("path").get<std::string>();
    if (data.contains("synth") && !data.at("synth").is_null()) c.synth = synth_from_json(data.at("synth"), c.seed);
  }
  read_opt(doc, "channels", c.channels, "config");
  if (doc.contains("filter") && !doc.at("filter").is_null()) {
    const json& f = doc.at("filter");
    check_keys(f, {"cutoff_hz", "order", "enabled"}, "filter");
    bool enabled = true;
    read_opt(f, "enabled", enabled, "filter");
    if (enabled) {
      FilterSpec spec;
      read_opt(f, "cutoff_hz", spec.cutoff_hz, "filter");
      read_opt(f, "order", spec.order, "filter");
      c.filter = spec;
    }
  }
  if (doc.contains("search_filter")) {
    const json& f = doc.at("search_filter");
    check_keys(f, {"cutoff_hz", "order"}, "search_filter");
    read_opt(f, "cutoff_hz", c.search.filter.cutoff_hz, "search_filter");
    read_opt(f, "order", c.search.filter.order, "search_filter");
  }
  if (doc.contains("plan")) c.plan = plan_from_json(doc.at("plan"));
  if (doc.contains("architecture")) c.plan.architecture = architecture_overrides_from_json(doc.at("architecture"));
  std::string kappa;
  read_opt(doc, "kappa", kappa, "config");
  if (!kappa.empty()) c.plan.kappa_mode = parse_kappa_mode(kappa);
  if (doc.contains("hypersearch")) {
    const json& h = doc.at("hypersearch");
    check_keys(h, {"folds", "dropout_grid", "filter_options", "channel_sets"}, "hypersearch");
    read_opt(h, "folds", c.folds, "hypersearch");
    read_opt(h, "dropout_grid", c.search.dropout_grid, "hypersearch");
    read_opt(h, "filter_options", c.search.filter_options, "hypersearch");
    if (h.contains("channel_sets")) {
      c.search.channel_sets.clear();
      for (const auto& s : h.at("channel_sets")) c.search.channel_sets.push_back(parse_channel_set(s.get<std::string>()));
    }
  }
  if (doc.contains("report")) {
    const json& r = doc.at("report");
    check_keys(r, {"runs"}, "report");
    std::vector<std::string> runs;
    read_opt(r, "runs", runs, "report");
    for (const auto& run : runs) c.report_runs.emplace_back(run);
  }
  c.plan.seed = c.seed;
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  json doc;
  try {
    doc = io::read_json(path);
  } catch (const FormatError& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return ExperimentConfig::from_json(doc);
}

void apply_overrides(ExperimentConfig& config, const Overrides& o) {
  if (const char* env = std::getenv("EEGTL_OUT"); env && *env) config.out = env;
  if (o.out) config.out = *o.out;
  if (o.seed) {
    if (config.synth && config.synth->seed == config.seed) config.synth->seed = *o.seed;
    config.seed = *o.seed;
    config.plan.seed = *o.seed;
  }
  if (o.strategy) config.plan.strategy = parse_strategy(*o.strategy);
  if (o.freeze_depth) config.plan.freeze_depth = parse_freeze_depth(*o.freeze_depth);
  if (o.kappa) config.plan.kappa_mode = parse_kappa_mode(*o.kappa);
}

Datasets prepare_data(const ExperimentConfig& config) {
  Datasets sets;
  if (config.data_path) {
    sets = load_datasets(*config.data_path);
  } else {
    sets = synth_generate(*config.synth);
  }
  for (auto& [key, set] : sets) {
    if (config.filter) set = highpass_filter(set, *config.filter);
    if (!config.channels.empty()) set = select_channels(set, config.channels);
  }
  return sets;
}

namespace {

std::string dataset_id(const ExperimentConfig& config) {
  if (config.data_path) return config.data_path->string();
  const SynthConfig& s = *config.synth;
  std::ostringstream id;
  id << "synth:seed=" << s.seed << ",subjects=" << s.n_subjects << ",trials=" << s.n_trials
     << ",channels=" << s.n_channels << ",classes=" << s.n_classes << ",difficulty=" << format_number(s.difficulty);
  return id.str();
}

}  // namespace

void cmd_synth(const ExperimentConfig& config) {
  if (!config.synth) throw ValidationError("synth: config needs a data.synth section");
  config.synth->validate();
  RunManifest manifest("synth", config);
  const Datasets sets = manifest.stage("synth", [&] { return synth_generate(*config.synth); });
  manifest.stage("write", [&] {
    for (const auto& [key, set] : sets) {
      save_epochset(set, config.out / epoch_dir_name(key));
      manifest.artifact(config.out / epoch_dir_name(key) / "manifest.json");
    }
  });
  manifest.succeed();
  spdlog::info("wrote {} epoch directories to {}", sets.size(), config.out.string());
}

void cmd_train(const ExperimentConfig& config) {
  config.validate();
  if (config.plan.strategy == Strategy::transfer_standard || config.plan.strategy == Strategy::transfer_split) {
    throw ValidationError("train: strategy " + std::string(to_string(config.plan.strategy)) + " runs via 'transfer'");
  }
  RunManifest manifest("train", config);
  const Datasets sets = manifest.stage("prepare data", [&] { return prepare_data(config); });
  TrainingPlan plan = config.plan;
  plan.dataset_id = dataset_id(config);
  const auto results = manifest.stage("train", [&] { return run_all_subjects(sets, plan); });
  manifest.stage("write outputs", [&] { write_results(results, config, manifest); });
  manifest.succeed();
}

void cmd_transfer(const ExperimentConfig& config) {
  if (config.plan.strategy != Strategy::transfer_standard && config.plan.strategy != Strategy::transfer_split) {
    throw ValidationError("transfer: strategy must be transfer_standard or transfer_split, got " +
                          std::string(to_string(config.plan.strategy)));
  }
  config.validate();
  RunManifest manifest("transfer", config);
  const ModelCheckpoint source = manifest.stage("load checkpoint", [&] { return load_checkpoint(*config.plan.pretrained); });
  const Datasets sets = manifest.stage("prepare data", [&] { return prepare_data(config); });
  TrainingPlan plan = config.plan;
  plan.dataset_id = dataset_id(config);
  const auto results = manifest.stage("transfer", [&] { return run_all_subjects(sets, plan, &source); });
  manifest.stage("write outputs", [&] { write_results(results, config, manifest); });
  manifest.succeed();
}

void cmd_hypersearch(const ExperimentConfig& config) {
  config.validate();
  RunManifest manifest("hypersearch", config);
  ExperimentConfig raw = config;
  if (raw.filter || !raw.channels.empty()) {
    spdlog::warn("hypersearch chooses filtering and channels itself; ignoring the filter and channels settings");
    raw.filter.reset();
    raw.channels.clear();
  }
  const Datasets sets = manifest.stage("prepare data", [&] { return prepare_data(raw); });
  manifest.stage("check channel sets", [&] {
    const auto& available = sets.begin()->second.channel_names;
    for (ChannelSet set : config.search.channel_sets) {
      std::vector<std::string> missing;
      for (const auto& name : channel_subset(available, set)) {
        if (std::find(available.begin(), available.end(), name) == available.end()) missing.push_back(name);
      }
      if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw ValidationError("hypersearch: channel set '" + std::string(to_string(set)) + "' needs " + list +
                              ", which the data does not have; drop it from hypersearch.channel_sets");
      }
    }
  });
  const SearchResult result =
      manifest.stage("search", [&] { return sequential_search(sets, config.search, config.folds, config.plan); });
  manifest.stage("write outputs", [&] { write_search(result, config.out); });
  manifest.artifact(config.out / "search_table.csv");
  manifest.artifact(config.out / "search_result.json");
  manifest.succeed();
}

void cmd_report(const std::vector<fs::path>& runs, const fs::path& out) {
  if (runs.empty()) throw ValidationError("report: at least one run directory is required");
  struct Row {
    std::string run, strategy;
    int subject;
    std::size_t n_classes;
    double accuracy, kappa;
  };
  std::vector<Row> rows;
  std::set<std::size_t> class_counts;
  for (const auto& run : runs) {
    const json doc = io::read_json(run / "report.json");
    const std::string ctx = "report " + run.string();
    const auto strategy = io::require<std::string>(doc, "strategy", ctx.c_str());
    const auto n_classes = io::require<std::size_t>(doc, "n_classes", ctx.c_str());
    class_counts.insert(n_classes);
    const json subjects = io::require<json>(doc, "subjects", ctx.c_str());
    for (const auto& [subject, entry] : subjects.items()) {
      rows.push_back({run.filename().string(), strategy, std::stoi(subject), n_classes,
                      io::require<double>(entry, "accuracy", ctx.c_str()), io::require<double>(entry, "kappa", ctx.c_str())});
    }
  }
  const bool per_run = class_counts.size() > 1;
  if (per_run) spdlog::warn("runs disagree on the class count; grouping per run instead of per strategy");
  auto group_of = [&](const Row& r) { return per_run ? r.strategy + "@" + r.run : r.strategy; };

  fs::create_directories(out);
  std::ostringstream summary;
  summary << "run,strategy,group,subject,n_classes,accuracy,kappa\n";
  for (const auto& r : rows) {
    summary << r.run << ',' << r.strategy << ',' << group_of(r) << ',' << r.subject << ',' << r.n_classes << ','
            << format_number(r.accuracy) << ',' << format_number(r.kappa) << '\n';
  }
  io::write_text(out / "summary.csv", summary.str());

  std::vector<std::string> groups;
  std::set<int> subject_ids;
  std::map<std::string, std::map<int, double>> by_group;
  std::map<std::string, std::pair<double, double>> sums;
  std::map<std::string, std::size_t> counts;
  for (const auto& r : rows) {
    const std::string g = group_of(r);
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    subject_ids.insert(r.subject);
    by_group[g][r.subject] = r.accuracy;
    sums[g].first += r.accuracy;
    sums[g].second += r.kappa;
    ++counts[g];
  }
  std::ostringstream means;
  means << "group,n_subjects,mean_accuracy,mean_kappa\n";
  for (const auto& g : groups) {
    const double n = static_cast<double>(counts[g]);
    means << g << ',' << counts[g] << ',' << format_number(sums[g].first / n) << ',' << format_number(sums[g].second / n)
          << '\n';
  }
  io::write_text(out / "strategy_means.csv", means.str());

  std::ostringstream bars;
  bars << "subject";
  for (const auto& g : groups) bars << ',' << g;
  bars << '\n';
  for (int u : subject_ids) {
    bars << u;
    for (const auto& g : groups) {
      auto it = by_group[g].find(u);
      bars << ',' << (it == by_group[g].end() ? std::string() : format_number(it->second));
    }
    bars << '\n';
  }
  io::write_text(out / "grouped_bar.csv", bars.str());
}

}  // namespace eegtl::cli
