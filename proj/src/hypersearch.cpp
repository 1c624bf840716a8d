#include "eegtl/hypersearch.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "eegtl/binary_io.hpp"

namespace eegtl {
namespace {

using nlohmann::json;

TrialPool subset(const TrialPool& pool, std::span<const std::size_t> idx) {
  TrialPool out;
  out.data = pool.data;
  out.data.data.clear();
  out.data.labels.clear();
  for (std::size_t i : idx) {
    auto trial = pool.data.trial(i);
    out.data.data.insert(out.data.data.end(), trial.begin(), trial.end());
    out.data.labels.push_back(pool.data.labels[i]);
    out.source.push_back(pool.source[i]);
  }
  return out;
}

void standardize_pool(TrialPool& pool, const ChannelStats& stats) { pool.data = standardize(pool.data, &stats).first; }

double fold_accuracy(const TrialPool& session, std::span<const std::size_t> train_idx,
                     std::span<const std::size_t> test_idx, const ArchitectureSpec& spec, const TrainingPlan& plan,
                     std::uint64_t fold_seed, const TrainHooks& hooks) {
  TrialPool train = subset(session, train_idx);
  TrialPool test = subset(session, test_idx);
  if (plan.standardize) {
    const EpochSet* sets[] = {&train.data};
    const ChannelStats stats = channel_stats(sets);
    standardize_pool(train, stats);
    standardize_pool(test, stats);
  }
  auto [fit, val] = split_validation(train, plan.validation_fraction);
  Rng init(derive_seed(fold_seed, "init"));
  BuiltModel model = build_model(spec, init);
  LoopOptions options{plan.epochs, plan.batch_size, plan.lr, plan.patience, derive_seed(fold_seed, "train"), "cv"};
  train_loop(model.net, model.params, fit, val, options, hooks);
  if (hooks.on_evaluate) hooks.on_evaluate("cv", test.source);
  return accuracy(argmax_rows(predict(model.net, model.params, test.data)), test.data.labels);
}

std::size_t channel_count(const Datasets& datasets, ChannelSet set) {
  return channel_subset(datasets.begin()->second.channel_names, set).size();
}

/// Index of the best candidate; `prefer(a, b)` says a wins a tie against b.
template <class Prefer>
std::size_t pick(const std::vector<CandidateResult>& results, Prefer prefer) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    const double a = results[i].median, b = results[best].median;
    if (a > b || (a == b && prefer(results[i].candidate, results[best].candidate))) best = i;
  }
  return best;
}

}  // namespace

std::string_view to_string(ChannelSet set) {
  switch (set) {
    case ChannelSet::all: return "all";
    case ChannelSet::no_eog: return "no_eog";
    case ChannelSet::five: return "five";
  }
  return "unknown";
}

ChannelSet parse_channel_set(std::string_view text) {
  if (text == "all") return ChannelSet::all;
  if (text == "no_eog") return ChannelSet::no_eog;
  if (text == "five") return ChannelSet::five;
  throw ValidationError("unknown channel set '" + std::string(text) + "' (expected all, no_eog or five)");
}

std::vector<std::string> channel_subset(const std::vector<std::string>& available, ChannelSet set) {
  switch (set) {
    case ChannelSet::all: return available;
    case ChannelSet::no_eog: {
      std::vector<std::string> out;
      std::copy_if(available.begin(), available.end(), std::back_inserter(out),
                   [](const std::string& n) { return !n.starts_with("EOG"); });
      if (out.empty()) throw ValidationError("channel set no_eog leaves no channels");
      return out;
    }
    case ChannelSet::five: return {"Fz", "C3", "Cz", "C4", "Pz"};
  }
  return available;
}

void SearchSpace::validate() const {
  if (dropout_grid.empty() || filter_options.empty() || channel_sets.empty()) {
    throw ValidationError("search space: every grid must be non-empty");
  }
  for (double d : dropout_grid) {
    if (!(d >= 0.0 && d < 1.0)) throw ValidationError("search space: dropout " + format_number(d) + " outside [0, 1)");
  }
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

std::map<int, double> cv_evaluate(const Datasets& datasets, const Candidate& candidate, std::size_t folds,
                                  const TrainingPlan& plan, const FilterSpec& filter, const TrainHooks& hooks) {
  if (folds < 2) throw ValidationError("cv: folds must be at least 2, got " + std::to_string(folds));
  check_compatible(datasets);
  std::map<int, double> result;
  for (int u : subjects(datasets)) {
    const SessionKey key{u, 1};
    auto it = datasets.find(key);
    if (it == datasets.end()) throw ValidationError("cv: missing " + to_string(key));
    EpochSet set = it->second;
    if (candidate.filter) set = highpass_filter(set, filter);
    set = select_channels(set, channel_subset(set.channel_names, candidate.channels));
    Datasets one{{key, std::move(set)}};
    const SessionKey keys[] = {key};
    const TrialPool session = make_pool(one, keys);

    // Round-robin fold assignment within each class keeps folds stratified.
    const std::size_t classes = session.data.n_classes();
    std::vector<std::size_t> seen(classes, 0), fold_of(session.size());
    for (std::size_t t = 0; t < session.size(); ++t) fold_of[t] = seen[session.data.labels[t]]++ % folds;
    for (std::size_t k = 0; k < classes; ++k) {
      if (seen[k] < folds) {
        throw ValidationError("cv: class " + std::to_string(k) + " of " + to_string(key) + " has " +
                              std::to_string(seen[k]) + " trials, fewer than " + std::to_string(folds) + " folds");
      }
    }
    ArchitectureOverrides arch = plan.architecture;
    arch.dropout_rate = candidate.dropout;
    const ArchitectureSpec spec = resolve_architecture(session.data, arch);
    double total = 0.0;
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<std::size_t> train_idx, test_idx;
      for (std::size_t t = 0; t < session.size(); ++t) (fold_of[t] == f ? test_idx : train_idx).push_back(t);
      const auto fold_seed = derive_seed(plan.seed, "cv", static_cast<std::uint64_t>(u) * folds + f);
      total += fold_accuracy(session, train_idx, test_idx, spec, plan, fold_seed, hooks);
    }
    result[u] = total / static_cast<double>(folds);
  }
  return result;
}

SearchResult sequential_search(const Datasets& datasets, const SearchSpace& space, std::size_t folds,
                               const TrainingPlan& plan, const TrainHooks& hooks) {
  space.validate();
  SearchResult result;
  result.folds = folds;
  std::vector<CandidateResult> cache;

  auto run_stage = [&](const std::string& name, const std::vector<Candidate>& candidates, auto prefer) {
    StageResult stage{name, {}, 0};
    for (const Candidate& c : candidates) {
      auto hit = std::find_if(cache.begin(), cache.end(), [&](const CandidateResult& r) { return r.candidate == c; });
      if (hit != cache.end()) {
        stage.candidates.push_back(*hit);
        continue;
      }
      CandidateResult r{c, cv_evaluate(datasets, c, folds, plan, space.filter, hooks), 0.0};
      std::vector<double> accs;
      for (const auto& [u, acc] : r.subject_accuracy) accs.push_back(acc);
      r.median = median(accs);
      spdlog::info("search {}: dropout {} filter {} channels {} -> median {:.4f}", name, c.dropout,
                   c.filter ? "on" : "off", to_string(c.channels), r.median);
      cache.push_back(r);
      stage.candidates.push_back(std::move(r));
    }
    stage.chosen = pick(stage.candidates, prefer);
    result.chosen = stage.candidates[stage.chosen].candidate;
    result.stages.push_back(std::move(stage));
  };

  std::vector<Candidate> stage1;
  for (double d : space.dropout_grid) stage1.push_back({d, false, ChannelSet::all});
  run_stage("dropout", stage1, [](const Candidate& a, const Candidate& b) { return a.dropout < b.dropout; });

  std::vector<Candidate> stage2;
  for (bool f : space.filter_options) stage2.push_back({result.chosen.dropout, f, ChannelSet::all});
  run_stage("filter", stage2, [](const Candidate& a, const Candidate& b) { return !a.filter && b.filter; });

  std::vector<Candidate> stage3;
  for (ChannelSet s : space.channel_sets) stage3.push_back({result.chosen.dropout, result.chosen.filter, s});
  run_stage("channels", stage3, [&](const Candidate& a, const Candidate& b) {
    return channel_count(datasets, a.channels) > channel_count(datasets, b.channels);
  });
  return result;
}

json search_to_json(const SearchResult& r) {
  auto candidate_json = [](const Candidate& c) {
    return json{{"dropout", c.dropout}, {"filter", c.filter}, {"channels", to_string(c.channels)}};
  };
  json stages = json::array();
  for (const auto& stage : r.stages) {
    json cands = json::array();
    for (const auto& c : stage.candidates) {
      json per_subject = json::object();
      for (const auto& [u, acc] : c.subject_accuracy) per_subject[std::to_string(u)] = acc;
      cands.push_back({{"candidate", candidate_json(c.candidate)}, {"median", c.median}, {"subjects", per_subject}});
    }
    stages.push_back({{"stage", stage.name}, {"chosen", candidate_json(stage.candidates[stage.chosen].candidate)},
                      {"candidates", cands}});
  }
  std::size_t evaluated = 0;
  for (const auto& s : r.stages) evaluated += s.candidates.size();
  return json{{"chosen", candidate_json(r.chosen)},
              {"criterion", "median"},
              {"folds", r.folds},
              {"stage_order", {"dropout", "filter", "channels"}},
              {"candidates_evaluated", evaluated},
              {"stages", stages}};
}

void write_search(const SearchResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  std::vector<int> ids;
  if (!r.stages.empty() && !r.stages.front().candidates.empty()) {
    for (const auto& [u, acc] : r.stages.front().candidates.front().subject_accuracy) ids.push_back(u);
  }
  csv << "stage,dropout,filter,channels";
  for (int u : ids) csv << ",subject" << u;
  csv << ",median,chosen\n";
  for (const auto& stage : r.stages) {
    for (std::size_t i = 0; i < stage.candidates.size(); ++i) {
      const auto& c = stage.candidates[i];
      csv << stage.name << ',' << format_number(c.candidate.dropout) << ',' << (c.candidate.filter ? "on" : "off")
          << ',' << to_string(c.candidate.channels);
      for (int u : ids) csv << ',' << format_number(c.subject_accuracy.at(u));
      csv << ',' << format_number(c.median) << ',' << (i == stage.chosen ? 1 : 0) << '\n';
    }
  }
  io::write_text(dir / "search_table.csv", csv.str());
  io::write_json(dir / "search_result.json", search_to_json(r));
}

}  // namespace eegtl
