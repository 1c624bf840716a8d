#include "eegtl/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "eegtl/binary_io.hpp"
#include "eegtl/error.hpp"

namespace eegtl {
namespace {

using nlohmann::json;

void check_labels(std::span<const int> labels, std::size_t n_classes, const char* what) {
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes) {
      throw ValidationError(std::string(what) + " label " + std::to_string(l) + " outside [0, " +
                            std::to_string(n_classes) + ")");
    }
  }
}

void check_pair(std::span<const int> pred, std::span<const int> truth) {
  if (truth.empty()) throw ValidationError("metrics: no samples");
  if (pred.size() != truth.size()) {
    throw ValidationError("metrics: " + std::to_string(pred.size()) + " predictions for " +
                          std::to_string(truth.size()) + " labels");
  }
}

std::vector<double> class_shares(std::span<const int> labels, std::size_t n_classes) {
  std::vector<double> shares(n_classes, 0.0);
  for (int l : labels) shares[static_cast<std::size_t>(l)] += 1.0;
  for (double& s : shares) s /= static_cast<double>(labels.size());
  return shares;
}

double chance_corrected(double p0, double pe) {
  if (pe >= 1.0) throw ValidationError("kappa: undefined because the chance proportion is 1");
  return (p0 - pe) / (1.0 - pe);
}

}  // namespace

std::string_view to_string(KappaMode mode) { return mode == KappaMode::paper ? "paper" : "cohen"; }

KappaMode parse_kappa_mode(std::string_view text) {
  if (text == "paper") return KappaMode::paper;
  if (text == "cohen") return KappaMode::cohen;
  throw ValidationError("unknown kappa mode '" + std::string(text) + "' (expected paper or cohen)");
}

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  check_pair(pred, truth);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double chance_proportion(std::span<const int> truth, std::size_t n_classes) {
  if (truth.empty()) throw ValidationError("metrics: no samples");
  check_labels(truth, n_classes, "truth");
  std::vector<std::size_t> counts(n_classes, 0);
  for (int l : truth) ++counts[static_cast<std::size_t>(l)];
  return static_cast<double>(*std::max_element(counts.begin(), counts.end())) / static_cast<double>(truth.size());
}

double cohen_chance(std::span<const int> pred, std::span<const int> truth, std::size_t n_classes) {
  check_pair(pred, truth);
  check_labels(truth, n_classes, "truth");
  check_labels(pred, n_classes, "prediction");
  const auto p = class_shares(pred, n_classes), t = class_shares(truth, n_classes);
  return std::inner_product(p.begin(), p.end(), t.begin(), 0.0);
}

double kappa(double p0, std::span<const int> truth, std::size_t n_classes) {
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw ValidationError("kappa: p0 must lie in [0, 1]");
  return chance_corrected(p0, chance_proportion(truth, n_classes));
}

double kappa_cohen(std::span<const int> pred, std::span<const int> truth, std::size_t n_classes) {
  return chance_corrected(accuracy(pred, truth), cohen_chance(pred, truth, n_classes));
}

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t i = 0; i < n_classes; ++i) t += at(i, i);
  return t;
}

std::vector<double> ConfusionMatrix::row_percent() const {
  std::vector<double> out(counts.size(), 0.0);
  for (std::size_t i = 0; i < n_classes; ++i) {
    std::size_t row = 0;
    for (std::size_t j = 0; j < n_classes; ++j) row += at(i, j);
    if (row == 0) continue;
    for (std::size_t j = 0; j < n_classes; ++j) {
      out[i * n_classes + j] = 100.0 * static_cast<double>(at(i, j)) / static_cast<double>(row);
    }
  }
  return out;
}

ConfusionMatrix confusion_matrix(std::span<const int> pred, std::span<const int> truth, std::size_t n_classes) {
  check_pair(pred, truth);
  check_labels(truth, n_classes, "truth");
  check_labels(pred, n_classes, "prediction");
  ConfusionMatrix m{n_classes, std::vector<std::size_t>(n_classes * n_classes, 0)};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++m.counts[static_cast<std::size_t>(truth[i]) * n_classes + static_cast<std::size_t>(pred[i])];
  }
  return m;
}

std::vector<int> argmax_rows(const Tensor& scores) {
  if (scores.rank() != 2) throw ShapeError("argmax_rows: expected [N, K] scores, got " + shape_to_string(scores.shape()));
  const std::size_t n = scores.dim(0), k = scores.dim(1);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = scores.data().data() + i * k;
    out[i] = static_cast<int>(std::max_element(row, row + k) - row);
  }
  return out;
}

std::vector<PrPoint> precision_recall_curve(const Tensor& scores, std::span<const int> truth, std::size_t k) {
  if (scores.rank() != 2 || scores.dim(0) != truth.size()) {
    throw ShapeError("precision_recall_curve: scores " + shape_to_string(scores.shape()) + " do not match " +
                     std::to_string(truth.size()) + " labels");
  }
  const std::size_t n = scores.dim(0), classes = scores.dim(1);
  if (k >= classes) throw ValidationError("precision_recall_curve: class " + std::to_string(k) + " out of range");
  check_labels(truth, classes, "truth");
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0;
    for (std::size_t j = 0; j < classes; ++j) row += scores[i * classes + j];
    if (std::abs(row - 1.0) > 1e-4) {
      throw ValidationError("precision_recall_curve: score row " + std::to_string(i) + " sums to " +
                            std::to_string(row) + ", not 1");
    }
  }
  const auto positives = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), static_cast<int>(k)));
  if (positives == 0) {
    throw ValidationError("precision_recall_curve: class " + std::to_string(k) + " is absent from the labels");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a * classes + k] > scores[b * classes + k]; });

  std::vector<PrPoint> curve{{std::numeric_limits<double>::infinity(), 1.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    const float threshold = scores[order[i] * classes + k];
    // Everything scoring at least `threshold` is predicted positive.
    for (; i < n && scores[order[i] * classes + k] == threshold; ++i) {
      (truth[order[i]] == static_cast<int>(k) ? tp : fp) += 1;
    }
    PrPoint p{threshold, static_cast<double>(tp) / static_cast<double>(tp + fp),
              static_cast<double>(tp) / static_cast<double>(positives)};
    if (p.precision != curve.back().precision || p.recall != curve.back().recall) curve.push_back(p);
  }
  return curve;
}

EvaluationReport evaluate(const Tensor& probabilities, std::span<const int> truth,
                          const std::vector<std::string>& class_names, KappaMode mode) {
  const std::size_t classes = class_names.size();
  if (probabilities.rank() != 2 || probabilities.dim(1) != classes) {
    throw ShapeError("evaluate: scores " + shape_to_string(probabilities.shape()) + " do not match " +
                     std::to_string(classes) + " classes");
  }
  const auto pred = argmax_rows(probabilities);
  EvaluationReport r;
  r.n_test = truth.size();
  r.accuracy = accuracy(pred, truth);
  r.kappa_mode = mode;
  r.chance = mode == KappaMode::paper ? chance_proportion(truth, classes) : cohen_chance(pred, truth, classes);
  r.kappa = chance_corrected(r.accuracy, r.chance);
  r.confusion = confusion_matrix(pred, truth, classes);
  r.class_names = class_names;
  for (std::size_t k = 0; k < classes; ++k) {
    if (std::find(truth.begin(), truth.end(), static_cast<int>(k)) == truth.end()) {
      spdlog::warn("class {} ({}) is absent from the test labels; no precision-recall curve", k, class_names[k]);
      r.pr_curves.emplace_back(std::nullopt);
    } else {
      r.pr_curves.emplace_back(precision_recall_curve(probabilities, truth, k));
    }
  }
  return r;
}

json report_to_json(const EvaluationReport& r) {
  json pr = json::array();
  for (std::size_t k = 0; k < r.pr_curves.size(); ++k) {
    if (r.pr_curves[k]) pr.push_back({{"class", k}, {"file", "pr_class" + std::to_string(k) + ".csv"},
                                      {"points", r.pr_curves[k]->size()}});
  }
  return json{{"n_test", r.n_test},
              {"accuracy", r.accuracy},
              {"kappa", r.kappa},
              {"kappa_mode", to_string(r.kappa_mode)},
              {"chance", r.chance},
              {"class_names", r.class_names},
              {"confusion", {{"counts", r.confusion.counts}, {"row_percent", r.confusion.row_percent()}}},
              {"pr_curves", pr}};
}

void write_report(const EvaluationReport& r, const std::filesystem::path& dir, const json& extra) {
  std::filesystem::create_directories(dir);
  json doc = report_to_json(r);
  doc.update(extra);
  io::write_json(dir / "report.json", doc);

  std::ostringstream cm;
  cm << "true\\pred";
  for (const auto& name : r.class_names) cm << ',' << name;
  for (const auto& name : r.class_names) cm << ',' << name << "_pct";
  cm << '\n';
  const auto pct = r.confusion.row_percent();
  for (std::size_t i = 0; i < r.confusion.n_classes; ++i) {
    cm << r.class_names[i];
    for (std::size_t j = 0; j < r.confusion.n_classes; ++j) cm << ',' << r.confusion.at(i, j);
    for (std::size_t j = 0; j < r.confusion.n_classes; ++j) cm << ',' << format_number(pct[i * r.confusion.n_classes + j]);
    cm << '\n';
  }
  io::write_text(dir / "confusion.csv", cm.str());

  for (std::size_t k = 0; k < r.pr_curves.size(); ++k) {
    if (!r.pr_curves[k]) continue;
    std::ostringstream pr;
    pr << "threshold,precision,recall\n";
    for (const auto& p : *r.pr_curves[k]) {
      pr << format_number(p.threshold) << ',' << format_number(p.precision) << ',' << format_number(p.recall) << '\n';
    }
    io::write_text(dir / ("pr_class" + std::to_string(k) + ".csv"), pr.str());
  }
}

void write_history(const History& history, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "epoch,phase,train_loss,val_loss,lr\n";
  for (const auto& e : history) {
    out << e.epoch << ',' << e.phase << ',' << format_number(e.train_loss) << ',' << format_number(e.val_loss)
        << ',' << format_number(e.lr) << '\n';
  }
  io::write_text(path, out.str());
}

}  // namespace eegtl
