#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "eegtl/format.hpp"
#include "eegtl/tensor.hpp"

namespace eegtl {

/// `paper`: pe is the share of the most frequent true class.
/// `cohen`: pe is the expected agreement of the two marginals.
enum class KappaMode { paper, cohen };
std::string_view to_string(KappaMode mode);
KappaMode parse_kappa_mode(std::string_view text);

double accuracy(std::span<const int> pred, std::span<const int> truth);

/// Proportion of the most frequent class in `truth`.
double chance_proportion(std::span<const int> truth, std::size_t n_classes);
/// Sum over classes of the product of predicted and true class shares.
double cohen_chance(std::span<const int> pred, std::span<const int> truth, std::size_t n_classes);

/// (p0 - pe) / (1 - pe) with pe from `chance_proportion`. Throws when pe == 1.
double kappa(double p0, std::span<const int> truth, std::size_t n_classes);
double kappa_cohen(std::span<const int> pred, std::span<const int> truth, std::size_t n_classes);

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t n_classes = 0;
  std::vector<std::size_t> counts;

  std::size_t at(std::size_t truth, std::size_t pred) const { return counts[truth * n_classes + pred]; }
  std::size_t total() const;
  std::size_t trace() const;
  /// Each row as percentages of its true-class count (zero rows stay zero).
  std::vector<double> row_percent() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion_matrix(std::span<const int> pred, std::span<const int> truth, std::size_t n_classes);

struct PrPoint {
  double threshold;
  double precision;
  double recall;
};

/// One-vs-rest sweep over the distinct scores of class `k`, highest first,
/// starting from (precision 1, recall 0). `scores` is [N, K] of softmax rows.
std::vector<PrPoint> precision_recall_curve(const Tensor& scores, std::span<const int> truth, std::size_t k);

/// Row-wise argmax.
std::vector<int> argmax_rows(const Tensor& scores);

struct EvaluationReport {
  std::size_t n_test = 0;
  double accuracy = 0.0;
  double kappa = 0.0;
  double chance = 0.0;
  KappaMode kappa_mode = KappaMode::paper;
  ConfusionMatrix confusion;
  /// Empty optional for a class missing from the test labels.
  std::vector<std::optional<std::vector<PrPoint>>> pr_curves;
  std::vector<std::string> class_names;
};

EvaluationReport evaluate(const Tensor& probabilities, std::span<const int> truth,
                          const std::vector<std::string>& class_names, KappaMode mode = KappaMode::paper);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation split
  double lr = 0.0;
  std::string phase;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};
using History = std::vector<EpochRecord>;

nlohmann::json report_to_json(const EvaluationReport& report);

/// Writes report.json, confusion.csv and pr_class<k>.csv into `dir`.
void write_report(const EvaluationReport& report, const std::filesystem::path& dir,
                  const nlohmann::json& extra = nlohmann::json::object());
void write_history(const History& history, const std::filesystem::path& path);

}  // namespace eegtl
