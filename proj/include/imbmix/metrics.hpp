#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "imbmix/data.hpp"
#include "imbmix/matrix.hpp"

namespace imbmix {

/// True-class score minus the best competing score.
double example_margin(std::span<const double> logits_row, int label);

std::vector<double> example_margins(const Matrix& logits, std::span<const int> labels);

/// Mean example margin of each class. Throws empty-class if a class is absent.
std::vector<double> class_margins(const Matrix& logits, std::span<const int> labels, int num_classes);

/// Class j is a majority class iff n_j > total / K (training counts).
std::vector<bool> majority_split(const ClassHistogram& train_counts);

/// True when the split has no majority or no minority class.
bool is_degenerate_split(const std::vector<bool>& majority_mask);

/// Count-weighted mean margin of the majority group minus that of the minority
/// group. Lower means minorities enjoy relatively larger margins.
double margin_gap(std::span<const double> class_margin, const ClassHistogram& train_counts,
                  const std::vector<bool>& majority_mask);

/// Example margins pooled by group and sign. Parts with no examples are empty.
struct MarginDecomposition {
  std::optional<double> majority_negative;
  std::optional<double> majority_nonnegative;
  std::optional<double> minority_negative;
  std::optional<double> minority_nonnegative;
};

MarginDecomposition margin_decomposition(std::span<const double> margins, std::span<const int> labels,
                                         const std::vector<bool>& majority_mask);

/// t_j = C * n_j^(-1/4).
std::vector<double> theoretical_margins(const ClassHistogram& train_counts, double c = 1.0);

/// Least-squares scale a = <m, t> / <m, m> (no intercept) fitted so that
/// a * margins approximates the theoretical margins; returns sum (a m_j - t_j)^2.
/// All-zero margins give a = 0.
double l2_fit_error(std::span<const double> class_margin, const ClassHistogram& train_counts);

/// Pearson correlation of average ranks. Throws undefined-statistic for
/// constant inputs or fewer than three points.
double spearman_rho(std::span<const double> xs, std::span<const double> ys);

/// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> xs);

std::vector<double> per_class_accuracy(const Matrix& logits, std::span<const int> labels, int num_classes);

/// Unweighted mean of per-class accuracies. Warns on stderr if the evaluation
/// set is not balanced.
double balanced_accuracy(const Matrix& logits, std::span<const int> labels);

struct MarginReport {
  std::vector<double> per_class_margin;
  std::optional<double> margin_gap;  // empty for a degenerate split
  std::vector<bool> majority_mask;
  MarginDecomposition decomposition;
  double l2_fit_error = 0.0;
  double balanced_accuracy = 0.0;
  std::vector<double> per_class_accuracy;
};

/// Everything above for one evaluation set. Group membership and the gap
/// weights come from the training counts.
MarginReport margin_report(const Matrix& logits, std::span<const int> labels, const ClassHistogram& train_counts);

nlohmann::json report_to_json(const MarginReport& report);
MarginReport report_from_json(const nlohmann::json& doc);

}  // namespace imbmix
