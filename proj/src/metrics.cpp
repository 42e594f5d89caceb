#include "imbmix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <string>

#include "imbmix/error.hpp"
#include "imbmix/kernels.hpp"

namespace imbmix {

double example_margin(std::span<const double> logits_row, int label) {
  if (logits_row.size() < 2) throw Error(ErrorKind::invalid_argument, "a margin needs at least two classes");
  if (label < 0 || static_cast<std::size_t>(label) >= logits_row.size()) {
    throw Error(ErrorKind::invalid_argument, "label out of range");
  }
  double best_other = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < logits_row.size(); ++j) {
    if (j != static_cast<std::size_t>(label)) best_other = std::max(best_other, logits_row[j]);
  }
  return logits_row[static_cast<std::size_t>(label)] - best_other;
}

std::vector<double> example_margins(const Matrix& logits, std::span<const int> labels) {
  std::vector<double> out(logits.rows());
  kernels::parallel::example_margins(logits, labels, out);
  return out;
}

namespace {

std::vector<std::size_t> class_sizes(std::span<const int> labels, int num_classes) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw Error(ErrorKind::invalid_argument, "label out of range");
    ++sizes[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (sizes[c] == 0) throw Error(ErrorKind::empty_class, "class " + std::to_string(c) + " has no examples");
  }
  return sizes;
}

}  // namespace

std::vector<double> class_margins(const Matrix& logits, std::span<const int> labels, int num_classes) {
  if (logits.cols() != static_cast<std::size_t>(num_classes)) {
    throw Error(ErrorKind::shape_mismatch, "logit columns do not match the class count");
  }
  const auto sizes = class_sizes(labels, num_classes);
  const auto margins = example_margins(logits, labels);
  std::vector<double> sums(sizes.size(), 0.0);
  for (std::size_t i = 0; i < margins.size(); ++i) sums[static_cast<std::size_t>(labels[i])] += margins[i];
  for (std::size_t c = 0; c < sums.size(); ++c) sums[c] /= static_cast<double>(sizes[c]);
  return sums;
}

std::vector<bool> majority_split(const ClassHistogram& train_counts) {
  const std::size_t total = train_counts.total();
  const std::size_t k = train_counts.num_classes();
  std::vector<bool> mask(k);
  // n_j > total / K, compared in integers.
  for (std::size_t j = 0; j < k; ++j) mask[j] = train_counts.counts[j] * k > total;
  return mask;
}

bool is_degenerate_split(const std::vector<bool>& majority_mask) {
  const auto majors = std::count(majority_mask.begin(), majority_mask.end(), true);
  return majors == 0 || majors == static_cast<std::ptrdiff_t>(majority_mask.size());
}

double margin_gap(std::span<const double> class_margin, const ClassHistogram& train_counts,
                  const std::vector<bool>& majority_mask) {
  const std::size_t k = class_margin.size();
  if (train_counts.num_classes() != k || majority_mask.size() != k) {
    throw Error(ErrorKind::shape_mismatch, "margin, count and mask lengths differ");
  }
  if (is_degenerate_split(majority_mask)) {
    throw Error(ErrorKind::degenerate_split, "the margin gap needs at least one majority and one minority class");
  }
  double major_sum = 0.0, major_n = 0.0, minor_sum = 0.0, minor_n = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const auto n = static_cast<double>(train_counts.counts[j]);
    if (majority_mask[j]) {
      major_sum += n * class_margin[j];
      major_n += n;
    } else {
      minor_sum += n * class_margin[j];
      minor_n += n;
    }
  }
  return major_sum / major_n - minor_sum / minor_n;
}

MarginDecomposition margin_decomposition(std::span<const double> margins, std::span<const int> labels,
                                         const std::vector<bool>& majority_mask) {
  if (margins.size() != labels.size()) throw Error(ErrorKind::shape_mismatch, "margins and labels differ in length");
  // [group][sign]: group 0 majority, 1 minority; sign 0 negative, 1 nonnegative.
  double sum[2][2] = {};
  std::size_t count[2][2] = {};
  for (std::size_t i = 0; i < margins.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    if (y >= majority_mask.size()) throw Error(ErrorKind::invalid_argument, "label out of range");
    const int group = majority_mask[y] ? 0 : 1;
    const int sign = margins[i] < 0.0 ? 0 : 1;
    sum[group][sign] += margins[i];
    ++count[group][sign];
  }
  auto mean = [&](int g, int s) -> std::optional<double> {
    if (count[g][s] == 0) return std::nullopt;
    return sum[g][s] / static_cast<double>(count[g][s]);
  };
  return MarginDecomposition{mean(0, 0), mean(0, 1), mean(1, 0), mean(1, 1)};
}

std::vector<double> theoretical_margins(const ClassHistogram& train_counts, double c) {
  std::vector<double> t(train_counts.num_classes());
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (train_counts.counts[j] == 0) throw Error(ErrorKind::empty_class, "class count must be >= 1");
    t[j] = c * std::pow(static_cast<double>(train_counts.counts[j]), -0.25);
  }
  return t;
}

double l2_fit_error(std::span<const double> class_margin, const ClassHistogram& train_counts) {
  if (class_margin.size() != train_counts.num_classes()) {
    throw Error(ErrorKind::shape_mismatch, "margin and count lengths differ");
  }
  const auto t = theoretical_margins(train_counts);
  double mt = 0.0, mm = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    mt += class_margin[j] * t[j];
    mm += class_margin[j] * class_margin[j];
  }
  const double a = mm > 0.0 ? mt / mm : 0.0;
  double err = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    const double r = a * class_margin[j] - t[j];
    err += r * r;
  }
  return err;
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorKind::shape_mismatch, "spearman inputs differ in length");
  if (xs.size() < 3) throw Error(ErrorKind::undefined_statistic, "spearman needs at least three points");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const auto n = static_cast<double>(rx.size());
  const double mean = (n + 1.0) / 2.0;  // average ranks always have this mean
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::undefined_statistic, "spearman of a constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> per_class_accuracy(const Matrix& logits, std::span<const int> labels, int num_classes) {
  if (logits.rows() != labels.size()) throw Error(ErrorKind::shape_mismatch, "label count does not match logit rows");
  if (logits.cols() != static_cast<std::size_t>(num_classes)) {
    throw Error(ErrorKind::shape_mismatch, "logit columns do not match the class count");
  }
  const auto sizes = class_sizes(labels, num_classes);
  std::vector<double> correct(sizes.size(), 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (static_cast<int>(argmax(logits.row(i))) == labels[i]) correct[static_cast<std::size_t>(labels[i])] += 1.0;
  }
  for (std::size_t c = 0; c < correct.size(); ++c) correct[c] /= static_cast<double>(sizes[c]);
  return correct;
}

double balanced_accuracy(const Matrix& logits, std::span<const int> labels) {
  const auto k = static_cast<int>(logits.cols());
  const auto sizes = class_sizes(labels, k);
  if (std::adjacent_find(sizes.begin(), sizes.end(), std::not_equal_to<>()) != sizes.end()) {
    std::clog << "warning: evaluation set is not class-balanced; reporting the macro average\n";
  }
  const auto acc = per_class_accuracy(logits, labels, k);
  return std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
}

MarginReport margin_report(const Matrix& logits, std::span<const int> labels, const ClassHistogram& train_counts) {
  const auto k = static_cast<int>(train_counts.num_classes());
  MarginReport report;
  const auto margins = example_margins(logits, labels);
  report.per_class_margin = class_margins(logits, labels, k);
  report.majority_mask = majority_split(train_counts);
  if (!is_degenerate_split(report.majority_mask)) {
    report.margin_gap = margin_gap(report.per_class_margin, train_counts, report.majority_mask);
  }
  report.decomposition = margin_decomposition(margins, labels, report.majority_mask);
  report.l2_fit_error = l2_fit_error(report.per_class_margin, train_counts);
  report.per_class_accuracy = per_class_accuracy(logits, labels, k);
  report.balanced_accuracy = balanced_accuracy(logits, labels);
  return report;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::optional<double> optional_from(const nlohmann::json& v) {
  return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
}

}  // namespace

nlohmann::json report_to_json(const MarginReport& report) {
  return {{"per_class_margin", report.per_class_margin},
          {"margin_gap", optional_json(report.margin_gap)},
          {"majority_mask", report.majority_mask},
          {"decomposition",
           {{"majority_negative", optional_json(report.decomposition.majority_negative)},
            {"majority_nonnegative", optional_json(report.decomposition.majority_nonnegative)},
            {"minority_negative", optional_json(report.decomposition.minority_negative)},
            {"minority_nonnegative", optional_json(report.decomposition.minority_nonnegative)}}},
          {"l2_fit_error", report.l2_fit_error},
          {"balanced_accuracy", report.balanced_accuracy},
          {"per_class_accuracy", report.per_class_accuracy}};
}

MarginReport report_from_json(const nlohmann::json& doc) {
  try {
    MarginReport report;
    report.per_class_margin = doc.at("per_class_margin").get<std::vector<double>>();
    report.margin_gap = optional_from(doc.at("margin_gap"));
    report.majority_mask = doc.at("majority_mask").get<std::vector<bool>>();
    const auto& d = doc.at("decomposition");
    report.decomposition = {optional_from(d.at("majority_negative")), optional_from(d.at("majority_nonnegative")),
                            optional_from(d.at("minority_negative")), optional_from(d.at("minority_nonnegative"))};
    report.l2_fit_error = doc.at("l2_fit_error").get<double>();
    report.balanced_accuracy = doc.at("balanced_accuracy").get<double>();
    report.per_class_accuracy = doc.at("per_class_accuracy").get<std::vector<double>>();
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, std::string("bad margin report: ") + e.what());
  }
}

}  // namespace imbmix
