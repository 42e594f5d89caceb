#include "imbmix/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "imbmix/error.hpp"
#include "imbmix/rng.hpp"

namespace imbmix {

std::size_t ClassHistogram::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t ClassHistogram::max() const noexcept {
  return counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
}

std::size_t ClassHistogram::min() const noexcept {
  return counts.empty() ? 0 : *std::min_element(counts.begin(), counts.end());
}

double ClassHistogram::imbalance_ratio() const noexcept {
  const auto lo = min();
  if (lo == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(max()) / static_cast<double>(lo);
}

LabeledDataset::LabeledDataset(Matrix features, std::vector<int> labels, int num_classes)
    : features_(std::move(features)), labels_(std::move(labels)), num_classes_(num_classes) {
  if (num_classes_ < 2) throw Error(ErrorKind::invalid_argument, "a dataset needs at least two classes");
  if (features_.rows() != labels_.size()) {
    throw Error(ErrorKind::shape_mismatch, "feature rows (" + std::to_string(features_.rows()) +
                                               ") != labels (" + std::to_string(labels_.size()) + ")");
  }
  if (labels_.size() < static_cast<std::size_t>(num_classes_)) {
    throw Error(ErrorKind::invalid_argument, "a dataset needs at least one row per class slot (n >= K)");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || labels_[i] >= num_classes_) {
      throw Error(ErrorKind::invalid_argument,
                  "row " + std::to_string(i) + " has label " + std::to_string(labels_[i]) + " outside [0, K)");
    }
  }
}

ClassHistogram LabeledDataset::class_counts() const {
  ClassHistogram h{std::vector<std::size_t>(static_cast<std::size_t>(num_classes_), 0)};
  for (int y : labels_) ++h.counts[static_cast<std::size_t>(y)];
  return h;
}

std::vector<std::vector<std::size_t>> LabeledDataset::rows_by_class() const {
  std::vector<std::vector<std::size_t>> rows(static_cast<std::size_t>(num_classes_));
  for (std::size_t i = 0; i < labels_.size(); ++i) rows[static_cast<std::size_t>(labels_[i])].push_back(i);
  return rows;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
  Matrix x(rows.size(), dim());
  std::vector<int> y(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = features_.row(rows[r]);
    std::copy(src.begin(), src.end(), x.row(r).begin());
    y[r] = labels_[rows[r]];
  }
  return LabeledDataset(std::move(x), std::move(y), num_classes_);
}

namespace {

void check_rho(double rho) {
  if (!(rho >= 1.0) || !std::isfinite(rho)) {
    throw Error(ErrorKind::invalid_spec, "imbalance ratio must be a finite value >= 1, got " + std::to_string(rho));
  }
}

std::size_t tail_count(std::size_t n_max, double rho) {
  const double tail = static_cast<double>(n_max) / rho;
  if (tail < 1.0) {
    throw Error(ErrorKind::invalid_spec, "n_max / rho = " + std::to_string(tail) + " leaves the tail class empty");
  }
  return static_cast<std::size_t>(round_half_up(tail));
}

}  // namespace

ClassHistogram long_tailed_counts(std::size_t n_max, int num_classes, double rho) {
  if (num_classes < 2) throw Error(ErrorKind::invalid_spec, "need at least two classes");
  check_rho(rho);
  tail_count(n_max, rho);
  const auto k_count = static_cast<std::size_t>(num_classes);
  ClassHistogram h{std::vector<std::size_t>(k_count)};
  const double steps = static_cast<double>(num_classes - 1);
  for (std::size_t k = 0; k < k_count; ++k) {
    const double size = static_cast<double>(n_max) * std::pow(rho, -static_cast<double>(k) / steps);
    h.counts[k] = static_cast<std::size_t>(std::max(1LL, round_half_up(size)));
  }
  return h;
}

ClassHistogram step_counts(std::size_t n_max, int num_classes, double rho, double mu) {
  if (num_classes < 2) throw Error(ErrorKind::invalid_spec, "need at least two classes");
  check_rho(rho);
  if (!(mu > 0.0 && mu < 1.0)) throw Error(ErrorKind::invalid_spec, "mu must lie in (0, 1)");
  const long long minority = round_half_up(mu * num_classes);
  if (minority < 1 || minority > num_classes - 1) {
    throw Error(ErrorKind::invalid_spec, "round(mu*K) = " + std::to_string(minority) +
                                             " must be between 1 and K-1 to have both groups");
  }
  const std::size_t tail = tail_count(n_max, rho);
  const auto k_count = static_cast<std::size_t>(num_classes);
  ClassHistogram h{std::vector<std::size_t>(k_count, n_max)};
  for (std::size_t k = k_count - static_cast<std::size_t>(minority); k < k_count; ++k) h.counts[k] = tail;
  return h;
}

ClassHistogram target_histogram(const ImbalanceSpec& spec, std::size_t n_max, int num_classes) {
  ClassHistogram h = spec.kind == ImbalanceKind::long_tailed ? long_tailed_counts(n_max, num_classes, spec.rho)
                                                             : step_counts(n_max, num_classes, spec.rho, spec.mu);
  if (spec.class_permutation_seed) {
    Rng rng = make_stream(*spec.class_permutation_seed, "class-permutation");
    shuffle(std::span<std::size_t>(h.counts), rng);
  }
  return h;
}

Subsample subsample_imbalanced(const LabeledDataset& source, const ImbalanceSpec& spec) {
  const ClassHistogram have = source.class_counts();
  const std::size_t n_max = spec.n_max.value_or(have.min());
  const ClassHistogram want = target_histogram(spec, n_max, source.num_classes());

  Rng rng = make_stream(spec.seed, "subsample");
  auto by_class = source.rows_by_class();
  std::vector<std::vector<std::size_t>> selected(by_class.size());
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (have.counts[c] < want.counts[c]) {
      throw Error(ErrorKind::insufficient_samples, "class " + std::to_string(c) + " has " +
                                                       std::to_string(have.counts[c]) + " rows, needs " +
                                                       std::to_string(want.counts[c]));
    }
    auto& rows = by_class[c];
    shuffle(std::span<std::size_t>(rows), rng);
    selected[c].assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(want.counts[c]));
    std::sort(selected[c].begin(), selected[c].end());
  }

  std::vector<std::size_t> keep;
  for (const auto& rows : selected) keep.insert(keep.end(), rows.begin(), rows.end());
  std::sort(keep.begin(), keep.end());
  return Subsample{source.subset(keep), std::move(selected)};
}

nlohmann::json manifest_to_json(const std::vector<std::vector<std::size_t>>& selected) {
  return nlohmann::json{{"num_classes", selected.size()}, {"selected", selected}};
}

std::vector<std::vector<std::size_t>> manifest_from_json(const nlohmann::json& manifest) {
  try {
    auto selected = manifest.at("selected").get<std::vector<std::vector<std::size_t>>>();
    if (manifest.at("num_classes").get<std::size_t>() != selected.size()) {
      throw Error(ErrorKind::parse_error, "manifest num_classes disagrees with the selection lists");
    }
    return selected;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, std::string("bad split manifest: ") + e.what());
  }
}

namespace {

std::vector<std::vector<double>> orthogonal_means(int num_classes, std::size_t dim, double sep, Rng& rng) {
  // Random orthonormal directions scaled by sep/sqrt(2): every pair is exactly sep apart.
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> basis;
  while (basis.size() < static_cast<std::size_t>(num_classes)) {
    std::vector<double> v(dim);
    for (auto& x : v) x = normal(rng);
    for (const auto& b : basis) {
      double proj = 0.0;
      for (std::size_t i = 0; i < dim; ++i) proj += v[i] * b[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * b[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  const double scale = sep / std::sqrt(2.0);
  for (auto& b : basis) {
    for (auto& x : b) x *= scale;
  }
  return basis;
}

std::vector<std::vector<double>> packed_means(int num_classes, std::size_t dim, double sep, Rng& rng) {
  // More classes than dimensions: rejection-sample centers in a growing cube.
  double side = sep * 2.0 * std::pow(static_cast<double>(num_classes), 1.0 / static_cast<double>(dim));
  std::vector<std::vector<double>> means;
  int failures = 0;
  while (means.size() < static_cast<std::size_t>(num_classes)) {
    std::vector<double> c(dim);
    for (auto& x : c) x = (uniform01(rng) - 0.5) * side;
    bool ok = true;
    for (const auto& m : means) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < dim; ++i) d2 += (c[i] - m[i]) * (c[i] - m[i]);
      if (d2 < sep * sep) {
        ok = false;
        break;
      }
    }
    if (ok) {
      means.push_back(std::move(c));
      failures = 0;
    } else if (++failures > 1000) {
      side *= 1.5;
      failures = 0;
    }
  }
  return means;
}

}  // namespace

LabeledDataset synth_gaussian_blobs(int num_classes, std::size_t dim, std::size_t n_per_class, double sep,
                                    std::uint64_t seed) {
  if (num_classes < 2) throw Error(ErrorKind::invalid_argument, "blobs need K >= 2");
  if (dim < 2) throw Error(ErrorKind::invalid_argument, "blobs need d >= 2");
  if (!(sep > 0.0)) throw Error(ErrorKind::invalid_argument, "blob separation must be positive");
  if (n_per_class < 1) throw Error(ErrorKind::invalid_argument, "blobs need at least one point per class");

  Rng geometry = make_stream(seed, "blobs-geometry");
  const auto means = static_cast<std::size_t>(num_classes) <= dim ? orthogonal_means(num_classes, dim, sep, geometry)
                                                                   : packed_means(num_classes, dim, sep, geometry);

  Rng noise = make_stream(seed, "blobs-noise");
  std::normal_distribution<double> normal;
  const std::size_t n = n_per_class * static_cast<std::size_t>(num_classes);
  Matrix x(n, dim);
  std::vector<int> y(n);
  std::size_t r = 0;
  for (int c = 0; c < num_classes; ++c) {
    const auto& mean = means[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < n_per_class; ++i, ++r) {
      for (std::size_t j = 0; j < dim; ++j) x(r, j) = mean[j] + normal(noise);
      y[r] = c;
    }
  }
  return LabeledDataset(std::move(x), std::move(y), num_classes);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_field(std::string_view field, std::size_t line_no, std::size_t column) {
  field = trim(field);
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw Error(ErrorKind::parse_error, "row " + std::to_string(line_no) + ", column " + std::to_string(column + 1) +
                                            ": cannot parse '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

LabeledDataset load_csv(const std::filesystem::path& path, bool skip_header, std::optional<int> num_classes) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_header && line_no == 1) continue;
    const std::string_view view = trim(line);
    if (view.empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
      const auto comma = view.find(',', start);
      fields.push_back(view.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() < 2) {
      throw Error(ErrorKind::parse_error, "row " + std::to_string(line_no) + ": need features and a label");
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw Error(ErrorKind::parse_error, "row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                                              " fields, expected " + std::to_string(width));
    }
    for (std::size_t c = 0; c + 1 < fields.size(); ++c) values.push_back(parse_field<double>(fields[c], line_no, c));
    labels.push_back(parse_field<int>(fields.back(), line_no, fields.size() - 1));
    if (labels.back() < 0) {
      throw Error(ErrorKind::parse_error, "row " + std::to_string(line_no) + ": negative label");
    }
  }
  if (labels.empty()) throw Error(ErrorKind::parse_error, path.string() + " holds no rows");

  const int k = num_classes.value_or(*std::max_element(labels.begin(), labels.end()) + 1);
  const std::size_t n = labels.size();
  return LabeledDataset(Matrix(n, width - 1, std::move(values)), std::move(labels), k);
}

void write_csv(const LabeledDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  char buf[64];
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (double v : data.features().row(r)) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out.write(buf, res.ptr - buf);
      out.put(',');
    }
    out << data.labels()[r] << '\n';
  }
}

BalancedSplit split_balanced_eval(const LabeledDataset& data, std::size_t n_eval_per_class, std::uint64_t seed) {
  if (n_eval_per_class == 0) throw Error(ErrorKind::invalid_argument, "n_eval_per_class must be >= 1");
  auto by_class = data.rows_by_class();
  Rng rng = make_stream(seed, "balanced-split");
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> eval_rows;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& rows = by_class[c];
    // Both halves keep every class.
    if (rows.size() <= n_eval_per_class) {
      throw Error(ErrorKind::insufficient_samples, "class " + std::to_string(c) + " has " +
                                                       std::to_string(rows.size()) + " rows, eval needs " +
                                                       std::to_string(n_eval_per_class) + " plus one for training");
    }
    shuffle(std::span<std::size_t>(rows), rng);
    const auto cut = rows.begin() + static_cast<std::ptrdiff_t>(n_eval_per_class);
    eval_rows.insert(eval_rows.end(), rows.begin(), cut);
    train_rows.insert(train_rows.end(), cut, rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(eval_rows.begin(), eval_rows.end());
  auto train = data.subset(train_rows);
  auto eval = data.subset(eval_rows);
  return BalancedSplit{std::move(train), std::move(eval), std::move(train_rows), std::move(eval_rows)};
}

}  // namespace imbmix
