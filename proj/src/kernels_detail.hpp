#pragma once

// Per-element bodies shared by the serial and parallel kernels. Keeping them in
// one place is what makes the two paths bit-identical.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "imbmix/error.hpp"
#include "imbmix/matrix.hpp"

namespace imbmix::kernels::detail {

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double sq_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

inline void affine_row(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out,
                       std::size_t r) noexcept {
  const auto xr = x.row(r);
  for (std::size_t o = 0; o < w.rows(); ++o) out(r, o) = bias[o] + dot(xr, w.row(o));
}

// Row o of grad_w and entry o of grad_b.
inline void affine_grad_row(const Matrix& grad_out, const Matrix& x, Matrix& grad_w,
                            std::span<double> grad_b, std::size_t o) noexcept {
  auto gw = grad_w.row(o);
  std::fill(gw.begin(), gw.end(), 0.0);
  double gb = 0.0;
  for (std::size_t r = 0; r < grad_out.rows(); ++r) {
    const double g = grad_out(r, o);
    gb += g;
    const auto xr = x.row(r);
    for (std::size_t c = 0; c < gw.size(); ++c) gw[c] += g * xr[c];
  }
  grad_b[o] = gb;
}

inline void affine_input_row(const Matrix& grad_out, const Matrix& w, Matrix& grad_x,
                             std::size_t r) noexcept {
  auto gx = grad_x.row(r);
  std::fill(gx.begin(), gx.end(), 0.0);
  for (std::size_t o = 0; o < w.rows(); ++o) {
    const double g = grad_out(r, o);
    const auto wo = w.row(o);
    for (std::size_t c = 0; c < gx.size(); ++c) gx[c] += g * wo[c];
  }
}

inline double margin_row(std::span<const double> z, int label) noexcept {
  const auto y = static_cast<std::size_t>(label);
  double best_other = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (j != y && z[j] > best_other) best_other = z[j];
  }
  return z[y] - best_other;
}

inline std::vector<std::uint32_t> knn_row(const Matrix& points, std::span<const int> labels,
                                          std::size_t k, std::size_t i) {
  std::vector<std::pair<double, std::uint32_t>> cand;
  cand.reserve(points.rows());
  const auto pi = points.row(i);
  for (std::size_t j = 0; j < points.rows(); ++j) {
    if (j == i) continue;
    if (!labels.empty() && labels[j] != labels[i]) continue;
    cand.emplace_back(sq_distance(pi, points.row(j)), static_cast<std::uint32_t>(j));
  }
  const std::size_t take = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
  std::vector<std::uint32_t> ids(take);
  for (std::size_t t = 0; t < take; ++t) ids[t] = cand[t].second;
  return ids;
}

inline void check_affine(const Matrix& x, const Matrix& w, std::span<const double> bias) {
  if (x.cols() != w.cols() || bias.size() != w.rows()) {
    throw Error(ErrorKind::shape_mismatch, "affine: input has " + std::to_string(x.cols()) +
                                               " columns, layer expects " + std::to_string(w.cols()));
  }
}

inline void check_labels(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows()) {
    throw Error(ErrorKind::shape_mismatch, "label count does not match logit rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols()) {
      throw Error(ErrorKind::invalid_argument, "label " + std::to_string(y) + " out of range");
    }
  }
}

}  // namespace imbmix::kernels::detail
