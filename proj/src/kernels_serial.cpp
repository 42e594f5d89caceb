#include "imbmix/kernels.hpp"

#include "kernels_detail.hpp"

namespace imbmix::kernels::serial {

void affine(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out) {
  detail::check_affine(x, w, bias);
  if (out.rows() != x.rows() || out.cols() != w.rows()) out = Matrix(x.rows(), w.rows());
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  for (std::ptrdiff_t r = 0; r < n; ++r) detail::affine_row(x, w, bias, out, static_cast<std::size_t>(r));
}

void affine_backward_params(const Matrix& grad_out, const Matrix& x, Matrix& grad_w, std::span<double> grad_b) {
  if (grad_out.rows() != x.rows() || grad_w.rows() != grad_out.cols() || grad_w.cols() != x.cols() ||
      grad_b.size() != grad_out.cols()) {
    throw Error(ErrorKind::shape_mismatch, "affine_backward_params: inconsistent shapes");
  }
  const auto outputs = static_cast<std::ptrdiff_t>(grad_out.cols());
  for (std::ptrdiff_t o = 0; o < outputs; ++o) {
    detail::affine_grad_row(grad_out, x, grad_w, grad_b, static_cast<std::size_t>(o));
  }
}

void affine_backward_input(const Matrix& grad_out, const Matrix& w, Matrix& grad_x) {
  if (grad_out.cols() != w.rows()) {
    throw Error(ErrorKind::shape_mismatch, "affine_backward_input: inconsistent shapes");
  }
  if (grad_x.rows() != grad_out.rows() || grad_x.cols() != w.cols()) grad_x = Matrix(grad_out.rows(), w.cols());
  const auto n = static_cast<std::ptrdiff_t>(grad_out.rows());
  for (std::ptrdiff_t r = 0; r < n; ++r) detail::affine_input_row(grad_out, w, grad_x, static_cast<std::size_t>(r));
}

void pairwise_sq_distances(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols() != b.cols()) throw Error(ErrorKind::shape_mismatch, "pairwise_sq_distances: dimension mismatch");
  if (out.rows() != a.rows() || out.cols() != b.rows()) out = Matrix(a.rows(), b.rows());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto ai = a.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < b.rows(); ++j) out(static_cast<std::size_t>(i), j) = detail::sq_distance(ai, b.row(j));
  }
}

void example_margins(const Matrix& logits, std::span<const int> labels, std::span<double> out) {
  detail::check_labels(logits, labels);
  if (logits.cols() < 2) throw Error(ErrorKind::invalid_argument, "margins need at least two classes");
  if (out.size() != logits.rows()) throw Error(ErrorKind::shape_mismatch, "margin output has wrong length");
  const auto n = static_cast<std::ptrdiff_t>(logits.rows());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    out[r] = detail::margin_row(logits.row(r), labels[r]);
  }
}

NeighborLists knn(const Matrix& points, std::span<const int> labels, std::size_t k) {
  if (!labels.empty() && labels.size() != points.rows()) {
    throw Error(ErrorKind::shape_mismatch, "knn: label count does not match point count");
  }
  NeighborLists lists(points.rows());
  const auto n = static_cast<std::ptrdiff_t>(points.rows());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    lists[r] = detail::knn_row(points, labels, k, r);
  }
  return lists;
}

}  // namespace imbmix::kernels::serial
