#pragma once

// Data-parallel kernels behind the model, neighbor search, and margin code.
//
// `serial` is the reference implementation. `parallel` splits the outer loop
// across OpenMP threads; every output element is still produced by exactly one
// thread with the same inner loop order, so both namespaces return
// bit-identical results. Tests assert that equality.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "imbmix/matrix.hpp"

namespace imbmix::kernels {

using NeighborLists = std::vector<std::vector<std::uint32_t>>;

namespace serial {

/// out[r, o] = bias[o] + sum_c x[r, c] * w[o, c]. `out` is resized.
void affine(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out);
/// grad_w = grad_outᵀ x and grad_b = column sums of grad_out.
void affine_backward_params(const Matrix& grad_out, const Matrix& x, Matrix& grad_w, std::span<double> grad_b);
/// grad_x = grad_out w.
void affine_backward_input(const Matrix& grad_out, const Matrix& w, Matrix& grad_x);
void pairwise_sq_distances(const Matrix& a, const Matrix& b, Matrix& out);
/// out[i] = logits[i, y_i] - max over j != y_i of logits[i, j].
void example_margins(const Matrix& logits, std::span<const int> labels, std::span<double> out);
/// The k nearest rows of every row, self excluded, by nondecreasing squared
/// Euclidean distance with ties broken by ascending index. A non-empty `labels`
/// restricts candidates to the row's own class.
NeighborLists knn(const Matrix& points, std::span<const int> labels, std::size_t k);

}  // namespace serial

namespace parallel {

void affine(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out);
void affine_backward_params(const Matrix& grad_out, const Matrix& x, Matrix& grad_w, std::span<double> grad_b);
void affine_backward_input(const Matrix& grad_out, const Matrix& w, Matrix& grad_x);
void pairwise_sq_distances(const Matrix& a, const Matrix& b, Matrix& out);
void example_margins(const Matrix& logits, std::span<const int> labels, std::span<double> out);
NeighborLists knn(const Matrix& points, std::span<const int> labels, std::size_t k);

}  // namespace parallel

}  // namespace imbmix::kernels
