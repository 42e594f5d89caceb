#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace imbmix {

enum class ErrorKind {
  invalid_spec,
  insufficient_samples,
  parse_error,
  shape_mismatch,
  invalid_argument,
  missing_index,
  non_normalized_labels,
  hard_labels_required,
  divergence,
  empty_class,
  degenerate_split,
  undefined_statistic,
  unknown_method,
  config_error,
  io_error,
  mismatched_specs,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so callers (and the CLI)
/// can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_spec: return "invalid-spec";
    case ErrorKind::insufficient_samples: return "insufficient-samples";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::shape_mismatch: return "shape-mismatch";
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::missing_index: return "missing-index";
    case ErrorKind::non_normalized_labels: return "non-normalized-labels";
    case ErrorKind::hard_labels_required: return "hard-labels-required";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::empty_class: return "empty-class";
    case ErrorKind::degenerate_split: return "degenerate-split";
    case ErrorKind::undefined_statistic: return "undefined-statistic";
    case ErrorKind::unknown_method: return "unknown-method";
    case ErrorKind::config_error: return "config-error";
    case ErrorKind::io_error: return "io-error";
    case ErrorKind::mismatched_specs: return "mismatched-specs";
  }
  return "error";
}

}  // namespace imbmix
