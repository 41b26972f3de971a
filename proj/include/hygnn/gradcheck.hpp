#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace hygnn {

struct GradCheckRow {
  std::string name;    // op name, or parameter name with flat index
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;  // |analytic - numeric| / max(1, |numeric|)
};

struct GradCheckReport {
  std::vector<GradCheckRow> rows;
  double tolerance = 1e-4;

  double max_rel_error() const;
  bool passed() const { return max_rel_error() < tolerance; }
};

struct GradCheckOptions {
  double eps = 1e-6;
  double tolerance = 1e-4;
  std::uint64_t seed = 7;
  /// Full model shape. The defaults are the small check: N=2, K=1, 16x16.
  std::size_t scales = 2;
  std::size_t iterations = 1;
  std::size_t image_size = 16;
  double width_multiplier = 0.125;
  double lambda = 1.0;
  std::size_t samples = 24;
  /// Noise added to every bias before checking; 0 keeps the initialisation.
  double bias_stddev = 0.2;

  /// N=3, K=2, 32x32 and more sampled elements.
  static GradCheckOptions full();
};

/// Every differentiable op on its own: loss = sum(op(inputs) * R) for a
/// random R, compared element by element with central differences. One row
/// per (op, input); the row keeps the worst element.
GradCheckReport grad_check_ops(const GradCheckOptions& options = {});

/// Randomly sampled parameter elements of the whole model under the
/// training loss against random targets. One row per sampled element.
GradCheckReport grad_check_model(const GradCheckOptions& options = {});

/// Both of the above in one report.
GradCheckReport grad_check(const GradCheckOptions& options = {});

void print_report(std::ostream& out, const GradCheckReport& report);

}  // namespace hygnn
