#pragma once

// Evaluate one compiled Program over many input points.
//
// sweep_parallel splits points across OpenMP threads; sweep_serial is the
// reference. Both return bit-identical results because every point is
// evaluated independently with its own workspace.

#include <cstddef>
#include <span>
#include <vector>

#include "concircle/program.hpp"

namespace concircle {

struct SweepResult {
  std::size_t points = 0;
  std::size_t outputs = 0;
  /// Row-major: values[p * outputs + j].
  std::vector<double> values;
  std::vector<double> scales;

  double value(std::size_t point, std::size_t output) const { return values[point * outputs + output]; }
  double scale(std::size_t point, std::size_t output) const { return scales[point * outputs + output]; }
};

/// `inputs` holds points * program.input_count() values, point-major.
/// A domain error at any point throws EvalError naming the lowest failing point.
SweepResult sweep_serial(const Program& program, std::span<const double> inputs);
SweepResult sweep_parallel(const Program& program, std::span<const double> inputs);

}  // namespace concircle
