#include "concircle/sweep.hpp"

#include <cmath>
#include <optional>
#include <string>

#include "concircle/sampling.hpp"

namespace concircle {

bool Tolerance::accepts(double value, double scale) const noexcept {
  return std::fabs(value) <= atol + rtol * scale;
}

double Tolerance::ratio(double value, double scale) const noexcept {
  return std::fabs(value) / (atol + rtol * scale);
}

namespace {

SweepResult prepare(const Program& program, std::span<const double> inputs) {
  const std::size_t width = program.input_count();
  if (width == 0 ? !inputs.empty() : inputs.size() % width != 0)
    throw EvalError("sweep input size is not a multiple of the program input count");
  SweepResult r;
  r.points = width == 0 ? 0 : inputs.size() / width;
  r.outputs = program.output_count();
  r.values.resize(r.points * r.outputs);
  r.scales.resize(r.points * r.outputs);
  return r;
}

void rethrow_first(const std::vector<std::optional<std::string>>& errors) {
  for (std::size_t p = 0; p < errors.size(); ++p)
    if (errors[p]) throw EvalError("point " + std::to_string(p) + ": " + *errors[p]);
}

// One point; errors are captured rather than thrown so a parallel region never
// unwinds across threads.
void evaluate_point(const Program& program, std::span<const double> inputs, SweepResult& r, std::size_t p,
                    std::vector<double>& w, std::vector<double>& m, std::optional<std::string>& error) {
  const std::size_t width = program.input_count();
  try {
    program.run_with_scale(inputs.subspan(p * width, width),
                           std::span<double>(r.values).subspan(p * r.outputs, r.outputs),
                           std::span<double>(r.scales).subspan(p * r.outputs, r.outputs), w, m);
  } catch (const EvalError& e) {
    error = e.what();
  }
}

}  // namespace

SweepResult sweep_serial(const Program& program, std::span<const double> inputs) {
  SweepResult r = prepare(program, inputs);
  std::vector<double> w(program.workspace_size());
  std::vector<double> m(program.workspace_size());
  std::vector<std::optional<std::string>> errors(r.points);
  for (std::size_t p = 0; p < r.points; ++p) evaluate_point(program, inputs, r, p, w, m, errors[p]);
  rethrow_first(errors);
  return r;
}

SweepResult sweep_parallel(const Program& program, std::span<const double> inputs) {
  SweepResult r = prepare(program, inputs);
  std::vector<std::optional<std::string>> errors(r.points);
  const auto points = static_cast<std::ptrdiff_t>(r.points);
#pragma omp parallel
  {
    std::vector<double> w(program.workspace_size());
    std::vector<double> m(program.workspace_size());
#pragma omp for schedule(static)
    for (std::ptrdiff_t p = 0; p < points; ++p) {
      const auto i = static_cast<std::size_t>(p);
      evaluate_point(program, inputs, r, i, w, m, errors[i]);
    }
  }
  rethrow_first(errors);
  return r;
}

}  // namespace concircle
