#include <doctest.h>

#include <cstring>
#include <vector>

#include "concircle/sampling.hpp"
#include "concircle/sweep.hpp"

using namespace concircle;

TEST_CASE("parallel sweep is bit-identical to the serial reference") {
  const std::vector<Expr> roots{parse("sin(a)*exp(b) - a^(1/3)"), parse("(a - b)/(a^2 + b^2)"),
                                parse("sqrt(abs(a*b)) + cos(a + b)^5")};
  const Program program(roots, {intern("a"), intern("b")});
  SampleRng rng(3);
  std::vector<double> inputs(2 * 5000);
  for (double& v : inputs) v = rng.component();

  const SweepResult serial = sweep_serial(program, inputs);
  const SweepResult parallel = sweep_parallel(program, inputs);
  REQUIRE(serial.points == 5000);
  REQUIRE(parallel.values.size() == serial.values.size());
  CHECK(std::memcmp(serial.values.data(), parallel.values.data(), serial.values.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(serial.scales.data(), parallel.scales.data(), serial.scales.size() * sizeof(double)) == 0);
  CHECK(serial.value(17, 1) == program(std::span<const double>(inputs).subspan(34, 2))[1]);
}

TEST_CASE("sweeps report the first failing point") {
  const Expr root = parse("log(a)");
  const Program program(std::span<const Expr>(&root, 1), {intern("a")});
  const std::vector<double> inputs{1.0, 2.0, -1.0, 3.0, -2.0};
  for (auto sweep : {&sweep_serial, &sweep_parallel}) {
    try {
      sweep(program, inputs);
      FAIL("expected a domain error");
    } catch (const EvalError& e) {
      CHECK(std::string(e.what()).rfind("point 2:", 0) == 0);
    }
  }
  const std::vector<double> ragged(3);
  const Expr two = parse("a + b");
  CHECK_THROWS_AS(sweep_serial(Program(std::span<const Expr>(&two, 1), {intern("a"), intern("b")}), ragged),
                  EvalError);
}

TEST_CASE("tolerance accounts for cancellation scale") {
  const Tolerance t;
  CHECK(t.accepts(5e-10, 0.0));
  CHECK_FALSE(t.accepts(2e-9, 0.0));
  CHECK(t.accepts(1e-3, 1e5));
  CHECK(t.ratio(2e-9, 0.0) == doctest::Approx(2.0));
}

TEST_CASE("sample components avoid the origin") {
  SampleRng rng;
  for (int j = 0; j < 10000; ++j) {
    const double c = rng.component();
    CHECK(std::abs(c) >= 0.5);
    CHECK(std::abs(c) <= 2.0);
  }
  SampleRng a(9);
  SampleRng b(9);
  for (int j = 0; j < 100; ++j) CHECK(a.uniform() == b.uniform());
}
