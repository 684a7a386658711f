#include "concircle/program.hpp"

#include <bit>
#include <cmath>
#include <map>
#include <tuple>
#include <unordered_map>

#include "node.hpp"

namespace concircle {

namespace detail {
double rational_pow(double x, Rational p);
}

namespace {

using Slot = std::uint32_t;

struct InstrKey {
  Op op;
  Slot a;
  Slot b;
  std::uint64_t bits;
  std::int64_t num;
  std::int64_t den;
  auto operator<=>(const InstrKey&) const = default;
};

[[noreturn]] void domain_error(const char* what, double x) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "domain error: %s (argument %.17g)", what, x);
  throw EvalError(buf);
}

}  // namespace

Program::Program(std::span<const Expr> roots, std::vector<VarId> inputs) : inputs_(std::move(inputs)) {
  std::map<InstrKey, Slot> numbering;
  std::unordered_map<const Node*, Slot> slot_of;

  auto emit = [&](const Instr& in) -> Slot {
    const InstrKey key{in.op, in.a, in.b, std::bit_cast<std::uint64_t>(in.c), in.p.num, in.p.den};
    auto [it, inserted] = numbering.try_emplace(key, static_cast<Slot>(tape_.size()));
    if (inserted) tape_.push_back(in);
    return it->second;
  };

  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    Instr in{Op::Var, static_cast<Slot>(i), 0, 0.0, {}};
    emit(in);
  }
  std::unordered_map<VarId, Slot> input_slot;
  for (std::size_t i = 0; i < inputs_.size(); ++i) input_slot.emplace(inputs_[i], static_cast<Slot>(i));

  // Iterative post-order so deep trees do not exhaust the stack.
  for (const Expr& root : roots) {
    std::vector<std::pair<const Expr*, bool>> stack{{&root, false}};
    while (!stack.empty()) {
      auto [e, expanded] = stack.back();
      stack.pop_back();
      if (slot_of.count(e->id()) != 0) continue;
      const Op op = e->op();
      if (op == Op::Const) {
        slot_of[e->id()] = emit(Instr{Op::Const, 0, 0, e->constant_value(), {}});
        continue;
      }
      if (op == Op::Var) {
        auto it = input_slot.find(e->var());
        if (it == input_slot.end())
          throw EvalError("unbound variable '" + var_name(e->var()) + "'");
        slot_of[e->id()] = it->second;
        continue;
      }
      const bool binary = detail::is_binary(op);
      if (!expanded) {
        stack.push_back({e, true});
        if (binary) stack.push_back({&e->arg(1), false});
        stack.push_back({&e->arg(0), false});
        continue;
      }
      Instr in{op, slot_of.at(e->arg(0).id()), binary ? slot_of.at(e->arg(1).id()) : 0, 0.0, {}};
      if (op == Op::Pow) {
        in.p = e->exponent();
        in.c = in.p.value();
      }
      slot_of[e->id()] = emit(in);
    }
    outputs_.push_back(slot_of.at(root.id()));
  }
}

void Program::run(std::span<const double> in, std::span<double> out, std::span<double> w) const {
  if (in.size() != inputs_.size()) throw EvalError("program input size mismatch");
  for (std::size_t i = 0; i < tape_.size(); ++i) {
    const Instr& ins = tape_[i];
    const double a = w[ins.a];
    switch (ins.op) {
      case Op::Var: w[i] = in[ins.a]; break;
      case Op::Const: w[i] = ins.c; break;
      case Op::Neg: w[i] = -a; break;
      case Op::Sin: w[i] = std::sin(a); break;
      case Op::Cos: w[i] = std::cos(a); break;
      case Op::Exp: w[i] = std::exp(a); break;
      case Op::Log:
        if (!(a > 0.0)) domain_error("log of non-positive value", a);
        w[i] = std::log(a);
        break;
      case Op::Sqrt:
        if (a < 0.0) domain_error("sqrt of negative value", a);
        w[i] = std::sqrt(a);
        break;
      case Op::Abs: w[i] = std::fabs(a); break;
      case Op::Pow: {
        const double v = detail::rational_pow(a, ins.p);
        if (std::isnan(v) && !std::isnan(a)) domain_error("power outside its real domain", a);
        w[i] = v;
        break;
      }
      case Op::Add: w[i] = a + w[ins.b]; break;
      case Op::Sub: w[i] = a - w[ins.b]; break;
      case Op::Mul: w[i] = a * w[ins.b]; break;
      case Op::Div:
        if (w[ins.b] == 0.0) domain_error("division by zero", a);
        w[i] = a / w[ins.b];
        break;
    }
  }
  for (std::size_t k = 0; k < outputs_.size(); ++k) out[k] = w[outputs_[k]];
}

void Program::run_with_scale(std::span<const double> in, std::span<double> out, std::span<double> scale,
                             std::span<double> w, std::span<double> m) const {
  run(in, out, w);
  for (std::size_t i = 0; i < tape_.size(); ++i) {
    const Instr& ins = tape_[i];
    const double a = w[ins.a];
    const double ma = m[ins.a];
    // Excess of the operand's magnitude over its value: how much cancellation
    // happened below this node.
    const double excess = ma - std::fabs(a);
    switch (ins.op) {
      case Op::Var:
      case Op::Const: m[i] = std::fabs(w[i]); break;
      case Op::Neg:
      case Op::Abs: m[i] = ma; break;
      case Op::Sin: m[i] = std::fabs(w[i]) + std::fabs(std::cos(a)) * excess; break;
      case Op::Cos: m[i] = std::fabs(w[i]) + std::fabs(std::sin(a)) * excess; break;
      case Op::Exp: m[i] = w[i] * (1.0 + excess); break;
      case Op::Log: m[i] = std::fabs(w[i]) + excess / a; break;
      case Op::Sqrt: m[i] = w[i] + (w[i] > 0.0 ? excess / (2.0 * w[i]) : 0.0); break;
      case Op::Pow: {
        const double deriv = a != 0.0 ? std::fabs(ins.c * w[i] / a) : 0.0;
        m[i] = std::fabs(w[i]) + deriv * excess;
        break;
      }
      case Op::Add:
      case Op::Sub: m[i] = ma + m[ins.b]; break;
      case Op::Mul: m[i] = ma * m[ins.b]; break;
      case Op::Div: {
        const double b = std::fabs(w[ins.b]);
        m[i] = ma / b + std::fabs(w[i]) * (m[ins.b] - b) / b;
        break;
      }
    }
  }
  for (std::size_t k = 0; k < outputs_.size(); ++k) scale[k] = m[outputs_[k]];
}

std::vector<double> Program::operator()(std::span<const double> in) const {
  std::vector<double> w(tape_.size());
  std::vector<double> out(outputs_.size());
  run(in, out, w);
  return out;
}

}  // namespace concircle
