#include "concircle/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <toml++/toml.hpp>

namespace concircle::cli {

ConfigError::ConfigError(std::string path, const std::string& message)
    : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

Metric MetricConfig::build() const {
  if (!builtin.empty()) return Metric::builtin(builtin, orientation);
  return Metric::parse("explicit", components[0], components[1], components[2], signature, orientation);
}

CurveJet InitialState::jet() const { return {x, {{u[0], u[1]}}, {{w[0], w[1]}}, std::nullopt}; }

namespace {

// A table being read; remembers which keys were consumed so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const toml::table& table, std::string path) : table_(&table), path_(std::move(path)) {}

  std::string path(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

  const toml::node* get(std::string_view key) {
    seen_.insert(std::string(key));
    return table_->get(key);
  }
  bool has(std::string_view key) const { return table_->contains(key); }

  void number(std::string_view key, double& out) {
    if (const toml::node* n = get(key)) out = as_number(*n, path(key));
  }

  void integer(std::string_view key, std::int64_t& out) {
    if (const toml::node* n = get(key)) {
      if (!n->is_integer()) throw ConfigError(path(key), "expected an integer");
      out = n->as_integer()->get();
    }
  }

  void boolean(std::string_view key, bool& out) {
    if (const toml::node* n = get(key)) {
      if (!n->is_boolean()) throw ConfigError(path(key), "expected true or false");
      out = n->as_boolean()->get();
    }
  }

  void string(std::string_view key, std::string& out) {
    if (const toml::node* n = get(key)) {
      if (!n->is_string()) throw ConfigError(path(key), "expected a string");
      out = n->as_string()->get();
    }
  }

  std::vector<double> numbers(std::string_view key) {
    const toml::node* n = get(key);
    if (n == nullptr) return {};
    if (!n->is_array()) throw ConfigError(path(key), "expected an array of numbers");
    std::vector<double> out;
    const toml::array& a = *n->as_array();
    for (std::size_t i = 0; i < a.size(); ++i)
      out.push_back(as_number(*a.get(i), path(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  bool pair(std::string_view key, std::array<double, 2>& out) {
    if (!has(key)) {
      seen_.insert(std::string(key));
      return false;
    }
    const std::vector<double> v = numbers(key);
    if (v.size() != 2) throw ConfigError(path(key), "expected exactly two numbers");
    out = {v[0], v[1]};
    return true;
  }

  const toml::table* table(std::string_view key) {
    const toml::node* n = get(key);
    if (n == nullptr) return nullptr;
    if (!n->is_table()) throw ConfigError(path(key), "expected a table");
    return n->as_table();
  }

  void finish() const {
    for (const auto& [key, node] : *table_)
      if (!seen_.contains(std::string(key.str()))) throw ConfigError(path(key.str()), "unknown key");
  }

 private:
  static double as_number(const toml::node& n, const std::string& where) {
    if (n.is_integer()) return static_cast<double>(n.as_integer()->get());
    if (n.is_floating_point()) return n.as_floating_point()->get();
    throw ConfigError(where, "expected a number");
  }

  const toml::table* table_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& message) {
  if (!ok) throw ConfigError(path, message);
}

MetricConfig read_metric(Section& s) {
  MetricConfig m;
  const bool explicit_metric = s.has("g00") || s.has("g01") || s.has("g10") || s.has("g11");
  std::int64_t orientation = 1;
  s.integer("orientation", orientation);
  require(orientation == 1 || orientation == -1, s.path("orientation"), "must be 1 or -1");
  m.orientation = static_cast<int>(orientation);
  if (!explicit_metric) {
    s.string("builtin", m.builtin);
    require(!s.has("signature"), s.path("signature"), "only allowed with explicit components");
    try {
      m.build();
    } catch (const std::exception& e) {
      throw ConfigError(s.path("builtin"), e.what());
    }
    return m;
  }
  require(!s.has("builtin"), s.path("builtin"), "give either builtin or explicit components, not both");
  m.builtin.clear();
  const char* keys[] = {"g00", "g01", "g11"};
  for (int i = 0; i < 3; ++i) {
    require(s.has(keys[i]), s.path(keys[i]), "missing required key");
    s.string(keys[i], m.components[static_cast<std::size_t>(i)]);
  }
  for (int i = 0; i < 3; ++i) {
    try {
      parse(m.components[static_cast<std::size_t>(i)]);
    } catch (const ParseError& e) {
      throw ConfigError(s.path(keys[i]), e.what());
    }
  }
  if (s.has("g10")) {
    std::string g10;
    s.string("g10", g10);
    try {
      require(parse(g10).id() == parse(m.components[1]).id(), s.path("g10"),
              "metric must be symmetric (g10 differs from g01)");
    } catch (const ParseError& e) {
      throw ConfigError(s.path("g10"), e.what());
    }
  }
  std::string signature = "riemannian";
  s.string("signature", signature);
  if (signature == "riemannian")
    m.signature = Signature::riemannian;
  else if (signature == "lorentzian")
    m.signature = Signature::lorentzian;
  else
    throw ConfigError(s.path("signature"), "expected riemannian or lorentzian");
  try {
    m.build();
  } catch (const std::exception& e) {
    throw ConfigError(s.path("g00"), e.what());
  }
  return m;
}

InitialState read_initial(Section& s, const Metric& metric) {
  InitialState st;
  require(s.pair("x", st.x), s.path("x"), "missing required key");
  const bool natural = s.has("heading") || s.has("curvature");
  if (natural) {
    require(!s.has("u") && !s.has("w"), s.path("heading"), "give either heading/curvature or u/w, not both");
    require(s.has("heading"), s.path("heading"), "missing required key");
    require(s.has("curvature"), s.path("curvature"), "missing required key");
    double heading = 0.0;
    double curvature = 0.0;
    s.number("heading", heading);
    s.number("curvature", curvature);
    try {
      const CurveJet j = natural_initial_state(metric, st.x, heading, curvature);
      st.u = {j.u[0], j.u[1]};
      st.w = {j.w[0], j.w[1]};
    } catch (const GeometryError& e) {
      throw ConfigError(s.path("heading"), e.what());
    }
  } else {
    require(s.pair("u", st.u), s.path("u"), "missing required key");
    require(s.pair("w", st.w), s.path("w"), "missing required key");
  }
  for (double v : {st.x[0], st.x[1], st.u[0], st.u[1], st.w[0], st.w[1]})
    require(std::isfinite(v), s.path("x"), "initial state must be finite");
  s.finish();
  return st;
}

IntegrationConfig read_integration(Section& s, const Metric& metric) {
  IntegrationConfig c;
  IntegratorConfig& ic = c.integrator;
  std::string method = std::string(to_string(ic.method));
  std::string formulation = std::string(to_string(ic.formulation));
  s.string("method", method);
  s.string("formulation", formulation);
  try {
    ic.method = parse_method(method);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s.path("method"), e.what());
  }
  try {
    ic.formulation = parse_formulation(formulation);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s.path("formulation"), e.what());
  }
  s.number("step", ic.step);
  s.number("atol", ic.atol);
  s.number("rtol", ic.rtol);
  s.number("min_step", ic.min_step);
  s.number("t_start", ic.t_start);
  s.number("t_end", ic.t_end);
  std::int64_t stride = ic.stride;
  s.integer("stride", stride);
  require(stride >= 1 && stride <= std::numeric_limits<int>::max(), s.path("stride"), "must be a positive integer");
  ic.stride = static_cast<int>(stride);
  s.boolean("expect_closed", c.expect_closed);
  s.number("closure_tolerance", c.closure_tolerance);
  s.number("drift_tolerance", c.drift_tolerance);
  s.number("hamilton_tolerance", c.hamilton_tolerance);
  for (const char* key : {"closure_tolerance", "drift_tolerance", "hamilton_tolerance"}) {
    const double v = std::string_view(key) == "closure_tolerance" ? c.closure_tolerance
                     : std::string_view(key) == "drift_tolerance" ? c.drift_tolerance
                                                                  : c.hamilton_tolerance;
    require(std::isfinite(v) && v > 0.0, s.path(key), "must be positive");
  }
  if (const toml::node* n = s.get("initial")) {
    require(n->is_array_of_tables(), s.path("initial"), "expected an array of tables ([[integration.initial]])");
    const toml::array& a = *n->as_array();
    for (std::size_t i = 0; i < a.size(); ++i) {
      Section item(*a.get(i)->as_table(), s.path("initial") + "[" + std::to_string(i) + "]");
      c.initial.push_back(read_initial(item, metric));
    }
  }
  s.finish();
  return c;
}

VerificationConfig read_verification(Section& s) {
  VerificationConfig v;
  std::int64_t samples = static_cast<std::int64_t>(v.samples);
  std::int64_t seed = static_cast<std::int64_t>(v.seed);
  s.integer("samples", samples);
  s.integer("seed", seed);
  require(samples >= 1, s.path("samples"), "must be at least 1");
  require(seed >= 0, s.path("seed"), "must be non-negative");
  v.samples = static_cast<std::size_t>(samples);
  v.seed = static_cast<std::uint64_t>(seed);
  s.number("atol", v.atol);
  s.number("rtol", v.rtol);
  require(std::isfinite(v.atol) && v.atol >= 0.0, s.path("atol"), "must be non-negative");
  require(std::isfinite(v.rtol) && v.rtol >= 0.0, s.path("rtol"), "must be non-negative");
  require(v.atol > 0.0 || v.rtol > 0.0, s.path("atol"), "atol and rtol cannot both be zero");
  s.boolean("corrupt_source", v.corrupt_source);
  s.finish();
  return v;
}

ConvergenceConfig read_convergence(Section& s) {
  ConvergenceConfig c;
  if (s.has("steps")) {
    c.steps = s.numbers("steps");
    require(c.steps.size() >= 3, s.path("steps"), "needs at least three step sizes");
    for (double h : c.steps) require(std::isfinite(h) && h > 0.0, s.path("steps"), "step sizes must be positive");
  }
  s.number("expected_order", c.expected_order);
  s.number("order_tolerance", c.order_tolerance);
  require(std::isfinite(c.order_tolerance) && c.order_tolerance > 0.0, s.path("order_tolerance"), "must be positive");
  s.finish();
  return c;
}

OutputConfig read_output(Section& s) {
  OutputConfig o;
  s.string("dir", o.dir);
  s.string("format", o.format);
  require(!o.dir.empty(), s.path("dir"), "must not be empty");
  require(o.format == "csv", s.path("format"), "only csv is supported");
  s.finish();
  return o;
}

}  // namespace

ScenarioConfig parse_config(std::string_view text, std::string_view source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << e.description() << " (line " << e.source().begin.line << ", column " << e.source().begin.column << ")";
    throw ConfigError(std::string(source), msg.str());
  }
  Section top(root, "");
  ScenarioConfig c;
  const toml::table empty;

  const toml::table* metric = top.table("metric");
  Section ms(metric ? *metric : empty, "metric");
  c.metric = read_metric(ms);
  ms.finish();
  const Metric built = c.metric.build();

  const toml::table* lagrangian = top.table("lagrangian");
  Section ls(lagrangian ? *lagrangian : empty, "lagrangian");
  ls.number("m", c.m);
  require(std::isfinite(c.m) && c.m >= 0.0, "lagrangian.m", "must be finite and non-negative");
  ls.finish();

  const toml::table* integration = top.table("integration");
  Section is(integration ? *integration : empty, "integration");
  c.integration = read_integration(is, built);
  c.integration.integrator.m = c.m;
  try {
    c.integration.integrator.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("integration", e.what());
  }

  const toml::table* verification = top.table("verification");
  Section vs(verification ? *verification : empty, "verification");
  c.verification = read_verification(vs);

  const toml::table* convergence = top.table("convergence");
  Section cs(convergence ? *convergence : empty, "convergence");
  c.convergence = read_convergence(cs);

  const toml::table* output = top.table("output");
  Section os(output ? *output : empty, "output");
  c.output = read_output(os);

  top.finish();
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path);
}

namespace {

// Shortest round-trip form, always recognisable as a TOML float.
std::string toml_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string toml_string(const std::string& s) {
  std::ostringstream os;
  os << toml::value<std::string>(s);
  return os.str();
}

std::string toml_pair(const std::array<double, 2>& v) { return "[" + toml_double(v[0]) + ", " + toml_double(v[1]) + "]"; }

}  // namespace

std::string to_toml(const ScenarioConfig& c) {
  std::ostringstream o;
  o << "[metric]\n";
  if (!c.metric.builtin.empty()) {
    o << "builtin = " << toml_string(c.metric.builtin) << "\n";
  } else {
    o << "g00 = " << toml_string(c.metric.components[0]) << "\n";
    o << "g01 = " << toml_string(c.metric.components[1]) << "\n";
    o << "g11 = " << toml_string(c.metric.components[2]) << "\n";
    o << "signature = " << toml_string(std::string(to_string(c.metric.signature))) << "\n";
  }
  o << "orientation = " << c.metric.orientation << "\n\n";

  o << "[lagrangian]\nm = " << toml_double(c.m) << "\n\n";

  const IntegratorConfig& ic = c.integration.integrator;
  o << "[integration]\n";
  o << "method = " << toml_string(std::string(to_string(ic.method))) << "\n";
  o << "formulation = " << toml_string(std::string(to_string(ic.formulation))) << "\n";
  o << "step = " << toml_double(ic.step) << "\n";
  o << "atol = " << toml_double(ic.atol) << "\n";
  o << "rtol = " << toml_double(ic.rtol) << "\n";
  o << "min_step = " << toml_double(ic.min_step) << "\n";
  o << "t_start = " << toml_double(ic.t_start) << "\n";
  o << "t_end = " << toml_double(ic.t_end) << "\n";
  o << "stride = " << ic.stride << "\n";
  o << "expect_closed = " << (c.integration.expect_closed ? "true" : "false") << "\n";
  o << "closure_tolerance = " << toml_double(c.integration.closure_tolerance) << "\n";
  o << "drift_tolerance = " << toml_double(c.integration.drift_tolerance) << "\n";
  o << "hamilton_tolerance = " << toml_double(c.integration.hamilton_tolerance) << "\n";
  for (const InitialState& s : c.integration.initial) {
    o << "\n[[integration.initial]]\n";
    o << "x = " << toml_pair(s.x) << "\n";
    o << "u = " << toml_pair(s.u) << "\n";
    o << "w = " << toml_pair(s.w) << "\n";
  }
  o << "\n[verification]\n";
  o << "samples = " << c.verification.samples << "\n";
  o << "seed = " << c.verification.seed << "\n";
  o << "atol = " << toml_double(c.verification.atol) << "\n";
  o << "rtol = " << toml_double(c.verification.rtol) << "\n";
  o << "corrupt_source = " << (c.verification.corrupt_source ? "true" : "false") << "\n\n";

  o << "[convergence]\nsteps = [";
  for (std::size_t i = 0; i < c.convergence.steps.size(); ++i)
    o << (i ? ", " : "") << toml_double(c.convergence.steps[i]);
  o << "]\n";
  o << "expected_order = " << toml_double(c.convergence.expected_order) << "\n";
  o << "order_tolerance = " << toml_double(c.convergence.order_tolerance) << "\n\n";

  o << "[output]\ndir = " << toml_string(c.output.dir) << "\nformat = " << toml_string(c.output.format) << "\n";
  return o.str();
}

}  // namespace concircle::cli
