#include "concircle/cli/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <tuple>

namespace concircle::cli {

namespace {

constexpr const char* kEol = "\r\n";

// Orders "point 2" before "point 10".
std::tuple<std::string, double, std::string> location_key(const std::string& location) {
  const auto space = location.find_last_of(' ');
  const std::string head = space == std::string::npos ? "" : location.substr(0, space);
  const std::string tail = space == std::string::npos ? location : location.substr(space + 1);
  double v = 0.0;
  const auto r = std::from_chars(tail.data(), tail.data() + tail.size(), v);
  if (r.ec != std::errc() || r.ptr != tail.data() + tail.size()) return {location, 0.0, ""};
  return {head, v, tail};
}

}  // namespace

void Report::add(const std::string& check, const ResidualReport& residuals) {
  const ResidualRow* worst = residuals.worst();
  if (worst == nullptr) {
    // Every residual simplified to zero before evaluation.
    add({check, "all", 0.0, residuals.tolerance.atol});
    return;
  }
  add({check, "point " + std::to_string(worst->point), std::fabs(worst->value),
       residuals.tolerance.atol + residuals.tolerance.rtol * worst->scale});
}

std::vector<ReportRow> Report::sorted() const {
  std::vector<ReportRow> out = rows_;
  std::stable_sort(out.begin(), out.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.check != b.check) return a.check < b.check;
    return location_key(a.location) < location_key(b.location);
  });
  return out;
}

bool Report::passed() const { return failures() == 0; }

std::size_t Report::failures() const {
  return static_cast<std::size_t>(std::count_if(rows_.begin(), rows_.end(), [](const ReportRow& r) { return !r.passed(); }));
}

void Report::write_csv(std::ostream& out) const {
  out << "check,location,residual,tolerance,verdict" << kEol;
  for (const ReportRow& r : sorted())
    out << csv_field(r.check) << ',' << csv_field(r.location) << ',' << format_double(r.residual) << ','
        << format_double(r.tolerance) << ',' << (r.passed() ? "pass" : "fail") << kEol;
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return {buf, r.ptr};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_trajectory_csv(std::ostream& out, std::span<const TrajectorySample> samples) {
  out << "t,x0,x1,u0,u1,w0,w1,speed,k,H,S01" << kEol;
  for (const TrajectorySample& s : samples) {
    const double row[] = {s.t,   s.x[0],  s.x[1],      s.u[0],     s.u[1], s.w[0],
                          s.w[1], s.speed, s.curvature, s.hamilton, s.s01};
    for (std::size_t i = 0; i < std::size(row); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << kEol;
  }
}

}  // namespace concircle::cli
