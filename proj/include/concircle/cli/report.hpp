#pragma once

// Check reports and CSV serialization. CSV follows RFC 4180 (CRLF line ends,
// quoted fields where needed) with doubles at 17 significant digits.

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "concircle/integrate.hpp"
#include "concircle/jet.hpp"

namespace concircle::cli {

struct ReportRow {
  std::string check;
  /// Point index or time of the worst residual.
  std::string location;
  double residual = 0.0;
  double tolerance = 0.0;

  bool passed() const noexcept { return residual <= tolerance; }
};

class Report {
 public:
  void add(ReportRow row) { rows_.push_back(std::move(row)); }
  /// One row for a residual batch: the entry with the largest tolerance ratio.
  void add(const std::string& check, const ResidualReport& residuals);

  /// Rows sorted by check name, then location.
  std::vector<ReportRow> sorted() const;
  bool passed() const;
  std::size_t failures() const;
  void write_csv(std::ostream& out) const;

 private:
  std::vector<ReportRow> rows_;
};

/// 17 significant digits, '.' decimal separator, independent of the locale.
std::string format_double(double v);
std::string csv_field(const std::string& s);

/// Header t,x0,x1,u0,u1,w0,w1,speed,k,H,S01.
void write_trajectory_csv(std::ostream& out, std::span<const TrajectorySample> samples);

}  // namespace concircle::cli
