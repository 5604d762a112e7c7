#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mvbd {

enum class PointKind { Bound, Equality, Info };

struct ReportPoint {
  std::string label;
  double t = 0.0;
  double measured = 0.0;
  /// Upper bound for Bound points, target for Equality points.
  double bound = 0.0;
  double stderr_ = 0.0;
  double tol = 0.0;
  PointKind kind = PointKind::Bound;
  /// bound (1 + tol) + 3 stderr - measured, or tol - |measured - target|.
  double margin = 0.0;
  bool pass = true;
};

/// Measured quantities against theoretical bounds. A bound point passes iff
/// measured <= bound (1 + tol) + 3 stderr; an equality point iff
/// |measured - target| <= tol. Info points are recorded but never judged.
class ExperimentReport {
 public:
  ExperimentReport() = default;
  ExperimentReport(std::string id, std::string model, std::uint64_t seed = 0)
      : id(std::move(id)), model(std::move(model)), seed(seed) {}

  void add_bound(std::string label, double t, double measured, double bound, double tol,
                 double stderr_ = 0.0);
  void add_equality(std::string label, double t, double measured, double target, double tol);
  void add_info(std::string label, double t, double value);
  void note(const std::string& line);
  /// Marks the report as outside the verdict (a precondition failed).
  void exclude(const std::string& reason);

  bool passed() const;
  /// Smallest margin over judged points; +inf when there are none.
  double worst_margin() const;
  std::size_t failures() const;

  /// Rows `experiment,point,measured,bound,stderr,verdict` (no header).
  void write_summary(std::ostream& os) const;
  /// One record per point plus the report header and notes.
  void write_records(std::ostream& os) const;

  std::string id, model;
  std::uint64_t seed = 0;
  bool excluded = false;
  std::vector<ReportPoint> points;
  std::vector<std::string> notes;
};

inline constexpr const char* kSummaryHeader = "experiment,point,measured,bound,stderr,verdict";

/// Round-trip decimal rendering used by every text artifact.
std::string fmt(double x);

}  // namespace mvbd
