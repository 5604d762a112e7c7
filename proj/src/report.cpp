#include "mvbd/report.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace mvbd {

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void ExperimentReport::add_bound(std::string label, double t, double measured, double bound,
                                 double tol, double stderr_) {
  ReportPoint p{std::move(label), t, measured, bound, stderr_, tol, PointKind::Bound};
  p.margin = bound * (1.0 + tol) + 3.0 * stderr_ - measured;
  p.pass = p.margin >= 0.0 && std::isfinite(measured);
  points.push_back(std::move(p));
}

void ExperimentReport::add_equality(std::string label, double t, double measured, double target,
                                    double tol) {
  ReportPoint p{std::move(label), t, measured, target, 0.0, tol, PointKind::Equality};
  p.margin = tol - std::abs(measured - target);
  p.pass = p.margin >= 0.0;
  points.push_back(std::move(p));
}

void ExperimentReport::add_info(std::string label, double t, double value) {
  ReportPoint p{std::move(label), t, value, std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0,
                PointKind::Info};
  p.margin = std::numeric_limits<double>::quiet_NaN();
  points.push_back(std::move(p));
}

void ExperimentReport::note(const std::string& line) { notes.push_back(line); }

void ExperimentReport::exclude(const std::string& reason) {
  excluded = true;
  notes.push_back("excluded: " + reason);
}

bool ExperimentReport::passed() const { return excluded || failures() == 0; }

std::size_t ExperimentReport::failures() const {
  std::size_t n = 0;
  for (const auto& p : points)
    if (p.kind != PointKind::Info && !p.pass) ++n;
  return n;
}

double ExperimentReport::worst_margin() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : points)
    if (p.kind != PointKind::Info) m = std::min(m, p.margin);
  return m;
}

namespace {

const char* verdict(const ExperimentReport& r, const ReportPoint& p) {
  if (p.kind == PointKind::Info) return "info";
  if (r.excluded) return "excluded";
  return p.pass ? "pass" : "fail";
}

}  // namespace

void ExperimentReport::write_summary(std::ostream& os) const {
  for (const auto& p : points)
    os << id << ',' << p.label << ',' << fmt(p.measured) << ',' << fmt(p.bound) << ','
       << fmt(p.stderr_) << ',' << verdict(*this, p) << '\n';
}

void ExperimentReport::write_records(std::ostream& os) const {
  os << "[experiment]\nid = " << id << "\nmodel = " << model << "\nseed = " << seed
     << "\nexcluded = " << (excluded ? "true" : "false")
     << "\nverdict = " << (passed() ? "pass" : "fail") << '\n';
  for (const auto& n : notes) os << "note = " << n << '\n';
  for (const auto& p : points) {
    os << "\n[point]\nlabel = " << p.label << "\nt = " << fmt(p.t) << "\nmeasured = " << fmt(p.measured)
       << "\n" << (p.kind == PointKind::Equality ? "target" : "bound") << " = " << fmt(p.bound)
       << "\nstderr = " << fmt(p.stderr_) << "\ntol = " << fmt(p.tol) << "\nmargin = " << fmt(p.margin)
       << "\nverdict = " << verdict(*this, p) << '\n';
  }
}

}  // namespace mvbd
