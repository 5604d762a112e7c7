#include "mvbd/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mvbd/error.hpp"

namespace mvbd {

TimeCurve::TimeCurve(double value) : constant_(true), value_(value) {}

TimeCurve TimeCurve::tabulated(std::vector<std::pair<double, double>> points) {
  if (points.empty()) throw InvalidArgument("tabulated curve needs at least one point");
  std::sort(points.begin(), points.end());
  for (std::size_t k = 1; k < points.size(); ++k)
    if (points[k].first == points[k - 1].first)
      throw InvalidArgument("tabulated curve has duplicate time " + std::to_string(points[k].first));
  for (const auto& [t, v] : points)
    if (!std::isfinite(t) || !std::isfinite(v)) throw InvalidArgument("tabulated curve must be finite");
  if (points.size() == 1) return TimeCurve(points.front().second);

  TimeCurve c;
  c.constant_ = false;
  for (const auto& p : points) c.knots_.push_back(p.first);
  c.fn_ = [pts = std::move(points)](double t) {
    if (t <= pts.front().first) return pts.front().second;
    if (t >= pts.back().first) return pts.back().second;
    auto it = std::upper_bound(pts.begin(), pts.end(), t,
                               [](double x, const auto& p) { return x < p.first; });
    const auto& [t1, v1] = *it;
    const auto& [t0, v0] = *(it - 1);
    double w = (t - t0) / (t1 - t0);
    return v0 + w * (v1 - v0);
  };
  return c;
}

TimeCurve TimeCurve::operator*(const TimeCurve& other) const {
  if (constant_ && other.constant_) return TimeCurve(value_ * other.value_);
  TimeCurve c;
  c.constant_ = false;
  c.knots_ = knots_;
  c.knots_.insert(c.knots_.end(), other.knots_.begin(), other.knots_.end());
  std::sort(c.knots_.begin(), c.knots_.end());
  c.fn_ = [a = *this, b = other](double t) { return a(t) * b(t); };
  return c;
}

namespace {

std::vector<double> probe_times(const std::vector<double>& knots, double t0, double t1) {
  std::vector<double> ts;
  constexpr int kSamples = 64;
  for (int k = 0; k <= kSamples; ++k) ts.push_back(t0 + (t1 - t0) * k / kSamples);
  for (double t : knots)
    if (t > t0 && t < t1) ts.push_back(t);
  return ts;
}

}  // namespace

double TimeCurve::max_on(double t0, double t1) const {
  if (constant_) return value_;
  double m = -INFINITY;
  for (double t : probe_times(knots_, t0, t1)) m = std::max(m, (*this)(t));
  return m;
}

double TimeCurve::min_on(double t0, double t1) const {
  if (constant_) return value_;
  double m = INFINITY;
  for (double t : probe_times(knots_, t0, t1)) m = std::min(m, (*this)(t));
  return m;
}

Rates eval_rates(const RateModel& model, double t, State i, const MeasureView& mu) {
  if (!(t >= 0.0) || i < 0) throw InvalidArgument("eval_rates needs t >= 0 and i >= 0");
  Rates r = model.rates(t, i, mu);
  auto bad = [](double x) { return !std::isfinite(x) || x < 0.0; };
  if (bad(r.death) || bad(r.birth)) {
    std::ostringstream os;
    os << model.describe() << ": invalid rates (a=" << r.death << ", b=" << r.birth
       << ") at t=" << t << ", i=" << i;
    throw NonFiniteRate(os.str());
  }
  if (i == 0 && r.death != 0.0)
    throw NonFiniteRate(model.describe() + ": death rate at state 0 must vanish");
  return r;
}

AffineMeanField::AffineMeanField(double beta0, double beta1, double alpha)
    : beta0_(beta0), beta1_(beta1), alpha_(alpha) {
  if (!(beta0 >= 0.0) || !(beta1 >= 0.0) || !(alpha > 0.0))
    throw InvalidArgument("affine family needs beta0 >= 0, beta1 >= 0, alpha > 0");
  declared_.K1 = TimeCurve(-alpha);
  declared_.K2 = TimeCurve(beta1);
  declared_.beta = TimeCurve(std::max(alpha, beta1));
  // p = 2 drift: 2[(i+1) b - (i-1) a] <= (3b0+b1+a) + (b0+b1-a) i^2 + 2 b1 m1^2,
  // from 2xy <= x^2 + y^2 applied to the three cross terms.
  declared_.beta_p = 2.0;
  declared_.beta1 = TimeCurve(3.0 * beta0 + beta1 + alpha);
  declared_.beta2 = TimeCurve(std::max(0.0, beta0 + beta1 - alpha));
  declared_.beta3 = TimeCurve(2.0 * beta1);
}

std::string AffineMeanField::describe() const {
  std::ostringstream os;
  os << "affine(beta0=" << beta0_ << ", beta1=" << beta1_ << ", alpha=" << alpha_ << ")";
  return os.str();
}

LogisticMeanField::LogisticMeanField(double lambda, double c2, double q, double epsilon, double kappa)
    : lambda_(lambda), c2_(c2), q_(q), epsilon_(epsilon), kappa_(kappa) {
  if (!(lambda >= 0.0) || !(c2 > 0.0) || !(q >= 1.0) || !(epsilon > 0.0 && epsilon < 1.0) ||
      !(kappa >= 0.0))
    throw InvalidArgument("logistic family needs lambda >= 0, c2 > 0, q >= 1, eps in (0,1), kappa >= 0");
  // i^q - j^q >= i - j for integers i > j >= 0 and q >= 1
  declared_.K1 = TimeCurve(-c2);
  declared_.K2 = TimeCurve(kappa);
  if (q == 1.0) {
    declared_.beta = TimeCurve(std::max(c2, kappa));
    declared_.beta1 = TimeCurve(3.0 * lambda + kappa + c2);
    declared_.beta2 = TimeCurve(std::max(0.0, lambda + kappa - c2));
    declared_.beta3 = TimeCurve(2.0 * kappa);
  }
}

Rates LogisticMeanField::rates(double, State i, const MeasureView& mu) const {
  double x = static_cast<double>(i);
  double death = q_ == 1.0 ? c2_ * x : (i == 0 ? 0.0 : c2_ * std::pow(x, q_));
  return {death, lambda_ + kappa_ * mu.mean};
}

std::string LogisticMeanField::describe() const {
  std::ostringstream os;
  os << "logistic(lambda=" << lambda_ << ", c2=" << c2_ << ", q=" << q_ << ", eps=" << epsilon_
     << ", kappa=" << kappa_ << ")";
  return os.str();
}

TimeModulated::TimeModulated(ModelPtr base, TimeCurve multiplier)
    : base_(std::move(base)), multiplier_(std::move(multiplier)) {
  if (!base_) throw InvalidArgument("time-modulated model needs a base model");
  if (multiplier_.min_on(0.0, 1e6) < 0.0) throw InvalidArgument("multiplier must be nonnegative");
  const auto& b = base_->declared();
  auto scale = [&](const std::optional<TimeCurve>& c) -> std::optional<TimeCurve> {
    if (!c) return std::nullopt;
    return *c * multiplier_;
  };
  declared_.K1 = scale(b.K1);
  declared_.K2 = scale(b.K2);
  declared_.K3 = scale(b.K3);
  declared_.theta = b.theta;
  declared_.c0 = b.c0;
  declared_.beta = scale(b.beta);
  declared_.beta1 = scale(b.beta1);
  declared_.beta2 = scale(b.beta2);
  declared_.beta3 = scale(b.beta3);
  declared_.beta_p = b.beta_p;
}

std::string TimeModulated::describe() const { return "modulated(" + base_->describe() + ")"; }

FunctionModel::FunctionModel(Fn fn, bool time_homogeneous, bool distribution_dependent,
                             std::string name, DeclaredConstants declared)
    : fn_(std::move(fn)),
      homogeneous_(time_homogeneous),
      dependent_(distribution_dependent),
      name_(std::move(name)) {
  declared_ = std::move(declared);
}

ModelPtr make_immigration_death(double lambda, double delta) {
  DeclaredConstants c;
  c.K1 = TimeCurve(-delta);
  c.K2 = TimeCurve(0.0);
  return std::make_shared<FunctionModel>(
      [lambda, delta](double, State i, const MeasureView&) {
        return Rates{delta * static_cast<double>(i), lambda};
      },
      true, false, "immigration-death(lambda=" + std::to_string(lambda) + ")", std::move(c));
}

}  // namespace mvbd
