#pragma once

// Special functions, adaptive quadrature and a derivative-free scalar
// maximizer shared by every rate engine. Everything here is a pure function.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mdiqkd::numerics {

/// Raised when adaptive quadrature exhausts its subdivision budget.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double estimate, double error)
      : std::runtime_error(what), estimate_(estimate), error_(error) {}

  double estimate() const noexcept { return estimate_; }
  double error() const noexcept { return error_; }

 private:
  double estimate_;
  double error_;
};

struct QuadratureSpec {
  double absolute_tolerance = 1e-10;
  int max_subdivisions = 500;

  void validate() const {
    if (!(absolute_tolerance > 0.0))
      throw std::invalid_argument("QuadratureSpec: absolute_tolerance must be > 0");
    if (max_subdivisions < 1)
      throw std::invalid_argument("QuadratureSpec: max_subdivisions must be >= 1");
  }
};

/// H(x) = -x log2 x - (1-x) log2(1-x), with 0 log 0 = 0.
inline double binary_entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0))
    throw std::domain_error("binary_entropy: argument outside [0, 1]");
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

/// Modified Bessel function of the first kind, order zero, by its power
/// series sum_k (x/2)^{2k} / (k!)^2. All terms are positive, so the sum has no
/// cancellation; it is stopped once a term drops below 1e-16 of the total.
inline double bessel_i0(double x) {
  if (!std::isfinite(x) || x < 0.0)
    throw std::domain_error("bessel_i0: argument must be finite and >= 0");
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 10000; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k));
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

namespace detail {

// 7-point Gauss / 15-point Kronrod pair (QUADPACK qk15 abscissae and weights).
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

// Gauss weights for kKronrodNodes[1], [3], [5], [7].
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a;
  double b;
  double value;
  double error;
  double abs_value;  // integral of |f|, used for the roundoff floor

  bool operator<(const Segment& other) const { return error < other.error; }
};

template <class F>
Segment gauss_kronrod15(const F& f, double a, double b) {
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(centre);
  double kronrod = kKronrodWeights[7] * fc;
  double gauss = kGaussWeights[3] * fc;
  double abs_sum = kKronrodWeights[7] * std::abs(fc);
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const double f1 = f(centre - dx);
    const double f2 = f(centre + dx);
    kronrod += kKronrodWeights[j] * (f1 + f2);
    abs_sum += kKronrodWeights[j] * (std::abs(f1) + std::abs(f2));
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * (f1 + f2);
  }
  const double width = std::abs(half);
  return Segment{a, b, kronrod * half, std::abs((kronrod - gauss) * half), abs_sum * width};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) quadrature of f over [a, b]. The
/// segment with the largest error estimate is bisected until the summed
/// estimate is within spec.absolute_tolerance, or within the roundoff floor
/// of the integrand when the tolerance is below what doubles can resolve.
template <class F>
double integrate_1d(const F& f, double a, double b, const QuadratureSpec& spec = {}) {
  spec.validate();
  if (!(a <= b) || !std::isfinite(a) || !std::isfinite(b))
    throw std::invalid_argument("integrate_1d: require finite a <= b");
  if (a == b) return 0.0;

  std::priority_queue<detail::Segment> work;
  detail::Segment first = detail::gauss_kronrod15(f, a, b);
  double total = first.value;
  double total_error = first.error;
  double total_abs = first.abs_value;
  work.push(first);

  constexpr double kRoundoff = 50.0 * std::numeric_limits<double>::epsilon();
  int segments = 1;
  while (total_error > spec.absolute_tolerance && total_error > kRoundoff * total_abs) {
    if (!std::isfinite(total))
      throw ConvergenceError("integrate_1d: non-finite integrand", total, total_error);
    if (segments >= spec.max_subdivisions)
      throw ConvergenceError("integrate_1d: subdivision limit reached on [" + std::to_string(a) +
                                 ", " + std::to_string(b) + "]",
                             total, total_error);
    detail::Segment worst = work.top();
    work.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    detail::Segment left = detail::gauss_kronrod15(f, worst.a, mid);
    detail::Segment right = detail::gauss_kronrod15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_error += left.error + right.error - worst.error;
    total_abs += left.abs_value + right.abs_value - worst.abs_value;
    work.push(left);
    work.push(right);
    ++segments;
  }

  // Re-sum from the segments to shed the drift of the running update.
  double resummed = 0.0;
  while (!work.empty()) {
    resummed += work.top().value;
    work.pop();
  }
  return resummed;
}

/// Axis-aligned integration rectangle: first argument in [first_lo,
/// first_hi], second in [second_lo, second_hi].
struct Rectangle {
  double first_lo;
  double first_hi;
  double second_lo;
  double second_hi;
};

/// Nested adaptive quadrature of f(first, second) over a rectangle. Half of
/// the tolerance goes to the outer integral and half, spread over the outer
/// width, to each inner integral.
template <class F>
double integrate_2d(const F& f, const Rectangle& region, const QuadratureSpec& spec = {}) {
  spec.validate();
  if (!std::isfinite(region.first_lo) || !std::isfinite(region.first_hi) ||
      !std::isfinite(region.second_lo) || !std::isfinite(region.second_hi))
    throw std::invalid_argument("integrate_2d: region bounds must be finite");
  const double outer_width = region.first_hi - region.first_lo;
  if (outer_width == 0.0) return 0.0;

  QuadratureSpec outer = spec;
  outer.absolute_tolerance = 0.5 * spec.absolute_tolerance;
  QuadratureSpec inner = spec;
  inner.absolute_tolerance = 0.5 * spec.absolute_tolerance / std::abs(outer_width);

  auto slice = [&](double first) {
    return integrate_1d([&](double second) { return f(first, second); }, region.second_lo,
                        region.second_hi, inner);
  };
  return integrate_1d(slice, region.first_lo, region.first_hi, outer);
}

struct Maximum {
  double argmax;
  double value;
};

/// Derivative-free maximization on [lo, hi]. A coarse grid (log-spaced when
/// lo > 0) picks the best bracket, then golden-section search narrows it
/// until the bracket is no wider than 2 * tolerance.
template <class F>
Maximum maximize_scalar(const F& f, double lo, double hi, double tolerance,
                        int grid_points = 64) {
  if (!(lo < hi)) throw std::invalid_argument("maximize_scalar: require lo < hi");
  if (!(tolerance > 0.0)) throw std::invalid_argument("maximize_scalar: tolerance must be > 0");
  grid_points = std::max(grid_points, 64);

  const bool log_grid = lo > 0.0;
  std::vector<double> grid(static_cast<std::size_t>(grid_points));
  for (int i = 0; i < grid_points; ++i) {
    const double t = static_cast<double>(i) / (grid_points - 1);
    grid[static_cast<std::size_t>(i)] =
        log_grid ? lo * std::pow(hi / lo, t) : lo + t * (hi - lo);
  }
  grid.front() = lo;
  grid.back() = hi;

  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = f(grid[i]);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }

  double a = grid[best == 0 ? 0 : best - 1];
  double b = grid[std::min(best + 1, grid.size() - 1)];
  Maximum result{grid[best], best_value};

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int iter = 0; iter < 500 && (b - a) > 2.0 * tolerance; ++iter) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double mid = 0.5 * (a + b);
  const double fmid = f(mid);
  for (const auto& [x, v] : {std::pair{mid, fmid}, std::pair{c, fc}, std::pair{d, fd}}) {
    if (v > result.value) result = Maximum{x, v};
  }
  return result;
}

}  // namespace mdiqkd::numerics
