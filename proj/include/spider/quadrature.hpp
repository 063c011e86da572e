// Adaptive Gauss-Kronrod (7-point Gauss-Legendre / 15-point Kronrod) panels.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

namespace spider {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
  int panels = 0;
};

namespace detail {

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
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gauss_kronrod(F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double kronrod = kKronrodWeights[7] * fc;
  double gauss = kGaussWeights[3] * fc;
  for (int k = 0; k < 7; ++k) {
    const double dx = h * kKronrodNodes[static_cast<std::size_t>(k)];
    const double s = f(c - dx) + f(c + dx);
    kronrod += kKronrodWeights[static_cast<std::size_t>(k)] * s;
    if (k % 2 == 1) gauss += kGaussWeights[static_cast<std::size_t>(k / 2)] * s;
  }
  return {a, b, kronrod * h, std::fabs((kronrod - gauss) * h)};
}

}  // namespace detail

/// Integrates f over [a, b], bisecting the worst panel until the summed
/// error estimate is below max(abs_tol, rel_tol * |value|).
template <class F>
QuadResult integrate(F&& f, double a, double b, double abs_tol = 1e-10, double rel_tol = 1e-10,
                     int max_panels = 2000) {
  QuadResult out;
  if (a == b) return out;
  std::priority_queue<detail::Panel> heap;
  detail::Panel first = detail::gauss_kronrod(f, a, b);
  double total = first.value, err = first.error;
  heap.push(first);
  out.panels = 1;
  while (err > std::max(abs_tol, rel_tol * std::fabs(total))) {
    if (out.panels >= max_panels) {
      out.converged = false;
      break;
    }
    const detail::Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const detail::Panel left = detail::gauss_kronrod(f, worst.a, mid);
    const detail::Panel right = detail::gauss_kronrod(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++out.panels;
  }
  // Re-sum to avoid drift from the incremental updates.
  double sum = 0.0, e = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    e += heap.top().error;
    heap.pop();
  }
  out.value = sum;
  out.error = e;
  return out;
}

/// Integral over [a, b] split at the given interior breakpoints.
template <class F>
QuadResult integrate_pieces(F&& f, std::vector<double> points, double abs_tol = 1e-10, double rel_tol = 1e-10) {
  QuadResult out;
  std::sort(points.begin(), points.end());
  for (std::size_t k = 0; k + 1 < points.size(); ++k) {
    if (points[k + 1] <= points[k]) continue;
    const QuadResult r = integrate(f, points[k], points[k + 1], abs_tol / static_cast<double>(points.size()), rel_tol);
    out.value += r.value;
    out.error += r.error;
    out.converged = out.converged && r.converged;
    out.panels += r.panels;
  }
  return out;
}

}  // namespace spider
