#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace planestack {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;

// Integration record: nodes with state and RHS value. For second-order scalar
// equations written as (u, u'), the node data (u, u', u'') supports quintic
// Hermite reconstruction at the integrator's own accuracy.
template <int N>
struct OdePath {
  std::vector<double> t;
  std::vector<Vec<N>> y;
  std::vector<Vec<N>> f;
};

// Dormand-Prince 5(4), adaptive step, FSAL. t1 may be on either side of t0.
template <int N, class F>
OdePath<N> integrate(F&& rhs, double t0, double t1, Vec<N> y0,
                     double rtol = 1e-12, double atol = 1e-300,
                     long max_steps = 4000000) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                          c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600,
                          e3 = 500.0 / 1113 - 7571.0 / 16695,
                          e4 = 125.0 / 192 - 393.0 / 640,
                          e5 = -2187.0 / 6784 + 92097.0 / 339200,
                          e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

  OdePath<N> out;
  const double dir = (t1 >= t0) ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  if (span == 0.0) {
    Vec<N> f0 = rhs(t0, y0);
    out.t = {t0};
    out.y = {y0};
    out.f = {f0};
    return out;
  }
  double t = t0;
  Vec<N> y = y0;
  Vec<N> k1 = rhs(t, y);
  out.t.push_back(t);
  out.y.push_back(y);
  out.f.push_back(k1);

  double h = dir * std::min(span / 10.0, 0.1);
  for (long step = 0; step < max_steps; ++step) {
    if (dir * (t + h - t1) > 0) h = t1 - t;
    Vec<N> k2 = rhs(t + c2 * h, Vec<N>(y + h * (a21 * k1)));
    Vec<N> k3 = rhs(t + c3 * h, Vec<N>(y + h * (a31 * k1 + a32 * k2)));
    Vec<N> k4 = rhs(t + c4 * h, Vec<N>(y + h * (a41 * k1 + a42 * k2 + a43 * k3)));
    Vec<N> k5 = rhs(t + c5 * h,
                    Vec<N>(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
    Vec<N> k6 = rhs(t + h, Vec<N>(y + h * (a61 * k1 + a62 * k2 + a63 * k3 +
                                           a64 * k4 + a65 * k5)));
    Vec<N> ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    Vec<N> k7 = rhs(t + h, ynew);
    Vec<N> err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double norm = 0.0;
    for (int i = 0; i < N; ++i) {
      double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      double q = err[i] / sc;
      norm += q * q;
    }
    norm = std::sqrt(norm / N);

    if (!(std::isfinite(norm))) throw std::runtime_error("ode: non-finite step");
    if (norm <= 1.0) {
      t += h;
      y = ynew;
      k1 = k7;  // FSAL
      out.t.push_back(t);
      out.y.push_back(y);
      out.f.push_back(k1);
      if (t == t1 || dir * (t1 - t) <= 1e-14 * span) {
        return out;
      }
    }
    double fac = 0.9 * std::pow(std::max(norm, 1e-10), -0.2);
    fac = std::min(5.0, std::max(0.2, fac));
    h *= fac;
    if (std::abs(h) < 1e-15 * span)
      throw std::runtime_error("ode: step size underflow");
  }
  throw std::runtime_error("ode: max step count exceeded");
}

// Quintic Hermite sampled curve for a scalar second-order equation.
// Nodes carry (u, u', u''); evaluation and first/second derivative anywhere
// in the covered interval at the integration's own accuracy.
struct SampledCurve {
  std::vector<double> t;                    // strictly increasing
  std::vector<std::array<double, 3>> node;  // u, u', u''

  static SampledCurve from_path(const OdePath<2>& p) {
    SampledCurve c;
    const bool fwd = p.t.back() >= p.t.front();
    const int n = static_cast<int>(p.t.size());
    c.t.resize(n);
    c.node.resize(n);
    for (int i = 0; i < n; ++i) {
      int s = fwd ? i : (n - 1 - i);
      c.t[i] = p.t[s];
      c.node[i] = {p.y[s][0], p.y[s][1], p.f[s][1]};
    }
    return c;
  }

  double tmin() const { return t.front(); }
  double tmax() const { return t.back(); }

  // value, first, second derivative
  std::array<double, 3> eval(double x) const {
    const double slack = 1e-9 * (t.back() - t.front());
    if (x < t.front() - slack || x > t.back() + slack)
      throw std::domain_error("SampledCurve: evaluation outside range");
    x = std::min(std::max(x, t.front()), t.back());
    auto it = std::upper_bound(t.begin(), t.end(), x);
    int i = static_cast<int>(it - t.begin()) - 1;
    if (i < 0) i = 0;
    if (i >= static_cast<int>(t.size()) - 1) i = static_cast<int>(t.size()) - 2;
    const double h = t[i + 1] - t[i];
    const double s = (x - t[i]) / h;
    const auto& a = node[i];
    const auto& b = node[i + 1];
    // quintic Hermite basis in s, scaled by h powers
    const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
    const double H0 = 1 - 10 * s3 + 15 * s4 - 6 * s5;
    const double H1 = s - 6 * s3 + 8 * s4 - 3 * s5;
    const double H2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
    const double G0 = 10 * s3 - 15 * s4 + 6 * s5;
    const double G1 = -4 * s3 + 7 * s4 - 3 * s5;
    const double G2 = 0.5 * s3 - s4 + 0.5 * s5;
    const double dH0 = (-30 * s2 + 60 * s3 - 30 * s4);
    const double dH1 = (1 - 18 * s2 + 32 * s3 - 15 * s4);
    const double dH2 = (s - 4.5 * s2 + 6 * s3 - 2.5 * s4);
    const double dG0 = (30 * s2 - 60 * s3 + 30 * s4);
    const double dG1 = (-12 * s2 + 28 * s3 - 15 * s4);
    const double dG2 = (1.5 * s2 - 4 * s3 + 2.5 * s4);
    const double ddH0 = (-60 * s + 180 * s2 - 120 * s3);
    const double ddH1 = (-36 * s + 96 * s2 - 60 * s3);
    const double ddH2 = (1 - 9 * s + 18 * s2 - 10 * s3);
    const double ddG0 = (60 * s - 180 * s2 + 120 * s3);
    const double ddG1 = (-24 * s + 84 * s2 - 60 * s3);
    const double ddG2 = (3 * s - 12 * s2 + 10 * s3);
    double u = H0 * a[0] + h * H1 * a[1] + h * h * H2 * a[2] + G0 * b[0] +
               h * G1 * b[1] + h * h * G2 * b[2];
    double du = (dH0 * a[0] + h * dH1 * a[1] + h * h * dH2 * a[2] + dG0 * b[0] +
                 h * dG1 * b[1] + h * h * dG2 * b[2]) /
                h;
    double ddu = (ddH0 * a[0] + h * ddH1 * a[1] + h * h * ddH2 * a[2] +
                  ddG0 * b[0] + h * ddG1 * b[1] + h * h * ddG2 * b[2]) /
                 (h * h);
    return {u, du, ddu};
  }

  double value(double x) const { return eval(x)[0]; }
  double deriv(double x) const { return eval(x)[1]; }
};

}  // namespace planestack
