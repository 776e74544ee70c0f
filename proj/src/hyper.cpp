#include "planestack/hyper.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace planestack {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_nonpositive_integer(double z) {
  return z <= 0.0 && z == std::floor(z);
}

struct Kahan {
  double s = 0.0, c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
};

}  // namespace

double gamma_fn(double z) {
  static const double coef[9] = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  if (is_nonpositive_integer(z))
    throw std::domain_error("gamma_fn: pole at non-positive integer");
  if (z < 0.5) {
    // reflection
    return kPi / (std::sin(kPi * z) * gamma_fn(1.0 - z));
  }
  const double zp = z - 1.0;
  double x = coef[0];
  for (int i = 1; i < 9; ++i) x += coef[i] / (zp + i);
  const double t = zp + 7.5;
  double g = std::sqrt(2.0 * kPi) * std::pow(t, zp + 0.5) * std::exp(-t) * x;
  if (!std::isfinite(g)) throw std::overflow_error("gamma_fn: overflow");
  return g;
}

namespace detail {

double pochhammer(double a, int n) {
  double p = 1.0;
  for (int i = 0; i < n; ++i) p *= a + i;
  return p;
}

namespace {

double m_taylor_value(double a, double b, double x) {
  Kahan sum;
  sum.add(1.0);
  double term = 1.0;
  double maxmag = 1.0;
  for (int n = 0; n < 200000; ++n) {
    term *= (a + n) * x / ((b + n) * (n + 1.0));
    if (term == 0.0) break;  // terminating polynomial case
    sum.add(term);
    maxmag = std::max(maxmag, std::abs(sum.s));
    if (std::abs(term) > 1e297 || std::abs(sum.s) > 1e297)
      throw std::overflow_error("kummer_m: overflow in series");
    if (n > 3 && std::abs(term) < 1e-17 * maxmag) return sum.s;
  }
  return sum.s;
}

double m_asymptotic_value(double a, double b, double x) {
  // M ~ Gamma(b)/Gamma(a) e^x x^{a-b} sum_k (b-a)_k (1-a)_k / (k! x^k)
  const double pref_exp = std::exp(x);
  const double pref_pow = std::pow(x, a - b);
  const double pref = gamma_fn(b) / gamma_fn(a) * pref_exp * pref_pow;
  if (!std::isfinite(pref)) throw std::overflow_error("kummer_m: overflow");
  Kahan sum;
  sum.add(1.0);
  double term = 1.0;
  for (int k = 1; k < 200; ++k) {
    double next = term * (b - a + k - 1.0) * (1.0 - a + k - 1.0) / (k * x);
    if (std::abs(next) >= std::abs(term)) break;  // divergence onset
    term = next;
    sum.add(term);
    if (std::abs(term) < 1e-16 * std::abs(sum.s)) break;
  }
  double v = pref * sum.s;
  if (!std::isfinite(v)) throw std::overflow_error("kummer_m: overflow");
  return v;
}

double m_value(double a, double b, double x) {
  if (is_nonpositive_integer(b))
    throw std::domain_error("kummer_m: b is a non-positive integer");
  if (is_nonpositive_integer(a)) return m_taylor_value(a, b, x);
  if (asymptotic_ok(a, b, x)) return m_asymptotic_value(a, b, x);
  return m_taylor_value(a, b, x);
}

}  // namespace

bool asymptotic_ok(double a, double b, double x) {
  if (x <= 40.0) return false;
  if (is_nonpositive_integer(a)) return false;
  const double w = std::max(std::abs(1.0 - a), std::abs(b - a));
  return w * w <= 0.5 * x;
}

Hyp kummer_m_taylor(double a, double b, double x) {
  return {m_taylor_value(a, b, x), (a / b) * m_taylor_value(a + 1, b + 1, x)};
}

Hyp kummer_m_asymptotic(double a, double b, double x) {
  return {m_asymptotic_value(a, b, x),
          (a / b) * m_asymptotic_value(a + 1, b + 1, x)};
}

double wronskian_residual(double a, double b, double x, const Hyp& u) {
  // M U' - M' U = -Gamma(b)/Gamma(a) x^{-b} e^x
  Hyp m = kummer_m(a, b, x);
  const double w_true =
      -gamma_fn(b) / gamma_fn(a) * std::pow(x, -b) * std::exp(x);
  const double w_num = m.value * u.deriv - m.deriv * u.value;
  return std::abs(w_num - w_true) / std::abs(w_true);
}

namespace {

// State for the hypergeometric ODE in t = log x:
//   u_tt = (x - b + 1) u_t + a x u,  x = e^t.
// Backward integration is phrased as forward integration of v(s) = u(t0 - s).

struct SeedU {
  double u, ut;
};

SeedU tricomi_seed(double a, double b, double x0) {
  // U ~ x^{-a} sum_{k=0..3} (a)_k (a-b+1)_k / (k! (-x)^k), and the matching
  // derivative series from U' = -a U(a+1, b+1, x).
  double s0 = 0.0, s1 = 0.0;
  for (int k = 0; k <= 3; ++k) {
    const double fk = pochhammer(a - b + 1.0, k) / pochhammer(1.0, k);
    s0 += pochhammer(a, k) * fk / std::pow(-x0, k);
    s1 += pochhammer(a + 1.0, k) * fk / std::pow(-x0, k);
  }
  const double xa = std::pow(x0, -a);
  if (!std::isfinite(xa)) throw std::overflow_error("tricomi_u: seed overflow");
  return {xa * s0, -a * xa * s1};  // u and u_t = x U'
}

double tricomi_x0(double a, double b, double x_hi) {
  const double c4 =
      std::abs(pochhammer(a, 4) * pochhammer(a - b + 1.0, 4)) / 24.0;
  double x0 = std::max(100.0, 4.0 * x_hi);
  if (c4 > 0) x0 = std::max(x0, std::pow(c4 * 1e10, 0.25) + 10.0);
  return x0;
}

}  // namespace

SampledCurve tricomi_logx_path(double a, double b, double x_lo, double x_hi) {
  if (!(x_lo > 0) || !(x_hi >= x_lo))
    throw std::domain_error("tricomi path: need 0 < x_lo <= x_hi");
  const double x0 = tricomi_x0(a, b, x_hi);
  const double t0 = std::log(x0);
  const double s_end = t0 - std::log(x_lo);
  SeedU seed = tricomi_seed(a, b, x0);
  Vec<2> y0;
  y0 << seed.u, -seed.ut;  // state is v(s) = u(t0 - s), so v_s = -u_t
  const double scale0 = std::max(std::abs(seed.u), std::abs(seed.ut));
  auto rhs = [a, b, t0](double s, const Vec<2>& y) {
    const double x = std::exp(t0 - s);
    Vec<2> d;
    d << y[1], -(x - b + 1.0) * y[1] + a * x * y[0];
    return d;
  };
  OdePath<2> path = integrate<2>(rhs, 0.0, s_end, y0, 1e-12, 1e-60 * scale0);
  // convert nodes from s back to t (ascending) and flip odd derivatives
  SampledCurve c;
  const int n = static_cast<int>(path.t.size());
  c.t.resize(n);
  c.node.resize(n);
  for (int i = 0; i < n; ++i) {
    const int j = n - 1 - i;
    c.t[i] = t0 - path.t[j];
    // v_s = -u_t, v_ss = u_tt
    c.node[i] = {path.y[j][0], -path.y[j][1], path.f[j][1]};
  }
  return c;
}

SampledCurve kummer_logx_path(double a, double b, double x_lo, double x_hi) {
  if (!(x_lo > 0) || !(x_hi >= x_lo))
    throw std::domain_error("kummer path: need 0 < x_lo <= x_hi");
  const double xs = std::min(x_lo, 1e-7);
  // 4-term series seed at xs; error O(xs^4)
  double u = 1.0, up = a / b;  // up accumulates M'(x) terms
  double mp = a / b;
  {
    double term = 1.0, dterm = a / b;
    for (int k = 1; k <= 3; ++k) {
      term *= (a + k - 1.0) * xs / ((b + k - 1.0) * k);
      u += term;
      dterm *= (a + k) * xs / ((b + k) * k);
      mp += dterm;
    }
    up = mp;
  }
  const double t_start = std::log(xs), t_end = std::log(x_hi);
  Vec<2> y0;
  y0 << u, xs * up;  // u and u_t = x M'
  auto rhs = [a, b](double t, const Vec<2>& y) {
    const double x = std::exp(t);
    Vec<2> d;
    d << y[1], (x - b + 1.0) * y[1] + a * x * y[0];
    return d;
  };
  OdePath<2> path = integrate<2>(rhs, t_start, t_end, y0, 1e-12, 1e-60);
  return SampledCurve::from_path(path);
}

}  // namespace detail

Hyp kummer_m(double a, double b, double x) {
  if (is_nonpositive_integer(b))
    throw std::domain_error("kummer_m: b is a non-positive integer");
  if (!is_nonpositive_integer(a) && detail::asymptotic_ok(a, b, x))
    return detail::kummer_m_asymptotic(a, b, x);
  return detail::kummer_m_taylor(a, b, x);
}

Hyp tricomi_u(double a, double b, double x) {
  if (!(x > 0)) throw std::domain_error("tricomi_u: requires x > 0");
  if (a == 0.0) return {1.0, 0.0};
  SampledCurve c = detail::tricomi_logx_path(a, b, x, x);
  const auto n = c.eval(std::log(x));
  Hyp u{n[0], n[1] / x};
  if (x <= 200.0 && !is_nonpositive_integer(a)) {
    if (detail::wronskian_residual(a, b, x, u) > 1e-8)
      throw std::runtime_error("tricomi_u: Wronskian validation failed");
  }
  return u;
}

std::vector<Hyp> tricomi_u_batch(double a, double b,
                                 const std::vector<double>& xs) {
  std::vector<Hyp> out(xs.size());
  if (xs.empty()) return out;
  double x_lo = xs[0], x_hi = xs[0];
  for (double x : xs) {
    if (!(x > 0)) throw std::domain_error("tricomi_u_batch: requires x > 0");
    x_lo = std::min(x_lo, x);
    x_hi = std::max(x_hi, x);
  }
  if (a == 0.0) {
    for (auto& h : out) h = {1.0, 0.0};
    return out;
  }
  SampledCurve c = detail::tricomi_logx_path(a, b, x_lo, x_hi);
  for (size_t i = 0; i < xs.size(); ++i) {
    const auto n = c.eval(std::log(xs[i]));
    out[i] = {n[0], n[1] / xs[i]};
    if (xs[i] <= 200.0 && !is_nonpositive_integer(a)) {
      if (detail::wronskian_residual(a, b, xs[i], out[i]) > 1e-8)
        throw std::runtime_error("tricomi_u_batch: Wronskian validation failed");
    }
  }
  return out;
}

}  // namespace planestack
