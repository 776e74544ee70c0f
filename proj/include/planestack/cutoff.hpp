#pragma once

#include <cmath>
#include <stdexcept>

namespace planestack {

// Smooth transition built from f(x) = exp(-1/x) (x > 0, else 0):
//   smooth_step(t) = f(1+t) / (f(1+t) + f(1-t)),
// identically 0 for t <= -1 and 1 for t >= 1, strictly increasing between,
// with smooth_step(t) - 1/2 odd.
inline double bump_f(double x) { return x > 0 ? std::exp(-1.0 / x) : 0.0; }

inline double smooth_step(double t) {
  if (t <= -1) return 0.0;
  if (t >= 1) return 1.0;
  const double F = bump_f(1 + t), G = bump_f(1 - t);
  return F / (F + G);
}

inline double smooth_step_d(double t) {
  if (t <= -1 || t >= 1) return 0.0;
  const double F = bump_f(1 + t), G = bump_f(1 - t);
  const double Fp = F / ((1 + t) * (1 + t));
  const double Gp = -G / ((1 - t) * (1 - t));
  const double S = F + G;
  return (Fp * G - F * Gp) / (S * S);
}

inline double smooth_step_dd(double t) {
  if (t <= -1 || t >= 1) return 0.0;
  const double u = 1 + t, v = 1 - t;
  const double F = bump_f(u), G = bump_f(v);
  const double Fp = F / (u * u);
  const double Gp = -G / (v * v);
  const double Fpp = F * (1.0 / (u * u * u * u) - 2.0 / (u * u * u));
  const double Gpp = G * (1.0 / (v * v * v * v) - 2.0 / (v * v * v));
  const double S = F + G, Sp = Fp + Gp;
  const double num = Fp * G - F * Gp;
  const double nump = Fpp * G - F * Gpp;
  return (nump * S - 2.0 * num * Sp) / (S * S * S);
}

// Transition chart on [a, b]: value 0 at the a side, 1 at the b side, with the
// transition confined to the middle third. Works for either ordering of a, b;
// cut_chart(a,b)(t) + cut_chart(b,a)(t) == 1.
struct CutChart {
  double a, b;
  double arg(double t) const { return 3.0 * (2.0 * t - a - b) / (b - a); }
  double operator()(double t) const { return smooth_step(arg(t)); }
  double d(double t) const { return smooth_step_d(arg(t)) * 6.0 / (b - a); }
  double dd(double t) const {
    const double s = 6.0 / (b - a);
    return smooth_step_dd(arg(t)) * s * s;
  }
};

// Interval cutoff: 0 near a, 1 near b, transition in the middle third.
inline double cutoff(double a, double b, double t) {
  if (a == b) throw std::domain_error("cutoff: empty transition interval");
  return CutChart{a, b}(t);
}

// Two-sided blend keyed by a scalar field d: returns f0 where d is on the a
// side, f1 on the b side.
inline double blend(double a, double b, double d, double f0, double f1) {
  const double w1 = CutChart{a, b}(d);
  return f1 * w1 + f0 * (1.0 - w1);
}

}  // namespace planestack
