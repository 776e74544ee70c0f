#pragma once

#include <vector>

#include "planestack/ode.hpp"

namespace planestack {

// Value and d/dx pair for the confluent hypergeometric functions.
struct Hyp {
  double value;
  double deriv;
};

// Gamma on the real line. Poles (0, -1, -2, ...) throw std::domain_error.
double gamma_fn(double z);

// Kummer M(a,b,x). b must not be a non-positive integer. Series summation with
// compensated accumulation; for large positive x with moderate parameters the
// asymptotic expansion takes over. Overflow is thrown, never saturated.
Hyp kummer_m(double a, double b, double x);

// Tricomi U(a,b,x), x > 0 (else std::domain_error). Computed by integrating
// the hypergeometric ODE backward in log x from an asymptotic seed; the
// backward direction damps contamination by the growing solution. Every
// evaluation with x <= 200 is validated against the closed-form Wronskian
// with M; a failure throws std::runtime_error.
Hyp tricomi_u(double a, double b, double x);

// One backward sweep with dense output serving a whole ascending grid of
// positive abscissae. Equivalent to mapping tricomi_u over xs.
std::vector<Hyp> tricomi_u_batch(double a, double b,
                                 const std::vector<double>& xs);

namespace detail {
double pochhammer(double a, int n);
Hyp kummer_m_taylor(double a, double b, double x);
Hyp kummer_m_asymptotic(double a, double b, double x);
bool asymptotic_ok(double a, double b, double x);

// Dense solution curves of the hypergeometric ODE in t = log x.
// tricomi: seeded at large x, integrated down to x_lo (node order ascending
// in t). kummer: seeded by the series at small x, integrated up to x_hi.
// Curve values are the function itself, u(t) = F(e^t); chain rule gives
// F'(x) = u_t / x.
SampledCurve tricomi_logx_path(double a, double b, double x_lo, double x_hi);
SampledCurve kummer_logx_path(double a, double b, double x_lo, double x_hi);

// Relative Wronskian residual |M U' - M' U - W_closed| / |W_closed| at x.
double wronskian_residual(double a, double b, double x, const Hyp& u);
}  // namespace detail

}  // namespace planestack
