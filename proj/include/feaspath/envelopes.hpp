#pragma once

// Concave envelopes of bilinear and trigonometric terms, and the bounds they
// induce on the basis residuals g and on psi over a box of states. Everything
// here is header-only and templated on the scalar type so the same
// expressions serve evaluation, sampling tests and row assembly.

#include <algorithm>
#include <array>
#include <cmath>

namespace feaspath::env {

/// Abscissa of the minimum of (sin t - t) / t^2 on t > 0. The derivative
/// vanishes where t cos(t/2) = 2 sin(t/2) cos(t/2); the global minimum is t = pi.
inline constexpr double kSineCoeffArgmin = M_PI;

template <typename Scalar>
Scalar bilinear_over(Scalar x, Scalar y, Scalar x0, Scalar y0) {
  const Scalar s = (x - x0) + (y - y0);
  return Scalar(0.25) * s * s + x0 * y + x * y0 - x0 * y0;
}

template <typename Scalar>
Scalar bilinear_under(Scalar x, Scalar y, Scalar x0, Scalar y0) {
  const Scalar d = (x - x0) - (y - y0);
  return Scalar(-0.25) * d * d + x0 * y + x * y0 - x0 * y0;
}

/// (sin t - t) / t^2, with the analytic limit 0 at t = 0.
template <typename Scalar>
Scalar sine_coefficient(Scalar t) {
  using std::abs;
  using std::sin;
  if (abs(t) < Scalar(1e-6)) return -t / Scalar(6);
  return (sin(t) - t) / (t * t);
}

/// Quadratic sine and cosine envelopes valid on [lo, hi], lo <= 0 <= hi:
///   t + a_under t^2 <= sin t <= t + a_over t^2,  1 - t^2/2 <= cos t <= 1.
template <typename Scalar>
struct TrigEnvelope {
  Scalar lo, hi;
  Scalar a_over;   // >= 0
  Scalar a_under;  // <= 0

  Scalar sin_over(Scalar t) const { return t + a_over * t * t; }
  Scalar sin_under(Scalar t) const { return t + a_under * t * t; }
  Scalar cos_over(Scalar) const { return Scalar(1); }
  Scalar cos_under(Scalar t) const { return Scalar(1) - t * t / Scalar(2); }
};

template <typename Scalar>
TrigEnvelope<Scalar> trig_envelopes(Scalar lo, Scalar hi) {
  using std::max;
  using std::min;
  const Scalar cap(kSineCoeffArgmin);
  TrigEnvelope<Scalar> e;
  e.lo = lo;
  e.hi = hi;
  // (sin t - t)/t^2 is odd and decreasing on [-cap, cap]; beyond that it
  // turns back, so clamping keeps the extreme value.
  e.a_under = hi > Scalar(0) ? sine_coefficient(min(hi, cap)) : Scalar(0);
  e.a_over = lo < Scalar(0) ? sine_coefficient(max(lo, -cap)) : Scalar(0);
  return e;
}

/// Data for one line that does not depend on the decision variables.
template <typename Scalar>
struct LineData {
  Scalar vf0, vt0;      // base magnitudes
  Scalar phi0;          // base angle difference
  bool f_pq, t_pq;      // endpoint is a PQ bus (state) vs generator bus (control)
  Scalar w_max;         // vf_max * vt_max
  TrigEnvelope<Scalar> trig;  // on the shifted operational angle range

  Scalar w0() const { return vf0 * vt0; }
  /// Linear part of psiC removed in gC (PQ-masked).
  Scalar mask_lin(Scalar vf, Scalar vt) const {
    return (f_pq ? vt0 * vf : Scalar(0)) + (t_pq ? vf0 * vt : Scalar(0));
  }
};

/// Box for one line: voltage intervals of both ends and the absolute angle
/// difference interval. Generator-bus ends have lo == hi.
template <typename Scalar>
struct LineBox {
  Scalar vf_lo, vf_hi, vt_lo, vt_hi, phi_lo, phi_hi;
};

/// Voltage corners of a box (duplicates when an interval is degenerate).
template <typename Scalar>
std::array<std::array<Scalar, 2>, 4> voltage_corners(const LineBox<Scalar>& b) {
  return {{{b.vf_lo, b.vt_lo}, {b.vf_lo, b.vt_hi}, {b.vf_hi, b.vt_lo},
           {b.vf_hi, b.vt_hi}}};
}

template <typename Scalar>
struct Bounds {
  Scalar lo, hi;
};

/// Over- and under-estimates of w = vf vt over the voltage box.
template <typename Scalar>
Bounds<Scalar> product_bounds(const LineData<Scalar>& d, const LineBox<Scalar>& b) {
  using std::max;
  using std::min;
  Bounds<Scalar> r{Scalar(INFINITY), Scalar(-INFINITY)};
  for (const auto& c : voltage_corners(b)) {
    r.hi = max(r.hi, bilinear_over(c[0], c[1], d.vf0, d.vt0));
    r.lo = min(r.lo, bilinear_under(c[0], c[1], d.vf0, d.vt0));
  }
  return r;
}

/// Bounds on gC = vf vt cos(phi - phi0) - mask_lin(vf, vt) over the box.
template <typename Scalar>
Bounds<Scalar> gc_bounds(const LineData<Scalar>& d, const LineBox<Scalar>& b) {
  using std::max;
  using std::min;
  const Scalar t_lo = b.phi_lo - d.phi0, t_hi = b.phi_hi - d.phi0;
  const Scalar half_sq = max(t_lo * t_lo, t_hi * t_hi) / Scalar(2);
  Bounds<Scalar> r{Scalar(INFINITY), Scalar(-INFINITY)};
  for (const auto& c : voltage_corners(b)) {
    const Scalar lin = d.mask_lin(c[0], c[1]);
    r.hi = max(r.hi, bilinear_over(c[0], c[1], d.vf0, d.vt0) - lin);
    r.lo = min(r.lo, bilinear_under(c[0], c[1], d.vf0, d.vt0) - lin -
                         d.w_max * half_sq);
  }
  return r;
}

/// Bounds on gS = vf vt sin(phi - phi0) - w0 phi over the box.
template <typename Scalar>
Bounds<Scalar> gs_bounds(const LineData<Scalar>& d, const LineBox<Scalar>& b) {
  using std::max;
  using std::min;
  const Bounds<Scalar> w = product_bounds(d, b);
  const Scalar w0 = d.w0();
  Bounds<Scalar> r{Scalar(INFINITY), Scalar(-INFINITY)};
  for (Scalar wc : {w.lo, w.hi}) {
    for (Scalar t : {b.phi_lo - d.phi0, b.phi_hi - d.phi0}) {
      const Scalar p = wc - w0 + t, m = wc - w0 - t;
      r.hi = max(r.hi, Scalar(0.25) * p * p + d.w_max * d.trig.a_over * t * t -
                           w0 * d.phi0);
      r.lo = min(r.lo, Scalar(-0.25) * m * m + d.w_max * d.trig.a_under * t * t -
                           w0 * d.phi0);
    }
  }
  return r;
}

/// psi bounds follow from the g bounds by adding back the linear part.
template <typename Scalar>
Bounds<Scalar> psic_bounds(const LineData<Scalar>& d, const LineBox<Scalar>& b) {
  const Bounds<Scalar> g = gc_bounds(d, b);
  return {g.lo + d.mask_lin(b.vf_lo, b.vt_lo), g.hi + d.mask_lin(b.vf_hi, b.vt_hi)};
}

template <typename Scalar>
Bounds<Scalar> psis_bounds(const LineData<Scalar>& d, const LineBox<Scalar>& b) {
  const Bounds<Scalar> g = gs_bounds(d, b);
  return {g.lo + d.w0() * b.phi_lo, g.hi + d.w0() * b.phi_hi};
}

/// Bounds on gQ for a bus: v^2 - 2 v0 v at PQ buses, v^2 at generator buses
/// (where lo == hi is the control value).
template <typename Scalar>
Bounds<Scalar> gq_bounds(Scalar v0, bool pq, Scalar lo, Scalar hi) {
  using std::max;
  if (pq) return {-v0 * v0, max(lo * lo - 2 * v0 * lo, hi * hi - 2 * v0 * hi)};
  return {2 * v0 * lo - v0 * v0, hi * hi};
}

template <typename Scalar>
Bounds<Scalar> psiq_bounds(Scalar v0, bool pq, Scalar lo, Scalar hi) {
  const Bounds<Scalar> g = gq_bounds(v0, pq, lo, hi);
  if (!pq) return g;
  return {g.lo + 2 * v0 * lo, g.hi + 2 * v0 * hi};
}

}  // namespace feaspath::env
