#pragma once

// Randomized sandwich checks for the envelopes and the box bounds built
// from them. Each check returns the largest violation seen (0 when sound).

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "feaspath/envelopes.hpp"

namespace testing {

namespace env = feaspath::env;

struct EnvelopeCheck {
  std::string name;
  std::function<double(std::mt19937&)> trial;  // violation of one random instance
};

inline double uniform(std::mt19937& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct LineSample {
  env::LineData<double> d;
  env::LineBox<double> b;
  double vf, vt, phi;  // point inside the box
};

/// Random line: voltage limits [0.9, 1.1], angle limits inside [-pi, pi]
/// containing the base angle, a random sub-box and a point in it.
inline LineSample random_line(std::mt19937& rng) {
  LineSample s;
  const double vmin = 0.9, vmax = 1.1;
  const double amin = uniform(rng, -M_PI, -0.05), amax = uniform(rng, 0.05, M_PI);
  auto& d = s.d;
  d.vf0 = uniform(rng, vmin, vmax);
  d.vt0 = uniform(rng, vmin, vmax);
  d.phi0 = uniform(rng, amin, amax);
  d.f_pq = rng() % 2;
  d.t_pq = rng() % 2;
  d.w_max = vmax * vmax;
  d.trig = env::trig_envelopes(amin - d.phi0, amax - d.phi0);

  auto interval = [&](double lo, double hi, bool degenerate, double& a, double& b) {
    if (degenerate) {
      a = b = uniform(rng, lo, hi);
      return;
    }
    a = uniform(rng, lo, hi);
    b = uniform(rng, lo, hi);
    if (a > b) std::swap(a, b);
  };
  interval(vmin, vmax, !d.f_pq, s.b.vf_lo, s.b.vf_hi);
  interval(vmin, vmax, !d.t_pq, s.b.vt_lo, s.b.vt_hi);
  interval(amin, amax, false, s.b.phi_lo, s.b.phi_hi);
  s.vf = uniform(rng, s.b.vf_lo, s.b.vf_hi);
  s.vt = uniform(rng, s.b.vt_lo, s.b.vt_hi);
  s.phi = uniform(rng, s.b.phi_lo, s.b.phi_hi);
  return s;
}

inline double outside(double value, double lo, double hi) {
  return std::max({0.0, lo - value, value - hi});
}

/// Envelope types and box-bound types, each paired with a random trial.
inline std::vector<EnvelopeCheck> envelope_checks() {
  std::vector<EnvelopeCheck> c;
  c.push_back({"bilinear over/under", [](std::mt19937& rng) {
                 const double x = uniform(rng, 0.5, 1.5), y = uniform(rng, 0.5, 1.5);
                 const double x0 = uniform(rng, 0.5, 1.5), y0 = uniform(rng, 0.5, 1.5);
                 return outside(x * y, env::bilinear_under(x, y, x0, y0),
                                env::bilinear_over(x, y, x0, y0));
               }});
  c.push_back({"sine over/under", [](std::mt19937& rng) {
                 const double lo = uniform(rng, -2 * M_PI, 0.0), hi = uniform(rng, 0.0, 2 * M_PI);
                 const auto e = env::trig_envelopes(lo, hi);
                 const double t = uniform(rng, lo, hi);
                 return outside(std::sin(t), e.sin_under(t), e.sin_over(t));
               }});
  c.push_back({"cosine over/under", [](std::mt19937& rng) {
                 const double lo = uniform(rng, -2 * M_PI, 0.0), hi = uniform(rng, 0.0, 2 * M_PI);
                 const auto e = env::trig_envelopes(lo, hi);
                 const double t = uniform(rng, lo, hi);
                 return outside(std::cos(t), e.cos_under(t), e.cos_over(t));
               }});
  c.push_back({"product bounds", [](std::mt19937& rng) {
                 const LineSample s = random_line(rng);
                 const auto b = env::product_bounds(s.d, s.b);
                 return outside(s.vf * s.vt, b.lo, b.hi);
               }});
  c.push_back({"gC bounds", [](std::mt19937& rng) {
                 const LineSample s = random_line(rng);
                 const auto b = env::gc_bounds(s.d, s.b);
                 const double g = s.vf * s.vt * std::cos(s.phi - s.d.phi0) - s.d.mask_lin(s.vf, s.vt);
                 return outside(g, b.lo, b.hi);
               }});
  c.push_back({"gS bounds", [](std::mt19937& rng) {
                 const LineSample s = random_line(rng);
                 const auto b = env::gs_bounds(s.d, s.b);
                 const double g = s.vf * s.vt * std::sin(s.phi - s.d.phi0) - s.d.w0() * s.phi;
                 return outside(g, b.lo, b.hi);
               }});
  c.push_back({"psiC bounds", [](std::mt19937& rng) {
                 const LineSample s = random_line(rng);
                 const auto b = env::psic_bounds(s.d, s.b);
                 return outside(s.vf * s.vt * std::cos(s.phi - s.d.phi0), b.lo, b.hi);
               }});
  c.push_back({"psiS bounds", [](std::mt19937& rng) {
                 const LineSample s = random_line(rng);
                 const auto b = env::psis_bounds(s.d, s.b);
                 return outside(s.vf * s.vt * std::sin(s.phi - s.d.phi0), b.lo, b.hi);
               }});
  auto bus = [](std::mt19937& rng, double& v0, bool& pq, double& lo, double& hi, double& v) {
    v0 = uniform(rng, 0.9, 1.1);
    pq = rng() % 2;
    lo = uniform(rng, 0.9, 1.1);
    hi = pq ? uniform(rng, 0.9, 1.1) : lo;
    if (lo > hi) std::swap(lo, hi);
    v = uniform(rng, lo, hi);
  };
  c.push_back({"gQ bounds", [bus](std::mt19937& rng) {
                 double v0, lo, hi, v;
                 bool pq;
                 bus(rng, v0, pq, lo, hi, v);
                 const auto b = env::gq_bounds(v0, pq, lo, hi);
                 return outside(pq ? v * v - 2 * v0 * v : v * v, b.lo, b.hi);
               }});
  c.push_back({"psiQ bounds", [bus](std::mt19937& rng) {
                 double v0, lo, hi, v;
                 bool pq;
                 bus(rng, v0, pq, lo, hi, v);
                 const auto b = env::psiq_bounds(v0, pq, lo, hi);
                 return outside(v * v, b.lo, b.hi);
               }});
  return c;
}

}  // namespace testing
