#pragma once

#include <cstddef>
#include <vector>

namespace caplab {

// Gauss-Legendre rule on [-1, 1], nodes ascending.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Computed by Newton iteration on the Legendre recurrence; accurate to
// machine precision for the sizes used here (<= 64).
const GaussRule& gauss_legendre(int n);

// Nodes/weights mapped to [a, b].
GaussRule gauss_legendre_on(int n, double a, double b);

// Integrate a callable over [a, b] with an n-point rule.
template <class F>
double gauss_integrate(const F& f, double a, double b, int n) {
  const GaussRule& rule = gauss_legendre(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return half * sum;
}

}  // namespace caplab
