#include "consprompt/linalg.hpp"

#include <cassert>
#include <cmath>

namespace consprompt {

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

void accumulate_cosine_grad(std::span<const double> a,
                            std::span<const double> b, double scale,
                            std::span<double> grad_a) {
  const double na = norm(a);
  const double nb = norm(b);
  const double cos = dot(a, b) / (na * nb);
  const double inv = 1.0 / (na * nb);
  const double self = cos / (na * na);
  for (std::size_t i = 0; i < a.size(); ++i)
    grad_a[i] += scale * (b[i] * inv - a[i] * self);
}

bool all_finite(std::span<const double> a) {
  for (double x : a)
    if (!std::isfinite(x)) return false;
  return true;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace consprompt
