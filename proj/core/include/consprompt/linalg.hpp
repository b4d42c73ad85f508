#pragma once

#include <span>
#include <vector>

namespace consprompt {

using Vector = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

/// Cosine similarity. Returns 0 when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

/// Accumulates d cos(a,b) / d a, scaled by `scale`, into `grad_a`.
/// Both vectors must have non-zero norm.
void accumulate_cosine_grad(std::span<const double> a,
                            std::span<const double> b, double scale,
                            std::span<double> grad_a);

bool all_finite(std::span<const double> a);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

}  // namespace consprompt
