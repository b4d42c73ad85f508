#include "consprompt/contrastive.hpp"

#include <algorithm>
#include <cmath>

#include "consprompt/errors.hpp"

namespace consprompt {

void ContrastiveConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ConfigError("temperature must be positive");
  if (!(batch_weight >= 0.0) || !(prompt_weight >= 0.0) ||
      !std::isfinite(batch_weight) || !std::isfinite(prompt_weight))
    throw ConfigError("contrastive loss weights t and a must be non-negative");
}

Denominator parse_denominator(std::string_view name) {
  if (name == "with_positive") return Denominator::kWithPositive;
  if (name == "negatives_only") return Denominator::kNegativesOnly;
  throw ConfigError("unknown denominator mode '" + std::string(name) + "'");
}

std::string to_string(Denominator d) {
  return d == Denominator::kWithPositive ? "with_positive" : "negatives_only";
}

void AnchorGroup::validate() const {
  if (negatives.empty()) throw ContractError("anchor group has no negatives");
  const std::size_t d = anchor.size();
  auto check = [d](const Vector& v) {
    if (v.size() != d || d == 0)
      throw ContractError("anchor group vectors differ in dimension");
    if (!all_finite(v)) throw ContractError("anchor group contains non-finite values");
    if (norm(v) == 0.0) throw ContractError("anchor group contains a zero-norm vector");
  };
  check(anchor);
  check(positive);
  for (const auto& n : negatives) check(n);
}

AnchorGroup AnchorGroup::swapped() const { return {positive, anchor, negatives}; }

InfoNceResult info_nce(const AnchorGroup& group, double temperature,
                       Denominator denominator) {
  if (!(temperature > 0.0)) throw ContractError("temperature must be positive");
  group.validate();

  const std::size_t m = group.negatives.size();
  const double z_pos = cosine(group.anchor, group.positive) / temperature;
  std::vector<double> z_neg(m);
  for (std::size_t k = 0; k < m; ++k)
    z_neg[k] = cosine(group.anchor, group.negatives[k]) / temperature;

  // Log-sum-exp over the denominator terms.
  const bool with_pos = denominator == Denominator::kWithPositive;
  double peak = *std::max_element(z_neg.begin(), z_neg.end());
  if (with_pos) peak = std::max(peak, z_pos);
  double sum = with_pos ? std::exp(z_pos - peak) : 0.0;
  for (double z : z_neg) sum += std::exp(z - peak);
  const double lse = peak + std::log(sum);

  InfoNceResult out;
  out.loss = lse - z_pos;

  // dL/dz for each similarity, then chain through the cosines.
  const double w_pos = (with_pos ? std::exp(z_pos - lse) : 0.0) - 1.0;
  const std::size_t d = group.anchor.size();
  out.grad.anchor.assign(d, 0.0);
  out.grad.positive.assign(d, 0.0);
  out.grad.negatives.assign(m, Vector(d, 0.0));

  accumulate_cosine_grad(group.anchor, group.positive, w_pos / temperature, out.grad.anchor);
  accumulate_cosine_grad(group.positive, group.anchor, w_pos / temperature, out.grad.positive);
  for (std::size_t k = 0; k < m; ++k) {
    const double w = std::exp(z_neg[k] - lse) / temperature;
    accumulate_cosine_grad(group.anchor, group.negatives[k], w, out.grad.anchor);
    accumulate_cosine_grad(group.negatives[k], group.anchor, w, out.grad.negatives[k]);
  }
  return out;
}

SymmetricLoss symmetric_loss(std::span<const AnchorGroup> groups, double temperature,
                             Denominator denominator) {
  SymmetricLoss out;
  if (groups.empty()) {
    out.skipped = true;
    return out;
  }
  const double inv_n = 1.0 / static_cast<double>(groups.size());
  out.grads.reserve(groups.size());
  for (const auto& g : groups) {
    const auto forward = info_nce(g, temperature, denominator);
    const auto inverted = info_nce(g.swapped(), temperature, denominator);
    out.loss += (forward.loss + inverted.loss) * inv_n;

    GroupGradient grad = forward.grad;
    // The inverted term has anchor and positive exchanged.
    axpy(1.0, inverted.grad.positive, grad.anchor);
    axpy(1.0, inverted.grad.anchor, grad.positive);
    for (std::size_t k = 0; k < grad.negatives.size(); ++k)
      axpy(1.0, inverted.grad.negatives[k], grad.negatives[k]);
    for (double& v : grad.anchor) v *= inv_n;
    for (double& v : grad.positive) v *= inv_n;
    for (auto& n : grad.negatives)
      for (double& v : n) v *= inv_n;
    out.grads.push_back(std::move(grad));
  }
  return out;
}

double joint_loss(double l_ce, double l_bc, double l_pc, const ContrastiveConfig& config) {
  return l_ce + config.batch_weight * l_bc + config.prompt_weight * l_pc;
}

Vector represent(const MaskedLMBackend& backend, const TokenSequence& prompted) {
  return backend.encode_position(prompted, prompted.single_mask());
}

}  // namespace consprompt
