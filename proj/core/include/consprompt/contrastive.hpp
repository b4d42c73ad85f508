#pragma once

#include <span>
#include <string>
#include <vector>

#include "consprompt/backend.hpp"

namespace consprompt {

/// Terms in the InfoNCE denominator.
enum class Denominator {
  kWithPositive,   // exp(s_pos/tau) + sum_k exp(s_neg_k/tau)
  kNegativesOnly,  // sum_k exp(s_neg_k/tau)
};

/// How the prompt-level loss pairs its two terms.
enum class PromptPairing {
  kSymmetric,  // S_PC(i,j) + S_PC(j,i)
  kLiteral,    // S_BC(i,j) + S_PC(j,i), anchors usable at both levels only
};

struct ContrastiveConfig {
  double temperature = 0.07;
  /// Weight t of the batch-level loss.
  double batch_weight = 0.5;
  /// Weight a of the prompt-level loss.
  double prompt_weight = 0.5;
  Denominator denominator = Denominator::kWithPositive;
  PromptPairing prompt_pairing = PromptPairing::kSymmetric;

  void validate() const;
};

Denominator parse_denominator(std::string_view name);
std::string to_string(Denominator d);

/// Representations for one anchor: itself, its positive, its negatives.
struct AnchorGroup {
  Vector anchor;
  Vector positive;
  std::vector<Vector> negatives;

  /// Throws ContractError on empty negatives, mismatched dimensions,
  /// non-finite entries or zero-norm vectors.
  void validate() const;

  /// The inverted group: anchor and positive exchanged, same negatives.
  AnchorGroup swapped() const;
};

struct GroupGradient {
  Vector anchor;
  Vector positive;
  std::vector<Vector> negatives;
};

struct InfoNceResult {
  double loss = 0.0;
  GroupGradient grad;
};

/// -log( exp(s_pos/tau) / denominator ), where s are cosine similarities
/// between the anchor and every other vector of the group.
InfoNceResult info_nce(const AnchorGroup& group, double temperature,
                       Denominator denominator = Denominator::kWithPositive);

struct SymmetricLoss {
  double loss = 0.0;
  /// No groups were available; loss is 0 and contributes nothing.
  bool skipped = false;
  /// Gradient for each input group, in input order.
  std::vector<GroupGradient> grads;
};

/// (1/N) sum over groups of [S(anchor, positive) + S(positive, anchor)].
SymmetricLoss symmetric_loss(std::span<const AnchorGroup> groups, double temperature,
                             Denominator denominator = Denominator::kWithPositive);

/// l_ce + t * l_bc + a * l_pc
double joint_loss(double l_ce, double l_bc, double l_pc, const ContrastiveConfig& config);

/// Hidden state at the single mask position of `prompted`.
Vector represent(const MaskedLMBackend& backend, const TokenSequence& prompted);

}  // namespace consprompt
