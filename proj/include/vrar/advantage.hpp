#pragma once

#include "vrar/error.hpp"
#include "vrar/reward.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace vrar {

inline constexpr std::size_t kDefaultGroupSize = 7;
inline constexpr double kDefaultAdvantageEpsilon = 1e-6;

/// Rewards for the G rollouts of one prompt.
struct RolloutGroup {
  std::string prompt_id;
  std::vector<double> rewards;
};

struct AdvantageVector {
  std::string prompt_id;
  std::vector<double> advantages;
  bool degenerate = false;

  friend bool operator==(const AdvantageVector&, const AdvantageVector&) = default;
};

/// Raised by assemble_groups when a prompt does not have exactly G rollouts.
class IncompleteGroupError : public InvalidInput {
 public:
  IncompleteGroupError(std::string prompt_id, std::size_t found, std::size_t expected)
      : InvalidInput("prompt '" + prompt_id + "' has " + std::to_string(found) + " rollouts, expected " +
                     std::to_string(expected)),
        prompt_id_(std::move(prompt_id)) {}

  const std::string& prompt_id() const noexcept { return prompt_id_; }

 private:
  std::string prompt_id_;
};

/// a_i = (r_i - mean) / (std + epsilon) with the population standard
/// deviation. Groups whose std falls below epsilon yield exact zeros and are
/// flagged degenerate. Throws InvalidInput on fewer than two rewards, a
/// non-finite reward, or a non-positive epsilon.
AdvantageVector group_advantages(const RolloutGroup& group, double epsilon = kDefaultAdvantageEpsilon);

/// Groups scored rollouts by prompt id, preserving rollout order and the
/// order in which prompts first appear.
std::vector<RolloutGroup> assemble_groups(std::span<const std::pair<std::string, RewardBreakdown>> scored,
                                          std::size_t group_size = kDefaultGroupSize);

/// Independent groups normalized in parallel; results keep input order.
std::vector<AdvantageVector> batch_advantages(std::span<const RolloutGroup> groups,
                                              double epsilon = kDefaultAdvantageEpsilon);
std::vector<AdvantageVector> batch_advantages_serial(std::span<const RolloutGroup> groups,
                                                     double epsilon = kDefaultAdvantageEpsilon);

}  // namespace vrar
