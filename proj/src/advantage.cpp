#include "vrar/advantage.hpp"

#include <cmath>
#include <exception>
#include <unordered_map>

namespace vrar {

AdvantageVector group_advantages(const RolloutGroup& group, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidInput("epsilon must be a positive finite number");
  const auto& r = group.rewards;
  if (r.size() < 2) throw InvalidInput("group '" + group.prompt_id + "' needs at least two rewards");
  for (double v : r) {
    if (!std::isfinite(v)) throw InvalidInput("group '" + group.prompt_id + "' contains a non-finite reward");
  }

  const auto n = static_cast<double>(r.size());
  double mean = 0.0;
  for (double v : r) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : r) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = std::sqrt(var);

  AdvantageVector out;
  out.prompt_id = group.prompt_id;
  out.advantages.assign(r.size(), 0.0);
  if (sd < epsilon) {
    out.degenerate = true;
    return out;
  }
  const double scale = sd + epsilon;
  for (std::size_t i = 0; i < r.size(); ++i) out.advantages[i] = (r[i] - mean) / scale;
  return out;
}

std::vector<RolloutGroup> assemble_groups(std::span<const std::pair<std::string, RewardBreakdown>> scored,
                                          std::size_t group_size) {
  if (group_size < 2) throw InvalidInput("group size must be at least 2");
  std::vector<RolloutGroup> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& [prompt_id, breakdown] : scored) {
    auto [it, inserted] = index.try_emplace(prompt_id, groups.size());
    if (inserted) groups.push_back(RolloutGroup{prompt_id, {}});
    auto& rewards = groups[it->second].rewards;
    if (rewards.size() == group_size) throw IncompleteGroupError(prompt_id, group_size + 1, group_size);
    rewards.push_back(breakdown.total);
  }
  for (const auto& g : groups) {
    if (g.rewards.size() != group_size) throw IncompleteGroupError(g.prompt_id, g.rewards.size(), group_size);
  }
  return groups;
}

std::vector<AdvantageVector> batch_advantages_serial(std::span<const RolloutGroup> groups, double epsilon) {
  std::vector<AdvantageVector> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(group_advantages(g, epsilon));
  return out;
}

std::vector<AdvantageVector> batch_advantages(std::span<const RolloutGroup> groups, double epsilon) {
  std::vector<AdvantageVector> out(groups.size());
  const auto n = static_cast<std::ptrdiff_t>(groups.size());
  std::vector<std::exception_ptr> failures(groups.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      out[k] = group_advantages(groups[k], epsilon);
    } catch (...) {
      failures[k] = std::current_exception();
    }
  }
  // Report the first failing group in input order, as the serial loop would.
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return out;
}

}  // namespace vrar
