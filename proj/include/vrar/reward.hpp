#pragma once

#include "vrar/dsl.hpp"
#include "vrar/unicode.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vrar {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";

enum class SpecLabel { stv, mtdp };

std::string_view to_string(SpecLabel label) noexcept;

/// Per-sample verification contract: a single keyword (STV) or a
/// verification expression (MTDP). Exactly one of the two is populated.
struct RewardSpec {
  std::string id;
  SpecLabel label = SpecLabel::stv;
  std::string keyword;
  std::optional<dsl::Expr> expression;
  std::map<std::string, std::string> metadata;

  static RewardSpec stv(std::string id, std::string keyword);
  static RewardSpec mtdp(std::string id, dsl::Expr expression);

  /// Throws InvalidInput when the invariants do not hold.
  void check() const;
};

/// A rollout split at the think tags. When well_formed is false, think and
/// answer are empty and raw is preserved.
struct ModelResponse {
  std::string raw;
  std::string think;
  std::string answer;
  bool well_formed = false;
};

struct FormatConfig {
  std::vector<std::string> special_vocab = default_special_vocab();
  double chinese_ratio_threshold = 0.70;
  int max_special_repeat = 3;
  std::vector<unicode::CodepointRange> cjk_ranges = default_cjk_ranges();

  static std::vector<std::string> default_special_vocab();
  /// CJK Unified Ideographs Extension A and the base block.
  static std::vector<unicode::CodepointRange> default_cjk_ranges();

  bool is_cjk(char32_t cp) const noexcept;
  void check() const;
};

struct RewardWeights {
  double accuracy = 1.0;
  double format = 1.0;

  void check() const;
};

/// Everything a scorer needs besides the spec: loaded from one config file.
struct RewardConfig {
  FormatConfig format;
  RewardWeights weights;
};

struct RewardBreakdown {
  int accuracy = 0;
  int format = 0;
  double total = 0.0;
  std::string spec_id;

  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

ModelResponse parse_response(std::string_view raw);

int accuracy_reward(const RewardSpec& spec, std::string_view response_text);

double chinese_ratio(std::string_view text, const FormatConfig& cfg = {});

bool special_vocab_ok(const ModelResponse& response, const FormatConfig& cfg);

int format_reward(std::string_view raw, const FormatConfig& cfg = {});

RewardBreakdown total_reward(const RewardSpec& spec, std::string_view raw, const FormatConfig& cfg = {},
                             const RewardWeights& weights = {});

/// Reads a JSON config with keys special_vocab, chinese_ratio_threshold,
/// max_special_repeat, cjk_ranges and weights. Missing keys keep defaults.
RewardConfig load_reward_config(const std::filesystem::path& path);
RewardConfig reward_config_from_json_text(std::string_view json_text);

// Batch scoring kernels. score_batch parallelizes over items with OpenMP;
// score_batch_serial is the reference loop it is tested against.

struct ScoreItem {
  const RewardSpec* spec = nullptr;
  std::string_view response;
};

std::vector<RewardBreakdown> score_batch(std::span<const ScoreItem> items, const RewardConfig& cfg);
std::vector<RewardBreakdown> score_batch_serial(std::span<const ScoreItem> items, const RewardConfig& cfg);

}  // namespace vrar
