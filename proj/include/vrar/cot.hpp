#pragma once

#include "vrar/curation.hpp"
#include "vrar/judge.hpp"
#include "vrar/reward.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Cold-start SFT builder: turns raw long reasoning into a short persona-voiced
// monologue plus a regenerated reply, rendered as a think-tagged target.
namespace vrar::cot {

struct StripResult {
  std::string text;
  bool unbalanced = false;
};

/// Removes balanced （）, (), 【】 and [] spans (outermost first) and collapses
/// whitespace. Unbalanced or crossed brackets leave the text unchanged and
/// set the warning flag. Text without brackets is returned unchanged.
StripResult strip_meta_annotations(std::string_view cot);

/// CJK codepoints count one each; the remaining text counts one per
/// whitespace-separated segment.
std::size_t token_count(std::string_view text, const FormatConfig& cfg = {});

/// True if text contains any bracket character the stripper handles.
bool has_brackets(std::string_view text);

struct StepResult {
  std::string text;
  std::vector<std::string> warnings;
};

inline constexpr std::size_t kDefaultCompressThreshold = 500;

StepResult compress_cot(std::string_view cot, judge::JudgeSession& judge,
                        std::size_t threshold = kDefaultCompressThreshold);

StepResult style_adapt(std::string_view cot, std::string_view character_profile, judge::JudgeSession& judge);

/// Empty optional when the judge produced an empty reply.
std::optional<std::string> regenerate_response(std::string_view character_profile,
                                               std::span<const curation::Turn> dialogue_history,
                                               std::string_view refined_cot, judge::JudgeSession& judge);

struct ColdStartInput {
  std::string id;
  std::string character_profile;
  std::vector<curation::Turn> dialogue_history;
  std::string raw_cot;
};

struct ColdStartRecord {
  std::string id;
  std::string character_profile;
  std::vector<curation::Turn> dialogue_history;
  std::string refined_cot;
  std::string final_answer;
  std::string rendered_target;
  std::string backend;
  std::vector<std::string> template_ids;
};

struct ColdStartOptions {
  std::size_t compress_threshold = kDefaultCompressThreshold;
  /// Upper bound on the refined monologue's token count.
  std::size_t max_cot_tokens = kDefaultCompressThreshold;
  FormatConfig format;
};

struct AuditEntry {
  std::string stage;
  std::string detail;
};

struct ColdStartOutcome {
  std::optional<ColdStartRecord> record;
  std::vector<AuditEntry> audit;
  std::vector<judge::JudgeCall> calls;
};

std::string render_target(std::string_view refined_cot, std::string_view answer);

ColdStartOutcome build_cold_start_record(const ColdStartInput& input, judge::JudgeSession& judge,
                                         const ColdStartOptions& options = {});

/// Record-parallel over inputs; outcomes keep input order.
std::vector<ColdStartOutcome> run_cold_start(std::span<const ColdStartInput> inputs, judge::JudgeClient& client,
                                             const judge::TemplateSet& templates, const ColdStartOptions& options = {},
                                             bool parallel = true);

}  // namespace vrar::cot
