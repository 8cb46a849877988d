#pragma once

#include "vrar/advantage.hpp"
#include "vrar/cot.hpp"
#include "vrar/curation.hpp"
#include "vrar/evaluation.hpp"
#include "vrar/reward.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

// JSONL record schemas shared by the CLI and the service. Every writer emits
// sorted keys and unescaped UTF-8, so outputs are byte-stable.
namespace vrar::data {

using Json = nlohmann::json;

struct JsonLine {
  std::size_t line = 0;  // 1-based
  Json value;
};

/// Parses every non-blank line; SchemaError carries the 1-based line number.
std::vector<JsonLine> read_jsonl(const std::filesystem::path& path);
std::vector<JsonLine> parse_jsonl(std::string_view text);

/// Applies convert to each line, rethrowing failures as SchemaError.
template <class Convert>
auto convert_lines(const std::vector<JsonLine>& lines, Convert convert) {
  std::vector<decltype(convert(lines.front().value))> out;
  out.reserve(lines.size());
  for (const auto& l : lines) {
    try {
      out.push_back(convert(l.value));
    } catch (const std::exception& e) {
      throw SchemaError(l.line, e.what());
    }
  }
  return out;
}

std::string dump_line(const Json& j);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& lines);

/// Accepts {id, type|label: "STV"|"MTDP", keyword | expression}. Throws
/// InvalidInput on a schema or invariant violation.
RewardSpec spec_from_json(const Json& j);
Json spec_to_json(const RewardSpec& spec);

Json breakdown_to_json(const RewardBreakdown& b);
Json advantage_to_json(const AdvantageVector& a);

curation::CurationSample sample_from_json(const Json& j);
Json sample_to_json(const curation::CurationSample& s);

/// STV {id, type, keyword, question, dialogue, profile, meta} or MTDP with
/// expression in place of keyword.
Json record_to_json(const curation::CuratedRecord& r);
curation::CuratedRecord record_from_json(const Json& j);

Json decision_to_json(const curation::CurationDecision& d);
Json call_to_json(const judge::JudgeCall& c, std::string_view item_id);

cot::ColdStartInput cold_start_input_from_json(const Json& j);
/// SFT {id, system, messages, target, provenance}.
Json sft_to_json(const cot::ColdStartRecord& r);

evaluation::EvalRecord eval_record_from_json(const Json& j);

std::vector<curation::Turn> turns_from_json(const Json& j);
Json turns_to_json(const std::vector<curation::Turn>& turns);

/// Immutable id -> spec map loaded from a JSONL dataset file.
class SpecStore {
 public:
  SpecStore() = default;
  explicit SpecStore(std::vector<RewardSpec> specs);

  static std::shared_ptr<const SpecStore> load(const std::filesystem::path& path);

  const RewardSpec* find(const std::string& id) const;
  std::size_t size() const noexcept { return specs_.size(); }

 private:
  std::unordered_map<std::string, RewardSpec> specs_;
};

}  // namespace vrar::data
