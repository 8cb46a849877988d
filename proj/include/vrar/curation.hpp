#pragma once

#include "vrar/dsl.hpp"
#include "vrar/judge.hpp"
#include "vrar/reward.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Data-production workflows: single-term validation (STV), multi-term
// dynamic parsing (MTDP), hard-sample filtering and distribution balancing.
namespace vrar::curation {

struct Turn {
  std::string speaker;
  std::string utterance;

  friend bool operator==(const Turn&, const Turn&) = default;
};

enum class SourceTag { benchmark, general };

struct CurationSample {
  std::string id;
  std::string character_profile;
  std::vector<Turn> dialogue_history;
  std::string question;
  std::vector<std::string> references;
  std::vector<std::string> candidate_keywords;
  SourceTag source = SourceTag::general;
  /// Existing model responses used to validate MTDP expressions.
  std::vector<std::string> probe_responses;

  void check() const;
};

enum class QuestionType { wh, polar, alternative, other };

std::string_view to_string(QuestionType t) noexcept;

struct CurationDecision {
  enum class Outcome { accepted, rejected };

  Outcome outcome = Outcome::accepted;
  std::string stage;
  std::string detail;

  static CurationDecision accept(std::string stage, std::string detail = {});
  static CurationDecision reject(std::string stage, std::string detail = {});
  bool accepted() const noexcept { return outcome == Outcome::accepted; }

  friend bool operator==(const CurationDecision&, const CurationDecision&) = default;
};

/// A labeled training record with the audit trail that produced it.
struct CuratedRecord {
  RewardSpec spec;
  std::string question;
  std::vector<Turn> dialogue;
  std::string profile;
  QuestionType question_type = QuestionType::other;
  std::vector<CurationDecision> audit;
};

/// Result of one sample through a pipeline: a record, or the failing
/// decision. audit and calls are populated either way.
struct CurationOutcome {
  std::optional<CuratedRecord> record;
  std::vector<CurationDecision> audit;
  std::vector<judge::JudgeCall> calls;

  const CurationDecision& final_decision() const { return audit.back(); }
};

inline constexpr std::string_view kQuestionRulesVersion = "1";

/// Rule-table classification; precedence Alternative > Polar > WH > Other.
QuestionType classify_question(std::string_view question);

/// Deduplicates on the NFC/case-folded key, keeping the first spelling.
std::vector<std::string> dedupe_keywords(std::span<const std::string> keywords);

/// Accepted only for exactly one keyword; the decision detail carries it.
CurationDecision enforce_cardinality(std::span<const std::string> keywords);

/// True iff the normalized keyword occurs in every reference. Throws
/// InvalidInput for an empty keyword or an empty reference list.
bool multiref_verify(std::string_view keyword, std::span<const std::string> references);

std::string render_dialogue(std::span<const Turn> dialogue);

CurationOutcome stv_curate(const CurationSample& sample, judge::JudgeSession& judge);

/// Original keywords first, then new variants; deduplicated.
std::vector<std::string> expand_keywords(std::span<const std::string> keywords, std::string_view question,
                                         judge::JudgeSession& judge);

std::vector<std::string> filter_legitimacy(std::span<const std::string> variants, std::string_view question,
                                           std::string_view reference, judge::JudgeSession& judge);

/// Either an expression whose literals all come from the variant list, or
/// a rejection naming the foreign literal / parse diagnostic.
struct ExpressionOutcome {
  std::optional<dsl::Expr> expr;
  CurationDecision decision;
};

ExpressionOutcome generate_expression(std::span<const std::string> variants, std::string_view question,
                                      judge::JudgeSession& judge);

struct ConsistencyResult {
  std::size_t agreements = 0;
  std::size_t probes = 0;
  bool retained = false;
};

inline constexpr std::size_t kProbeCount = 10;

/// Retain iff agreements / probes > 0.70 (strict). With ten probes that
/// means at least eight agreements.
bool consistency_gate(std::size_t agreements, std::size_t probes);

/// Compares the expression against the yes/no judge on each of exactly ten
/// probes. Throws InvalidInput for any other probe count.
ConsistencyResult consistency_validate(const dsl::Expr& expr, std::span<const std::string> probe_responses,
                                       std::string_view question, std::string_view reference,
                                       judge::JudgeSession& judge);

CurationOutcome mtdp_curate(const CurationSample& sample, judge::JudgeSession& judge);

/// Asks the baseline backend for an answer and checks it with spec when
/// present, with the judge otherwise. Returns true (retain) iff incorrect.
bool hard_sample_filter(const CurationSample& sample, judge::JudgeSession& baseline, const RewardSpec* spec,
                        judge::JudgeSession& checker);

// ---------------------------------------------------------------------------
// Distribution balancing

enum class HistoryBucket { short_history, medium_history, long_history };

std::string_view to_string(HistoryBucket b) noexcept;

/// <= 4 turns short, 5-12 medium, >= 13 long.
HistoryBucket history_bucket(std::size_t turns);

struct BalanceTargets {
  enum class Dimension { history, question_type, joint };

  Dimension dimension = Dimension::history;
  /// Bucket name -> proportion. Joint keys look like "short/WH".
  std::map<std::string, double> proportions;
  double tolerance = 0.05;

  void check() const;
};

BalanceTargets balance_targets_from_json_text(std::string_view text);

class InfeasibleTargets : public InvalidInput {
 public:
  InfeasibleTargets(std::vector<std::string> buckets);
  const std::vector<std::string>& buckets() const noexcept { return buckets_; }

 private:
  std::vector<std::string> buckets_;
};

std::string bucket_key(const CuratedRecord& record, BalanceTargets::Dimension dimension);

/// Deterministic subsample whose bucket proportions are within tolerance of
/// the targets. Returns indices into records in ascending order. Never adds
/// records.
std::vector<std::size_t> balance_distribution(std::span<const CuratedRecord> records, const BalanceTargets& targets,
                                              std::uint64_t seed);

// ---------------------------------------------------------------------------
// Batch drivers

enum class Workflow { stv, mtdp };

struct PipelineOptions {
  Workflow workflow = Workflow::stv;
  /// Optional hard-sample filtering with a baseline backend.
  judge::JudgeClient* baseline = nullptr;
  bool parallel = true;
};

/// Runs the chosen workflow over all samples, in parallel up to the judge
/// client's in-flight cap. Outcomes keep input order. Judge failures are
/// rethrown for the first failing sample in input order, with its id.
std::vector<CurationOutcome> run_pipeline(std::span<const CurationSample> samples, judge::JudgeClient& client,
                                          const judge::TemplateSet& templates, const PipelineOptions& options);

/// A judge failure tagged with the sample it happened on.
class SampleError : public Error {
 public:
  SampleError(std::string sample_id, const std::string& what)
      : Error("sample " + sample_id + ": " + what), sample_id_(std::move(sample_id)) {}
  const std::string& sample_id() const noexcept { return sample_id_; }

 private:
  std::string sample_id_;
};

}  // namespace vrar::curation
