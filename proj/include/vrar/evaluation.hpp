#pragma once

#include "vrar/judge.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// LLM-as-judge correctness evaluation over the six role-awareness metrics.
namespace vrar::evaluation {

enum class Metric { SBK, CM, SCK, RCB, TA, TS };

inline constexpr std::array<Metric, 6> kAllMetrics = {Metric::SBK, Metric::CM,  Metric::SCK,
                                                      Metric::RCB, Metric::TA, Metric::TS};

std::string_view to_string(Metric m) noexcept;
/// Throws InvalidInput for anything but the six abbreviations.
Metric metric_from_string(std::string_view s);

struct EvalRecord {
  std::string id;
  Metric metric = Metric::SBK;
  std::string response;
  std::string reference;
  std::string objective;
};

/// Empty optional means the judge output violated the yes/no contract; the
/// record is unevaluated.
std::optional<bool> judge_correctness(const EvalRecord& record, judge::JudgeSession& judge);

struct MetricStats {
  std::size_t correct = 0;
  std::size_t total = 0;
  /// Accuracy in hundredths of a percent, rounded half up: 8804 == 88.04%.
  std::int64_t hundredths = 0;

  std::string percent() const;  // "88.04"
};

struct MetricReport {
  /// Metrics with zero records are absent.
  std::map<Metric, MetricStats> metrics;
  std::size_t records = 0;
  std::size_t unevaluated = 0;
};

/// Half-up rounding of 100 * correct / total to two decimals, in hundredths.
std::int64_t percent_hundredths(std::size_t correct, std::size_t total);

MetricReport metric_accuracy(std::span<const std::pair<Metric, bool>> judgments, std::size_t unevaluated = 0);

std::string report_json(const MetricReport& report);
/// Plain-text table with one column per metric.
std::string report_table(const MetricReport& report, std::string_view model_label);

struct CotLengthStats {
  std::size_t count = 0;
  std::size_t excluded = 0;
  std::optional<double> mean;
  std::optional<double> median;
};

/// Token counts of the think segments; malformed rollouts are excluded.
CotLengthStats cot_length_stats(std::span<const std::string> responses);

struct EvaluationRun {
  MetricReport report;
  std::vector<std::optional<bool>> verdicts;
  std::vector<judge::JudgeCall> calls;
};

/// Judges records in parallel up to the client's in-flight cap, then folds
/// the verdicts serially in input order.
EvaluationRun run_evaluation(std::span<const EvalRecord> records, judge::JudgeClient& client,
                             const judge::TemplateSet& templates, bool parallel = true);

}  // namespace vrar::evaluation
