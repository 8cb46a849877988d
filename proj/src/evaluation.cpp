#include "vrar/evaluation.hpp"

#include "vrar/cot.hpp"
#include "vrar/reward.hpp"

#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <exception>
#include <iomanip>
#include <sstream>

namespace vrar::evaluation {

std::string_view to_string(Metric m) noexcept {
  switch (m) {
    case Metric::SBK: return "SBK";
    case Metric::CM: return "CM";
    case Metric::SCK: return "SCK";
    case Metric::RCB: return "RCB";
    case Metric::TA: return "TA";
    case Metric::TS: return "TS";
  }
  return "SBK";
}

Metric metric_from_string(std::string_view s) {
  for (Metric m : kAllMetrics) {
    if (to_string(m) == s) return m;
  }
  throw InvalidInput("unknown metric '" + std::string(s) + "'");
}

std::optional<bool> judge_correctness(const EvalRecord& record, judge::JudgeSession& judge) {
  try {
    return judge.ask_yes_no(
        "eval." + std::string(to_string(record.metric)),
        {{"objective", record.objective}, {"reference", record.reference}, {"response", record.response}});
  } catch (const judge::ContractViolation&) {
    return std::nullopt;
  }
}

std::int64_t percent_hundredths(std::size_t correct, std::size_t total) {
  if (total == 0) throw InvalidInput("percentage of an empty set");
  // floor((10000 * correct + total / 2) / total) == half-up rounding.
  const auto c = static_cast<std::int64_t>(correct);
  const auto t = static_cast<std::int64_t>(total);
  return (20000 * c + t) / (2 * t);
}

std::string MetricStats::percent() const {
  std::string frac = std::to_string(hundredths % 100);
  if (frac.size() < 2) frac.insert(0, "0");
  return std::to_string(hundredths / 100) + "." + frac;
}

MetricReport metric_accuracy(std::span<const std::pair<Metric, bool>> judgments, std::size_t unevaluated) {
  MetricReport report;
  report.unevaluated = unevaluated;
  report.records = judgments.size() + unevaluated;
  for (const auto& [metric, correct] : judgments) {
    auto& s = report.metrics[metric];
    ++s.total;
    if (correct) ++s.correct;
  }
  for (auto& [metric, s] : report.metrics) s.hundredths = percent_hundredths(s.correct, s.total);
  return report;
}

std::string report_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["records"] = report.records;
  j["unevaluated"] = report.unevaluated;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (Metric m : kAllMetrics) {
    auto it = report.metrics.find(m);
    if (it == report.metrics.end()) continue;
    metrics[std::string(to_string(m))] = {
        {"correct", it->second.correct},
        {"total", it->second.total},
        {"accuracy", it->second.percent() + "%"},
    };
  }
  j["metrics"] = std::move(metrics);
  return j.dump(2) + "\n";
}

std::string report_table(const MetricReport& report, std::string_view model_label) {
  std::vector<std::string> header = {"Model"};
  std::vector<std::string> row = {std::string(model_label)};
  for (Metric m : kAllMetrics) {
    header.emplace_back(to_string(m));
    auto it = report.metrics.find(m);
    row.push_back(it == report.metrics.end() ? "-" : it->second.percent() + "%");
  }
  std::size_t first = std::max(header[0].size(), row[0].size());
  std::size_t width = 8;
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    os << std::left << std::setw(static_cast<int>(first)) << cells[0];
    for (std::size_t i = 1; i < cells.size(); ++i) os << "  " << std::right << std::setw(static_cast<int>(width)) << cells[i];
    os << "\n";
  };
  line(header);
  line(row);
  if (report.unevaluated) os << "(" << report.unevaluated << " unevaluated)\n";
  return os.str();
}

CotLengthStats cot_length_stats(std::span<const std::string> responses) {
  CotLengthStats stats;
  std::vector<std::size_t> counts;
  for (const auto& raw : responses) {
    const ModelResponse parsed = parse_response(raw);
    if (!parsed.well_formed) {
      ++stats.excluded;
      continue;
    }
    counts.push_back(cot::token_count(parsed.think));
  }
  stats.count = counts.size();
  if (counts.empty()) return stats;
  double sum = 0;
  for (auto c : counts) sum += static_cast<double>(c);
  stats.mean = sum / static_cast<double>(counts.size());
  std::sort(counts.begin(), counts.end());
  const std::size_t mid = counts.size() / 2;
  stats.median = counts.size() % 2 ? static_cast<double>(counts[mid])
                                   : (static_cast<double>(counts[mid - 1]) + static_cast<double>(counts[mid])) / 2.0;
  return stats;
}

EvaluationRun run_evaluation(std::span<const EvalRecord> records, judge::JudgeClient& client,
                             const judge::TemplateSet& templates, bool parallel) {
  EvaluationRun run;
  run.verdicts.resize(records.size());
  std::vector<std::vector<judge::JudgeCall>> calls(records.size());
  std::vector<std::exception_ptr> failures(records.size());
  auto process = [&](std::size_t i) {
    try {
      judge::JudgeSession session(client, templates);
      run.verdicts[i] = judge_correctness(records[i], session);
      calls[i] = session.calls();
    } catch (const std::exception& e) {
      failures[i] = std::make_exception_ptr(Error("record " + records[i].id + ": " + e.what()));
    }
  };
  const auto n = static_cast<std::ptrdiff_t>(records.size());
  if (parallel) {
    const int threads = std::max(1, client.config().max_in_flight);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) process(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) process(static_cast<std::size_t>(i));
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  std::vector<std::pair<Metric, bool>> judged;
  std::size_t unevaluated = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (run.verdicts[i]) {
      judged.emplace_back(records[i].metric, *run.verdicts[i]);
    } else {
      ++unevaluated;
    }
    run.calls.insert(run.calls.end(), calls[i].begin(), calls[i].end());
  }
  run.report = metric_accuracy(judged, unevaluated);
  return run;
}

}  // namespace vrar::evaluation
