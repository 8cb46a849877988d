#include "vrar/curation.hpp"

#include "vrar/unicode.hpp"

#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <set>

namespace vrar::curation {

using judge::JudgeSession;

void CurationSample::check() const {
  if (id.empty()) throw InvalidInput("curation sample without id");
  if (unicode::trim(question).empty()) throw InvalidInput("sample " + id + ": empty question");
  if (source == SourceTag::benchmark && dialogue_history.empty()) {
    throw InvalidInput("sample " + id + ": benchmark samples need a dialogue history");
  }
  for (const auto& r : references) {
    if (unicode::trim(r).empty()) throw InvalidInput("sample " + id + ": empty reference response");
  }
}

std::string_view to_string(QuestionType t) noexcept {
  switch (t) {
    case QuestionType::wh: return "WH";
    case QuestionType::polar: return "Polar";
    case QuestionType::alternative: return "Alternative";
    case QuestionType::other: return "Other";
  }
  return "Other";
}

CurationDecision CurationDecision::accept(std::string stage, std::string detail) {
  return {Outcome::accepted, std::move(stage), std::move(detail)};
}

CurationDecision CurationDecision::reject(std::string stage, std::string detail) {
  return {Outcome::rejected, std::move(stage), std::move(detail)};
}

// ---------------------------------------------------------------------------
// Question classification. Rule table version kQuestionRulesVersion.

namespace {

const std::vector<std::string>& chinese_wh_markers() {
  static const std::vector<std::string> m = {"什么", "为什么", "谁", "哪", "几", "怎么", "怎样", "何时", "多少"};
  return m;
}

const std::set<std::string>& english_wh_words() {
  static const std::set<std::string> w = {"what", "who", "whom", "whose", "which", "where", "when", "why", "how"};
  return w;
}

const std::set<std::string>& english_auxiliaries() {
  static const std::set<std::string> w = {"is",   "are",   "am",    "was",    "were",  "do",   "does",
                                          "did",  "have",  "has",   "had",    "can",   "could", "will",
                                          "would", "shall", "should", "may",   "might", "must",  "isn't",
                                          "aren't", "don't", "doesn't", "didn't", "won't", "can't"};
  return w;
}

std::vector<std::string> ascii_words(std::string_view lowered) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : lowered) {
    if ((c >= 'a' && c <= 'z') || c == '\'') {
      cur.push_back(c);
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

bool is_trailing_punct(char32_t cp) {
  switch (cp) {
    case U'?': case U'？': case U'!': case U'！': case U'。': case U'.': case U'~': case U'～': case U'…':
      return true;
    default:
      return unicode::is_whitespace(cp);
  }
}

bool has_a_not_a(const std::vector<char32_t>& cps) {
  for (std::size_t i = 0; i + 2 < cps.size(); ++i) {
    if ((cps[i + 1] == U'不' || cps[i + 1] == U'没') && cps[i] == cps[i + 2] && cps[i] >= 0x3400 && cps[i] <= 0x9FFF) {
      return true;
    }
  }
  return false;
}

}  // namespace

QuestionType classify_question(std::string_view question) {
  const std::string lowered = unicode::match_key(unicode::trim(question));
  const auto words = ascii_words(lowered);
  const bool aux_first = !words.empty() && english_auxiliaries().count(words.front()) != 0;
  const bool has_or = std::find(words.begin(), words.end(), "or") != words.end();

  if (lowered.find("还是") != std::string::npos || (aux_first && has_or)) return QuestionType::alternative;

  auto cps = unicode::decode(lowered);
  while (!cps.empty() && is_trailing_punct(cps.back())) cps.pop_back();
  const bool final_ma = !cps.empty() && cps.back() == U'吗';
  if (final_ma || has_a_not_a(cps) || aux_first) return QuestionType::polar;

  for (const auto& m : chinese_wh_markers()) {
    if (lowered.find(m) != std::string::npos) return QuestionType::wh;
  }
  for (const auto& w : words) {
    if (english_wh_words().count(w)) return QuestionType::wh;
  }
  return QuestionType::other;
}

std::vector<std::string> dedupe_keywords(std::span<const std::string> keywords) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& k : keywords) {
    std::string key = unicode::match_key(unicode::trim(k));
    if (key.empty()) continue;
    if (seen.insert(std::move(key)).second) out.push_back(unicode::nfc(unicode::trim(k)));
  }
  return out;
}

CurationDecision enforce_cardinality(std::span<const std::string> keywords) {
  if (keywords.size() == 1) return CurationDecision::accept("cardinality", keywords.front());
  return CurationDecision::reject("cardinality", "expected exactly one keyword, found " +
                                                      std::to_string(keywords.size()));
}

bool multiref_verify(std::string_view keyword, std::span<const std::string> references) {
  const std::string key = unicode::match_key(unicode::trim(keyword));
  if (key.empty()) throw InvalidInput("multiref_verify: empty keyword");
  if (references.empty()) throw InvalidInput("multiref_verify: no references");
  return std::all_of(references.begin(), references.end(), [&key](const std::string& r) {
    return unicode::match_key(r).find(key) != std::string::npos;
  });
}

std::string render_dialogue(std::span<const Turn> dialogue) {
  std::string out;
  for (const auto& t : dialogue) {
    if (!out.empty()) out.push_back('\n');
    out += t.speaker + ": " + t.utterance;
  }
  return out;
}

namespace {

std::string join(std::span<const std::string> items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string numbered(std::span<const std::string> items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out.push_back('\n');
    out += std::to_string(i + 1) + ". " + items[i];
  }
  return out;
}

std::vector<std::string> starting_keywords(const CurationSample& sample, JudgeSession& judge,
                                           std::vector<CurationDecision>& audit) {
  if (!sample.candidate_keywords.empty()) {
    auto kws = dedupe_keywords(sample.candidate_keywords);
    audit.push_back(CurationDecision::accept("extraction", "candidate keywords: " + join(kws, ", ")));
    return kws;
  }
  auto kws = dedupe_keywords(judge.ask_keywords("stv.extract_keywords",
                                                {{"profile", sample.character_profile},
                                                 {"dialogue", render_dialogue(sample.dialogue_history)},
                                                 {"question", sample.question},
                                                 {"references", numbered(sample.references)}}));
  if (kws.empty()) {
    audit.push_back(CurationDecision::reject("extraction", "no unambiguous keyword"));
  } else {
    audit.push_back(CurationDecision::accept("extraction", "extracted: " + join(kws, ", ")));
  }
  return kws;
}

CuratedRecord make_record(const CurationSample& sample, RewardSpec spec, QuestionType type,
                          std::vector<CurationDecision> audit) {
  CuratedRecord r;
  r.spec = std::move(spec);
  r.question = sample.question;
  r.dialogue = sample.dialogue_history;
  r.profile = sample.character_profile;
  r.question_type = type;
  r.audit = std::move(audit);
  return r;
}

std::string first_reference(const CurationSample& sample) {
  return sample.references.empty() ? std::string() : sample.references.front();
}

// Runs a workflow body, turning contract violations into a rejection at the
// stage that was in progress.
template <class Body>
CurationOutcome guarded(JudgeSession& judge, Body body) {
  CurationOutcome out;
  std::string stage = "start";
  try {
    body(out, stage);
  } catch (const judge::ContractViolation& e) {
    out.record.reset();
    out.audit.push_back(CurationDecision::reject(stage, std::string("contract violation: ") + e.what() +
                                                            " (raw: " + e.raw() + ")"));
  }
  out.calls = judge.calls();
  if (out.record) out.record->audit = out.audit;
  return out;
}

}  // namespace

CurationOutcome stv_curate(const CurationSample& sample, JudgeSession& judge) {
  return guarded(judge, [&](CurationOutcome& out, std::string& stage) {
    auto& audit = out.audit;
    stage = "question_type";
    const QuestionType type = classify_question(sample.question);
    if (type != QuestionType::wh) {
      audit.push_back(CurationDecision::reject(stage, std::string(to_string(type))));
      return;
    }
    audit.push_back(CurationDecision::accept(stage, "WH"));

    stage = "extraction";
    auto keywords = starting_keywords(sample, judge, audit);
    if (keywords.empty()) return;

    stage = "entity_type";
    std::vector<std::string> entities;
    for (const auto& kw : keywords) {
      if (judge.ask_yes_no("stv.entity_check", {{"keyword", kw}, {"question", sample.question}})) {
        entities.push_back(kw);
      }
    }
    if (entities.empty()) {
      audit.push_back(CurationDecision::reject(stage, "no keyword names a distinct entity"));
      return;
    }
    audit.push_back(CurationDecision::accept(
        stage, "kept " + std::to_string(entities.size()) + " of " + std::to_string(keywords.size())));

    stage = "cardinality";
    audit.push_back(enforce_cardinality(entities));
    if (!audit.back().accepted()) return;
    const std::string keyword = entities.front();

    stage = "multiref";
    if (sample.references.empty()) {
      audit.push_back(CurationDecision::reject(stage, "no reference responses"));
      return;
    }
    for (std::size_t i = 0; i < sample.references.size(); ++i) {
      if (!multiref_verify(keyword, std::span(sample.references).subspan(i, 1))) {
        audit.push_back(CurationDecision::reject(stage, "keyword missing from reference " + std::to_string(i + 1)));
        return;
      }
    }
    audit.push_back(CurationDecision::accept(stage, "present in all " + std::to_string(sample.references.size()) +
                                                        " references"));
    out.record = make_record(sample, RewardSpec::stv(sample.id, keyword), type, {});
  });
}

std::vector<std::string> expand_keywords(std::span<const std::string> keywords, std::string_view question,
                                         JudgeSession& judge) {
  if (keywords.empty()) return {};
  std::vector<std::string> combined(keywords.begin(), keywords.end());
  auto variants = judge.ask_keywords("mtdp.expand_keywords",
                                     {{"question", std::string(question)}, {"keywords", join(keywords, ", ")}});
  combined.insert(combined.end(), variants.begin(), variants.end());
  return dedupe_keywords(combined);
}

std::vector<std::string> filter_legitimacy(std::span<const std::string> variants, std::string_view question,
                                           std::string_view reference, JudgeSession& judge) {
  std::vector<std::string> kept;
  for (const auto& v : variants) {
    if (judge.ask_yes_no("mtdp.legitimacy",
                         {{"question", std::string(question)}, {"reference", std::string(reference)}, {"variant", v}})) {
      kept.push_back(v);
    }
  }
  return kept;
}

ExpressionOutcome generate_expression(std::span<const std::string> variants, std::string_view question,
                                      JudgeSession& judge) {
  ExpressionOutcome out;
  dsl::Expr expr;
  try {
    expr = judge.ask_expression("mtdp.generate_expression",
                                {{"question", std::string(question)}, {"variants", join(variants, ", ")}});
  } catch (const judge::ContractViolation& e) {
    out.decision = CurationDecision::reject("expression", e.what());
    return out;
  }
  std::set<std::string> approved;
  for (const auto& v : variants) approved.insert(unicode::nfc(v));
  for (const auto& lit : dsl::literals(expr)) {
    if (!approved.count(unicode::nfc(lit))) {
      out.decision = CurationDecision::reject("expression", "literal \"" + lit + "\" is not an approved variant");
      return out;
    }
  }
  if (auto err = dsl::validate(expr)) {
    out.decision = CurationDecision::reject("expression", *err);
    return out;
  }
  out.decision = CurationDecision::accept("expression", dsl::render(expr));
  out.expr = std::move(expr);
  return out;
}

bool consistency_gate(std::size_t agreements, std::size_t probes) {
  // agreements / probes > 7/10, in integers.
  return probes > 0 && agreements * 10 > probes * 7;
}

ConsistencyResult consistency_validate(const dsl::Expr& expr, std::span<const std::string> probe_responses,
                                       std::string_view question, std::string_view reference, JudgeSession& judge) {
  if (probe_responses.size() != kProbeCount) {
    throw InvalidInput("consistency validation needs exactly 10 probe responses, got " +
                       std::to_string(probe_responses.size()));
  }
  ConsistencyResult result;
  result.probes = probe_responses.size();
  for (const auto& probe : probe_responses) {
    const bool verdict = judge.ask_yes_no(
        "mtdp.judge_probe",
        {{"question", std::string(question)}, {"reference", std::string(reference)}, {"response", probe}});
    if (verdict == dsl::evaluate(expr, probe)) ++result.agreements;
  }
  result.retained = consistency_gate(result.agreements, result.probes);
  return result;
}

CurationOutcome mtdp_curate(const CurationSample& sample, JudgeSession& judge) {
  return guarded(judge, [&](CurationOutcome& out, std::string& stage) {
    auto& audit = out.audit;
    stage = "question_type";
    const QuestionType type = classify_question(sample.question);
    audit.push_back(CurationDecision::accept(stage, std::string(to_string(type))));

    stage = "extraction";
    auto keywords = starting_keywords(sample, judge, audit);
    if (keywords.empty()) return;

    stage = "expansion";
    auto variants = expand_keywords(keywords, sample.question, judge);
    audit.push_back(CurationDecision::accept(stage, join(variants, ", ")));

    stage = "legitimacy";
    auto legit = filter_legitimacy(variants, sample.question, first_reference(sample), judge);
    if (legit.empty()) {
      audit.push_back(CurationDecision::reject(stage, "no variant judged relevant"));
      return;
    }
    audit.push_back(CurationDecision::accept(stage, join(legit, ", ")));

    stage = "expression";
    auto generated = generate_expression(legit, sample.question, judge);
    audit.push_back(generated.decision);
    if (!generated.expr) return;

    stage = "consistency";
    if (sample.probe_responses.size() != kProbeCount) {
      audit.push_back(CurationDecision::reject(
          stage, "expected 10 probe responses, got " + std::to_string(sample.probe_responses.size())));
      return;
    }
    auto consistency =
        consistency_validate(*generated.expr, sample.probe_responses, sample.question, first_reference(sample), judge);
    const std::string tally = std::to_string(consistency.agreements) + "/" + std::to_string(consistency.probes);
    if (!consistency.retained) {
      audit.push_back(CurationDecision::reject(stage, tally + " agreement"));
      return;
    }
    audit.push_back(CurationDecision::accept(stage, tally + " agreement"));
    out.record = make_record(sample, RewardSpec::mtdp(sample.id, std::move(*generated.expr)), type, {});
  });
}

bool hard_sample_filter(const CurationSample& sample, JudgeSession& baseline, const RewardSpec* spec,
                        JudgeSession& checker) {
  const std::string answer = baseline.ask_text("data.baseline_answer",
                                               {{"profile", sample.character_profile},
                                                {"dialogue", render_dialogue(sample.dialogue_history)},
                                                {"question", sample.question}});
  bool correct;
  if (spec) {
    correct = accuracy_reward(*spec, answer) == 1;
  } else {
    correct = checker.ask_yes_no("data.check_answer",
                                 {{"question", sample.question}, {"reference", first_reference(sample)}, {"answer", answer}});
  }
  return !correct;
}

// ---------------------------------------------------------------------------
// Balancing

std::string_view to_string(HistoryBucket b) noexcept {
  switch (b) {
    case HistoryBucket::short_history: return "short";
    case HistoryBucket::medium_history: return "medium";
    case HistoryBucket::long_history: return "long";
  }
  return "short";
}

HistoryBucket history_bucket(std::size_t turns) {
  if (turns <= 4) return HistoryBucket::short_history;
  if (turns <= 12) return HistoryBucket::medium_history;
  return HistoryBucket::long_history;
}

void BalanceTargets::check() const {
  if (proportions.empty()) throw InvalidInput("balance targets are empty");
  double sum = 0;
  for (const auto& [k, p] : proportions) {
    if (!std::isfinite(p) || p < 0) throw InvalidInput("balance target for '" + k + "' must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw InvalidInput("balance target proportions must sum to 1");
  if (!(tolerance >= 0 && tolerance <= 1)) throw InvalidInput("balance tolerance must lie in [0, 1]");
}

BalanceTargets balance_targets_from_json_text(std::string_view text) {
  BalanceTargets t;
  try {
    const auto j = nlohmann::json::parse(text);
    const std::string dim = j.value("dimension", std::string("history"));
    if (dim == "history") {
      t.dimension = BalanceTargets::Dimension::history;
    } else if (dim == "question_type") {
      t.dimension = BalanceTargets::Dimension::question_type;
    } else if (dim == "joint") {
      t.dimension = BalanceTargets::Dimension::joint;
    } else {
      throw InvalidInput("unknown balance dimension '" + dim + "'");
    }
    t.proportions = j.at("proportions").get<std::map<std::string, double>>();
    t.tolerance = j.value("tolerance", t.tolerance);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("balance targets: ") + e.what());
  }
  t.check();
  return t;
}

InfeasibleTargets::InfeasibleTargets(std::vector<std::string> buckets)
    : InvalidInput([&buckets] {
        std::string msg = "infeasible balance targets; buckets:";
        for (const auto& b : buckets) msg += " " + b;
        return msg;
      }()),
      buckets_(std::move(buckets)) {}

std::string bucket_key(const CuratedRecord& record, BalanceTargets::Dimension dimension) {
  const std::string history(to_string(history_bucket(record.dialogue.size())));
  const std::string type(to_string(record.question_type));
  switch (dimension) {
    case BalanceTargets::Dimension::history: return history;
    case BalanceTargets::Dimension::question_type: return type;
    case BalanceTargets::Dimension::joint: return history + "/" + type;
  }
  return history;
}

namespace {

// Uniform in [0, bound) from raw mt19937_64 output; std distributions are not
// portable across standard libraries.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

std::vector<std::size_t> balance_distribution(std::span<const CuratedRecord> records, const BalanceTargets& targets,
                                              std::uint64_t seed) {
  targets.check();
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < records.size(); ++i) members[bucket_key(records[i], targets.dimension)].push_back(i);

  std::vector<std::string> empty;
  for (const auto& [key, p] : targets.proportions) {
    if (p > 0 && members[key].empty()) empty.push_back(key);
  }
  if (!empty.empty()) throw InfeasibleTargets(std::move(empty));

  // Largest total size every bucket can support.
  double n = static_cast<double>(records.size());
  for (const auto& [key, p] : targets.proportions) {
    if (p > 0) n = std::min(n, std::floor(static_cast<double>(members[key].size()) / p + 1e-9));
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> selected;
  for (auto& [key, idx] : members) {
    auto it = targets.proportions.find(key);
    const double p = it == targets.proportions.end() ? 0.0 : it->second;
    const auto quota = std::min(idx.size(), static_cast<std::size_t>(std::llround(p * n)));
    if (quota == 0) continue;
    // Partial Fisher-Yates: the first quota slots become a uniform sample.
    for (std::size_t i = 0; i < quota; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(bounded(rng, idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    selected.insert(selected.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(quota));
  }
  std::sort(selected.begin(), selected.end());

  std::map<std::string, std::size_t> got;
  for (std::size_t i : selected) ++got[bucket_key(records[i], targets.dimension)];
  std::vector<std::string> off;
  const auto total = static_cast<double>(selected.size());
  std::set<std::string> keys;
  for (const auto& [k, p] : targets.proportions) keys.insert(k);
  for (const auto& [k, c] : got) keys.insert(k);
  for (const auto& k : keys) {
    auto t = targets.proportions.find(k);
    const double want = t == targets.proportions.end() ? 0.0 : t->second;
    const double have = total > 0 ? static_cast<double>(got[k]) / total : 0.0;
    if (std::abs(have - want) > targets.tolerance + 1e-12) off.push_back(k);
  }
  if (selected.empty() || !off.empty()) throw InfeasibleTargets(off.empty() ? std::vector<std::string>{"<all>"} : off);
  return selected;
}

// ---------------------------------------------------------------------------

std::vector<CurationOutcome> run_pipeline(std::span<const CurationSample> samples, judge::JudgeClient& client,
                                          const judge::TemplateSet& templates, const PipelineOptions& options) {
  std::vector<CurationOutcome> outcomes(samples.size());
  std::vector<std::exception_ptr> failures(samples.size());

  auto process = [&](std::size_t i) {
    const CurationSample& sample = samples[i];
    try {
      sample.check();
      JudgeSession session(client, templates);
      CurationOutcome out =
          options.workflow == Workflow::stv ? stv_curate(sample, session) : mtdp_curate(sample, session);
      if (out.record && options.baseline) {
        JudgeSession baseline(*options.baseline, templates);
        const bool retain = hard_sample_filter(sample, baseline, &out.record->spec, session);
        out.calls.insert(out.calls.end(), baseline.calls().begin(), baseline.calls().end());
        if (retain) {
          out.audit.push_back(CurationDecision::accept("hard_sample", "baseline answered incorrectly"));
          out.record->audit = out.audit;
        } else {
          out.audit.push_back(CurationDecision::reject("hard_sample", "baseline answered correctly"));
          out.record.reset();
        }
      }
      outcomes[i] = std::move(out);
    } catch (const std::exception& e) {
      failures[i] = std::make_exception_ptr(SampleError(sample.id, e.what()));
    }
  };

  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  if (options.parallel) {
    const int threads = std::max(1, client.config().max_in_flight);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) process(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) process(static_cast<std::size_t>(i));
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return outcomes;
}

}  // namespace vrar::curation
