#include "vrar/cot.hpp"

#include "vrar/unicode.hpp"

#include <omp.h>

#include <algorithm>
#include <exception>

namespace vrar::cot {

namespace {

char32_t closer_for(char32_t open) {
  switch (open) {
    case U'（': return U'）';
    case U'(': return U')';
    case U'【': return U'】';
    case U'[': return U']';
    default: return 0;
  }
}

bool is_closer(char32_t cp) { return cp == U'）' || cp == U')' || cp == U'】' || cp == U']'; }

bool is_bracket(char32_t cp) { return closer_for(cp) != 0 || is_closer(cp); }

// Runs of whitespace become one newline if the run had one, else one space.
std::string collapse_whitespace(const std::vector<char32_t>& cps) {
  std::vector<char32_t> out;
  out.reserve(cps.size());
  std::size_t i = 0;
  while (i < cps.size()) {
    if (!unicode::is_whitespace(cps[i])) {
      out.push_back(cps[i++]);
      continue;
    }
    bool newline = false;
    while (i < cps.size() && unicode::is_whitespace(cps[i])) {
      if (cps[i] == U'\n') newline = true;
      ++i;
    }
    out.push_back(newline ? U'\n' : U' ');
  }
  return unicode::trim(unicode::encode(out));
}

}  // namespace

StripResult strip_meta_annotations(std::string_view cot) {
  const auto cps = unicode::decode(cot);
  std::vector<char32_t> stack;
  std::vector<bool> removed(cps.size(), false);
  std::size_t span_start = 0;
  bool any_removed = false;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t cp = cps[i];
    if (closer_for(cp) != 0) {
      if (stack.empty()) span_start = i;
      stack.push_back(closer_for(cp));
    } else if (is_closer(cp)) {
      if (stack.empty() || stack.back() != cp) return {std::string(cot), true};
      stack.pop_back();
      if (stack.empty()) {
        for (std::size_t k = span_start; k <= i; ++k) removed[k] = true;
        any_removed = true;
      }
    }
  }
  if (!stack.empty()) return {std::string(cot), true};
  if (!any_removed) return {std::string(cot), false};

  std::vector<char32_t> kept;
  kept.reserve(cps.size());
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (!removed[i]) kept.push_back(cps[i]);
  }
  return {collapse_whitespace(kept), false};
}

bool has_brackets(std::string_view text) {
  for (char32_t cp : unicode::decode(text)) {
    if (is_bracket(cp)) return true;
  }
  return false;
}

std::size_t token_count(std::string_view text, const FormatConfig& cfg) {
  std::size_t count = 0;
  bool in_segment = false;
  for (char32_t cp : unicode::decode(text)) {
    if (cfg.is_cjk(cp)) {
      ++count;
      in_segment = false;
    } else if (unicode::is_whitespace(cp)) {
      in_segment = false;
    } else if (!in_segment) {
      ++count;
      in_segment = true;
    }
  }
  return count;
}

StepResult compress_cot(std::string_view cot, judge::JudgeSession& judge, std::size_t threshold) {
  StepResult result;
  const StripResult stripped = strip_meta_annotations(cot);
  if (stripped.unbalanced) result.warnings.push_back("unbalanced brackets left in place");
  result.text = stripped.text;
  if (token_count(cot) <= threshold) return result;

  std::string compressed = judge.ask_text("cot.compress", {{"cot", stripped.text}});
  if (compressed.empty() || token_count(compressed) > token_count(stripped.text)) {
    result.warnings.push_back("compression output longer than input; input kept");
    return result;
  }
  result.text = std::move(compressed);
  return result;
}

StepResult style_adapt(std::string_view cot, std::string_view character_profile, judge::JudgeSession& judge) {
  StepResult result;
  if (unicode::trim(cot).empty()) return result;
  const std::map<std::string, std::string> args = {{"profile", std::string(character_profile)},
                                                   {"cot", std::string(cot)}};
  result.text = judge.ask_text("cot.style", args);
  if (!has_brackets(result.text)) return result;

  result.text = judge.ask_text_with_suffix("cot.style", args, "Do not use any brackets or parentheses.");
  if (!has_brackets(result.text)) return result;

  result.warnings.push_back("brackets persisted after retry; removed locally");
  StripResult stripped = strip_meta_annotations(result.text);
  std::vector<char32_t> cps;
  for (char32_t cp : unicode::decode(stripped.text)) {
    if (!is_bracket(cp)) cps.push_back(cp);
  }
  result.text = collapse_whitespace(cps);
  return result;
}

std::optional<std::string> regenerate_response(std::string_view character_profile,
                                               std::span<const curation::Turn> dialogue_history,
                                               std::string_view refined_cot, judge::JudgeSession& judge) {
  std::string answer = judge.ask_text("cot.continue", {{"profile", std::string(character_profile)},
                                                       {"dialogue", curation::render_dialogue(dialogue_history)},
                                                       {"cot", std::string(refined_cot)}});
  if (answer.empty()) return std::nullopt;
  return answer;
}

std::string render_target(std::string_view refined_cot, std::string_view answer) {
  std::string out;
  out.reserve(kThinkOpen.size() + refined_cot.size() + kThinkClose.size() + answer.size());
  out += kThinkOpen;
  out += refined_cot;
  out += kThinkClose;
  out += answer;
  return out;
}

ColdStartOutcome build_cold_start_record(const ColdStartInput& input, judge::JudgeSession& judge,
                                         const ColdStartOptions& options) {
  ColdStartOutcome out;
  auto finish = [&]() -> ColdStartOutcome {
    out.calls = judge.calls();
    return std::move(out);
  };
  auto note = [&out](const char* stage, const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) out.audit.push_back({stage, w});
  };

  StepResult compressed = compress_cot(input.raw_cot, judge, options.compress_threshold);
  note("compress", compressed.warnings);
  StepResult styled = style_adapt(compressed.text, input.character_profile, judge);
  note("style", styled.warnings);
  if (styled.text.empty()) {
    out.audit.push_back({"style", "dropped: refined reasoning is empty"});
    return finish();
  }
  const std::size_t tokens = token_count(styled.text, options.format);
  if (tokens > options.max_cot_tokens) {
    out.audit.push_back({"token_cap", "dropped: " + std::to_string(tokens) + " tokens exceeds cap of " +
                                          std::to_string(options.max_cot_tokens)});
    return finish();
  }
  auto answer = regenerate_response(input.character_profile, input.dialogue_history, styled.text, judge);
  if (!answer) {
    out.audit.push_back({"regenerate", "dropped: empty continuation"});
    return finish();
  }
  std::string target = render_target(styled.text, *answer);
  if (format_reward(target, options.format) != 1) {
    out.audit.push_back({"format_check", "dropped: rendered target fails the format reward"});
    return finish();
  }
  out.audit.push_back({"emit", "format reward 1"});

  ColdStartRecord record;
  record.id = input.id;
  record.character_profile = input.character_profile;
  record.dialogue_history = input.dialogue_history;
  record.refined_cot = std::move(styled.text);
  record.final_answer = std::move(*answer);
  record.rendered_target = std::move(target);
  record.backend = judge.backend_name();
  for (const auto& call : judge.calls()) {
    if (std::find(record.template_ids.begin(), record.template_ids.end(), call.template_id) ==
        record.template_ids.end()) {
      record.template_ids.push_back(call.template_id);
    }
  }
  out.record = std::move(record);
  return finish();
}

std::vector<ColdStartOutcome> run_cold_start(std::span<const ColdStartInput> inputs, judge::JudgeClient& client,
                                             const judge::TemplateSet& templates, const ColdStartOptions& options,
                                             bool parallel) {
  std::vector<ColdStartOutcome> outcomes(inputs.size());
  std::vector<std::exception_ptr> failures(inputs.size());
  auto process = [&](std::size_t i) {
    try {
      judge::JudgeSession session(client, templates);
      outcomes[i] = build_cold_start_record(inputs[i], session, options);
    } catch (const std::exception& e) {
      failures[i] = std::make_exception_ptr(curation::SampleError(inputs[i].id, e.what()));
    }
  };
  const auto n = static_cast<std::ptrdiff_t>(inputs.size());
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
  return outcomes;
}

}  // namespace vrar::cot
