#include "vrar/reward.hpp"

#include "vrar/error.hpp"

#include <json.hpp>

#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>

namespace vrar {

std::string_view to_string(SpecLabel label) noexcept { return label == SpecLabel::stv ? "STV" : "MTDP"; }

RewardSpec RewardSpec::stv(std::string id, std::string keyword) {
  RewardSpec spec;
  spec.id = std::move(id);
  spec.label = SpecLabel::stv;
  spec.keyword = std::move(keyword);
  return spec;
}

RewardSpec RewardSpec::mtdp(std::string id, dsl::Expr expression) {
  RewardSpec spec;
  spec.id = std::move(id);
  spec.label = SpecLabel::mtdp;
  spec.expression = std::move(expression);
  return spec;
}

void RewardSpec::check() const {
  if (label == SpecLabel::stv) {
    if (expression) throw InvalidInput("spec " + id + ": STV spec must not carry an expression");
    if (unicode::nfc(keyword).empty()) throw InvalidInput("spec " + id + ": STV keyword is empty");
    if (!unicode::is_valid_utf8(keyword)) throw InvalidInput("spec " + id + ": keyword is not valid UTF-8");
  } else {
    if (!keyword.empty()) throw InvalidInput("spec " + id + ": MTDP spec must not carry a keyword");
    if (!expression) throw InvalidInput("spec " + id + ": MTDP spec has no expression");
    if (auto err = dsl::validate(*expression)) throw InvalidInput("spec " + id + ": " + *err);
  }
}

std::vector<std::string> FormatConfig::default_special_vocab() {
  return {"<think>",    "</think>",        "<|endoftext|>", "<|im_start|>",
          "<|im_end|>", "<|end_of_text|>", "<|eot_id|>",    "</s>"};
}

std::vector<unicode::CodepointRange> FormatConfig::default_cjk_ranges() {
  return {{0x3400, 0x4DBF}, {0x4E00, 0x9FFF}};
}

bool FormatConfig::is_cjk(char32_t cp) const noexcept {
  for (const auto& r : cjk_ranges) {
    if (r.contains(cp)) return true;
  }
  return false;
}

void FormatConfig::check() const {
  if (!(chinese_ratio_threshold > 0.0 && chinese_ratio_threshold < 1.0)) {
    throw ConfigError("chinese_ratio_threshold must lie strictly between 0 and 1");
  }
  if (max_special_repeat < 1) throw ConfigError("max_special_repeat must be at least 1");
  for (std::size_t i = 0; i < cjk_ranges.size(); ++i) {
    if (cjk_ranges[i].first > cjk_ranges[i].last) throw ConfigError("cjk_ranges entry has first > last");
    if (cjk_ranges[i].last > 0x10FFFF) throw ConfigError("cjk_ranges entry beyond U+10FFFF");
    if (i > 0 && cjk_ranges[i].first <= cjk_ranges[i - 1].last) {
      throw ConfigError("cjk_ranges must be sorted and non-overlapping");
    }
  }
  for (const auto& w : special_vocab) {
    if (w.empty()) throw ConfigError("special_vocab entries must be non-empty");
  }
}

void RewardWeights::check() const {
  if (!std::isfinite(accuracy) || !std::isfinite(format) || accuracy < 0 || format < 0) {
    throw ConfigError("reward weights must be finite and non-negative");
  }
}

ModelResponse parse_response(std::string_view raw) {
  ModelResponse out;
  out.raw = std::string(raw);
  if (!raw.starts_with(kThinkOpen)) return out;
  if (unicode::count_occurrences(raw, kThinkOpen, 2) != 1) return out;
  if (unicode::count_occurrences(raw, kThinkClose, 2) != 1) return out;
  const std::size_t close = raw.find(kThinkClose);
  std::string_view think = raw.substr(kThinkOpen.size(), close - kThinkOpen.size());
  std::string_view answer = raw.substr(close + kThinkClose.size());
  if (unicode::trim(think).empty() || unicode::trim(answer).empty()) return out;
  out.think = std::string(think);
  out.answer = std::string(answer);
  out.well_formed = true;
  return out;
}

int accuracy_reward(const RewardSpec& spec, std::string_view response_text) {
  if (spec.label == SpecLabel::stv) {
    const std::string key = unicode::match_key(spec.keyword);
    if (key.empty()) return 0;
    return unicode::match_key(response_text).find(key) != std::string::npos ? 1 : 0;
  }
  if (!spec.expression) return 0;
  return dsl::evaluate(*spec.expression, response_text) ? 1 : 0;
}

double chinese_ratio(std::string_view text, const FormatConfig& cfg) {
  std::size_t counted = 0;
  std::size_t cjk = 0;
  for (char32_t cp : unicode::decode(text)) {
    if (unicode::is_whitespace(cp)) continue;
    ++counted;
    if (cfg.is_cjk(cp)) ++cjk;
  }
  if (counted == 0) return 0.0;
  return static_cast<double>(cjk) / static_cast<double>(counted);
}

bool special_vocab_ok(const ModelResponse& response, const FormatConfig& cfg) {
  const std::string answer = unicode::trim(response.answer);
  const auto cap = static_cast<std::size_t>(cfg.max_special_repeat);
  for (const auto& w : cfg.special_vocab) {
    if (answer == w) return false;
    if (unicode::count_occurrences(response.raw, w, cap + 1) > cap) return false;
  }
  return true;
}

int format_reward(std::string_view raw, const FormatConfig& cfg) {
  const ModelResponse parsed = parse_response(raw);
  if (!parsed.well_formed) return 0;
  const std::string content = unicode::erase_all(unicode::erase_all(raw, kThinkOpen), kThinkClose);
  if (!(chinese_ratio(content, cfg) > cfg.chinese_ratio_threshold)) return 0;
  return special_vocab_ok(parsed, cfg) ? 1 : 0;
}

RewardBreakdown total_reward(const RewardSpec& spec, std::string_view raw, const FormatConfig& cfg,
                             const RewardWeights& weights) {
  RewardBreakdown b;
  b.spec_id = spec.id;
  b.accuracy = accuracy_reward(spec, raw);
  b.format = format_reward(raw, cfg);
  b.total = weights.accuracy * b.accuracy + weights.format * b.format;
  return b;
}

namespace {

char32_t parse_codepoint(const nlohmann::json& v) {
  if (v.is_number_unsigned() || v.is_number_integer()) {
    auto n = v.get<long long>();
    if (n < 0 || n > 0x10FFFF) throw ConfigError("codepoint out of range");
    return static_cast<char32_t>(n);
  }
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.starts_with("U+") || s.starts_with("u+") || s.starts_with("0x") || s.starts_with("0X")) s = s.substr(2);
    try {
      std::size_t used = 0;
      unsigned long n = std::stoul(s, &used, 16);
      if (used != s.size() || n > 0x10FFFF) throw ConfigError("bad codepoint '" + v.get<std::string>() + "'");
      return static_cast<char32_t>(n);
    } catch (const std::logic_error&) {
      throw ConfigError("bad codepoint '" + v.get<std::string>() + "'");
    }
  }
  throw ConfigError("codepoint must be an integer or a hex string");
}

RewardConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("reward config must be a JSON object");
  RewardConfig cfg;
  try {
    if (j.contains("special_vocab")) cfg.format.special_vocab = j.at("special_vocab").get<std::vector<std::string>>();
    if (j.contains("chinese_ratio_threshold")) {
      cfg.format.chinese_ratio_threshold = j.at("chinese_ratio_threshold").get<double>();
    }
    if (j.contains("max_special_repeat")) cfg.format.max_special_repeat = j.at("max_special_repeat").get<int>();
    if (j.contains("cjk_ranges")) {
      cfg.format.cjk_ranges.clear();
      for (const auto& r : j.at("cjk_ranges")) {
        if (!r.is_array() || r.size() != 2) throw ConfigError("cjk_ranges entries must be [first, last] pairs");
        cfg.format.cjk_ranges.push_back({parse_codepoint(r[0]), parse_codepoint(r[1])});
      }
    }
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      if (w.is_array()) {
        if (w.size() != 2) throw ConfigError("weights array must be [accuracy, format]");
        cfg.weights = {w[0].get<double>(), w[1].get<double>()};
      } else {
        cfg.weights.accuracy = w.value("accuracy", 1.0);
        cfg.weights.format = w.value("format", 1.0);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("reward config: ") + e.what());
  }
  cfg.format.check();
  cfg.weights.check();
  return cfg;
}

}  // namespace

RewardConfig reward_config_from_json_text(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("reward config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

RewardConfig load_reward_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open reward config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return reward_config_from_json_text(ss.str());
}

namespace {

RewardBreakdown score_item(const ScoreItem& item, const RewardConfig& cfg) {
  if (!item.spec) throw InvalidInput("score item without a spec");
  return total_reward(*item.spec, item.response, cfg.format, cfg.weights);
}

}  // namespace

std::vector<RewardBreakdown> score_batch_serial(std::span<const ScoreItem> items, const RewardConfig& cfg) {
  std::vector<RewardBreakdown> out;
  out.reserve(items.size());
  for (const ScoreItem& item : items) out.push_back(score_item(item, cfg));
  return out;
}

std::vector<RewardBreakdown> score_batch(std::span<const ScoreItem> items, const RewardConfig& cfg) {
  std::vector<RewardBreakdown> out(items.size());
  const auto n = static_cast<std::ptrdiff_t>(items.size());
  // The earliest failing item wins, so errors match the serial loop.
  std::ptrdiff_t failed_at = n;
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = score_item(items[static_cast<std::size_t>(i)], cfg);
    } catch (...) {
#pragma omp critical(vrar_score_batch_failure)
      if (i < failed_at) {
        failed_at = i;
        failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace vrar
