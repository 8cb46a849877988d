#include "vrar/judge.hpp"

#include "vrar/unicode.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace vrar::judge {

using nlohmann::json;

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::string FixtureMissError::preview(std::string_view prompt) {
  // Cut on a codepoint boundary.
  auto cps = unicode::decode(prompt.substr(0, std::min<std::size_t>(prompt.size(), 240)));
  if (cps.size() > 60) cps.resize(60);
  if (!cps.empty() && cps.back() == U'\uFFFD') cps.pop_back();
  std::string out = unicode::encode(cps);
  std::replace(out.begin(), out.end(), '\n', ' ');
  return out;
}

// ---------------------------------------------------------------------------

void JudgeBackendConfig::check() const {
  if (!(timeout_seconds > 0)) throw ConfigError("judge timeout must be positive");
  if (max_retries < 0) throw ConfigError("judge max_retries must be non-negative");
  if (max_in_flight < 1) throw ConfigError("judge max_in_flight must be at least 1");
  if (backoff_base_seconds < 0) throw ConfigError("judge backoff base must be non-negative");
  if (kind == BackendKind::remote && endpoint.empty()) throw ConfigError("remote judge needs an endpoint");
}

JudgeBackendConfig load_backend_config(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  JudgeBackendConfig cfg;
  try {
    const std::string kind = j.value("kind", std::string("mock"));
    if (kind == "mock") {
      cfg.kind = BackendKind::mock;
    } else if (kind == "remote") {
      cfg.kind = BackendKind::remote;
    } else {
      throw ConfigError("unknown judge backend kind '" + kind + "'");
    }
    cfg.endpoint = j.value("endpoint", std::string());
    cfg.model = j.value("model", std::string());
    cfg.timeout_seconds = j.value("timeout_seconds", cfg.timeout_seconds);
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    cfg.max_in_flight = j.value("max_in_flight", cfg.max_in_flight);
    cfg.credentials_env = j.value("credentials_env", std::string());
    cfg.backoff_base_seconds = j.value("backoff_base_seconds", cfg.backoff_base_seconds);
    cfg.strict = j.value("strict", false);
    cfg.default_response = j.value("default_response", std::string());
    if (j.contains("api_key")) throw ConfigError("credentials must come from the environment, not the config file");
    if (j.contains("fixtures")) {
      std::filesystem::path fixtures = j.at("fixtures").get<std::string>();
      if (fixtures.is_relative()) fixtures = path.parent_path() / fixtures;
      cfg.fixtures = fixtures;
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  cfg.check();
  return cfg;
}

// ---------------------------------------------------------------------------

std::string prompt_hash(std::string_view prompt) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : prompt) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[h & 0xF];
    h >>= 4;
  }
  return out;
}

MockBackend::MockBackend(bool strict, std::string default_response)
    : strict_(strict), default_response_(std::move(default_response)) {}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::filesystem::path& path, bool strict,
                                                    std::string default_response) {
  auto mock = std::make_shared<MockBackend>(strict, std::move(default_response));
  const json j = read_json_file(path);
  try {
    if (j.is_object()) {
      for (const auto& [hash, response] : j.items()) mock->add_hash(hash, response.get<std::string>());
    } else if (j.is_array()) {
      for (const auto& entry : j) {
        std::string response = entry.at("response").get<std::string>();
        if (entry.contains("prompt")) {
          mock->add(entry.at("prompt").get<std::string>(), std::move(response));
        } else {
          mock->add_hash(entry.at("hash").get<std::string>(), std::move(response));
        }
      }
    } else {
      throw ConfigError(path.string() + ": fixtures must be a JSON array or object");
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return mock;
}

void MockBackend::add(std::string_view prompt, std::string response) {
  fixtures_[prompt_hash(prompt)] = std::move(response);
}

void MockBackend::add_hash(std::string hash, std::string response) { fixtures_[std::move(hash)] = std::move(response); }

std::string MockBackend::send(std::string_view prompt, const Sampling&) {
  std::string hash = prompt_hash(prompt);
  auto it = fixtures_.find(hash);
  if (it != fixtures_.end()) return it->second;
  if (strict_) throw FixtureMissError(std::move(hash), prompt);
  return default_response_;
}

// ---------------------------------------------------------------------------

RemoteBackend::RemoteBackend(const JudgeBackendConfig& cfg)
    : model_(cfg.model), timeout_seconds_(cfg.timeout_seconds) {
  const std::string& ep = cfg.endpoint;
  const auto scheme_end = ep.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("judge endpoint must start with http:// or https://");
  const auto path_start = ep.find('/', scheme_end + 3);
  base_ = ep.substr(0, path_start);
  path_ = path_start == std::string::npos ? std::string("/v1/chat/completions") : ep.substr(path_start);
  if (!cfg.credentials_env.empty()) {
    if (const char* key = std::getenv(cfg.credentials_env.c_str())) api_key_ = key;
  }
}

std::string RemoteBackend::send(std::string_view prompt, const Sampling& sampling) {
  httplib::Client client(base_);
  const auto secs = static_cast<time_t>(timeout_seconds_);
  const auto usecs = static_cast<time_t>((timeout_seconds_ - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const json body = {
      {"model", model_},
      {"messages", json::array({{{"role", "user"}, {"content", std::string(prompt)}}})},
      {"temperature", sampling.temperature},
      {"max_tokens", sampling.max_tokens},
  };
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw TransportError("judge transport error: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("judge returned HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw BackendError("judge returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  try {
    const json reply = json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed chat completion response: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

JudgeClient::JudgeClient(JudgeBackendConfig cfg, std::shared_ptr<Backend> backend, Sleeper sleeper)
    : cfg_(std::move(cfg)),
      backend_(std::move(backend)),
      sleeper_(std::move(sleeper)),
      in_flight_(std::max(1, cfg_.max_in_flight)),
      rng_(std::random_device{}()) {
  cfg_.check();
  if (!backend_) throw ConfigError("judge client needs a backend");
  if (!sleeper_) sleeper_ = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
}

std::chrono::duration<double> JudgeClient::backoff(int attempt) {
  // Base doubles per attempt; jitter draws uniformly from [0.5, 1.0] of it.
  double jitter;
  {
    std::lock_guard lock(rng_mutex_);
    jitter = 0.5 + 0.5 * std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
  }
  return std::chrono::duration<double>(cfg_.backoff_base_seconds * std::ldexp(1.0, attempt) * jitter);
}

std::string JudgeClient::complete(std::string_view prompt, const Sampling& sampling) {
  if (prompt.empty()) throw InvalidInput("judge prompt is empty");
  const int attempts = cfg_.max_retries + 1;
  std::string last_error;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) sleeper_(backoff(attempt - 1));
    in_flight_.acquire();
    try {
      std::string out = backend_->send(prompt, sampling);
      in_flight_.release();
      return out;
    } catch (const TransportError& e) {
      in_flight_.release();
      last_error = e.what();
    } catch (...) {
      in_flight_.release();
      throw;
    }
  }
  throw RetriesExhaustedError(attempts, last_error);
}

std::shared_ptr<JudgeClient> make_client(const JudgeBackendConfig& cfg) {
  cfg.check();
  std::shared_ptr<Backend> backend;
  if (cfg.kind == BackendKind::mock) {
    if (cfg.fixtures.empty()) {
      backend = std::make_shared<MockBackend>(cfg.strict, cfg.default_response);
    } else {
      backend = MockBackend::from_file(cfg.fixtures, cfg.strict, cfg.default_response);
    }
  } else {
    backend = std::make_shared<RemoteBackend>(cfg);
  }
  return std::make_shared<JudgeClient>(cfg, std::move(backend));
}

// ---------------------------------------------------------------------------

std::string_view to_string(Contract c) noexcept {
  switch (c) {
    case Contract::free_text: return "free_text";
    case Contract::yes_no: return "yes_no";
    case Contract::dsl_expression: return "dsl_expression";
    case Contract::keyword_list: return "keyword_list";
  }
  return "free_text";
}

Contract contract_from_string(std::string_view s) {
  if (s == "free_text") return Contract::free_text;
  if (s == "yes_no") return Contract::yes_no;
  if (s == "dsl_expression") return Contract::dsl_expression;
  if (s == "keyword_list") return Contract::keyword_list;
  throw ConfigError("unknown output contract '" + std::string(s) + "'");
}

const AffirmationTable& AffirmationTable::builtin() {
  // Keep in sync with data/affirmations.json.
  static const AffirmationTable table{
      "1",
      {"是", "是的", "对", "对的", "正确", "相关", "符合", "合格", "yes", "y", "true", "correct", "relevant",
       "affirmative"},
      {"否", "不是", "不", "不对", "错误", "不正确", "不相关", "不符合", "不合格", "no", "n", "false", "incorrect",
       "irrelevant", "negative"},
  };
  return table;
}

AffirmationTable AffirmationTable::load(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  try {
    return AffirmationTable{j.at("version").get<std::string>(), j.at("affirmative").get<std::vector<std::string>>(),
                            j.at("negative").get<std::vector<std::string>>()};
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

namespace {

// Trailing sentence punctuation an LLM commonly appends to a one-word verdict.
std::string strip_verdict_punctuation(std::string s) {
  static const std::vector<std::string> tails = {"。", "！", "？", "．", ".", "!", "?", "\"", "'", "“", "”"};
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    for (const auto& t : tails) {
      if (s.size() >= t.size() && s.compare(s.size() - t.size(), t.size(), t) == 0) {
        s.erase(s.size() - t.size());
        s = unicode::trim(s);
        changed = true;
      }
    }
  }
  return s;
}

std::string strip_code_fence(std::string s) {
  if (!s.starts_with("```")) return s;
  auto first_newline = s.find('\n');
  auto last_fence = s.rfind("```");
  if (first_newline == std::string::npos || last_fence <= first_newline) return s;
  return unicode::trim(s.substr(first_newline + 1, last_fence - first_newline - 1));
}

}  // namespace

bool parse_yes_no(std::string_view raw, const AffirmationTable& table) {
  const std::string token = unicode::match_key(strip_verdict_punctuation(unicode::trim(raw)));
  for (const auto& a : table.affirmative) {
    if (token == unicode::match_key(a)) return true;
  }
  for (const auto& n : table.negative) {
    if (token == unicode::match_key(n)) return false;
  }
  throw ContractViolation("judge output is not a recognized yes/no verdict", std::string(raw));
}

std::vector<std::string> parse_keyword_list(std::string_view raw) {
  static const std::vector<std::string> separators = {"\n", ",", "，", "、", ";", "；"};
  std::vector<std::string> out;
  std::string current;
  std::size_t i = 0;
  auto flush = [&] {
    std::string item = unicode::trim(current);
    if (!item.empty()) out.push_back(std::move(item));
    current.clear();
  };
  while (i < raw.size()) {
    bool split = false;
    for (const auto& sep : separators) {
      if (raw.substr(i, sep.size()) == sep) {
        flush();
        i += sep.size();
        split = true;
        break;
      }
    }
    if (!split) current.push_back(raw[i++]);
  }
  flush();
  for (const auto& item : out) {
    if (!unicode::is_valid_utf8(item)) throw ContractViolation("keyword list is not valid UTF-8", std::string(raw));
  }
  return out;
}

dsl::Expr parse_expression_output(std::string_view raw) {
  const std::string body = strip_code_fence(unicode::trim(raw));
  auto parsed = dsl::parse(body);
  if (!parsed) throw ContractViolation("judge output is not a valid expression: " + parsed.diagnostic.message(),
                                       std::string(raw));
  return std::move(*parsed.expr);
}

ContractValue parse_contracted_output(std::string_view raw, Contract contract, const AffirmationTable& table) {
  switch (contract) {
    case Contract::free_text: {
      if (!unicode::is_valid_utf8(raw)) throw ContractViolation("judge output is not valid UTF-8", std::string(raw));
      return unicode::trim(raw);
    }
    case Contract::yes_no: return parse_yes_no(raw, table);
    case Contract::dsl_expression: return parse_expression_output(raw);
    case Contract::keyword_list: return parse_keyword_list(raw);
  }
  throw ContractViolation("unknown contract", std::string(raw));
}

// ---------------------------------------------------------------------------

namespace {

bool is_name_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; }

// Walks the template; on_literal receives literal text, on_name placeholder names.
template <class Literal, class Name>
void scan_template(const std::string& text, const std::string& id, Literal on_literal, Name on_name) {
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
      on_literal("{");
      i += 2;
    } else if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
      on_literal("}");
      i += 2;
    } else if (c == '{') {
      std::size_t end = text.find('}', i + 1);
      if (end == std::string::npos) throw ConfigError("template " + id + ": unterminated placeholder");
      std::string name = text.substr(i + 1, end - i - 1);
      if (name.empty() || !std::all_of(name.begin(), name.end(), is_name_char)) {
        throw ConfigError("template " + id + ": bad placeholder name '" + name + "'");
      }
      on_name(name);
      i = end + 1;
    } else if (c == '}') {
      throw ConfigError("template " + id + ": unmatched '}'");
    } else {
      std::size_t end = text.find_first_of("{}", i);
      if (end == std::string::npos) end = text.size();
      on_literal(std::string_view(text).substr(i, end - i));
      i = end;
    }
  }
}

}  // namespace

PromptTemplate::PromptTemplate(std::string id, std::string text, Contract contract, std::vector<std::string> declared)
    : id_(std::move(id)), text_(std::move(text)), contract_(contract) {
  std::vector<std::string> used;
  scan_template(
      text_, id_, [](std::string_view) {},
      [&used](const std::string& name) {
        if (std::find(used.begin(), used.end(), name) == used.end()) used.push_back(name);
      });
  if (declared.empty()) {
    placeholders_ = std::move(used);
  } else {
    for (const auto& name : used) {
      if (std::find(declared.begin(), declared.end(), name) == declared.end()) {
        throw ConfigError("template " + id_ + ": placeholder '" + name + "' is not declared");
      }
    }
    placeholders_ = std::move(declared);
  }
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& args) const {
  for (const auto& name : placeholders_) {
    if (!args.count(name)) throw InvalidInput("template " + id_ + ": missing argument '" + name + "'");
  }
  std::string out;
  out.reserve(text_.size() * 2);
  scan_template(
      text_, id_, [&out](std::string_view lit) { out.append(lit); },
      [&](const std::string& name) { out += args.at(name); });
  return out;
}

TemplateSet TemplateSet::defaults() {
  TemplateSet set;
  auto add = [&set](const char* id, Contract contract, const char* text) { set.add(PromptTemplate(id, text, contract)); };

  add("stv.extract_keywords", Contract::keyword_list,
      "You label role-play dialogue data.\n"
      "Character profile:\n{profile}\n\nDialogue history:\n{dialogue}\n\nQuestion: {question}\n\n"
      "Reference answers:\n{references}\n\n"
      "List the keywords that any correct answer must contain, one per line. "
      "Output nothing else. Output an empty line if there is no unambiguous keyword.");
  add("stv.entity_check", Contract::yes_no,
      "Question: {question}\nCandidate keyword: {keyword}\n\n"
      "Is the keyword a noun or noun phrase naming one distinct entity (person, place, object, number, date)? "
      "Answer 是 or 否 only.");
  add("mtdp.expand_keywords", Contract::keyword_list,
      "Question: {question}\nKeywords: {keywords}\n\n"
      "List variant spellings, synonyms and equivalent expressions of these keywords that a correct answer "
      "could use instead, separated by commas. Output nothing else.");
  add("mtdp.legitimacy", Contract::yes_no,
      "Question: {question}\nReference answer: {reference}\nCandidate term: {variant}\n\n"
      "Does the candidate term express the same meaning as the reference answer in this context? "
      "Answer 是 or 否 only.");
  add("mtdp.generate_expression", Contract::dsl_expression,
      "Question: {question}\nApproved terms: {variants}\n\n"
      "Write one verification expression that returns true exactly when a response answers the question "
      "correctly. Grammar: contains(\"t\") | count_at_least(\"t\", n) | not(e) | all(e, e, ...) | any(e, e, ...). "
      "Use only the approved terms as string literals. Output the expression only.");
  add("mtdp.judge_probe", Contract::yes_no,
      "Question: {question}\nReference answer: {reference}\nResponse to check: {response}\n\n"
      "Does the response answer the question correctly according to the reference? Answer 是 or 否 only.");
  add("data.baseline_answer", Contract::free_text,
      "You are playing the following character.\n{profile}\n\nDialogue so far:\n{dialogue}\n\n"
      "User: {question}\nReply in character.");
  add("data.check_answer", Contract::yes_no,
      "Question: {question}\nReference answer: {reference}\nAnswer to check: {answer}\n\n"
      "Is the answer correct according to the reference? Answer 是 or 否 only.");
  add("cot.compress", Contract::free_text,
      "Condense the following reasoning. Keep the logical links between sentences, facts from the dialogue "
      "history and character information. Drop bracketed stage directions and meta commentary.\n\n{cot}");
  add("cot.style", Contract::free_text,
      "Character profile:\n{profile}\n\nRewrite the reasoning below as this character's own first-person inner "
      "monologue, keeping its content. Do not use brackets.\n\n{cot}");
  add("cot.continue", Contract::free_text,
      "You are playing the following character.\n{profile}\n\nDialogue so far:\n{dialogue}\n\n"
      "Your private thoughts about the next reply:\n{cot}\n\nWrite the character's next reply only.");
  for (const char* metric : {"SBK", "CM", "SCK", "RCB", "TA", "TS"}) {
    set.add(PromptTemplate(std::string("eval.") + metric,
                           std::string("Metric: ") + metric +
                               "\nEvaluation objective: {objective}\nReference response: {reference}\n"
                               "Model response: {response}\n\n"
                               "Does the model response meet the evaluation objective? Answer 是 or 否 only.",
                           Contract::yes_no));
  }
  return set;
}

void TemplateSet::merge_file(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  if (!j.is_array()) throw ConfigError(path.string() + ": templates file must be a JSON array");
  try {
    for (const auto& entry : j) {
      std::vector<std::string> declared;
      if (entry.contains("placeholders")) declared = entry.at("placeholders").get<std::vector<std::string>>();
      add(PromptTemplate(entry.at("id").get<std::string>(), entry.at("text").get<std::string>(),
                         contract_from_string(entry.at("contract").get<std::string>()), std::move(declared)));
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void TemplateSet::add(PromptTemplate t) {
  std::string id = t.id();
  templates_[std::move(id)] = std::move(t);
}

const PromptTemplate& TemplateSet::get(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw ConfigError("unknown prompt template '" + id + "'");
  return it->second;
}

// ---------------------------------------------------------------------------

JudgeSession::JudgeSession(JudgeClient& client, const TemplateSet& templates, const AffirmationTable& table)
    : client_(client), templates_(templates), table_(table) {}

ContractValue JudgeSession::ask(const std::string& template_id, const std::map<std::string, std::string>& args,
                                Contract expected, std::string_view suffix) {
  const PromptTemplate& t = templates_.get(template_id);
  if (t.contract() != expected) {
    throw ConfigError("template " + template_id + " declares contract " + std::string(to_string(t.contract())) +
                      ", caller expects " + std::string(to_string(expected)));
  }
  std::string prompt = t.render(args);
  if (!suffix.empty()) {
    prompt += "\n\n";
    prompt += suffix;
  }
  std::string output = client_.complete(prompt);
  calls_.push_back(JudgeCall{template_id, prompt_hash(prompt), prompt, output});
  return parse_contracted_output(output, expected, table_);
}

std::string JudgeSession::ask_text(const std::string& template_id, const std::map<std::string, std::string>& args) {
  return std::get<std::string>(ask(template_id, args, Contract::free_text));
}

std::string JudgeSession::ask_text_with_suffix(const std::string& template_id,
                                               const std::map<std::string, std::string>& args,
                                               std::string_view suffix) {
  return std::get<std::string>(ask(template_id, args, Contract::free_text, suffix));
}

bool JudgeSession::ask_yes_no(const std::string& template_id, const std::map<std::string, std::string>& args) {
  return std::get<bool>(ask(template_id, args, Contract::yes_no));
}

std::vector<std::string> JudgeSession::ask_keywords(const std::string& template_id,
                                                    const std::map<std::string, std::string>& args) {
  return std::get<std::vector<std::string>>(ask(template_id, args, Contract::keyword_list));
}

dsl::Expr JudgeSession::ask_expression(const std::string& template_id, const std::map<std::string, std::string>& args) {
  return std::get<dsl::Expr>(ask(template_id, args, Contract::dsl_expression));
}

}  // namespace vrar::judge
