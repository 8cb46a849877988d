#pragma once

#include "vrar/dsl.hpp"
#include "vrar/error.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

// Client abstraction over the LLM services used as judges, extractors and
// rewriters, with a fixture-backed mock for deterministic runs.
namespace vrar::judge {

// ---------------------------------------------------------------------------
// Errors

/// Transient transport failure; eligible for retry.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// The backend answered but the answer is unusable (4xx, malformed body).
class BackendError : public Error {
 public:
  using Error::Error;
};

class RetriesExhaustedError : public Error {
 public:
  RetriesExhaustedError(int attempts, const std::string& last)
      : Error("judge request failed after " + std::to_string(attempts) + " attempts: " + last) {}
};

class FixtureMissError : public Error {
 public:
  FixtureMissError(std::string hash, std::string_view prompt)
      : Error("mock fixture miss for prompt hash " + hash + " (prompt starts: \"" + preview(prompt) + "\")"),
        hash_(std::move(hash)) {}

  const std::string& hash() const noexcept { return hash_; }

 private:
  static std::string preview(std::string_view prompt);
  std::string hash_;
};

/// Judge output did not satisfy its declared contract. raw keeps the full
/// text for audit logs.
class ContractViolation : public Error {
 public:
  ContractViolation(const std::string& what, std::string raw) : Error(what), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

// ---------------------------------------------------------------------------
// Configuration

enum class BackendKind { remote, mock };

struct JudgeBackendConfig {
  BackendKind kind = BackendKind::mock;
  std::string endpoint;          // remote: http(s)://host[:port][/path]
  std::string model;
  double timeout_seconds = 60.0;
  int max_retries = 3;
  int max_in_flight = 4;
  std::string credentials_env;   // name of the variable holding the API key
  double backoff_base_seconds = 0.5;
  // mock only
  std::filesystem::path fixtures;
  bool strict = false;
  std::string default_response;

  void check() const;
};

/// Loads a backend config file. Relative fixture paths resolve against the
/// config file's directory.
JudgeBackendConfig load_backend_config(const std::filesystem::path& path);

struct Sampling {
  double temperature = 0.0;
  int max_tokens = 1024;
};

// ---------------------------------------------------------------------------
// Backends

/// One attempt against a completion service. Throws TransportError for
/// failures worth retrying.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string send(std::string_view prompt, const Sampling& sampling) = 0;
  virtual std::string name() const = 0;
};

/// 64-bit FNV-1a over the UTF-8 bytes, as 16 lowercase hex digits.
std::string prompt_hash(std::string_view prompt);

class MockBackend final : public Backend {
 public:
  explicit MockBackend(bool strict = true, std::string default_response = {});

  /// Fixture file: a JSON array of {"prompt" | "hash", "response"} objects,
  /// or an object mapping hashes to responses.
  static std::shared_ptr<MockBackend> from_file(const std::filesystem::path& path, bool strict,
                                                std::string default_response = {});

  void add(std::string_view prompt, std::string response);
  void add_hash(std::string hash, std::string response);
  std::size_t size() const { return fixtures_.size(); }

  std::string send(std::string_view prompt, const Sampling& sampling) override;
  std::string name() const override { return "mock"; }

 private:
  std::unordered_map<std::string, std::string> fixtures_;
  bool strict_;
  std::string default_response_;
};

/// JSON-over-HTTP chat completion: {model, messages, temperature, max_tokens}
/// in, choices[0].message.content out.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(const JudgeBackendConfig& cfg);

  std::string send(std::string_view prompt, const Sampling& sampling) override;
  std::string name() const override { return model_; }

 private:
  std::string base_;
  std::string path_;
  std::string model_;
  std::string api_key_;
  double timeout_seconds_;
};

// ---------------------------------------------------------------------------
// Client

/// Shareable handle adding retries with jittered exponential backoff and an
/// in-flight request cap on top of a backend.
class JudgeClient {
 public:
  using Sleeper = std::function<void(std::chrono::duration<double>)>;

  JudgeClient(JudgeBackendConfig cfg, std::shared_ptr<Backend> backend, Sleeper sleeper = {});

  std::string complete(std::string_view prompt, const Sampling& sampling = {});

  const JudgeBackendConfig& config() const noexcept { return cfg_; }
  std::string backend_name() const { return backend_->name(); }

 private:
  std::chrono::duration<double> backoff(int attempt);

  JudgeBackendConfig cfg_;
  std::shared_ptr<Backend> backend_;
  Sleeper sleeper_;
  std::counting_semaphore<> in_flight_;
  std::mutex rng_mutex_;
  std::mt19937_64 rng_;
};

/// Builds the backend the config names (loading fixtures for mocks).
std::shared_ptr<JudgeClient> make_client(const JudgeBackendConfig& cfg);

// ---------------------------------------------------------------------------
// Output contracts

enum class Contract { free_text, yes_no, dsl_expression, keyword_list };

std::string_view to_string(Contract c) noexcept;
Contract contract_from_string(std::string_view s);

struct AffirmationTable {
  std::string version;
  std::vector<std::string> affirmative;
  std::vector<std::string> negative;

  static const AffirmationTable& builtin();
  static AffirmationTable load(const std::filesystem::path& path);
};

using ContractValue = std::variant<std::string, bool, dsl::Expr, std::vector<std::string>>;

ContractValue parse_contracted_output(std::string_view raw, Contract contract,
                                      const AffirmationTable& table = AffirmationTable::builtin());

bool parse_yes_no(std::string_view raw, const AffirmationTable& table = AffirmationTable::builtin());
std::vector<std::string> parse_keyword_list(std::string_view raw);
dsl::Expr parse_expression_output(std::string_view raw);

// ---------------------------------------------------------------------------
// Prompt templates

/// Text with {name} placeholders; "{{" and "}}" are literal braces.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  /// Throws ConfigError when text uses a placeholder missing from declared.
  /// An empty declared list declares exactly the placeholders text uses.
  PromptTemplate(std::string id, std::string text, Contract contract, std::vector<std::string> declared = {});

  const std::string& id() const noexcept { return id_; }
  const std::string& text() const noexcept { return text_; }
  Contract contract() const noexcept { return contract_; }
  const std::vector<std::string>& placeholders() const noexcept { return placeholders_; }

  /// Throws InvalidInput when a declared placeholder has no argument.
  std::string render(const std::map<std::string, std::string>& args) const;

 private:
  std::string id_;
  std::string text_;
  Contract contract_ = Contract::free_text;
  std::vector<std::string> placeholders_;
};

class TemplateSet {
 public:
  static TemplateSet defaults();

  /// Overrides or adds templates from a JSON array of {id, text, contract}.
  void merge_file(const std::filesystem::path& path);
  void add(PromptTemplate t);
  const PromptTemplate& get(const std::string& id) const;
  bool contains(const std::string& id) const { return templates_.count(id) != 0; }

 private:
  std::map<std::string, PromptTemplate> templates_;
};

// ---------------------------------------------------------------------------
// Sessions

struct JudgeCall {
  std::string template_id;
  std::string prompt_hash;
  std::string prompt;
  std::string output;
};

/// Per-sample view of a client that renders templates, routes every answer
/// through its contract parser, and records the calls for the audit log.
class JudgeSession {
 public:
  JudgeSession(JudgeClient& client, const TemplateSet& templates,
               const AffirmationTable& table = AffirmationTable::builtin());

  std::string ask_text(const std::string& template_id, const std::map<std::string, std::string>& args);
  bool ask_yes_no(const std::string& template_id, const std::map<std::string, std::string>& args);
  std::vector<std::string> ask_keywords(const std::string& template_id,
                                        const std::map<std::string, std::string>& args);
  dsl::Expr ask_expression(const std::string& template_id, const std::map<std::string, std::string>& args);

  /// Asks with an extra instruction appended to the rendered prompt.
  std::string ask_text_with_suffix(const std::string& template_id, const std::map<std::string, std::string>& args,
                                   std::string_view suffix);

  const std::vector<JudgeCall>& calls() const noexcept { return calls_; }
  std::string backend_name() const { return client_.backend_name(); }

 private:
  ContractValue ask(const std::string& template_id, const std::map<std::string, std::string>& args,
                    Contract expected, std::string_view suffix = {});

  JudgeClient& client_;
  const TemplateSet& templates_;
  const AffirmationTable& table_;
  std::vector<JudgeCall> calls_;
};

}  // namespace vrar::judge
