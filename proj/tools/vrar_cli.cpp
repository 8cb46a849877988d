// vrar: batch CLI for scoring, curation, CoT refinement, evaluation and the
// scoring service.

#include "vrar/advantage.hpp"
#include "vrar/cot.hpp"
#include "vrar/curation.hpp"
#include "vrar/dataset.hpp"
#include "vrar/evaluation.hpp"
#include "vrar/judge.hpp"
#include "vrar/reward.hpp"
#include "vrar/service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using vrar::data::Json;

namespace {

struct Common {
  fs::path input;
  fs::path output;
  fs::path config;
  std::string backend;
  std::string baseline_backend;
  fs::path templates;
  fs::path audit;
  fs::path rejects;
  fs::path specs;
  fs::path balance;
  std::uint64_t seed = 0;
  std::size_t group_size = vrar::kDefaultGroupSize;
  bool strict_mock = false;
  bool serial = false;
  bool table = false;
  std::string label = "model";
  std::string host = "127.0.0.1";
  int port = 8080;
  int threads = 8;
};

vrar::RewardConfig reward_config(const Common& c) {
  return c.config.empty() ? vrar::RewardConfig{} : vrar::load_reward_config(c.config);
}

// "mock:fixtures.json" or a backend config file.
vrar::judge::JudgeBackendConfig backend_config(const std::string& spec, bool strict_mock) {
  vrar::judge::JudgeBackendConfig cfg;
  if (spec.rfind("mock:", 0) == 0) {
    cfg.kind = vrar::judge::BackendKind::mock;
    cfg.fixtures = spec.substr(5);
    cfg.strict = true;
  } else if (spec.empty()) {
    throw vrar::ConfigError("--backend is required for this command");
  } else {
    cfg = vrar::judge::load_backend_config(spec);
  }
  if (strict_mock) cfg.strict = true;
  return cfg;
}

vrar::judge::TemplateSet templates(const Common& c) {
  auto set = vrar::judge::TemplateSet::defaults();
  if (!c.templates.empty()) set.merge_file(c.templates);
  return set;
}

void write_output(const fs::path& path, const std::vector<Json>& lines) {
  if (path.empty() || path == "-") {
    for (const auto& l : lines) std::cout << vrar::data::dump_line(l) << '\n';
  } else {
    vrar::data::write_jsonl(path, lines);
  }
}

std::vector<vrar::data::JsonLine> read_input(const fs::path& path) {
  if (path.empty() || path == "-") {
    std::stringstream ss;
    ss << std::cin.rdbuf();
    return vrar::data::parse_jsonl(ss.str());
  }
  return vrar::data::read_jsonl(path);
}

// ---------------------------------------------------------------------------

int cmd_score(const Common& c) {
  const auto cfg = reward_config(c);
  std::shared_ptr<const vrar::data::SpecStore> store =
      c.specs.empty() ? std::make_shared<const vrar::data::SpecStore>() : vrar::data::SpecStore::load(c.specs);
  const auto lines = read_input(c.input);

  struct Row {
    std::string prompt_id;
    std::string response;
    std::shared_ptr<vrar::RewardSpec> inline_spec;
    const vrar::RewardSpec* spec = nullptr;
  };
  auto rows = vrar::data::convert_lines(lines, [&](const Json& j) {
    Row r;
    if (!j.is_object()) throw vrar::InvalidInput("rollout must be a JSON object");
    r.prompt_id = j.value("prompt_id", std::string());
    if (!j.contains("response") || !j["response"].is_string()) throw vrar::InvalidInput("missing string 'response'");
    r.response = j["response"].get<std::string>();
    if (auto s = j.find("spec"); s != j.end() && s->is_object()) {
      r.inline_spec = std::make_shared<vrar::RewardSpec>(vrar::data::spec_from_json(*s));
      r.spec = r.inline_spec.get();
    } else {
      const std::string id = j.value("spec_id", r.prompt_id);
      r.spec = store->find(id);
      if (!r.spec) throw vrar::InvalidInput("unknown spec id '" + id + "'");
    }
    if (r.prompt_id.empty()) r.prompt_id = r.spec->id;
    return r;
  });

  std::vector<vrar::ScoreItem> items;
  items.reserve(rows.size());
  for (const auto& r : rows) items.push_back({r.spec, r.response});
  const auto results = c.serial ? vrar::score_batch_serial(items, cfg) : vrar::score_batch(items, cfg);

  std::vector<Json> out;
  out.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    Json j = vrar::data::breakdown_to_json(results[i]);
    j["prompt_id"] = rows[i].prompt_id;
    out.push_back(std::move(j));
  }
  write_output(c.output, out);
  std::cerr << "scored " << out.size() << " rollouts\n";
  return 0;
}

int cmd_advantages(const Common& c) {
  const auto lines = read_input(c.input);
  auto scored = vrar::data::convert_lines(lines, [](const Json& j) {
    if (!j.is_object() || !j.contains("prompt_id") || !j["prompt_id"].is_string())
      throw vrar::InvalidInput("scored line needs a string 'prompt_id'");
    if (!j.contains("total") || !j["total"].is_number()) throw vrar::InvalidInput("scored line needs a numeric 'total'");
    vrar::RewardBreakdown b;
    b.total = j["total"].get<double>();
    b.accuracy = j.value("accuracy", 0);
    b.format = j.value("format", 0);
    b.spec_id = j.value("spec_id", std::string());
    return std::pair<std::string, vrar::RewardBreakdown>(j["prompt_id"].get<std::string>(), b);
  });
  const auto groups = vrar::assemble_groups(scored, c.group_size);
  const auto adv = c.serial ? vrar::batch_advantages_serial(groups) : vrar::batch_advantages(groups);
  std::vector<Json> out;
  std::size_t degenerate = 0;
  for (const auto& a : adv) {
    degenerate += a.degenerate;
    out.push_back(vrar::data::advantage_to_json(a));
  }
  write_output(c.output, out);
  std::cerr << out.size() << " groups (" << degenerate << " degenerate)\n";
  return 0;
}

void write_audit(const fs::path& path, const std::vector<std::pair<std::string, std::vector<vrar::judge::JudgeCall>>>& calls) {
  if (path.empty()) return;
  std::vector<Json> lines;
  for (const auto& [id, list] : calls) {
    for (const auto& call : list) lines.push_back(vrar::data::call_to_json(call, id));
  }
  vrar::data::write_jsonl(path, lines);
}

int cmd_curate(const Common& c, vrar::curation::Workflow workflow) {
  using namespace vrar::curation;
  const auto lines = read_input(c.input);
  const auto samples = vrar::data::convert_lines(lines, [](const Json& j) { return vrar::data::sample_from_json(j); });

  auto client = vrar::judge::make_client(backend_config(c.backend, c.strict_mock));
  std::shared_ptr<vrar::judge::JudgeClient> baseline;
  if (!c.baseline_backend.empty()) baseline = vrar::judge::make_client(backend_config(c.baseline_backend, c.strict_mock));
  const auto tmpl = templates(c);

  PipelineOptions options;
  options.workflow = workflow;
  options.baseline = baseline.get();
  options.parallel = !c.serial;
  const auto outcomes = run_pipeline(samples, *client, tmpl, options);

  std::vector<CuratedRecord> kept;
  std::vector<Json> rejected;
  std::map<std::string, std::size_t> by_stage;
  std::vector<std::pair<std::string, std::vector<vrar::judge::JudgeCall>>> calls;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    calls.emplace_back(samples[i].id, o.calls);
    if (o.record) {
      kept.push_back(*o.record);
    } else {
      const auto& d = o.final_decision();
      ++by_stage[d.stage];
      Json audit = Json::array();
      for (const auto& a : o.audit) audit.push_back(vrar::data::decision_to_json(a));
      rejected.push_back({{"id", samples[i].id}, {"stage", d.stage}, {"detail", d.detail}, {"audit", audit}});
    }
  }

  std::vector<std::size_t> chosen(kept.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) chosen[i] = i;
  if (!c.balance.empty()) {
    std::ifstream in(c.balance);
    if (!in) throw vrar::InvalidInput("cannot open " + c.balance.string());
    std::stringstream ss;
    ss << in.rdbuf();
    chosen = balance_distribution(kept, balance_targets_from_json_text(ss.str()), c.seed);
  }

  std::vector<Json> out;
  for (auto i : chosen) out.push_back(vrar::data::record_to_json(kept[i]));
  write_output(c.output, out);
  if (!c.rejects.empty()) vrar::data::write_jsonl(c.rejects, rejected);
  write_audit(c.audit, calls);

  std::cerr << samples.size() << " samples: " << kept.size() << " accepted, " << rejected.size() << " rejected";
  if (chosen.size() != kept.size()) std::cerr << ", " << chosen.size() << " kept after balancing";
  std::cerr << "\n";
  for (const auto& [stage, n] : by_stage) std::cerr << "  rejected at " << stage << ": " << n << "\n";
  return 0;
}

int cmd_refine(const Common& c) {
  const auto lines = read_input(c.input);
  const auto inputs =
      vrar::data::convert_lines(lines, [](const Json& j) { return vrar::data::cold_start_input_from_json(j); });
  auto client = vrar::judge::make_client(backend_config(c.backend, c.strict_mock));
  const auto tmpl = templates(c);
  vrar::cot::ColdStartOptions options;
  options.format = reward_config(c).format;
  const auto outcomes = vrar::cot::run_cold_start(inputs, *client, tmpl, options, !c.serial);

  std::vector<Json> out;
  std::vector<Json> rejected;
  std::vector<std::pair<std::string, std::vector<vrar::judge::JudgeCall>>> calls;
  std::size_t warnings = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    calls.emplace_back(inputs[i].id, o.calls);
    Json audit = Json::array();
    for (const auto& a : o.audit) audit.push_back({{"stage", a.stage}, {"detail", a.detail}});
    if (o.record) {
      out.push_back(vrar::data::sft_to_json(*o.record));
      warnings += o.audit.size() - 1;  // the last entry is the emit note
    } else {
      rejected.push_back({{"id", inputs[i].id}, {"audit", audit}});
    }
  }
  write_output(c.output, out);
  if (!c.rejects.empty()) vrar::data::write_jsonl(c.rejects, rejected);
  write_audit(c.audit, calls);
  std::cerr << inputs.size() << " inputs: " << out.size() << " records, " << rejected.size() << " rejected, "
            << warnings << " warnings\n";
  return 0;
}

int cmd_eval(const Common& c) {
  const auto lines = read_input(c.input);
  const auto records =
      vrar::data::convert_lines(lines, [](const Json& j) { return vrar::data::eval_record_from_json(j); });
  auto client = vrar::judge::make_client(backend_config(c.backend, c.strict_mock));
  const auto tmpl = templates(c);
  const auto run = vrar::evaluation::run_evaluation(records, *client, tmpl, !c.serial);

  const std::string json = vrar::evaluation::report_json(run.report);
  if (c.output.empty() || c.output == "-") {
    std::cout << json;
  } else {
    std::ofstream out(c.output, std::ios::binary | std::ios::trunc);
    if (!(out << json)) throw vrar::InvalidInput("cannot write " + c.output.string());
  }
  if (c.table) std::cerr << vrar::evaluation::report_table(run.report, c.label);
  std::vector<std::pair<std::string, std::vector<vrar::judge::JudgeCall>>> calls;
  for (const auto& call : run.calls) calls.push_back({"", {call}});
  write_audit(c.audit, calls);
  return 0;
}

volatile std::sig_atomic_t g_signal = 0;

extern "C" void on_signal(int sig) { g_signal = sig; }

int cmd_serve(const Common& c) {
  vrar::service::ServiceConfig cfg;
  cfg.host = c.host;
  cfg.port = c.port;
  cfg.spec_store = c.specs;
  cfg.reward = reward_config(c);
  cfg.group_size = c.group_size;
  cfg.threads = c.threads;
  auto store = c.specs.empty() ? std::make_shared<const vrar::data::SpecStore>() : vrar::data::SpecStore::load(c.specs);
  vrar::service::ScoringService service(cfg, store);
  const int port = service.bind();
  std::cerr << "listening on " << c.host << ":" << port << " with " << store->size() << " specs\n";

  std::signal(SIGHUP, on_signal);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::thread server([&] { service.listen(); });
  while (true) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    const int sig = g_signal;
    if (sig == 0) continue;
    g_signal = 0;
    if (sig == SIGHUP) {
      const auto reply = service.reload();
      std::cerr << "reload: " << reply.body << "\n";
      continue;
    }
    break;
  }
  service.stop();
  server.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verifiable role-awareness rewards: scoring, curation, refinement and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(vrar::service::kVersion));
  Common c;

  auto io = [&](CLI::App* sub, bool needs_backend) {
    sub->add_option("--input", c.input, "Input JSONL (default stdin)");
    sub->add_option("--output", c.output, "Output file (default stdout)");
    sub->add_option("--config", c.config, "Reward/format config JSON")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "Seed for every random choice");
    sub->add_flag("--serial", c.serial, "Use the serial reference path");
    if (needs_backend) {
      sub->add_option("--backend", c.backend, "Judge backend config JSON, or mock:FIXTURES")->required();
      sub->add_flag("--strict-mock", c.strict_mock, "Fail on any mock fixture miss");
      sub->add_option("--templates", c.templates, "Prompt template overrides JSON")->check(CLI::ExistingFile);
      sub->add_option("--audit", c.audit, "Write every judge call as JSONL");
    }
  };

  auto* score = app.add_subcommand("score", "Score rollouts against reward specs");
  io(score, false);
  score->add_option("--specs", c.specs, "Spec store JSONL")->check(CLI::ExistingFile);

  auto* adv = app.add_subcommand("advantages", "Group-normalized advantages from scored rollouts");
  io(adv, false);
  adv->add_option("--group-size", c.group_size, "Rollouts per prompt")->capture_default_str();

  std::vector<std::pair<CLI::App*, vrar::curation::Workflow>> curate;
  for (auto [name, wf] : {std::pair{"curate-stv", vrar::curation::Workflow::stv},
                          std::pair{"curate-mtdp", vrar::curation::Workflow::mtdp}}) {
    auto* sub = app.add_subcommand(name, wf == vrar::curation::Workflow::stv ? "Single-keyword curation"
                                                                               : "Verification-expression curation");
    io(sub, true);
    sub->add_option("--rejects", c.rejects, "Write rejected samples with their audit trail");
    sub->add_option("--baseline-backend", c.baseline_backend, "Enable hard-sample filtering with this backend");
    sub->add_option("--balance", c.balance, "Balance targets JSON")->check(CLI::ExistingFile);
    curate.emplace_back(sub, wf);
  }

  auto* refine = app.add_subcommand("refine-cot", "Build cold-start SFT records");
  io(refine, true);
  refine->add_option("--rejects", c.rejects, "Write dropped inputs with their audit trail");

  auto* eval = app.add_subcommand("eval", "Judge responses and report per-metric accuracy");
  io(eval, true);
  eval->add_flag("--table", c.table, "Also print a text table to stderr");
  eval->add_option("--label", c.label, "Model label for the table");

  auto* serve = app.add_subcommand("serve", "Run the scoring service");
  serve->add_option("--config", c.config, "Reward/format config JSON")->check(CLI::ExistingFile);
  serve->add_option("--specs", c.specs, "Spec store JSONL (reloaded on SIGHUP)")->check(CLI::ExistingFile);
  serve->add_option("--host", c.host)->capture_default_str();
  serve->add_option("--port", c.port)->capture_default_str();
  serve->add_option("--threads", c.threads)->capture_default_str();
  serve->add_option("--group-size", c.group_size)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*score) return cmd_score(c);
    if (*adv) return cmd_advantages(c);
    for (auto [sub, wf] : curate) {
      if (*sub) return cmd_curate(c, wf);
    }
    if (*refine) return cmd_refine(c);
    if (*eval) return cmd_eval(c);
    if (*serve) return cmd_serve(c);
  } catch (const vrar::curation::InfeasibleTargets& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const vrar::SchemaError& e) {
    std::cerr << "error: " << (c.input.empty() ? std::string("stdin") : c.input.string()) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
