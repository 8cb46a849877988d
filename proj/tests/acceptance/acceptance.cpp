// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "vrar/advantage.hpp"
#include "vrar/cot.hpp"
#include "vrar/curation.hpp"
#include "vrar/dataset.hpp"
#include "vrar/dsl.hpp"
#include "vrar/evaluation.hpp"
#include "vrar/reward.hpp"
#include "vrar/service.hpp"

#include "gen.hpp"
#include "oracle.hpp"

#include <httplib.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

using namespace vrar;
using data::Json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects the first few failures for the report line.
class Tally {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  Outcome done(const std::string& summary) const {
    if (failures_ == 0) return {true, summary + " (" + std::to_string(checks_) + " checks)"};
    return {false, std::to_string(failures_) + "/" + std::to_string(checks_) + " failed: " + notes_};
  }

 private:
  std::size_t checks_ = 0;
  std::size_t failures_ = 0;
  std::string notes_;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path workdir() {
  const auto dir = fs::temp_directory_path() / "vrar_acceptance";
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + VRAR_CLI_PATH + "\" " + args + " 2>> \"" +
                          (workdir() / "cli_stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const fs::path kGolden = VRAR_GOLDEN_DIR;

// ---------------------------------------------------------------------------

Outcome accuracy_oracle() {
  gen::Rng rng(1001);
  Tally t;
  const auto t0 = Clock::now();
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::string> pool;
    for (int k = 0; k < 3; ++k) pool.push_back(gen::literal(rng));
    std::string response;
    if (rng.chance(50)) {
      const std::string kw = pool[0];
      const std::string near = rng.chance(50) ? gen::perturb(rng, kw) : kw;
      response = gen::text(rng, 6) + (rng.chance(70) ? near : "") + gen::text(rng, 6);
      if (rng.chance(50)) response = "<think>" + gen::text(rng, 4) + "</think>" + response;
      const auto spec = RewardSpec::stv("s", kw);
      t.expect(accuracy_reward(spec, response) == (oracle::stv_accuracy(kw, response) ? 1 : 0), "STV " + kw);
    } else {
      const dsl::Expr e = gen::expr(rng, 5, pool);
      response = gen::text_from_pool(rng, pool, 14);
      const auto spec = RewardSpec::mtdp("m", e);
      t.expect(accuracy_reward(spec, response) == (oracle::evaluate(e, response) ? 1 : 0), "MTDP " + dsl::render(e));
    }
  }
  const double secs = seconds_since(t0);
  t.expect(secs < 5.0, "runtime " + std::to_string(secs) + " s");
  std::ostringstream os;
  os << "1000 pairs agree, " << secs << " s";
  return t.done(os.str());
}

Outcome format_boundaries() {
  struct Case {
    std::string raw;
    int want;
    const char* why;
  };
  const std::string hanzi7 = "我们今天去城里";  // 7 CJK
  std::string pad;  // keeps the ratio far above the threshold
  for (int i = 0; i < 20; ++i) pad += hanzi7;
  const std::vector<Case> cases = {
      {"<think>想一想</think>好的", 1, "well formed"},
      {"想一想</think>好的", 0, "missing open tag"},
      {"<think>想一想好的", 0, "missing close tag"},
      {"</think>想一想<think>好的", 0, "tags reversed"},
      {"<think>想</think><think>想</think>好的", 0, "two think blocks"},
      {"<think></think>好的", 0, "empty think"},
      {"<think>  \n </think>好的", 0, "whitespace think"},
      {"<think>想一想</think>", 0, "empty answer"},
      {"<think>想一想</think>　 ", 0, "whitespace answer"},
      {"好的", 0, "no tags"},
      {"<THINK>想一想</THINK>好的", 0, "upper-case tags"},
      {"<think>你好吗</think>我们是好abc", 0, "ratio exactly 0.70"},
      {"<think>" + hanzi7 + hanzi7 + hanzi7 + hanzi7 + hanzi7 + hanzi7 + hanzi7 + hanzi7 + hanzi7 + hanzi7 +
           "一</think>" + std::string(29, 'x'),
       1, "ratio 0.71"},
      {"<think>" + hanzi7 + hanzi7 + hanzi7 + hanzi7 + hanzi7 + hanzi7 + hanzi7 + hanzi7 + hanzi7 + "我们今天去城"
           "</think>" + std::string(31, 'x'),
       0, "ratio 0.69"},
      {"<think>thinking</think>answer", 0, "all Latin"},
      {"<think>想 一 想</think>好 的 呀", 1, "whitespace ignored in ratio"},
      {"<think>想一想</think><|im_end|>", 0, "answer is a special token"},
      {"<think>想一想</think>  </s>  ", 0, "trimmed answer is a special token"},
      {"<think>" + pad + "</think>好的</s>", 1, "special token inside answer, once"},
      {"<think>" + pad + "</s></s></think>好的</s>", 1, "special token three times"},
      {"<think>" + pad + "</s></s></think>好的</s></s>", 0, "special token four times"},
      {"<think>" + pad + "<|eot_id|><|eot_id|></think>好的<|eot_id|>", 1, "another token three times"},
      {"<think>" + pad + "<|eot_id|><|eot_id|><|eot_id|></think>好的<|eot_id|>", 0, "another token four times"},
      {"<think>想一想</think>好的<think>", 0, "stray open tag in answer"},
  };
  Tally t;
  for (const auto& c : cases) {
    t.expect(format_reward(c.raw) == c.want, c.why);
  }
  // The ratio cases are constructed to land on 70/100, 71/100 and 69/100 once the tags are gone.
  const auto ratio = [](std::string s) {
    for (const std::string tag : {"<think>", "</think>"}) {
      for (auto at = s.find(tag); at != std::string::npos; at = s.find(tag)) s.erase(at, tag.size());
    }
    return chinese_ratio(s);
  };
  t.expect(std::fabs(ratio(cases[12].raw) - 0.71) < 1e-12, "0.71 construction");
  t.expect(std::fabs(ratio(cases[13].raw) - 0.69) < 1e-12, "0.69 construction");
  t.expect(std::fabs(ratio(cases[11].raw) - 0.70) < 1e-12, "0.70 construction");
  return t.done(std::to_string(cases.size()) + " hand-built strings");
}

Outcome dsl_properties() {
  gen::Rng rng(1002);
  Tally t;
  for (int i = 0; i < 500; ++i) {
    std::vector<std::string> pool;
    for (int k = 0; k < 4; ++k) pool.push_back(gen::literal(rng));
    const dsl::Expr e = gen::expr(rng, 8, pool);
    const std::string text = dsl::render(e);
    const auto back = dsl::parse(text);
    t.expect(back.ok() && *back.expr == e && dsl::render(*back.expr) == text, "round trip " + text);
  }
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::string> pool;
    for (int k = 0; k < 4; ++k) pool.push_back(gen::literal(rng));
    const dsl::Expr e = gen::expr(rng, 6, pool);
    const std::string resp = gen::text_from_pool(rng, pool, 16);
    t.expect(dsl::evaluate(e, resp) == oracle::evaluate(e, resp), "evaluate " + dsl::render(e));
  }
  std::size_t diagnostics = 0;
  const std::string alphabet = "contains_count_at_least_not_all_any(\"\\), 0123456789";
  for (int i = 0; i < 10000; ++i) {
    std::string s(rng.below(64), '\0');
    const bool grammar_ish = rng.chance(50);
    for (auto& c : s) c = grammar_ish ? alphabet[rng.below(alphabet.size())] : static_cast<char>(rng.below(256));
    try {
      const auto r = dsl::parse(s);
      if (!r) {
        ++diagnostics;
        t.expect(r.diagnostic.offset <= s.size() && !r.diagnostic.expected.empty(), "diagnostic shape");
      }
    } catch (...) {
      t.expect(false, "parser threw on fuzz input");
    }
  }
  return t.done("500 round trips, 1000 oracle pairs, 10000 fuzz inputs (" + std::to_string(diagnostics) +
                " diagnostics)");
}

Outcome advantage_properties() {
  gen::Rng rng(1003);
  Tally t;
  double worst_sum = 0, worst_shift = 0, worst_scale = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> r(7);
    const bool discrete = rng.chance(50);
    for (auto& v : r) v = discrete ? static_cast<double>(rng.below(3)) : rng.unit() * 2.0;
    const auto a = group_advantages({"p", r});
    if (!a.degenerate) {
      double sum = 0;
      for (double v : a.advantages) sum += v;
      worst_sum = std::max(worst_sum, std::fabs(sum));
      t.expect(std::fabs(sum) < 1e-9, "centering");
    } else {
      t.expect(a.advantages == std::vector<double>(7, 0.0), "degenerate zeros");
    }
    const double c = rng.unit() * 200.0 - 100.0;
    std::vector<double> shifted = r;
    for (auto& v : shifted) v += c;
    const auto b = group_advantages({"p", shifted});
    for (std::size_t k = 0; k < 7; ++k) {
      worst_shift = std::max(worst_shift, std::fabs(a.advantages[k] - b.advantages[k]));
      t.expect(std::fabs(a.advantages[k] - b.advantages[k]) <= 1e-9, "shift invariance");
    }
    const double scale = 0.01 + rng.unit() * 100.0;
    std::vector<double> scaled = r;
    for (auto& v : scaled) v *= scale;
    const auto x = group_advantages({"p", r}, 1e-12);
    const auto y = group_advantages({"p", scaled}, 1e-12);
    for (std::size_t k = 0; k < 7; ++k) {
      worst_scale = std::max(worst_scale, std::fabs(x.advantages[k] - y.advantages[k]));
      t.expect(std::fabs(x.advantages[k] - y.advantages[k]) <= 1e-6, "scale invariance");
    }
    const double level = rng.unit() * 10.0 - 5.0;
    const auto flat = group_advantages({"p", std::vector<double>(7, level)});
    t.expect(flat.degenerate && flat.advantages == std::vector<double>(7, 0.0), "constant group");
  }
  std::ostringstream os;
  os << "1000 groups of 7; max |sum| " << worst_sum << ", shift " << worst_shift << ", scale " << worst_scale;
  return t.done(os.str());
}

// Runs a curation/refinement command twice (parallel and serial) and compares
// both runs with the committed expectation.
void golden_run(Tally& t, const std::string& cmd, const std::string& input, const std::string& expected,
                const std::string& rejects, const std::string& extra = {}) {
  const fs::path dir = workdir();
  for (const char* mode : {"", " --serial"}) {
    const fs::path out = dir / expected;
    const fs::path rej = dir / ("rej_" + expected);
    fs::remove(out);
    fs::remove(rej);
    std::string args = cmd + " --input \"" + (kGolden / input).string() + "\" --output \"" + out.string() +
                       "\" --backend \"" + (kGolden / "backend.json").string() + "\" --strict-mock" + mode + extra;
    if (!rejects.empty()) args += " --rejects \"" + rej.string() + "\"";
    const int code = run_cli(args);
    t.expect(code == 0, cmd + mode + " exited " + std::to_string(code));
    t.expect(slurp(out) == slurp(kGolden / expected), expected + mode + " differs from golden");
    if (!rejects.empty()) t.expect(slurp(rej) == slurp(kGolden / rejects), rejects + mode + " differs from golden");
  }
}

std::string final_stage(const Json& line) {
  const Json& audit = line.contains("meta") ? line.at("meta").at("audit") : line.at("audit");
  return audit.back().at("stage").get<std::string>();
}

Outcome curation_determinism() {
  Tally t;
  golden_run(t, "curate-stv", "samples.jsonl", "expected_stv.jsonl", "expected_stv_rejects.jsonl");
  golden_run(t, "curate-mtdp", "samples.jsonl", "expected_mtdp.jsonl", "expected_mtdp_rejects.jsonl");
  golden_run(t, "curate-stv", "samples.jsonl", "expected_stv_balanced.jsonl", "",
             " --balance \"" + (kGolden / "balance.json").string() + "\" --seed 20250101");

  t.expect(data::read_jsonl(kGolden / "samples.jsonl").size() == 50, "corpus has 50 samples");

  // Every sample's outcome matches the intent it was built for.
  std::map<std::string, Json> got;
  for (const auto& [file, key, accepted] :
       {std::tuple{"expected_stv.jsonl", "stv", true}, std::tuple{"expected_stv_rejects.jsonl", "stv", false},
        std::tuple{"expected_mtdp.jsonl", "mtdp", true}, std::tuple{"expected_mtdp_rejects.jsonl", "mtdp", false}}) {
    for (const auto& l : data::read_jsonl(kGolden / file)) {
      got[l.value.at("id").get<std::string>() + "/" + key] = {{"accepted", accepted}, {"stage", final_stage(l.value)}};
    }
  }
  std::size_t matched = 0;
  for (const auto& l : data::read_jsonl(kGolden / "intent.jsonl")) {
    const std::string id = l.value.at("id");
    for (const char* key : {"stv", "mtdp"}) {
      const Json& want = l.value.at(key);
      auto it = got.find(id + "/" + key);
      const bool ok = it != got.end() && it->second.at("accepted") == want.at("accepted") &&
                      it->second.at("stage") == want.at("stage");
      t.expect(ok, id + " " + key + " outcome");
      matched += ok;
    }
  }

  // The 70% gate on the corpus: 8/10 kept, 7/10 dropped.
  std::size_t kept8 = 0, dropped7 = 0;
  for (const auto& [file, accepted] : {std::pair{"expected_mtdp.jsonl", true}, std::pair{"expected_mtdp_rejects.jsonl", false}}) {
    for (const auto& l : data::read_jsonl(kGolden / file)) {
      const Json& audit = l.value.contains("meta") ? l.value.at("meta").at("audit") : l.value.at("audit");
      const std::string detail = audit.back().at("detail");
      if (detail == "8/10 agreement") {
        t.expect(accepted, "8/10 fixture rejected");
        ++kept8;
      }
      if (detail == "7/10 agreement") {
        t.expect(!accepted, "7/10 fixture retained");
        ++dropped7;
      }
    }
  }
  t.expect(kept8 > 0 && dropped7 > 0, "corpus exercises both sides of the gate");
  t.expect(curation::consistency_gate(8, 10) && !curation::consistency_gate(7, 10), "gate function");
  return t.done("byte-identical across parallel and serial runs; " + std::to_string(matched) + " intents; " +
                std::to_string(kept8) + " at 8/10 kept, " + std::to_string(dropped7) + " at 7/10 dropped");
}

Outcome cold_start_validity() {
  Tally t;
  golden_run(t, "refine-cot", "cold_start.jsonl", "expected_sft.jsonl", "expected_sft_rejects.jsonl");
  const auto emitted = data::read_jsonl(workdir() / "expected_sft.jsonl");
  std::set<std::string> ids;
  for (const auto& l : emitted) {
    const std::string target = l.value.at("target");
    t.expect(format_reward(target) == 1, l.value.at("id").get<std::string>() + " fails format");
    ids.insert(l.value.at("id"));
  }
  std::set<std::string> dropped;
  for (const auto& l : data::read_jsonl(workdir() / "rej_expected_sft.jsonl")) {
    dropped.insert(l.value.at("id"));
  }
  for (const auto& l : data::read_jsonl(kGolden / "cold_intent.jsonl")) {
    const std::string id = l.value.at("id");
    const Json& want = l.value.at("cold");
    t.expect(want.at("emitted").get<bool>() ? ids.count(id) == 1 : dropped.count(id) == 1, id + " outcome");
  }

  gen::Rng rng(1004);
  const std::vector<std::string> brackets = {"(", ")", "（", "）", "[", "]", "【", "】"};
  for (int i = 0; i < 1000; ++i) {
    std::string s;
    const std::size_t n = 1 + rng.below(40);
    for (std::size_t k = 0; k < n; ++k) s += rng.chance(25) ? rng.pick(brackets) : rng.pick(gen::units());
    const auto once = cot::strip_meta_annotations(s);
    t.expect(cot::strip_meta_annotations(once.text).text == once.text, "strip not idempotent on " + s);
  }
  return t.done(std::to_string(emitted.size()) + " SFT records with format reward 1; 1000 strip idempotence cases");
}

Outcome service_conformance() {
  Tally t;
  gen::Rng rng(1005);
  std::vector<RewardSpec> specs;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> pool = {gen::literal(rng), gen::literal(rng), gen::literal(rng)};
    if (i % 2) {
      specs.push_back(RewardSpec::stv("s" + std::to_string(i), pool[0]));
    } else {
      specs.push_back(RewardSpec::mtdp("s" + std::to_string(i), gen::expr(rng, 4, pool)));
    }
  }
  auto store = std::make_shared<const data::SpecStore>(specs);

  auto make_response = [&](const RewardSpec& spec) {
    const std::vector<std::string> pool =
        spec.label == SpecLabel::stv ? std::vector<std::string>{spec.keyword} : dsl::literals(*spec.expression);
    std::string answer = gen::text_from_pool(rng, pool, 10);
    if (rng.chance(60)) {
      std::string cjk;
      for (int k = 0; k < 20; ++k) cjk += rng.pick(gen::cjk_units());
      return "<think>" + cjk + "</think>" + cjk + answer;
    }
    return answer;
  };

  Json batch = Json::array();
  std::vector<std::string> responses;
  std::vector<const RewardSpec*> refs;
  for (int i = 0; i < 10000; ++i) {
    const auto& spec = specs[rng.below(specs.size())];
    std::string resp = make_response(spec);
    if (rng.chance(10)) {
      batch.push_back({{"spec", data::spec_to_json(spec)}, {"response", resp}});
    } else {
      batch.push_back({{"spec_id", spec.id}, {"response", resp}});
    }
    responses.push_back(std::move(resp));
    refs.push_back(store->find(spec.id));
  }
  Json expected = Json::array();
  for (std::size_t i = 0; i < responses.size(); ++i) expected.push_back(data::breakdown_to_json(total_reward(*refs[i], responses[i])));

  service::ServiceConfig cfg;
  cfg.port = 0;
  cfg.threads = 8;
  service::ScoringService svc(cfg, store);
  const int port = svc.bind();
  std::thread server([&] { svc.listen(); });

  auto post = [port](const std::string& path, const std::string& body) -> std::optional<Json> {
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(120);
    for (int attempt = 0; attempt < 50; ++attempt) {
      auto res = client.Post(path, body, "application/json");
      if (res) {
        if (res->status != 200) return std::nullopt;
        return Json::parse(res->body);
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    return std::nullopt;
  };

  const std::string body = batch.dump();
  const auto whole = post("/v1/score_batch", body);
  t.expect(whole && *whole == expected, "10000-item batch differs from serial library calls");

  // Eight clients at once, each sending a slice of the batch.
  std::vector<std::optional<Json>> slices(8);
  std::vector<std::thread> clients;
  const std::size_t per = batch.size() / 8;
  for (std::size_t c = 0; c < 8; ++c) {
    clients.emplace_back([&, c] {
      Json part(batch.begin() + static_cast<std::ptrdiff_t>(c * per),
                batch.begin() + static_cast<std::ptrdiff_t>((c + 1) * per));
      slices[c] = post("/v1/score_batch", part.dump());
    });
  }
  for (auto& th : clients) th.join();
  for (std::size_t c = 0; c < 8; ++c) {
    Json want(expected.begin() + static_cast<std::ptrdiff_t>(c * per),
              expected.begin() + static_cast<std::ptrdiff_t>((c + 1) * per));
    t.expect(slices[c] && *slices[c] == want, "concurrent slice " + std::to_string(c));
  }

  // Single-request endpoint from eight threads.
  std::atomic<int> single_mismatch{0};
  clients.clear();
  for (std::size_t c = 0; c < 8; ++c) {
    clients.emplace_back([&, c] {
      for (std::size_t i = c; i < 400; i += 8) {
        const auto got = post("/v1/score", batch[i].dump());
        if (!got || *got != expected[i]) ++single_mismatch;
      }
    });
  }
  for (auto& th : clients) th.join();
  t.expect(single_mismatch == 0, std::to_string(single_mismatch.load()) + " single-request mismatches");

  // Sustained STV throughput through the HTTP batch endpoint.
  Json stv = Json::array();
  for (int i = 0; i < 20000; ++i) {
    const auto& spec = specs[1 + 2 * rng.below(specs.size() / 2)];
    stv.push_back({{"spec_id", spec.id}, {"response", make_response(spec)}});
  }
  const std::string stv_body = stv.dump();
  const auto t0 = Clock::now();
  std::size_t scored = 0;
  for (int round = 0; round < 3; ++round) {
    const auto r = post("/v1/score_batch", stv_body);
    t.expect(r && r->size() == stv.size(), "throughput batch failed");
    if (r) scored += r->size();
  }
  const double rate = static_cast<double>(scored) / seconds_since(t0);
  t.expect(rate >= 1000.0, "throughput " + std::to_string(rate) + " STV/s");

  svc.stop();
  server.join();
  std::ostringstream os;
  os << "10000-item batch and 8-way concurrent submissions equal serial scoring; " << static_cast<long>(rate)
     << " STV scores/s over HTTP";
  return t.done(os.str());
}

Outcome evaluation_aggregation() {
  Tally t;
  using evaluation::Metric;
  std::vector<std::pair<Metric, bool>> j;
  for (int i = 0; i < 92; ++i) j.emplace_back(Metric::SBK, i < 81);
  const auto r = evaluation::metric_accuracy(j);
  t.expect(r.metrics.at(Metric::SBK).percent() == "88.04", "81/92 -> " + r.metrics.at(Metric::SBK).percent());

  gen::Rng rng(1006);
  for (int round = 0; round < 500; ++round) {
    std::vector<std::pair<Metric, bool>> judged;
    std::map<Metric, std::pair<std::uint64_t, std::uint64_t>> counts;
    const std::size_t n = 1 + rng.below(1000);
    for (std::size_t i = 0; i < n; ++i) {
      const Metric m = evaluation::kAllMetrics[rng.below(6)];
      const bool ok = rng.chance(static_cast<unsigned>(rng.below(101)));
      judged.emplace_back(m, ok);
      counts[m].first += ok;
      counts[m].second += 1;
    }
    const auto report = evaluation::metric_accuracy(judged);
    t.expect(report.metrics.size() == counts.size(), "metric set");
    for (const auto& [m, c] : counts) {
      const auto& s = report.metrics.at(m);
      t.expect(s.correct == c.first && s.total == c.second, "counts");
      t.expect(s.hundredths == oracle::hundredths(c.first, c.second), "rounding");
    }
  }
  for (std::uint64_t total = 1; total <= 300; ++total) {
    for (std::uint64_t correct = 0; correct <= total; ++correct) {
      t.expect(evaluation::percent_hundredths(correct, total) == oracle::hundredths(correct, total),
               std::to_string(correct) + "/" + std::to_string(total));
    }
  }
  return t.done("81/92 -> 88.04; 500 synthetic judgment sets and every fraction up to 300 match exact rounding");
}

}  // namespace

int main() {
  fs::remove(workdir() / "cli_stderr.txt");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"accuracy reward vs naive oracle", accuracy_oracle},
      {"format reward boundary suite", format_boundaries},
      {"verification DSL round trip, oracle and fuzz", dsl_properties},
      {"group advantages properties", advantage_properties},
      {"curation determinism on the golden corpus", curation_determinism},
      {"cold-start record validity", cold_start_validity},
      {"scoring service conformance", service_conformance},
      {"evaluation aggregation", evaluation_aggregation},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed ? 1 : 0;
}
