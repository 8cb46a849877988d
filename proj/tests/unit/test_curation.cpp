#include "vrar/curation.hpp"

#include "gen.hpp"

#include <doctest.h>

#include <functional>

using namespace vrar;
using namespace vrar::curation;
using vrar::judge::Backend;
using vrar::judge::JudgeClient;
using vrar::judge::JudgeSession;
using vrar::judge::Sampling;
using vrar::judge::TemplateSet;

namespace {

class ScriptBackend final : public Backend {
 public:
  using Script = std::function<std::string(const std::string&)>;
  explicit ScriptBackend(Script s) : script_(std::move(s)) {}
  std::string send(std::string_view prompt, const Sampling&) override { return script_(std::string(prompt)); }
  std::string name() const override { return "script"; }

 private:
  Script script_;
};

bool has(const std::string& s, std::string_view needle) { return s.find(needle) != std::string::npos; }

JudgeClient make(ScriptBackend::Script s, int retries = 0) {
  judge::JudgeBackendConfig cfg;
  cfg.max_retries = retries;
  cfg.backoff_base_seconds = 0;
  return JudgeClient(cfg, std::make_shared<ScriptBackend>(std::move(s)), [](std::chrono::duration<double>) {});
}

CurationSample temple_sample() {
  CurationSample s;
  s.id = "s1";
  s.character_profile = "云游僧人";
  s.dialogue_history = {{"用户", "大师从何处来？"}, {"僧人", "贫僧四处云游。"}};
  s.question = "你是在哪座寺庙出家的？";
  s.references = {"贫僧在灵隐寺出家。", "灵隐寺，那是贫僧出家之地。", "出家之处正是灵隐寺。"};
  return s;
}

const std::string kProbeFragment = "Response to check: ";

std::string probe_of(const std::string& prompt) {
  const auto at = prompt.find(kProbeFragment);
  const auto end = prompt.find("\n", at);
  return prompt.substr(at + kProbeFragment.size(), end - at - kProbeFragment.size());
}

CuratedRecord record_with(std::size_t turns, QuestionType type = QuestionType::wh) {
  CuratedRecord r;
  r.dialogue.assign(turns, Turn{"a", "b"});
  r.question_type = type;
  return r;
}

}  // namespace

TEST_CASE("question classification") {
  CHECK(classify_question("你叫什么名字？") == QuestionType::wh);
  CHECK(classify_question("Who is your master?") == QuestionType::wh);
  CHECK(classify_question("你喜欢吃苹果吗？") == QuestionType::polar);
  CHECK(classify_question("你去不去？") == QuestionType::polar);
  CHECK(classify_question("Is it raining?") == QuestionType::polar);
  CHECK(classify_question("你喝茶还是喝酒？") == QuestionType::alternative);
  CHECK(classify_question("Do you like tea or coffee?") == QuestionType::alternative);
  CHECK(classify_question("你是谁吗？") == QuestionType::polar);  // polar outranks WH
  CHECK(classify_question("说来听听。") == QuestionType::other);
  CHECK(to_string(QuestionType::wh) == "WH");
}

TEST_CASE("keyword cardinality and dedupe") {
  const std::vector<std::string> one = {"灵隐寺"};
  CHECK(enforce_cardinality(one).accepted());
  CHECK(enforce_cardinality(one).detail == "灵隐寺");
  const std::vector<std::string> two = {"甲", "乙"};
  CHECK_FALSE(enforce_cardinality(two).accepted());
  CHECK_FALSE(enforce_cardinality(std::vector<std::string>{}).accepted());

  const std::vector<std::string> dup = {"Café", "cafe\xCC\x81", " CAFÉ ", "", "茶"};
  CHECK(dedupe_keywords(dup) == std::vector<std::string>{"Café", "茶"});
}

TEST_CASE("multi-reference verification") {
  const std::vector<std::string> all4 = {"他叫张三", "张三啊", "是张三", "张三。"};
  CHECK(multiref_verify("张三", all4));
  const std::vector<std::string> three = {"他叫张三", "张三啊", "是李四", "张三。"};
  CHECK_FALSE(multiref_verify("张三", three));
  CHECK(multiref_verify("ALICE", std::vector<std::string>{"alice came"}));
  CHECK_THROWS_AS(multiref_verify("", all4), InvalidInput);
  CHECK_THROWS_AS(multiref_verify("  ", all4), InvalidInput);
  CHECK_THROWS_AS(multiref_verify("张三", std::vector<std::string>{}), InvalidInput);
}

TEST_CASE("single-term curation end to end") {
  const auto templates = TemplateSet::defaults();
  auto client = make([](const std::string& p) -> std::string {
    if (has(p, "List the keywords")) return "灵隐寺\n";
    if (has(p, "distinct entity")) return "是";
    return "否";
  });
  JudgeSession session(client, templates);
  const auto out = stv_curate(temple_sample(), session);
  REQUIRE(out.record);
  CHECK(out.record->spec.label == SpecLabel::stv);
  CHECK(out.record->spec.keyword == "灵隐寺");
  CHECK(out.record->question_type == QuestionType::wh);
  CHECK(out.final_decision().stage == "multiref");
  CHECK(out.final_decision().accepted());
  CHECK(out.calls.size() == 2);
  CHECK(out.record->audit == out.audit);
}

TEST_CASE("single-term curation rejections name their stage") {
  const auto templates = TemplateSet::defaults();
  auto polar = temple_sample();
  polar.question = "你在灵隐寺出家吗？";
  auto yes = make([](const std::string&) { return std::string("是"); });
  {
    JudgeSession s(yes, templates);
    const auto out = stv_curate(polar, s);
    CHECK_FALSE(out.record);
    CHECK(out.final_decision().stage == "question_type");
    CHECK(out.calls.empty());
  }
  auto two = make([](const std::string& p) -> std::string {
    if (has(p, "List the keywords")) return "灵隐寺\n杭州";
    return "是";
  });
  {
    JudgeSession s(two, templates);
    CHECK(stv_curate(temple_sample(), s).final_decision().stage == "cardinality");
  }
  auto missing = temple_sample();
  missing.references.push_back("贫僧不记得了。");
  missing.candidate_keywords = {"灵隐寺"};
  {
    JudgeSession s(yes, templates);
    const auto out = stv_curate(missing, s);
    CHECK(out.final_decision().stage == "multiref");
    CHECK_FALSE(out.final_decision().accepted());
    CHECK(out.audit[1].detail.find("candidate") != std::string::npos);
  }
  auto garbled = make([](const std::string& p) -> std::string {
    if (has(p, "List the keywords")) return "灵隐寺";
    return "也许吧";
  });
  {
    JudgeSession s(garbled, templates);
    const auto out = stv_curate(temple_sample(), s);
    CHECK_FALSE(out.record);
    CHECK(out.final_decision().stage == "entity_type");
    CHECK(out.final_decision().detail.find("也许吧") != std::string::npos);
  }
}

TEST_CASE("keyword expansion keeps originals first") {
  const auto templates = TemplateSet::defaults();
  auto client = make([](const std::string&) { return std::string("母亲, 妈, 妈妈"); });
  JudgeSession s(client, templates);
  const std::vector<std::string> kws = {"妈妈"};
  CHECK(expand_keywords(kws, "你最想念谁？", s) == std::vector<std::string>{"妈妈", "母亲", "妈"});
  CHECK(expand_keywords(std::vector<std::string>{}, "q", s).empty());
}

TEST_CASE("expression generation checks literals") {
  const auto templates = TemplateSet::defaults();
  const std::vector<std::string> variants = {"妈妈", "母亲"};
  auto good = make([](const std::string&) { return std::string(R"(any(contains("妈妈"), contains("母亲")))"); });
  auto foreign = make([](const std::string&) { return std::string(R"(any(contains("妈妈"), contains("父亲")))"); });
  auto broken = make([](const std::string&) { return std::string(R"(any(contains("妈妈"))"); });
  {
    JudgeSession s(good, templates);
    const auto out = generate_expression(variants, "q", s);
    REQUIRE(out.expr);
    CHECK(out.decision.accepted());
    CHECK(out.decision.detail == R"(any(contains("妈妈"), contains("母亲")))");
  }
  {
    JudgeSession s(foreign, templates);
    const auto out = generate_expression(variants, "q", s);
    CHECK_FALSE(out.expr);
    CHECK(out.decision.detail.find("父亲") != std::string::npos);
  }
  {
    JudgeSession s(broken, templates);
    const auto out = generate_expression(variants, "q", s);
    CHECK_FALSE(out.expr);
    CHECK(out.decision.detail.find("offset") != std::string::npos);
  }
}

TEST_CASE("consistency gate threshold") {
  CHECK(consistency_gate(8, 10));
  CHECK_FALSE(consistency_gate(7, 10));
  CHECK(consistency_gate(10, 10));
  CHECK_FALSE(consistency_gate(0, 0));
  for (std::size_t p = 1; p <= 40; ++p) {
    for (std::size_t a = 0; a < p; ++a) {
      if (consistency_gate(a, p)) CHECK(consistency_gate(a + 1, p));
      CHECK(consistency_gate(a, p) == (static_cast<double>(a) / static_cast<double>(p) > 0.7 + 1e-12));
    }
  }
}

TEST_CASE("consistency validation counts agreements") {
  const auto templates = TemplateSet::defaults();
  const auto expr = dsl::Expr::contains("妈妈");
  std::vector<std::string> probes;
  for (int i = 0; i < 5; ++i) probes.push_back("我想妈妈" + std::to_string(i));
  for (int i = 0; i < 5; ++i) probes.push_back("我想爸爸" + std::to_string(i));

  for (int disagree = 0; disagree <= 4; ++disagree) {
    auto client = make([&](const std::string& p) -> std::string {
      const std::string probe = probe_of(p);
      bool truth = probe.find("妈妈") != std::string::npos;
      const int idx = probe.back() - '0';
      if (truth && idx < disagree) truth = !truth;
      return truth ? "是" : "否";
    });
    JudgeSession s(client, templates);
    const auto r = consistency_validate(expr, probes, "q", "ref", s);
    CHECK(r.probes == 10);
    CHECK(r.agreements == static_cast<std::size_t>(10 - disagree));
    CHECK(r.retained == (disagree <= 2));
  }
  auto client = make([](const std::string&) { return std::string("是"); });
  JudgeSession s(client, templates);
  CHECK_THROWS_AS(consistency_validate(expr, std::span(probes).first(9), "q", "ref", s), InvalidInput);
}

TEST_CASE("multi-term curation end to end") {
  const auto templates = TemplateSet::defaults();
  CurationSample sample;
  sample.id = "m1";
  sample.question = "你最想念谁？";
  sample.references = {"我最想念妈妈。"};
  sample.candidate_keywords = {"妈妈"};
  for (int i = 0; i < 6; ++i) sample.probe_responses.push_back("想念母亲" + std::to_string(i));
  for (int i = 0; i < 4; ++i) sample.probe_responses.push_back("想念朋友" + std::to_string(i));

  auto client = make([](const std::string& p) -> std::string {
    if (has(p, "variant spellings")) return "母亲、娘";
    if (has(p, "Candidate term: 娘")) return "否";
    if (has(p, "Candidate term")) return "是";
    if (has(p, "verification expression")) return R"(any(contains("妈妈"), contains("母亲")))";
    if (has(p, kProbeFragment)) return probe_of(p).find("母亲") != std::string::npos ? "是" : "否";
    return "否";
  });
  JudgeSession s(client, templates);
  const auto out = mtdp_curate(sample, s);
  REQUIRE(out.record);
  CHECK(out.record->spec.label == SpecLabel::mtdp);
  CHECK(dsl::render(*out.record->spec.expression) == R"(any(contains("妈妈"), contains("母亲")))");
  CHECK(out.final_decision().detail == "10/10 agreement");

  sample.probe_responses.pop_back();
  JudgeSession s2(client, templates);
  const auto short_probes = mtdp_curate(sample, s2);
  CHECK_FALSE(short_probes.record);
  CHECK(short_probes.final_decision().stage == "consistency");
}

TEST_CASE("hard-sample filter") {
  const auto templates = TemplateSet::defaults();
  const auto sample = temple_sample();
  const auto spec = RewardSpec::stv("s1", "灵隐寺");
  auto right = make([](const std::string&) { return std::string("<think>想想</think>灵隐寺"); });
  auto wrong = make([](const std::string&) { return std::string("<think>想想</think>少林寺"); });
  auto checker_yes = make([](const std::string&) { return std::string("是"); });
  JudgeSession checker(checker_yes, templates);
  {
    JudgeSession b(right, templates);
    CHECK_FALSE(hard_sample_filter(sample, b, &spec, checker));
  }
  {
    JudgeSession b(wrong, templates);
    CHECK(hard_sample_filter(sample, b, &spec, checker));
    CHECK(checker.calls().empty());
    CHECK_FALSE(hard_sample_filter(sample, b, nullptr, checker));  // judge says correct
    CHECK(checker.calls().size() == 1);
  }
  auto timeout = make([](const std::string&) -> std::string { throw judge::TransportError("timed out"); }, 1);
  JudgeSession t(timeout, templates);
  CHECK_THROWS_AS(hard_sample_filter(sample, t, &spec, checker), judge::RetriesExhaustedError);
}

TEST_CASE("pipeline keeps order and tags failures") {
  const auto templates = TemplateSet::defaults();
  auto client = make([](const std::string& p) -> std::string {
    if (has(p, "List the keywords")) return "灵隐寺";
    if (has(p, "distinct entity")) return "是";
    if (has(p, "Reply in character")) return "少林寺";
    throw judge::BackendError("unexpected prompt");
  });
  std::vector<CurationSample> samples;
  for (int i = 0; i < 20; ++i) {
    auto s = temple_sample();
    s.id = "s" + std::to_string(i);
    if (i % 3 == 0) s.question = "你在寺里吗？";
    samples.push_back(s);
  }
  PipelineOptions opts;
  opts.baseline = &client;
  const auto par = run_pipeline(samples, client, templates, opts);
  opts.parallel = false;
  const auto ser = run_pipeline(samples, client, templates, opts);
  REQUIRE(par.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(par[i].audit == ser[i].audit);
    CHECK(par[i].record.has_value() == (i % 3 != 0));
    if (par[i].record) {
      CHECK(par[i].record->spec.id == samples[i].id);
      CHECK(par[i].final_decision().stage == "hard_sample");
    }
  }

  samples[7].id = "";
  try {
    (void)run_pipeline(samples, client, templates, opts);
    FAIL("expected SampleError");
  } catch (const SampleError& e) {
    CHECK(e.sample_id().empty());
  }
}

TEST_CASE("history buckets") {
  CHECK(history_bucket(0) == HistoryBucket::short_history);
  CHECK(history_bucket(4) == HistoryBucket::short_history);
  CHECK(history_bucket(5) == HistoryBucket::medium_history);
  CHECK(history_bucket(12) == HistoryBucket::medium_history);
  CHECK(history_bucket(13) == HistoryBucket::long_history);
  CHECK(bucket_key(record_with(3, QuestionType::polar), BalanceTargets::Dimension::joint) == "short/Polar");
}

TEST_CASE("balancing hits uniform targets") {
  std::vector<CuratedRecord> records;
  for (int i = 0; i < 40; ++i) records.push_back(record_with(2));
  for (int i = 0; i < 30; ++i) records.push_back(record_with(8));
  for (int i = 0; i < 30; ++i) records.push_back(record_with(20));
  BalanceTargets t;
  t.proportions = {{"short", 1.0 / 3}, {"medium", 1.0 / 3}, {"long", 1.0 / 3}};
  const auto picked = balance_distribution(records, t, 7);
  CHECK(picked.size() == 90);
  CHECK(std::is_sorted(picked.begin(), picked.end()));
  std::map<std::string, int> counts;
  for (auto i : picked) ++counts[bucket_key(records[i], t.dimension)];
  CHECK(counts["short"] == 30);
  CHECK(counts["medium"] == 30);
  CHECK(counts["long"] == 30);
  CHECK(balance_distribution(records, t, 7) == picked);
  CHECK(balance_distribution(records, t, 8) != picked);

  // Balancing an already balanced set keeps everything.
  std::vector<CuratedRecord> kept;
  for (auto i : picked) kept.push_back(records[i]);
  CHECK(balance_distribution(kept, t, 99).size() == kept.size());
}

TEST_CASE("balancing reports infeasible targets") {
  std::vector<CuratedRecord> records(10, record_with(2));
  BalanceTargets t;
  t.proportions = {{"short", 0.5}, {"long", 0.5}};
  try {
    (void)balance_distribution(records, t, 1);
    FAIL("expected InfeasibleTargets");
  } catch (const InfeasibleTargets& e) {
    CHECK(e.buckets() == std::vector<std::string>{"long"});
  }
  t.proportions = {{"short", 0.5}, {"long", 0.4}};
  CHECK_THROWS_AS(balance_distribution(records, t, 1), InvalidInput);
  CHECK_THROWS_AS(balance_targets_from_json_text(R"({"dimension":"color","proportions":{"a":1}})"), InvalidInput);
  const auto parsed = balance_targets_from_json_text(R"({"dimension":"joint","proportions":{"short/WH":1}})");
  CHECK(parsed.dimension == BalanceTargets::Dimension::joint);
}

TEST_CASE("balancing stays within tolerance on random inputs") {
  gen::Rng rng(41);
  for (int round = 0; round < 200; ++round) {
    std::vector<CuratedRecord> records;
    const std::size_t n = 10 + rng.below(200);
    for (std::size_t i = 0; i < n; ++i) records.push_back(record_with(rng.below(20)));
    BalanceTargets t;
    t.proportions = {{"short", 0.25}, {"medium", 0.5}, {"long", 0.25}};
    t.tolerance = 0.05;
    std::vector<std::size_t> picked;
    try {
      picked = balance_distribution(records, t, rng.next());
    } catch (const InfeasibleTargets&) {
      continue;
    }
    CHECK(picked.size() <= n);
    std::map<std::string, double> counts;
    for (auto i : picked) counts[bucket_key(records[i], t.dimension)] += 1;
    for (const auto& [k, p] : t.proportions) {
      CHECK(std::abs(counts[k] / static_cast<double>(picked.size()) - p) <= 0.05 + 1e-12);
    }
  }
}
