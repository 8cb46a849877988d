#include "vrar/dataset.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace vrar;
using namespace vrar::data;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / ("vrar_dataset_" + name);
  std::ofstream(path, std::ios::binary) << content;
  return path;
}

}  // namespace

TEST_CASE("jsonl parsing keeps line numbers") {
  const auto lines = parse_jsonl("{\"a\":1}\n\n  \n{\"a\":2}\r\n{\"a\":3}");
  REQUIRE(lines.size() == 3);
  CHECK(lines[0].line == 1);
  CHECK(lines[1].line == 4);
  CHECK(lines[2].line == 5);
  CHECK(lines[2].value.at("a") == 3);

  try {
    (void)parse_jsonl("{}\n{}\n{oops\n");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).rfind("line 3: ", 0) == 0);
  }
  CHECK(parse_jsonl("").empty());
  CHECK_THROWS_AS(read_jsonl("/nonexistent/file.jsonl"), InvalidInput);
}

TEST_CASE("convert_lines reports the failing line") {
  const auto lines = parse_jsonl("{\"id\":\"a\",\"type\":\"STV\",\"keyword\":\"k\"}\n\n{\"id\":\"b\",\"type\":\"STV\"}\n");
  try {
    (void)convert_lines(lines, [](const Json& j) { return spec_from_json(j); });
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("keyword") != std::string::npos);
  }
}

TEST_CASE("reward specs") {
  const auto stv = spec_from_json(Json::parse(R"({"id":"s","type":"STV","keyword":"灵隐寺"})"));
  CHECK(stv.label == SpecLabel::stv);
  CHECK(stv.keyword == "灵隐寺");
  const auto mtdp = spec_from_json(Json::parse(R"j({"id":"m","label":"MTDP","expression":"any(contains(\"a\"),contains(\"b\"))"})j"));
  CHECK(mtdp.label == SpecLabel::mtdp);
  CHECK(spec_to_json(mtdp).at("expression") == R"(any(contains("a"), contains("b")))");
  CHECK(spec_from_json(spec_to_json(stv)).keyword == stv.keyword);

  CHECK_THROWS_AS(spec_from_json(Json::parse(R"({"id":"x","type":"XYZ","keyword":"k"})")), InvalidInput);
  CHECK_THROWS_AS(spec_from_json(Json::parse(R"j({"id":"x","type":"MTDP","expression":"contains(a)"})j")), InvalidInput);
  CHECK_THROWS_AS(spec_from_json(Json::parse(R"({"id":"x","type":"STV","keyword":""})")), InvalidInput);
  CHECK_THROWS_AS(spec_from_json(Json::parse(R"({"type":"STV","keyword":"k"})")), InvalidInput);
  CHECK_THROWS_AS(spec_from_json(Json::parse(R"({"id":7,"type":"STV","keyword":"k"})")), InvalidInput);
  CHECK_THROWS_AS(spec_from_json(Json::parse("[]")), InvalidInput);
}

TEST_CASE("curation samples") {
  const auto s = sample_from_json(Json::parse(R"({
    "id":"q1","profile":"剑客","question":"你师父是谁？",
    "dialogue":[{"speaker":"用户","utterance":"你好"}],
    "references":["我师父是张三丰"],"candidate_keywords":["张三丰"],"source":"benchmark"})"));
  CHECK(s.source == curation::SourceTag::benchmark);
  CHECK(s.dialogue_history.size() == 1);
  CHECK(s.candidate_keywords == std::vector<std::string>{"张三丰"});
  const auto back = sample_from_json(sample_to_json(s));
  CHECK(back.question == s.question);
  CHECK(back.dialogue_history == s.dialogue_history);

  CHECK_THROWS_AS(sample_from_json(Json::parse(R"({"id":"q","question":"谁？","source":"benchmark"})")), InvalidInput);
  CHECK_THROWS_AS(sample_from_json(Json::parse(R"({"id":"q","question":"  "})")), InvalidInput);
  CHECK_THROWS_AS(sample_from_json(Json::parse(R"({"id":"q","question":"谁？","references":[1]})")), InvalidInput);
  CHECK_THROWS_AS(sample_from_json(Json::parse(R"({"id":"q","question":"谁？","dialogue":[{"speaker":"a"}]})")),
                  InvalidInput);
  CHECK_THROWS_AS(sample_from_json(Json::parse(R"({"id":"q","question":"谁？","source":"web"})")), InvalidInput);
}

TEST_CASE("curated record serialization") {
  curation::CuratedRecord r;
  r.spec = RewardSpec::stv("s1", "灵隐寺");
  r.question = "你在哪出家？";
  r.dialogue = {{"a", "b"}};
  r.profile = "僧人";
  r.question_type = curation::QuestionType::wh;
  r.audit = {curation::CurationDecision::accept("question_type", "WH"),
             curation::CurationDecision::reject("x", "y")};
  const Json j = record_to_json(r);
  CHECK(j.at("type") == "STV");
  CHECK(j.at("meta").at("question_type") == "WH");
  CHECK(j.at("meta").at("audit").size() == 2);
  const auto back = record_from_json(j);
  CHECK(back.spec.keyword == "灵隐寺");
  CHECK(back.audit == r.audit);
  CHECK(back.question_type == r.question_type);
  CHECK(dump_line(j).find("灵隐寺") != std::string::npos);  // unescaped UTF-8
  CHECK(dump_line(j).find('\n') == std::string::npos);
}

TEST_CASE("other record schemas") {
  const auto in = cold_start_input_from_json(Json::parse(R"({"id":"c","profile":"p","cot":"想"})"));
  CHECK(in.raw_cot == "想");
  CHECK_THROWS_AS(cold_start_input_from_json(Json::parse(R"({"id":"c"})")), InvalidInput);

  const auto ev = eval_record_from_json(Json::parse(R"({"id":"e","metric":"TA","response":"r"})"));
  CHECK(ev.metric == evaluation::Metric::TA);
  CHECK_THROWS_AS(eval_record_from_json(Json::parse(R"({"id":"e","metric":"XX","response":"r"})")), InvalidInput);

  cot::ColdStartRecord rec;
  rec.id = "c";
  rec.rendered_target = "<think>想</think>答";
  rec.backend = "mock";
  rec.template_ids = {"cot.style"};
  const Json sft = sft_to_json(rec);
  CHECK(sft.at("target") == rec.rendered_target);
  CHECK(sft.at("provenance").at("templates").at(0) == "cot.style");

  CHECK(breakdown_to_json({1, 0, 1.0, "s"}).at("total") == 1.0);
  CHECK(advantage_to_json({"p", {0.5, -0.5}, false}).at("advantages").size() == 2);
}

TEST_CASE("spec store") {
  const auto path = temp_file("specs.jsonl", R"j({"id":"a","type":"STV","keyword":"甲"}
{"id":"b","type":"MTDP","expression":"not(contains(\"乙\"))"}
)j");
  const auto store = SpecStore::load(path);
  CHECK(store->size() == 2);
  REQUIRE(store->find("b"));
  CHECK(store->find("b")->label == SpecLabel::mtdp);
  CHECK(store->find("zzz") == nullptr);

  const auto dup = temp_file("dup.jsonl", R"({"id":"a","type":"STV","keyword":"甲"}
{"id":"a","type":"STV","keyword":"乙"}
)");
  CHECK_THROWS_AS(SpecStore::load(dup), InvalidInput);

  const auto bad = temp_file("bad.jsonl", "{\"id\":\"a\",\"type\":\"STV\",\"keyword\":\"甲\"}\nnot json\n");
  try {
    (void)SpecStore::load(bad);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 2);
  }

  const auto out = std::filesystem::temp_directory_path() / "vrar_dataset_out.jsonl";
  write_jsonl(out, {spec_to_json(*store->find("a")), spec_to_json(*store->find("b"))});
  CHECK(SpecStore::load(out)->size() == 2);
}
