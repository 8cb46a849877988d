#include "vrar/dataset.hpp"

#include "vrar/error.hpp"
#include "vrar/unicode.hpp"

#include <fstream>
#include <sstream>

namespace vrar::data {

namespace {

std::string required_string(const Json& j, const char* key) {
  if (!j.is_object()) throw InvalidInput("record must be a JSON object");
  auto it = j.find(key);
  if (it == j.end()) throw InvalidInput(std::string("missing field '") + key + "'");
  if (!it->is_string()) throw InvalidInput(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::string optional_string(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw InvalidInput(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::vector<std::string> string_list(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_array()) throw InvalidInput(std::string("field '") + key + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw InvalidInput(std::string("field '") + key + "' must be an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

std::vector<JsonLine> parse_jsonl(std::string_view text) {
  std::vector<JsonLine> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) {
      try {
        out.push_back({line_no, Json::parse(line)});
      } catch (const Json::exception& e) {
        throw SchemaError(line_no, std::string("invalid JSON: ") + e.what());
      }
    }
    if (end == text.size()) break;
    pos = end + 1;
  }
  return out;
}

std::vector<JsonLine> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_jsonl(ss.str());
}

std::string dump_line(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::replace); }

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path.string());
  for (const auto& l : lines) out << dump_line(l) << '\n';
  if (!out) throw InvalidInput("write failed for " + path.string());
}

// ---------------------------------------------------------------------------

RewardSpec spec_from_json(const Json& j) {
  RewardSpec spec;
  spec.id = required_string(j, "id");
  std::string type = optional_string(j, "type");
  if (type.empty()) type = optional_string(j, "label");
  if (type == "STV") {
    spec.label = SpecLabel::stv;
    spec.keyword = required_string(j, "keyword");
  } else if (type == "MTDP") {
    spec.label = SpecLabel::mtdp;
    const std::string text = required_string(j, "expression");
    auto parsed = dsl::parse(text);
    if (!parsed) throw InvalidInput("spec " + spec.id + ": " + parsed.diagnostic.message());
    spec.expression = std::move(*parsed.expr);
  } else {
    throw InvalidInput("spec " + spec.id + ": type must be \"STV\" or \"MTDP\"");
  }
  spec.check();
  return spec;
}

Json spec_to_json(const RewardSpec& spec) {
  Json j = {{"id", spec.id}, {"type", std::string(to_string(spec.label))}};
  if (spec.label == SpecLabel::stv) {
    j["keyword"] = spec.keyword;
  } else {
    j["expression"] = dsl::render(*spec.expression);
  }
  return j;
}

Json breakdown_to_json(const RewardBreakdown& b) {
  return {{"spec_id", b.spec_id}, {"accuracy", b.accuracy}, {"format", b.format}, {"total", b.total}};
}

Json advantage_to_json(const AdvantageVector& a) {
  return {{"prompt_id", a.prompt_id}, {"advantages", a.advantages}, {"degenerate", a.degenerate}};
}

std::vector<curation::Turn> turns_from_json(const Json& j) {
  std::vector<curation::Turn> out;
  if (j.is_null()) return out;
  if (!j.is_array()) throw InvalidInput("dialogue must be an array of {speaker, utterance}");
  for (const auto& t : j) {
    out.push_back({required_string(t, "speaker"), required_string(t, "utterance")});
  }
  return out;
}

Json turns_to_json(const std::vector<curation::Turn>& turns) {
  Json arr = Json::array();
  for (const auto& t : turns) arr.push_back({{"speaker", t.speaker}, {"utterance", t.utterance}});
  return arr;
}

curation::CurationSample sample_from_json(const Json& j) {
  curation::CurationSample s;
  s.id = required_string(j, "id");
  s.character_profile = optional_string(j, "profile");
  s.dialogue_history = turns_from_json(j.value("dialogue", Json()));
  s.question = required_string(j, "question");
  s.references = string_list(j, "references");
  s.candidate_keywords = string_list(j, "candidate_keywords");
  s.probe_responses = string_list(j, "probes");
  const std::string source = optional_string(j, "source");
  if (source.empty() || source == "general") {
    s.source = curation::SourceTag::general;
  } else if (source == "benchmark") {
    s.source = curation::SourceTag::benchmark;
  } else {
    throw InvalidInput("sample " + s.id + ": source must be \"benchmark\" or \"general\"");
  }
  s.check();
  return s;
}

Json sample_to_json(const curation::CurationSample& s) {
  Json j = {{"id", s.id},
            {"profile", s.character_profile},
            {"dialogue", turns_to_json(s.dialogue_history)},
            {"question", s.question},
            {"references", s.references},
            {"source", s.source == curation::SourceTag::benchmark ? "benchmark" : "general"}};
  if (!s.candidate_keywords.empty()) j["candidate_keywords"] = s.candidate_keywords;
  if (!s.probe_responses.empty()) j["probes"] = s.probe_responses;
  return j;
}

Json decision_to_json(const curation::CurationDecision& d) {
  return {{"stage", d.stage}, {"outcome", d.accepted() ? "accepted" : "rejected"}, {"detail", d.detail}};
}

Json record_to_json(const curation::CuratedRecord& r) {
  Json j = spec_to_json(r.spec);
  j["question"] = r.question;
  j["dialogue"] = turns_to_json(r.dialogue);
  j["profile"] = r.profile;
  Json audit = Json::array();
  for (const auto& d : r.audit) audit.push_back(decision_to_json(d));
  j["meta"] = {{"question_type", std::string(to_string(r.question_type))},
               {"question_rules_version", std::string(curation::kQuestionRulesVersion)},
               {"audit", std::move(audit)}};
  return j;
}

curation::CuratedRecord record_from_json(const Json& j) {
  curation::CuratedRecord r;
  r.spec = spec_from_json(j);
  r.question = required_string(j, "question");
  r.dialogue = turns_from_json(j.value("dialogue", Json()));
  r.profile = optional_string(j, "profile");
  r.question_type = curation::classify_question(r.question);
  if (auto meta = j.find("meta"); meta != j.end() && meta->is_object()) {
    if (auto audit = meta->find("audit"); audit != meta->end() && audit->is_array()) {
      for (const auto& d : *audit) {
        auto decision = d.value("outcome", std::string()) == "rejected"
                            ? curation::CurationDecision::reject(d.value("stage", std::string()))
                            : curation::CurationDecision::accept(d.value("stage", std::string()));
        decision.detail = d.value("detail", std::string());
        r.audit.push_back(std::move(decision));
      }
    }
  }
  return r;
}

Json call_to_json(const judge::JudgeCall& c, std::string_view item_id) {
  return {{"id", std::string(item_id)},
          {"template", c.template_id},
          {"prompt_hash", c.prompt_hash},
          {"prompt", c.prompt},
          {"output", c.output}};
}

cot::ColdStartInput cold_start_input_from_json(const Json& j) {
  cot::ColdStartInput in;
  in.id = required_string(j, "id");
  in.character_profile = optional_string(j, "profile");
  in.dialogue_history = turns_from_json(j.value("dialogue", Json()));
  in.raw_cot = required_string(j, "cot");
  return in;
}

Json sft_to_json(const cot::ColdStartRecord& r) {
  return {{"id", r.id},
          {"system", r.character_profile},
          {"messages", turns_to_json(r.dialogue_history)},
          {"target", r.rendered_target},
          {"provenance", {{"backend", r.backend}, {"templates", r.template_ids}}}};
}

evaluation::EvalRecord eval_record_from_json(const Json& j) {
  evaluation::EvalRecord r;
  r.id = required_string(j, "id");
  r.metric = evaluation::metric_from_string(required_string(j, "metric"));
  r.response = required_string(j, "response");
  r.reference = optional_string(j, "reference");
  r.objective = optional_string(j, "objective");
  return r;
}

// ---------------------------------------------------------------------------

SpecStore::SpecStore(std::vector<RewardSpec> specs) {
  for (auto& s : specs) {
    const std::string id = s.id;
    if (!specs_.emplace(id, std::move(s)).second) throw InvalidInput("duplicate spec id '" + id + "'");
  }
}

std::shared_ptr<const SpecStore> SpecStore::load(const std::filesystem::path& path) {
  auto lines = read_jsonl(path);
  auto specs = convert_lines(lines, [](const Json& j) { return spec_from_json(j); });
  return std::make_shared<const SpecStore>(std::move(specs));
}

const RewardSpec* SpecStore::find(const std::string& id) const {
  auto it = specs_.find(id);
  return it == specs_.end() ? nullptr : &it->second;
}

}  // namespace vrar::data
