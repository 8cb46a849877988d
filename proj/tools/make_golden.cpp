// Generates the golden curation / cold-start corpus under tests/data/golden:
// inputs, mock fixtures keyed by prompt, and the outcome each item was
// scripted to reach. Expected pipeline outputs are produced afterwards by
// running the CLI on these files (tests/data/golden/regenerate.sh).

#include "vrar/cot.hpp"
#include "vrar/curation.hpp"
#include "vrar/dataset.hpp"
#include "vrar/judge.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <mutex>

namespace fs = std::filesystem;
using vrar::data::Json;

namespace {

struct Character {
  const char* name;
  const char* english;
  const char* trait;
};

const Character kCharacters[] = {
    {"林远", "Lin Yuan", "一位沉默寡言的剑客"},      {"苏晴", "Su Qing", "一位心直口快的女镖师"},
    {"沈墨", "Shen Mo", "一位爱读书的落第秀才"},     {"顾青", "Gu Qing", "一位行走江湖的郎中"},
    {"陆川", "Lu Chuan", "一位豪爽的船帮少主"},      {"叶澜", "Ye Lan", "一位擅长音律的琴师"},
    {"江白", "Jiang Bai", "一位初出茅庐的少年侠客"}, {"唐宁", "Tang Ning", "一位精通机关的工匠"},
    {"秦越", "Qin Yue", "一位退隐山林的老将"},       {"许安", "Xu An", "一位机灵的客栈伙计"},
};

// One topic per question kind; keyword, an accepted variant, a rejected
// variant, and an unrelated entity per character.
struct Topic {
  const char* kind;      // what is being asked about
  const char* question;  // WH question, appended to "name，"
  const char* english_question;
  const char* keywords[10];
  const char* variants[10];
  const char* rejected[10];
  const char* ref_a;  // "%s" is the keyword
  const char* ref_b;
  const char* ref_c;
};

const Topic kTopics[] = {
    {"师父", "你的师父是谁？", "who was your teacher?",
     {"白鹤道人", "青松居士", "铁掌翁", "云游僧", "南山樵夫", "琴心老人", "赤霞真人", "墨竹先生", "北海渔翁", "紫阳散人"},
     {"白鹤真人", "青松先生", "铁掌老翁", "云游和尚", "南山老樵", "琴心先生", "赤霞道长", "墨竹居士", "北海老翁", "紫阳真人"},
     {"白云观", "松林", "铁匠铺", "寺庙", "南山", "琴房", "赤霞峰", "竹林", "北海", "紫阳宫"},
     "我的师父是%s。", "%s把一身本事都传给了我。", "说起师父，那自然是%s老人家。"},
    {"家乡", "你的家乡在哪里？", "where is your hometown?",
     {"临安", "扬州", "洛阳", "金陵", "姑苏", "成都", "长安", "襄阳", "大理", "泉州"},
     {"杭州", "广陵", "东都", "南京", "苏州", "锦官城", "西京", "襄州", "叶榆", "刺桐"},
     {"西湖", "运河", "牡丹", "秦淮", "园林", "蜀锦", "城墙", "汉水", "洱海", "海港"},
     "我的家乡是%s。", "我在%s长大。", "每逢佳节，我总会想起%s。"},
    {"兵器", "你随身带的兵器叫什么？", "what is the name of your weapon?",
     {"青霜剑", "玄铁刀", "墨玉笛", "银针囊", "分水刺", "焦尾琴", "柳叶刀", "连弩匣", "破阵枪", "袖中箭"},
     {"青霜", "玄铁宝刀", "墨玉箫", "银针", "分水峨眉刺", "焦尾", "柳叶飞刀", "连弩", "破阵长枪", "袖箭"},
     {"剑鞘", "刀鞘", "笛囊", "药箱", "船桨", "琴弦", "刀柄", "机括", "枪缨", "箭袋"},
     "我随身带的是%s。", "这把%s跟了我很多年。", "%s从不离身。"},
    {"坐骑", "你骑的那匹马叫什么名字？", "what is the name of your horse?",
     {"追风", "踏雪", "赤兔儿", "乌云", "白龙驹", "青骢", "黄骠", "紫电", "飞霜", "小红"},
     {"追风马", "踏雪马", "小赤兔", "乌云马", "白龙", "青骢马", "黄骠马", "紫电驹", "飞霜驹", "红马"},
     {"马鞍", "马厩", "缰绳", "马蹄", "草料", "马鞭", "马场", "马镫", "马车", "马槽"},
     "我的马叫%s。", "%s跑起来快得很。", "那匹%s陪我走南闯北。"},
    {"年纪", "你今年多少岁？", "how old are you?",
     {"十八岁", "二十岁", "二十四岁", "三十岁", "二十二岁", "十九岁", "十六岁", "二十六岁", "六十岁", "十七岁"},
     {"十八", "二十", "二十四", "三十", "二十二", "十九", "十六", "二十六", "六十", "十七"},
     {"属龙", "属虎", "属兔", "属马", "属羊", "属猴", "属鸡", "属狗", "属猪", "属鼠"},
     "我今年%s。", "过了年我就%s了。", "算起来我已经%s。"},
};

// Scripted STV outcome per sample:
//   A accept (candidate keywords)   B accept (extracted)     I accept, English, case-folded
//   C polar question                L alternative question   D two entities
//   E not an entity                 F missing from a reference
//   G nothing extracted             H entity answer breaks the yes/no contract
constexpr std::string_view kStvPlan = "AABCADAEFAGBAHACIBLDAEAFBCAADBELAFCABAICDAEBFALHCB";
// Scripted MTDP outcome per sample (only where extraction succeeds):
//   0 10/10 agreement   9 9/10   8 8/10   7 7/10 (rejected)   n nine probes (rejected)
//   c fenced expression  x nested expression   f foreign literal   p parse error   l no legitimate variant
constexpr std::string_view kMtdpPlan = "0807fc9pnl0x8070f9c0n8lx0p7980c0f087x90l0n0c8p7090";
// Scripted cold-start outcome per input:
//   n plain   L long, compressed   X compression grew, input kept   R brackets fixed on retry
//   P brackets stripped locally   U unbalanced brackets kept   E empty reply   F reply fails format
//   T monologue over the token cap   Z nothing left after stripping
constexpr std::string_view kColdPlan = "nnLRnPnEnXnFnnLTnUnRnZnnLnPnnEnRnXnLnFnUnnTnRnLnPn";

std::string fill(const char* pattern, std::string_view value) {
  std::string out = pattern;
  const auto pos = out.find("%s");
  if (pos != std::string::npos) out.replace(pos, 2, value);
  return out;
}

std::string between(std::string_view text, std::string_view open, std::string_view close) {
  const auto a = text.find(open);
  if (a == std::string_view::npos) return {};
  const auto start = a + open.size();
  const auto b = text.find(close, start);
  if (b == std::string_view::npos) return {};
  return std::string(text.substr(start, b - start));
}

struct Item {
  std::size_t index;
  const Character* who;
  const Topic* topic;
  std::string keyword, variant, rejected, other;
  char stv;
  char mtdp;
  vrar::curation::CurationSample sample;
  std::vector<std::string> probes;
};

std::vector<std::string> make_probes(const Item& it) {
  return {"是" + it.keyword + "。",
          "当然是" + it.variant + "。",
          "我不记得了。",
          "这个不方便说。",
          it.keyword + "，" + it.keyword + "，就是" + it.keyword + "！",
          "大概是" + it.rejected + "吧。",
          "你猜呢？",
          "答案是" + it.keyword,
          "说起来是" + it.variant,
          "没有这回事。"};
}

std::vector<vrar::curation::Turn> make_dialogue(std::size_t i, const Character& who) {
  const std::size_t turns = 1 + (i * 7) % 16;
  static const char* user_lines[] = {"好久不见，最近可好？", "听说你前几天去了集市。", "路上可曾遇到什么怪事？",
                                     "今晚住在哪里？", "这茶味道如何？", "你觉得明天会下雨吗？"};
  static const char* char_lines[] = {"一切安好，多谢挂念。", "是啊，买了些干粮。", "倒是碰见一位老朋友。",
                                     "就在前面的客栈。", "清香扑鼻，是好茶。", "看这云色，怕是要下。"};
  std::vector<vrar::curation::Turn> out;
  for (std::size_t t = 0; t < turns; ++t) {
    if (t % 2 == 0) {
      out.push_back({"用户", user_lines[(i + t) % 6]});
    } else {
      out.push_back({who.name, char_lines[(i + t) % 6]});
    }
  }
  return out;
}

Item make_item(std::size_t i) {
  Item it;
  it.index = i;
  it.who = &kCharacters[i % 10];
  it.topic = &kTopics[i / 10];
  const std::size_t k = (i % 10 + i / 10) % 10;
  it.keyword = it.topic->keywords[k];
  it.variant = it.topic->variants[k];
  it.rejected = it.topic->rejected[k];
  it.other = kTopics[(i / 10 + 1) % 5].keywords[k];
  it.stv = kStvPlan[i];
  it.mtdp = kMtdpPlan[i];

  auto& s = it.sample;
  char id[16];
  std::snprintf(id, sizeof id, "g%03zu", i);
  s.id = id;
  s.character_profile = std::string("你是") + it.who->name + "，" + it.who->trait + "。";
  s.dialogue_history = make_dialogue(i, *it.who);
  s.source = i % 3 == 0 ? vrar::curation::SourceTag::benchmark : vrar::curation::SourceTag::general;

  const std::string name = it.who->name;
  switch (it.stv) {
    case 'C': s.question = name + "，你的" + it.topic->kind + "是" + it.keyword + "吗？"; break;
    case 'L': s.question = name + "，你的" + it.topic->kind + "是" + it.keyword + "还是" + it.rejected + "？"; break;
    case 'I': s.question = std::string(it.who->english) + ", " + it.topic->english_question; break;
    default: s.question = name + "，" + it.topic->question; break;
  }

  if (it.stv == 'I') {
    it.keyword = std::string("Frost") + std::to_string(i);
    it.variant = std::string("frost-") + std::to_string(i);
    it.rejected = std::string("scabbard") + std::to_string(i);
    s.references = {"it is called " + std::string("frost") + std::to_string(i) + ".",
                    "FROST" + std::to_string(i) + ", of course."};
  } else if (it.stv == 'F') {
    s.references = {fill(it.topic->ref_a, it.keyword), fill(it.topic->ref_b, it.rejected)};
  } else {
    s.references = {fill(it.topic->ref_a, it.keyword), fill(it.topic->ref_b, it.keyword),
                    fill(it.topic->ref_c, it.keyword)};
  }
  if (it.stv == 'A' || it.stv == 'I' || it.stv == 'C' || it.stv == 'L') s.candidate_keywords = {it.keyword};

  it.probes = make_probes(it);
  if (it.mtdp == 'n') it.probes.pop_back();
  s.probe_responses = it.probes;
  return it;
}

std::string expression_for(const Item& it) {
  const std::string a = "contains(\"" + it.keyword + "\")";
  const std::string b = "contains(\"" + it.variant + "\")";
  switch (it.mtdp) {
    case 'c': return "```\nany(" + a + ", " + b + ")\n```";
    case 'x': return "all(any(" + a + ", " + b + "), not(count_at_least(\"" + it.keyword + "\", 3)))";
    case 'f': return "any(" + a + ", contains(\"" + it.rejected + "\"))";
    case 'p': return "any(" + a + ", " + b;
    default: return "any(" + a + ", " + b + ")";
  }
}

std::size_t agreement_for(char plan) {
  switch (plan) {
    case '9': return 9;
    case '8': return 8;
    case '7': return 7;
    default: return 10;
  }
}

// ---------------------------------------------------------------------------

struct ColdItem {
  std::size_t index;
  char plan;
  std::string keyword;
  std::string kind;
  vrar::cot::ColdStartInput input;
  std::string stripped;   // raw cot after local stripping
  std::string compressed; // compress answer, when asked
  std::string styled;
  std::string styled_retry;
  std::string reply;
  std::string expected_cot;
};

std::string repeat_to(std::string_view unit, std::size_t times) {
  std::string out;
  for (std::size_t i = 0; i < times; ++i) out += unit;
  return out;
}

ColdItem make_cold(std::size_t i) {
  ColdItem c;
  c.index = i;
  c.plan = kColdPlan[i];
  const Character& who = kCharacters[i % 10];
  const Topic& topic = kTopics[i / 10];
  const std::size_t k = (i % 10 + i / 10) % 10;
  c.keyword = topic.keywords[k];
  c.kind = topic.kind;

  char id[16];
  std::snprintf(id, sizeof id, "c%03zu", i);
  c.input.id = id;
  c.input.character_profile =
      std::string("你是") + who.name + "，" + who.trait + "。今天有人向你打听" + topic.kind + "的事。";
  c.input.dialogue_history = make_dialogue(i + 3, who);
  c.input.dialogue_history.push_back({"用户", std::string(who.name) + "，" + topic.question});

  const std::string core = "对方问起我的" + c.kind + "\n我记得清清楚楚\n那是" + c.keyword + "\n所以应当如实相告";
  switch (c.plan) {
    case 'L':
    case 'X': {
      const std::string filler = repeat_to("回想往事历历在目心中感慨万千", 40);
      c.input.raw_cot = "（思考开始）" + core + "\n" + filler + "【旁白：回忆结束】";
      c.stripped = core + "\n" + filler;
      break;
    }
    case 'U':
      c.input.raw_cot = core + "（这里的括号没有闭合";
      c.stripped = c.input.raw_cot;
      break;
    case 'Z':
      c.input.raw_cot = "（只有旁白：" + core + "）";
      c.stripped.clear();
      break;
    default:
      c.input.raw_cot = "（角色内心）" + core + "【设定：" + c.kind + "】  (meta)";
      c.stripped = core;
      break;
  }
  if (c.plan == 'L') c.compressed = core + "\n往事历历在目";
  if (c.plan == 'X') c.compressed = c.stripped + "\n再补充一些无关的话";

  c.styled = std::string(who.name) + "暗想对方问起我的" + c.kind + "那正是" + c.keyword + "我须坦然告知";
  c.expected_cot = c.styled;
  if (c.plan == 'R') {
    c.styled_retry = c.styled;
    c.styled = "（心想）" + c.styled;
  } else if (c.plan == 'P') {
    c.styled = "【独白】" + c.styled + "（完）";
    c.styled_retry = c.styled;
  } else if (c.plan == 'T') {
    c.styled += repeat_to("思来想去", 130);
  }

  if (c.plan == 'E') {
    c.reply = "";
  } else if (c.plan == 'F') {
    c.reply = "Sure, it is " + c.keyword + ". Anything else you would like to know about it?";
  } else {
    c.reply = "我的" + c.kind + "是" + c.keyword + "，此事千真万确。";
  }
  return c;
}

// ---------------------------------------------------------------------------

// Answers prompts from the script and records every exchange.
class ScriptedBackend final : public vrar::judge::Backend {
 public:
  ScriptedBackend(const std::vector<Item>& items, const std::vector<ColdItem>& cold) : items_(items), cold_(cold) {}

  std::string send(std::string_view prompt, const vrar::judge::Sampling&) override {
    std::string response = answer(prompt);
    std::lock_guard lock(mutex_);
    recorded_[std::string(prompt)] = response;
    return response;
  }
  std::string name() const override { return "mock"; }

  const std::map<std::string, std::string>& recorded() const { return recorded_; }

 private:
  const Item& by_question(std::string_view prompt) const {
    const std::string q = between(prompt, "Question: ", "\n");
    for (const auto& it : items_) {
      if (it.sample.question == q) return it;
    }
    throw std::runtime_error("script has no item for question: " + q);
  }

  const ColdItem& by_profile(std::string_view prompt) const {
    for (const auto& c : cold_) {
      if (prompt.find(c.input.character_profile) != std::string_view::npos) return c;
    }
    throw std::runtime_error("script has no cold-start item for prompt");
  }

  const ColdItem& by_cot(std::string_view prompt) const {
    for (const auto& c : cold_) {
      if (!c.stripped.empty() && prompt.size() >= c.stripped.size() &&
          prompt.substr(prompt.size() - c.stripped.size()) == c.stripped)
        return c;
    }
    throw std::runtime_error("script has no cold-start item for compress prompt");
  }

  std::string answer(std::string_view prompt) const {
    auto has = [&](std::string_view s) { return prompt.find(s) != std::string_view::npos; };

    if (has("Condense the following reasoning")) return by_cot(prompt).compressed;
    if (has("Rewrite the reasoning below")) {
      const auto& c = by_profile(prompt);
      return has("Do not use any brackets or parentheses.") ? c.styled_retry : c.styled;
    }
    if (has("Write the character's next reply only.")) return by_profile(prompt).reply;

    const Item& it = by_question(prompt);
    if (has("List the keywords that any correct answer must contain")) {
      if (it.stv == 'G') return "";
      if (it.stv == 'D') return it.keyword + "\n" + it.other;
      return it.keyword;
    }
    if (has("Is the keyword a noun")) {
      if (it.stv == 'E') return "否";
      if (it.stv == 'H') return "也许吧";
      return "是";
    }
    if (has("List variant spellings")) return it.variant + "，" + it.rejected;
    if (has("Does the candidate term express")) {
      const std::string term = between(prompt, "Candidate term: ", "\n");
      if (it.mtdp == 'l') return "否。";
      return term == it.keyword || term == it.variant ? "是" : "否";
    }
    if (has("Write one verification expression")) return expression_for(it);
    if (has("Does the response answer the question correctly")) {
      const std::string probe = between(prompt, "Response to check: ", "\n\nDoes");
      const bool truth = vrar::dsl::evaluate(vrar::judge::parse_expression_output(expression_for(it)), probe);
      std::size_t pos = 0;
      while (pos < it.probes.size() && it.probes[pos] != probe) ++pos;
      const bool flip = pos < 10 - agreement_for(it.mtdp);
      return truth != flip ? "是" : "否";
    }
    throw std::runtime_error("unscripted prompt: " + std::string(prompt.substr(0, 60)));
  }

  const std::vector<Item>& items_;
  const std::vector<ColdItem>& cold_;
  std::mutex mutex_;
  std::map<std::string, std::string> recorded_;
};

Json stv_intent(const Item& it) {
  switch (it.stv) {
    case 'A':
    case 'B':
    case 'I': return {{"stage", "multiref"}, {"accepted", true}};
    case 'C':
    case 'L': return {{"stage", "question_type"}, {"accepted", false}};
    case 'D': return {{"stage", "cardinality"}, {"accepted", false}};
    case 'E':
    case 'H': return {{"stage", "entity_type"}, {"accepted", false}};
    case 'F': return {{"stage", "multiref"}, {"accepted", false}};
    case 'G': return {{"stage", "extraction"}, {"accepted", false}};
  }
  throw std::logic_error("bad plan");
}

Json mtdp_intent(const Item& it) {
  if (it.stv == 'G') return {{"stage", "extraction"}, {"accepted", false}};
  switch (it.mtdp) {
    case 'l': return {{"stage", "legitimacy"}, {"accepted", false}};
    case 'f':
    case 'p': return {{"stage", "expression"}, {"accepted", false}};
    case '7':
    case 'n': return {{"stage", "consistency"}, {"accepted", false}};
    default: return {{"stage", "consistency"}, {"accepted", true}, {"agreements", agreement_for(it.mtdp)}};
  }
}

Json cold_intent(const ColdItem& c) {
  switch (c.plan) {
    case 'E': return {{"stage", "regenerate"}, {"emitted", false}};
    case 'F': return {{"stage", "format_check"}, {"emitted", false}};
    case 'T': return {{"stage", "token_cap"}, {"emitted", false}};
    case 'Z': return {{"stage", "style"}, {"emitted", false}};
    default: return {{"stage", "emit"}, {"emitted", true}, {"cot", c.expected_cot}};
  }
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << j.dump(2, ' ', false) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the golden curation corpus"};
  fs::path out_dir = "tests/data/golden";
  app.add_option("--out", out_dir, "Output directory");
  CLI11_PARSE(app, argc, argv);

  if (kStvPlan.size() != 50 || kMtdpPlan.size() != 50 || kColdPlan.size() != 50) {
    std::cerr << "plans must cover 50 items\n";
    return 1;
  }
  fs::create_directories(out_dir);

  std::vector<Item> items;
  std::vector<ColdItem> cold;
  for (std::size_t i = 0; i < 50; ++i) items.push_back(make_item(i));
  for (std::size_t i = 0; i < 50; ++i) cold.push_back(make_cold(i));

  auto backend = std::make_shared<ScriptedBackend>(items, cold);
  vrar::judge::JudgeBackendConfig cfg;
  cfg.max_in_flight = 1;
  vrar::judge::JudgeClient client(cfg, backend);
  const auto templates = vrar::judge::TemplateSet::defaults();

  std::vector<vrar::curation::CurationSample> samples;
  for (const auto& it : items) samples.push_back(it.sample);
  std::vector<vrar::cot::ColdStartInput> inputs;
  for (const auto& c : cold) inputs.push_back(c.input);

  try {
    for (auto wf : {vrar::curation::Workflow::stv, vrar::curation::Workflow::mtdp}) {
      vrar::curation::PipelineOptions options;
      options.workflow = wf;
      options.parallel = false;
      vrar::curation::run_pipeline(samples, client, templates, options);
    }
    vrar::cot::run_cold_start(inputs, client, templates, {}, false);
  } catch (const std::exception& e) {
    std::cerr << "script failed: " << e.what() << "\n";
    return 1;
  }

  std::vector<Json> sample_lines, cold_lines, intent_lines, cold_intent_lines;
  for (const auto& it : items) {
    sample_lines.push_back(vrar::data::sample_to_json(it.sample));
    intent_lines.push_back({{"id", it.sample.id}, {"stv", stv_intent(it)}, {"mtdp", mtdp_intent(it)}});
  }
  for (const auto& c : cold) {
    cold_lines.push_back({{"id", c.input.id},
                          {"profile", c.input.character_profile},
                          {"dialogue", vrar::data::turns_to_json(c.input.dialogue_history)},
                          {"cot", c.input.raw_cot}});
    cold_intent_lines.push_back({{"id", c.input.id}, {"cold", cold_intent(c)}});
  }
  vrar::data::write_jsonl(out_dir / "samples.jsonl", sample_lines);
  vrar::data::write_jsonl(out_dir / "cold_start.jsonl", cold_lines);
  vrar::data::write_jsonl(out_dir / "intent.jsonl", intent_lines);
  vrar::data::write_jsonl(out_dir / "cold_intent.jsonl", cold_intent_lines);

  Json fixtures = Json::array();
  std::map<std::string, Json> by_hash;
  for (const auto& [prompt, response] : backend->recorded()) {
    by_hash[vrar::judge::prompt_hash(prompt)] = {
        {"hash", vrar::judge::prompt_hash(prompt)}, {"prompt", prompt}, {"response", response}};
  }
  for (auto& [h, f] : by_hash) fixtures.push_back(std::move(f));
  write_json(out_dir / "fixtures.json", fixtures);
  write_json(out_dir / "backend.json", {{"kind", "mock"}, {"fixtures", "fixtures.json"}, {"strict", true}, {"max_in_flight", 8}});

  std::cerr << "wrote " << items.size() << " samples, " << cold.size() << " cold-start inputs, " << fixtures.size()
            << " fixtures to " << out_dir << "\n";
  return 0;
}
