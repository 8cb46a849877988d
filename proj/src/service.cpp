#include "vrar/service.hpp"

#include "vrar/error.hpp"

#include <httplib.h>

#include <atomic>
#include <deque>

namespace vrar::service {

using data::Json;

namespace {

struct RequestError {
  int status;
  std::string code;
  std::string message;
};

[[noreturn]] void malformed(std::string message) { throw RequestError{400, "malformed_request", std::move(message)}; }

Reply json_reply(const Json& j, int status = 200) { return {status, data::dump_line(j)}; }

Reply error_reply(const RequestError& e) { return json_reply({{"code", e.code}, {"message", e.message}}, e.status); }

Json parse_body(std::string_view body) {
  try {
    return Json::parse(body);
  } catch (const Json::exception& e) {
    malformed(std::string("body is not valid JSON: ") + e.what());
  }
}

template <class Fn>
Reply guarded(Fn fn) {
  try {
    return fn();
  } catch (const RequestError& e) {
    return error_reply(e);
  } catch (const std::exception& e) {
    return error_reply({500, "internal", e.what()});
  }
}

// One score request resolved against the store. Inline specs are owned by
// the request; stored specs are borrowed from the store snapshot.
struct Resolved {
  std::shared_ptr<RewardSpec> owned;
  const RewardSpec* spec = nullptr;
  std::string response;
  bool include_breakdown = true;
};

Resolved resolve(const Json& req, const data::SpecStore& store) {
  if (!req.is_object()) malformed("score request must be a JSON object");
  Resolved r;
  auto resp = req.find("response");
  if (resp == req.end() || !resp->is_string()) malformed("field 'response' must be a string");
  r.response = resp->get<std::string>();
  if (auto inc = req.find("include_breakdown"); inc != req.end()) {
    if (!inc->is_boolean()) malformed("field 'include_breakdown' must be a boolean");
    r.include_breakdown = inc->get<bool>();
  }

  std::string id;
  if (auto spec = req.find("spec"); spec != req.end()) {
    if (spec->is_object()) {
      try {
        r.owned = std::make_shared<RewardSpec>(data::spec_from_json(*spec));
      } catch (const InvalidInput& e) {
        malformed(e.what());
      }
      r.spec = r.owned.get();
      return r;
    }
    if (!spec->is_string()) malformed("field 'spec' must be a spec object or a spec id");
    id = spec->get<std::string>();
  } else if (auto sid = req.find("spec_id"); sid != req.end() && sid->is_string()) {
    id = sid->get<std::string>();
  } else {
    malformed("request needs 'spec' or 'spec_id'");
  }
  r.spec = store.find(id);
  if (!r.spec) throw RequestError{404, "unknown_spec", "no spec with id '" + id + "'"};
  return r;
}

Json result_json(const RewardBreakdown& b, bool include_breakdown) {
  if (include_breakdown) return data::breakdown_to_json(b);
  return {{"spec_id", b.spec_id}, {"total", b.total}};
}

}  // namespace

struct ScoringService::Http {
  httplib::Server server;
  std::atomic<bool> bound{false};
};

ScoringService::ScoringService(ServiceConfig cfg, std::shared_ptr<const data::SpecStore> store)
    : cfg_(std::move(cfg)), store_(store ? std::move(store) : std::make_shared<const data::SpecStore>()) {
  cfg_.reward.format.check();
  cfg_.reward.weights.check();
}

ScoringService::~ScoringService() { stop(); }

std::shared_ptr<const data::SpecStore> ScoringService::store() const { return std::atomic_load(&store_); }

void ScoringService::replace_store(std::shared_ptr<const data::SpecStore> store) {
  std::atomic_store(&store_, std::move(store));
}

Reply ScoringService::score(std::string_view body) const {
  return guarded([&] {
    const auto snapshot = store();
    Resolved r = resolve(parse_body(body), *snapshot);
    return json_reply(result_json(total_reward(*r.spec, r.response, cfg_.reward.format, cfg_.reward.weights),
                                  r.include_breakdown));
  });
}

Reply ScoringService::score_batch(std::string_view body) const {
  return guarded([&] {
    Json j = parse_body(body);
    if (j.is_object() && j.contains("requests")) j = j.at("requests");
    if (!j.is_array()) malformed("batch body must be a JSON array of score requests");
    const auto snapshot = store();
    std::vector<Resolved> resolved;
    resolved.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
      try {
        resolved.push_back(resolve(j[i], *snapshot));
      } catch (RequestError& e) {
        e.message = "item " + std::to_string(i) + ": " + e.message;
        throw;
      }
    }
    std::vector<ScoreItem> items;
    items.reserve(resolved.size());
    for (const auto& r : resolved) items.push_back({r.spec, r.response});
    const auto results = vrar::score_batch(items, cfg_.reward);
    Json out = Json::array();
    for (std::size_t i = 0; i < results.size(); ++i) out.push_back(result_json(results[i], resolved[i].include_breakdown));
    return json_reply(out);
  });
}

Reply ScoringService::advantages(std::string_view body) const {
  return guarded([&] {
    Json j = parse_body(body);
    if (j.is_object() && j.contains("groups")) j = j.at("groups");
    if (!j.is_array()) malformed("advantages body must be a JSON array of {prompt_id, rewards}");
    std::vector<RolloutGroup> groups;
    for (std::size_t i = 0; i < j.size(); ++i) {
      const Json& g = j[i];
      const std::string where = "group " + std::to_string(i) + ": ";
      if (!g.is_object()) malformed(where + "must be an object");
      RolloutGroup group;
      if (auto pid = g.find("prompt_id"); pid != g.end() && pid->is_string()) group.prompt_id = pid->get<std::string>();
      auto rewards = g.find("rewards");
      if (rewards == g.end() || !rewards->is_array()) malformed(where + "field 'rewards' must be an array");
      for (const auto& v : *rewards) {
        if (!v.is_number()) malformed(where + "rewards must be numbers");
        group.rewards.push_back(v.get<double>());
      }
      std::size_t expected = 0;
      if (auto gs = g.find("group_size"); gs != g.end()) {
        if (!gs->is_number_unsigned()) malformed(where + "group_size must be a positive integer");
        expected = gs->get<std::size_t>();
      } else if (cfg_.enforce_group_size) {
        expected = cfg_.group_size;
      }
      if (expected && group.rewards.size() != expected) {
        malformed(where + "expected " + std::to_string(expected) + " rewards, got " +
                  std::to_string(group.rewards.size()));
      }
      if (group.rewards.size() < 2) malformed(where + "needs at least two rewards");
      groups.push_back(std::move(group));
    }
    std::vector<AdvantageVector> result;
    try {
      result = batch_advantages(groups, cfg_.epsilon);
    } catch (const InvalidInput& e) {
      malformed(e.what());
    }
    Json out = Json::array();
    for (const auto& a : result) out.push_back(data::advantage_to_json(a));
    return json_reply(out);
  });
}

Reply ScoringService::health() const {
  return json_reply({{"status", "ok"}, {"version", std::string(kVersion)}, {"specs", store()->size()}});
}

Reply ScoringService::reload() {
  return guarded([&] {
    if (cfg_.spec_store.empty()) throw RequestError{409, "no_spec_store", "service was started without a spec store"};
    try {
      replace_store(data::SpecStore::load(cfg_.spec_store));
    } catch (const Error& e) {
      throw RequestError{500, "reload_failed", e.what()};
    }
    return health();
  });
}

int ScoringService::bind() {
  if (!http_) http_ = std::make_unique<Http>();
  auto& server = http_->server;
  const int threads = std::max(1, cfg_.threads);
  server.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  server.set_payload_max_length(512ull << 20);

  auto adapt = [](httplib::Response& res, const Reply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  };
  server.Post("/v1/score", [this, adapt](const httplib::Request& req, httplib::Response& res) {
    adapt(res, score(req.body));
  });
  server.Post("/v1/score_batch", [this, adapt](const httplib::Request& req, httplib::Response& res) {
    adapt(res, score_batch(req.body));
  });
  server.Post("/v1/advantages", [this, adapt](const httplib::Request& req, httplib::Response& res) {
    adapt(res, advantages(req.body));
  });
  server.Get("/v1/health", [this, adapt](const httplib::Request&, httplib::Response& res) { adapt(res, health()); });
  server.Post("/v1/reload", [this, adapt](const httplib::Request&, httplib::Response& res) { adapt(res, reload()); });
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const bool not_found = res.status == 404;
    res.set_content(data::dump_line({{"code", not_found ? "not_found" : "malformed_request"},
                                     {"message", "HTTP " + std::to_string(res.status)}}),
                    "application/json");
  });

  int port = cfg_.port;
  if (port == 0) {
    port = server.bind_to_any_port(cfg_.host);
    if (port < 0) throw Error("cannot bind " + cfg_.host);
  } else if (!server.bind_to_port(cfg_.host, port)) {
    throw Error("cannot bind " + cfg_.host + ":" + std::to_string(port));
  }
  http_->bound = true;
  return port;
}

void ScoringService::listen() {
  if (!http_ || !http_->bound) throw Error("listen() before bind()");
  http_->server.listen_after_bind();
}

void ScoringService::stop() {
  if (http_) http_->server.stop();
}

}  // namespace vrar::service
