#pragma once

#include "vrar/advantage.hpp"
#include "vrar/dataset.hpp"
#include "vrar/reward.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

// Reward scoring service for in-loop RL trainers. See docs/api.md for the
// endpoint schemas.
namespace vrar::service {

inline constexpr std::string_view kVersion = "0.1.0";

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds an ephemeral port
  std::filesystem::path spec_store;
  RewardConfig reward;
  std::size_t group_size = kDefaultGroupSize;
  /// When set, /v1/advantages rejects groups whose size differs from group_size.
  bool enforce_group_size = false;
  double epsilon = kDefaultAdvantageEpsilon;
  int threads = 8;
};

struct Reply {
  int status = 200;
  std::string body;
};

/// Request handlers plus the HTTP listener that routes to them. The handlers
/// are usable without a socket. Scoring reads an immutable spec store that
/// reload() swaps atomically.
class ScoringService {
 public:
  ScoringService(ServiceConfig cfg, std::shared_ptr<const data::SpecStore> store);
  ~ScoringService();

  ScoringService(const ScoringService&) = delete;
  ScoringService& operator=(const ScoringService&) = delete;

  Reply score(std::string_view body) const;
  Reply score_batch(std::string_view body) const;
  Reply advantages(std::string_view body) const;
  Reply health() const;
  /// Re-reads the configured spec store file.
  Reply reload();

  std::shared_ptr<const data::SpecStore> store() const;
  void replace_store(std::shared_ptr<const data::SpecStore> store);

  /// Binds the listen socket; returns the bound port. Throws Error on failure.
  int bind();
  /// Serves until stop(); call bind() first.
  void listen();
  void stop();

 private:
  struct Http;

  ServiceConfig cfg_;
  std::shared_ptr<const data::SpecStore> store_;
  std::unique_ptr<Http> http_;
};

}  // namespace vrar::service
