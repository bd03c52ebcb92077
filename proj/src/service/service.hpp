#pragma once

// Interactive retrieval service: sessions over one archive, event-sourced to
// JSONL logs, reachable in-process through handle() or over HTTP.

#include "eraloc/corpus.hpp"
#include "eraloc/retrieve.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace eraloc::service {

using json = nlohmann::json;

struct ServiceConfig {
  std::string archive_path;
  std::string queries_path;   // optional; query images resolved by id
  std::string manifest_path;  // optional; thumbnails
  std::string thumb_root;     // base for relative manifest uris (default: manifest dir)
  std::string gmm_path;       // optional; enables descriptor uploads
  std::string state_dir;      // optional; event logs under <state_dir>/sessions
  SessionConfig session;
  std::size_t max_k = 1000;
};

struct Response {
  int status = 200;
  json body;
  std::string raw;  // non-JSON payloads (thumbnails)
  std::string content_type = "application/json";
};

// Append-only JSONL log of one session.
class EventLog {
 public:
  EventLog() = default;
  explicit EventLog(const std::string& path);
  std::uint64_t append(const std::string& type, const json& payload);
  std::uint64_t seq() const { return seq_; }
  void set_seq(std::uint64_t s) { seq_ = s; }
  static std::vector<json> read(const std::string& path);

 private:
  std::ofstream out_;
  std::uint64_t seq_ = 0;
};

class Service {
 public:
  explicit Service(const ServiceConfig& cfg);
  // Stores already in memory; state_dir and the paths in cfg are still honored.
  Service(const ServiceConfig& cfg, FeatureMatrix archive, std::optional<FeatureMatrix> queries);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  Response handle(const std::string& method, const std::string& path, const std::string& body,
                  const std::map<std::string, std::string>& params = {});

  // Binds (port 0 picks a free one) and serves on a background thread.
  int start(const std::string& host, int port);
  void wait();
  void stop();

  std::size_t session_count() const;
  // Snapshot of a session, for tests and replay checks.
  std::shared_ptr<const Session> snapshot(const std::string& sid) const;

 private:
  struct Slot;

  ServiceConfig cfg_;
  std::shared_ptr<const RetrievalIndex> index_;
  std::optional<FeatureMatrix> queries_;
  std::map<std::string, Eigen::Index> query_rows_;
  std::optional<Manifest> manifest_;
  std::optional<GmmModel> gmm_;

  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::uint64_t next_sid_ = 1;

  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;

  void init();
  void replay_all();
  std::shared_ptr<Slot> slot(const std::string& sid) const;

  Response create_session(const json& body);
  Response status(Slot& s);
  Response query(Slot& s, const json& body);
  Response feedback(Slot& s, const json& body);
  Response adapt(Slot& s, const json& body);
  Response metrics(Slot& s, const std::map<std::string, std::string>& params);
  Response thumb(const std::string& id);

  // Learns off-lock when due and publishes; returns whether a model was installed.
  bool maybe_learn(Slot& s, std::unique_lock<std::mutex>& lock, bool force);
  json counters(const Session& s, std::uint64_t seq) const;
  Vector resolve_image(const std::string& id) const;
};

}  // namespace eraloc::service
