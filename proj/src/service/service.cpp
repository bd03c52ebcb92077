#include "service.hpp"

#include "eraloc/encode.hpp"
#include "eraloc/rng.hpp"

#include <httplib.h>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

namespace eraloc::service {
namespace fs = std::filesystem;

namespace {

struct HttpError {
  int status;
  std::string code;
  std::string message;
};

[[noreturn]] void http_fail(int status, const std::string& code, const std::string& message) {
  throw HttpError{status, code, message};
}

int status_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::NotReady:
    case ErrorCode::MissingLabels:
    case ErrorCode::MissingModel:
    case ErrorCode::AdaptationFailed:
      return 409;
    case ErrorCode::Io:
    case ErrorCode::CorruptStore:
    case ErrorCode::Internal:
      return 500;
    default:
      return 400;
  }
}

Response error_response(int status, const std::string& code, const std::string& message) {
  Response r;
  r.status = status;
  r.body = {{"error", {{"code", code}, {"message", message}}}};
  return r;
}

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string p;
  while (std::getline(ss, p, '/'))
    if (!p.empty()) parts.push_back(p);
  return parts;
}

json dim_json(const std::optional<DimEstimate>& d) {
  if (!d) return nullptr;
  return {{"value", d->value}, {"rounded", d->rounded}};
}

json hits_json(const std::vector<Hit>& hits) {
  json out = json::array();
  for (std::size_t i = 0; i < hits.size(); ++i)
    out.push_back({{"rank", i + 1}, {"id", hits[i].id}, {"score", hits[i].score}});
  return out;
}

std::string content_type_for(const fs::path& p) {
  std::string ext = p.extension().string();
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

}  // namespace

// ---- event log ----

EventLog::EventLog(const std::string& path) : out_(path, std::ios::app) {
  if (!out_) fail(ErrorCode::Io, "cannot open event log " + path);
}

std::uint64_t EventLog::append(const std::string& type, const json& payload) {
  ++seq_;
  if (out_.is_open()) {
    json line = {{"seq", seq_}, {"type", type}, {"ts", now_ms()}, {"payload", payload}};
    out_ << line.dump() << '\n';
    out_.flush();
  }
  return seq_;
}

std::vector<json> EventLog::read(const std::string& path) {
  std::string text = read_file(path);
  std::vector<json> events;
  std::size_t start = 0, line_no = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    ++line_no;
    if (nl == std::string::npos) {
      // torn write at the tail
      std::cerr << "warning: " << path << ": ignoring incomplete last line " << line_no << "\n";
      break;
    }
    std::string line = text.substr(start, nl - start);
    start = nl + 1;
    if (line.empty()) continue;
    json e;
    try {
      e = json::parse(line);
    } catch (const json::exception&) {
      fail(ErrorCode::CorruptStore, path + ": line " + std::to_string(line_no) + " is not JSON");
    }
    std::uint64_t seq = e.at("seq").get<std::uint64_t>();
    if (!events.empty() && seq <= events.back().at("seq").get<std::uint64_t>())
      fail(ErrorCode::CorruptStore, path + ": sequence numbers not increasing at line " + std::to_string(line_no));
    events.push_back(std::move(e));
  }
  return events;
}

// ---- sessions ----

struct Service::Slot {
  std::string sid;
  std::mutex mu;  // single writer per session
  std::shared_ptr<const Session> current;
  EventLog log;
  bool adapting = false;
  std::uint64_t uploads = 0;

  std::shared_ptr<const Session> load() const { return std::atomic_load(&current); }
  void publish(Session s) { std::atomic_store(&current, std::make_shared<const Session>(std::move(s))); }
};

Service::Service(const ServiceConfig& cfg) : cfg_(cfg) {
  if (cfg_.archive_path.empty()) fail(ErrorCode::InvalidInput, "archive store path required");
  index_ = std::make_shared<const RetrievalIndex>(RetrievalIndex::build(load_features(cfg_.archive_path)));
  if (!cfg_.queries_path.empty()) queries_ = load_features(cfg_.queries_path);
  init();
}

Service::Service(const ServiceConfig& cfg, FeatureMatrix archive, std::optional<FeatureMatrix> queries)
    : cfg_(cfg), queries_(std::move(queries)) {
  index_ = std::make_shared<const RetrievalIndex>(RetrievalIndex::build(archive));
  init();
}

Service::~Service() { stop(); }

void Service::init() {
  if (queries_) {
    if (queries_->dim() != index_->raw_dim()) fail(ErrorCode::InvalidInput, "query store dimension differs from archive");
    for (Eigen::Index i = 0; i < queries_->size(); ++i) query_rows_[queries_->ids[static_cast<std::size_t>(i)]] = i;
  }
  if (!cfg_.manifest_path.empty()) {
    manifest_ = load_manifest(cfg_.manifest_path);
    if (cfg_.thumb_root.empty()) cfg_.thumb_root = fs::path(cfg_.manifest_path).parent_path().string();
  }
  if (!cfg_.gmm_path.empty()) {
    AnyModel m = load_model(cfg_.gmm_path);
    if (!std::holds_alternative<GmmModel>(m)) fail(ErrorCode::InvalidInput, "descriptor encoding needs a GMM model");
    gmm_ = std::get<GmmModel>(m);
  }
  if (!cfg_.state_dir.empty()) {
    fs::create_directories(fs::path(cfg_.state_dir) / "sessions");
    replay_all();
  }
}

void Service::replay_all() {
  std::vector<fs::path> logs;
  for (const auto& e : fs::directory_iterator(fs::path(cfg_.state_dir) / "sessions"))
    if (e.path().extension() == ".jsonl") logs.push_back(e.path());
  std::sort(logs.begin(), logs.end());
  for (const auto& path : logs) {
    auto events = EventLog::read(path.string());
    if (events.empty() || events.front().at("type") != "Created")
      fail(ErrorCode::CorruptStore, path.string() + ": first event must be Created");
    auto slot = std::make_shared<Slot>();
    slot->sid = path.stem().string();
    SessionConfig sc = cfg_.session;
    const json& created = events.front().at("payload");
    sc.relearn_every = created.value("relearn_every", sc.relearn_every);
    sc.min_dim_images = created.value("min_dim_images", sc.min_dim_images);
    Session s(index_, sc);
    // Alignments are learned from the state at the recorded round, which may
    // precede later feedback that arrived while learning ran.
    std::vector<Session> by_round{s};
    for (std::size_t i = 1; i < events.size(); ++i) {
      const std::string type = events[i].at("type");
      const json& p = events[i].at("payload");
      if (type == "Query") {
        Vector v;
        if (p.contains("vector")) {
          auto vals = p.at("vector").get<std::vector<double>>();
          v = Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
          ++slot->uploads;
        } else {
          v = resolve_image(p.at("image_id"));
        }
        s = s.with_query(p.at("query_id"), v);
      } else if (type == "Feedback") {
        s = s.record_feedback({p.at("query_id"), p.at("selected_ids").get<std::vector<std::string>>(), 0});
        by_round.push_back(s);
      } else if (type == "DimsEstimated") {
        s = s.estimate_dims();
        by_round.back() = s;
      } else if (type == "Adapted") {
        std::size_t round = p.at("round");
        if (round >= by_round.size()) fail(ErrorCode::CorruptStore, path.string() + ": Adapted event beyond feedback rounds");
        auto a = by_round[round].prepare_alignment();
        if (hex64(a->hash) != p.at("model_hash").get<std::string>())
          fail(ErrorCode::CorruptStore, path.string() + ": replayed model hash differs from the log");
        s = s.with_alignment(a);
      } else {
        fail(ErrorCode::CorruptStore, path.string() + ": unknown event type " + type);
      }
    }
    slot->log = EventLog(path.string());
    slot->log.set_seq(events.back().at("seq"));
    slot->publish(std::move(s));
    std::uint64_t n = 0;
    if (slot->sid.size() > 1 && slot->sid[0] == 's') n = std::strtoull(slot->sid.c_str() + 1, nullptr, 10);
    next_sid_ = std::max(next_sid_, n + 1);
    sessions_[slot->sid] = slot;
  }
}

std::shared_ptr<Service::Slot> Service::slot(const std::string& sid) const {
  std::lock_guard<std::mutex> g(sessions_mu_);
  auto it = sessions_.find(sid);
  if (it == sessions_.end()) http_fail(404, "UNKNOWN_SESSION", "no session " + sid);
  return it->second;
}

std::size_t Service::session_count() const {
  std::lock_guard<std::mutex> g(sessions_mu_);
  return sessions_.size();
}

std::shared_ptr<const Session> Service::snapshot(const std::string& sid) const { return slot(sid)->load(); }

Vector Service::resolve_image(const std::string& id) const {
  if (queries_) {
    auto it = query_rows_.find(id);
    if (it != query_rows_.end()) return queries_->rows.row(it->second).transpose();
  }
  if (auto row = index_->find(id)) return index_->raw_vector(*row);
  fail(ErrorCode::InvalidInput, "unknown image id " + id);
}

json Service::counters(const Session& s, std::uint64_t seq) const {
  return {{"n_s", s.n_s()},
          {"n_t", s.n_t()},
          {"round", s.round()},
          {"min_dim_images", s.config().min_dim_images},
          {"feedback_size", s.config().feedback_size},
          {"d_hat_s", dim_json(s.d_hat_s())},
          {"d_hat_t", dim_json(s.d_hat_t())},
          {"estimated", s.d_hat_s().has_value()},
          {"adapted", s.alignment() != nullptr},
          {"status", session_status_name(s.status())},
          {"model_hash", s.alignment() ? json(hex64(s.alignment()->hash)) : json(nullptr)},
          {"last_error", s.last_error() ? json(*s.last_error()) : json(nullptr)},
          {"seq", seq}};
}

// ---- routing ----

Response Service::handle(const std::string& method, const std::string& path, const std::string& body,
                         const std::map<std::string, std::string>& params) {
  try {
    auto parts = split_path(path);
    auto parse_body = [&] { return body.empty() ? json::object() : json::parse(body); };
    if (method == "GET" && parts.size() == 3 && parts[0] == "archive" && parts[2] == "thumb") return thumb(parts[1]);
    if (method == "POST" && parts.size() == 1 && parts[0] == "session") return create_session(parse_body());
    if (parts.size() == 3 && parts[0] == "session") {
      auto s = slot(parts[1]);
      const std::string& op = parts[2];
      if (method == "GET" && op == "status") return status(*s);
      if (method == "GET" && op == "metrics") return metrics(*s, params);
      if (method == "POST" && op == "query") return query(*s, parse_body());
      if (method == "POST" && op == "feedback") return feedback(*s, parse_body());
      if (method == "POST" && op == "adapt") return adapt(*s, parse_body());
    }
    return error_response(404, "NOT_FOUND", method + " " + path);
  } catch (const HttpError& e) {
    return error_response(e.status, e.code, e.message);
  } catch (const Error& e) {
    return error_response(status_for(e.code()), error_code_name(e.code()), e.what());
  } catch (const json::exception& e) {
    return error_response(400, "SCHEMA_ERROR", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "INTERNAL", e.what());
  }
}

Response Service::create_session(const json& body) {
  if (!body.is_object()) http_fail(400, "SCHEMA_ERROR", "body must be an object");
  SessionConfig sc = cfg_.session;
  sc.relearn_every = body.value("relearn_every", sc.relearn_every);
  sc.min_dim_images = body.value("min_dim_images", sc.min_dim_images);
  auto slot = std::make_shared<Slot>();
  slot->publish(Session(index_, sc));
  std::lock_guard<std::mutex> g(sessions_mu_);
  slot->sid = "s" + std::to_string(next_sid_++);
  if (!cfg_.state_dir.empty())
    slot->log = EventLog((fs::path(cfg_.state_dir) / "sessions" / (slot->sid + ".jsonl")).string());
  slot->log.append("Created", {{"relearn_every", sc.relearn_every}, {"min_dim_images", sc.min_dim_images}});
  sessions_[slot->sid] = slot;
  Response r;
  r.status = 201;
  r.body = {{"sid", slot->sid}, {"counters", counters(*slot->load(), slot->log.seq())}};
  return r;
}

Response Service::status(Slot& s) {
  std::lock_guard<std::mutex> g(s.mu);
  Response r;
  r.body = {{"sid", s.sid}, {"counters", counters(*s.load(), s.log.seq())}, {"adapting", s.adapting}};
  return r;
}

Response Service::query(Slot& s, const json& body) {
  std::size_t k = body.value("k", 10);
  if (k < 1 || k > cfg_.max_k) http_fail(400, "INVALID_INPUT", "k must be in [1, " + std::to_string(cfg_.max_k) + "]");
  std::string mode = body.value("mode", "auto");
  if (mode != "auto" && mode != "raw" && mode != "adapted" && mode != "baseline" && mode != "compare")
    http_fail(400, "INVALID_INPUT", "unknown mode " + mode);

  Vector v;
  json event;
  bool upload = body.contains("descriptors");
  if (upload == body.contains("image_id")) http_fail(400, "INVALID_INPUT", "give exactly one of image_id, descriptors");
  if (upload) {
    if (!gmm_) fail(ErrorCode::MissingModel, "descriptor uploads need a GMM model (--gmm)");
    auto rows = body.at("descriptors").get<std::vector<std::vector<double>>>();
    Matrix d(static_cast<Eigen::Index>(rows.size()), gmm_->dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != gmm_->dim()) fail(ErrorCode::InvalidInput, "descriptor dimension differs from the GMM");
      d.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const RowVector>(rows[i].data(), gmm_->dim());
    }
    EncodedVector e = encode_fv(d, *gmm_);
    if (e.values.size() != index_->raw_dim()) fail(ErrorCode::InvalidInput, "encoded upload dimension differs from archive");
    v = e.values;
  } else {
    v = resolve_image(body.at("image_id").get<std::string>());
  }

  std::shared_ptr<const Session> snap;
  std::string qid;
  std::uint64_t seq;
  {
    std::lock_guard<std::mutex> g(s.mu);
    auto cur = s.load();
    if ((mode == "adapted" || mode == "compare") && !cur->alignment()) fail(ErrorCode::NotReady, "session is not adapted yet");
    if (mode == "baseline" && cur->n_t() == 0) fail(ErrorCode::NotReady, "baseline needs at least one query with feedback");
    if (upload) {
      qid = "upload-" + std::to_string(++s.uploads);
      event = {{"query_id", qid}, {"vector", std::vector<double>(v.data(), v.data() + v.size())}};
    } else {
      qid = body.at("image_id").get<std::string>();
      event = {{"query_id", qid}, {"image_id", qid}};
    }
    event["k"] = k;
    event["mode"] = mode;
    s.publish(cur->with_query(qid, v));
    seq = s.log.append("Query", event);
    snap = s.load();
  }

  Response r;
  std::string used = mode;
  if (mode == "baseline") {
    r.body["results"] = hits_json(snap->baseline_query(v, k));
  } else if (mode == "raw") {
    r.body["results"] = hits_json(snap->query(v, k, false));
  } else {
    if (mode == "auto") used = snap->alignment() ? "adapted" : "raw";
    r.body["results"] = hits_json(snap->query(v, k, true));
    if (mode == "compare") r.body["raw_results"] = hits_json(snap->query(v, k, false));
  }
  r.body["query_id"] = qid;
  r.body["mode"] = used;
  r.body["counters"] = counters(*snap, seq);
  return r;
}

bool Service::maybe_learn(Slot& s, std::unique_lock<std::mutex>& lock, bool force) {
  auto cur = s.load();
  if (s.adapting) return false;
  bool due = force ? (cur->d_hat_s() && cur->d_hat_t() &&
                      cur->n_s() > static_cast<std::size_t>(cur->d_hat_s()->rounded) &&
                      cur->n_t() > static_cast<std::size_t>(cur->d_hat_t()->rounded))
                   : cur->should_learn();
  if (!due) return false;
  s.adapting = true;
  lock.unlock();
  std::shared_ptr<const Alignment> a;
  std::string failure;
  try {
    a = cur->prepare_alignment();
  } catch (const Error& e) {
    failure = e.what();
  }
  lock.lock();
  s.adapting = false;
  if (!a) {
    s.publish(s.load()->with_failure(failure));
    return false;
  }
  // Queries and feedback may have landed meanwhile; the model is installed
  // on top of the latest state.
  s.publish(s.load()->with_alignment(a));
  s.log.append("Adapted", {{"model_hash", hex64(a->hash)},
                           {"round", a->round},
                           {"n_s", a->n_s},
                           {"n_t", a->n_t},
                           {"d_source", a->d_source},
                           {"d_target", a->d_target}});
  return true;
}

Response Service::feedback(Slot& s, const json& body) {
  std::string qid = body.at("query_id").get<std::string>();
  auto ids = body.at("selected_ids").get<std::vector<std::string>>();
  std::unique_lock<std::mutex> lock(s.mu);
  Session next = s.load()->record_feedback({qid, ids, 0});
  s.log.append("Feedback", {{"query_id", qid}, {"selected_ids", ids}});
  if (!next.d_hat_s() && next.dims_ready()) {
    try {
      next = next.estimate_dims();
      s.log.append("DimsEstimated", {{"d_hat_s", dim_json(next.d_hat_s())}, {"d_hat_t", dim_json(next.d_hat_t())}});
    } catch (const Error& e) {
      next = next.with_failure(e.what());
    }
  }
  s.publish(std::move(next));
  bool learned = maybe_learn(s, lock, false);
  Response r;
  r.body = {{"accepted", true}, {"learned", learned}, {"counters", counters(*s.load(), s.log.seq())}};
  return r;
}

Response Service::adapt(Slot& s, const json& body) {
  bool force = body.value("force", false);
  std::unique_lock<std::mutex> lock(s.mu);
  auto cur = s.load();
  if (!cur->d_hat_s()) {
    if (!cur->dims_ready())
      fail(ErrorCode::NotReady, "need " + std::to_string(cur->config().min_dim_images) + " distinct images per domain");
    Session next = cur->estimate_dims();
    s.log.append("DimsEstimated", {{"d_hat_s", dim_json(next.d_hat_s())}, {"d_hat_t", dim_json(next.d_hat_t())}});
    s.publish(std::move(next));
  }
  bool learned = maybe_learn(s, lock, force && s.load()->alignment() != nullptr);
  Response r;
  r.body = {{"learned", learned}, {"counters", counters(*s.load(), s.log.seq())}};
  return r;
}

Response Service::metrics(Slot& s, const std::map<std::string, std::string>& params) {
  if (!queries_ || !queries_->has_labels() || !index_->labels())
    fail(ErrorCode::MissingLabels, "metrics need labeled query and archive stores");
  auto snap = s.load();
  std::vector<std::size_t> eval;
  auto it = params.find("ids");
  if (it != params.end() && !it->second.empty()) {
    std::stringstream ss(it->second);
    std::string id;
    while (std::getline(ss, id, ',')) {
      auto row = query_rows_.find(id);
      if (row == query_rows_.end()) fail(ErrorCode::InvalidInput, "unknown query id " + id);
      eval.push_back(static_cast<std::size_t>(row->second));
    }
  } else {
    // every labeled query with at least one relevant archive item
    std::set<std::string> present;
    for (Eigen::Index r = 0; r < index_->size(); ++r)
      if (!index_->is_distractor(r)) present.insert((*index_->labels())[static_cast<std::size_t>(r)]);
    for (std::size_t q = 0; q < static_cast<std::size_t>(queries_->size()); ++q)
      if (present.count((*queries_->labels)[q])) eval.push_back(q);
  }
  Response r;
  r.body["queries"] = eval.size();
  r.body["raw_map"] = held_out_map(*index_, *queries_, eval, [&](const Vector& q) { return index_->rank_all(q); });
  r.body["adapted_map"] = nullptr;
  r.body["baseline_map"] = nullptr;
  if (snap->alignment()) {
    auto ad = snap->alignment()->index;
    r.body["adapted_map"] = held_out_map(*index_, *queries_, eval, [&](const Vector& q) { return ad->rank_all(q); });
  }
  if (snap->n_t() > 0)
    r.body["baseline_map"] =
        held_out_map(*index_, *queries_, eval, [&](const Vector& q) { return index_->rank_all(snap->baseline_probe(q)); });
  return r;
}

Response Service::thumb(const std::string& id) {
  if (!manifest_) http_fail(404, "NOT_FOUND", "no manifest configured");
  for (const auto& e : manifest_->entries) {
    if (e.id != id) continue;
    fs::path p(e.uri);
    if (p.is_relative()) p = fs::path(cfg_.thumb_root) / p;
    if (!fs::is_regular_file(p)) http_fail(404, "NOT_FOUND", "thumbnail file missing for " + id);
    Response r;
    r.raw = read_file(p.string());
    r.content_type = content_type_for(p);
    return r;
  }
  http_fail(404, "NOT_FOUND", "unknown archive id " + id);
}

// ---- HTTP transport ----

int Service::start(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> params;
    for (const auto& [k, v] : req.params) params[k] = v;
    Response r = handle(req.method, req.path, req.body, params);
    res.status = r.status;
    if (r.content_type == "application/json")
      res.set_content(r.body.dump(), "application/json");
    else
      res.set_content(r.raw, r.content_type);
  };
  server_->Get(R"(/.*)", route);
  server_->Post(R"(/.*)", route);
  int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) fail(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void Service::wait() {
  if (thread_.joinable()) thread_.join();
}

void Service::stop() {
  if (server_) server_->stop();
  wait();
}

}  // namespace eraloc::service
