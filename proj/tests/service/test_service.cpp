#include <doctest.h>

#include "service/service.hpp"

#include "eraloc/rng.hpp"
#include "synthetic.hpp"

#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>
#include <unistd.h>

using namespace eraloc;
using namespace eraloc::service;
namespace fs = std::filesystem;

namespace {

// Subset of JSON Schema used by schema/http_api.json: type, enum, required,
// properties, additionalProperties=false, items, min/max, maxItems, local $ref.
class SchemaChecker {
 public:
  explicit SchemaChecker(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    root_ = json::parse(in);
  }

  // Empty string when valid, else the first violation with its location.
  std::string check(const std::string& def, const json& v) const {
    return check_node(root_.at("$defs").at(def), v, def);
  }

  // Schema reference for a response of one endpoint.
  std::string response_def(const std::string& method, const std::string& path, int status) const {
    for (const auto& e : root_.at("endpoints"))
      if (e.at("method") == method && e.at("path") == path) {
        const auto& r = e.at("responses").at(std::to_string(status));
        return r.at("$ref").get<std::string>().substr(std::string("#/$defs/").size());
      }
    return "";
  }

 private:
  json root_;

  static bool has_type(const json& v, const std::string& t) {
    if (t == "null") return v.is_null();
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "integer") return v.is_number_integer();
    if (t == "number") return v.is_number();
    return false;
  }

  std::string check_node(const json& s, const json& v, const std::string& at) const {
    if (s.contains("$ref")) {
      std::string name = s.at("$ref").get<std::string>().substr(std::string("#/$defs/").size());
      return check_node(root_.at("$defs").at(name), v, at);
    }
    if (s.contains("type")) {
      bool ok = false;
      if (s.at("type").is_string()) ok = has_type(v, s.at("type"));
      else
        for (const auto& t : s.at("type")) ok = ok || has_type(v, t);
      if (!ok) return at + ": type " + std::string(v.type_name()) + " not allowed";
    }
    if (v.is_null()) return "";
    if (s.contains("enum") && std::find(s.at("enum").begin(), s.at("enum").end(), v) == s.at("enum").end())
      return at + ": " + v.dump() + " not in enum";
    if (s.contains("minimum") && v.is_number() && v.get<double>() < s.at("minimum").get<double>())
      return at + ": below minimum";
    if (s.contains("maximum") && v.is_number() && v.get<double>() > s.at("maximum").get<double>())
      return at + ": above maximum";
    if (v.is_object()) {
      for (const auto& r : s.value("required", json::array()))
        if (!v.contains(r.get<std::string>())) return at + ": missing " + r.get<std::string>();
      json props = s.value("properties", json::object());
      for (const auto& [k, x] : v.items()) {
        if (!props.contains(k)) {
          if (s.value("additionalProperties", true) == false) return at + ": unexpected field " + k;
          continue;
        }
        auto e = check_node(props.at(k), x, at + "." + k);
        if (!e.empty()) return e;
      }
    }
    if (v.is_array()) {
      if (s.contains("maxItems") && v.size() > s.at("maxItems").get<std::size_t>()) return at + ": too many items";
      if (s.contains("items"))
        for (std::size_t i = 0; i < v.size(); ++i) {
          auto e = check_node(s.at("items"), v[i], at + "[" + std::to_string(i) + "]");
          if (!e.empty()) return e;
        }
    }
    return "";
  }
};

const SchemaChecker& schema() {
  static SchemaChecker c(ERALOC_SCHEMA_PATH);
  return c;
}

// Checks a response body against the schema entry of its endpoint.
void conforms(const std::string& method, const std::string& path, const Response& r) {
  std::string def = schema().response_def(method, path, r.status);
  REQUIRE_MESSAGE(!def.empty(), method << " " << path << " has no schema for status " << r.status);
  std::string err = schema().check(def, r.body);
  CHECK_MESSAGE(err.empty(), err);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("eraloc_service_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

synth::RetrievalCorpus small_corpus(int distractors = 500, double within = 0.5) {
  synth::RetrievalParams p;
  p.distractors = distractors;
  p.within = within;
  return synth::make_retrieval_corpus(2, p);
}

// Thin client over handle(): the same calls the HTTP transport makes.
struct Driver {
  Service& svc;
  std::string sid;

  Response post(const std::string& op, const json& body) {
    return svc.handle("POST", "/session/" + sid + "/" + op, body.dump());
  }
  Response get(const std::string& op, const std::map<std::string, std::string>& params = {}) {
    return svc.handle("GET", "/session/" + sid + "/" + op, "", params);
  }
  static Driver open(Service& svc, const json& body = json::object()) {
    Response r = svc.handle("POST", "/session", body.dump());
    REQUIRE(r.status == 201);
    return {svc, r.body.at("sid")};
  }
};

std::vector<Hit> hits_from(const RetrievalIndex& index, const json& results) {
  std::vector<Hit> hits;
  for (const auto& h : results) {
    auto row = index.find(h.at("id").get<std::string>());
    REQUIRE(row.has_value());
    hits.push_back({h.at("id"), *row, h.at("score")});
  }
  return hits;
}

// Cooperative user for one scheduled query row; returns the feedback response.
Response oracle_step(Driver& d, const RetrievalIndex& index, const FeatureMatrix& queries, std::size_t qi,
                     std::size_t k, std::uint64_t seed) {
  Response q = d.post("query", {{"image_id", queries.ids[qi]}, {"k", k}});
  REQUIRE(q.status == 200);
  auto picks = oracle_select(index, hits_from(index, q.body.at("results")), (*queries.labels)[qi], 3, 0.0, seed);
  Response f = d.post("feedback", {{"query_id", q.body.at("query_id")}, {"selected_ids", picks}});
  REQUIRE(f.status == 200);
  return f;
}

}  // namespace

TEST_CASE("query returns k ranked hits and counters; request errors carry codes") {
  auto c = small_corpus();
  Service svc(ServiceConfig{}, c.archive, c.queries);
  Response created = svc.handle("POST", "/session", "{}");
  CHECK(created.status == 201);
  conforms("POST", "/session", created);
  Driver d{svc, created.body.at("sid")};

  Response q = d.post("query", {{"image_id", c.queries.ids[0]}, {"k", 10}});
  REQUIRE(q.status == 200);
  conforms("POST", "/session/{sid}/query", q);
  REQUIRE(q.body.at("results").size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(q.body["results"][i]["rank"] == i + 1);
  CHECK(q.body.at("mode") == "raw");
  const json& ctr = q.body.at("counters");
  // counters move with feedback, not with issued queries
  CHECK(ctr.at("n_s") == 0);
  CHECK(ctr.at("n_t") == 0);
  CHECK(ctr.at("adapted") == false);
  CHECK(ctr.at("min_dim_images") == 15);

  // same ranking as the index itself
  auto index = RetrievalIndex::build(c.archive);
  auto direct = index.query(c.queries.rows.row(0).transpose(), 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(q.body["results"][i]["id"] == direct[i].id);

  auto two = d.post("feedback", {{"query_id", c.queries.ids[0]}, {"selected_ids", {direct[0].id, direct[1].id}}});
  CHECK(two.status == 400);
  CHECK(two.body["error"]["code"] == "FEEDBACK_SIZE");
  conforms("POST", "/session/{sid}/feedback", two);

  auto unknown = svc.handle("GET", "/session/s999/status", "");
  CHECK(unknown.status == 404);
  CHECK(unknown.body["error"]["code"] == "UNKNOWN_SESSION");
  conforms("GET", "/session/{sid}/status", unknown);

  auto malformed = svc.handle("POST", "/session/" + d.sid + "/query", "{\"image_id\": ");
  CHECK(malformed.status == 400);
  CHECK(malformed.body["error"]["code"] == "SCHEMA_ERROR");

  CHECK(d.post("query", {{"image_id", c.queries.ids[0]}, {"k", 0}}).status == 400);
  CHECK(d.post("query", {{"image_id", c.queries.ids[0]}, {"k", 1001}}).status == 400);
  CHECK(d.post("query", {{"image_id", c.queries.ids[0]}, {"k", 1000}}).status == 200);
  CHECK(d.post("query", {{"image_id", "no-such-image"}}).body["error"]["code"] == "INVALID_INPUT");
  CHECK(d.post("query", {{"image_id", c.queries.ids[0]}, {"mode", "sideways"}}).status == 400);
  CHECK(d.post("query", json::object()).status == 400);
  CHECK(d.post("query", {{"image_id", c.queries.ids[0]}, {"descriptors", json::array()}}).status == 400);
  auto adapted = d.post("query", {{"image_id", c.queries.ids[0]}, {"mode", "adapted"}});
  CHECK(adapted.status == 409);
  CHECK(adapted.body["error"]["code"] == "NOT_READY");
  CHECK(d.post("query", {{"image_id", c.queries.ids[0]}, {"mode", "baseline"}}).status == 409);
  auto upload = d.post("query", {{"descriptors", {{1.0, 2.0}}}});
  CHECK(upload.status == 409);
  CHECK(upload.body["error"]["code"] == "MISSING_MODEL");
  auto early = d.post("adapt", json::object());
  CHECK(early.status == 409);
  conforms("POST", "/session/{sid}/adapt", early);

  // feedback for a query the session never issued
  auto stray = d.post("feedback", {{"query_id", c.queries.ids[5]}, {"selected_ids", {"a", "b", "c"}}});
  CHECK(stray.status == 400);

  CHECK(svc.handle("GET", "/nowhere", "").status == 404);
  CHECK(svc.handle("GET", "/archive/" + c.archive.ids[0] + "/thumb", "").status == 404);
  CHECK(svc.session_count() == 1);
}

TEST_CASE("status moves from not-ready through estimated to adapted") {
  auto c = small_corpus(500, 2.0);
  Service svc(ServiceConfig{}, c.archive, c.queries);
  // broad classes give dimension estimates above 15, so learning waits for more feedback
  Driver d = Driver::open(svc);
  auto index = RetrievalIndex::build(c.archive);
  auto usable = usable_queries(c.archive, c.queries, 3);

  auto st = d.get("status");
  conforms("GET", "/session/{sid}/status", st);
  CHECK(st.body["counters"]["status"] == "not-ready");
  CHECK(st.body["adapting"] == false);

  std::vector<std::string> seen{"not-ready"};
  std::uint64_t last_seq = st.body["counters"]["seq"];
  for (std::size_t step = 0; step < 40; ++step) {
    Response f = oracle_step(d, index, c.queries, usable[step], 50, step + 1);
    conforms("POST", "/session/{sid}/feedback", f);
    const json& ctr = f.body.at("counters");
    CHECK(ctr.at("seq").get<std::uint64_t>() > last_seq);
    last_seq = ctr.at("seq");
    if (ctr.at("status") != seen.back()) seen.push_back(ctr.at("status"));
    if (step + 1 < 15) CHECK(ctr.at("estimated") == false);
  }
  CHECK(seen == std::vector<std::string>{"not-ready", "estimated", "adapted"});

  auto st2 = d.get("status");
  CHECK(st2.body["counters"]["adapted"] == true);
  CHECK(st2.body["counters"]["model_hash"].is_string());
  CHECK(st2.body["counters"]["d_hat_s"]["rounded"].get<int>() >= 1);

  auto cmp = d.post("query", {{"image_id", c.queries.ids[usable[50]]}, {"k", 5}, {"mode", "compare"}});
  REQUIRE(cmp.status == 200);
  conforms("POST", "/session/{sid}/query", cmp);
  CHECK(cmp.body["results"].size() == 5);
  CHECK(cmp.body["raw_results"].size() == 5);
  auto raw = d.post("query", {{"image_id", c.queries.ids[usable[50]]}, {"k", 5}, {"mode", "raw"}});
  CHECK(raw.body["results"] == cmp.body["raw_results"]);
  auto base = d.post("query", {{"image_id", c.queries.ids[usable[50]]}, {"k", 5}, {"mode", "baseline"}});
  CHECK(base.status == 200);
  CHECK(base.body["mode"] == "baseline");

  auto m = d.get("metrics");
  REQUIRE(m.status == 200);
  conforms("GET", "/session/{sid}/metrics", m);
  CHECK(m.body["adapted_map"].is_number());
  CHECK(m.body["queries"] == usable.size());

  // a forced re-learn equals a fresh learn over the current state
  auto expected = svc.snapshot(d.sid)->prepare_alignment()->hash;
  auto forced = d.post("adapt", {{"force", true}});
  REQUIRE(forced.status == 200);
  conforms("POST", "/session/{sid}/adapt", forced);
  CHECK(forced.body["learned"] == true);
  CHECK(forced.body["counters"]["model_hash"] == hex64(expected));
}

TEST_CASE("thumbnails are served from manifest uris") {
  auto c = small_corpus(0);
  TempDir dir("thumb");
  Manifest m;
  for (int i = 0; i < 2; ++i) {
    ManifestEntry e;
    e.id = c.archive.ids[static_cast<std::size_t>(i)];
    e.label = (*c.archive.labels)[static_cast<std::size_t>(i)];
    e.uri = "t/" + e.id + ".jpg";
    m.entries.push_back(e);
  }
  save_manifest((dir.path / "manifest.jsonl").string(), m);
  fs::create_directories(dir.path / "t");
  std::ofstream(dir.path / "t" / (m.entries[0].id + ".jpg"), std::ios::binary) << "\xff\xd8\xff";

  ServiceConfig cfg;
  cfg.manifest_path = (dir.path / "manifest.jsonl").string();
  Service svc(cfg, c.archive, c.queries);
  auto ok = svc.handle("GET", "/archive/" + m.entries[0].id + "/thumb", "");
  CHECK(ok.status == 200);
  CHECK(ok.raw == "\xff\xd8\xff");
  CHECK(ok.content_type == "image/jpeg");
  auto missing_file = svc.handle("GET", "/archive/" + m.entries[1].id + "/thumb", "");
  CHECK(missing_file.status == 404);
  conforms("GET", "/archive/{id}/thumb", missing_file);
  CHECK(svc.handle("GET", "/archive/nope/thumb", "").status == 404);
}

TEST_CASE("replaying the event log restores the uninterrupted session state") {
  auto c = small_corpus();
  auto index = RetrievalIndex::build(c.archive);
  auto usable = usable_queries(c.archive, c.queries, 3);
  TempDir crashed("crash"), steady("steady");
  ServiceConfig cc, sc;
  cc.state_dir = crashed.path.string();
  sc.state_dir = steady.path.string();
  json opts = {{"relearn_every", 10}};

  Service uninterrupted(sc, c.archive, c.queries);
  Driver u = Driver::open(uninterrupted, opts);
  json before_crash;
  std::string sid;
  {
    Service first(cc, c.archive, c.queries);
    Driver d = Driver::open(first, opts);
    sid = d.sid;
    for (std::size_t step = 0; step < 25; ++step) {
      oracle_step(d, index, c.queries, usable[step], 50, step + 1);
      oracle_step(u, index, c.queries, usable[step], 50, step + 1);
    }
    // a query without feedback is part of the state too
    d.post("query", {{"image_id", c.queries.ids[usable[99]]}, {"k", 3}});
    u.post("query", {{"image_id", c.queries.ids[usable[99]]}, {"k", 3}});
    before_crash = d.get("status").body;
    REQUIRE(before_crash["counters"]["adapted"] == true);
  }

  Service second(cc, c.archive, c.queries);
  REQUIRE(second.session_count() == 1);
  Driver r{second, sid};
  CHECK(r.get("status").body == before_crash);
  auto a = second.snapshot(sid);
  auto b = uninterrupted.snapshot(u.sid);
  CHECK(a->n_s() == b->n_s());
  CHECK(a->n_t() == b->n_t());
  CHECK(a->round() == b->round());
  CHECK(a->source_ids() == b->source_ids());
  REQUIRE(a->alignment());
  CHECK(a->alignment()->hash == b->alignment()->hash);
  CHECK(a->alignment()->round == b->alignment()->round);
  // bit-exact model
  CHECK((a->alignment()->space->model.m.array() == b->alignment()->space->model.m.array()).all());

  // both continue identically, including the next periodic re-learn
  for (std::size_t step = 25; step < 32; ++step) {
    auto fa = oracle_step(r, index, c.queries, usable[step], 50, step + 1);
    auto fb = oracle_step(u, index, c.queries, usable[step], 50, step + 1);
    CHECK(fa.body["counters"]["model_hash"] == fb.body["counters"]["model_hash"]);
    CHECK(fa.body["learned"] == fb.body["learned"]);
  }
  CHECK(second.snapshot(sid)->alignment()->round > a->alignment()->round);

  // new sessions do not reuse a replayed id
  CHECK(Driver::open(second).sid != sid);
}

TEST_CASE("replay ignores a torn final line and rejects a tampered model hash") {
  auto c = small_corpus();
  auto index = RetrievalIndex::build(c.archive);
  auto usable = usable_queries(c.archive, c.queries, 3);
  TempDir dir("torn");
  ServiceConfig cfg;
  cfg.state_dir = dir.path.string();
  std::string sid;
  json status;
  {
    Service svc(cfg, c.archive, c.queries);
    Driver d = Driver::open(svc);
    sid = d.sid;
    for (std::size_t step = 0; step < 20; ++step) oracle_step(d, index, c.queries, usable[step], 50, step + 1);
    status = d.get("status").body;
  }
  fs::path log = dir.path / "sessions" / (sid + ".jsonl");
  REQUIRE(fs::exists(log));

  // sequence numbers strictly increase and the four event kinds all occur
  std::set<std::string> types;
  std::uint64_t prev = 0;
  for (const auto& e : EventLog::read(log.string())) {
    CHECK(e.at("seq").get<std::uint64_t>() > prev);
    prev = e.at("seq");
    types.insert(e.at("type"));
    CHECK(e.contains("ts"));
  }
  CHECK(types == std::set<std::string>{"Created", "Query", "Feedback", "DimsEstimated", "Adapted"});

  std::ofstream(log, std::ios::app) << "{\"seq\": 999, \"type\": \"Feedb";
  {
    Service svc(cfg, c.archive, c.queries);
    CHECK(Driver{svc, sid}.get("status").body == status);
  }

  std::string text;
  {
    std::ifstream in(log);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto pos = text.find("\"model_hash\":\"");
  REQUIRE(pos != std::string::npos);
  pos += std::string("\"model_hash\":\"").size();
  text[pos] = text[pos] == '0' ? '1' : '0';
  std::ofstream(log, std::ios::trunc) << text;
  try {
    Service svc(cfg, c.archive, c.queries);
    FAIL("tampered log was accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CorruptStore);
  }
}

TEST_CASE("a session driven over HTTP reproduces simulate_session exactly") {
  auto c = small_corpus();
  SimulationConfig sim;
  sim.schedule_length = 30;
  sim.top_k = 50;
  sim.repetitions = 2;
  sim.seed = 11;
  sim.session.relearn_every = 10;
  SessionReport report = simulate_session(c.archive, c.queries, sim);

  Service svc(ServiceConfig{}, c.archive, c.queries);
  int port = svc.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client http("127.0.0.1", port);
  auto post = [&](const std::string& path, const json& body) {
    auto res = http.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    return std::make_pair(res->status, json::parse(res->body));
  };

  auto index = RetrievalIndex::build(c.archive);
  auto usable = usable_queries(c.archive, c.queries, sim.session.feedback_size);
  for (int rep = 0; rep < sim.repetitions; ++rep) {
    const RepetitionReport& rr = report.reps[static_cast<std::size_t>(rep)];
    auto [schedule, eval] = repetition_split(usable, sim, rep);
    std::uint64_t rep_seed = repetition_seed(sim, rep);
    auto [cs, created] = post("/session", {{"relearn_every", 10}});
    REQUIRE(cs == 201);
    std::string base = "/session/" + created.at("sid").get<std::string>();

    std::size_t trigger = 0;
    json ctr;
    for (std::size_t step = 0; step < schedule.size(); ++step) {
      std::size_t qi = schedule[step];
      auto [qs, q] = post(base + "/query", {{"image_id", c.queries.ids[qi]}, {"k", sim.top_k}, {"mode", "auto"}});
      REQUIRE(qs == 200);
      auto picks = oracle_select(index, hits_from(index, q.at("results")), (*c.queries.labels)[qi], 3, sim.noise,
                                 derive_seed(rep_seed, step + 1));
      auto [fs_, f] = post(base + "/feedback", {{"query_id", q.at("query_id")}, {"selected_ids", picks}});
      REQUIRE(fs_ == 200);
      ctr = f.at("counters");
      if (!trigger && ctr.at("adapted") == true) trigger = ctr.at("n_t");
    }
    CHECK(ctr.at("n_s") == rr.n_s);
    CHECK(ctr.at("n_t") == rr.n_t);
    CHECK(trigger == rr.trigger_queries);
    REQUIRE(rr.adapted);
    CHECK(ctr.at("model_hash") == hex64(rr.model_hash));

    std::string ids;
    for (std::size_t e : eval) ids += (ids.empty() ? "" : ",") + c.queries.ids[e];
    auto res = http.Get(base + "/metrics", httplib::Params{{"ids", ids}}, httplib::Headers{});
    REQUIRE(res);
    REQUIRE(res->status == 200);
    json m = json::parse(res->body);
    CHECK(m.at("queries") == eval.size());
    CHECK(m.at("raw_map").get<double>() == rr.before);
    CHECK(m.at("adapted_map").get<double>() == rr.after);
    CHECK(m.at("baseline_map").get<double>() == rr.baseline);
  }

  auto res = http.Get("/session/nope/status");
  REQUIRE(res);
  CHECK(res->status == 404);
  svc.stop();
}

TEST_CASE("queries keep being answered while a session adapts") {
  auto c = small_corpus(20000);
  auto index = RetrievalIndex::build(c.archive);
  auto usable = usable_queries(c.archive, c.queries, 3);
  Service svc(ServiceConfig{}, c.archive, c.queries);
  Driver d = Driver::open(svc);

  std::atomic<bool> done{false};
  std::atomic<int> errors{0}, during{0}, answered{0};
  std::atomic<bool> seq_monotone{true};
  std::thread reader([&] {
    std::uint64_t last = 0;
    std::size_t i = 0;
    while (!done) {
      bool adapting_before = d.get("status").body.at("adapting");
      Response q = d.post("query", {{"image_id", c.archive.ids[i++ % 50]}, {"k", 10}});
      if (q.status != 200) {
        ++errors;
        continue;
      }
      ++answered;
      std::uint64_t s = q.body["counters"]["seq"];
      if (s <= last) seq_monotone = false;
      last = s;
      if (adapting_before && d.get("status").body.at("adapting") == true) ++during;
    }
  });
  bool learned = false;
  for (std::size_t step = 0; step < 40 && !learned; ++step)
    learned = oracle_step(d, index, c.queries, usable[step], 50, step + 1).body.at("learned");
  done = true;
  reader.join();
  CHECK(learned);
  CHECK(errors == 0);
  CHECK(seq_monotone);
  CHECK(answered > 0);
  // at least one query started and finished inside the adaptation window
  CHECK(during > 0);
}
