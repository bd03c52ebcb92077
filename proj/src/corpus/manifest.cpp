#include "eraloc/corpus.hpp"

#include <json.hpp>

#include <filesystem>
#include <set>
#include <sstream>

namespace eraloc {

using ordered_json = nlohmann::ordered_json;

Manifest parse_manifest(const std::string& text) {
  Manifest m;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto bad = [&](const std::string& msg) { fail(ErrorCode::SchemaError, "manifest line " + std::to_string(lineno) + ": " + msg); };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      bad(std::string("not valid JSON (") + e.what() + ")");
    }
    if (!j.is_object()) bad("record must be an object");
    ManifestEntry e;
    if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty()) bad("missing id");
    e.id = j["id"].get<std::string>();
    if (!seen.insert(e.id).second) bad("duplicate id " + e.id);
    if (j.contains("distractor")) {
      if (!j["distractor"].is_boolean()) bad("distractor must be a boolean");
      e.distractor = j["distractor"].get<bool>();
    }
    if (j.contains("label") && !j["label"].is_null()) {
      if (!j["label"].is_string()) bad("label must be a string");
      e.label = j["label"].get<std::string>();
    }
    if (e.label.empty() && !e.distractor) bad("missing label for " + e.id);
    if (!j.contains("era") || !j["era"].is_string()) bad("missing era");
    std::string era = j["era"].get<std::string>();
    if (era == "old")
      e.era = Era::Old;
    else if (era == "new")
      e.era = Era::New;
    else
      bad("unknown era '" + era + "'");
    if (j.contains("uri")) {
      if (!j["uri"].is_string()) bad("uri must be a string");
      e.uri = j["uri"].get<std::string>();
    }
    if (j.contains("year") && !j["year"].is_null()) {
      if (!j["year"].is_number_integer()) bad("year must be an integer");
      e.year = j["year"].get<int>();
    }
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) fail(ErrorCode::SchemaError, "manifest line 1: manifest has no entries");
  return m;
}

Manifest load_manifest(const std::string& path) { return parse_manifest(read_file(path)); }

std::string serialize_manifest(const Manifest& m) {
  std::string out;
  for (const auto& e : m.entries) {
    ordered_json j;
    j["id"] = e.id;
    if (!e.label.empty()) j["label"] = e.label;
    j["era"] = e.era == Era::Old ? "old" : "new";
    j["uri"] = e.uri;
    if (e.year) j["year"] = *e.year;
    if (e.distractor) j["distractor"] = true;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_manifest(const std::string& path, const Manifest& m) { write_file_atomic(path, serialize_manifest(m)); }

ManifestSummary summarize(const Manifest& m) {
  ManifestSummary s;
  for (const auto& e : m.entries) {
    (e.era == Era::Old ? s.old_count : s.new_count)++;
    if (e.distractor)
      ++s.distractors;
    else
      ++s.per_class[e.label];
  }
  return s;
}

void ensure_workspace(const std::string& root) {
  for (const char* sub : {"manifests", "features", "models", "sessions"})
    std::filesystem::create_directories(std::filesystem::path(root) / sub);
}

}  // namespace eraloc
