#pragma once

#include "eraloc/adapt.hpp"
#include "eraloc/common.hpp"
#include "eraloc/encode.hpp"
#include "eraloc/linalg.hpp"

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace eraloc {

// ---- manifest: one JSON object per line ----

enum class Era { Old, New };

struct ManifestEntry {
  std::string id;
  std::string label;  // empty only for distractors
  Era era = Era::New;
  std::string uri;
  std::optional<int> year;
  bool distractor = false;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
};

struct ManifestSummary {
  std::size_t old_count = 0;
  std::size_t new_count = 0;
  std::size_t distractors = 0;
  std::map<std::string, std::size_t> per_class;
};

Manifest parse_manifest(const std::string& text);
Manifest load_manifest(const std::string& path);
std::string serialize_manifest(const Manifest& m);
void save_manifest(const std::string& path, const Manifest& m);
ManifestSummary summarize(const Manifest& m);

// ---- binary feature store ----

struct StoreHeader {
  std::uint32_t version = 1;
  Scheme scheme = Scheme::Raw;
  std::uint64_t n = 0;
  std::uint64_t dim = 0;
  bool has_labels = false;
  bool has_distractor_flags = false;
  Domain domain = Domain::Source;
};

void save_features(const std::string& path, const FeatureMatrix& f, Scheme scheme = Scheme::Raw);
FeatureMatrix load_features(const std::string& path, Scheme* scheme = nullptr);

// Reads metadata eagerly and the payload in row blocks.
class FeatureStoreReader {
 public:
  explicit FeatureStoreReader(const std::string& path);
  const StoreHeader& header() const { return header_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::optional<std::vector<std::string>>& labels() const { return labels_; }
  const std::vector<std::uint8_t>& distractor() const { return distractor_; }
  // Up to max_rows float rows (row-major). Returns the number of rows read.
  std::size_t read_block(std::vector<float>& out, std::size_t max_rows);
  std::uint64_t rows_read() const { return done_; }

 private:
  std::ifstream in_;
  StoreHeader header_;
  std::vector<std::string> ids_;
  std::optional<std::vector<std::string>> labels_;
  std::vector<std::uint8_t> distractor_;
  std::uint64_t done_ = 0;
};

// Concatenates both sets; distractor rows are flagged and never relevant.
FeatureMatrix merge_distractors(const FeatureMatrix& relevant, const FeatureMatrix& distractors);

// Uniform sample without replacement over the concatenation of `stores`,
// returned in concatenation order.
FeatureMatrix sample_descriptors(const std::vector<FeatureMatrix>& stores, std::size_t count, std::uint64_t seed);

// Descriptor stores name rows "<image_id>#<index>"; groups rows per image in
// first-appearance order.
std::vector<std::pair<std::string, Matrix>> group_descriptors(const FeatureMatrix& descriptors);

// ---- model container ----

enum class ModelKind : std::uint32_t { Codebook = 1, Gmm = 2, Sa = 3, Gfk = 4, Subspace = 5 };
const char* model_kind_name(ModelKind k);

using AnyModel = std::variant<Codebook, GmmModel, SaModel, GfkModel, Subspace>;
ModelKind kind_of(const AnyModel& m);

std::vector<char> serialize_model(const AnyModel& m);
AnyModel deserialize_model(const std::vector<char>& bytes);
void save_model(const std::string& path, const AnyModel& m);
AnyModel load_model(const std::string& path);
std::uint64_t model_fingerprint(const AnyModel& m);

// ---- files ----

void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);
// Creates manifests/, features/, models/, sessions/ under root.
void ensure_workspace(const std::string& root);

}  // namespace eraloc
