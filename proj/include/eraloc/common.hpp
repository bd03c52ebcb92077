#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace eraloc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class ErrorCode : int {
  InvalidInput = 1,
  InsufficientData,
  InvalidDimension,
  DegenerateSpectrum,
  DegenerateData,
  MissingLabels,
  MissingModel,
  SchemaError,
  CorruptStore,
  UnsupportedVersion,
  InvalidFeedback,
  NotReady,
  AdaptationFailed,
  InvalidEigenvalues,
  Io,
  Internal,
};

/// Short machine-readable name, e.g. "INVALID_INPUT".
const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

enum class Domain : std::uint32_t { Source = 0, Target = 1 };

// n x D sample matrix plus per-row metadata. Rows are samples.
struct FeatureMatrix {
  Matrix rows;
  std::vector<std::string> ids;
  std::optional<std::vector<std::string>> labels;
  std::vector<std::uint8_t> distractor;  // empty or one flag per row
  Domain domain = Domain::Source;

  Eigen::Index size() const { return rows.rows(); }
  Eigen::Index dim() const { return rows.cols(); }
  bool has_labels() const { return labels.has_value(); }
  bool is_distractor(Eigen::Index i) const {
    return !distractor.empty() && distractor[static_cast<std::size_t>(i)] != 0;
  }

  // Checks the structural invariants (unique ids, label count, D >= 1).
  void validate() const;

  // Rows selected by index, metadata carried along.
  FeatureMatrix subset(const std::vector<Eigen::Index>& idx) const;
};

// Builds a FeatureMatrix with generated ids "<prefix><i>".
FeatureMatrix make_features(Matrix rows, const std::string& prefix = "s",
                            Domain domain = Domain::Source);

Vector l2_normalized(const Vector& v);
void l2_normalize_rows(Matrix& m);

// 64-bit FNV-1a over raw bytes; used for model fingerprints.
std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t hash_matrix(const Matrix& m, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace eraloc
