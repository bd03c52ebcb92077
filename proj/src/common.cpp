#include "eraloc/common.hpp"

#include <cstdio>
#include <cstring>
#include <unordered_set>

namespace eraloc {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "INVALID_INPUT";
    case ErrorCode::InsufficientData: return "INSUFFICIENT_DATA";
    case ErrorCode::InvalidDimension: return "INVALID_DIMENSION";
    case ErrorCode::DegenerateSpectrum: return "DEGENERATE_SPECTRUM";
    case ErrorCode::DegenerateData: return "DEGENERATE_DATA";
    case ErrorCode::MissingLabels: return "MISSING_LABELS";
    case ErrorCode::MissingModel: return "MISSING_MODEL";
    case ErrorCode::SchemaError: return "SCHEMA_ERROR";
    case ErrorCode::CorruptStore: return "CORRUPT_STORE";
    case ErrorCode::UnsupportedVersion: return "UNSUPPORTED_VERSION";
    case ErrorCode::InvalidFeedback: return "FEEDBACK_SIZE";
    case ErrorCode::NotReady: return "NOT_READY";
    case ErrorCode::AdaptationFailed: return "ADAPTATION_FAILED";
    case ErrorCode::InvalidEigenvalues: return "INVALID_EIGENVALUES";
    case ErrorCode::Io: return "IO_ERROR";
    case ErrorCode::Internal: return "INTERNAL";
  }
  return "INTERNAL";
}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

void FeatureMatrix::validate() const {
  if (rows.cols() < 1) fail(ErrorCode::InvalidInput, "feature dimension must be >= 1");
  if (static_cast<Eigen::Index>(ids.size()) != rows.rows())
    fail(ErrorCode::InvalidInput, "id count does not match row count");
  if (labels && static_cast<Eigen::Index>(labels->size()) != rows.rows())
    fail(ErrorCode::InvalidInput, "label count does not match row count");
  if (!distractor.empty() && static_cast<Eigen::Index>(distractor.size()) != rows.rows())
    fail(ErrorCode::InvalidInput, "distractor flag count does not match row count");
  std::unordered_set<std::string> seen;
  seen.reserve(ids.size());
  for (const auto& id : ids)
    if (!seen.insert(id).second) fail(ErrorCode::InvalidInput, "duplicate id: " + id);
}

FeatureMatrix FeatureMatrix::subset(const std::vector<Eigen::Index>& idx) const {
  FeatureMatrix out;
  out.domain = domain;
  out.rows.resize(static_cast<Eigen::Index>(idx.size()), rows.cols());
  out.ids.reserve(idx.size());
  if (labels) out.labels.emplace();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    Eigen::Index i = idx[r];
    if (i < 0 || i >= rows.rows()) fail(ErrorCode::InvalidInput, "row index out of range");
    out.rows.row(static_cast<Eigen::Index>(r)) = rows.row(i);
    out.ids.push_back(ids[static_cast<std::size_t>(i)]);
    if (labels) out.labels->push_back((*labels)[static_cast<std::size_t>(i)]);
    if (!distractor.empty()) out.distractor.push_back(distractor[static_cast<std::size_t>(i)]);
  }
  return out;
}

FeatureMatrix make_features(Matrix rows, const std::string& prefix, Domain domain) {
  FeatureMatrix f;
  f.domain = domain;
  f.ids.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) f.ids.push_back(prefix + std::to_string(i));
  f.rows = std::move(rows);
  return f;
}

Vector l2_normalized(const Vector& v) {
  double n = v.norm();
  if (n == 0.0) return v;
  return v / n;
}

void l2_normalize_rows(Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double n = m.row(i).norm();
    if (n > 0.0) m.row(i) /= n;
  }
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_matrix(const Matrix& m, std::uint64_t h) {
  std::int64_t dims[2] = {m.rows(), m.cols()};
  h = fnv1a(dims, sizeof(dims), h);
  // column-major storage; hash element by element so padding never matters
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      double v = m(i, j);
      h = fnv1a(&v, sizeof(v), h);
    }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace eraloc
