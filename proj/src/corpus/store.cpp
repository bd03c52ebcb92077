#include "eraloc/corpus.hpp"
#include "eraloc/rng.hpp"

#include <atomic>
#include <bit>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <unistd.h>

static_assert(std::endian::native == std::endian::little, "stores are little-endian; big-endian hosts unsupported");

namespace eraloc {
namespace fs = std::filesystem;

namespace {

constexpr char kStoreMagic[4] = {'E', 'R', 'F', 'S'};
constexpr std::uint32_t kStoreVersion = 1;
constexpr std::uint32_t kDtypeF32 = 1;
constexpr std::uint32_t kFlagLabels = 1;
constexpr std::uint32_t kFlagDistractor = 2;

std::string temp_name(const std::string& path) {
  static std::atomic<unsigned> counter{0};
  return path + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
}

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
T get(std::istream& is) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) fail(ErrorCode::CorruptStore, "feature store truncated");
  return v;
}

std::string get_string(std::istream& is) {
  auto len = get<std::uint32_t>(is);
  if (len > (1u << 20)) fail(ErrorCode::CorruptStore, "implausible string length in store");
  std::string s(len, '\0');
  if (len && !is.read(s.data(), len)) fail(ErrorCode::CorruptStore, "feature store truncated");
  return s;
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& bytes) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::string tmp = temp_name(path);
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorCode::Io, "cannot write " + tmp);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) fail(ErrorCode::Io, "write failed for " + tmp);
  }
  fs::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_features(const std::string& path, const FeatureMatrix& f, Scheme scheme) {
  f.validate();
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::string tmp = temp_name(path);
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorCode::Io, "cannot write " + tmp);
    os.write(kStoreMagic, 4);
    put<std::uint32_t>(os, kStoreVersion);
    put<std::uint32_t>(os, kDtypeF32);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(scheme));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(f.size()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(f.dim()));
    std::uint32_t flags = (f.has_labels() ? kFlagLabels : 0) | (f.distractor.empty() ? 0 : kFlagDistractor);
    put<std::uint32_t>(os, flags);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(f.domain));
    for (const auto& id : f.ids) put_string(os, id);
    if (f.has_labels())
      for (const auto& l : *f.labels) put_string(os, l);
    if (!f.distractor.empty()) os.write(reinterpret_cast<const char*>(f.distractor.data()), static_cast<std::streamsize>(f.distractor.size()));
    std::vector<float> row(static_cast<std::size_t>(f.dim()));
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      for (Eigen::Index j = 0; j < f.dim(); ++j) row[static_cast<std::size_t>(j)] = static_cast<float>(f.rows(i, j));
      os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!os) fail(ErrorCode::Io, "write failed for " + tmp);
  }
  fs::rename(tmp, path);
}

FeatureStoreReader::FeatureStoreReader(const std::string& path) : in_(path, std::ios::binary) {
  if (!in_) fail(ErrorCode::Io, "cannot open " + path);
  char magic[4];
  if (!in_.read(magic, 4)) fail(ErrorCode::CorruptStore, "feature store truncated");
  if (std::memcmp(magic, kStoreMagic, 4) != 0) fail(ErrorCode::UnsupportedVersion, path + " is not a feature store");
  header_.version = get<std::uint32_t>(in_);
  if (header_.version != kStoreVersion)
    fail(ErrorCode::UnsupportedVersion, "feature store version " + std::to_string(header_.version) + " unsupported");
  if (get<std::uint32_t>(in_) != kDtypeF32) fail(ErrorCode::UnsupportedVersion, "unsupported store dtype");
  header_.scheme = static_cast<Scheme>(get<std::uint32_t>(in_));
  header_.n = get<std::uint64_t>(in_);
  header_.dim = get<std::uint64_t>(in_);
  auto flags = get<std::uint32_t>(in_);
  header_.has_labels = flags & kFlagLabels;
  header_.has_distractor_flags = flags & kFlagDistractor;
  header_.domain = static_cast<Domain>(get<std::uint32_t>(in_));
  if (header_.dim == 0) fail(ErrorCode::CorruptStore, "store dimension is zero");

  auto here = in_.tellg();
  in_.seekg(0, std::ios::end);
  const auto size = static_cast<std::uint64_t>(in_.tellg());
  in_.seekg(here);
  // every id costs at least 4 bytes; reject absurd counts before allocating
  if (header_.n * 4 > size) fail(ErrorCode::CorruptStore, "feature store truncated");

  ids_.reserve(header_.n);
  for (std::uint64_t i = 0; i < header_.n; ++i) ids_.push_back(get_string(in_));
  if (header_.has_labels) {
    labels_.emplace();
    labels_->reserve(header_.n);
    for (std::uint64_t i = 0; i < header_.n; ++i) labels_->push_back(get_string(in_));
  }
  if (header_.has_distractor_flags) {
    distractor_.resize(header_.n);
    if (!in_.read(reinterpret_cast<char*>(distractor_.data()), static_cast<std::streamsize>(header_.n)))
      fail(ErrorCode::CorruptStore, "feature store truncated");
  }
  const auto payload_start = static_cast<std::uint64_t>(in_.tellg());
  const std::uint64_t expected = header_.n * header_.dim * sizeof(float);
  if (size - payload_start != expected)
    fail(ErrorCode::CorruptStore, "payload holds " + std::to_string(size - payload_start) + " bytes, expected " +
                                      std::to_string(expected));
}

std::size_t FeatureStoreReader::read_block(std::vector<float>& out, std::size_t max_rows) {
  std::size_t rows = static_cast<std::size_t>(std::min<std::uint64_t>(max_rows, header_.n - done_));
  out.resize(rows * header_.dim);
  if (rows && !in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size() * sizeof(float))))
    fail(ErrorCode::CorruptStore, "feature store truncated");
  done_ += rows;
  return rows;
}

FeatureMatrix load_features(const std::string& path, Scheme* scheme) {
  FeatureStoreReader r(path);
  FeatureMatrix f;
  const auto& h = r.header();
  if (scheme) *scheme = h.scheme;
  f.domain = h.domain;
  f.ids = r.ids();
  f.labels = r.labels();
  f.distractor = r.distractor();
  f.rows.resize(static_cast<Eigen::Index>(h.n), static_cast<Eigen::Index>(h.dim));
  std::vector<float> block;
  Eigen::Index row = 0;
  while (std::size_t got = r.read_block(block, 4096)) {
    for (std::size_t i = 0; i < got; ++i, ++row)
      for (std::uint64_t j = 0; j < h.dim; ++j) f.rows(row, static_cast<Eigen::Index>(j)) = block[i * h.dim + j];
  }
  f.validate();
  return f;
}

FeatureMatrix merge_distractors(const FeatureMatrix& relevant, const FeatureMatrix& distractors) {
  if (distractors.size() == 0) {
    FeatureMatrix out = relevant;
    if (out.distractor.empty()) out.distractor.assign(static_cast<std::size_t>(out.size()), 0);
    return out;
  }
  if (relevant.dim() != distractors.dim()) fail(ErrorCode::InvalidInput, "relevant and distractor dimensions differ");
  FeatureMatrix out;
  out.domain = relevant.domain;
  out.rows.resize(relevant.size() + distractors.size(), relevant.dim());
  out.rows << relevant.rows, distractors.rows;
  out.ids = relevant.ids;
  out.ids.insert(out.ids.end(), distractors.ids.begin(), distractors.ids.end());
  if (relevant.has_labels()) {
    out.labels = *relevant.labels;
    out.labels->resize(out.ids.size());  // distractors carry no label
  }
  out.distractor.assign(static_cast<std::size_t>(relevant.size()), 0);
  for (Eigen::Index i = 0; i < relevant.size(); ++i)
    if (relevant.is_distractor(i)) out.distractor[static_cast<std::size_t>(i)] = 1;
  out.distractor.resize(out.ids.size(), 1);
  out.validate();
  return out;
}

FeatureMatrix sample_descriptors(const std::vector<FeatureMatrix>& stores, std::size_t count, std::uint64_t seed) {
  if (stores.empty()) fail(ErrorCode::InsufficientData, "no descriptor stores given");
  std::size_t total = 0;
  for (const auto& s : stores) {
    if (s.dim() != stores.front().dim()) fail(ErrorCode::InvalidInput, "descriptor stores differ in dimension");
    total += static_cast<std::size_t>(s.size());
  }
  if (count > total)
    fail(ErrorCode::InsufficientData, "asked for " + std::to_string(count) + " descriptors, only " + std::to_string(total) + " available");
  Rng rng(seed);
  auto pick = count == total ? std::vector<std::size_t>() : rng.sample(total, count);
  if (count == total) {
    pick.resize(total);
    for (std::size_t i = 0; i < total; ++i) pick[i] = i;
  }
  FeatureMatrix out;
  out.domain = stores.front().domain;
  out.rows.resize(static_cast<Eigen::Index>(count), stores.front().dim());
  std::size_t store = 0, base = 0;
  for (std::size_t r = 0; r < pick.size(); ++r) {
    while (pick[r] >= base + static_cast<std::size_t>(stores[store].size())) {
      base += static_cast<std::size_t>(stores[store].size());
      ++store;
    }
    auto local = static_cast<Eigen::Index>(pick[r] - base);
    out.rows.row(static_cast<Eigen::Index>(r)) = stores[store].rows.row(local);
    out.ids.push_back(stores[store].ids[static_cast<std::size_t>(local)]);
  }
  return out;
}

std::vector<std::pair<std::string, Matrix>> group_descriptors(const FeatureMatrix& descriptors) {
  std::vector<std::pair<std::string, std::vector<Eigen::Index>>> groups;
  std::map<std::string, std::size_t> where;
  for (Eigen::Index i = 0; i < descriptors.size(); ++i) {
    const std::string& id = descriptors.ids[static_cast<std::size_t>(i)];
    auto hash = id.rfind('#');
    if (hash == std::string::npos || hash == 0)
      fail(ErrorCode::InvalidInput, "descriptor id '" + id + "' is not of the form <image_id>#<index>");
    std::string image = id.substr(0, hash);
    auto [it, fresh] = where.emplace(image, groups.size());
    if (fresh) groups.push_back({image, {}});
    groups[it->second].second.push_back(i);
  }
  std::vector<std::pair<std::string, Matrix>> out;
  out.reserve(groups.size());
  for (auto& [image, rows] : groups) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), descriptors.dim());
    for (std::size_t r = 0; r < rows.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = descriptors.rows.row(rows[r]);
    out.emplace_back(image, std::move(m));
  }
  return out;
}

}  // namespace eraloc
