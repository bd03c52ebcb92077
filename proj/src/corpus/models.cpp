#include "eraloc/corpus.hpp"

#include <cstring>

namespace eraloc {
namespace {

constexpr char kModelMagic[4] = {'E', 'R', 'L', 'M'};
constexpr std::uint32_t kModelVersion = 1;

class Writer {
 public:
  template <class T>
  void put(T v) {
    const char* p = reinterpret_cast<const char*>(&v);
    buf.insert(buf.end(), p, p + sizeof(T));
  }
  void matrix(const Matrix& m) {
    put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) put<double>(m(i, j));
  }
  void subspace(const Subspace& s) {
    matrix(s.mean);
    matrix(s.basis);
    matrix(s.eigenvalues);
  }
  std::vector<char> buf;
};

class Reader {
 public:
  explicit Reader(const std::vector<char>& b) : buf(b) {}
  template <class T>
  T get() {
    if (pos + sizeof(T) > buf.size()) fail(ErrorCode::CorruptStore, "model file truncated");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  Matrix matrix() {
    auto r = get<std::uint64_t>();
    auto c = get<std::uint64_t>();
    if (r != 0 && c > (buf.size() - pos) / sizeof(double) / r) fail(ErrorCode::CorruptStore, "model file truncated");
    Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get<double>();
    return m;
  }
  Vector vector() {
    Matrix m = matrix();
    if (m.cols() != 1) fail(ErrorCode::CorruptStore, "expected a column vector in model file");
    return m.col(0);
  }
  Subspace subspace() {
    Subspace s;
    s.mean = vector();
    s.basis = matrix();
    s.eigenvalues = vector();
    return s;
  }
  const std::vector<char>& buf;
  std::size_t pos = 0;
};

}  // namespace

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Codebook: return "codebook";
    case ModelKind::Gmm: return "gmm";
    case ModelKind::Sa: return "sa";
    case ModelKind::Gfk: return "gfk";
    case ModelKind::Subspace: return "subspace";
  }
  return "unknown";
}

ModelKind kind_of(const AnyModel& m) {
  switch (m.index()) {
    case 0: return ModelKind::Codebook;
    case 1: return ModelKind::Gmm;
    case 2: return ModelKind::Sa;
    case 3: return ModelKind::Gfk;
    default: return ModelKind::Subspace;
  }
}

std::vector<char> serialize_model(const AnyModel& model) {
  Writer w;
  w.buf.insert(w.buf.end(), kModelMagic, kModelMagic + 4);
  w.put<std::uint32_t>(kModelVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(kind_of(model)));
  if (auto* cb = std::get_if<Codebook>(&model)) {
    w.matrix(cb->centers);
  } else if (auto* g = std::get_if<GmmModel>(&model)) {
    w.matrix(g->weights);
    w.matrix(g->means);
    w.matrix(g->variances);
  } else if (auto* sa = std::get_if<SaModel>(&model)) {
    w.subspace(sa->source);
    w.subspace(sa->target);
    w.matrix(sa->m);
    w.matrix(sa->x_a);
  } else if (auto* gfk = std::get_if<GfkModel>(&model)) {
    w.put<std::uint64_t>(static_cast<std::uint64_t>(gfk->d));
    w.matrix(gfk->g);
    w.matrix(gfk->source_mean);
    w.matrix(gfk->target_mean);
  } else {
    w.subspace(std::get<Subspace>(model));
  }
  return w.buf;
}

AnyModel deserialize_model(const std::vector<char>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kModelMagic, 4) != 0)
    fail(ErrorCode::UnsupportedVersion, "not a model file (bad magic)");
  Reader r(bytes);
  r.pos = 4;
  auto version = r.get<std::uint32_t>();
  if (version != kModelVersion) fail(ErrorCode::UnsupportedVersion, "model version " + std::to_string(version) + " unsupported");
  auto kind = static_cast<ModelKind>(r.get<std::uint32_t>());
  AnyModel out;
  switch (kind) {
    case ModelKind::Codebook: {
      Codebook cb;
      cb.centers = r.matrix();
      out = cb;
      break;
    }
    case ModelKind::Gmm: {
      GmmModel g;
      g.weights = r.vector();
      g.means = r.matrix();
      g.variances = r.matrix();
      out = g;
      break;
    }
    case ModelKind::Sa: {
      SaModel sa;
      sa.source = r.subspace();
      sa.target = r.subspace();
      sa.m = r.matrix();
      sa.x_a = r.matrix();
      out = sa;
      break;
    }
    case ModelKind::Gfk: {
      GfkModel g;
      g.d = static_cast<int>(r.get<std::uint64_t>());
      g.g = r.matrix();
      g.source_mean = r.vector();
      g.target_mean = r.vector();
      out = g;
      break;
    }
    case ModelKind::Subspace:
      out = r.subspace();
      break;
    default:
      fail(ErrorCode::UnsupportedVersion, "unknown model kind " + std::to_string(static_cast<unsigned>(kind)));
  }
  if (r.pos != bytes.size()) fail(ErrorCode::CorruptStore, "trailing bytes in model file");
  return out;
}

void save_model(const std::string& path, const AnyModel& m) {
  auto b = serialize_model(m);
  write_file_atomic(path, std::string(b.begin(), b.end()));
}

AnyModel load_model(const std::string& path) {
  std::string s = read_file(path);
  return deserialize_model(std::vector<char>(s.begin(), s.end()));
}

std::uint64_t model_fingerprint(const AnyModel& m) {
  auto b = serialize_model(m);
  return fnv1a(b.data(), b.size());
}

}  // namespace eraloc
