#include "eraloc/encode.hpp"
#include "eraloc/retrieve.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace eraloc {

struct RetrievalIndex::RawData {
  Eigen::Index n = 0, dim = 0;
  std::vector<float> rows;  // row-major, L2-normalized
  std::vector<std::string> ids;
  std::unordered_map<std::string, Eigen::Index> by_id;
  std::vector<std::uint32_t> id_rank;  // position of each id in sorted id order
  std::optional<std::vector<std::string>> labels;
  std::vector<std::uint8_t> distractor;
};

struct RetrievalIndex::AdaptedData {
  std::shared_ptr<const AdaptedSpace> space;
  Eigen::Index dim = 0;
  std::vector<float> rows;
};

std::shared_ptr<const AdaptedSpace> make_adapted_space(SaModel model, const Vector& eigenvalues) {
  if (eigenvalues.size() != model.d_target())
    fail(ErrorCode::InvalidInput, "whitening eigenvalues do not match the target dimension");
  auto s = std::make_shared<AdaptedSpace>();
  s->scale = whitening_scale(eigenvalues);
  s->eigenvalues = eigenvalues;
  s->model = std::move(model);
  return s;
}

namespace {
std::vector<float> to_float_normalized(const Vector& v) {
  Vector u = l2_normalized(v);
  std::vector<float> out(static_cast<std::size_t>(u.size()));
  for (Eigen::Index i = 0; i < u.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(u(i));
  return out;
}
}  // namespace

RetrievalIndex RetrievalIndex::build(const FeatureMatrix& store) {
  if (store.size() == 0) fail(ErrorCode::InvalidInput, "cannot index an empty store");
  store.validate();
  auto raw = std::make_shared<RawData>();
  raw->n = store.size();
  raw->dim = store.dim();
  raw->rows.resize(static_cast<std::size_t>(raw->n * raw->dim));
  for (Eigen::Index i = 0; i < raw->n; ++i) {
    auto f = to_float_normalized(store.rows.row(i).transpose());
    std::copy(f.begin(), f.end(), raw->rows.begin() + i * raw->dim);
  }
  raw->ids = store.ids;
  raw->by_id.reserve(raw->ids.size());
  for (Eigen::Index i = 0; i < raw->n; ++i) raw->by_id.emplace(raw->ids[static_cast<std::size_t>(i)], i);
  std::vector<std::uint32_t> order(raw->ids.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return raw->ids[a] < raw->ids[b]; });
  raw->id_rank.resize(order.size());
  for (std::uint32_t r = 0; r < order.size(); ++r) raw->id_rank[order[r]] = r;
  raw->labels = store.labels;
  raw->distractor = store.distractor;
  RetrievalIndex idx;
  idx.raw_ = std::move(raw);
  return idx;
}

Eigen::Index RetrievalIndex::size() const { return raw_->n; }
Eigen::Index RetrievalIndex::raw_dim() const { return raw_->dim; }
Eigen::Index RetrievalIndex::dim() const { return adapted_ ? adapted_->dim : raw_->dim; }
const std::string& RetrievalIndex::id(Eigen::Index row) const { return raw_->ids.at(static_cast<std::size_t>(row)); }
const std::optional<std::vector<std::string>>& RetrievalIndex::labels() const { return raw_->labels; }
bool RetrievalIndex::is_distractor(Eigen::Index row) const {
  return !raw_->distractor.empty() && raw_->distractor[static_cast<std::size_t>(row)] != 0;
}

std::optional<Eigen::Index> RetrievalIndex::find(const std::string& id) const {
  auto it = raw_->by_id.find(id);
  if (it == raw_->by_id.end()) return std::nullopt;
  return it->second;
}

Vector RetrievalIndex::raw_vector(Eigen::Index row) const {
  Vector v(raw_->dim);
  const float* p = raw_->rows.data() + row * raw_->dim;
  for (Eigen::Index j = 0; j < raw_->dim; ++j) v(j) = p[j];
  return v;
}

const std::shared_ptr<const AdaptedSpace>& RetrievalIndex::space() const {
  static const std::shared_ptr<const AdaptedSpace> none;
  return adapted_ ? adapted_->space : none;
}

std::vector<float> RetrievalIndex::map_archive_row(Eigen::Index row) const {
  const AdaptedSpace& s = *adapted_->space;
  Vector a = map_source(s.model, raw_vector(row)).cwiseProduct(s.scale);
  return to_float_normalized(a);
}

RetrievalIndex RetrievalIndex::adapted(std::shared_ptr<const AdaptedSpace> space) const {
  if (!space) fail(ErrorCode::MissingModel, "adapted index needs a model");
  if (space->model.ambient() != raw_->dim) fail(ErrorCode::InvalidInput, "model dimension does not match archive");
  RetrievalIndex idx;
  idx.raw_ = raw_;
  auto ad = std::make_shared<AdaptedData>();
  ad->space = std::move(space);
  ad->dim = ad->space->model.d_target();
  idx.adapted_ = ad;
  ad->rows.resize(static_cast<std::size_t>(raw_->n * ad->dim));
  for (Eigen::Index i = 0; i < raw_->n; ++i) {
    auto f = idx.map_archive_row(i);
    std::copy(f.begin(), f.end(), ad->rows.begin() + i * ad->dim);
  }
  return idx;
}

std::vector<float> RetrievalIndex::prepare(const Vector& q) const {
  if (q.size() != raw_->dim)
    fail(ErrorCode::InvalidInput, "query dimension " + std::to_string(q.size()) + " does not match archive dimension " +
                                      std::to_string(raw_->dim));
  auto f = to_float_normalized(q);
  if (!adapted_) return f;
  Vector qn(raw_->dim);
  for (Eigen::Index j = 0; j < raw_->dim; ++j) qn(j) = f[static_cast<std::size_t>(j)];
  const AdaptedSpace& s = *adapted_->space;
  return to_float_normalized(map_target(s.model, qn).cwiseProduct(s.scale));
}

std::vector<double> RetrievalIndex::scores(const Vector& q, bool lazy) const {
  std::vector<float> p = prepare(q);
  const Eigen::Index d = dim();
  const float* table = adapted_ ? adapted_->rows.data() : raw_->rows.data();
  std::vector<double> s(static_cast<std::size_t>(raw_->n));
  std::vector<float> lazy_row;
  for (Eigen::Index i = 0; i < raw_->n; ++i) {
    const float* a = table + i * d;
    if (lazy && adapted_) {
      lazy_row = map_archive_row(i);
      a = lazy_row.data();
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      double diff = static_cast<double>(a[j]) - static_cast<double>(p[static_cast<std::size_t>(j)]);
      acc += diff * diff;
    }
    s[static_cast<std::size_t>(i)] = std::sqrt(acc);
  }
  return s;
}

std::vector<Hit> RetrievalIndex::top(const std::vector<double>& s, std::size_t k) const {
  k = std::min<std::size_t>(k, s.size());
  std::vector<Eigen::Index> order(s.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
    return s[ua] < s[ub] || (s[ua] == s[ub] && raw_->id_rank[ua] < raw_->id_rank[ub]);
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), less);
  std::vector<Hit> hits;
  hits.reserve(k);
  for (std::size_t r = 0; r < k; ++r) hits.push_back({raw_->ids[static_cast<std::size_t>(order[r])], order[r], s[static_cast<std::size_t>(order[r])]});
  return hits;
}

std::vector<Hit> RetrievalIndex::query(const Vector& q, std::size_t k, bool lazy) const { return top(scores(q, lazy), k); }

std::vector<Eigen::Index> RetrievalIndex::rank_all(const Vector& q) const {
  auto s = scores(q);
  std::vector<Eigen::Index> order(s.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
    return s[ua] < s[ub] || (s[ua] == s[ub] && raw_->id_rank[ua] < raw_->id_rank[ub]);
  });
  return order;
}

std::size_t RetrievalIndex::adapted_bytes() const {
  if (!adapted_) return 0;
  const auto& m = adapted_->space->model;
  std::size_t model = static_cast<std::size_t>(m.m.size() + m.x_a.size() + m.source.basis.size() + m.target.basis.size() +
                                               m.source.mean.size() + m.target.mean.size() + 3 * m.d_target()) *
                      sizeof(double);
  return adapted_->rows.size() * sizeof(float) + model;
}

std::size_t RetrievalIndex::raw_bytes() const { return raw_->rows.size() * sizeof(float); }

}  // namespace eraloc
