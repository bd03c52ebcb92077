#include "eraloc/encode.hpp"
#include "eraloc/rng.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

namespace eraloc {

struct KdForest::Impl {
  struct Node {
    int dim = -1;  // -1 for leaves
    double split = 0.0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range into `order`
  };
  struct Tree {
    std::vector<Node> nodes;
    std::vector<int> order;
  };

  Matrix pts;  // d x n, one point per column
  std::vector<Tree> trees;

  int build(Tree& t, int begin, int end, Rng& rng) {
    int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    if (end - begin <= 1) {
      t.nodes[static_cast<std::size_t>(id)].begin = begin;
      t.nodes[static_cast<std::size_t>(id)].end = end;
      return id;
    }
    const Eigen::Index d = pts.rows();
    // mean and variance over at most 100 members
    int m = std::min(end - begin, 100);
    Vector mean = Vector::Zero(d), sq = Vector::Zero(d);
    for (int i = 0; i < m; ++i) {
      auto c = pts.col(t.order[static_cast<std::size_t>(begin + i)]);
      mean += c;
      sq += c.cwiseProduct(c);
    }
    mean /= m;
    Vector var = sq / m - mean.cwiseProduct(mean);
    std::vector<int> dims(static_cast<std::size_t>(d));
    std::iota(dims.begin(), dims.end(), 0);
    int top = static_cast<int>(std::min<Eigen::Index>(5, d));
    std::partial_sort(dims.begin(), dims.begin() + top, dims.end(),
                      [&](int a, int b) { return var(a) > var(b) || (var(a) == var(b) && a < b); });
    int dim = dims[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(top)))];
    double split = mean(dim);

    auto first = t.order.begin() + begin, last = t.order.begin() + end;
    auto mid = std::partition(first, last, [&](int i) { return pts(dim, i) < split; });
    if (mid == first || mid == last) {
      // fall back to a median split; identical coordinates become one bucket
      std::sort(first, last, [&](int a, int b) { return pts(dim, a) < pts(dim, b) || (pts(dim, a) == pts(dim, b) && a < b); });
      mid = first + (end - begin) / 2;
      split = pts(dim, *mid);
      mid = std::partition(first, last, [&](int i) { return pts(dim, i) < split; });
      if (mid == first || mid == last) {
        t.nodes[static_cast<std::size_t>(id)].begin = begin;
        t.nodes[static_cast<std::size_t>(id)].end = end;
        return id;
      }
    }
    int cut = static_cast<int>(mid - t.order.begin());
    int l = build(t, begin, cut, rng);
    int r = build(t, cut, end, rng);
    Node& node = t.nodes[static_cast<std::size_t>(id)];
    node.dim = dim;
    node.split = split;
    node.left = l;
    node.right = r;
    return id;
  }
};

KdForest::KdForest(const Matrix& points, int trees, std::uint64_t seed) : impl_(std::make_unique<Impl>()) {
  if (points.rows() < 1) fail(ErrorCode::InvalidInput, "kd-forest needs at least one point");
  impl_->pts = points.transpose();
  Rng rng(seed);
  const int n = static_cast<int>(points.rows());
  for (int t = 0; t < std::max(1, trees); ++t) {
    Impl::Tree tree;
    tree.order.resize(static_cast<std::size_t>(n));
    std::iota(tree.order.begin(), tree.order.end(), 0);
    impl_->build(tree, 0, n, rng);
    impl_->trees.push_back(std::move(tree));
  }
}

KdForest::~KdForest() = default;
KdForest::KdForest(KdForest&&) noexcept = default;
KdForest& KdForest::operator=(KdForest&&) noexcept = default;

Eigen::Index KdForest::nearest(const Eigen::Ref<const Vector>& q, int checks) const {
  const Impl& im = *impl_;
  const auto n = static_cast<std::size_t>(im.pts.cols());
  if (q.size() != im.pts.rows()) fail(ErrorCode::InvalidInput, "query dimension mismatch");

  thread_local std::vector<std::uint32_t> stamp;
  thread_local std::uint32_t generation = 0;
  if (stamp.size() < n) stamp.assign(n, 0);
  if (++generation == 0) {
    std::fill(stamp.begin(), stamp.end(), 0);
    generation = 1;
  }

  using Entry = std::pair<double, std::pair<int, int>>;  // bound, (tree, node)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  double best = std::numeric_limits<double>::infinity();
  Eigen::Index best_i = -1;
  int checked = 0;
  const int limit = std::max(1, checks);

  auto descend = [&](int ti, int node) {
    const Impl::Tree& t = im.trees[static_cast<std::size_t>(ti)];
    while (t.nodes[static_cast<std::size_t>(node)].dim >= 0) {
      const Impl::Node& nd = t.nodes[static_cast<std::size_t>(node)];
      double diff = q(nd.dim) - nd.split;
      int near = diff < 0 ? nd.left : nd.right;
      int far = diff < 0 ? nd.right : nd.left;
      heap.push({diff * diff, {ti, far}});
      node = near;
    }
    const Impl::Node& leaf = t.nodes[static_cast<std::size_t>(node)];
    for (int k = leaf.begin; k < leaf.end; ++k) {
      int i = t.order[static_cast<std::size_t>(k)];
      auto ui = static_cast<std::size_t>(i);
      if (stamp[ui] == generation) continue;
      stamp[ui] = generation;
      ++checked;
      double d = (im.pts.col(i) - q).squaredNorm();
      if (d < best || (d == best && i < best_i)) {
        best = d;
        best_i = i;
      }
    }
  };

  for (int ti = 0; ti < static_cast<int>(im.trees.size()); ++ti) descend(ti, 0);
  while (!heap.empty() && checked < limit) {
    auto [bound, where] = heap.top();
    heap.pop();
    if (bound > best) continue;
    descend(where.first, where.second);
  }
  return best_i;
}

}  // namespace eraloc
