#include "sgdgp/sampling.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace sgdgp {

const char* to_string(SamplingScheme scheme) {
  return scheme == SamplingScheme::Uniform ? "uniform" : "nearby";
}

SamplingScheme sampling_scheme_from_string(const std::string& name) {
  if (name == "uniform") return SamplingScheme::Uniform;
  if (name == "nearby" || name == "nn") return SamplingScheme::Nearby;
  throw std::invalid_argument("unknown sampling scheme '" + name + "' (expected uniform or nearby)");
}

KdTree::KdTree(const MatrixXd& X, Index leaf_size)
    : n_(X.rows()), dim_(X.cols()), leaf_size_(std::max<Index>(1, leaf_size)) {
  if (n_ < 1) throw std::invalid_argument("KdTree needs at least one point");
  if (!X.allFinite()) throw std::invalid_argument("KdTree input contains non-finite coordinates");
  points_.resize(static_cast<std::size_t>(n_ * dim_));
  for (Index i = 0; i < n_; ++i)
    for (Index j = 0; j < dim_; ++j) points_[static_cast<std::size_t>(i * dim_ + j)] = X(i, j);
  order_.resize(static_cast<std::size_t>(n_));
  std::iota(order_.begin(), order_.end(), Index{0});
  nodes_.reserve(static_cast<std::size_t>(2 * n_ / leaf_size_ + 2));
  build(0, n_);
}

Index KdTree::build(Index begin, Index end) {
  const Index id = static_cast<Index>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return id;

  Index best_dim = 0;
  double best_spread = -1.0;
  for (Index j = 0; j < dim_; ++j) {
    double lo = points_[static_cast<std::size_t>(order_[begin] * dim_ + j)];
    double hi = lo;
    for (Index i = begin + 1; i < end; ++i) {
      const double v = points_[static_cast<std::size_t>(order_[i] * dim_ + j)];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = j;
    }
  }
  if (best_spread <= 0.0) return id;  // all points coincide

  const Index mid = begin + (end - begin) / 2;
  auto coord = [&](Index row) { return points_[static_cast<std::size_t>(row * dim_ + best_dim)]; };
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](Index a, Index b) {
    const double ca = coord(a);
    const double cb = coord(b);
    return ca < cb || (ca == cb && a < b);
  });
  const double split = coord(order_[mid]);
  const Index left = build(begin, mid);
  const Index right = build(mid, end);
  Node& node = nodes_[static_cast<std::size_t>(id)];
  node.split_dim = best_dim;
  node.split_value = split;
  node.left = left;
  node.right = right;
  return id;
}

double KdTree::dist2(const double* q, Index row) const {
  const double* p = &points_[static_cast<std::size_t>(row * dim_)];
  double s = 0.0;
  for (Index j = 0; j < dim_; ++j) {
    const double d = q[j] - p[j];
    s += d * d;
  }
  return s;
}

void KdTree::search(Index node_id, const double* q, Index k, std::optional<Index> exclude,
                    std::vector<Candidate>& heap) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.split_dim < 0) {
    for (Index i = node.begin; i < node.end; ++i) {
      const Index row = order_[static_cast<std::size_t>(i)];
      if (exclude && row == *exclude) continue;
      const Candidate c{dist2(q, row), row};
      if (static_cast<Index>(heap.size()) < k) {
        heap.push_back(c);
        std::push_heap(heap.begin(), heap.end());
      } else if (c < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = c;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  const double diff = q[node.split_dim] - node.split_value;
  const Index near = diff < 0.0 ? node.left : node.right;
  const Index far = diff < 0.0 ? node.right : node.left;
  search(near, q, k, exclude, heap);
  if (static_cast<Index>(heap.size()) < k || diff * diff <= heap.front().dist2) search(far, q, k, exclude, heap);
}

std::vector<Index> KdTree::query(const double* point, Index k, std::optional<Index> exclude) const {
  const Index available = n_ - ((exclude && *exclude >= 0 && *exclude < n_) ? 1 : 0);
  if (k < 0 || k > available)
    throw std::invalid_argument("KdTree::query: k=" + std::to_string(k) + " exceeds " + std::to_string(available) +
                                " available points");
  std::vector<Index> out;
  if (k == 0) return out;
  std::vector<Candidate> heap;
  heap.reserve(static_cast<std::size_t>(k));
  search(0, point, k, exclude, heap);
  std::sort_heap(heap.begin(), heap.end());
  out.reserve(heap.size());
  for (const auto& c : heap) out.push_back(c.index);
  return out;
}

std::vector<Index> KdTree::query(const VectorXd& point, Index k, std::optional<Index> exclude) const {
  if (point.size() != dim_) throw std::invalid_argument("KdTree::query: point dimension mismatch");
  return query(point.data(), k, exclude);
}

std::vector<Index> KdTree::neighbors_of(Index row, Index k) const {
  if (row < 0 || row >= n_) throw std::out_of_range("KdTree::neighbors_of: row out of range");
  return query(&points_[static_cast<std::size_t>(row * dim_)], k, row);
}

std::vector<Index> brute_force_knn(const MatrixXd& X, const double* point, Index k, std::optional<Index> exclude) {
  std::vector<std::pair<double, Index>> all;
  all.reserve(static_cast<std::size_t>(X.rows()));
  for (Index i = 0; i < X.rows(); ++i) {
    if (exclude && i == *exclude) continue;
    double s = 0.0;
    for (Index j = 0; j < X.cols(); ++j) {
      const double d = point[j] - X(i, j);
      s += d * d;
    }
    all.emplace_back(s, i);
  }
  if (k > static_cast<Index>(all.size())) throw std::invalid_argument("brute_force_knn: k too large");
  std::partial_sort(all.begin(), all.begin() + k, all.end());
  std::vector<Index> out;
  for (Index i = 0; i < k; ++i) out.push_back(all[static_cast<std::size_t>(i)].second);
  return out;
}

Minibatch uniform_minibatch(Index n, Index m, CounterRng& rng) {
  if (m < 1 || m > n)
    throw std::invalid_argument("minibatch size m=" + std::to_string(m) + " must lie in [1, n=" + std::to_string(n) +
                                "]");
  Minibatch batch;
  batch.scheme = SamplingScheme::Uniform;
  batch.indices.reserve(static_cast<std::size_t>(m));
  if (m == n) {
    batch.indices.resize(static_cast<std::size_t>(n));
    std::iota(batch.indices.begin(), batch.indices.end(), Index{0});
    return batch;
  }
  std::unordered_set<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(2 * m));
  for (Index j = n - m; j < n; ++j) {
    const auto t = static_cast<Index>(rng.below(static_cast<std::uint64_t>(j + 1)));
    const Index pick = chosen.contains(t) ? j : t;
    chosen.insert(pick);
    batch.indices.push_back(pick);
  }
  std::sort(batch.indices.begin(), batch.indices.end());
  return batch;
}

Minibatch nearby_minibatch_at(const KdTree& index, Index center, Index m) {
  if (m < 1 || m > index.size())
    throw std::invalid_argument("minibatch size m=" + std::to_string(m) + " must lie in [1, n=" +
                                std::to_string(index.size()) + "]");
  Minibatch batch;
  batch.scheme = SamplingScheme::Nearby;
  batch.center = center;
  batch.indices.reserve(static_cast<std::size_t>(m));
  batch.indices.push_back(center);
  for (Index i : index.neighbors_of(center, m - 1)) batch.indices.push_back(i);
  return batch;
}

Minibatch nearby_minibatch(const KdTree& index, Index m, CounterRng& rng) {
  if (m < 1 || m > index.size())
    throw std::invalid_argument("minibatch size m=" + std::to_string(m) + " must lie in [1, n=" +
                                std::to_string(index.size()) + "]");
  const auto center = static_cast<Index>(rng.below(static_cast<std::uint64_t>(index.size())));
  return nearby_minibatch_at(index, center, m);
}

Minibatch draw_minibatch(SamplingScheme scheme, Index n, Index m, std::uint64_t seed, std::uint64_t k,
                         const KdTree* index) {
  CounterRng rng(derive_seed(seed, "minibatch", k));
  if (scheme == SamplingScheme::Uniform) return uniform_minibatch(n, m, rng);
  if (index == nullptr) throw std::invalid_argument("nearby sampling needs a spatial index");
  return nearby_minibatch(*index, m, rng);
}

} // namespace sgdgp
