#ifndef SGDGP_SAMPLING_HPP
#define SGDGP_SAMPLING_HPP

#include "sgdgp/random.hpp"
#include "sgdgp/types.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace sgdgp {

enum class SamplingScheme { Uniform, Nearby };

const char* to_string(SamplingScheme scheme);
SamplingScheme sampling_scheme_from_string(const std::string& name);

struct Minibatch {
  std::vector<Index> indices;
  SamplingScheme scheme = SamplingScheme::Uniform;
  std::optional<Index> center;

  Index size() const { return static_cast<Index>(indices.size()); }
};

/// Exact k-nearest-neighbor index over the rows of X (Euclidean). Splits on
/// the dimension of maximum spread at the median; ties in distance resolve to
/// the smaller row index. Immutable after construction.
class KdTree {
public:
  explicit KdTree(const MatrixXd& X, Index leaf_size = 8);

  Index size() const { return n_; }
  Index dim() const { return dim_; }

  /// k nearest rows to `point`, ordered by (distance, index). Rows equal to
  /// `exclude` are skipped.
  std::vector<Index> query(const double* point, Index k, std::optional<Index> exclude = std::nullopt) const;
  std::vector<Index> query(const VectorXd& point, Index k, std::optional<Index> exclude = std::nullopt) const;
  /// Neighbors of an indexed row, excluding the row itself.
  std::vector<Index> neighbors_of(Index row, Index k) const;

private:
  struct Node {
    Index begin = 0;
    Index end = 0;
    Index split_dim = -1;  // -1 marks a leaf
    double split_value = 0.0;
    Index left = -1;
    Index right = -1;
  };
  struct Candidate {
    double dist2;
    Index index;
    bool operator<(const Candidate& o) const { return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index); }
  };

  Index build(Index begin, Index end);
  void search(Index node, const double* q, Index k, std::optional<Index> exclude,
              std::vector<Candidate>& heap) const;
  double dist2(const double* q, Index row) const;

  Index n_;
  Index dim_;
  Index leaf_size_;
  std::vector<double> points_;  // row-major copy
  std::vector<Index> order_;
  std::vector<Node> nodes_;
};

/// Brute-force k-NN with the same (distance, index) ordering as KdTree.
std::vector<Index> brute_force_knn(const MatrixXd& X, const double* point, Index k,
                                   std::optional<Index> exclude = std::nullopt);

/// m distinct indices from [0, n), every subset equally likely (Floyd's
/// algorithm); returned in ascending order.
Minibatch uniform_minibatch(Index n, Index m, CounterRng& rng);

/// Uniformly drawn center followed by its m−1 nearest neighbors.
Minibatch nearby_minibatch(const KdTree& index, Index m, CounterRng& rng);
Minibatch nearby_minibatch_at(const KdTree& index, Index center, Index m);

/// Draw for iteration k of a run seeded with `seed`: a pure function of
/// (seed, k).
Minibatch draw_minibatch(SamplingScheme scheme, Index n, Index m, std::uint64_t seed, std::uint64_t k,
                         const KdTree* index);

} // namespace sgdgp

#endif // SGDGP_SAMPLING_HPP
