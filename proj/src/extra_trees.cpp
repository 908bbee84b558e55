#include "gadm/extra_trees.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "gadm/parallel.hpp"
#include "gadm/random.hpp"

namespace gadm::ml {

void Matrix::push_row(std::span<const double> values)
{
  if (rows == 0 && data.empty()) {
    cols = values.size();
  } else if (values.size() != cols) {
    throw FeatureArityMismatch("row has " + std::to_string(values.size()) + " columns, expected " +
                               std::to_string(cols));
  }
  data.insert(data.end(), values.begin(), values.end());
  ++rows;
}

void ForestConfig::validate() const
{
  if (trees == 0) throw std::invalid_argument("forest needs at least one tree");
  if (n_min == 0) throw std::invalid_argument("n_min must be at least 1");
}

std::size_t ForestConfig::resolved_k(std::size_t n_features) const
{
  if (k_features > 0) return k_features;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n_features)))));
}

class TreeBuilder {
 public:
  struct GrownTree {
    std::vector<ExtraTrees::Node> nodes;
    std::vector<double> leaves;
  };

  TreeBuilder(const Matrix& x, const Matrix& y, std::size_t k, std::size_t n_min, RandomStream& rng)
      : x_(x), y_(y), k_(k), n_min_(n_min), rng_(rng), sum_left_(y.cols), sum_right_(y.cols)
  {
  }

  GrownTree grow()
  {
    GrownTree tree;
    std::vector<std::size_t> idx(x_.rows);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    struct Pending {
      std::uint32_t node;
      std::size_t begin;
      std::size_t end;
    };
    std::vector<Pending> stack{{0, 0, idx.size()}};
    tree.nodes.emplace_back();

    std::vector<std::size_t> candidates;
    std::vector<double> lo(x_.cols);
    std::vector<double> hi(x_.cols);

    while (!stack.empty()) {
      const Pending p = stack.back();
      stack.pop_back();
      const std::size_t n = p.end - p.begin;
      const std::size_t* first = idx.data() + p.begin;

      if (n < n_min_ || constant_outputs(first, n)) {
        make_leaf(tree, p.node, first, n);
        continue;
      }

      std::fill(lo.begin(), lo.end(), std::numeric_limits<double>::infinity());
      std::fill(hi.begin(), hi.end(), -std::numeric_limits<double>::infinity());
      for (std::size_t r = 0; r < n; ++r) {
        const auto row = x_.row(first[r]);
        for (std::size_t f = 0; f < x_.cols; ++f) {
          lo[f] = std::min(lo[f], row[f]);
          hi[f] = std::max(hi[f], row[f]);
        }
      }
      candidates.clear();
      for (std::size_t f = 0; f < x_.cols; ++f) {
        if (lo[f] < hi[f]) candidates.push_back(f);
      }
      if (candidates.empty()) {
        make_leaf(tree, p.node, first, n);
        continue;
      }

      const std::size_t k = std::min(k_, candidates.size());
      double best_score = -std::numeric_limits<double>::infinity();
      std::size_t best_feature = 0;
      double best_threshold = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        std::swap(candidates[c], candidates[c + rng_.index(candidates.size() - c)]);
        const std::size_t f = candidates[c];
        double t = lo[f];
        while (!(t > lo[f])) t = lo[f] + rng_.uniform() * (hi[f] - lo[f]);
        const double score = split_score(first, n, f, t);
        if (score > best_score) {
          best_score = score;
          best_feature = f;
          best_threshold = t;
        }
      }

      auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(p.begin),
                                idx.begin() + static_cast<std::ptrdiff_t>(p.end),
                                [&](std::size_t i) { return x_.at(i, best_feature) < best_threshold; });
      const std::size_t split = static_cast<std::size_t>(mid - idx.begin());
      const auto left = static_cast<std::uint32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[p.node];
      node.feature = static_cast<std::int32_t>(best_feature);
      node.threshold = best_threshold;
      node.index = left;
      stack.push_back({left + 1, split, p.end});
      stack.push_back({left, p.begin, split});
    }
    return tree;
  }

 private:
  bool constant_outputs(const std::size_t* first, std::size_t n) const
  {
    const auto ref = y_.row(first[0]);
    for (std::size_t r = 1; r < n; ++r) {
      const auto row = y_.row(first[r]);
      if (!std::equal(ref.begin(), ref.end(), row.begin())) return false;
    }
    return true;
  }

  // sum_j (L_j^2 / n_L + R_j^2 / n_R): the parent term is constant, so
  // maximizing this maximizes the variance (or Gini) reduction.
  double split_score(const std::size_t* first, std::size_t n, std::size_t f, double t)
  {
    std::fill(sum_left_.begin(), sum_left_.end(), 0.0);
    std::fill(sum_right_.begin(), sum_right_.end(), 0.0);
    double n_left = 0.0;
    double n_right = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t i = first[r];
      const auto out = y_.row(i);
      if (x_.at(i, f) < t) {
        n_left += 1.0;
        for (std::size_t j = 0; j < out.size(); ++j) sum_left_[j] += out[j];
      } else {
        n_right += 1.0;
        for (std::size_t j = 0; j < out.size(); ++j) sum_right_[j] += out[j];
      }
    }
    double score = 0.0;
    for (std::size_t j = 0; j < sum_left_.size(); ++j) {
      score += sum_left_[j] * sum_left_[j] / n_left + sum_right_[j] * sum_right_[j] / n_right;
    }
    return score;
  }

  void make_leaf(GrownTree& tree, std::uint32_t node, const std::size_t* first, std::size_t n) const
  {
    const std::size_t offset = tree.leaves.size();
    tree.leaves.resize(offset + y_.cols, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = y_.row(first[r]);
      for (std::size_t j = 0; j < y_.cols; ++j) tree.leaves[offset + j] += row[j];
    }
    for (std::size_t j = 0; j < y_.cols; ++j) tree.leaves[offset + j] /= static_cast<double>(n);
    tree.nodes[node].feature = -1;
    tree.nodes[node].index = static_cast<std::uint32_t>(offset);
  }

  const Matrix& x_;
  const Matrix& y_;
  std::size_t k_;
  std::size_t n_min_;
  RandomStream& rng_;
  std::vector<double> sum_left_;
  std::vector<double> sum_right_;
};

ExtraTrees ExtraTrees::fit(const Matrix& x, const Matrix& y, const ForestConfig& cfg)
{
  cfg.validate();
  if (x.rows == 0) throw EmptyTrainingSet("cannot fit a forest on zero samples");
  if (y.rows != x.rows) {
    throw std::invalid_argument("feature and target row counts differ");
  }
  if (y.cols == 0) throw std::invalid_argument("targets have no columns");

  std::vector<TreeBuilder::GrownTree> grown(cfg.trees);
  const std::size_t k = cfg.resolved_k(x.cols);
  parallel_for(cfg.trees, [&](std::size_t t) {
    RandomStream rng(derive_seed(cfg.seed, t));
    grown[t] = TreeBuilder(x, y, k, cfg.n_min, rng).grow();
  });

  ExtraTrees forest;
  forest.n_features_ = x.cols;
  forest.n_outputs_ = y.cols;
  for (auto& tree : grown) {
    const auto node_base = static_cast<std::uint32_t>(forest.nodes_.size());
    const auto leaf_base = static_cast<std::uint32_t>(forest.leaf_values_.size());
    forest.roots_.push_back(node_base);
    for (Node node : tree.nodes) {
      node.index += node.feature < 0 ? leaf_base : node_base;
      forest.nodes_.push_back(node);
    }
    forest.leaf_values_.insert(forest.leaf_values_.end(), tree.leaves.begin(), tree.leaves.end());
  }
  return forest;
}

void ExtraTrees::predict(std::span<const double> x, std::span<double> out) const
{
  if (x.size() != n_features_) {
    throw FeatureArityMismatch("input has " + std::to_string(x.size()) + " features, forest expects " +
                               std::to_string(n_features_));
  }
  if (out.size() != n_outputs_) throw std::invalid_argument("output buffer has the wrong size");
  std::fill(out.begin(), out.end(), 0.0);
  for (const std::uint32_t root : roots_) {
    const Node* node = &nodes_[root];
    while (node->feature >= 0) {
      node = &nodes_[x[static_cast<std::size_t>(node->feature)] < node->threshold ? node->index : node->index + 1];
    }
    const double* leaf = leaf_values_.data() + node->index;
    for (std::size_t j = 0; j < n_outputs_; ++j) out[j] += leaf[j];
  }
  const double scale = 1.0 / static_cast<double>(roots_.size());
  for (auto& v : out) v *= scale;
}

double ExtraTrees::predict_scalar(std::span<const double> x) const
{
  if (n_outputs_ != 1) throw std::logic_error("predict_scalar on a multi-output forest");
  double out = 0.0;
  predict(x, {&out, 1});
  return out;
}

namespace {

constexpr char kMagic[8] = {'G', 'A', 'D', 'M', 'E', 'T', '0', '1'};

template <class T>
void put(std::ostream& out, const T& v)
{
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in)
{
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("truncated forest data");
  return v;
}

}  // namespace

void ExtraTrees::write(std::ostream& out) const
{
  out.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(out, n_features_);
  put<std::uint64_t>(out, n_outputs_);
  put<std::uint64_t>(out, roots_.size());
  for (auto r : roots_) put(out, r);
  put<std::uint64_t>(out, nodes_.size());
  for (const auto& n : nodes_) {
    put(out, n.threshold);
    put(out, n.feature);
    put(out, n.index);
  }
  put<std::uint64_t>(out, leaf_values_.size());
  for (double v : leaf_values_) put(out, v);
}

ExtraTrees ExtraTrees::read(std::istream& in)
{
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("not a serialized forest");
  }
  ExtraTrees f;
  f.n_features_ = get<std::uint64_t>(in);
  f.n_outputs_ = get<std::uint64_t>(in);
  f.roots_.resize(get<std::uint64_t>(in));
  for (auto& r : f.roots_) r = get<std::uint32_t>(in);
  f.nodes_.resize(get<std::uint64_t>(in));
  for (auto& n : f.nodes_) {
    n.threshold = get<double>(in);
    n.feature = get<std::int32_t>(in);
    n.index = get<std::uint32_t>(in);
  }
  f.leaf_values_.resize(get<std::uint64_t>(in));
  for (auto& v : f.leaf_values_) v = get<double>(in);

  for (auto r : f.roots_) {
    if (r >= f.nodes_.size()) throw std::runtime_error("corrupt forest: root out of range");
  }
  for (const auto& n : f.nodes_) {
    const bool ok = n.feature < 0 ? n.index + f.n_outputs_ <= f.leaf_values_.size()
                                  : static_cast<std::size_t>(n.feature) < f.n_features_ && n.index + 1 < f.nodes_.size();
    if (!ok) throw std::runtime_error("corrupt forest: node out of range");
  }
  return f;
}

ExtraTreesRegressor ExtraTreesRegressor::fit(const Matrix& x, std::span<const double> y, const ForestConfig& cfg)
{
  if (y.size() != x.rows) throw std::invalid_argument("feature and target row counts differ");
  Matrix targets(y.size(), 1);
  std::copy(y.begin(), y.end(), targets.data.begin());
  ExtraTreesRegressor r;
  r.forest_ = ExtraTrees::fit(x, targets, cfg);
  return r;
}

ExtraTreesRegressor ExtraTreesRegressor::read(std::istream& in)
{
  ExtraTreesRegressor r;
  r.forest_ = ExtraTrees::read(in);
  if (r.forest_.n_outputs() != 1) throw std::runtime_error("serialized forest is not a regressor");
  return r;
}

ExtraTreesClassifier ExtraTreesClassifier::fit(const Matrix& x, std::span<const std::size_t> labels,
                                               std::size_t n_classes, const ForestConfig& cfg)
{
  if (labels.size() != x.rows) throw std::invalid_argument("feature and label row counts differ");
  if (n_classes == 0) throw std::invalid_argument("classifier needs at least one class");
  Matrix onehot(labels.size(), n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes) throw std::invalid_argument("class label out of range");
    onehot.at(i, labels[i]) = 1.0;
  }
  ExtraTreesClassifier c;
  c.forest_ = ExtraTrees::fit(x, onehot, cfg);
  return c;
}

std::vector<double> ExtraTreesClassifier::predict_proba(std::span<const double> x) const
{
  std::vector<double> p(forest_.n_outputs());
  forest_.predict(x, p);
  return p;
}

std::size_t ExtraTreesClassifier::predict(std::span<const double> x) const
{
  const auto p = predict_proba(x);
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

ExtraTreesClassifier ExtraTreesClassifier::read(std::istream& in)
{
  ExtraTreesClassifier c;
  c.forest_ = ExtraTrees::read(in);
  return c;
}

}  // namespace gadm::ml
