#pragma once

// Extremely randomized trees.
//
// A single multi-output core serves both tasks: regression grows on a scalar
// target (split score = variance reduction), classification on one-hot class
// indicators (the same score then equals the Gini decrease). Leaves store the
// mean output row, so classifier leaves hold class frequencies.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace gadm::ml {

class EmptyTrainingSet : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class FeatureArityMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows(rows), cols(cols), data(rows * cols, 0.0) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  /// Appends a row; the first row fixes the column count.
  void push_row(std::span<const double> values);
};

struct ForestConfig {
  std::size_t trees = 100;
  std::size_t k_features = 0;  // 0 selects round(sqrt(d))
  std::size_t n_min = 5;       // nodes with fewer samples become leaves
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t resolved_k(std::size_t n_features) const;
};

class ExtraTrees {
 public:
  ExtraTrees() = default;

  /// Tree t is grown on the full sample set from RandomStream(derive_seed(seed, t)).
  static ExtraTrees fit(const Matrix& x, const Matrix& y, const ForestConfig& cfg);

  std::size_t n_features() const noexcept { return n_features_; }
  std::size_t n_outputs() const noexcept { return n_outputs_; }
  std::size_t tree_count() const noexcept { return roots_.size(); }

  /// Ensemble mean of the leaf rows reached by x.
  void predict(std::span<const double> x, std::span<double> out) const;
  double predict_scalar(std::span<const double> x) const;

  void write(std::ostream& out) const;
  static ExtraTrees read(std::istream& in);

 private:
  struct Node {
    double threshold = 0.0;
    std::int32_t feature = -1;  // -1 marks a leaf
    std::uint32_t index = 0;    // leaf: offset into leaf_values_; split: left child (right is index + 1)
  };

  std::size_t n_features_ = 0;
  std::size_t n_outputs_ = 0;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> roots_;
  std::vector<double> leaf_values_;

  friend class TreeBuilder;
};

class ExtraTreesRegressor {
 public:
  ExtraTreesRegressor() = default;
  static ExtraTreesRegressor fit(const Matrix& x, std::span<const double> y, const ForestConfig& cfg);

  double predict(std::span<const double> x) const { return forest_.predict_scalar(x); }
  std::size_t n_features() const noexcept { return forest_.n_features(); }
  const ExtraTrees& forest() const noexcept { return forest_; }

  void write(std::ostream& out) const { forest_.write(out); }
  static ExtraTreesRegressor read(std::istream& in);

 private:
  ExtraTrees forest_;
};

class ExtraTreesClassifier {
 public:
  ExtraTreesClassifier() = default;
  static ExtraTreesClassifier fit(const Matrix& x, std::span<const std::size_t> labels, std::size_t n_classes,
                                  const ForestConfig& cfg);

  /// Class probabilities; non-negative and summing to 1.
  std::vector<double> predict_proba(std::span<const double> x) const;
  void predict_proba(std::span<const double> x, std::span<double> out) const { forest_.predict(x, out); }
  /// Most probable class; ties go to the lowest index.
  std::size_t predict(std::span<const double> x) const;

  std::size_t n_classes() const noexcept { return forest_.n_outputs(); }
  std::size_t n_features() const noexcept { return forest_.n_features(); }

  void write(std::ostream& out) const { forest_.write(out); }
  static ExtraTreesClassifier read(std::istream& in);

 private:
  ExtraTrees forest_;
};

}  // namespace gadm::ml
