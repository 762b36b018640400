#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cvnn::nn {

/// Square count matrix; rows are ground truth, columns predictions.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}
  ConfusionMatrix(std::size_t classes, std::vector<std::uint64_t> counts);

  std::size_t classes() const noexcept { return classes_; }
  std::uint64_t operator()(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * classes_ + predicted];
  }
  void add(std::size_t truth, std::size_t predicted, std::uint64_t n = 1);
  void merge(const ConfusionMatrix& other);
  std::uint64_t total() const;
  std::uint64_t row_sum(std::size_t truth) const;
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

struct Metrics {
  double overall_accuracy = 0.0;
  double average_accuracy = 0.0;
  /// NaN for classes absent from the ground truth.
  std::vector<double> per_class;
};

/// OA = trace / total; per-class = diagonal / row sum; AA = mean of per-class
/// accuracies over classes with a nonzero row. Throws MetricError when the
/// matrix is all zero.
Metrics metrics(const ConfusionMatrix& confusion);

}  // namespace cvnn::nn
