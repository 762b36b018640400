#include "cvnn/nn/metrics.hpp"

#include <limits>
#include <numeric>

#include "cvnn/errors.hpp"

namespace cvnn::nn {

ConfusionMatrix::ConfusionMatrix(std::size_t classes, std::vector<std::uint64_t> counts)
    : classes_(classes), counts_(std::move(counts)) {
  if (counts_.size() != classes_ * classes_) {
    throw ContractError("confusion matrix needs " + std::to_string(classes_ * classes_) + " counts");
  }
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t n) {
  if (truth >= classes_ || predicted >= classes_) throw ContractError("confusion matrix index out of range");
  counts_[truth * classes_ + predicted] += n;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw ContractError("cannot merge confusion matrices of different sizes");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < classes_; ++p) s += (*this)(truth, p);
  return s;
}

Metrics metrics(const ConfusionMatrix& confusion) {
  const std::uint64_t total = confusion.total();
  if (total == 0) throw MetricError("accuracy is undefined for an empty confusion matrix");
  Metrics m;
  std::uint64_t trace = 0;
  double acc_sum = 0.0;
  std::size_t present = 0;
  m.per_class.assign(confusion.classes(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c = 0; c < confusion.classes(); ++c) {
    trace += confusion(c, c);
    const std::uint64_t row = confusion.row_sum(c);
    if (row == 0) continue;
    m.per_class[c] = static_cast<double>(confusion(c, c)) / static_cast<double>(row);
    acc_sum += m.per_class[c];
    ++present;
  }
  m.overall_accuracy = static_cast<double>(trace) / static_cast<double>(total);
  m.average_accuracy = acc_sum / static_cast<double>(present);
  return m;
}

}  // namespace cvnn::nn
