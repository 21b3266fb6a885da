#pragma once
// Small shared pieces for Monte Carlo estimators.

#include <cmath>
#include <limits>
#include <vector>

namespace gardner {

struct Estimate {
  double value = std::numeric_limits<double>::quiet_NaN();
  double std_error = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

// Batch means (fixed batch size) so autocorrelation is folded into the error
// bar; falls back to the naive iid error when fewer than two batches exist.
class BatchMeans {
 public:
  explicit BatchMeans(int batch_size = 50) : batch_size_(batch_size) {}

  void add(double v) {
    sum_ += v;
    sum_sq_ += v * v;
    ++count_;
    current_ += v;
    if (++in_current_ == batch_size_) {
      batch_means_.push_back(current_ / batch_size_);
      current_ = 0.0;
      in_current_ = 0;
    }
  }

  Estimate result() const {
    Estimate e;
    if (count_ == 0) return e;
    e.value = sum_ / count_;
    if (batch_means_.size() >= 2) {
      double m = 0.0;
      for (double b : batch_means_) m += b;
      m /= batch_means_.size();
      double v = 0.0;
      for (double b : batch_means_) v += (b - m) * (b - m);
      v /= batch_means_.size() - 1;
      e.std_error = std::sqrt(v / batch_means_.size());
    } else {
      const double var = std::max(0.0, sum_sq_ / count_ - e.value * e.value);
      e.std_error = std::sqrt(var / count_);
    }
    return e;
  }

 private:
  int batch_size_;
  long count_ = 0;
  int in_current_ = 0;
  double sum_ = 0.0, sum_sq_ = 0.0, current_ = 0.0;
  std::vector<double> batch_means_;
};

}  // namespace detail
}  // namespace gardner
