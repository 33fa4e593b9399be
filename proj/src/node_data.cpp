#include "ppro/node_data.hpp"

#include <string>

#include "ppro/error.hpp"

namespace ppro {

NodeFeatures::NodeFeatures(std::size_t n, std::size_t dim, std::vector<float> data)
    : n_(n), dim_(dim), data_(std::move(data)) {
  PPRO_EXPECT(data_.size() == n * dim, "NodeFeatures data size does not match shape");
}

Matrix NodeFeatures::to_matrix() const {
  Matrix m(n_, dim_);
  for (std::size_t k = 0; k < data_.size(); ++k) m.values()[k] = data_[k];
  return m;
}

void Labels::validate() const {
  if (num_classes <= 0) throw InputError("labels: class count must be positive");
  std::vector<std::size_t> count(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || y[i] >= num_classes)
      throw InputError("labels: node " + std::to_string(i) + " has label " + std::to_string(y[i]) +
                       " outside [0, " + std::to_string(num_classes) + ")");
    ++count[static_cast<std::size_t>(y[i])];
  }
  for (std::size_t c = 0; c < count.size(); ++c)
    if (count[c] == 0) throw InputError("labels: class " + std::to_string(c) + " never occurs");
}

SplitMasks SplitMasks::empty(std::size_t n) {
  return SplitMasks{std::vector<std::uint8_t>(n, 0), std::vector<std::uint8_t>(n, 0),
                    std::vector<std::uint8_t>(n, 0)};
}

void SplitMasks::validate(std::size_t n) const {
  if (train.size() != n || val.size() != n || test.size() != n)
    throw InputError("split masks must have one entry per node");
  bool any_train = false;
  for (std::size_t i = 0; i < n; ++i) {
    if ((train[i] ? 1 : 0) + (val[i] ? 1 : 0) + (test[i] ? 1 : 0) > 1)
      throw InputError("split masks overlap at node " + std::to_string(i));
    any_train = any_train || train[i];
  }
  if (!any_train) throw InputError("training mask is empty");
}

std::vector<std::size_t> SplitMasks::indices(std::span<const std::uint8_t> mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(i);
  return out;
}

}  // namespace ppro
