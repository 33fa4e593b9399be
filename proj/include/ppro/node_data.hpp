#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ppro/matrix.hpp"

namespace ppro {

/// Dense n x d node features, stored in single precision.
class NodeFeatures {
 public:
  NodeFeatures() = default;
  NodeFeatures(std::size_t n, std::size_t dim) : n_(n), dim_(dim), data_(n * dim, 0.0f) {}
  NodeFeatures(std::size_t n, std::size_t dim, std::vector<float> data);

  std::size_t num_nodes() const { return n_; }
  std::size_t dim() const { return dim_; }
  float& operator()(std::size_t i, std::size_t j) { return data_[i * dim_ + j]; }
  float operator()(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<const float> values() const { return data_; }

  Matrix to_matrix() const;

  friend bool operator==(const NodeFeatures&, const NodeFeatures&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

/// Class ids in [0, num_classes).
struct Labels {
  std::vector<std::int32_t> y;
  std::int32_t num_classes = 0;

  std::size_t size() const { return y.size(); }
  /// Throws InputError unless every id lies in [0, c) and every class occurs.
  void validate() const;
  friend bool operator==(const Labels&, const Labels&) = default;
};

/// Transductive split over one graph's nodes.
struct SplitMasks {
  std::vector<std::uint8_t> train;
  std::vector<std::uint8_t> val;
  std::vector<std::uint8_t> test;

  static SplitMasks empty(std::size_t n);
  std::vector<std::size_t> train_nodes() const { return indices(train); }
  std::vector<std::size_t> val_nodes() const { return indices(val); }
  std::vector<std::size_t> test_nodes() const { return indices(test); }
  /// Throws InputError if sizes differ from n, sets overlap, or train is empty.
  void validate(std::size_t n) const;

  static std::vector<std::size_t> indices(std::span<const std::uint8_t> mask);
  friend bool operator==(const SplitMasks&, const SplitMasks&) = default;
};

}  // namespace ppro
