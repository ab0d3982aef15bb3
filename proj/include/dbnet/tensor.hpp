#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dbnet {

// Dense rank-1 or rank-2 shape. Rank 1 stores the length in rows (cols == 1).
struct Shape {
  uint8_t rank = 1;
  uint32_t rows = 0;
  uint32_t cols = 1;

  static Shape vec(std::size_t n) {
    return Shape{1, static_cast<uint32_t>(n), 1};
  }
  static Shape mat(std::size_t r, std::size_t c) {
    return Shape{2, static_cast<uint32_t>(r), static_cast<uint32_t>(c)};
  }
  std::size_t size() const { return std::size_t(rows) * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

struct SoftTensor {
  Shape shape;
  std::vector<double> data;

  SoftTensor() = default;
  SoftTensor(Shape s, std::vector<double> d) : shape(s), data(std::move(d)) {}
  static SoftTensor zeros(Shape s) {
    return SoftTensor(s, std::vector<double>(s.size(), 0.0));
  }
  static SoftTensor vec(std::vector<double> d) {
    Shape s = Shape::vec(d.size());
    return SoftTensor(s, std::move(d));
  }
  std::size_t size() const { return shape.size(); }
  double operator[](std::size_t i) const { return data[i]; }
};

}  // namespace dbnet
