#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace capstruct {

template <typename Scalar>
struct Types {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
};

using Matrix = Types<double>::Matrix;
using Vector = Types<double>::Vector;
using RowVector = Types<double>::RowVector;
using Index = Eigen::Index;

/// Coefficient vector with one name per entry.
struct NamedVector {
  std::vector<std::string> names;
  Vector values;

  NamedVector() = default;
  NamedVector(std::vector<std::string> n, Vector v);

  Index size() const { return values.size(); }
  std::optional<Index> find(std::string_view name) const;
  /// Throws std::out_of_range for unknown names.
  double operator[](std::string_view name) const;

  bool operator==(const NamedVector& other) const {
    return names == other.names && values.size() == other.values.size() &&
           values == other.values;
  }
};

}  // namespace capstruct
