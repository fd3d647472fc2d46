#pragma once

#include <cstdint>
#include <vector>

namespace rippler {

/// Dense (T+1) x N grid, time-major. Row t holds one value per individual.
template <typename T>
class Lattice {
 public:
  Lattice() : rows_(0), cols_(0) {}
  Lattice(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(int t, int j) { return data_[static_cast<std::size_t>(t) * cols_ + j]; }
  const T& operator()(int t, int j) const {
    return data_[static_cast<std::size_t>(t) * cols_ + j];
  }

  T* row(int t) { return data_.data() + static_cast<std::size_t>(t) * cols_; }
  const T* row(int t) const { return data_.data() + static_cast<std::size_t>(t) * cols_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Lattice& a, const Lattice& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  int rows_;
  int cols_;
  std::vector<T> data_;
};

/// Colonisation states: 0 = uncolonised, 1 = colonised. Rows 0..T.
using StateMatrix = Lattice<std::uint8_t>;

/// Latent uniform draws in [0,1), same shape as the state matrix.
using DrawMatrix = Lattice<double>;

/// Per-cell proposal interval [a,b); draws inside reproduce the current
/// transition, draws in the complement flip it.
struct Interval {
  double a = 0.0;
  double b = 1.0;
  double width() const { return b - a; }
  double complement_mass() const { return 1.0 + a - b; }
  bool contains(double u) const { return u >= a && u < b; }
};

using BoundsLattice = Lattice<Interval>;

enum class TestResult : std::int8_t {
  kNotTested = -1,
  kNegative = 0,
  kPositive = 1,
};

struct TestCell {
  int t = 0;
  int j = 0;
  bool positive = false;
};

/// Sparse test results over the lattice; untested cells carry kNotTested.
class ObservationMatrix {
 public:
  ObservationMatrix() = default;
  ObservationMatrix(int rows, int cols)
      : grid_(rows, cols, TestResult::kNotTested) {}

  int rows() const { return grid_.rows(); }
  int cols() const { return grid_.cols(); }

  TestResult at(int t, int j) const { return grid_(t, j); }

  void set(int t, int j, bool positive) {
    grid_(t, j) = positive ? TestResult::kPositive : TestResult::kNegative;
    cells_.push_back({t, j, positive});
  }

  const std::vector<TestCell>& cells() const { return cells_; }
  std::size_t n_tested() const { return cells_.size(); }

 private:
  Lattice<TestResult> grid_;
  std::vector<TestCell> cells_;
};

}  // namespace rippler
