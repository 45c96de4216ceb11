#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "llmscale/errors.hpp"
#include "llmscale/flop_ledger.hpp"

namespace llmscale {

inline constexpr double kLayerNormEpsilon = 1e-5;

// Dense row-major matrix of doubles. Plain value type; all arithmetic that
// counts toward the flop ledger goes through the free functions below.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  Matrix& operator+=(const Matrix& other);
  friend Matrix operator+(Matrix lhs, const Matrix& rhs) {
    lhs += rhs;
    return lhs;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out = a * b; ledger grows by exactly a.rows * a.cols * b.cols.
Matrix matmul(const Matrix& a, const Matrix& b, FlopLedger& ledger,
              FlopCategory category, Direction direction = Direction::forward);

// out = a * b^T with b given untransposed; same exact count as matmul.
Matrix matmul_bt(const Matrix& a, const Matrix& b, FlopLedger& ledger,
                 FlopCategory category, Direction direction = Direction::forward);

// out = a^T * b with a given untransposed; same exact count as matmul.
Matrix matmul_at(const Matrix& a, const Matrix& b, FlopLedger& ledger,
                 FlopCategory category, Direction direction = Direction::forward);

// Row-wise numerically stable softmax. -inf entries map to exactly 0; a row
// that is entirely -inf raises NumericError.
Matrix softmax_rows(const Matrix& x);

// out = gain (x - mean) / sqrt(var + eps) + bias over one row of length d;
// the ledger grows by d.
std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, FlopLedger& ledger,
                               Direction direction = Direction::forward);

// Per-row statistics retained for the backward pass.
struct RowNormStats {
  Matrix xhat;               // normalized values before gain/bias
  std::vector<double> rstd;  // 1 / sqrt(var + eps) per row
};

// Applies layer_norm to every row of x; ledger grows by rows * cols.
Matrix layer_norm_rows(const Matrix& x, std::span<const double> gain,
                       std::span<const double> bias, FlopLedger& ledger,
                       Direction direction = Direction::forward,
                       RowNormStats* stats = nullptr);

}  // namespace llmscale
