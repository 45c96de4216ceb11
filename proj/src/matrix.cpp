#include "llmscale/matrix.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace llmscale {

namespace {

std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

std::uint64_t product_count(const Matrix& a, std::size_t p) {
  return static_cast<std::uint64_t>(a.rows()) * a.cols() * p;
}

}  // namespace

std::string_view to_string(FlopCategory category) {
  switch (category) {
    case FlopCategory::qkv_projection: return "qkv_projection";
    case FlopCategory::attention_scores: return "attention_scores";
    case FlopCategory::attention_values: return "attention_values";
    case FlopCategory::output_projection: return "output_projection";
    case FlopCategory::ffn_expand: return "ffn_expand";
    case FlopCategory::ffn_contract: return "ffn_contract";
    case FlopCategory::logit_projection: return "logit_projection";
    case FlopCategory::layer_norm: return "layer_norm";
    case FlopCategory::other: return "other";
  }
  return "unknown";
}

std::uint64_t FlopLedger::category_total(FlopCategory category) const {
  return count(category, Direction::forward) + count(category, Direction::backward);
}

std::uint64_t FlopLedger::direction_total(Direction direction) const {
  std::uint64_t sum = 0;
  for (int c = 0; c < kNumFlopCategories; ++c) {
    sum += counts_[static_cast<int>(direction)][c];
  }
  return sum;
}

std::uint64_t FlopLedger::total() const {
  return direction_total(Direction::forward) + direction_total(Direction::backward);
}

std::uint64_t FlopLedger::matmul_total(Direction direction) const {
  return direction_total(direction) - count(FlopCategory::layer_norm, direction);
}

LedgerReport ledger_report(const FlopLedger& ledger) {
  LedgerReport report;
  for (int c = 0; c < kNumFlopCategories; ++c) {
    auto category = static_cast<FlopCategory>(c);
    report.rows[c] = {category, ledger.count(category, Direction::forward),
                      ledger.count(category, Direction::backward)};
  }
  report.forward_total = ledger.direction_total(Direction::forward);
  report.backward_total = ledger.direction_total(Direction::backward);
  return report;
}

std::string LedgerReport::to_string() const {
  char line[128];
  std::string out;
  std::snprintf(line, sizeof(line), "%-18s %16s %16s\n", "category", "forward",
                "backward");
  out += line;
  for (const auto& row : rows) {
    std::snprintf(line, sizeof(line), "%-18s %16llu %16llu\n",
                  std::string(llmscale::to_string(row.category)).c_str(),
                  static_cast<unsigned long long>(row.forward),
                  static_cast<unsigned long long>(row.backward));
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-18s %16llu %16llu\n", "total",
                static_cast<unsigned long long>(forward_total),
                static_cast<unsigned long long>(backward_total));
  out += line;
  return out;
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("matrix dimensions must be positive, got " + shape_str(rows, cols));
  }
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (!same_shape(other)) {
    throw ShapeError("element-wise add: " + shape_str(rows_, cols_) + " vs " +
                     shape_str(other.rows_, other.cols_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix matmul(const Matrix& a, const Matrix& b, FlopLedger& ledger,
              FlopCategory category, Direction direction) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a.rows(), a.cols()) + " * " +
                     shape_str(b.rows(), b.cols()) + " shape mismatch");
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const auto brow = b.row(k);
      const auto orow = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  ledger.add(category, direction, product_count(a, b.cols()));
  return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b, FlopLedger& ledger,
                 FlopCategory category, Direction direction) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_bt: " + shape_str(a.rows(), a.cols()) + " * " +
                     shape_str(b.rows(), b.cols()) + "^T shape mismatch");
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto brow = b.row(j);
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) sum += arow[k] * brow[k];
      out(i, j) = sum;
    }
  }
  ledger.add(category, direction, product_count(a, b.rows()));
  return out;
}

Matrix matmul_at(const Matrix& a, const Matrix& b, FlopLedger& ledger,
                 FlopCategory category, Direction direction) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_at: " + shape_str(a.rows(), a.cols()) + "^T * " +
                     shape_str(b.rows(), b.cols()) + " shape mismatch");
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const auto arow = a.row(k);
    const auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      const auto orow = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aki * brow[j];
    }
  }
  ledger.add(category, direction,
             static_cast<std::uint64_t>(a.cols()) * a.rows() * b.cols());
  return out;
}

Matrix softmax_rows(const Matrix& x) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    double max = kNegInf;
    for (double v : row) max = std::max(max, v);
    if (max == kNegInf) {
      throw NumericError("softmax: row " + std::to_string(i) + " fully masked");
    }
    double sum = 0.0;
    const auto orow = out.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      orow[j] = std::exp(row[j] - max);
      sum += orow[j];
    }
    for (std::size_t j = 0; j < row.size(); ++j) orow[j] /= sum;
  }
  return out;
}

namespace {

void layer_norm_row(std::span<const double> x, std::span<const double> gain,
                    std::span<const double> bias, std::span<double> out,
                    double* xhat_out, double* rstd_out) {
  const std::size_t d = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(d);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(d);
  const double rstd = 1.0 / std::sqrt(var + kLayerNormEpsilon);
  for (std::size_t j = 0; j < d; ++j) {
    const double xhat = (x[j] - mean) * rstd;
    if (xhat_out != nullptr) xhat_out[j] = xhat;
    out[j] = gain[j] * xhat + bias[j];
  }
  if (rstd_out != nullptr) *rstd_out = rstd;
}

}  // namespace

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, FlopLedger& ledger,
                               Direction direction) {
  if (x.size() != gain.size() || x.size() != bias.size()) {
    throw ShapeError("layer_norm: input size " + std::to_string(x.size()) +
                     " vs gain " + std::to_string(gain.size()) + ", bias " +
                     std::to_string(bias.size()));
  }
  std::vector<double> out(x.size());
  layer_norm_row(x, gain, bias, out, nullptr, nullptr);
  ledger.add(FlopCategory::layer_norm, direction, x.size());
  return out;
}

Matrix layer_norm_rows(const Matrix& x, std::span<const double> gain,
                       std::span<const double> bias, FlopLedger& ledger,
                       Direction direction, RowNormStats* stats) {
  if (x.cols() != gain.size() || x.cols() != bias.size()) {
    throw ShapeError("layer_norm: row width " + std::to_string(x.cols()) +
                     " vs gain " + std::to_string(gain.size()) + ", bias " +
                     std::to_string(bias.size()));
  }
  Matrix out(x.rows(), x.cols());
  if (stats != nullptr) {
    stats->xhat = Matrix(x.rows(), x.cols());
    stats->rstd.assign(x.rows(), 0.0);
  }
  for (std::size_t i = 0; i < x.rows(); ++i) {
    layer_norm_row(x.row(i), gain, bias, out.row(i),
                   stats != nullptr ? stats->xhat.row(i).data() : nullptr,
                   stats != nullptr ? &stats->rstd[i] : nullptr);
  }
  ledger.add(FlopCategory::layer_norm, direction,
             static_cast<std::uint64_t>(x.rows()) * x.cols());
  return out;
}

}  // namespace llmscale
