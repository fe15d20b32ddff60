#include "gamenet/matrix.hpp"

#include "gamenet/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

namespace gamenet {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstView = Eigen::Map<const RowMajor>;
using View = Eigen::Map<RowMajor>;

ConstView view(const Matrix& m)
{
    return ConstView(m.values().data(), static_cast<Eigen::Index>(m.rows()),
                     static_cast<Eigen::Index>(m.cols()));
}

View view(Matrix& m)
{
    return View(m.values().data(), static_cast<Eigen::Index>(m.rows()),
                static_cast<Eigen::Index>(m.cols()));
}

std::string dims(const Matrix& m)
{
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill)
{
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data))
{
    if (data_.size() != rows * cols)
        throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " +
                         std::to_string(rows) + "x" + std::to_string(cols));
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows)
{
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c)
            throw ShapeError("ragged initializer for matrix");
        std::copy(row.begin(), row.end(), m.row(i++).begin());
    }
    return m;
}

Matrix Matrix::column(std::span<const double> values)
{
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double v)
{
    std::fill(data_.begin(), data_.end(), v);
}

Matrix matmul(const Matrix& a, const Matrix& b)
{
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + dims(a) + " * " + dims(b));
    Matrix out(a.rows(), b.cols());
    if (out.empty() || a.cols() == 0)
        return out;
    view(out).noalias() = view(a) * view(b);
    return out;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b)
{
    if (a.rows() != b.rows())
        throw ShapeError("matmul_at_b: " + dims(a) + "^T * " + dims(b));
    Matrix out(a.cols(), b.cols());
    if (out.empty() || a.rows() == 0)
        return out;
    view(out).noalias() = view(a).transpose() * view(b);
    return out;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b)
{
    if (a.cols() != b.cols())
        throw ShapeError("matmul_a_bt: " + dims(a) + " * " + dims(b) + "^T");
    Matrix out(a.rows(), b.rows());
    if (out.empty() || a.cols() == 0)
        return out;
    view(out).noalias() = view(a) * view(b).transpose();
    return out;
}

Matrix transpose(const Matrix& a)
{
    Matrix out(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c)
            out(c, r) = a(r, c);
    return out;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows)
{
    Matrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= m.rows())
            throw ShapeError("select_rows: row " + std::to_string(rows[i]) + " out of range " +
                             dims(m));
        std::copy_n(m.row(rows[i]).begin(), m.cols(), out.row(i).begin());
    }
    return out;
}

Matrix slice_cols(const Matrix& m, std::size_t begin, std::size_t end)
{
    if (begin > end || end > m.cols())
        throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range " + dims(m));
    Matrix out(m.rows(), end - begin);
    for (std::size_t r = 0; r < m.rows(); ++r)
        std::copy(m.row(r).begin() + static_cast<std::ptrdiff_t>(begin),
                  m.row(r).begin() + static_cast<std::ptrdiff_t>(end), out.row(r).begin());
    return out;
}

Matrix hconcat(std::span<const Matrix> blocks)
{
    if (blocks.empty())
        return {};
    const std::size_t rows = blocks.front().rows();
    std::size_t cols = 0;
    for (const auto& b : blocks) {
        if (b.rows() != rows)
            throw ShapeError("hconcat: row mismatch " + dims(blocks.front()) + " vs " + dims(b));
        cols += b.cols();
    }
    Matrix out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        auto dst = out.row(r).begin();
        for (const auto& b : blocks)
            dst = std::copy(b.row(r).begin(), b.row(r).end(), dst);
    }
    return out;
}

Matrix col_sums(const Matrix& m)
{
    Matrix out(1, m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
            out(0, c) += m(r, c);
    return out;
}

bool all_finite(const Matrix& m) noexcept
{
    return std::all_of(m.values().begin(), m.values().end(),
                       [](double v) { return std::isfinite(v); });
}

void require_finite(const Matrix& m, std::string_view what)
{
    if (!all_finite(m))
        throw NumericError(std::string(what) + ": non-finite value in " + dims(m) + " matrix");
}

void require_same_shape(const Matrix& a, const Matrix& b, std::string_view what)
{
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + dims(a) + " vs " + dims(b));
}

} // namespace gamenet
