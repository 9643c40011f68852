#ifndef RSGNN_MATRIX_HPP
#define RSGNN_MATRIX_HPP

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsgnn {

/// Dense row-major matrix of doubles. All numerics in this library run in
/// 64-bit floating point.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    void fill(double v) noexcept {
        for (auto& x : data_) x = v;
    }

    bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace detail {
inline void require_shape(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("matrix shape mismatch in ") + what);
}
}  // namespace detail

/// a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    detail::require_shape(a.cols() == b.rows(), "matmul");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto o = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto br = b.row(k);
            for (std::size_t j = 0; j < br.size(); ++j) o[j] += aik * br[j];
        }
    }
    return out;
}

/// transpose(a) * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    detail::require_shape(a.rows() == b.rows(), "matmul_tn");
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto ar = a.row(k);
        auto br = b.row(k);
        for (std::size_t i = 0; i < ar.size(); ++i) {
            const double aki = ar[i];
            if (aki == 0.0) continue;
            auto o = out.row(i);
            for (std::size_t j = 0; j < br.size(); ++j) o[j] += aki * br[j];
        }
    }
    return out;
}

/// a * transpose(b)
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    detail::require_shape(a.cols() == b.cols(), "matmul_nt");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ar = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            auto br = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < ar.size(); ++k) s += ar[k] * br[k];
            out(i, j) = s;
        }
    }
    return out;
}

inline void add_in_place(Matrix& dst, const Matrix& src) {
    detail::require_shape(dst.same_shape(src), "add_in_place");
    auto d = dst.values();
    auto s = src.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace rsgnn

#endif  // RSGNN_MATRIX_HPP
