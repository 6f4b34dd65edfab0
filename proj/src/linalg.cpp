#include "merge/linalg.hpp"

#include "merge/error.hpp"
#include "merge/kernels.hpp"

namespace merge {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw Error("matmul: inner dimension mismatch");
    Matrix c(a.rows(), b.cols());
    const auto& k = simd::active();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* out = c.row(i).data();
        for (std::size_t p = 0; p < a.cols(); ++p) {
            const double s = a(i, p);
            if (s != 0.0) k.axpy(s, b.row(p).data(), out, b.cols());
        }
    }
    return c;
}

void matmul_at_b_acc(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.rows() != b.rows() || c.rows() != a.cols() || c.cols() != b.cols())
        throw Error("matmul_at_b_acc: dimension mismatch");
    const auto& k = simd::active();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* src = b.row(i).data();
        for (std::size_t p = 0; p < a.cols(); ++p) {
            const double s = a(i, p);
            if (s != 0.0) k.axpy(s, src, c.row(p).data(), b.cols());
        }
    }
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw Error("matmul_a_bt: inner dimension mismatch");
    Matrix c(a.rows(), b.rows());
    const auto& k = simd::active();
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j)
            c(i, j) = k.dot(a.row(i).data(), b.row(j).data(), a.cols());
    return c;
}

std::vector<double> column_means(const Matrix& x) {
    std::vector<double> mean(x.cols(), 0.0);
    if (x.rows() == 0) return mean;
    const auto& k = simd::active();
    for (std::size_t i = 0; i < x.rows(); ++i) k.axpy(1.0, x.row(i).data(), mean.data(), x.cols());
    k.scale(1.0 / static_cast<double>(x.rows()), mean.data(), mean.size());
    return mean;
}

} // namespace merge
