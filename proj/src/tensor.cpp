#include "demads/tensor.hpp"

#include <cmath>

#include "demads/error.hpp"

namespace demads {

Tensor Tensor::zeros(std::vector<size_t> shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    Tensor t;
    t.shape = std::move(shape);
    t.data.assign(n, 0.0);
    return t;
}

Tensor Tensor::vec(std::vector<double> values) {
    Tensor t;
    t.shape = {values.size()};
    t.data = std::move(values);
    return t;
}

static void check_dims(bool ok, const char* what) {
    if (!ok) throw Error(ErrKind::ShapeMismatch, what);
}

Tensor mat_mul(const Tensor& a, const Tensor& b) {
    check_dims(a.cols() == b.rows(), "mat_mul: inner dimensions differ");
    const size_t n = a.rows(), m = a.cols(), p = b.cols();
    Tensor c = Tensor::zeros({n, p});
    for (size_t i = 0; i < n; ++i) {
        const double* arow = &a.data[i * m];
        double* crow = &c.data[i * p];
        for (size_t k = 0; k < m; ++k) {
            const double aik = arow[k];
            const double* brow = &b.data[k * p];
            for (size_t j = 0; j < p; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Tensor mat_mul_nt(const Tensor& a, const Tensor& b) {
    check_dims(a.cols() == b.cols(), "mat_mul_nt: inner dimensions differ");
    const size_t n = a.rows(), m = a.cols(), p = b.rows();
    Tensor c = Tensor::zeros({n, p});
    for (size_t i = 0; i < n; ++i) {
        const double* arow = &a.data[i * m];
        double* crow = &c.data[i * p];
        for (size_t j = 0; j < p; ++j) {
            const double* brow = &b.data[j * m];
            double acc = 0.0;
            for (size_t k = 0; k < m; ++k) acc += arow[k] * brow[k];
            crow[j] = acc;
        }
    }
    return c;
}

Tensor mat_mul_tn(const Tensor& a, const Tensor& b) {
    check_dims(a.rows() == b.rows(), "mat_mul_tn: inner dimensions differ");
    const size_t m = a.rows(), n = a.cols(), p = b.cols();
    Tensor c = Tensor::zeros({n, p});
    for (size_t k = 0; k < m; ++k) {
        const double* arow = &a.data[k * n];
        const double* brow = &b.data[k * p];
        for (size_t i = 0; i < n; ++i) {
            const double aki = arow[i];
            double* crow = &c.data[i * p];
            for (size_t j = 0; j < p; ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

void ensure_finite(const std::vector<double>& v, const char* context) {
    for (double x : v)
        if (!std::isfinite(x))
            throw Error(ErrKind::NonFiniteValue, std::string("non-finite value in ") + context);
}

void ensure_finite(const Tensor& t, const char* context) {
    ensure_finite(t.data, context);
}

} // namespace demads
