#ifndef DEMADS_TENSOR_HPP
#define DEMADS_TENSOR_HPP

#include <cstddef>
#include <vector>

namespace demads {

// Row-major double tensor. Everything in this project is 1-D or 2-D; the
// shape vector is kept general so serialized models state their layout.
struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {}

    static Tensor zeros(std::vector<size_t> shape);
    static Tensor vec(std::vector<double> values);

    size_t size() const { return data.size(); }
    size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

    double& operator()(size_t i, size_t j) { return data[i * cols() + j]; }
    double operator()(size_t i, size_t j) const { return data[i * cols() + j]; }
    double& operator[](size_t i) { return data[i]; }
    double operator[](size_t i) const { return data[i]; }
};

// C = A(n x m) * B(m x p)
Tensor mat_mul(const Tensor& a, const Tensor& b);
// C = A(n x m) * B(p x m)^T
Tensor mat_mul_nt(const Tensor& a, const Tensor& b);
// C = A(m x n)^T * B(m x p)
Tensor mat_mul_tn(const Tensor& a, const Tensor& b);

// Throws NonFiniteValue naming `context` if any entry is NaN/Inf.
void ensure_finite(const Tensor& t, const char* context);
void ensure_finite(const std::vector<double>& v, const char* context);

} // namespace demads

#endif
