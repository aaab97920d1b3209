#ifndef DEMADS_TEST_UTIL_HPP
#define DEMADS_TEST_UTIL_HPP

#include <cmath>
#include <complex>
#include <vector>

#include "demads/grid.hpp"
#include "demads/nn.hpp"
#include "demads/rt_detector.hpp"

namespace testutil {

// -------- fixtures ------------------------------------------------------

inline demads::grid::NetworkTopology two_bus(double r = 0.01, double x = 0.005) {
    demads::grid::NetworkTopology t;
    t.bus_count = 2;
    t.lines.push_back({0, 1, r, x});
    return demads::grid::validate_topology(std::move(t));
}

inline demads::grid::NetworkTopology chain(int buses, double r = 0.01, double x = 0.005) {
    demads::grid::NetworkTopology t;
    t.bus_count = buses;
    for (int b = 1; b < buses; ++b) t.lines.push_back({b - 1, b, r, x});
    return demads::grid::validate_topology(std::move(t));
}

// -------- oracles (independent of the library's solver paths) ----------

// Scalar fixed-point iteration V <- V0 - z * conj(S / V) for the 2-bus
// case. Returns the voltage after convergence to `tol`, or NaN when the
// iteration does not settle.
inline std::complex<double> two_bus_oracle(std::complex<double> z, std::complex<double> s,
                                           double v0 = 1.0, double tol = 1e-12,
                                           int max_iter = 10000) {
    std::complex<double> v(v0, 0.0);
    for (int i = 0; i < max_iter; ++i) {
        const std::complex<double> next = std::complex<double>(v0, 0.0) - z * std::conj(s / v);
        if (std::abs(next - v) < tol) return next;
        v = next;
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) break;
    }
    return {std::nan(""), std::nan("")};
}

// Least squares fit targets ~ [x, 1] via normal equations with plain
// Gaussian elimination; returns the (dim+1) x out coefficient matrix.
inline std::vector<std::vector<double>> least_squares(const std::vector<std::vector<double>>& x,
                                                      const std::vector<std::vector<double>>& y) {
    const size_t n = x.size();
    const size_t d = x.front().size() + 1; // affine
    const size_t out = y.front().size();
    std::vector<std::vector<double>> a(d, std::vector<double>(d, 0.0));
    std::vector<std::vector<double>> b(d, std::vector<double>(out, 0.0));
    auto xi = [&](size_t row, size_t col) { return col < d - 1 ? x[row][col] : 1.0; };
    for (size_t r = 0; r < n; ++r)
        for (size_t i = 0; i < d; ++i) {
            for (size_t j = 0; j < d; ++j) a[i][j] += xi(r, i) * xi(r, j);
            for (size_t o = 0; o < out; ++o) b[i][o] += xi(r, i) * y[r][o];
        }
    for (size_t col = 0; col < d; ++col) {
        size_t pivot = col;
        for (size_t r = col + 1; r < d; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (size_t r = 0; r < d; ++r) {
            if (r == col || a[r][col] == 0.0) continue;
            const double f = a[r][col] / a[col][col];
            for (size_t c = 0; c < d; ++c) a[r][c] -= f * a[col][c];
            for (size_t o = 0; o < out; ++o) b[r][o] -= f * b[col][o];
        }
    }
    std::vector<std::vector<double>> coef(d, std::vector<double>(out));
    for (size_t i = 0; i < d; ++i)
        for (size_t o = 0; o < out; ++o) coef[i][o] = b[i][o] / a[i][i];
    return coef;
}

inline std::vector<double> ls_predict(const std::vector<std::vector<double>>& coef,
                                      const std::vector<double>& x) {
    const size_t out = coef.front().size();
    std::vector<double> y(out, 0.0);
    for (size_t o = 0; o < out; ++o) {
        for (size_t i = 0; i < x.size(); ++i) y[o] += coef[i][o] * x[i];
        y[o] += coef[x.size()][o];
    }
    return y;
}

// -------- central finite-difference gradient checks ---------------------

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

// Max relative error between backward() and central differences over every
// parameter of the Mlp.
inline double mlp_gradient_check(demads::nn::Mlp mlp, const demads::Tensor& x,
                                 const demads::Tensor& target, demads::nn::LossKind loss,
                                 double eps = 1e-5) {
    using namespace demads;
    const auto analytic = nn::backward(mlp, x, target, loss);
    double worst = 0.0;
    for (size_t li = 0; li < mlp.layers.size(); ++li) {
        auto check_tensor = [&](Tensor& param, const Tensor& grad) {
            for (size_t i = 0; i < param.size(); ++i) {
                const double saved = param.data[i];
                param.data[i] = saved + eps;
                const double up = nn::loss_value(mlp, x, target, loss);
                param.data[i] = saved - eps;
                const double down = nn::loss_value(mlp, x, target, loss);
                param.data[i] = saved;
                const double fd = (up - down) / (2.0 * eps);
                worst = std::max(worst, rel_err(fd, grad.data[i]));
            }
        };
        check_tensor(mlp.layers[li].weights, analytic.grads[li].weights);
        check_tensor(mlp.layers[li].bias, analytic.grads[li].bias);
    }
    return worst;
}

// Same for the whole R-Transformer.
inline double rt_gradient_check(demads::rt::RtModel model, const std::vector<double>& window,
                                int target_class, double eps = 1e-5) {
    using namespace demads;
    rt::RtGrads grads = rt::zero_grads(model);
    rt::backward(model, window, target_class, grads);
    auto params = rt::param_views(model);
    auto gviews = rt::grad_views(grads);
    double worst = 0.0;
    for (size_t s = 0; s < params.size(); ++s) {
        for (size_t i = 0; i < params[s].size(); ++i) {
            const double saved = params[s][i];
            params[s][i] = saved + eps;
            const double up = rt::loss_only(model, window, target_class);
            params[s][i] = saved - eps;
            const double down = rt::loss_only(model, window, target_class);
            params[s][i] = saved;
            const double fd = (up - down) / (2.0 * eps);
            worst = std::max(worst, rel_err(fd, gviews[s][i]));
        }
    }
    return worst;
}

} // namespace testutil

#endif
