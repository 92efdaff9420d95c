#pragma once

#include <cmath>
#include <vector>

#include "afif4/error.hpp"

namespace afif4 {

// Dense n x n solve, Gaussian elimination with partial pivoting.
// A is row-major and consumed by value together with b.
inline std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = b.size();
    if (a.size() != n * n) throw Error("solve_dense: dimension mismatch");
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        if (a[pivot * n + col] == 0.0) throw Error("solve_dense: singular matrix");
        if (pivot != col) {
            for (std::size_t k = col; k < n; ++k) std::swap(a[pivot * n + k], a[col * n + k]);
            std::swap(b[pivot], b[col]);
        }
        const double inv = 1.0 / a[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] * inv;
            if (f == 0.0) continue;
            for (std::size_t k = col; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t ri = n; ri-- > 0;) {
        double acc = b[ri];
        for (std::size_t k = ri + 1; k < n; ++k) acc -= a[ri * n + k] * x[k];
        x[ri] = acc / a[ri * n + ri];
    }
    return x;
}

}  // namespace afif4
