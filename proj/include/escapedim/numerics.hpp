#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace escapedim {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

// Neumaier compensated summation. Results are independent of how a reduction is
// split to within a few ulps, which keeps worker-count changes invisible.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    CompensatedSum& operator+=(double x) {
        add(x);
        return *this;
    }
    void merge(const CompensatedSum& other) {
        add(other.sum_);
        add(other.comp_);
    }
    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t count = 0;
};

// Ordinary least squares y ~ intercept + slope * x.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    LinearFit fit;
    const std::size_t n = x.size();
    fit.count = n;
    if (n < 2) return fit;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) return fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

inline double wrap_angle(double a) {
    return std::remainder(a, 2.0 * pi);
}

// log(sin z) on some branch, without overflow for large |Im z|.
inline cplx log_sin(cplx z) {
    if (std::abs(z.imag()) < 20.0) return std::log(std::sin(z));
    if (z.imag() > 0) {
        // sin z = (i/2) e^{-iz} (1 - e^{2iz})
        return -I * z + cplx(-std::log(2.0), pi / 2) + std::log(1.0 - std::exp(2.0 * I * z));
    }
    // sin z = (-i/2) e^{iz} (1 - e^{-2iz})
    return I * z + cplx(-std::log(2.0), -pi / 2) + std::log(1.0 - std::exp(-2.0 * I * z));
}

// cot z without overflow for large |Im z|.
inline cplx cot_stable(cplx z) {
    if (std::abs(z.imag()) < 20.0) return std::cos(z) / std::sin(z);
    if (z.imag() > 0) {
        const cplx q = std::exp(2.0 * I * z);
        return I * (q + 1.0) / (q - 1.0);
    }
    const cplx q = std::exp(-2.0 * I * z);
    return I * (1.0 + q) / (1.0 - q);
}

// Trapezoid rule on a uniform periodic grid of values.
inline double periodic_mean(std::span<const double> v) {
    CompensatedSum s;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s.value() / double(v.size());
}

}  // namespace escapedim
