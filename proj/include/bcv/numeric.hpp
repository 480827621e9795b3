#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

namespace bcv {

/// Compensated (Neumaier) summation.
class CompensatedSum {
public:
    void add(double x) noexcept
    {
        const double t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }

    CompensatedSum& operator+=(double x) noexcept
    {
        add(x);
        return *this;
    }

    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

double compensated_sum(std::span<const double> xs) noexcept;
double compensated_mean(std::span<const double> xs) noexcept;
double compensated_dot(std::span<const double> a, std::span<const double> b) noexcept;

/// Shortest decimal text that round-trips to the same double.
std::string format_real(double x);

/// Decimal text with `significant` significant digits (printf "%g" style).
std::string format_sig(double x, int significant);

/// Parses a plain decimal/scientific real; false if `text` is anything else.
bool parse_real(std::string_view text, double& out) noexcept;

}  // namespace bcv
