#include "bcv/numeric.hpp"

#include <array>
#include <charconv>
#include <cstdio>

namespace bcv {

double compensated_sum(std::span<const double> xs) noexcept
{
    CompensatedSum s;
    for (double x : xs)
        s.add(x);
    return s.value();
}

double compensated_mean(std::span<const double> xs) noexcept
{
    if (xs.empty())
        return 0.0;
    return compensated_sum(xs) / static_cast<double>(xs.size());
}

double compensated_dot(std::span<const double> a, std::span<const double> b) noexcept
{
    CompensatedSum s;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i)
        s.add(a[i] * b[i]);
    return s.value();
}

std::string format_real(double x)
{
    if (x == 0.0)
        return "0";  // folds -0 as well
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    if (ec != std::errc{})
        return "nan";
    return std::string(buf.data(), end);
}

std::string format_sig(double x, int significant)
{
    if (x == 0.0)
        return "0";
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x,
                                   std::chars_format::general, significant);
    if (ec != std::errc{})
        return "nan";
    return std::string(buf.data(), end);
}

bool parse_real(std::string_view text, double& out) noexcept
{
    if (text.empty())
        return false;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (*first == '+')
        ++first;
    if (first == last)
        return false;
    auto [ptr, ec] = std::from_chars(first, last, out, std::chars_format::general);
    if (ec != std::errc{} || ptr != last)
        return false;
    return std::isfinite(out);
}

}  // namespace bcv
