#include "bcv/param.hpp"

#include "bcv/error.hpp"
#include "bcv/numeric.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace bcv {

std::string render(const ParamValue& value)
{
    if (const bool* b = std::get_if<bool>(&value))
        return *b ? "T" : "F";
    if (const double* d = std::get_if<double>(&value))
        return format_real(*d);
    return std::get<std::string>(value);
}

double as_real(const ParamValue& value, const std::string& name)
{
    if (const double* d = std::get_if<double>(&value))
        return *d;
    throw Error("hyperparameter '" + name + "' must be a number, got '" + render(value) + "'");
}

long long as_integer(const ParamValue& value, const std::string& name)
{
    const double d = as_real(value, name);
    if (std::trunc(d) != d || std::fabs(d) > 9.0e15)
        throw Error("hyperparameter '" + name + "' must be an integer, got " + format_real(d));
    return static_cast<long long>(d);
}

bool as_bool(const ParamValue& value, const std::string& name)
{
    if (const bool* b = std::get_if<bool>(&value))
        return *b;
    if (const std::string* s = std::get_if<std::string>(&value)) {
        std::string up = *s;
        std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
        if (up == "T" || up == "TRUE")
            return true;
        if (up == "F" || up == "FALSE")
            return false;
    }
    throw Error("hyperparameter '" + name + "' must be a boolean, got '" + render(value) + "'");
}

}  // namespace bcv
