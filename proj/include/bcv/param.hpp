#pragma once

#include <map>
#include <string>
#include <variant>

namespace bcv {

/// A hyperparameter value as declared in a grid or a learner spec.
using ParamValue = std::variant<bool, double, std::string>;
using ParamMap = std::map<std::string, ParamValue>;

/// Text form used in CSV outputs: booleans as T/F, integral reals without a
/// fractional part, other reals in shortest round-trip form.
std::string render(const ParamValue& value);

double as_real(const ParamValue& value, const std::string& name);
/// Accepts an integral real only.
long long as_integer(const ParamValue& value, const std::string& name);
/// Accepts a boolean, or the strings T/F/TRUE/FALSE (any case).
bool as_bool(const ParamValue& value, const std::string& name);

}  // namespace bcv
