#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "bcv/param.hpp"

namespace bcv {

struct ParamAxis {
    std::string name;
    std::vector<ParamValue> values;
};

/// Returns true for a combination that must be left out of the grid.
using Exclusion = std::function<bool(const ParamMap&)>;

/// Exclusion matching every combination whose values equal all of `conditions`.
Exclusion exclude_when(ParamMap conditions);

/// One grid point. `levels[a]` indexes axis a's value list.
struct Setting {
    std::size_t index = 0;
    std::vector<std::size_t> levels;
    std::vector<ParamValue> values;
};

class SettingGrid {
public:
    SettingGrid() = default;
    SettingGrid(std::vector<ParamAxis> axes, std::vector<Setting> settings);

    std::size_t size() const noexcept { return settings_.size(); }
    const std::vector<ParamAxis>& axes() const noexcept { return axes_; }
    const std::vector<Setting>& settings() const noexcept { return settings_; }
    const Setting& operator[](std::size_t m) const { return settings_.at(m); }
    std::vector<std::string> names() const;

    /// Axis position of `name`; throws if absent.
    std::size_t axis_index(const std::string& name) const;
    ParamMap params(std::size_t m) const;

    /// The same settings in a new order, re-indexed 0..M-1.
    SettingGrid reordered(const std::vector<std::size_t>& order) const;

private:
    std::vector<ParamAxis> axes_;
    std::vector<Setting> settings_;
};

/// Cartesian product of the axes in row-major order (last axis fastest),
/// minus every combination an exclusion matches.
SettingGrid build_grid(std::vector<ParamAxis> axes, const std::vector<Exclusion>& exclusions = {});

}  // namespace bcv
