#include "bcv/grid.hpp"

#include "bcv/error.hpp"

#include <algorithm>

namespace bcv {

Exclusion exclude_when(ParamMap conditions)
{
    return [conditions = std::move(conditions)](const ParamMap& p) {
        for (const auto& [name, value] : conditions) {
            const auto it = p.find(name);
            if (it == p.end() || it->second != value)
                return false;
        }
        return true;
    };
}

SettingGrid::SettingGrid(std::vector<ParamAxis> axes, std::vector<Setting> settings)
    : axes_(std::move(axes)), settings_(std::move(settings))
{
}

std::vector<std::string> SettingGrid::names() const
{
    std::vector<std::string> out;
    for (const auto& a : axes_)
        out.push_back(a.name);
    return out;
}

std::size_t SettingGrid::axis_index(const std::string& name) const
{
    for (std::size_t a = 0; a < axes_.size(); ++a)
        if (axes_[a].name == name)
            return a;
    throw Error("grid has no hyperparameter '" + name + "'");
}

ParamMap SettingGrid::params(std::size_t m) const
{
    const Setting& s = settings_.at(m);
    ParamMap out;
    for (std::size_t a = 0; a < axes_.size(); ++a)
        out.emplace(axes_[a].name, s.values[a]);
    return out;
}

SettingGrid SettingGrid::reordered(const std::vector<std::size_t>& order) const
{
    if (order.size() != settings_.size())
        throw Error("reordered: permutation has wrong length");
    std::vector<Setting> out;
    out.reserve(order.size());
    for (std::size_t m = 0; m < order.size(); ++m) {
        out.push_back(settings_.at(order[m]));
        out.back().index = m;
    }
    return SettingGrid(axes_, std::move(out));
}

SettingGrid build_grid(std::vector<ParamAxis> axes, const std::vector<Exclusion>& exclusions)
{
    if (axes.empty())
        throw Error("grid: no hyperparameters declared");
    for (std::size_t a = 0; a < axes.size(); ++a) {
        const auto& axis = axes[a];
        if (axis.values.empty())
            throw Error("grid: hyperparameter '" + axis.name + "' has an empty value list");
        for (std::size_t b = 0; b < a; ++b)
            if (axes[b].name == axis.name)
                throw Error("grid: hyperparameter '" + axis.name + "' declared twice");
        for (std::size_t i = 0; i < axis.values.size(); ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (axis.values[i] == axis.values[j])
                    throw Error("grid: hyperparameter '" + axis.name + "' lists value '"
                                + render(axis.values[i]) + "' twice");
    }

    std::vector<Setting> settings;
    std::vector<std::size_t> levels(axes.size(), 0);
    bool done = false;
    while (!done) {
        Setting s;
        s.levels = levels;
        ParamMap map;
        for (std::size_t a = 0; a < axes.size(); ++a) {
            s.values.push_back(axes[a].values[levels[a]]);
            map.emplace(axes[a].name, axes[a].values[levels[a]]);
        }
        const bool excluded = std::any_of(exclusions.begin(), exclusions.end(),
                                          [&](const Exclusion& e) { return e(map); });
        if (!excluded) {
            s.index = settings.size();
            settings.push_back(std::move(s));
        }
        // odometer increment, last axis fastest
        std::size_t a = axes.size();
        for (;;) {
            if (a == 0) {
                done = true;
                break;
            }
            --a;
            if (++levels[a] < axes[a].values.size())
                break;
            levels[a] = 0;
        }
    }
    if (settings.empty())
        throw Error("grid: exclusions remove every setting");
    return SettingGrid(std::move(axes), std::move(settings));
}

}  // namespace bcv
