#ifndef HYBRIDSQ_CONFIG_HPP
#define HYBRIDSQ_CONFIG_HPP

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>

#include "hybridsq/model.hpp"

namespace hybridsq {

/**
 * Parses a parameter file of `name = value` lines into PhysicalParams.
 *
 * Keys without suffix are in units of omega_m. A `_si` suffix marks an SI
 * value (rad/s for rates and frequencies, W for drive_power, K for
 * temperature) that is converted on load. drive_power and temperature only
 * exist in SI form. `preset = <name>` seeds all fields from a built-in
 * preset before the remaining keys are applied. `#` starts a comment.
 */
inline PhysicalParams parse_params(std::istream &in)
{
    std::map<std::string, std::string> entries;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto first = s.find_first_not_of(" \t\r");
        if (first == std::string::npos)
            return std::string{};
        const auto last = s.find_last_not_of(" \t\r");
        return s.substr(first, last - first + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidParameter("line " + std::to_string(lineno) +
                                   ": expected 'name = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw InvalidParameter("line " + std::to_string(lineno) +
                                   ": empty key or value");
        if (!entries.emplace(key, value).second)
            throw InvalidParameter("duplicate key '" + key + "'");
    }

    PhysicalParams p;
    if (auto it = entries.find("preset"); it != entries.end()) {
        p = presets::by_name(it->second);
        entries.erase(it);
    }

    auto number = [](const std::string &key, const std::string &text) {
        double v = 0.0;
        const char *first = text.data();
        const char *last = text.data() + text.size();
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last)
            throw InvalidParameter("key '" + key + "': cannot parse '" + text +
                                   "' as a number");
        return v;
    };

    // omega_m first: every *_si rate is normalized by it.
    if (auto it = entries.find("omega_m_si"); it != entries.end()) {
        p.omega_m = number(it->first, it->second);
        if (!(p.omega_m > 0.0))
            throw InvalidParameter("omega_m_si must be > 0");
        entries.erase(it);
    }
    if (auto it = entries.find("omega_m"); it != entries.end()) {
        throw InvalidParameter(
            "omega_m is the unit of all relative keys; give omega_m_si");
    }

    const std::map<std::string, double PhysicalParams::*> relative = {
        {"omega_a", &PhysicalParams::omega_a},
        {"delta_a", &PhysicalParams::delta_a},
        {"delta_c", &PhysicalParams::delta_c},
        {"g0_collective", &PhysicalParams::g0_collective},
        {"g_single", &PhysicalParams::g_single},
        {"eta", &PhysicalParams::eta},
        {"kappa", &PhysicalParams::kappa},
        {"gamma_c", &PhysicalParams::gamma_c},
        {"gamma_m", &PhysicalParams::gamma_m},
    };

    bool have_n_th = false;
    double temperature = -1.0;
    for (const auto &[key, text] : entries) {
        const double v = number(key, text);
        if (auto r = relative.find(key); r != relative.end()) {
            p.*(r->second) = v;
        } else if (key.size() > 3 && key.ends_with("_si") &&
                   relative.count(key.substr(0, key.size() - 3))) {
            p.*(relative.at(key.substr(0, key.size() - 3))) = v / p.omega_m;
        } else if (key == "drive_power_si") {
            p.drive_power = v;
        } else if (key == "n_th") {
            p.n_th = v;
            have_n_th = true;
        } else if (key == "temperature_si") {
            temperature = v;
        } else {
            throw InvalidParameter("unknown key '" + key + "'");
        }
    }
    if (temperature >= 0.0 || entries.count("temperature_si")) {
        if (have_n_th)
            throw InvalidParameter("give either n_th or temperature_si, not both");
        p.n_th = thermal_occupation(temperature, p);
    }
    validate(p);
    return p;
}

inline PhysicalParams parse_params(const std::string &text)
{
    std::istringstream in(text);
    return parse_params(in);
}

inline PhysicalParams load_params_file(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw InvalidParameter("cannot open parameter file '" + path + "'");
    return parse_params(in);
}

} // namespace hybridsq

#endif
