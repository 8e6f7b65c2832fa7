#include "fsl/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fsl {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

Config Config::parse_string(const std::string& text, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
            cfg.data_[section];
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value' in '" +
                              line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (section.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": key '" + key +
                              "' outside any [section]");
        auto [it, inserted] = cfg.data_[section].emplace(key, Entry{value, lineno, false});
        if (!inserted)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                              "' in [" + section + "]");
    }
    return cfg;
}

bool Config::has(const std::string& section, const std::string& key) const {
    auto s = data_.find(section);
    if (s == data_.end()) return false;
    auto k = s->second.find(key);
    if (k == s->second.end()) return false;
    k->second.consumed = true;
    return true;
}

const Config::Entry& Config::lookup(const std::string& section, const std::string& key) const {
    auto s = data_.find(section);
    if (s == data_.end()) throw ConfigError(origin_ + ": missing section [" + section + "]");
    auto k = s->second.find(key);
    if (k == s->second.end())
        throw ConfigError(origin_ + ": missing key '" + key + "' in [" + section + "]");
    k->second.consumed = true;
    return k->second;
}

std::string Config::get_string(const std::string& section, const std::string& key) const {
    return lookup(section, key).value;
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
    return has(section, key) ? lookup(section, key).value : fallback;
}

double Config::get_double(const std::string& section, const std::string& key) const {
    const Entry& e = lookup(section, key);
    try {
        std::size_t pos = 0;
        const double v = std::stod(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": '" + e.value +
                          "' is not a number (key '" + key + "')");
    }
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}

long Config::get_int(const std::string& section, const std::string& key) const {
    const Entry& e = lookup(section, key);
    try {
        std::size_t pos = 0;
        const long v = std::stol(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": '" + e.value +
                          "' is not an integer (key '" + key + "')");
    }
}

long Config::get_int(const std::string& section, const std::string& key, long fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const Entry& e = lookup(section, key);
    std::string v = e.value;
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": '" + e.value +
                      "' is not a boolean (key '" + key + "')");
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key) const {
    const Entry& e = lookup(section, key);
    std::vector<double> out;
    std::istringstream in(e.value);
    std::string cell;
    while (std::getline(in, cell, ',')) {
        cell = trim(cell);
        if (cell.empty()) continue;
        try {
            out.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": '" + cell +
                              "' is not a number (key '" + key + "')");
        }
    }
    if (out.empty())
        throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": empty list (key '" + key +
                          "')");
    return out;
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const {
    return has(section, key) ? get_doubles(section, key) : fallback;
}

std::vector<long> Config::get_ints(const std::string& section, const std::string& key) const {
    std::vector<long> out;
    for (double v : get_doubles(section, key)) out.push_back(std::lround(v));
    return out;
}

Eigen::MatrixXd Config::get_matrix(const std::string& section, const std::string& key) const {
    const Entry& e = lookup(section, key);
    try {
        return parse_matrix(e.value);
    } catch (const std::exception& ex) {
        throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": " + ex.what() + " (key '" +
                          key + "')");
    }
}

Eigen::MatrixXd Config::get_matrix(const std::string& section, const std::string& key,
                                   const Eigen::MatrixXd& fallback) const {
    return has(section, key) ? get_matrix(section, key) : fallback;
}

void Config::reject_unconsumed() const {
    std::vector<std::string> unknown;
    for (const auto& [section, entries] : data_)
        for (const auto& [key, entry] : entries)
            if (!entry.consumed)
                unknown.push_back("[" + section + "] " + key + " (line " +
                                  std::to_string(entry.line) + ")");
    if (!unknown.empty()) {
        std::string msg = origin_ + ": unknown keys:";
        for (const auto& u : unknown) msg += "\n  " + u;
        throw ConfigError(msg);
    }
}

std::vector<std::string> Config::sections() const {
    std::vector<std::string> out;
    for (const auto& [s, _] : data_) out.push_back(s);
    return out;
}

Eigen::MatrixXd parse_matrix(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::istringstream rs(text);
    std::string row;
    while (std::getline(rs, row, ';')) {
        std::vector<double> vals;
        std::istringstream cs(row);
        std::string cell;
        while (std::getline(cs, cell, ',')) {
            cell = trim(cell);
            if (cell.empty()) continue;
            vals.push_back(std::stod(cell));
        }
        if (!vals.empty()) rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw std::invalid_argument("empty matrix literal");
    const std::size_t cols = rows[0].size();
    for (const auto& r : rows)
        if (r.size() != cols) throw std::invalid_argument("ragged matrix literal");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

}  // namespace fsl
