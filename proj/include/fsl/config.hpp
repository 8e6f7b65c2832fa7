#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fsl/errors.hpp"

namespace fsl {

/// Flat key/value configuration file with [section] headers. Lines are
/// `key = value`; `#` starts a comment. Values are kept verbatim; typed
/// accessors parse on demand. Reading an unknown key is the caller's
/// business, but consume-tracking lets the harness reject keys it never
/// looked at (unknown keys are configuration errors).
class Config {
   public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long get_int(const std::string& section, const std::string& key) const;
    long get_int(const std::string& section, const std::string& key, long fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

    /// Comma-separated doubles.
    std::vector<double> get_doubles(const std::string& section, const std::string& key) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                    const std::vector<double>& fallback) const;
    /// Comma-separated integers (e.g. seed lists).
    std::vector<long> get_ints(const std::string& section, const std::string& key) const;

    /// Matrix literal: rows separated by ';', entries by ','.
    Eigen::MatrixXd get_matrix(const std::string& section, const std::string& key) const;
    Eigen::MatrixXd get_matrix(const std::string& section, const std::string& key,
                               const Eigen::MatrixXd& fallback) const;

    /// Throws ConfigError listing any key that was never read.
    void reject_unconsumed() const;

    std::vector<std::string> sections() const;

   private:
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool consumed = false;
    };
    const Entry& lookup(const std::string& section, const std::string& key) const;

    std::string origin_;
    std::map<std::string, std::map<std::string, Entry>> data_;
};

/// Parse a matrix literal ("1,0;0,1").
Eigen::MatrixXd parse_matrix(const std::string& text);

}  // namespace fsl
