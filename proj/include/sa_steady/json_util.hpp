#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <initializer_list>
#include <string>
#include <string_view>

#include "sa_steady/error.hpp"
#include "sa_steady/matlib.hpp"

namespace sa_steady {

using json = nlohmann::json;

/// Rejects keys of `obj` outside `allowed`; `where` prefixes the error message.
inline void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!obj.is_object()) {
        throw InvalidArgument(where + ": expected a JSON object");
    }
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) throw InvalidArgument(where + "." + key + ": unknown key");
    }
}

/// Reals that may be infinite or NaN are written as strings, since JSON has no
/// representation for them.
inline json real_to_json(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

inline double real_from_json(const json& j, const std::string& where) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return INFINITY;
        if (s == "-inf") return -INFINITY;
        if (s == "nan") return NAN;
    }
    throw InvalidArgument(where + ": expected a number");
}

inline json vec_to_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(real_to_json(v(i)));
    return a;
}

inline json mat_to_json(const Mat& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(real_to_json(m(i, k)));
        a.push_back(std::move(row));
    }
    return a;
}

inline Vec vec_from_json(const json& j, const std::string& where) {
    if (j.is_number()) return Vec::Constant(1, j.get<double>());
    if (!j.is_array() || j.empty()) throw InvalidArgument(where + ": expected a non-empty array of numbers");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = real_from_json(j[i], where + "[" + std::to_string(i) + "]");
    }
    if (!v.allFinite()) throw InvalidArgument(where + ": non-finite entry");
    return v;
}

/// Accepts a scalar (1x1), a flat array (single row) or an array of rows.
inline Mat mat_from_json(const json& j, const std::string& where) {
    if (j.is_number()) return Mat::Constant(1, 1, j.get<double>());
    if (!j.is_array() || j.empty()) throw InvalidArgument(where + ": expected a matrix (array of rows)");
    if (!j[0].is_array()) {
        const Vec v = vec_from_json(j, where);
        return v.transpose();
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    if (cols == 0) throw InvalidArgument(where + ": empty row");
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw InvalidArgument(where + ": ragged matrix at row " + std::to_string(i));
        }
        for (Eigen::Index k = 0; k < cols; ++k) {
            m(i, k) = real_from_json(row[static_cast<std::size_t>(k)], where);
        }
    }
    if (!m.allFinite()) throw InvalidArgument(where + ": non-finite entry");
    return m;
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where = "") {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidArgument((where.empty() ? std::string() : where + ".") + key + ": wrong type");
    }
}

}  // namespace sa_steady
