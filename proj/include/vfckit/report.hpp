#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "vfckit/linalg.hpp"

namespace vfckit {

using Json = nlohmann::ordered_json;

// One named check inside a diagnostic report. Residual is the measured
// quantity, tolerance the gate it was held to, witness an optional point
// where the worst violation (or confirmation) was seen.
struct CheckItem {
    std::string name;
    bool pass = true;
    double residual = 0.0;
    double tolerance = 0.0;
    std::string witness;
    std::string note;

    Json to_json() const {
        Json j;
        j["name"] = name;
        j["pass"] = pass;
        j["residual"] = residual;
        j["tolerance"] = tolerance;
        if (!witness.empty()) j["witness"] = witness;
        if (!note.empty()) j["note"] = note;
        return j;
    }
};

struct Report {
    std::string subject;
    std::vector<CheckItem> items;
    Json extra;  // command-specific payload (counts, ladders, ...)

    bool all_pass() const {
        for (const auto& i : items)
            if (!i.pass) return false;
        return true;
    }

    CheckItem& add(const std::string& name, bool pass, double residual, double tol,
                   const std::string& witness = "", const std::string& note = "") {
        items.push_back({name, pass, residual, tol, witness, note});
        return items.back();
    }

    CheckItem& add_residual(const std::string& name, double residual, double tol,
                            const std::string& witness = "") {
        return add(name, residual <= tol, residual, tol, witness);
    }

    void merge(const Report& other, const std::string& prefix = "") {
        for (auto item : other.items) {
            if (!prefix.empty()) item.name = prefix + "." + item.name;
            items.push_back(std::move(item));
        }
    }

    double max_residual() const {
        double m = 0.0;
        for (const auto& i : items) m = std::max(m, i.residual);
        return m;
    }

    Json to_json() const {
        Json j;
        j["subject"] = subject;
        j["pass"] = all_pass();
        Json arr = Json::array();
        for (const auto& i : items) arr.push_back(i.to_json());
        j["checks"] = arr;
        if (!extra.is_null()) j["extra"] = extra;
        return j;
    }
};

inline std::string point_str(const Vec& x) {
    std::string s = "(";
    for (int i = 0; i < x.size(); ++i) {
        if (i) s += ", ";
        char buf[32];
        snprintf(buf, sizeof buf, "%.6g", x[i]);
        s += buf;
    }
    return s + ")";
}

}  // namespace vfckit
