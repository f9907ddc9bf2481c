#include "json_out.hpp"

#include <cmath>
#include <cstdio>

namespace lunarbound::detail {

std::string fmt17(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s(buf);
    // keep it a JSON number that reads back as floating point
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

namespace {

void emit(const ojson& j, int indent, int depth, std::string& out) {
    const std::string pad(static_cast<size_t>(indent * (depth + 1)), ' ');
    const std::string pad_close(static_cast<size_t>(indent * depth), ' ');
    const char* nl = indent > 0 ? "\n" : "";
    switch (j.type()) {
        case ojson::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{";
            out += nl;
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) {
                    out += ",";
                    out += nl;
                }
                first = false;
                out += pad;
                out += ojson(it.key()).dump();
                out += indent > 0 ? ": " : ":";
                emit(it.value(), indent, depth + 1, out);
            }
            out += nl;
            out += pad_close;
            out += "}";
            return;
        }
        case ojson::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += "[";
            out += nl;
            bool first = true;
            for (const auto& v : j) {
                if (!first) {
                    out += ",";
                    out += nl;
                }
                first = false;
                out += pad;
                emit(v, indent, depth + 1, out);
            }
            out += nl;
            out += pad_close;
            out += "]";
            return;
        }
        case ojson::value_t::number_float:
            out += fmt17(j.get<double>());
            return;
        default:
            out += j.dump();
    }
}

}  // namespace

std::string dump17(const ojson& j, int indent) {
    std::string out;
    emit(j, indent, 0, out);
    if (indent > 0) out += "\n";
    return out;
}

}  // namespace lunarbound::detail
