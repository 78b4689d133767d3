#include "jsonio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "onode/errors.hpp"

namespace onode {

namespace {

void emit(const nlohmann::json& v, std::string& out, int indent, int depth) {
    const auto newline = [&](int d) {
        if (indent >= 0) {
            out.push_back('\n');
            out.append(static_cast<std::size_t>(indent * d), ' ');
        }
    };
    switch (v.type()) {
        case nlohmann::json::value_t::object: {
            if (v.empty()) {
                out += "{}";
                return;
            }
            out.push_back('{');
            bool first = true;
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (!first) out.push_back(',');
                first = false;
                newline(depth + 1);
                out += nlohmann::json(it.key()).dump();
                out += indent >= 0 ? ": " : ":";
                emit(it.value(), out, indent, depth + 1);
            }
            newline(depth);
            out.push_back('}');
            return;
        }
        case nlohmann::json::value_t::array: {
            if (v.empty()) {
                out += "[]";
                return;
            }
            out.push_back('[');
            bool first = true;
            for (const auto& item : v) {
                if (!first) out.push_back(',');
                first = false;
                newline(depth + 1);
                emit(item, out, indent, depth + 1);
            }
            newline(depth);
            out.push_back(']');
            return;
        }
        case nlohmann::json::value_t::number_float: {
            const double d = v.get<double>();
            if (!std::isfinite(d))
                throw NumericError("JSON emit: non-finite number");
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", d);
            out += buf;
            return;
        }
        default:
            out += v.dump();
            return;
    }
}

} // namespace

std::string dump_json_17(const nlohmann::json& value, int indent) {
    std::string out;
    emit(value, out, indent, 0);
    if (indent >= 0) out.push_back('\n');
    return out;
}

nlohmann::json parse_json(const std::string& text, const std::string& where) {
    nlohmann::json parsed = nlohmann::json::parse(text, nullptr, false);
    if (parsed.is_discarded()) throw ParseError(where + ": malformed JSON");
    return parsed;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failure on " + path);
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write failure on " + path);
}

} // namespace onode
