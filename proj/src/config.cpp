#include "mockless/config.hpp"

#include <cctype>
#include <filesystem>

#include "mockless/util.hpp"

namespace mockless {

namespace {

struct Cursor {
    std::string_view s;
    std::size_t i = 0;
    const std::string& name;
    int line;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(name + ":" + std::to_string(line) + ": " + msg);
    }
    bool done() const { return i >= s.size(); }
    char peek() const { return done() ? '\0' : s[i]; }
    void skip_ws() {
        while (!done() && (s[i] == ' ' || s[i] == '\t')) ++i;
    }
    // trailing whitespace and an optional comment
    void expect_end() {
        skip_ws();
        if (!done() && s[i] != '#') fail("unexpected text after value: '" + std::string(s.substr(i)) + "'");
    }
};

bool bare_key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

std::string basic_string(Cursor& c) {
    ++c.i;  // opening quote
    std::string out;
    while (true) {
        if (c.done()) c.fail("unterminated string");
        char ch = c.s[c.i++];
        if (ch == '"') return out;
        if (ch != '\\') {
            out += ch;
            continue;
        }
        if (c.done()) c.fail("unterminated escape");
        char e = c.s[c.i++];
        switch (e) {
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            case 'r': out += '\r'; break;
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            default: c.fail(std::string("unsupported escape \\") + e);
        }
    }
}

std::string literal_string(Cursor& c) {
    auto end = c.s.find('\'', c.i + 1);
    if (end == std::string_view::npos) c.fail("unterminated string");
    std::string out(c.s.substr(c.i + 1, end - c.i - 1));
    c.i = end + 1;
    return out;
}

std::string key_part(Cursor& c) {
    c.skip_ws();
    if (c.peek() == '"') return basic_string(c);
    if (c.peek() == '\'') return literal_string(c);
    std::size_t b = c.i;
    while (!c.done() && bare_key_char(c.s[c.i])) ++c.i;
    if (b == c.i) c.fail("expected a key");
    return std::string(c.s.substr(b, c.i - b));
}

std::vector<std::string> dotted_key(Cursor& c) {
    std::vector<std::string> parts{key_part(c)};
    c.skip_ws();
    while (c.peek() == '.') {
        ++c.i;
        parts.push_back(key_part(c));
        c.skip_ws();
    }
    return parts;
}

nlohmann::json value(Cursor& c) {
    c.skip_ws();
    char ch = c.peek();
    if (ch == '"') {
        if (c.s.substr(c.i, 3) == "\"\"\"") c.fail("multi-line strings are not supported");
        return basic_string(c);
    }
    if (ch == '\'') return literal_string(c);
    if (ch == '[') {
        ++c.i;
        auto arr = nlohmann::json::array();
        while (true) {
            c.skip_ws();
            if (c.peek() == ']') {
                ++c.i;
                return arr;
            }
            arr.push_back(value(c));
            c.skip_ws();
            if (c.peek() == ',') ++c.i;
            else if (c.peek() != ']') c.fail("expected ',' or ']' in array");
        }
    }
    if (ch == '{') c.fail("inline tables are not supported");
    std::size_t b = c.i;
    while (!c.done() && c.s[c.i] != ',' && c.s[c.i] != ']' && c.s[c.i] != '#' && c.s[c.i] != ' ' && c.s[c.i] != '\t') ++c.i;
    std::string tok(c.s.substr(b, c.i - b));
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits = util::replace_all(tok, "_", "");
    if (digits.empty()) c.fail("expected a value");
    try {
        std::size_t used = 0;
        if (digits.rfind("0x", 0) == 0) {
            long long v = std::stoll(digits.substr(2), &used, 16);
            if (used + 2 == digits.size()) return v;
        } else if (digits.find_first_of(".eE") == std::string::npos) {
            long long v = std::stoll(digits, &used, 10);
            if (used == digits.size()) return v;
        } else {
            double v = std::stod(digits, &used);
            if (used == digits.size()) return v;
        }
    } catch (const std::exception&) {
    }
    c.fail("bad value '" + tok + "'");
}

nlohmann::json& descend(nlohmann::json& root, const std::vector<std::string>& path, Cursor& c) {
    nlohmann::json* node = &root;
    for (const auto& p : path) {
        auto& next = (*node)[p];
        if (next.is_null()) next = nlohmann::json::object();
        if (!next.is_object()) c.fail("'" + p + "' is not a table");
        node = &next;
    }
    return *node;
}

}  // namespace

nlohmann::json parse_toml(std::string_view text, const std::string& name) {
    auto root = nlohmann::json::object();
    nlohmann::json* table = &root;
    std::vector<std::vector<std::string>> seen_tables;
    int lineno = 0;
    for (const auto& raw : util::split_lines(text)) {
        ++lineno;
        Cursor c{raw, 0, name, lineno};
        c.skip_ws();
        if (c.done() || c.peek() == '#') continue;
        if (c.peek() == '[') {
            ++c.i;
            if (c.peek() == '[') c.fail("arrays of tables are not supported");
            auto path = dotted_key(c);
            if (c.peek() != ']') c.fail("expected ']'");
            ++c.i;
            c.expect_end();
            for (const auto& t : seen_tables)
                if (t == path) c.fail("table [" + util::join(path, ".") + "] defined twice");
            seen_tables.push_back(path);
            table = &descend(root, path, c);
            continue;
        }
        auto key = dotted_key(c);
        if (c.peek() != '=') c.fail("expected '='");
        ++c.i;
        auto v = value(c);
        c.expect_end();
        std::vector<std::string> parent(key.begin(), key.end() - 1);
        auto& holder = descend(*table, parent, c);
        if (holder.contains(key.back())) c.fail("duplicate key '" + util::join(key, ".") + "'");
        holder[key.back()] = std::move(v);
    }
    return root;
}

nlohmann::json load_toml(const std::string& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path);
    return parse_toml(util::read_file(path), path);
}

}  // namespace mockless
