#include "msfem/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "msfem/hash.hpp"
#include "toml.hpp"

namespace msfem {

namespace {

nlohmann::json to_json(const toml::node& node) {
    if (const auto* t = node.as_table()) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [k, v] : *t) out[std::string(k.str())] = to_json(v);
        return out;
    }
    if (const auto* a = node.as_array()) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& v : *a) out.push_back(to_json(v));
        return out;
    }
    if (const auto* s = node.as_string()) return s->get();
    if (const auto* i = node.as_integer()) return i->get();
    if (const auto* f = node.as_floating_point()) return f->get();
    if (const auto* b = node.as_boolean()) return b->get();
    throw ConfigError("unsupported TOML value type (dates are not accepted)");
}

}  // namespace

nlohmann::json parse_toml(std::string_view text, std::string_view source) {
    try {
        const toml::table table = toml::parse(text, source);
        return to_json(table);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << source << ": " << e.description() << " (line " << e.source().begin.line << ")";
        throw ConfigError(msg.str());
    }
}

nlohmann::json load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    const bool json_ext = path.extension() == ".json";
    auto first = std::find_if(text.begin(), text.end(), [](char c) { return !std::isspace(static_cast<unsigned char>(c)); });
    const bool looks_json = first != text.end() && *first == '{';
    if (json_ext || looks_json) {
        try {
            return nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            if (json_ext) throw ConfigError(path.string() + ": " + e.what());
        }
    }
    return parse_toml(text, path.string());
}

void require_known_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                        std::string_view context) {
    if (!obj.is_object()) throw ConfigError(std::string(context) + ": expected a table");
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError(std::string(context) + ": unknown key '" + key + "'");
        }
    }
}

double get_number(const nlohmann::json& obj, std::string_view key, double fallback) {
    const auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number()) throw ConfigError("key '" + std::string(key) + "' must be a number");
    return it->get<double>();
}

int get_int(const nlohmann::json& obj, std::string_view key, int fallback) {
    const auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_integer()) throw ConfigError("key '" + std::string(key) + "' must be an integer");
    return it->get<int>();
}

std::string get_string(const nlohmann::json& obj, std::string_view key, std::string_view fallback) {
    const auto it = obj.find(key);
    if (it == obj.end()) return std::string(fallback);
    if (!it->is_string()) throw ConfigError("key '" + std::string(key) + "' must be a string");
    return it->get<std::string>();
}

std::uint64_t config_hash(const nlohmann::json& j) {
    // nlohmann::json objects are std::map backed, so dump() is key-sorted.
    Fnv1a h;
    h.text(j.dump());
    return h.digest();
}

}  // namespace msfem
