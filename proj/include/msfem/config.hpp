#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"
#include "msfem/errors.hpp"

namespace msfem {

/// Invalid or unreadable configuration. The CLI maps it to exit code 2.
class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Parses a TOML file, or JSON when the extension is .json or TOML parsing
/// fails on content that looks like JSON.
nlohmann::json load_config(const std::filesystem::path& path);
nlohmann::json parse_toml(std::string_view text, std::string_view source = "config");

/// Throws ConfigError naming the first key of `obj` not in `allowed`.
void require_known_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                        std::string_view context);

double get_number(const nlohmann::json& obj, std::string_view key, double fallback);
int get_int(const nlohmann::json& obj, std::string_view key, int fallback);
std::string get_string(const nlohmann::json& obj, std::string_view key, std::string_view fallback);

/// Hash of the canonical (key-sorted) serialization; stable under reordering.
std::uint64_t config_hash(const nlohmann::json& j);

}  // namespace msfem
