#pragma once

#include <cstdint>
#include <functional>
#include <string>

namespace agcn::kv {

// Helpers shared by the flat `key = value` config formats. Every parse error is
// a ConfigError naming the key.

double parse_double(const std::string& key, const std::string& value);
std::uint64_t parse_uint(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
std::string trim(const std::string& s);
/// %.17g, so values survive a text round trip.
std::string format_double(double v);

/// Calls `apply(key, value)` for every non-blank line; '#' starts a comment.
void for_each_entry(const std::string& text,
                    const std::function<void(const std::string&, const std::string&)>& apply);

/// prefix + key in upper case, e.g. ("AGCN_", "batch_size") -> "AGCN_BATCH_SIZE".
std::string env_name(const std::string& prefix, const std::string& key);

}  // namespace agcn::kv
