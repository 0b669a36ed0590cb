#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace safepatch {

// Flat key=value configuration validated against a fixed schema; unknown
// keys are rejected. '#' starts a comment, blank lines are ignored.
class RunConfig {
public:
    RunConfig();  // defaults only

    static RunConfig from_file(const std::string& path);
    static RunConfig from_string(const std::string& text);

    // Validated override (CLI flags funnel through here).
    void set(const std::string& key, const std::string& value);
    bool is_set(const std::string& key) const;  // explicitly, beyond default

    int64_t get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    uint64_t get_u64(const std::string& key) const;
    const std::string& get_str(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<int64_t> get_int_list(const std::string& key) const;
    std::vector<uint64_t> get_u64_list(const std::string& key) const;

    std::string dump() const;  // every key, sorted

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, bool> explicit_;
};

} // namespace safepatch
