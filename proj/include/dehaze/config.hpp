#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace dehaze {

/// Flat key=value run configuration. '#' starts a comment; whitespace around
/// keys and values is trimmed. Unknown keys are rejected so typos surface.
class Config {
public:
    static Config defaults();
    static Config from_file(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    const std::string& get_str(const std::string& key) const;
    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;

    /// Sorted key=value lines; the echoed effective config and the hash input.
    std::string serialize() const;
    std::string hash() const;
    void write(const std::filesystem::path& path) const;

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace dehaze
