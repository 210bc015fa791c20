#include "dehaze/config.hpp"

#include <cstdio>
#include <fstream>

#include "dehaze/checkpoint.hpp"
#include "dehaze/errors.hpp"

namespace dehaze {

namespace {

std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::defaults() {
    Config c;
    // data
    c.kv_["size"] = "64";
    c.kv_["syn_count"] = "16";
    c.kv_["real_count"] = "16";
    c.kv_["val_syn_count"] = "8";
    c.kv_["val_real_count"] = "8";
    c.kv_["data_seed"] = "7";
    // networks
    c.kv_["width"] = "8";
    c.kv_["res_blocks"] = "9";
    c.kv_["dehazer_stages"] = "3";
    // schedule
    c.kv_["batch_size"] = "2";
    c.kv_["crop"] = "64";
    c.kv_["phase1_epochs"] = "5";
    c.kv_["phase2_epochs"] = "5";
    c.kv_["phase3_epochs"] = "3";
    c.kv_["lr1"] = "5e-5";
    c.kv_["lr2"] = "1e-4";
    c.kv_["lr3"] = "1e-4";
    c.kv_["beta1_phase1"] = "0.5";
    c.kv_["beta1_phase23"] = "0.95";
    c.kv_["beta2"] = "0.999";
    c.kv_["clip_norm"] = "10";
    // loss weights
    c.kv_["lambda_tran"] = "1";
    c.kv_["lambda_m"] = "10";
    c.kv_["lambda_d"] = "0.01";
    c.kv_["lambda_t"] = "0.001";
    c.kv_["lambda_c"] = "0.1";
    c.kv_["lambda_cyc"] = "10";
    c.kv_["lambda_idt"] = "5";
    // pseudo-depth pipeline for real images
    c.kv_["dcp_omega"] = "0.95";
    c.kv_["dcp_patch"] = "9";
    c.kv_["pseudo_beta"] = "1.0";
    c.kv_["pseudo_airlight"] = "0.9";
    // run
    c.kv_["seed"] = "1";
    c.kv_["mode"] = "FULL";
    return c;
}

Config Config::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config: " + path.string());
    Config c = defaults();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

void Config::set(const std::string& key, const std::string& value) {
    if (!kv_.count(key)) throw DomainError("unknown config key: " + key);
    kv_[key] = value;
}

bool Config::has(const std::string& key) const { return kv_.count(key) != 0; }

const std::string& Config::get_str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw DomainError("unknown config key: " + key);
    return it->second;
}

double Config::get_double(const std::string& key) const {
    const std::string& s = get_str(key);
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DomainError("config key " + key + " is not a number: " + s);
    }
}

int Config::get_int(const std::string& key) const {
    const double v = get_double(key);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) throw DomainError("config key " + key + " is not an integer");
    return i;
}

std::uint64_t Config::get_u64(const std::string& key) const {
    const std::string& s = get_str(key);
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DomainError("config key " + key + " is not an unsigned integer: " + s);
    }
}

std::string Config::serialize() const {
    std::string out;
    for (const auto& [k, v] : kv_) {
        out += k;
        out += " = ";
        out += v;
        out += "\n";
    }
    return out;
}

std::string Config::hash() const {
    const std::string s = serialize();
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(s.data(), s.size())));
    return buf;
}

void Config::write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config: " + path.string());
    out << serialize();
}

}  // namespace dehaze
