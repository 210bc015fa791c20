#include "dehaze/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace dehaze {

namespace {

constexpr char kMagic[8] = {'D', 'H', 'Z', 'C', '0', '0', '0', '1'};

void put_bytes(std::vector<unsigned char>& buf, const void* p, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    buf.insert(buf.end(), b, b + n);
}

template <typename T>
void put(std::vector<unsigned char>& buf, T v) {
    put_bytes(buf, &v, sizeof(T));
}

struct Reader {
    const unsigned char* p;
    std::size_t remaining;
    std::string path;

    void take(void* dst, std::size_t n) {
        if (n > remaining)
            throw IntegrityError("truncated checkpoint file: " + path);
        std::memcpy(dst, p, n);
        p += n;
        remaining -= n;
    }
    template <typename T>
    T get() {
        T v;
        take(&v, sizeof(T));
        return v;
    }
};

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

void write_container(const std::filesystem::path& path,
                     const std::map<std::string, Tensor>& arrays, const nlohmann::json& manifest,
                     Dtype dtype) {
    std::vector<unsigned char> buf;
    put_bytes(buf, kMagic, sizeof(kMagic));
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(arrays.size()));
    for (const auto& [name, t] : arrays) {
        if (name.size() > 0xffff) throw DomainError("array name too long: " + name);
        put<std::uint16_t>(buf, static_cast<std::uint16_t>(name.size()));
        put_bytes(buf, name.data(), name.size());
        put<std::uint8_t>(buf, dtype == Dtype::F32 ? 0 : 1);
        put<std::uint8_t>(buf, static_cast<std::uint8_t>(t.ndim()));
        for (int d = 0; d < t.ndim(); ++d)
            put<std::uint32_t>(buf, static_cast<std::uint32_t>(t.dim(d)));
        if (dtype == Dtype::F32) {
            for (double v : t.raw()) put<float>(buf, static_cast<float>(v));
        } else {
            put_bytes(buf, t.data(), t.size() * sizeof(double));
        }
    }
    const std::string m = manifest.dump();
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(m.size()));
    put_bytes(buf, m.data(), m.size());
    put<std::uint64_t>(buf, fnv1a64(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed for checkpoint: " + path.string());
}

Container read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint: " + path.string());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < sizeof(kMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t))
        throw IntegrityError("truncated checkpoint file: " + path.string());

    const std::size_t body = buf.size() - sizeof(std::uint64_t);
    std::uint64_t stored;
    std::memcpy(&stored, buf.data() + body, sizeof(stored));
    if (fnv1a64(buf.data(), body) != stored)
        throw IntegrityError("checksum mismatch in checkpoint: " + path.string());

    Reader r{buf.data(), body, path.string()};
    char magic[8];
    r.take(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IntegrityError("bad magic in checkpoint: " + path.string());

    Container c;
    const std::uint32_t count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = r.get<std::uint16_t>();
        std::string name(name_len, '\0');
        r.take(name.data(), name_len);
        const std::uint8_t dtype = r.get<std::uint8_t>();
        if (dtype > 1) throw IntegrityError("unknown dtype in checkpoint: " + path.string());
        const std::uint8_t ndim = r.get<std::uint8_t>();
        std::vector<int> shape(ndim);
        for (std::uint8_t d = 0; d < ndim; ++d)
            shape[d] = static_cast<int>(r.get<std::uint32_t>());
        Tensor t(shape);
        if (dtype == 0) {
            for (std::size_t k = 0; k < t.size(); ++k) t[k] = static_cast<double>(r.get<float>());
        } else {
            r.take(t.data(), t.size() * sizeof(double));
        }
        if (!all_finite(t))
            throw IntegrityError("non-finite values in checkpoint array " + name + ": " +
                                 path.string());
        c.arrays.emplace(std::move(name), std::move(t));
    }
    const std::uint32_t mlen = r.get<std::uint32_t>();
    std::string m(mlen, '\0');
    r.take(m.data(), mlen);
    if (r.remaining != 0) throw IntegrityError("trailing bytes in checkpoint: " + path.string());
    try {
        c.manifest = nlohmann::json::parse(m);
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError("malformed checkpoint manifest in " + path.string() + ": " + e.what());
    }
    return c;
}

void save_params(const std::filesystem::path& path, const ParamSet& params,
                 const nlohmann::json& manifest, Dtype dtype) {
    write_container(path, params.entries(), manifest, dtype);
}

ParamSet load_params(const std::filesystem::path& path, nlohmann::json* manifest) {
    Container c = read_container(path);
    ParamSet p;
    for (auto& [name, t] : c.arrays) p.add(name, std::move(t));
    if (manifest) *manifest = c.manifest;
    return p;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::map<std::string, Tensor> arrays;
    for (const auto& [net, params] : ckpt.nets)
        for (const auto& [name, t] : params.entries()) arrays.emplace("net." + net + "/" + name, t);
    nlohmann::json opt_steps = nlohmann::json::object();
    for (const auto& [net, state] : ckpt.opt) {
        for (const auto& [name, t] : state.m) arrays.emplace("opt." + net + ".m/" + name, t);
        for (const auto& [name, t] : state.v) arrays.emplace("opt." + net + ".v/" + name, t);
        opt_steps[net] = state.t;
    }
    nlohmann::json manifest{{"step", ckpt.step},
                            {"phase", ckpt.phase},
                            {"epoch", ckpt.epoch},
                            {"step_in_epoch", ckpt.step_in_epoch},
                            {"mode", ckpt.mode},
                            {"config_hash", ckpt.config_hash},
                            {"config", ckpt.config_snapshot},
                            {"opt_steps", opt_steps}};
    write_container(path, arrays, manifest, Dtype::F64);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    Container c = read_container(path);
    Checkpoint ckpt;
    ckpt.step = c.manifest.at("step").get<std::uint64_t>();
    ckpt.phase = c.manifest.at("phase").get<int>();
    ckpt.epoch = c.manifest.at("epoch").get<int>();
    ckpt.step_in_epoch = c.manifest.at("step_in_epoch").get<int>();
    ckpt.mode = c.manifest.at("mode").get<std::string>();
    ckpt.config_hash = c.manifest.at("config_hash").get<std::string>();
    ckpt.config_snapshot = c.manifest.at("config");
    for (auto& [full, t] : c.arrays) {
        const std::size_t slash = full.find('/');
        if (slash == std::string::npos)
            throw IntegrityError("unrecognized array name in checkpoint: " + full);
        const std::string group = full.substr(0, slash);
        const std::string name = full.substr(slash + 1);
        if (group.rfind("net.", 0) == 0) {
            ckpt.nets[group.substr(4)].add(name, std::move(t));
        } else if (group.rfind("opt.", 0) == 0) {
            std::string rest = group.substr(4);
            if (rest.size() > 2 && rest.compare(rest.size() - 2, 2, ".m") == 0)
                ckpt.opt[rest.substr(0, rest.size() - 2)].m.emplace(name, std::move(t));
            else if (rest.size() > 2 && rest.compare(rest.size() - 2, 2, ".v") == 0)
                ckpt.opt[rest.substr(0, rest.size() - 2)].v.emplace(name, std::move(t));
            else
                throw IntegrityError("unrecognized optimizer array in checkpoint: " + full);
        } else {
            throw IntegrityError("unrecognized array group in checkpoint: " + full);
        }
    }
    for (auto& [net, state] : ckpt.opt)
        state.t = c.manifest.at("opt_steps").at(net).get<std::uint64_t>();
    return ckpt;
}

}  // namespace dehaze
