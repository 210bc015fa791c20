#include "dehaze/datasets.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "dehaze/image_io.hpp"
#include "dehaze/rng.hpp"

namespace dehaze {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kMinSceneSize = 16;

struct Shape {
    bool ellipse = false;
    double cy = 0, cx = 0, ry = 0, rx = 0;
    double color[3] = {0, 0, 0};
    double depth = 0;
    double tex_amp = 0, tex_fy = 0, tex_fx = 0, tex_phase = 0;
};

void sample_saturated_color(Rng& rng, double* color, double min_spread) {
    for (;;) {
        for (int c = 0; c < 3; ++c) color[c] = rng.uniform(0.05, 0.95);
        const double mx = std::max({color[0], color[1], color[2]});
        const double mn = std::min({color[0], color[1], color[2]});
        if (mx - mn >= min_spread) return;
    }
}

Tensor box_blur3(const Tensor& map) {
    const int h = map.dim(0), w = map.dim(1);
    Tensor out({h, w, 1});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double s = 0.0;
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj)
                    s += map(std::clamp(i + di, 0, h - 1), std::clamp(j + dj, 0, w - 1), 0);
            out(i, j, 0) = s / 9.0;
        }
    return out;
}

json params_to_json(const SampleSpec& s) {
    return json{{"seed", s.seed},
                {"beta", s.params.beta},
                {"airlight", {s.params.airlight[0], s.params.airlight[1], s.params.airlight[2]}}};
}

SampleSpec params_from_json(const json& j) {
    SampleSpec s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.params.beta = j.at("beta").get<double>();
    const auto& a = j.at("airlight");
    for (int c = 0; c < 3; ++c) s.params.airlight[static_cast<std::size_t>(c)] = a.at(c).get<double>();
    return s;
}

std::string indexed_stem(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%03zu", prefix, i);
    return buf;
}

std::vector<fs::path> sorted_pngs(const fs::path& dir) {
    std::vector<fs::path> files;
    if (!fs::exists(dir)) return files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

void generate_scene(std::uint64_t seed, int height, int width, Tensor& clear, Tensor& depth) {
    if (height < kMinSceneSize || width < kMinSceneSize)
        throw DomainError("generate_scene: size must be at least 16×16");
    Rng rng(seed);

    double c0[3], c1[3];
    sample_saturated_color(rng, c0, 0.2);
    sample_saturated_color(rng, c1, 0.2);
    const double angle = rng.uniform(0.0, 6.283185307179586);
    const double dy = std::sin(angle), dx = std::cos(angle);
    const double bg_amp = rng.uniform(0.02, 0.06);
    const double bg_fy = rng.uniform(0.05, 0.25), bg_fx = rng.uniform(0.05, 0.25);
    const double bg_phase = rng.uniform(0.0, 6.283185307179586);

    const int n_shapes = rng.uniform_int(4, 7);
    std::vector<Shape> shapes(static_cast<std::size_t>(n_shapes));
    for (Shape& s : shapes) {
        s.ellipse = rng.uniform() < 0.5;
        s.cy = rng.uniform(0.1, 0.9) * (height - 1);
        s.cx = rng.uniform(0.1, 0.9) * (width - 1);
        s.ry = rng.uniform(0.08, 0.25) * height;
        s.rx = rng.uniform(0.08, 0.25) * width;
        sample_saturated_color(rng, s.color, 0.3);
        s.depth = rng.uniform(0.05, 0.85);
        s.tex_amp = rng.uniform(0.03, 0.12);
        s.tex_fy = rng.uniform(0.05, 0.3);
        s.tex_fx = rng.uniform(0.05, 0.3);
        s.tex_phase = rng.uniform(0.0, 6.283185307179586);
    }
    // Far shapes first so nearer ones paint over them.
    std::stable_sort(shapes.begin(), shapes.end(),
                     [](const Shape& a, const Shape& b) { return a.depth > b.depth; });

    clear = Tensor({height, width, 3});
    depth = Tensor({height, width, 1});
    const double diag = std::hypot(static_cast<double>(height), static_cast<double>(width));
    for (int i = 0; i < height; ++i) {
        for (int j = 0; j < width; ++j) {
            const double s = 0.5 + (dy * (i - height / 2.0) + dx * (j - width / 2.0)) / diag;
            const double tex = 1.0 + bg_amp * std::sin(bg_fy * i + bg_fx * j + bg_phase);
            for (int c = 0; c < 3; ++c)
                clear(i, j, c) = std::clamp((c0[c] + (c1[c] - c0[c]) * s) * tex, 0.0, 1.0);
            depth(i, j, 0) = 0.6 + 0.4 * static_cast<double>(i) / (height - 1);
        }
    }
    for (const Shape& s : shapes) {
        for (int i = 0; i < height; ++i) {
            for (int j = 0; j < width; ++j) {
                const double ny = (i - s.cy) / s.ry;
                const double nx = (j - s.cx) / s.rx;
                const bool inside =
                    s.ellipse ? (ny * ny + nx * nx <= 1.0)
                              : (std::fabs(ny) <= 1.0 && std::fabs(nx) <= 1.0);
                if (!inside) continue;
                const double tex = 1.0 + s.tex_amp * std::sin(s.tex_fy * i + s.tex_fx * j + s.tex_phase);
                for (int c = 0; c < 3; ++c) clear(i, j, c) = std::clamp(s.color[c] * tex, 0.0, 1.0);
                depth(i, j, 0) = s.depth;
            }
        }
    }
    depth = box_blur3(box_blur3(depth));
    for (double& v : depth.raw()) v = std::clamp(v, 0.0, 1.0);
}

SyntheticSample make_synthetic_pair(const Tensor& clear, const Tensor& depth,
                                    const HazeParams& params) {
    SyntheticSample s;
    s.clear = clear;
    s.depth = depth;
    s.params = params;
    s.hazy = synthesize_haze(clear, transmission_from_depth(depth, params.beta), params);
    return s;
}

RealGenerated generate_real_sample(const SampleSpec& spec, int height, int width) {
    Tensor scene, depth;
    generate_scene(spec.seed, height, width, scene, depth);

    // Scene-level color gain: part of the domain's appearance, so it belongs
    // to the ground truth as well.
    Rng gain_rng(derive_seed(spec.seed, 0x67a1));
    double gain[3];
    for (int c = 0; c < 3; ++c) gain[c] = gain_rng.uniform(0.94, 1.06);
    Tensor gt = scene;
    for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j)
            for (int c = 0; c < 3; ++c) gt(i, j, c) = std::clamp(gt(i, j, c) * gain[c], 0.0, 1.0);

    Tensor hazy = synthesize_haze(gt, transmission_from_depth(depth, spec.params.beta), spec.params);
    Rng noise_rng(derive_seed(spec.seed, 0x4e01));
    for (double& v : hazy.raw()) v = std::clamp(v + noise_rng.normal(0.0, 0.006), 0.0, 1.0);
    return {std::move(hazy), std::move(gt)};
}

DatasetManifest make_desk_manifest(int height, int width, int syn_count, int real_count,
                                   std::uint64_t data_seed) {
    if (syn_count < 1 || real_count < 0)
        throw DomainError("make_desk_manifest: need at least one synthetic sample");
    DatasetManifest m;
    m.height = height;
    m.width = width;
    Rng rng(derive_seed(data_seed, 0xda7a));
    for (int i = 0; i < syn_count; ++i) {
        SampleSpec s;
        s.seed = derive_seed(data_seed, 1, static_cast<std::uint64_t>(i));
        s.params.beta = rng.uniform(0.4, 1.2);
        const double base = rng.uniform(0.8, 0.95);
        for (int c = 0; c < 3; ++c)
            s.params.airlight[static_cast<std::size_t>(c)] =
                std::clamp(base + rng.uniform(-0.02, 0.02), 0.0, 1.0);
        m.synthetic.push_back(s);
    }
    for (int i = 0; i < real_count; ++i) {
        SampleSpec s;
        s.seed = derive_seed(data_seed, 2, static_cast<std::uint64_t>(i));
        s.params.beta = rng.uniform(0.7, 1.7);
        const double base = rng.uniform(0.84, 0.98);
        for (int c = 0; c < 3; ++c)
            s.params.airlight[static_cast<std::size_t>(c)] =
                std::clamp(base + rng.uniform(-0.03, 0.03), 0.0, 1.0);
        m.real.push_back(s);
    }
    return m;
}

Dataset dataset_from_manifest(const DatasetManifest& manifest,
                              std::vector<Tensor>* real_ground_truth) {
    Dataset d;
    d.height = manifest.height;
    d.width = manifest.width;
    for (std::size_t i = 0; i < manifest.synthetic.size(); ++i) {
        const SampleSpec& spec = manifest.synthetic[i];
        Tensor clear, depth;
        generate_scene(spec.seed, manifest.height, manifest.width, clear, depth);
        SyntheticSample s = make_synthetic_pair(clear, depth, spec.params);
        s.stem = indexed_stem("syn", i);
        d.syn.push_back(std::move(s));
    }
    if (real_ground_truth) real_ground_truth->clear();
    for (std::size_t i = 0; i < manifest.real.size(); ++i) {
        RealGenerated g = generate_real_sample(manifest.real[i], manifest.height, manifest.width);
        RealSample s;
        s.hazy = std::move(g.hazy);
        s.stem = indexed_stem("real", i);
        d.real.push_back(std::move(s));
        if (real_ground_truth) real_ground_truth->push_back(std::move(g.ground_truth));
    }
    return d;
}

void write_dataset(const fs::path& root, const DatasetManifest& manifest) {
    Dataset d = dataset_from_manifest(manifest);
    fs::create_directories(root / "syn" / "hazy");
    fs::create_directories(root / "syn" / "clear");
    fs::create_directories(root / "syn" / "depth");
    fs::create_directories(root / "real" / "hazy");
    for (const SyntheticSample& s : d.syn) {
        write_image_rgb8(root / "syn" / "hazy" / (s.stem + ".png"), s.hazy);
        write_image_rgb8(root / "syn" / "clear" / (s.stem + ".png"), s.clear);
        write_depth_u16(root / "syn" / "depth" / (s.stem + ".png"), s.depth);
    }
    for (const RealSample& s : d.real)
        write_image_rgb8(root / "real" / "hazy" / (s.stem + ".png"), s.hazy);
    write_manifest(root / "manifest.json", manifest);
}

DatasetManifest read_manifest(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot read manifest: " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + file.string() + ": " + e.what());
    }
    DatasetManifest m;
    m.height = j.at("height").get<int>();
    m.width = j.at("width").get<int>();
    for (const auto& e : j.at("synthetic")) m.synthetic.push_back(params_from_json(e));
    for (const auto& e : j.at("real")) m.real.push_back(params_from_json(e));
    return m;
}

void write_manifest(const fs::path& file, const DatasetManifest& manifest) {
    json j;
    j["height"] = manifest.height;
    j["width"] = manifest.width;
    j["synthetic"] = json::array();
    for (const SampleSpec& s : manifest.synthetic) j["synthetic"].push_back(params_to_json(s));
    j["real"] = json::array();
    for (const SampleSpec& s : manifest.real) j["real"].push_back(params_to_json(s));
    std::ofstream out(file);
    if (!out) throw IoError("cannot write manifest: " + file.string());
    out << j.dump(2) << "\n";
}

double eq1_residual(const SyntheticSample& sample) {
    if (!sample.params) throw DomainError("eq1_residual: sample has no haze parameters");
    const Tensor resynth = synthesize_haze(
        sample.clear, transmission_from_depth(sample.depth, sample.params->beta), *sample.params);
    return max_abs_diff(sample.hazy, resynth);
}

Dataset load_dataset(const fs::path& root) {
    if (!fs::exists(root)) throw IoError("dataset root does not exist: " + root.string());

    std::map<std::string, SampleSpec> syn_params;
    const fs::path manifest_file = root / "manifest.json";
    DatasetManifest manifest;
    bool have_manifest = false;
    if (fs::exists(manifest_file)) {
        manifest = read_manifest(manifest_file);
        have_manifest = true;
        for (std::size_t i = 0; i < manifest.synthetic.size(); ++i)
            syn_params[indexed_stem("syn", i)] = manifest.synthetic[i];
    }

    Dataset d;
    for (const fs::path& hazy_path : sorted_pngs(root / "syn" / "hazy")) {
        const std::string stem = hazy_path.stem().string();
        const fs::path clear_path = root / "syn" / "clear" / (stem + ".png");
        const fs::path depth_path = root / "syn" / "depth" / (stem + ".png");
        if (!fs::exists(clear_path))
            throw IoError("missing clear image for synthetic sample: " + clear_path.string());
        if (!fs::exists(depth_path))
            throw IoError("missing depth map for synthetic sample: " + depth_path.string());
        SyntheticSample s;
        s.hazy = read_image_rgb8(hazy_path);
        s.clear = read_image_rgb8(clear_path);
        s.depth = read_depth_u16(depth_path);
        s.stem = stem;
        if (!s.clear.same_shape(s.hazy) || s.depth.dim(0) != s.hazy.dim(0) ||
            s.depth.dim(1) != s.hazy.dim(1))
            throw IoError("inconsistent sizes in synthetic triplet: " + hazy_path.string());
        auto it = syn_params.find(stem);
        if (it != syn_params.end()) {
            s.params = it->second.params;
            const double resid = eq1_residual(s);
            if (resid > 2.0 / 255.0)
                throw IoError("hazing identity violated (residual " + std::to_string(resid) +
                              ") for " + hazy_path.string());
        }
        d.syn.push_back(std::move(s));
    }
    for (const fs::path& hazy_path : sorted_pngs(root / "real" / "hazy")) {
        RealSample s;
        s.hazy = read_image_rgb8(hazy_path);
        s.stem = hazy_path.stem().string();
        d.real.push_back(std::move(s));
    }
    if (d.syn.empty() && d.real.empty()) throw IoError("empty dataset at " + root.string());

    const Tensor& first = d.syn.empty() ? d.real.front().hazy : d.syn.front().hazy;
    d.height = first.dim(0);
    d.width = first.dim(1);
    (void)have_manifest;
    return d;
}

CropWindow pick_crop(int image_h, int image_w, int crop_h, int crop_w, std::uint64_t seed) {
    if (crop_h < 1 || crop_w < 1 || crop_h > image_h || crop_w > image_w)
        throw DomainError("pick_crop: crop larger than image");
    Rng rng(derive_seed(seed, 0xc409));
    CropWindow win;
    win.h = crop_h;
    win.w = crop_w;
    win.oy = rng.uniform_int(0, image_h - crop_h);
    win.ox = rng.uniform_int(0, image_w - crop_w);
    return win;
}

Tensor apply_crop(const Tensor& hwc, const CropWindow& win) {
    const int c = hwc.dim(2);
    Tensor out({win.h, win.w, c});
    for (int i = 0; i < win.h; ++i)
        for (int j = 0; j < win.w; ++j)
            for (int k = 0; k < c; ++k) out(i, j, k) = hwc(win.oy + i, win.ox + j, k);
    return out;
}

TrainSample crop_and_normalize(const SyntheticSample& s, int crop_h, int crop_w,
                               std::uint64_t seed) {
    const CropWindow win = pick_crop(s.hazy.dim(0), s.hazy.dim(1), crop_h, crop_w, seed);
    TrainSample out;
    out.hazy_net = to_network_space(apply_crop(s.hazy, win));
    out.clear_net = to_network_space(apply_crop(s.clear, win));
    out.depth = apply_crop(s.depth, win);
    return out;
}

TrainSample crop_and_normalize(const RealSample& s, int crop_h, int crop_w, std::uint64_t seed) {
    const CropWindow win = pick_crop(s.hazy.dim(0), s.hazy.dim(1), crop_h, crop_w, seed);
    TrainSample out;
    out.hazy_net = to_network_space(apply_crop(s.hazy, win));
    return out;
}

std::vector<std::vector<int>> epoch_batches(int count, int batch_size, std::uint64_t seed) {
    if (count < 1 || batch_size < 1) throw DomainError("epoch_batches: need count and batch >= 1");
    std::vector<int> order(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(derive_seed(seed, 0x50f1));
    for (int i = count - 1; i > 0; --i)
        std::swap(order[static_cast<std::size_t>(i)],
                  order[static_cast<std::size_t>(rng.uniform_int(0, i))]);
    std::vector<std::vector<int>> batches;
    for (int start = 0; start + batch_size <= count; start += batch_size)
        batches.emplace_back(order.begin() + start, order.begin() + start + batch_size);
    return batches;
}

}  // namespace dehaze
