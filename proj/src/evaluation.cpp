#include "dehaze/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dehaze/dehazing.hpp"

namespace dehaze {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_kernel() {
    std::vector<double> k(kSsimWindow);
    const int r = kSsimWindow / 2;
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - r;
        k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable valid-region filter of an h×w plane: rows then columns.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w,
                                 const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int wo = w - n + 1;
    const int ho = h - n + 1;
    std::vector<double> rows(static_cast<std::size_t>(h) * wo);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < wo; ++j) {
            double s = 0.0;
            for (int u = 0; u < n; ++u) s += plane[static_cast<std::size_t>(i) * w + j + u] * k[static_cast<std::size_t>(u)];
            rows[static_cast<std::size_t>(i) * wo + j] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(ho) * wo);
    for (int i = 0; i < ho; ++i)
        for (int j = 0; j < wo; ++j) {
            double s = 0.0;
            for (int u = 0; u < n; ++u) s += rows[static_cast<std::size_t>(i + u) * wo + j] * k[static_cast<std::size_t>(u)];
            out[static_cast<std::size_t>(i) * wo + j] = s;
        }
    return out;
}

}  // namespace

double psnr(const Tensor& pred01, const Tensor& ref01) {
    if (!pred01.same_shape(ref01)) throw DimensionError("psnr: shape mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < pred01.size(); ++i) {
        const double d = pred01[i] - ref01[i];
        mse += d * d;
    }
    mse /= static_cast<double>(pred01.size());
    if (mse <= 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Tensor& pred01, const Tensor& ref01) {
    if (!pred01.same_shape(ref01)) throw DimensionError("ssim: shape mismatch");
    if (pred01.ndim() != 3) throw DimensionError("ssim: expected H×W×C");
    const int h = pred01.dim(0), w = pred01.dim(1), ch = pred01.dim(2);
    if (h < kSsimWindow || w < kSsimWindow)
        throw DomainError("ssim: image smaller than the 11×11 window");
    const std::vector<double> k = gaussian_kernel();

    double channel_sum = 0.0;
    std::vector<double> x(static_cast<std::size_t>(h) * w), y(x.size()), xx(x.size()), yy(x.size()),
        xy(x.size());
    for (int c = 0; c < ch; ++c) {
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const double a = pred01(i, j, c);
                const double b = ref01(i, j, c);
                const std::size_t idx = static_cast<std::size_t>(i) * w + j;
                x[idx] = a;
                y[idx] = b;
                xx[idx] = a * a;
                yy[idx] = b * b;
                xy[idx] = a * b;
            }
        const auto mu_x = filter_valid(x, h, w, k);
        const auto mu_y = filter_valid(y, h, w, k);
        const auto m_xx = filter_valid(xx, h, w, k);
        const auto m_yy = filter_valid(yy, h, w, k);
        const auto m_xy = filter_valid(xy, h, w, k);
        double s = 0.0;
        for (std::size_t i = 0; i < mu_x.size(); ++i) {
            const double vx = m_xx[i] - mu_x[i] * mu_x[i];
            const double vy = m_yy[i] - mu_y[i] * mu_y[i];
            const double cov = m_xy[i] - mu_x[i] * mu_y[i];
            s += ((2.0 * mu_x[i] * mu_y[i] + kC1) * (2.0 * cov + kC2)) /
                 ((mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + kC1) * (vx + vy + kC2));
        }
        channel_sum += s / static_cast<double>(mu_x.size());
    }
    return channel_sum / ch;
}

Domain domain_from_string(const std::string& s) {
    if (s == "real") return Domain::Real;
    if (s == "synthetic" || s == "syn") return Domain::Synthetic;
    throw DomainError("unknown domain: " + s + " (expected real|synthetic)");
}

Tensor run_inference(const Tensor& hazy01, const Checkpoint& ckpt, Domain domain,
                     std::string* used_network) {
    const std::string net = domain == Domain::Real ? "gr" : "gs";
    if (used_network) *used_network = net;
    auto it = ckpt.nets.find(net);
    if (it == ckpt.nets.end())
        throw DomainError("checkpoint has no dehazing network " + net);
    const Tensor batch = stack_hwc({to_network_space(hazy01)});
    const DehazeResult out = dehaze(it->second, batch);
    return to_storage_space(nth_hwc(out.prediction, 0));
}

void write_ablation_table(const std::filesystem::path& path,
                          const std::vector<AblationRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write ablation table: " + path.string());
    out << "mode,psnr_mean,ssim_mean,steps,seed\n";
    char line[160];
    for (const AblationRow& r : rows) {
        std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%llu,%llu\n", r.mode.c_str(), r.psnr_mean,
                      r.ssim_mean, static_cast<unsigned long long>(r.steps),
                      static_cast<unsigned long long>(r.seed));
        out << line;
    }
    // Full-scale reference points, for context only.
    out << "# reference-256: SYN 25.67/0.8801, FULL 27.76/0.9284\n";
}

std::vector<AblationRow> run_ablation(const Dataset& train_data, const Dataset& val_data,
                                      const std::vector<AblationMode>& modes,
                                      const TrainConfig& cfg, TrainLogger* log) {
    if (val_data.syn.empty()) throw DomainError("run_ablation: validation set has no synthetic samples");
    std::vector<AblationRow> rows;

    AblationRow baseline;
    baseline.mode = "BASELINE-HAZY";
    baseline.seed = cfg.seed;
    for (const SyntheticSample& s : val_data.syn) {
        baseline.psnr_mean += psnr(s.hazy, s.clear);
        baseline.ssim_mean += ssim(s.hazy, s.clear);
    }
    baseline.psnr_mean /= static_cast<double>(val_data.syn.size());
    baseline.ssim_mean /= static_cast<double>(val_data.syn.size());
    rows.push_back(baseline);

    for (AblationMode m : modes) {
        TrainConfig mode_cfg = cfg;
        mode_cfg.mode = m;
        const Checkpoint ck = run_schedule(train_data, mode_cfg, log);
        const Domain domain = primary_network(m) == "gr" ? Domain::Real : Domain::Synthetic;
        AblationRow row;
        row.mode = to_string(m);
        row.steps = ck.step;
        row.seed = cfg.seed;
        for (const SyntheticSample& s : val_data.syn) {
            const Tensor pred = run_inference(s.hazy, ck, domain);
            row.psnr_mean += psnr(pred, s.clear);
            row.ssim_mean += ssim(pred, s.clear);
        }
        row.psnr_mean /= static_cast<double>(val_data.syn.size());
        row.ssim_mean /= static_cast<double>(val_data.syn.size());
        rows.push_back(row);
    }
    return rows;
}

std::vector<AblationRow> read_ablation_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read ablation table: " + path.string());
    std::vector<AblationRow> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        std::stringstream ss(line);
        AblationRow r;
        std::string field;
        std::getline(ss, r.mode, ',');
        std::getline(ss, field, ',');
        r.psnr_mean = std::stod(field);
        std::getline(ss, field, ',');
        r.ssim_mean = std::stod(field);
        std::getline(ss, field, ',');
        r.steps = std::stoull(field);
        std::getline(ss, field, ',');
        r.seed = std::stoull(field);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace dehaze
