#include "dehaze/tensor.hpp"

#include <cmath>
#include <cstring>

namespace dehaze {

bool all_finite(const Tensor& t) {
    for (double v : t.raw()) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimensionError("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

Tensor hwc_to_chw(const Tensor& hwc) {
    if (hwc.ndim() != 3) throw DimensionError("hwc_to_chw expects H×W×C");
    const int h = hwc.dim(0), w = hwc.dim(1), c = hwc.dim(2);
    Tensor out({c, h, w});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int k = 0; k < c; ++k) out(k, i, j) = hwc(i, j, k);
    return out;
}

Tensor chw_to_hwc(const Tensor& chw) {
    if (chw.ndim() != 3) throw DimensionError("chw_to_hwc expects C×H×W");
    const int c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
    Tensor out({h, w, c});
    for (int k = 0; k < c; ++k)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) out(i, j, k) = chw(k, i, j);
    return out;
}

Tensor stack_hwc(const std::vector<Tensor>& images) {
    if (images.empty()) throw DimensionError("stack_hwc: empty batch");
    const int h = images[0].dim(0), w = images[0].dim(1), c = images[0].dim(2);
    Tensor out({static_cast<int>(images.size()), c, h, w});
    for (std::size_t n = 0; n < images.size(); ++n) {
        if (!images[n].same_shape(images[0]))
            throw DimensionError("stack_hwc: inconsistent image shapes");
        for (int k = 0; k < c; ++k)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    out(static_cast<int>(n), k, i, j) = images[n](i, j, k);
    }
    return out;
}

Tensor nth_hwc(const Tensor& nchw, int n) {
    if (nchw.ndim() != 4) throw DimensionError("nth_hwc expects N×C×H×W");
    const int c = nchw.dim(1), h = nchw.dim(2), w = nchw.dim(3);
    Tensor out({h, w, c});
    for (int k = 0; k < c; ++k)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) out(i, j, k) = nchw(n, k, i, j);
    return out;
}

Tensor to_network_space(const Tensor& t) {
    Tensor out = t;
    for (double& v : out.raw()) v = 2.0 * v - 1.0;
    return out;
}

Tensor to_storage_space(const Tensor& t) {
    Tensor out = t;
    for (double& v : out.raw()) v = 0.5 * (v + 1.0);
    return out;
}

}  // namespace dehaze
