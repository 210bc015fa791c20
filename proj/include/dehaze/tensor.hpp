#pragma once

#include <cstddef>
#include <cstdlib>
#include <initializer_list>
#include <new>
#include <vector>

#include "dehaze/errors.hpp"

namespace dehaze {

// 64-byte-aligned storage keeps vectorized kernels on the same code path for
// every allocation, which makes floating-point results independent of heap
// layout (bit-identical reruns).
template <typename T, std::size_t Align = 64>
struct AlignedAllocator {
    using value_type = T;
    template <typename U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };
    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) {}
    T* allocate(std::size_t n) {
        const std::size_t bytes = ((n * sizeof(T) + Align - 1) / Align) * Align;
        void* p = std::aligned_alloc(Align, bytes);
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { std::free(p); }
    bool operator==(const AlignedAllocator&) const { return true; }
    bool operator!=(const AlignedAllocator&) const { return false; }
};

using AlignedVec = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major double tensor. Image maps use H×W×C, network activations
/// and parameters use N×C×H×W / Cout×Cin×Kh×Kw.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(count(shape_), 0.0);
    }

    static Tensor full(std::vector<int> shape, double value) {
        Tensor t(std::move(shape));
        for (double& v : t.data_) v = value;
        return t;
    }

    static Tensor from(std::vector<int> shape, const std::vector<double>& data) {
        Tensor t;
        if (count(shape) != data.size()) throw DimensionError("tensor data does not match shape");
        t.shape_ = std::move(shape);
        t.data_.assign(data.begin(), data.end());
        return t;
    }

    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    AlignedVec& raw() { return data_; }
    const AlignedVec& raw() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& operator()(int a) { return data_[static_cast<std::size_t>(a)]; }
    double operator()(int a) const { return data_[static_cast<std::size_t>(a)]; }

    double& operator()(int a, int b) {
        return data_[static_cast<std::size_t>(a) * shape_[1] + b];
    }
    double operator()(int a, int b) const {
        return data_[static_cast<std::size_t>(a) * shape_[1] + b];
    }

    double& operator()(int a, int b, int c) {
        return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
    }
    double operator()(int a, int b, int c) const {
        return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
    }

    double& operator()(int a, int b, int c, int d) {
        return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] +
                     d];
    }
    double operator()(int a, int b, int c, int d) const {
        return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] +
                     d];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    static std::size_t count(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw DimensionError("tensor dimensions must be positive");
            n *= static_cast<std::size_t>(d);
        }
        return shape.empty() ? 0 : n;
    }

private:
    std::vector<int> shape_;
    AlignedVec data_;
};

bool all_finite(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool bitwise_equal(const Tensor& a, const Tensor& b);

/// H×W×C <-> single-sample C×H×W layout swaps, and N-stacking for batches.
Tensor hwc_to_chw(const Tensor& hwc);
Tensor chw_to_hwc(const Tensor& chw);
Tensor stack_hwc(const std::vector<Tensor>& images);  // -> N×C×H×W
Tensor nth_hwc(const Tensor& nchw, int n);            // -> H×W×C

/// Storage space [0,1] <-> network space [-1,1].
Tensor to_network_space(const Tensor& t);
Tensor to_storage_space(const Tensor& t);

}  // namespace dehaze
