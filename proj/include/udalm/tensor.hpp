#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace udalm {

/// 64-byte aligned storage. Vectorized reductions peel on the runtime address,
/// so a fixed alignment keeps results bitwise reproducible across allocations.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major array of doubles with a small shape vector.
struct Tensor {
    std::vector<int> shape;
    Buffer data;

    Tensor() = default;
    explicit Tensor(std::vector<int> dims, double fill = 0.0)
        : shape(std::move(dims)), data(count(shape), fill) {}

    static std::size_t count(const std::vector<int>& dims) {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                               [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
    }

    std::size_t size() const { return data.size(); }
    int dim(std::size_t i) const { return shape.at(i); }
    int rank() const { return static_cast<int>(shape.size()); }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }
    std::span<double> span() { return data; }
    std::span<const double> span() const { return data; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

std::string shape_string(const std::vector<int>& shape);

}  // namespace udalm
