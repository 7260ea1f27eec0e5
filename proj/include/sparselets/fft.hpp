#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <new>
#include <span>
#include <vector>

namespace sparselets {

using cdouble = std::complex<double>;

/// Allocator returning 64-byte aligned storage so that buffers can be handed
/// to FFTW plans created on other (equally aligned) buffers.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() noexcept = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), alignment));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using ComplexBuffer = std::vector<cdouble, AlignedAllocator<cdouble>>;

/// Square 2-D complex DFT of side n, in place, unnormalized in both directions.
///
/// Plans are built with FFTW_ESTIMATE so that the same input always runs the
/// same algorithm; measured plans may differ between runs and break
/// bit-for-bit reproducibility.
class Fft2d {
public:
    /// Shared plan for side n; plan creation is serialized internally.
    static std::shared_ptr<const Fft2d> get(int n);

    explicit Fft2d(int n);
    ~Fft2d();
    Fft2d(const Fft2d&) = delete;
    Fft2d& operator=(const Fft2d&) = delete;

    int size() const { return n_; }

    // Buffers must hold size()*size() values and come from AlignedAllocator.
    void forward(std::span<cdouble> data) const;
    void inverse(std::span<cdouble> data) const;

private:
    int n_;
    void* forward_plan_ = nullptr;
    void* inverse_plan_ = nullptr;
};

/// Signed frequency index of DFT bin k for a transform of length n.
/// The Nyquist bin (k == n/2) maps to -n/2.
inline int signed_frequency(int k, int n) { return k < (n + 1) / 2 ? k : k - n; }

}  // namespace sparselets
