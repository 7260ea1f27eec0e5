#include "sparselets/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

namespace sparselets {

namespace {
std::mutex& planner_mutex() {
    // Leaked on purpose: cached plans are destroyed during static teardown.
    static auto* m = new std::mutex;
    return *m;
}
}  // namespace

std::shared_ptr<const Fft2d> Fft2d::get(int n) {
    static std::mutex cache_mutex;
    static std::map<int, std::shared_ptr<const Fft2d>> cache;
    std::lock_guard lock(cache_mutex);
    auto& slot = cache[n];
    if (!slot) slot = std::make_shared<Fft2d>(n);
    return slot;
}

Fft2d::Fft2d(int n) : n_(n) {
    if (n <= 0) throw std::invalid_argument("Fft2d: size must be positive");
    ComplexBuffer scratch(static_cast<std::size_t>(n) * n);
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    std::lock_guard lock(planner_mutex());
    forward_plan_ = fftw_plan_dft_2d(n, n, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
    inverse_plan_ = fftw_plan_dft_2d(n, n, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!forward_plan_ || !inverse_plan_) throw std::runtime_error("Fft2d: FFTW planning failed");
}

Fft2d::~Fft2d() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

void Fft2d::forward(std::span<cdouble> data) const {
    if (data.size() != static_cast<std::size_t>(n_) * n_)
        throw std::invalid_argument("Fft2d::forward: buffer size mismatch");
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(static_cast<fftw_plan>(forward_plan_), p, p);
}

void Fft2d::inverse(std::span<cdouble> data) const {
    if (data.size() != static_cast<std::size_t>(n_) * n_)
        throw std::invalid_argument("Fft2d::inverse: buffer size mismatch");
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(static_cast<fftw_plan>(inverse_plan_), p, p);
}

}  // namespace sparselets
