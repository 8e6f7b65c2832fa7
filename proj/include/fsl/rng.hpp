#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace fsl {

/// Explicit random stream. Every stochastic routine takes one of these as a
/// parameter; nothing in the library touches a global generator. Uniforms and
/// normals are produced from the raw engine output directly (not through
/// std::*_distribution) so that a (seed, stream) pair yields the same draws on
/// every platform.
class RngStream {
   public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : engine_(mix(seed, stream_id)), root_(seed), stream_(stream_id) {}

    /// Derive an independent child stream. Forking is deterministic and does
    /// not advance this stream.
    RngStream fork(std::uint64_t child_id) const {
        return RngStream(root_, mix(stream_, child_id));
    }

    /// Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1]; safe as a log() argument.
    double uniform_pos() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; the paired draw is cached.
    double gauss() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    Eigen::VectorXd gauss_vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = gauss();
        return v;
    }

    std::uint64_t raw() { return engine_(); }

   private:
    // splitmix64 finalizer; decorrelates (seed, stream) pairs.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
    std::uint64_t root_ = 0;
    std::uint64_t stream_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Standard normal CDF.
double gauss_cdf(double x);

/// Inverse standard normal CDF (Acklam rational approximation polished with
/// one Halley step; accurate to ~1e-15 on (0,1)).
double gauss_cdf_inv(double p);

/// Van der Corput radical-inverse sequence in the given base; k >= 1.
double van_der_corput(std::uint64_t k, std::uint64_t base = 2);

}  // namespace fsl
