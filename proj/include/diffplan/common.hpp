#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace diffplan {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;

// Error categories. The CLI maps these onto its exit codes.
struct generation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct artifact_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct dimension_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Non-finite value surfaced during an evaluation; `term` names the source.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& term_name)
        : std::runtime_error("non-finite value in term '" + term_name + "'"), term(term_name) {}
    std::string term;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Derive an independent stream seed from (base, stream index).
inline std::uint64_t sub_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(base ^ splitmix64(stream + 0x51ed2701u));
}

// Deterministic RNG. std:: distributions are implementation-defined, so every
// draw goes through explicit arithmetic that behaves the same on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n); modulo bias is negligible for n << 2^64
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(engine_() % static_cast<std::uint64_t>(n));
    }

    // standard normal via Box-Muller (cosine branch only, keeps draw order flat)
    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    Mat gaussian_matrix(Eigen::Index rows, Eigen::Index cols) {
        Mat m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = gaussian();
        return m;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(i)]);
    }

private:
    std::mt19937_64 engine_;
};

int resolve_threads(int requested);  // requested <= 0 selects the hardware count

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

inline double wrap_angle(double a) { return std::atan2(std::sin(a), std::cos(a)); }

inline double deg2rad(double d) { return d * M_PI / 180.0; }

}  // namespace diffplan
