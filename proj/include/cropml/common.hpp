#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cropml {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error hierarchy. Every named failure mode in the toolkit maps to one of
// these; the CLI turns them into exit codes and stderr messages.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define CROPML_ERROR(NAME)                                              \
    struct NAME : Error {                                               \
        explicit NAME(const std::string& msg) : Error(#NAME ": " + msg) {} \
    }

CROPML_ERROR(MissingColumn);
CROPML_ERROR(RaggedRow);
CROPML_ERROR(UnreadableFile);
CROPML_ERROR(EmptyInput);
CROPML_ERROR(AllClassesFiltered);
CROPML_ERROR(ClassTooSmall);
CROPML_ERROR(TooFewRows);
CROPML_ERROR(DimensionMismatch);
CROPML_ERROR(ClassSmallerThanK);
CROPML_ERROR(NonFinite);
CROPML_ERROR(KTooLarge);
CROPML_ERROR(DegenerateData);
CROPML_ERROR(WeakLearnerFailure);
CROPML_ERROR(InvalidSpec);
CROPML_ERROR(ValueOutOfRange);
CROPML_ERROR(FoldTooSmall);
CROPML_ERROR(NotTrained);
CROPML_ERROR(LengthMismatch);
CROPML_ERROR(BudgetExceeded);
CROPML_ERROR(MissingModel);
CROPML_ERROR(MissingData);
CROPML_ERROR(UnsupportedMethod);
CROPML_ERROR(IncompleteRun);

#undef CROPML_ERROR

// --- deterministic randomness -------------------------------------------
//
// All stochastic stages derive their generator from a master seed plus a
// stream id, so adding or reordering one stage never perturbs another.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream * 0x2545f4914f6cdd1dULL + 1));
}

// Minimal counter-free PRNG wrapper. Uniform doubles come from the top 53
// bits so the sequence is identical on every platform, unlike
// std::uniform_real_distribution.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x853c49e6748fea9bULL)) {}

    std::uint64_t next_u64() {
        state_ = splitmix64(state_);
        return state_;
    }

    // uniform in [0,1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    std::size_t next_index(std::size_t n) {
        return static_cast<std::size_t>(next_double() * static_cast<double>(n));
    }

    // standard normal via Box-Muller
    double next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

inline void check_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw NonFinite(what);
}

}  // namespace cropml
