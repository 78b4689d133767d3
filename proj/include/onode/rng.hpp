#pragma once

#include <cstdint>
#include <vector>

namespace onode {

// SplitMix64: the project-wide deterministic random stream. Every shuffle
// and parameter draw in the repo goes through this generator so that runs
// are bit-reproducible from a single 64-bit seed.
//
//   state += 0x9E3779B97F4A7C15 (golden-ratio increment), then two
//   xor-shift-multiply mixing rounds per output word.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1) built from the top 53 bits.
    double next_double() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Bounded draw by modulo. The tiny modulo bias is irrelevant for
    // shuffling and is accepted as part of the documented stream.
    std::uint64_t below(std::uint64_t n) {
        return n == 0 ? 0 : next() % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        // Fisher-Yates, descending index.
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

// Derives an independent child seed (per-epoch shuffles, sub-streams).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    SplitMix64 g(seed ^ (salt * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
    return g.next();
}

} // namespace onode
