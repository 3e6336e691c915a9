#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "fedbdpl/common.hpp"
#include "fedbdpl/gs_core.hpp"

namespace fedbdpl {

inline constexpr std::uint64_t kEnumerationLimit = 1'000'000;

// Number of distinct prompt sequences, guarded against overflow/blowup.
inline std::uint64_t sequence_count(std::size_t n, std::size_t N) {
    std::uint64_t total = 1;
    for (std::size_t i = 0; i < n; ++i) {
        total *= N;
        if (total > kEnumerationLimit)
            throw CapacityError("N^n exceeds the enumeration guard of 10^6");
    }
    return total;
}

// Decode sequence index -> prompt (mixed-radix, position 0 most significant).
inline PromptSequence decode_prompt(std::uint64_t idx, std::size_t n, std::size_t N) {
    PromptSequence seq(n);
    for (std::size_t i = n; i-- > 0;) {
        seq[i] = static_cast<int>(idx % N);
        idx /= N;
    }
    return seq;
}

// Visit every prompt sequence: fn(prompt, probability under p).
template <typename Fn>
void for_each_prompt(const ProbMatrix& p, Fn&& fn) {
    const std::size_t n = p.rows(), N = p.cols();
    const std::uint64_t total = sequence_count(n, N);
    for (std::uint64_t idx = 0; idx < total; ++idx) {
        PromptSequence seq = decode_prompt(idx, n, N);
        fn(seq, prompt_probability(p, seq));
    }
}

}  // namespace fedbdpl
