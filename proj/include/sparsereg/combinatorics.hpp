#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "sparsereg/core_model.hpp"

namespace sparsereg {

/// C(n, k), saturating at UINT64_MAX.
inline std::uint64_t binomial(std::int64_t n, std::int64_t k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 acc = 1;
    for (std::int64_t i = 1; i <= k; ++i) {
        acc = acc * static_cast<unsigned __int128>(n - k + i) / static_cast<unsigned __int128>(i);
        if (acc > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(acc);
}

/// Calls fn(subset) for every k-subset of `pool` in lexicographic order.
/// fn may return false to stop early.
template <class Fn>
void for_each_subset(const IndexSet& pool, Index k, Fn&& fn) {
    const Index n = static_cast<Index>(pool.size());
    if (k < 0 || k > n) return;
    std::vector<Index> pos(static_cast<std::size_t>(k));
    std::iota(pos.begin(), pos.end(), Index{0});
    IndexSet subset(static_cast<std::size_t>(k));
    for (;;) {
        for (Index i = 0; i < k; ++i) subset[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(pos[static_cast<std::size_t>(i)])];
        if constexpr (std::is_same_v<std::invoke_result_t<Fn, const IndexSet&>, bool>) {
            if (!fn(static_cast<const IndexSet&>(subset))) return;
        } else {
            fn(static_cast<const IndexSet&>(subset));
        }
        Index i = k - 1;
        while (i >= 0 && pos[static_cast<std::size_t>(i)] == n - k + i) --i;
        if (i < 0) return;
        ++pos[static_cast<std::size_t>(i)];
        for (Index j = i + 1; j < k; ++j) pos[static_cast<std::size_t>(j)] = pos[static_cast<std::size_t>(j - 1)] + 1;
    }
}

template <class Fn>
void for_each_subset(Index M, Index k, Fn&& fn) {
    IndexSet pool(static_cast<std::size_t>(M));
    std::iota(pool.begin(), pool.end(), Index{0});
    for_each_subset(pool, k, std::forward<Fn>(fn));
}

/// All k-subsets of {0..M-1} in lexicographic order.
inline std::vector<IndexSet> all_subsets(Index M, Index k) {
    std::vector<IndexSet> out;
    for_each_subset(M, k, [&](const IndexSet& s) { out.push_back(s); });
    return out;
}

/// Uniformly random sorted k-subset of `pool` (partial Fisher-Yates).
template <class Rng>
IndexSet random_subset(const IndexSet& pool, Index k, Rng& rng) {
    IndexSet p = pool;
    for (Index i = 0; i < k; ++i) {
        std::uniform_int_distribution<Index> pick(i, static_cast<Index>(p.size()) - 1);
        std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(pick(rng))]);
    }
    p.resize(static_cast<std::size_t>(k));
    std::sort(p.begin(), p.end());
    return p;
}

template <class Rng>
IndexSet random_subset(Index M, Index k, Rng& rng) {
    IndexSet pool(static_cast<std::size_t>(M));
    std::iota(pool.begin(), pool.end(), Index{0});
    return random_subset(pool, k, rng);
}

/// Psi restricted to rows I and columns J.
inline Matrix submatrix(const Matrix& psi, const IndexSet& I, const IndexSet& J) {
    Matrix out(static_cast<Index>(I.size()), static_cast<Index>(J.size()));
    for (std::size_t a = 0; a < I.size(); ++a)
        for (std::size_t b = 0; b < J.size(); ++b) out(static_cast<Index>(a), static_cast<Index>(b)) = psi(I[a], J[b]);
    return out;
}

inline Matrix columns(const Matrix& x, const IndexSet& J) {
    Matrix out(x.rows(), static_cast<Index>(J.size()));
    for (std::size_t b = 0; b < J.size(); ++b) out.col(static_cast<Index>(b)) = x.col(J[b]);
    return out;
}

}  // namespace sparsereg
