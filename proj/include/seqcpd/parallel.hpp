#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#if defined(SEQCPD_HAVE_PAR)
#include <algorithm>
#include <execution>
#endif

namespace seqcpd {

/// Run f(i) for i in [0, n). Iterations must be independent; each writes its
/// own output slot, so results are identical regardless of thread count.
template <class F>
void parallel_for_index(long n, F&& f) {
    if (n <= 0) return;
#if defined(SEQCPD_HAVE_PAR)
    if (n > 1) {
        std::vector<long> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0L);
        std::for_each(std::execution::par, idx.begin(), idx.end(), [&](long i) { f(i); });
        return;
    }
#endif
    for (long i = 0; i < n; ++i) f(i);
}

/// Fixed stream-splitting mix so parallel replications draw from disjoint,
/// reproducible seeds.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace seqcpd
